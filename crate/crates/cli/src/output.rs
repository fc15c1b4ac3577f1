//! Artifact writers. Every file goes through [`Artifacts`] so the run
//! manifest can list it with its checksum.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use sreels_core::EelsSpectrum;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct EelsRow {
    pub loss_index: i64,
    #[serde(rename = "energy_eV")]
    pub energy_ev: f64,
    pub probability: f64,
}

#[derive(Debug, Serialize)]
pub struct DelayEelsRow {
    pub delay_fs: f64,
    pub loss_index: i64,
    #[serde(rename = "energy_eV")]
    pub energy_ev: f64,
    pub probability: f64,
}

pub fn eels_rows(sp: &EelsSpectrum, hbar_omega0: f64) -> Vec<EelsRow> {
    sp.iter()
        .map(|(l, p)| EelsRow { loss_index: l, energy_ev: l as f64 * hbar_omega0, probability: p })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    experiment: &'static str,
    seed: Option<u64>,
    config: &'a serde_json::Value,
    settings: &'a serde_json::Value,
    outputs: &'a [FileRecord],
}

pub struct Artifacts {
    dir: PathBuf,
    records: Vec<FileRecord>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), records: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|source| CliError::Io { path, source })?;
        self.records.push(FileRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let io_err = |e: csv::Error| CliError::Io { path: self.dir.join(name), source: std::io::Error::other(e) };
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(io_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io { path: self.dir.join(name), source: e.into_error() })?;
        self.put(name, bytes)
    }

    pub fn json<V: Serialize>(&mut self, name: &str, value: &V) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serialises");
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    /// Writes `run.json` listing every artifact written so far.
    pub fn finish(
        self,
        experiment: &'static str,
        seed: Option<u64>,
        config: &impl Serialize,
        settings: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let config = serde_json::to_value(config).expect("config serialises");
        let manifest = Manifest {
            tool: "sreels",
            version: env!("CARGO_PKG_VERSION"),
            core_version: sreels_core::VERSION,
            experiment,
            seed,
            config: &config,
            settings: &settings,
            outputs: &self.records,
        };
        let path = self.dir.join("run.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}
