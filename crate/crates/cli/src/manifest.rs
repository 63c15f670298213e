use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use privml::fvrns::OpCounters;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Record of one subcommand invocation. A copy is written next to every
/// artifact the run produces, as `<artifact>.manifest`.
///
/// The digest covers the subcommand, the path-free configuration, seeds and
/// the hashes of inputs and outputs. Paths and wallclock are recorded but do
/// not enter it, so two runs with the same configuration and seeds in
/// different directories share a digest exactly when their artifacts agree.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<(PathBuf, String)>,
    pub wallclock_s: f64,
    pub counters: Option<OpCounters>,
    started: Instant,
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::file(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: Vec::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wallclock_s: 0.0,
            counters: None,
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.into(), value.to_string()));
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.push((name.into(), seed));
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let h = file_sha256(path)?;
        self.inputs.push((path.to_path_buf(), h));
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let h = file_sha256(path)?;
        self.outputs.push((path.to_path_buf(), h));
        Ok(self)
    }

    pub fn config_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.subcommand.as_bytes());
        for (k, v) in &self.config {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config_digest().as_bytes());
        for (k, s) in &self.seeds {
            h.update(format!("\nseed {k}={s}").as_bytes());
        }
        for (_, d) in &self.inputs {
            h.update(format!("\ninput {d}").as_bytes());
        }
        for (_, d) in &self.outputs {
            h.update(format!("\noutput {d}").as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("privml-manifest 1\n");
        let _ = writeln!(s, "subcommand {}", self.subcommand);
        let _ = writeln!(s, "config_digest {}", self.config_digest());
        for (k, v) in &self.config {
            let _ = writeln!(s, "config {k}={v}");
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(s, "seed {k}={v}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(s, "input {} {d}", p.display());
        }
        for (p, d) in &self.outputs {
            let _ = writeln!(s, "output {} {d}", p.display());
        }
        let _ = writeln!(s, "wallclock_s {:.6}", self.wallclock_s);
        if let Some(c) = self.counters {
            let _ = writeln!(
                s,
                "counters ct_mults={} plain_mults={} additions={}",
                c.ct_mults, c.plain_mults, c.additions
            );
        }
        let _ = writeln!(s, "digest {}", self.digest());
        s
    }

    /// Stops the clock and writes the sidecar next to every output. Returns
    /// the manifest digest.
    pub fn finish(&mut self) -> Result<String, CliError> {
        self.wallclock_s = self.started.elapsed().as_secs_f64();
        let text = self.to_text();
        for (p, _) in &self.outputs {
            let side = sidecar(p);
            fs::write(&side, &text).map_err(|e| CliError::file(&side, e))?;
        }
        Ok(self.digest())
    }
}

pub fn sidecar(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Reads the `digest` line back from a sidecar.
pub fn read_digest(artifact: &Path) -> Result<String, CliError> {
    let side = sidecar(artifact);
    let text = fs::read_to_string(&side).map_err(|e| CliError::file(&side, e))?;
    text.lines()
        .find_map(|l| l.strip_prefix("digest "))
        .map(str::to_owned)
        .ok_or_else(|| CliError::Input(format!("{} has no digest line", side.display())))
}
