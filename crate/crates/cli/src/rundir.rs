//! Output directory ownership, artifact IO and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const LOCK_FILE: &str = ".lock";
pub const MANIFEST: &str = "manifest.json";

/// Exclusive handle on a run directory. The lock file is removed on drop.
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!("run directory {} is locked by another process ({})", root.display(), lock.display())
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", lock.display())),
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    pub fn read(&self, name: &str) -> Result<String> {
        let p = self.path(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        serde_json::from_str(&self.read(name)?).with_context(|| format!("parsing {}", name))
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Fails listing every absent artifact.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<&str> = names.iter().copied().filter(|n| !self.exists(n)).collect();
        if !missing.is_empty() {
            bail!("missing artifacts in {}: {}", self.root.display(), missing.join(", "));
        }
        Ok(())
    }

    pub fn create(&self, name: &str) -> Result<File> {
        let p = self.path(name);
        File::create(&p).with_context(|| format!("creating {}", p.display()))
    }

    /// Records one command's configuration in the manifest.
    pub fn record(&self, command: &str, cfg: &RunConfig) -> Result<()> {
        let mut m: Manifest = if self.exists(MANIFEST) {
            self.read_json(MANIFEST)?
        } else {
            Manifest::default()
        };
        m.tool = env!("CARGO_PKG_NAME").to_string();
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.commands.insert(
            command.to_string(),
            ManifestEntry {
                config_hash: cfg.hash(),
                seed: cfg.seed,
                eval_seed: cfg.eval_seed,
                config: serde_json::to_value(cfg)?,
            },
        );
        self.write_json(MANIFEST, &m)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub commands: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config_hash: String,
    pub seed: u64,
    pub eval_seed: u64,
    pub config: serde_json::Value,
}
