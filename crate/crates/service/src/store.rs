//! Named scenarios and their computed artifacts, persisted on disk.
//!
//! ```text
//! <root>/<name>/scenario.toml
//! <root>/<name>/meta.json            {"version": n}
//! <root>/<name>/artifacts/<kind>-v<n>.json
//! ```
//!
//! Every accepted edit bumps the version. Edits carry the version they were
//! based on and are refused when it is stale, so two editors working from
//! the same snapshot cannot both win.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::scenario::{parse_scenario, FieldError, Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub version: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("no session named {0}")]
    NotFound(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("version conflict: edit based on version {expected}, current is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("store fault: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    version: u64,
}

pub struct SessionStore {
    root: PathBuf,
    // Serializes every read and write so a reader never sees a scenario
    // paired with the wrong version.
    lock: Mutex<()>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Writes through a sibling temporary file so a crash never leaves a
/// half-written file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Re-reads the scenario through its text form, which both validates it and
/// guarantees what is stored is exactly what a later load returns.
fn canonical(scenario: &Scenario) -> Result<(String, Scenario), StoreError> {
    let text = scenario.to_toml();
    match parse_scenario(&text) {
        Ok(s) => Ok((text, s)),
        Err(ScenarioError::Invalid(fields)) => Err(StoreError::Invalid(fields)),
        Err(e) => Err(StoreError::Io(format!("scenario does not survive serialization: {e}"))),
    }
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn guard(&self) -> std::sync::MutexGuard<'_, ()> {
        // A panic elsewhere cannot leave the files half-updated, so a
        // poisoned lock is safe to reuse.
        self.lock.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn dir(&self, name: &str) -> Result<PathBuf, StoreError> {
        if !valid_name(name) {
            return Err(StoreError::NotFound(name.to_string()));
        }
        Ok(self.root.join(name))
    }

    pub fn sessions(&self) -> Result<Vec<String>, StoreError> {
        let _g = self.guard();
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join("meta.json").is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        Ok(names)
    }

    fn read(&self, name: &str) -> Result<Snapshot, StoreError> {
        let dir = self.dir(name)?;
        let meta_path = dir.join("meta.json");
        if !meta_path.is_file() {
            return Err(StoreError::NotFound(name.to_string()));
        }
        let meta: Meta = serde_json::from_slice(&fs::read(&meta_path)?)
            .map_err(|e| StoreError::Io(format!("{}: {e}", meta_path.display())))?;
        let text = fs::read_to_string(dir.join("scenario.toml"))?;
        let scenario = parse_scenario(&text).map_err(|e| StoreError::Io(format!("stored scenario {name}: {e}")))?;
        Ok(Snapshot {
            version: meta.version,
            scenario,
        })
    }

    fn write(&self, name: &str, text: &str, version: u64) -> Result<(), StoreError> {
        let dir = self.dir(name)?;
        fs::create_dir_all(dir.join("artifacts"))?;
        write_atomic(&dir.join("scenario.toml"), text.as_bytes())?;
        let meta = serde_json::to_vec(&Meta { version }).expect("meta serializes");
        write_atomic(&dir.join("meta.json"), &meta)
    }

    pub fn get(&self, name: &str) -> Result<Snapshot, StoreError> {
        let _g = self.guard();
        self.read(name)
    }

    /// Stores a new session at version 1, named after the scenario.
    pub fn create(&self, scenario: &Scenario) -> Result<Snapshot, StoreError> {
        let _g = self.guard();
        let name = &scenario.name;
        if self.dir(name)?.join("meta.json").exists() {
            return Err(StoreError::Exists(name.clone()));
        }
        let (text, scenario) = canonical(scenario)?;
        self.write(name, &text, 1)?;
        Ok(Snapshot { version: 1, scenario })
    }

    /// Replaces the scenario if `expected_version` is still current.
    pub fn update(&self, name: &str, expected_version: u64, scenario: &Scenario) -> Result<Snapshot, StoreError> {
        let _g = self.guard();
        let current = self.read(name)?;
        if current.version != expected_version {
            return Err(StoreError::Conflict {
                expected: expected_version,
                current: current.version,
            });
        }
        if scenario.name != name {
            return Err(StoreError::Invalid(vec![FieldError {
                field: "name".into(),
                message: format!("session {name} cannot be renamed to {}", scenario.name),
            }]));
        }
        let (text, scenario) = canonical(scenario)?;
        let version = current.version + 1;
        self.write(name, &text, version)?;
        Ok(Snapshot { version, scenario })
    }

    /// Creates the session, or updates it when the stored scenario differs.
    pub fn import(&self, scenario: &Scenario) -> Result<Snapshot, StoreError> {
        match self.get(&scenario.name) {
            Err(StoreError::NotFound(_)) => self.create(scenario),
            Err(e) => Err(e),
            Ok(current) if &current.scenario == scenario => Ok(current),
            Ok(current) => self.update(&scenario.name, current.version, scenario),
        }
    }

    fn artifact_path(&self, name: &str, kind: &str, version: u64) -> Result<PathBuf, StoreError> {
        if !valid_name(kind) {
            return Err(StoreError::Io(format!("bad artifact kind {kind:?}")));
        }
        Ok(self.dir(name)?.join("artifacts").join(format!("{kind}-v{version}.json")))
    }

    /// Saves a computed result next to the scenario version it came from.
    pub fn save_artifact<T: Serialize>(
        &self,
        name: &str,
        kind: &str,
        version: u64,
        value: &T,
    ) -> Result<PathBuf, StoreError> {
        let _g = self.guard();
        let path = self.artifact_path(name, kind, version)?;
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| StoreError::Io(e.to_string()))?;
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    pub fn load_artifact(&self, name: &str, kind: &str, version: u64) -> Result<Option<serde_json::Value>, StoreError> {
        let _g = self.guard();
        let path = self.artifact_path(name, kind, version)?;
        if !path.is_file() {
            return Ok(None);
        }
        serde_json::from_slice(&fs::read(&path)?)
            .map(Some)
            .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
    }
}
