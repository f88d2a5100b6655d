//! On-disk record cache: one JSON file per cell key, immutable once written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crossguide_core::analysis::{CellKey, RecordStore, SweepRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "CROSSGUIDE_CACHE";
pub const DEFAULT_DIR: &str = ".crossguide-cache";

/// Prefix of every integrity failure message.
pub const INTEGRITY: &str = "cache integrity";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: CellKey,
    record: SweepRecord,
    /// SHA-256 of the record's JSON encoding.
    digest: String,
}

fn digest(record: &SweepRecord) -> Result<String, String> {
    let bytes = serde_json::to_vec(record).map_err(|e| e.to_string())?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

#[derive(Debug)]
pub struct ResultCache {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl ResultCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CellKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.canonical()))
    }

    fn read(&self, key: &CellKey, path: &Path) -> Result<SweepRecord, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let entry: Entry =
            serde_json::from_str(&text).map_err(|e| format!("{INTEGRITY}: {} is unreadable: {e}", path.display()))?;
        if &entry.key != key {
            return Err(format!("{INTEGRITY}: {} holds a different key", path.display()));
        }
        if digest(&entry.record)? != entry.digest {
            return Err(format!("{INTEGRITY}: {} does not match its digest", path.display()));
        }
        Ok(entry.record)
    }
}

impl RecordStore for ResultCache {
    fn load(&self, key: &CellKey) -> Result<Option<SweepRecord>, String> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        self.read(key, &path).map(Some)
    }

    fn save(&self, key: &CellKey, record: &SweepRecord) -> Result<(), String> {
        let path = self.path_for(key);
        if path.exists() {
            let old = self.read(key, &path)?;
            return if &old == record {
                Ok(())
            } else {
                Err(format!("{INTEGRITY}: {} already holds a different record", path.display()))
            };
        }
        let entry = Entry {
            key: key.clone(),
            record: record.clone(),
            digest: digest(record)?,
        };
        let body = serde_json::to_string_pretty(&entry).map_err(|e| e.to_string())?;
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            key.canonical(),
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            format!("writing {}: {e}", path.display())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crossguide_core::analysis::{solve_cell, GridSpec, SolveSettings};
    use crossguide_core::SymmetryClass;

    fn cell() -> (CellKey, SweepRecord) {
        let spec = GridSpec::new("t", 4.0, 32);
        let s = SolveSettings::default();
        let r = solve_cell(SymmetryClass::EvenEven, 1.2, &spec, &s).unwrap().record;
        (CellKey::new(SymmetryClass::EvenEven, 1.2, &spec, &s), r)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        let (key, rec) = cell();
        assert_eq!(cache.load(&key).unwrap(), None);
        cache.save(&key, &rec).unwrap();
        assert_eq!(cache.load(&key).unwrap(), Some(rec.clone()));
        cache.save(&key, &rec).unwrap();
        let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
    }

    #[test]
    fn differing_payload_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        let (key, rec) = cell();
        cache.save(&key, &rec).unwrap();
        let mut other = rec.clone();
        other.eigenvalue += 1e-9;
        assert!(cache.save(&key, &other).unwrap_err().starts_with(INTEGRITY));

        let path = cache.path_for(&key);
        let text = fs::read_to_string(&path).unwrap();
        let tampered = text.replacen(&format!("\"eigenvalue\": {:?}", rec.eigenvalue), "\"eigenvalue\": 1.5", 1);
        assert_ne!(text, tampered);
        fs::write(&path, tampered).unwrap();
        assert!(cache.load(&key).unwrap_err().starts_with(INTEGRITY));
    }
}
