use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::LandmarkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub text: String,
    /// Landmark CSV, relative to the manifest directory.
    pub landmark_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_path: Option<PathBuf>,
    /// Precomputed feature matrix (with `.json` sidecar).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_path: Option<PathBuf>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Self {
        Self {
            version: 1,
            entries,
            root: root.into(),
        }
    }

    /// Loads and validates a manifest: unique ids, non-empty text, and every
    /// referenced file present.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LandmarkError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| LandmarkError::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&src)
            .map_err(|e| LandmarkError::Manifest(format!("{}: {e}", path.display())))?;
        if m.version != 1 {
            return Err(LandmarkError::Manifest(format!(
                "unsupported manifest version {}",
                m.version
            )));
        }
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), LandmarkError> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(LandmarkError::Manifest(format!("duplicate id '{}'", e.id)));
            }
            if e.text.trim().is_empty() {
                return Err(LandmarkError::Manifest(format!("entry '{}' has no text", e.id)));
            }
            let files = std::iter::once(&e.landmark_path)
                .chain(e.wav_path.as_ref())
                .chain(e.features_path.as_ref());
            for f in files {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(LandmarkError::Manifest(format!(
                        "entry '{}': missing file {}",
                        e.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LandmarkError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| LandmarkError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, lm: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            text: "bin blue".into(),
            landmark_path: lm.into(),
            wav_path: None,
            features_path: None,
            split: Split::Train,
        }
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x").unwrap();
        let ok = DatasetManifest::new(vec![entry("a", "a.csv")], dir.path());
        ok.save(dir.path().join("m.json")).unwrap();
        let loaded = DatasetManifest::load(dir.path().join("m.json")).unwrap();
        assert_eq!(loaded.entries, ok.entries);

        let dup = DatasetManifest::new(vec![entry("a", "a.csv"), entry("a", "a.csv")], dir.path());
        assert!(dup.validate().unwrap_err().to_string().contains("duplicate"));
        let missing = DatasetManifest::new(vec![entry("b", "b.csv")], dir.path());
        assert!(missing.validate().unwrap_err().to_string().contains("missing file"));
    }
}
