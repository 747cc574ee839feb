use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{load_image, Image};
use crate::error::{RestoreError, Result};

/// Environment variable that points at a directory holding `manifest.toml`
/// and the images it lists.
pub const TEST_IMAGES_ENV: &str = "GSC_TEST_IMAGES";

const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: PathBuf,
    pub height: usize,
    pub width: usize,
    #[serde(default = "one")]
    pub channels: usize,
    /// Free-form provenance note.
    #[serde(default)]
    pub source: String,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestFile {
    #[serde(default)]
    image: Vec<ManifestEntry>,
}

/// `name -> path -> expected dimensions` table for the benchmark images.
#[derive(Debug, Clone)]
pub struct Manifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// The directory named by `GSC_TEST_IMAGES`, or the `testimages/`
    /// directory of this repository.
    pub fn default_dir() -> PathBuf {
        match std::env::var_os(TEST_IMAGES_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testimages"),
        }
    }

    pub fn load_default() -> Result<Self> {
        Self::load(Self::default_dir())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| RestoreError::Manifest(format!("{}: {}", path.display(), e)))?;
        Self::parse(&text, root)
    }

    pub fn parse(text: &str, root: PathBuf) -> Result<Self> {
        let parsed: ManifestFile =
            toml::from_str(text).map_err(|e| RestoreError::Manifest(e.to_string()))?;
        Ok(Self {
            root,
            entries: parsed.image,
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn path_of(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.file)
    }

    /// Load a listed image and check it against the recorded dimensions.
    pub fn load_image(&self, name: &str) -> Result<Image> {
        let entry = self
            .entry(name)
            .ok_or_else(|| RestoreError::Manifest(format!("no image named '{}'", name)))?;
        let img = load_image(self.path_of(entry))?;
        let expected = (entry.height, entry.width, entry.channels);
        if img.shape() != expected {
            return Err(RestoreError::ShapeMismatch {
                expected,
                actual: img.shape(),
            });
        }
        Ok(img)
    }
}
