//! Buffered artifact writer. Nothing touches the output directory until
//! [`ArtifactWriter::commit`], so a failing run leaves no partial artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

#[derive(Default)]
pub struct ArtifactWriter {
    files: Mutex<BTreeMap<PathBuf, Vec<u8>>>,
}

impl ArtifactWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queues `content` under the relative path `rel`. Paths must be unique.
    pub fn add(&self, rel: impl Into<PathBuf>, content: impl Into<Vec<u8>>) {
        let rel = rel.into();
        let previous = self.files.lock().unwrap().insert(rel.clone(), content.into());
        assert!(previous.is_none(), "artifact {} written twice", rel.display());
    }

    pub fn len(&self) -> usize {
        self.files.lock().unwrap().len()
    }

    /// Writes every artifact below `root`, then the manifest. Each file goes
    /// to a temporary sibling first and is renamed into place.
    pub fn commit(
        self,
        root: &Path,
        command: &str,
        config_sha256: String,
        inputs: Vec<FileDigest>,
    ) -> io::Result<PathBuf> {
        let files = self.files.into_inner().unwrap();
        let artifacts = files
            .iter()
            .map(|(rel, bytes)| FileDigest {
                path: rel_string(rel),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
            .collect();
        for (rel, bytes) in &files {
            write_atomic(&root.join(rel), bytes)?;
        }
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256,
            inputs,
            artifacts,
        };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        let path = root.join(format!("manifest-{command}.json"));
        write_atomic(&path, &json)?;
        Ok(path)
    }
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
