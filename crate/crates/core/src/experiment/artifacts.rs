//! Output directory with a lock file, checksummed files and PGM images.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::grid::{snapshot, ScalarField, VectorField};

pub const LOCK_NAME: &str = ".llg-lattice.lock";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Linear gray scale of one PGM image: 0 maps to `min`, 255 to `max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEntry {
    pub path: String,
    pub quantity: String,
    pub min: f64,
    pub max: f64,
}

/// Exclusive handle on an output directory; the lock is released on drop.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    images: Vec<ImageEntry>,
    summary: BTreeMap<String, Value>,
}

fn io_error(path: &Path, err: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        reason: err.to_string(),
    }
}

impl OutputDir {
    pub fn open(root: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == ErrorKind::AlreadyExists => return Err(ExperimentError::Locked(root.to_path_buf())),
            Err(e) => return Err(io_error(&lock, e)),
        }
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            images: Vec::new(),
            summary: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes whatever `fill` produces into `name`.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>,
    ) -> Result<(), ExperimentError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_snapshot(&mut self, name: &str, field: &VectorField) -> Result<(), ExperimentError> {
        self.write(name, &snapshot::encode(field))
    }

    /// 8-bit binary PGM, rows from the largest `y` down, values mapped
    /// linearly from `[min, max]` onto `[0, 255]`.
    pub fn write_pgm(&mut self, name: &str, quantity: &str, field: &ScalarField) -> Result<(), ExperimentError> {
        let bytes = encode_pgm(field);
        let (min, max) = value_range(field);
        self.write(name, &bytes)?;
        self.images.push(ImageEntry {
            path: name.to_string(),
            quantity: quantity.to_string(),
            min,
            max,
        });
        Ok(())
    }

    pub fn record(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub(crate) fn records(&self) -> (Vec<FileEntry>, Vec<ImageEntry>, BTreeMap<String, Value>) {
        (self.files.clone(), self.images.clone(), self.summary.clone())
    }

    pub(crate) fn write_manifest(&mut self, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.root.join(MANIFEST_NAME);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}

fn value_range(field: &ScalarField) -> (f64, f64) {
    field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn encode_pgm(field: &ScalarField) -> Vec<u8> {
    let spec = field.spec();
    let (min, max) = value_range(field);
    let span = max - min;
    let mut out = format!("P5\n{} {}\n255\n", spec.nx(), spec.ny()).into_bytes();
    for iy in (0..spec.ny()).rev() {
        for ix in 0..spec.nx() {
            let v = field.get(ix, iy);
            let level = if span > 0.0 { (255.0 * (v - min) / span).round() } else { 0.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn pgm_rows_run_from_the_top() {
        let spec = GridSpec::periodic(4, 0.25).unwrap();
        let f = ScalarField::from_fn(spec, |_, iy| iy as f64);
        let bytes = encode_pgm(&f);
        let header = b"P5\n4 4\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body.len(), 16);
        assert!(body[..4].iter().all(|&b| b == 255));
        assert!(body[12..].iter().all(|&b| b == 0));
        assert_eq!(body[4], 170);
    }

    #[test]
    fn second_open_is_locked_until_drop() {
        let tmp = tempfile::tempdir().unwrap();
        let first = OutputDir::open(tmp.path()).unwrap();
        assert!(matches!(OutputDir::open(tmp.path()), Err(ExperimentError::Locked(_))));
        drop(first);
        let mut again = OutputDir::open(tmp.path()).unwrap();
        again.write("a.csv", b"x\n").unwrap();
        again.write("a.csv", b"y\n").unwrap();
        let (files, _, _) = again.records();
        assert_eq!(files.len(), 1);
        assert_eq!(files[0].sha256, hex::encode(Sha256::digest(b"y\n")));
    }
}
