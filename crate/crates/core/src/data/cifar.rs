//! Loader for the classic binary classification format: fixed 3073-byte
//! records, one label byte followed by three planar 32x32 channel dumps.
//! A dataset path may be a single `.bin` file or a directory holding
//! `data_batch_*.bin` (training split) and `test_batch.bin` (test split).

use crate::error::{Error, Result};
use crate::qtensor::ImageBuf;
use std::fs;
use std::path::Path;

pub const IMAGE_SIDE: usize = 32;
pub const RECORD_LEN: usize = 1 + 3 * IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

/// Images with their class labels, in file order.
#[derive(Clone, Debug, Default)]
pub struct LabeledImages {
    pub images: Vec<ImageBuf>,
    pub labels: Vec<u8>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keep only the first `n` examples (a no-op if `n` exceeds the set).
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        self.labels.truncate(n);
    }

    fn extend_from(&mut self, mut other: LabeledImages) {
        self.images.append(&mut other.images);
        self.labels.append(&mut other.labels);
    }
}

/// Which portion of a dataset directory to read. Ignored for single files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Load a dataset file or directory. Directories use the conventional batch
/// file names; files are read whole regardless of split.
pub fn load_labeled(path: &Path, split: Split) -> Result<LabeledImages> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        load_dir(path, split)
    } else {
        load_file(path)
    }
}

fn load_dir(dir: &Path, split: Split) -> Result<LabeledImages> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| match split {
            Split::Train => name.starts_with("data_batch_") && name.ends_with(".bin"),
            Split::Test => name == "test_batch.bin",
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::data(
            dir,
            format!(
                "no {} found",
                match split {
                    Split::Train => "data_batch_*.bin files",
                    Split::Test => "test_batch.bin",
                }
            ),
        ));
    }
    let mut all = LabeledImages::default();
    for name in names {
        all.extend_from(load_file(&dir.join(name))?);
    }
    Ok(all)
}

/// Read one record file; length must be an exact multiple of the record
/// size and every label must be a valid class.
pub fn load_file(path: &Path) -> Result<LabeledImages> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::data(path, "file is empty"));
    }
    if bytes.len() % RECORD_LEN != 0 {
        return Err(Error::data(
            path,
            format!(
                "{} bytes is not a whole number of {RECORD_LEN}-byte records (truncated file?)",
                bytes.len()
            ),
        ));
    }
    let n = bytes.len() / RECORD_LEN;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let area = IMAGE_SIDE * IMAGE_SIDE;
    for (ri, rec) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let label = rec[0];
        if label as usize >= NUM_CLASSES {
            return Err(Error::data(
                path,
                format!("record {ri} has label {label}, expected 0..{}", NUM_CLASSES - 1),
            ));
        }
        let mut img = ImageBuf::new(IMAGE_SIDE, IMAGE_SIDE);
        // Planar channel dumps follow the label byte.
        for ch in 0..3 {
            let plane = &rec[1 + ch * area..1 + (ch + 1) * area];
            for (i, &b) in plane.iter().enumerate() {
                img.data[i * 3 + ch] = b as f32 / 255.0;
            }
        }
        images.push(img);
        labels.push(label);
    }
    Ok(LabeledImages { images, labels })
}
