//! IDX reader/writer (the MNIST distribution format).
//!
//! Images: magic `0x00000803`, then big-endian u32 count, rows, cols, then
//! one unsigned byte per pixel. Labels: magic `0x00000801`, count, then one
//! byte per label.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use super::{Dataset, LearningError, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn idx_err(msg: impl Into<String>) -> LearningError {
    LearningError::Idx(msg.into())
}

fn header(cur: &mut Cursor<Vec<u8>>, what: &str) -> Result<u32> {
    cur.read_u32::<BigEndian>()
        .map_err(|_| idx_err(format!("truncated {what} header")))
}

/// Loads an image/label file pair; pixel bytes are scaled to `[0, 1]`.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let mut img = Cursor::new(fs::read(images)?);
    let magic = header(&mut img, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(idx_err(format!("bad images magic number {magic:#010x}")));
    }
    let count = header(&mut img, "images")? as usize;
    let rows = header(&mut img, "images")? as usize;
    let cols = header(&mut img, "images")? as usize;
    let dim = rows * cols;
    let mut pixels = vec![0u8; count * dim];
    img.read_exact(&mut pixels)
        .map_err(|_| idx_err(format!("truncated images file: expected {count} images of {dim} bytes")))?;

    let mut lab = Cursor::new(fs::read(labels)?);
    let magic = header(&mut lab, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(idx_err(format!("bad labels magic number {magic:#010x}")));
    }
    let label_count = header(&mut lab, "labels")? as usize;
    if label_count != count {
        return Err(idx_err(format!(
            "count mismatch: {count} images but {label_count} labels"
        )));
    }
    let mut raw = vec![0u8; count];
    lab.read_exact(&mut raw)
        .map_err(|_| idx_err(format!("truncated labels file: expected {count} labels")))?;

    let labels: Vec<usize> = raw.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1).max(10);
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Dataset::new(features, dim, labels, classes)
}

/// Writes `data` as an IDX pair with the given image shape. Features are
/// quantized from `[0, 1]` back to bytes.
pub fn write_idx(
    data: &Dataset,
    rows: usize,
    cols: usize,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != data.dim() {
        return Err(LearningError::DimensionMismatch {
            expected: data.dim(),
            got: rows * cols,
        });
    }
    let mut img = Vec::with_capacity(16 + data.len() * data.dim());
    img.write_u32::<BigEndian>(IMAGES_MAGIC)?;
    img.write_u32::<BigEndian>(data.len() as u32)?;
    img.write_u32::<BigEndian>(rows as u32)?;
    img.write_u32::<BigEndian>(cols as u32)?;
    for r in 0..data.len() {
        for &v in data.row(r) {
            img.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.write_u32::<BigEndian>(LABELS_MAGIC)?;
    lab.write_u32::<BigEndian>(data.len() as u32)?;
    for &l in data.labels() {
        lab.write_u8(l as u8)?;
    }
    fs::File::create(images)?.write_all(&img)?;
    fs::File::create(labels)?.write_all(&lab)?;
    Ok(())
}
