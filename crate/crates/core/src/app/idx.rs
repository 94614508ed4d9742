//! IDX containers (the MNIST distribution format) for images and labels.

use std::fs;
use std::path::Path;

use crate::app::GrayImage;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse("truncated IDX header"))
}

pub fn parse_images(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    if be_u32(bytes, 0)? != IMAGES_MAGIC {
        return Err(Error::parse("not an IDX image file"));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if size == 0 || body.len() != n * size {
        return Err(Error::parse(format!(
            "IDX image body has {} bytes, expected {}",
            body.len(),
            n * size
        )));
    }
    body.chunks_exact(size)
        .map(|px| GrayImage::new(cols, rows, px.to_vec()))
        .collect()
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    if be_u32(bytes, 0)? != LABELS_MAGIC {
        return Err(Error::parse("not an IDX label file"));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::parse(format!("IDX label body has {} bytes, expected {n}", body.len())));
    }
    Ok(body.to_vec())
}

pub fn encode_images(images: &[GrayImage]) -> Result<Vec<u8>> {
    let (w, h) = images
        .first()
        .map(|i| (i.width(), i.height()))
        .ok_or_else(|| Error::param("no images"))?;
    let mut out = Vec::with_capacity(16 + images.len() * w * h);
    for v in [IMAGES_MAGIC, images.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::WidthMismatch("images differ in size".into()));
        }
        out.extend_from_slice(img.pixels());
    }
    Ok(out)
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Labelled image set.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<GrayImage>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn read(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let images = parse_images(&fs::read(images)?)?;
        let labels = parse_labels(&fs::read(labels)?)?;
        if images.len() != labels.len() {
            return Err(Error::parse(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(Dataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
