//! Raw little-endian word files: weights and tensors (`i16`), command
//! streams (`u16`). None of them carries a header.

use std::fs;
use std::path::Path;

use streamcnn_core::{FxpFormat, NetworkDesc, Shape, Tensor};

use crate::error::{Error, Result};

pub fn i16_from_bytes(bytes: &[u8]) -> Option<Vec<i16>> {
    if !bytes.len().is_multiple_of(2) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect(),
    )
}

pub fn i16_to_bytes(words: &[i16]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

pub fn u16_from_bytes(bytes: &[u8]) -> Option<Vec<u16>> {
    if !bytes.len().is_multiple_of(2) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect(),
    )
}

pub fn u16_to_bytes(words: &[u16]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_i16_file(path: &Path) -> Result<Vec<i16>> {
    let bytes = read(path)?;
    i16_from_bytes(&bytes).ok_or_else(|| Error::format(path, "truncated: odd byte count"))
}

pub fn write_i16_file(path: &Path, words: &[i16]) -> Result<()> {
    write_bytes(path, &i16_to_bytes(words))
}

pub fn read_u16_file(path: &Path) -> Result<Vec<u16>> {
    let bytes = read(path)?;
    u16_from_bytes(&bytes).ok_or_else(|| Error::format(path, "truncated: odd byte count"))
}

pub fn write_u16_file(path: &Path, words: &[u16]) -> Result<()> {
    write_bytes(path, &u16_to_bytes(words))
}

/// Fill `net` from a weight file: layer order, `[io][ii][i][j]`, then biases.
pub fn load_weights(path: &Path, net: &mut NetworkDesc) -> Result<()> {
    let words = read_i16_file(path)?;
    net.load_weight_words(&words)
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_weights(path: &Path, net: &NetworkDesc) -> Result<()> {
    write_i16_file(path, &net.weight_words())
}

/// A tensor file holds exactly `shape.len()` words, channel-major.
pub fn load_tensor(path: &Path, shape: Shape, format: FxpFormat) -> Result<Tensor> {
    let words = read_i16_file(path)?;
    if words.len() != shape.len() {
        let what = if words.len() < shape.len() {
            "truncated"
        } else {
            "size mismatch"
        };
        return Err(Error::format(
            path,
            format!(
                "{what}: {} words, tensor {shape} needs {}",
                words.len(),
                shape.len()
            ),
        ));
    }
    Ok(Tensor::from_raw(shape, format, words)?)
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_i16_file(path, t.raw())
}
