//! TOML network documents.
//!
//! ```toml
//! [input]
//! channels = 3
//! rows = 32
//! cols = 32
//!
//! [format]
//! frac_bits = 8
//!
//! [[layers]]
//! type = "conv"
//! fo = 64
//! k = 5
//! stride = 1
//! pad = 2
//! relu = true
//!
//! [[layers]]
//! type = "pool"
//! pool_kind = "max"
//! k = 2
//! stride = 2
//! ```
//!
//! A convolution takes its input channel count from the layer before it.
//! Weights are not part of the document; they live in a separate weight file.

use serde::{Deserialize, Serialize};
use streamcnn_core::{ConvLayerDesc, FxpFormat, Layer, NetworkDesc, PoolKind, PoolLayerDesc, Shape};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetFile {
    pub input: InputSection,
    #[serde(default)]
    pub layers: Vec<LayerEntry>,
    pub format: FormatSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatSection {
    pub frac_bits: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerType {
    Conv,
    Pool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKindName {
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    #[serde(rename = "type")]
    pub kind: LayerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fo: Option<usize>,
    pub k: usize,
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relu: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_kind: Option<PoolKindName>,
}

impl NetFile {
    /// Build the validated network, with all-zero weights. `frac_bits`
    /// overrides the document's format when given.
    pub fn to_network(&self, frac_bits: Option<u8>) -> Result<NetworkDesc> {
        let format = FxpFormat::new(frac_bits.unwrap_or(self.format.frac_bits))?;
        let input = Shape::new(self.input.channels, self.input.rows, self.input.cols);
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut shape = input;
        for (index, entry) in self.layers.iter().enumerate() {
            let bad = |reason: String| Error::Schema(format!("layer {index}: {reason}"));
            let layer = match entry.kind {
                LayerType::Conv => {
                    if entry.pool_kind.is_some() {
                        return Err(bad("pool_kind given on a conv layer".into()));
                    }
                    let fo = entry.fo.ok_or_else(|| bad("conv layer needs fo".into()))?;
                    Layer::Conv(ConvLayerDesc::new(
                        shape.channels,
                        fo,
                        entry.k,
                        entry.stride,
                        entry.pad.unwrap_or(0),
                        entry.relu.unwrap_or(false),
                    ))
                }
                LayerType::Pool => {
                    if entry.fo.is_some() || entry.relu.is_some() {
                        return Err(bad("fo and relu are conv-only fields".into()));
                    }
                    if entry.pad.unwrap_or(0) != 0 {
                        return Err(bad("pooling takes no padding".into()));
                    }
                    let kind = match entry.pool_kind {
                        Some(PoolKindName::Max) => PoolKind::Max,
                        Some(PoolKindName::Avg) => PoolKind::Avg,
                        None => return Err(bad("pool layer needs pool_kind".into())),
                    };
                    Layer::Pool(PoolLayerDesc {
                        kind,
                        k: entry.k,
                        stride: entry.stride,
                    })
                }
            };
            // Shape errors surface later with the same layer index; stop
            // tracking once a kernel no longer fits.
            if let Some(next) = layer.output_shape(shape) {
                shape = next;
            }
            layers.push(layer);
        }
        Ok(NetworkDesc::new(input, layers, format)?)
    }

    pub fn from_network(net: &NetworkDesc) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv(c) => LayerEntry {
                    kind: LayerType::Conv,
                    fo: Some(c.fo),
                    k: c.k,
                    stride: c.stride,
                    pad: Some(c.pad),
                    relu: Some(c.relu),
                    pool_kind: None,
                },
                Layer::Pool(p) => LayerEntry {
                    kind: LayerType::Pool,
                    fo: None,
                    k: p.k,
                    stride: p.stride,
                    pad: None,
                    relu: None,
                    pool_kind: Some(match p.kind {
                        PoolKind::Max => PoolKindName::Max,
                        PoolKind::Avg => PoolKindName::Avg,
                    }),
                },
            })
            .collect();
        NetFile {
            input: InputSection {
                channels: net.input.channels,
                rows: net.input.rows,
                cols: net.input.cols,
            },
            layers,
            format: FormatSection {
                frac_bits: net.format.frac_bits(),
            },
        }
    }
}

pub fn parse_network(text: &str) -> Result<NetworkDesc> {
    parse_network_with(text, None)
}

pub fn parse_network_with(text: &str, frac_bits: Option<u8>) -> Result<NetworkDesc> {
    let doc: NetFile = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
    doc.to_network(frac_bits)
}

pub fn network_to_toml(net: &NetworkDesc) -> String {
    toml::to_string(&NetFile::from_network(net)).expect("network document always serializes")
}
