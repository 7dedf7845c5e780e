//! Host side of the streamcnn toolkit: network documents, raw word files,
//! reports, plan and analysis text, and the flows the `streamcnn` binary
//! runs. The model itself is in `streamcnn-core`.

pub mod analysis;
mod error;
pub mod formats;
pub mod netfile;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use netfile::{network_to_toml, parse_network, parse_network_with};
