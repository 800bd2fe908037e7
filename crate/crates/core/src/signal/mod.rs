//! Array responses, channel synthesis and 1-bit observations.

pub mod array;
pub mod cdl;
pub mod channel;
pub mod quantize;

pub use array::{ula_response, upa_response, ArrayGeometry, ArrayKind};
pub use cdl::{load_cdlc, realize_cdlc, realize_cdlc_paths, CdlCProfile, CdlConfig, Cluster};
pub use channel::{
    add_noise, complex_normal, convolve, narrowband_channel, repeat_column, wideband_receive, Path,
    PathSet, RaisedCosine, Received, WidebandChannel,
};
pub use quantize::{quantize, quantize_1bit, QuantizedSnapshot};
