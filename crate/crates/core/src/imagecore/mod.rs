//! Image, depth and field representations, file I/O, resampling and
//! Gaussian low-pass filtering.

mod depth;
mod filter;
mod io;
mod resize;
mod types;

pub use depth::{normalize_depth, synthetic_depth, SyntheticDepth};
pub use filter::{convolve_adjoint_replicate, convolve_replicate, gaussian_kernel, GaussianKernel};
pub use io::{
    decode_pfm, decode_png, encode_pfm, encode_png, image_from_rgb8, load_depth, load_image, quantize,
    save_depth, save_image,
};
pub use resize::Bilinear;
pub use types::{DepthMap, Image, ImageGrad, ScalarField, CHANNELS};

pub(crate) use types::ensure_same_dims;
