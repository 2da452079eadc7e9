//! Gaussian blur augmentation.
//!
//! Kernels are sampled from the 2-D Gaussian density at integer offsets and
//! normalized to unit sum. Images are convolved per channel with mirror
//! borders and rounded half-up back to 8 bits.

mod augment;
mod kernel;
mod plane;
pub mod pnm;

use std::path::PathBuf;

use thiserror::Error;

pub use augment::{augment_directory, AugmentReport, SkippedFile};
pub use kernel::{
    build_kernel, gaussian_density_1d, gaussian_density_2d, gaussian_density_nd,
    GaussianKernelSpec, KernelMatrix,
};
pub use plane::{
    blur_channel_real, blur_channel_real_separable, blur_plane, blur_plane_direct, ImagePlane,
};

#[derive(Debug, Error)]
pub enum BlurError {
    #[error("sigma must be finite and > 0")]
    InvalidSigma,
    #[error("radius must be >= 1")]
    InvalidRadius,
    #[error("distance must be finite and >= 0")]
    InvalidDistance,
    #[error("dimension must be >= 1")]
    InvalidDimension,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("kernel of size {size} too large for {width}x{height} image")]
    KernelTooLarge {
        size: usize,
        width: usize,
        height: usize,
    },
    #[error(transparent)]
    Pnm(#[from] pnm::PnmError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
