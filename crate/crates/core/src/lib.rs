//! Detection pipeline toolkit.
//!
//! Pre-processing (Gaussian blur augmentation, annotation statistics, record
//! archives), post-processing (box overlap, losses, non-maximum suppression)
//! and evaluation (detection file I/O, run comparison). The numeric modules
//! are generic over [`Real`]; concrete `f64`/`f32` aliases are exported here.

pub mod bbox;
pub mod blur;
pub mod dataset;
pub mod detfile;
pub mod eval;
pub mod losses;
pub mod post;
pub mod record;
pub mod scalar;

pub use bbox::{giou, iou, overlap_report, BBox, GeometryError, OverlapReport};
pub use blur::{build_kernel, blur_plane, GaussianKernelSpec, ImagePlane, KernelMatrix};
pub use losses::{bce_with_logits, compose_loss, giou_loss, LossBreakdown};
pub use post::{head_output_shape, nms, topk_filter, Detection, HeadShape, NmsConfig};
pub use scalar::Real;

pub type BBoxF64 = BBox<f64>;
pub type BBoxF32 = BBox<f32>;
pub type DetectionF64 = Detection<f64>;
pub type DetectionF32 = Detection<f32>;
pub type NmsConfigF64 = NmsConfig<f64>;
pub type NmsConfigF32 = NmsConfig<f32>;
pub type KernelSpecF64 = GaussianKernelSpec<f64>;
pub type KernelSpecF32 = GaussianKernelSpec<f32>;
pub type KernelF64 = KernelMatrix<f64>;
pub type KernelF32 = KernelMatrix<f32>;
pub type LossBreakdownF64 = LossBreakdown<f64>;
pub type OverlapReportF64 = OverlapReport<f64>;
