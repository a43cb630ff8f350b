//! Pseudo-camera sensing: rendering markers into a 320×96 binary image,
//! pooled feature distillation, the ground homography and degraded-input
//! transforms.

mod camera;
mod features;
mod image;
mod render;

pub use camera::{ground_homography, CameraModel, GroundMapping, IMAGE_H, IMAGE_W};
pub use features::{distill, grid_shape, FeatureVec, FEATURE_SIZES};
pub use image::{centroid_error, centroid_offset, frame_hold, BinaryImage, FrameHold};
pub use render::{render_view, LaneGeometry, LaneSel, MarkerKind, MissingSpan, Renderer, Scene};
