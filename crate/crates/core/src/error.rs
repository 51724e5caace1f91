use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in tensor data")]
    NonFinite,
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("insufficient corners: found {found} ceiling/floor pairs, need at least 3")]
    InsufficientCorners { found: usize },
    #[error("floor corner {index} at ({u:.2}, {v:.2}) is not below the horizon")]
    FloorCornerAboveHorizon { index: usize, u: f64, v: f64 },
    #[error("camera lies outside the floor polygon")]
    CameraOutsidePolygon,
    #[error("walls are not visible left to right from the camera (occluded wall)")]
    OccludedWall,
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("corner count mismatch: predicted {pred} pairs, ground truth {gt} pairs")]
    CornerCountMismatch { pred: usize, gt: usize },
    #[error("segmentation mode mismatch")]
    ModeMismatch,
    #[error("camera leaves the room volume (offset {offset:.3}, floor {floor:.3}, ceiling {ceiling:.3})")]
    CameraExitsRoom { offset: f64, floor: f64, ceiling: f64 },
    #[error("corner {index} lands on a pole after the transform")]
    PoleSingularity { index: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("tensor file: {0}")]
    TensorFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
