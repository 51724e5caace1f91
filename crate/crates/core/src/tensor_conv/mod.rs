//! Reference dense-tensor engine: bilinear sampling, standard and
//! equirectangular convolutions with analytic gradients, the class-balanced
//! cross-entropy, Adam and a micro-network trainer.

pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod loss;
pub mod net;
pub mod sampling;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv_equi, conv_equi_backward, conv_standard, conv_standard_backward, ConvGrads, ConvLayer, Padding};
pub use gradcheck::{central_differences, gradient_check, max_relative_error};
pub use loss::{class_weights, multi_scale_loss, weighted_bce, BceOutput, ClassWeights, MultiScaleLoss, TargetMode};
pub use net::{train_micro, ConvMode, MicroNet, NetConfig, TrainConfig, TrainSample};
pub use sampling::{bilinear_sample, BilinearTap, Sample};
pub use tensor::Tensor;
