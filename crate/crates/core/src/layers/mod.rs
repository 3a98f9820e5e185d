//! Layer kernels: convolutions, dense maps, pooling, activations, and the
//! cost model. Everything here is a pure function of (input, parameters);
//! layer objects with state live in [`crate::net`].

pub mod act;
pub mod conv;
pub mod count;
pub mod dense;
pub mod im2col;
pub mod pool;

pub use act::{relu_backward, relu_forward, softmax, tanh_backward, tanh_forward};
pub use conv::{
    qconv2d_backward, qconv2d_backward_cached, qconv2d_forward, qconv2d_forward_cached,
    qconv_transpose2d_backward, qconv_transpose2d_backward_cached, qconv_transpose2d_forward,
    qconv_transpose2d_forward_cached, real_conv2d_backward, real_conv2d_forward,
    real_conv_transpose2d_backward, real_conv_transpose2d_forward, QConvCache, QConvGrads,
    QConvKernel, RealConvGrads, RealConvKernel,
};
pub use count::{qconv_counts, qdense_counts, real_conv_counts, real_dense_counts};
pub use dense::{
    qdense_backward, qdense_backward_cached, qdense_forward, qdense_forward_cached,
    real_dense_backward, real_dense_forward, QDenseCache, QDenseGrads, QDenseKernel,
    RealDenseGrads, RealDenseKernel,
};
pub use pool::{
    avgpool_backward_planes, avgpool_planes, maxpool_backward_planes, maxpool_planes, PoolRouting,
};

/// Border handling for convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Padding {
    /// No padding; output shrinks by kernel size minus one.
    Valid,
    /// Zero padding chosen so output size is `ceil(input / stride)`.
    Same,
}

/// Stride and padding of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvConfig {
    pub stride: usize,
    pub padding: Padding,
}

impl ConvConfig {
    pub fn unit_same() -> Self {
        ConvConfig { stride: 1, padding: Padding::Same }
    }
}
