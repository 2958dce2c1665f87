//! Complex-valued building blocks of the k-strip network.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod params;
pub mod pool;
pub mod residual;

pub use activation::{complex_dropout, crelu, ComplexDropout};
pub use batchnorm::{complex_batchnorm, ComplexBatchNorm};
pub use conv::{conv2d, ComplexConv2d};
pub use params::{Forward, Mode, ParamId, ParamKind, ParamStore};
pub use pool::{concat_channels, spectral_pool, upsample_nearest, UpsampleConv};
pub use residual::ResidualBlock;
