//! Sigma-delta massive MIMO front ends and mmWave channel estimation.
//!
//! The crate simulates a base station whose one-bit converters use spatial
//! error feedback, models the resulting quantization noise, and estimates
//! sparse multipath channels in two steps: Bartlett peak picking with
//! prewhitened least squares for arrival angles and gains, then recursive
//! bisection with one-bit feedback for departure angles.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod mumimo;
pub mod noisemodel;
pub mod scalar;

pub use adc::{AdcConfig, FrontEnd};
pub use channel::{
    ArrayGeometry, ChannelSamplerSpec, GainModel, MuChannelParams, SuChannelParams, UserPaths,
};
pub use error::{Error, Result};
pub use estimator::{
    AoaGrid, AodGrid, ChannelEstimate, Codebook, FrontEndKind, SuEstimator, SuScenario,
    VoltagePolicy,
};
pub use mumimo::{MuEstimate, MuEstimator, MuScenario};
pub use noisemodel::NoiseModel;
pub use scalar::{CMatrix, CVector, Cplx, Real};

pub type AdcConfig64 = AdcConfig<f64>;
pub type FrontEnd64 = FrontEnd<f64>;
pub type NoiseModel64 = NoiseModel<f64>;
pub type ArrayGeometry64 = ArrayGeometry<f64>;
pub type SuChannelParams64 = SuChannelParams<f64>;
pub type MuChannelParams64 = MuChannelParams<f64>;
pub type ChannelSamplerSpec64 = ChannelSamplerSpec<f64>;
pub type SuScenario64 = SuScenario<f64>;
pub type SuEstimator64 = SuEstimator<f64>;
pub type ChannelEstimate64 = ChannelEstimate<f64>;
pub type MuScenario64 = MuScenario<f64>;
pub type MuEstimator64 = MuEstimator<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type CVector64 = CVector<f64>;

pub type AdcConfig32 = AdcConfig<f32>;
pub type SuEstimator32 = SuEstimator<f32>;
pub type CMatrix32 = CMatrix<f32>;
