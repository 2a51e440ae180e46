//! Certificates, an empirical grid oracle, and generators for feedforward
//! networks whose decision regions are path-connected.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to one of them.

pub mod certificates;
pub mod format;
pub mod geometry;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod synthesis;

pub use certificates::{
    certify, certify_all, CertificateReport, CertifyOptions, Clause, TheoremId, Verdict,
};
pub use geometry::{GridSpec, RegionMap};
pub use linalg::{ColumnSplit, Matrix, SplitMode};
pub use network::{ActivationKind, Layer, Network};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type ColumnSplit64 = ColumnSplit<f64>;
pub type ColumnSplit32 = ColumnSplit<f32>;
pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type Layer64 = Layer<f64>;
pub type Layer32 = Layer<f32>;
pub type Activation64 = ActivationKind<f64>;
pub type Activation32 = ActivationKind<f32>;
pub type CertifyOptions64 = CertifyOptions<f64>;
pub type CertifyOptions32 = CertifyOptions<f32>;
