pub mod aht;
pub mod bloch;
pub mod dmd;
pub mod error;
pub mod experiments;
pub mod floquet;
pub mod linalg;
pub mod quadrature;
pub mod simulator;

pub use aht::{AhtModel, MagnusExpansion};
pub use bloch::{BasisConvention, HermitianBasis, VectorizedGenerator};
pub use dmd::{
    BiDmdModel, ControlPairing, DmdModel, DmdcModel, ModelKind, ModelRecord, SnapshotSet, Spectrum,
};
pub use error::{Error, Result};
pub use floquet::FloquetModel;
pub use linalg::{CMat, Mat, Vector};
pub use nalgebra;
pub use num_complex;
pub use simulator::{BilinearSystem, BlochTrajectory, ControlSignal, NoiseModel, TrajectoryMeta};
