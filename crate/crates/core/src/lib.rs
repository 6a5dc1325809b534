//! Magnetic Weyl quantization for matrix-valued symbols on a discretized phase space.
//!
//! Symbols live on a [`PhaseGrid`] and are quantized with [`quantize::kernel_map`]
//! and [`quantize::assemble`]; the magnetic Weyl product, its first-order
//! expansion, inverses, functional calculi, trace tools and the equivariant
//! (Bloch) layer are built on top of those two maps.

pub mod container;
pub mod equivariant;
pub mod error;
pub mod fft;
pub mod funcalc;
pub mod grid;
pub mod linalg;
pub mod magnetic;
pub mod moyal;
pub mod quantize;
pub mod seminorm;
pub mod stats;
pub mod symbol;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use grid::PhaseGrid;
pub use magnetic::{FieldKind, MagneticData, ScalarField};
pub use quantize::{OperatorKernel, OperatorMatrix};
pub use symbol::{FormalSeries, Symbol};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
