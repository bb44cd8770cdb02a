//! Tomographic reconstruction engine.
//!
//! Reconstructs a 3D volume from a tilt series of 2D projections by
//! gradient descent on the projection least-squares objective. The
//! forward model computes projections through an oversampled Fourier
//! slice; the gradient distributes per-angle residuals back into the
//! volume through a per-slice affine resampling. SIRT and single-axis
//! filtered back projection are included as baselines, together with
//! R-factor and Fourier shell correlation metrics, phantom simulation,
//! and MRC/tilt-file I/O.

pub mod baselines;
pub mod error;
pub mod fourier;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{AffineSliceMap, EulerTriple, RotationMatrix, TiltSeries};
pub use grid::{Projection, ProjectionStack, Volume};
pub use projector::{FstProjector, ProjectorConfig};
pub use solver::{SolveTrace, SolverConfig, StepSize};
