//! Euler angles, rotation matrices, and the projection slice map.
//!
//! Orientations follow the ZYX Euler convention: a triple (phi, theta, psi)
//! in degrees composes as `R = Z(phi) * Y(theta) * X(psi)`. The basic
//! matrices are the standard right-handed, active rotations:
//!
//! ```text
//! Z(a) = [ cos a  -sin a   0 ]    Y(a) = [  cos a   0   sin a ]    X(a) = [ 1    0       0   ]
//!        [ sin a   cos a   0 ]           [   0      1    0    ]           [ 0  cos a  -sin a ]
//!        [  0       0      1 ]           [ -sin a   0   cos a ]           [ 0  sin a   cos a ]
//! ```
//!
//! Single-axis tilt series use (0, theta, 0): y is the tilt axis and z the
//! beam direction at zero tilt.

use crate::error::{Error, Result};

/// One projection orientation: rotations about z, y, x in degrees.
///
/// Angles are stored exactly as given; no normalization to a canonical
/// range is performed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerTriple {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

/// An ordered list of projection orientations.
pub type TiltSeries = Vec<EulerTriple>;

impl EulerTriple {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite() && psi.is_finite()) {
            return Err(Error::invalid(format!(
                "euler angles must be finite, got ({phi}, {theta}, {psi})"
            )));
        }
        Ok(Self { phi, theta, psi })
    }

    /// Single-axis tilt about y.
    pub fn y_tilt(theta: f64) -> Result<Self> {
        Self::new(0.0, theta, 0.0)
    }

    /// True when this orientation involves only the y tilt axis.
    pub fn is_single_axis(&self) -> bool {
        self.phi == 0.0 && self.psi == 0.0
    }
}

/// A 3x3 rotation matrix, row-major `r[row][col]`, zero-based.
///
/// Math notation indexes rotation elements one-based as `R_{i,j}`; the
/// translation used throughout this crate is `R_{i,j} == r[i-1][j-1]`.
/// This is the single place that mapping is defined; [`slice_map`] relies
/// on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix {
    r: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: Self = Self {
        r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Element accessor, zero-based row/column.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.r[row][col]
    }

    pub fn as_array(&self) -> &[[f64; 3]; 3] {
        &self.r
    }

    /// Applies the rotation to a column vector: `R * v`.
    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.r;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Applies the inverse rotation: `R^T * v`.
    #[inline]
    pub fn apply_transpose(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.r;
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Max per-element deviation of `R^T R` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = 0.0;
                for k in 0..3 {
                    dot += self.r[k][i] * self.r[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).abs());
            }
        }
        worst
    }

    pub fn det(&self) -> f64 {
        let m = &self.r;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Builds `R = Z(phi) * Y(theta) * X(psi)` from a degree triple.
///
/// The product is expanded elementwise from the basic rotations in the
/// module docs, so the composition order is fixed here rather than by a
/// chain of matrix multiplies.
pub fn rotation_from_euler(e: EulerTriple) -> Result<RotationMatrix> {
    if !(e.phi.is_finite() && e.theta.is_finite() && e.psi.is_finite()) {
        return Err(Error::invalid(format!(
            "euler angles must be finite, got ({}, {}, {})",
            e.phi, e.theta, e.psi
        )));
    }
    let (sp, cp) = e.phi.to_radians().sin_cos();
    let (st, ct) = e.theta.to_radians().sin_cos();
    let (ss, cs) = e.psi.to_radians().sin_cos();

    // R = Z * Y * X
    Ok(RotationMatrix {
        r: [
            [cp * ct, cp * st * ss - sp * cs, cp * st * cs + sp * ss],
            [sp * ct, sp * st * ss + cp * cs, sp * st * cs - cp * ss],
            [-st, ct * ss, ct * cs],
        ],
    })
}

/// The 2D affine map taking a voxel offset (u, v, w) to the in-plane
/// projection coordinate (x, y) it contributes to:
///
/// ```text
/// [x]   [ R11  R21 ] [u]   [ R31 ]
/// [y] = [ R12  R22 ] [v] + [ R32 ] * w
/// ```
///
/// (one-based `R_{i,j}`), i.e. (x, y) are the first two components of
/// `R^T * (u, v, w)`. Each w-slice is the same 2x2 transform of the
/// zero-slice, translated by `drift * w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSliceMap {
    /// Row-major 2x2 block: `[[R11, R21], [R12, R22]]`.
    pub linear: [[f64; 2]; 2],
    /// Per-unit-w translation: `[R31, R32]`.
    pub drift: [f64; 2],
}

impl AffineSliceMap {
    /// Maps a centered voxel offset to its centered projection coordinate.
    #[inline]
    pub fn apply(&self, u: f64, v: f64, w: f64) -> (f64, f64) {
        (
            self.linear[0][0] * u + self.linear[0][1] * v + self.drift[0] * w,
            self.linear[1][0] * u + self.linear[1][1] * v + self.drift[1] * w,
        )
    }
}

/// Extracts the [`AffineSliceMap`] of a rotation.
pub fn slice_map(r: &RotationMatrix) -> AffineSliceMap {
    AffineSliceMap {
        linear: [[r.at(0, 0), r.at(1, 0)], [r.at(0, 1), r.at(1, 1)]],
        drift: [r.at(2, 0), r.at(2, 1)],
    }
}
