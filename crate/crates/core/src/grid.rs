//! Array containers for volumes and projections, centering, and the
//! zero-padding/cropping used for oversampled transforms.
//!
//! The grid origin sits at index `floor(N/2)` on every axis (the index the
//! zero-frequency bin occupies after a centered FFT). Padded dimensions are
//! rounded up to even so that convention stays unambiguous, and padding /
//! cropping are exact inverses on the shared region.

use ndarray::{Array2, Array3, s};

use crate::error::{Error, Result};
use crate::geometry::TiltSeries;

/// Index of the grid origin on an axis of length `n`.
#[inline]
pub fn center_index(n: usize) -> usize {
    n / 2
}

/// A 3D real scalar field on a Cartesian grid, dimensions (nx, ny, nz).
/// z is the beam direction at zero tilt.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    data: Array3<f64>,
}

impl Volume {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (nx, ny, nz) = data.dim();
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid("volume dimensions must be >= 1"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("volume contains non-finite values"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            data: Array3::zeros(dims),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    /// Origin index per axis.
    pub fn center(&self) -> (usize, usize, usize) {
        let (nx, ny, nz) = self.dims();
        (center_index(nx), center_index(ny), center_index(nz))
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.sum()
    }
}

/// A 2D real image with the same in-plane sampling as a [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    data: Array2<f64>,
}

impl Projection {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (nx, ny) = data.dim();
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("projection dimensions must be >= 1"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("projection contains non-finite values"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dims: (usize, usize)) -> Self {
        Self {
            data: Array2::zeros(dims),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.sum()
    }
}

/// Measured projections paired one-to-one with their orientations.
#[derive(Debug, Clone)]
pub struct ProjectionStack {
    projections: Vec<Projection>,
    angles: TiltSeries,
}

impl ProjectionStack {
    pub fn new(projections: Vec<Projection>, angles: TiltSeries) -> Result<Self> {
        if projections.is_empty() {
            return Err(Error::invalid("projection stack must be nonempty"));
        }
        if projections.len() != angles.len() {
            return Err(Error::invalid(format!(
                "stack has {} projections but {} angles",
                projections.len(),
                angles.len()
            )));
        }
        let dims = projections[0].dims();
        if projections.iter().any(|p| p.dims() != dims) {
            return Err(Error::invalid("projections in a stack must share dimensions"));
        }
        Ok(Self { projections, angles })
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// In-plane dimensions shared by every projection.
    pub fn projection_dims(&self) -> (usize, usize) {
        self.projections[0].dims()
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn angles(&self) -> &TiltSeries {
        &self.angles
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Projection, &crate::geometry::EulerTriple)> {
        self.projections.iter().zip(self.angles.iter())
    }
}

/// Padded length for one axis: `ceil(ratio * n)` rounded up to even.
fn padded_len(n: usize, ratio: f64) -> usize {
    // the epsilon guards against 1.3 * 20 = 26.000000000000004 ceiling to 27
    let m = (ratio * n as f64 - 1e-9).ceil() as usize;
    let m = m.max(n);
    if m % 2 == 1 { m + 1 } else { m }
}

/// Zero-pads a volume to `ceil(ratio * N)` (rounded up to even) per axis,
/// keeping the original centered on the grid origin. The total intensity
/// is preserved exactly.
pub fn pad_to_oversampled(v: &Volume, ratio: f64) -> Result<Volume> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(Error::invalid(format!(
            "oversampling ratio must be >= 1, got {ratio}"
        )));
    }
    let (nx, ny, nz) = v.dims();
    let (mx, my, mz) = (padded_len(nx, ratio), padded_len(ny, ratio), padded_len(nz, ratio));
    if (mx, my, mz) == (nx, ny, nz) {
        return Ok(v.clone());
    }
    let mut out = Array3::zeros((mx, my, mz));
    let (ox, oy, oz) = (
        center_index(mx) - center_index(nx),
        center_index(my) - center_index(ny),
        center_index(mz) - center_index(nz),
    );
    out.slice_mut(s![ox..ox + nx, oy..oy + ny, oz..oz + nz])
        .assign(v.data());
    Ok(Volume { data: out })
}

/// Centered crop to `dims`, the exact inverse of [`pad_to_oversampled`]
/// on the padded region.
pub fn crop_center(v: &Volume, dims: (usize, usize, usize)) -> Result<Volume> {
    let (nx, ny, nz) = v.dims();
    let (dx, dy, dz) = dims;
    if dx > nx || dy > ny || dz > nz {
        return Err(Error::invalid(format!(
            "crop dims ({dx}, {dy}, {dz}) exceed volume dims ({nx}, {ny}, {nz})"
        )));
    }
    if dx == 0 || dy == 0 || dz == 0 {
        return Err(Error::invalid("crop dims must be >= 1"));
    }
    let (ox, oy, oz) = (
        center_index(nx) - center_index(dx),
        center_index(ny) - center_index(dy),
        center_index(nz) - center_index(dz),
    );
    Ok(Volume {
        data: v
            .data()
            .slice(s![ox..ox + dx, oy..oy + dy, oz..oz + dz])
            .to_owned(),
    })
}

/// 2D centered crop, used to drop an oversampled projection back to the
/// measured size.
pub fn crop_center_2d(p: &Projection, dims: (usize, usize)) -> Result<Projection> {
    let (nx, ny) = p.dims();
    let (dx, dy) = dims;
    if dx > nx || dy > ny {
        return Err(Error::invalid(format!(
            "crop dims ({dx}, {dy}) exceed projection dims ({nx}, {ny})"
        )));
    }
    if dx == 0 || dy == 0 {
        return Err(Error::invalid("crop dims must be >= 1"));
    }
    let (ox, oy) = (center_index(nx) - center_index(dx), center_index(ny) - center_index(dy));
    Ok(Projection {
        data: p.data().slice(s![ox..ox + dx, oy..oy + dy]).to_owned(),
    })
}
