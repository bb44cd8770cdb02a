//! The two halves of the reconstruction gradient: Fourier-slice forward
//! projection and affine bilinear back projection, plus the matched
//! real-space scatter projector that is the exact adjoint of the latter.
//!
//! The forward/back pair used by the solver is deliberately hybrid: the
//! forward model goes through the oversampled 3D spectrum while the back
//! projection resamples the residual in real space. `forward_project_real`
//! is the exact matrix transpose of `back_project` and exists so adjoint
//! identities can be tested and so SIRT has a consistent operator pair.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{extract_central_slice, fft3_centered, ifft2_centered};
use crate::geometry::{AffineSliceMap, EulerTriple, rotation_from_euler, slice_map};
use crate::grid::{Projection, Volume, center_index, crop_center_2d, pad_to_oversampled};

/// Geometry and oversampling for the Fourier-slice forward model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorConfig {
    oversampling_ratio: f64,
    volume_dims: (usize, usize, usize),
}

impl ProjectorConfig {
    pub const DEFAULT_OVERSAMPLING: f64 = 2.0;

    pub fn new(volume_dims: (usize, usize, usize)) -> Result<Self> {
        Self::with_ratio(volume_dims, Self::DEFAULT_OVERSAMPLING)
    }

    pub fn with_ratio(volume_dims: (usize, usize, usize), ratio: f64) -> Result<Self> {
        let (nx, ny, nz) = volume_dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid("volume dims must be positive"));
        }
        if !(ratio.is_finite() && (1.0..=8.0).contains(&ratio)) {
            return Err(Error::invalid(format!(
                "oversampling ratio must lie in [1, 8], got {ratio}"
            )));
        }
        Ok(Self {
            oversampling_ratio: ratio,
            volume_dims,
        })
    }

    pub fn oversampling_ratio(&self) -> f64 {
        self.oversampling_ratio
    }

    pub fn volume_dims(&self) -> (usize, usize, usize) {
        self.volume_dims
    }
}

/// Oversampled spectrum of one volume, ready to be sliced per angle.
///
/// Computing the padded 3D transform once and slicing it per angle is
/// what makes multi-angle forward projection affordable; the result is
/// identical to calling [`forward_project`] angle by angle.
pub struct FstProjector {
    spectrum: crate::fourier::Spectrum3,
    dims: (usize, usize, usize),
}

impl FstProjector {
    pub fn new(v: &Volume, cfg: &ProjectorConfig) -> Result<Self> {
        if v.dims() != cfg.volume_dims {
            return Err(Error::invalid(format!(
                "volume dims {:?} do not match projector config {:?}",
                v.dims(),
                cfg.volume_dims
            )));
        }
        let padded = pad_to_oversampled(v, cfg.oversampling_ratio)?;
        Ok(Self {
            spectrum: fft3_centered(&padded),
            dims: v.dims(),
        })
    }

    /// Projection along the orientation `e`: slice, inverse transform, crop.
    pub fn project(&self, e: EulerTriple) -> Result<Projection> {
        let r = rotation_from_euler(e)?;
        let sl = extract_central_slice(&self.spectrum, &r);
        let img = ifft2_centered(&sl);
        crop_center_2d(&img, (self.dims.0, self.dims.1))
    }
}

/// Fourier-slice forward projection of a volume at one orientation.
pub fn forward_project(v: &Volume, e: EulerTriple, cfg: &ProjectorConfig) -> Result<Projection> {
    FstProjector::new(v, cfg)?.project(e)
}

#[inline]
fn bilinear_corners(x: f64, y: f64) -> ([isize; 2], [isize; 2], [[f64; 2]; 2]) {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let xi = x0 as isize;
    let yi = y0 as isize;
    (
        [xi, xi + 1],
        [yi, yi + 1],
        [
            [(1.0 - fx) * (1.0 - fy), (1.0 - fx) * fy],
            [fx * (1.0 - fy), fx * fy],
        ],
    )
}

/// Bilinear gather; samples outside the grid contribute zero.
#[inline]
fn gather_bilinear(img: &Array2<f64>, x: f64, y: f64) -> f64 {
    let (nx, ny) = img.dim();
    let (xs, ys, w) = bilinear_corners(x, y);
    let mut acc = 0.0;
    for (a, &ix) in xs.iter().enumerate() {
        if ix < 0 || ix >= nx as isize {
            continue;
        }
        for (b, &iy) in ys.iter().enumerate() {
            if iy < 0 || iy >= ny as isize {
                continue;
            }
            acc += img[[ix as usize, iy as usize]] * w[a][b];
        }
    }
    acc
}

/// Exact transpose of [`gather_bilinear`]: scatters `val` onto the grid
/// with the same corner weights.
#[inline]
fn scatter_bilinear(img: &mut Array2<f64>, x: f64, y: f64, val: f64) {
    let (nx, ny) = img.dim();
    let (xs, ys, w) = bilinear_corners(x, y);
    for (a, &ix) in xs.iter().enumerate() {
        if ix < 0 || ix >= nx as isize {
            continue;
        }
        for (b, &iy) in ys.iter().enumerate() {
            if iy < 0 || iy >= ny as isize {
                continue;
            }
            img[[ix as usize, iy as usize]] += val * w[a][b];
        }
    }
}

fn check_residual_dims(residual: &Projection, dims: (usize, usize, usize)) -> Result<()> {
    if residual.dims() != (dims.0, dims.1) {
        return Err(Error::invalid(format!(
            "residual dims {:?} do not match volume in-plane dims ({}, {})",
            residual.dims(),
            dims.0,
            dims.1
        )));
    }
    Ok(())
}

/// Adds the back projection of `residual` at orientation `map` into `out`.
///
/// Every voxel reads the residual at its affine image; writes are disjoint
/// per voxel, so the parallel sweep over x-slabs is deterministic.
pub(crate) fn back_project_into(
    out: &mut Array3<f64>,
    residual: &Array2<f64>,
    map: &AffineSliceMap,
) {
    let (nx, ny, nz) = out.dim();
    let (px, py) = residual.dim();
    let (cx, cy, cz) = (center_index(nx), center_index(ny), center_index(nz));
    let (pcx, pcy) = (center_index(px) as f64, center_index(py) as f64);
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut slab)| {
            let du = i as f64 - cx as f64;
            for j in 0..ny {
                let dv = j as f64 - cy as f64;
                let base_x = map.linear[0][0] * du + map.linear[0][1] * dv + pcx;
                let base_y = map.linear[1][0] * du + map.linear[1][1] * dv + pcy;
                for k in 0..nz {
                    let dw = k as f64 - cz as f64;
                    let x = base_x + map.drift[0] * dw;
                    let y = base_y + map.drift[1] * dw;
                    slab[[j, k]] += gather_bilinear(residual, x, y);
                }
            }
        });
}

/// Distributes a 2D residual into a volume along the affine slice map:
/// each voxel receives the bilinear sample of the residual at its (x, y)
/// image, zero outside the residual grid.
pub fn back_project(
    residual: &Projection,
    e: EulerTriple,
    dims: (usize, usize, usize),
) -> Result<Volume> {
    check_residual_dims(residual, dims)?;
    let map = slice_map(&rotation_from_euler(e)?);
    let mut out = Array3::zeros(dims);
    back_project_into(&mut out, residual.data(), &map);
    Volume::new(out)
}

/// Real-space forward projection: scatters every voxel onto the projection
/// grid with the same bilinear weights `back_project` gathers with, making
/// the two operators exact transposes of one another.
///
/// Per-w-slice scatters go to private images that are then reduced in
/// ascending w order, so the result is independent of thread scheduling.
pub fn forward_project_real(v: &Volume, e: EulerTriple) -> Result<Projection> {
    let map = slice_map(&rotation_from_euler(e)?);
    let (nx, ny, nz) = v.dims();
    let (cx, cy, cz) = (center_index(nx), center_index(ny), center_index(nz));
    let data = v.data();
    let slices: Vec<Array2<f64>> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let dw = k as f64 - cz as f64;
            let mut acc = Array2::zeros((nx, ny));
            for i in 0..nx {
                let du = i as f64 - cx as f64;
                for j in 0..ny {
                    let dv = j as f64 - cy as f64;
                    let x = map.linear[0][0] * du + map.linear[0][1] * dv
                        + map.drift[0] * dw
                        + cx as f64;
                    let y = map.linear[1][0] * du + map.linear[1][1] * dv
                        + map.drift[1] * dw
                        + cy as f64;
                    scatter_bilinear(&mut acc, x, y, data[[i, j, k]]);
                }
            }
            acc
        })
        .collect();
    let mut out = Array2::zeros((nx, ny));
    for s in slices {
        out += &s;
    }
    Projection::new(out)
}
