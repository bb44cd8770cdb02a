//! Reference reconstructions: row/column-normalized SIRT and single-axis
//! ramp-filtered back projection. Both are restricted to single-tilt-axis
//! stacks (phi = psi = 0) and share the exact-adjoint projector pair, so
//! they are faithful operator-level implementations rather than matrix
//! materializations.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_euler, slice_map};
use crate::grid::{Projection, ProjectionStack, Volume};
use crate::projector::{back_project_into, forward_project_real};
use crate::solver::{SolveTrace, sse_of_residuals, trace_rfactor};

/// Pixels whose ray weight (or voxels whose coverage) falls below this are
/// left untouched by the normalized update.
const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirtConfig {
    pub iterations: usize,
    /// Relaxation factor in (0, 1].
    pub relaxation: f64,
}

impl Default for SirtConfig {
    fn default() -> Self {
        Self {
            iterations: 400,
            relaxation: 1.0,
        }
    }
}

impl SirtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if !(self.relaxation.is_finite() && 0.0 < self.relaxation && self.relaxation <= 1.0) {
            return Err(Error::invalid(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

fn require_single_axis(stack: &ProjectionStack, what: &str) -> Result<()> {
    if let Some(e) = stack.angles().iter().find(|e| !e.is_single_axis()) {
        return Err(Error::UnsupportedConfiguration(format!(
            "{what} supports single-tilt-axis stacks only; found ({}, {}, {})",
            e.phi, e.theta, e.psi
        )));
    }
    Ok(())
}

fn check_dims(stack: &ProjectionStack, dims: (usize, usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::invalid("volume dims must be positive"));
    }
    if stack.projection_dims() != (dims.0, dims.1) {
        return Err(Error::invalid(format!(
            "projection dims {:?} do not match volume in-plane dims ({}, {})",
            stack.projection_dims(),
            dims.0,
            dims.1
        )));
    }
    Ok(())
}

/// Simultaneous iterative reconstruction:
/// `O <- O - t * C * sum_angles back_project(residual / raywgt)`,
/// where `raywgt` is the per-pixel weight sum of each ray (the forward
/// projection of an all-ones volume) and `C` the per-voxel inverse
/// coverage (the summed back projection of all-ones images). Pixels and
/// voxels below the weight floor are skipped.
pub fn sirt_solve(
    stack: &ProjectionStack,
    dims: (usize, usize, usize),
    cfg: &SirtConfig,
) -> Result<(Volume, SolveTrace)> {
    cfg.validate()?;
    check_dims(stack, dims)?;
    require_single_axis(stack, "SIRT")?;

    let maps: Vec<_> = stack
        .angles()
        .iter()
        .map(|&e| rotation_from_euler(e).map(|r| slice_map(&r)))
        .collect::<Result<_>>()?;

    let ones_volume = Volume::new(Array3::from_elem(dims, 1.0))?;
    let ray_weights: Vec<Array2<f64>> = stack
        .angles()
        .iter()
        .map(|&e| forward_project_real(&ones_volume, e).map(Projection::into_data))
        .collect::<Result<_>>()?;
    let ones_image = Array2::from_elem((dims.0, dims.1), 1.0);
    let mut coverage = Array3::zeros(dims);
    for map in &maps {
        back_project_into(&mut coverage, &ones_image, map);
    }

    let b_abs: Vec<f64> = stack
        .projections()
        .iter()
        .map(|b| b.data().iter().map(|x| x.abs()).sum())
        .collect();

    let mut volume = Volume::zeros(dims);
    let mut trace = SolveTrace::default();
    let mut sse_floor = 0.0;

    for k in 0..cfg.iterations {
        let started = std::time::Instant::now();
        let projs: Vec<Array2<f64>> = stack
            .angles()
            .iter()
            .map(|&e| forward_project_real(&volume, e).map(Projection::into_data))
            .collect::<Result<_>>()?;
        let residuals: Vec<Array2<f64>> = projs
            .iter()
            .zip(stack.projections())
            .map(|(p, b)| p - b.data())
            .collect();
        let sse_k = sse_of_residuals(&residuals);
        if !sse_k.is_finite() {
            return Err(Error::Divergence {
                iteration: k,
                reason: format!("objective became non-finite ({sse_k})"),
            });
        }
        if k == 0 {
            sse_floor = sse_k;
        } else if sse_k > 10.0 * sse_floor && sse_floor > 0.0 {
            return Err(Error::Divergence {
                iteration: k,
                reason: format!(
                    "objective grew to {sse_k:.6e}, more than 10x its initial value {sse_floor:.6e}"
                ),
            });
        }
        trace.sse_history.push(sse_k);
        trace.rfactor_history.push(trace_rfactor(&projs, stack, &b_abs));

        let mut update = Array3::zeros(dims);
        for ((r, weights), map) in residuals.iter().zip(&ray_weights).zip(&maps) {
            let normalized = ndarray::Zip::from(r).and(weights).map_collect(|&r, &w| {
                if w < WEIGHT_FLOOR { 0.0 } else { r / w }
            });
            back_project_into(&mut update, &normalized, map);
        }
        let t = cfg.relaxation;
        ndarray::Zip::from(volume.data_mut())
            .and(&update)
            .and(&coverage)
            .par_for_each(|o, &u, &c| {
                if c >= WEIGHT_FLOOR {
                    *o -= t * u / c;
                }
            });
        trace.wall_time.push(started.elapsed().as_secs_f64());
    }

    let out = Volume::new(volume.into_data()).map_err(|_| Error::Divergence {
        iteration: cfg.iterations.saturating_sub(1),
        reason: "volume became non-finite".into(),
    })?;
    Ok((out, trace))
}

/// Frequency weighting applied to each detector row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FbpFilter {
    #[default]
    RamLak,
    HammingWindowedRamLak,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FbpConfig {
    pub filter: FbpFilter,
}

/// Frequency response of the discrete ramp: the Ramachandran-
/// Lakshminarayanan kernel (h0 = 1/4, odd taps -1/(pi k)^2) transformed
/// on the padded length. Using the spatial kernel rather than |f| samples
/// avoids the DC deficit of naive frequency-domain ramps.
fn ramp_response(m: usize, filter: FbpFilter) -> Vec<f64> {
    let mut h = vec![Complex64::ZERO; m];
    h[0] = Complex64::new(0.25, 0.0);
    for k in (1..m / 2).step_by(2) {
        let val = -1.0 / (std::f64::consts::PI * k as f64).powi(2);
        h[k] = Complex64::new(val, 0.0);
        h[m - k] = Complex64::new(val, 0.0);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut h);
    let mut resp: Vec<f64> = h.iter().map(|c| 2.0 * c.re).collect();
    if filter == FbpFilter::HammingWindowedRamLak {
        for (q, r) in resp.iter_mut().enumerate() {
            let f = if q <= m / 2 {
                q as f64 / m as f64
            } else {
                q as f64 / m as f64 - 1.0
            };
            *r *= 0.54 + 0.46 * (2.0 * std::f64::consts::PI * f).cos();
        }
    }
    resp
}

/// Ramp-filters every detector row (x-line per y) on a zero-padded
/// double-length transform.
fn filter_projection(p: &Projection, response: &[f64]) -> Array2<f64> {
    let (nx, ny) = p.dims();
    let m = response.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut out = Array2::zeros((nx, ny));
    let mut line = vec![Complex64::ZERO; m];
    for j in 0..ny {
        for slot in line.iter_mut() {
            *slot = Complex64::ZERO;
        }
        for i in 0..nx {
            line[i] = Complex64::new(p.data()[[i, j]], 0.0);
        }
        fwd.process(&mut line);
        for (v, &r) in line.iter_mut().zip(response) {
            *v *= r;
        }
        inv.process(&mut line);
        let scale = 1.0 / m as f64;
        for i in 0..nx {
            out[[i, j]] = line[i].re * scale;
        }
    }
    out
}

/// Single-axis filtered back projection: per y-slice 2D FBP with the
/// selected ramp filter, scaled by `pi / (2 * N_angles)`.
pub fn fbp_solve(
    stack: &ProjectionStack,
    dims: (usize, usize, usize),
    cfg: &FbpConfig,
) -> Result<Volume> {
    check_dims(stack, dims)?;
    require_single_axis(stack, "FBP")?;
    let response = ramp_response(2 * dims.0, cfg.filter);
    let mut out = Array3::zeros(dims);
    for (b, &e) in stack.iter() {
        let filtered = filter_projection(b, &response);
        let map = slice_map(&rotation_from_euler(e)?);
        back_project_into(&mut out, &filtered, &map);
    }
    let scale = std::f64::consts::PI / (2.0 * stack.len() as f64);
    out.mapv_inplace(|x| x * scale);
    Volume::new(out)
}
