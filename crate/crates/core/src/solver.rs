//! Gradient-descent reconstruction: per-angle residuals through the
//! Fourier-slice forward model, summed affine back projection, fixed
//! step `t / (n * N_z)`.
//!
//! The iteration starts from a zero volume, so identical inputs produce
//! bitwise-identical reconstructions. Per-angle work inside one iteration
//! runs in parallel; the gradient is reduced over angles in fixed order.

use std::time::Instant;

use ndarray::{Array2, Array3, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_euler, slice_map};
use crate::grid::{ProjectionStack, Volume};
use crate::io::kv;
use crate::projector::{FstProjector, ProjectorConfig, back_project_into};

/// Reconstruction parameters.
///
/// `step_t` is the normalized step: the applied update scales it by the
/// inverse Lipschitz bound `1 / (n * N_z)`. Steps `t <= 1` are the
/// guaranteed-descent regime; the default `t = 2` is the empirically
/// stable choice used for all shipped presets.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub step_t: f64,
    pub oversampling_ratio: f64,
    pub nonnegativity: bool,
    /// Stop at the first iteration whose R-factor reaches this value.
    pub rfactor_target: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 400,
            step_t: 2.0,
            oversampling_ratio: 2.0,
            nonnegativity: false,
            rfactor_target: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if !(self.step_t.is_finite() && self.step_t > 0.0) {
            return Err(Error::invalid(format!(
                "step_t must be positive, got {}",
                self.step_t
            )));
        }
        if !(self.oversampling_ratio.is_finite() && (1.0..=8.0).contains(&self.oversampling_ratio))
        {
            return Err(Error::invalid(format!(
                "oversampling_ratio must lie in [1, 8], got {}",
                self.oversampling_ratio
            )));
        }
        if let Some(t) = self.rfactor_target {
            if !(t.is_finite() && 0.0 < t && t < 1.0) {
                return Err(Error::invalid(format!(
                    "rfactor_target must lie in (0, 1), got {t}"
                )));
            }
        }
        Ok(())
    }

    /// Serializes as the flat `key = value` document.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("iterations = {}\n", self.iterations));
        out.push_str(&format!("step_t = {}\n", self.step_t));
        out.push_str(&format!("oversampling_ratio = {}\n", self.oversampling_ratio));
        out.push_str(&format!("nonnegativity = {}\n", self.nonnegativity));
        if let Some(t) = self.rfactor_target {
            out.push_str(&format!("rfactor_target = {t}\n"));
        }
        out
    }

    /// Parses the flat `key = value` document. Unknown or repeated keys
    /// are errors; missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (key, value) in kv::parse(text)? {
            if !seen.insert(key.clone()) {
                return Err(Error::invalid(format!("duplicate config key '{key}'")));
            }
            match key.as_str() {
                "iterations" => cfg.iterations = kv::parse_value(&key, &value)?,
                "step_t" => cfg.step_t = kv::parse_value(&key, &value)?,
                "oversampling_ratio" => cfg.oversampling_ratio = kv::parse_value(&key, &value)?,
                "nonnegativity" => cfg.nonnegativity = kv::parse_value(&key, &value)?,
                "rfactor_target" => cfg.rfactor_target = Some(kv::parse_value(&key, &value)?),
                _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The step actually applied: `effective = t / L` with `L = n * N_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    lipschitz: f64,
    effective: f64,
}

impl StepSize {
    pub fn new(step_t: f64, n_projections: usize, n_z: usize) -> Result<Self> {
        if n_projections == 0 || n_z == 0 {
            return Err(Error::invalid("step size requires n >= 1 and N_z >= 1"));
        }
        if !(step_t.is_finite() && step_t > 0.0) {
            return Err(Error::invalid("normalized step must be positive"));
        }
        let lipschitz = (n_projections * n_z) as f64;
        Ok(Self {
            lipschitz,
            effective: step_t / lipschitz,
        })
    }

    /// Lipschitz bound of the stacked gradient, `n * N_z`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Per-iteration multiplier of the summed gradient.
    pub fn effective(&self) -> f64 {
        self.effective
    }

    /// Recovers the normalized step `t = effective * lipschitz`.
    pub fn normalized(&self) -> f64 {
        self.effective * self.lipschitz
    }
}

/// Convergence telemetry, one entry per completed iteration.
///
/// The SSE and R-factor entries describe the iterate the residuals were
/// computed from (before that iteration's update). On stacks containing an
/// all-zero projection the R-factor contribution of that angle is recorded
/// as zero rather than failing the solve.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub sse_history: Vec<f64>,
    pub rfactor_history: Vec<f64>,
    pub wall_time: Vec<f64>,
}

fn check_stack(stack: &ProjectionStack, dims: (usize, usize, usize)) -> Result<()> {
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

/// Projects `v` at every stack angle through the shared oversampled spectrum.
fn project_stack(
    v: &Volume,
    stack: &ProjectionStack,
    pcfg: &ProjectorConfig,
) -> Result<Vec<Array2<f64>>> {
    let projector = FstProjector::new(v, pcfg)?;
    stack
        .angles()
        .par_iter()
        .map(|&e| projector.project(e).map(|p| p.into_data()))
        .collect()
}

/// Half the summed squared residual over all angles and pixels.
pub fn sse(stack: &ProjectionStack, v: &Volume, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    check_stack(stack, v.dims())?;
    let pcfg = ProjectorConfig::with_ratio(v.dims(), cfg.oversampling_ratio)?;
    let projs = project_stack(v, stack, &pcfg)?;
    Ok(sse_of_residuals(&residuals(&projs, stack)))
}

/// Summed back projection of all per-angle residuals — the objective's
/// gradient, exposed for testing and external optimizers.
pub fn gradient(stack: &ProjectionStack, v: &Volume, cfg: &SolverConfig) -> Result<Volume> {
    cfg.validate()?;
    check_stack(stack, v.dims())?;
    let pcfg = ProjectorConfig::with_ratio(v.dims(), cfg.oversampling_ratio)?;
    let projs = project_stack(v, stack, &pcfg)?;
    let res = residuals(&projs, stack);
    let mut grad = Array3::zeros(v.dims());
    accumulate_gradient(&mut grad, &res, stack)?;
    Volume::new(grad)
}

fn residuals(projs: &[Array2<f64>], stack: &ProjectionStack) -> Vec<Array2<f64>> {
    projs
        .iter()
        .zip(stack.projections())
        .map(|(p, b)| p - b.data())
        .collect()
}

pub(crate) fn sse_of_residuals(res: &[Array2<f64>]) -> f64 {
    0.5 * res
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
}

/// Mean per-angle L1 relative error of the model projections; angles with
/// an all-zero measurement contribute zero (trace-only convention).
pub(crate) fn trace_rfactor(projs: &[Array2<f64>], stack: &ProjectionStack, b_abs: &[f64]) -> f64 {
    let per: Vec<f64> = projs
        .iter()
        .zip(stack.projections())
        .zip(b_abs)
        .map(|((p, b), &den)| {
            if den == 0.0 {
                return 0.0;
            }
            let num: f64 = p
                .iter()
                .zip(b.data().iter())
                .map(|(x, y)| (x - y).abs())
                .sum();
            num / den
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

fn accumulate_gradient(
    grad: &mut Array3<f64>,
    res: &[Array2<f64>],
    stack: &ProjectionStack,
) -> Result<()> {
    for (r, &e) in res.iter().zip(stack.angles()) {
        let map = slice_map(&rotation_from_euler(e)?);
        back_project_into(grad, r, &map);
    }
    Ok(())
}

/// Reconstructs a volume from a projection stack by gradient descent.
///
/// Starts from zeros and iterates
/// `O <- O - t/(n*N_z) * sum_angles back_project(forward(O) - b)`,
/// optionally clamping negatives after each update. Returns the final
/// volume together with per-iteration telemetry.
pub fn resire_solve(
    stack: &ProjectionStack,
    dims: (usize, usize, usize),
    cfg: &SolverConfig,
) -> Result<(Volume, SolveTrace)> {
    cfg.validate()?;
    check_stack(stack, dims)?;
    let n = stack.len();
    let step = StepSize::new(cfg.step_t, n, dims.2)?;
    let pcfg = ProjectorConfig::with_ratio(dims, cfg.oversampling_ratio)?;
    let maps: Vec<_> = stack
        .angles()
        .iter()
        .map(|&e| rotation_from_euler(e).map(|r| slice_map(&r)))
        .collect::<Result<_>>()?;
    let b_abs: Vec<f64> = stack
        .projections()
        .iter()
        .map(|b| b.data().iter().map(|x| x.abs()).sum())
        .collect();

    let mut volume = Volume::zeros(dims);
    let mut trace = SolveTrace::default();
    let mut sse_floor = 0.0;

    for k in 0..cfg.iterations {
        let started = Instant::now();
        let projs = project_stack(&volume, stack, &pcfg)?;
        let res = residuals(&projs, stack);
        let sse_k = sse_of_residuals(&res);
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
        let rf_k = trace_rfactor(&projs, stack, &b_abs);
        trace.sse_history.push(sse_k);
        trace.rfactor_history.push(rf_k);

        if cfg.rfactor_target.is_some_and(|target| rf_k <= target) {
            trace.wall_time.push(started.elapsed().as_secs_f64());
            return Ok((volume, trace));
        }

        let mut grad = Array3::zeros(dims);
        for (r, map) in res.iter().zip(&maps) {
            back_project_into(&mut grad, r, map);
        }
        let eff = step.effective();
        let clamp = cfg.nonnegativity;
        Zip::from(volume.data_mut())
            .and(&grad)
            .par_for_each(|o, &g| {
                *o -= eff * g;
                if clamp && *o < 0.0 {
                    *o = 0.0;
                }
            });
        trace.wall_time.push(started.elapsed().as_secs_f64());
    }

    let final_volume = Volume::new(volume.into_data()).map_err(|_| Error::Divergence {
        iteration: cfg.iterations.saturating_sub(1),
        reason: "volume became non-finite".into(),
    })?;
    Ok((final_volume, trace))
}
