//! Reconstruction quality instruments: R-factor and Fourier shell
//! correlation.

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::fourier::fft3_centered;
use crate::geometry::TiltSeries;
use crate::grid::{ProjectionStack, Volume, center_index};
use crate::projector::{FstProjector, ProjectorConfig};

/// One FSC shell: bin center in cycles/pixel, correlation, voxel count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FscShell {
    pub freq: f64,
    pub correlation: f64,
    pub count: usize,
}

/// Fourier shell correlation over (0, 0.5] cycles/pixel. The DC component
/// occupies its own shell and is not reported.
#[derive(Debug, Clone, PartialEq)]
pub struct FscCurve {
    pub shells: Vec<FscShell>,
}

impl FscCurve {
    /// CSV with header `freq_cyc_per_px,fsc,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_cyc_per_px,fsc,count\n");
        for s in &self.shells {
            out.push_str(&format!("{},{},{}\n", s.freq, s.correlation, s.count));
        }
        out
    }

    /// Shells with at least one voxel.
    pub fn nonempty(&self) -> impl Iterator<Item = &FscShell> {
        self.shells.iter().filter(|s| s.count > 0)
    }
}

/// Per-angle and mean relative projection error.
#[derive(Debug, Clone, PartialEq)]
pub struct RFactorReport {
    pub per_angle: Vec<f64>,
    /// Arithmetic mean of the per-angle entries.
    pub aggregate: f64,
}

impl RFactorReport {
    /// CSV with header `angle_index,phi,theta,psi,rfactor`.
    pub fn to_csv(&self, angles: &TiltSeries) -> Result<String> {
        if angles.len() != self.per_angle.len() {
            return Err(Error::invalid(format!(
                "report covers {} angles but {} were supplied",
                self.per_angle.len(),
                angles.len()
            )));
        }
        let mut out = String::from("angle_index,phi,theta,psi,rfactor\n");
        for (i, (r, e)) in self.per_angle.iter().zip(angles).enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", i, e.phi, e.theta, e.psi, r));
        }
        Ok(out)
    }
}

/// R-factor of a volume against measured projections: per angle,
/// `sum |model - measured| / sum |measured|`, averaged over angles.
///
/// The numerator is the plain residual magnitude, so an exact fit scores
/// zero regardless of sign wiggle in the model projections; for
/// nonnegative model projections this coincides with taking the absolute
/// value of the calculated projection first.
pub fn rfactor(
    stack: &ProjectionStack,
    v: &Volume,
    cfg: &ProjectorConfig,
) -> Result<RFactorReport> {
    if stack.projection_dims() != (v.dims().0, v.dims().1) {
        return Err(Error::invalid(format!(
            "stack projections {:?} do not match volume in-plane dims ({}, {})",
            stack.projection_dims(),
            v.dims().0,
            v.dims().1
        )));
    }
    let projector = FstProjector::new(v, cfg)?;
    let mut per_angle = Vec::with_capacity(stack.len());
    for (i, (b, &e)) in stack.iter().enumerate() {
        let den: f64 = b.data().iter().map(|x| x.abs()).sum();
        if den == 0.0 {
            return Err(Error::UndefinedMetric(format!(
                "measured projection {i} is all zero; R-factor undefined"
            )));
        }
        let p = projector.project(e)?;
        let num: f64 = p
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| (x - y).abs())
            .sum();
        per_angle.push(num / den);
    }
    let aggregate = per_angle.iter().sum::<f64>() / per_angle.len() as f64;
    Ok(RFactorReport { per_angle, aggregate })
}

/// Fourier shell correlation between two volumes.
///
/// Per shell `S`: `Re(sum F_a * conj(F_b)) / sqrt(sum |F_a|^2 * sum |F_b|^2)`.
/// Voxels are assigned to shells by rounding `|k| / shell_width`; empty
/// shells are reported with correlation 0 and count 0.
pub fn fsc(a: &Volume, b: &Volume, shell_width: f64) -> Result<FscCurve> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "volume dims differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if !(shell_width.is_finite() && shell_width > 0.0) {
        return Err(Error::invalid("shell width must be positive"));
    }
    let fa = fft3_centered(a);
    let fb = fft3_centered(b);
    let n_shells = (0.5 / shell_width).round() as usize;
    if n_shells == 0 {
        return Err(Error::invalid("shell width exceeds the Nyquist range"));
    }
    let (nx, ny, nz) = a.dims();
    let (cx, cy, cz) = (center_index(nx), center_index(ny), center_index(nz));

    let mut cross = vec![0.0f64; n_shells + 1];
    let mut pow_a = vec![0.0f64; n_shells + 1];
    let mut pow_b = vec![0.0f64; n_shells + 1];
    let mut counts = vec![0usize; n_shells + 1];
    Zip::indexed(fa.data()).and(fb.data()).for_each(|(i, j, k), ca, cb| {
        let fx = (i as f64 - cx as f64) / nx as f64;
        let fy = (j as f64 - cy as f64) / ny as f64;
        let fz = (k as f64 - cz as f64) / nz as f64;
        let kk = (fx * fx + fy * fy + fz * fz).sqrt();
        let bin = (kk / shell_width).round() as usize;
        if bin == 0 || bin > n_shells {
            return;
        }
        cross[bin] += (ca * cb.conj()).re;
        pow_a[bin] += ca.norm_sqr();
        pow_b[bin] += cb.norm_sqr();
        counts[bin] += 1;
    });

    let shells = (1..=n_shells)
        .map(|i| {
            let count = counts[i];
            let correlation = if count == 0 {
                0.0
            } else {
                let den = (pow_a[i] * pow_b[i]).sqrt();
                if den == 0.0 {
                    0.0
                } else {
                    (cross[i] / den).clamp(-1.0, 1.0)
                }
            };
            FscShell {
                freq: i as f64 * shell_width,
                correlation,
                count,
            }
        })
        .collect();
    Ok(FscCurve { shells })
}

/// Default FSC shell width for a volume: one frequency sample, `1/N`.
pub fn default_shell_width(dims: (usize, usize, usize)) -> f64 {
    1.0 / dims.0.max(dims.1).max(dims.2) as f64
}
