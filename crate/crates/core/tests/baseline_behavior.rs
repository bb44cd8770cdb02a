//! Baseline algorithm quality checks: SIRT convergence and the classical
//! dense-angle FBP disk reconstruction.

use ndarray::Array2;
use resire_core::baselines::{FbpConfig, FbpFilter, SirtConfig, fbp_solve, sirt_solve};
use resire_core::grid::{Projection, ProjectionStack};
use resire_core::phantom::{self, NoiseSpec, make_vesicle_phantom, simulate_stack, tilt_range};
use resire_core::projector::ProjectorConfig;

#[test]
fn sirt_noiseless_ball_reaches_six_percent_rfactor() {
    let truth = make_vesicle_phantom(&phantom::preset("ball32").unwrap()).unwrap();
    let angles = tilt_range(-70.0, 70.0, 3.5).unwrap();
    let pcfg = ProjectorConfig::new(truth.dims()).unwrap();
    let stack = simulate_stack(&truth, &angles, &NoiseSpec::none(), &pcfg).unwrap();
    let cfg = SirtConfig {
        iterations: 200,
        relaxation: 1.0,
    };
    let (_, trace) = sirt_solve(&stack, truth.dims(), &cfg).unwrap();
    let final_rf = *trace.rfactor_history.last().unwrap();
    assert!(final_rf < 0.06, "final R-factor {final_rf}");
}

/// Disk chord length integrated over each detector pixel (16 sub-samples),
/// the classical sinogram of a unit-density disk.
fn disk_sinogram_row(nx: usize, radius: f64) -> Vec<f64> {
    let c = (nx / 2) as f64;
    (0..nx)
        .map(|i| {
            let mut acc = 0.0;
            for sub in 0..16 {
                let s = i as f64 - c + (sub as f64 + 0.5) / 16.0 - 0.5;
                if s.abs() <= radius {
                    acc += 2.0 * (radius * radius - s * s).sqrt();
                }
            }
            acc / 16.0
        })
        .collect()
}

fn disk_stack(nx: usize, ny: usize, radius: f64) -> ProjectionStack {
    let row = disk_sinogram_row(nx, radius);
    let angles = tilt_range(0.0, 179.0, 1.0).unwrap();
    let projections = angles
        .iter()
        .map(|_| {
            Projection::new(Array2::from_shape_fn((nx, ny), |(i, _)| row[i])).unwrap()
        })
        .collect();
    ProjectionStack::new(projections, angles).unwrap()
}

#[test]
fn dense_angle_fbp_recovers_unit_disk() {
    let (nx, ny, radius) = (64usize, 4usize, 14.0);
    let stack = disk_stack(nx, ny, radius);
    let recon = fbp_solve(&stack, (nx, ny, nx), &FbpConfig::default()).unwrap();

    // central y slice vs the ideal disk, excluding a 2-pixel boundary band
    let c = (nx / 2) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..nx {
        for k in 0..nx {
            let r = ((i as f64 - c).powi(2) + (k as f64 - c).powi(2)).sqrt();
            if (r - radius).abs() <= 2.0 {
                continue;
            }
            let want = if r <= radius { 1.0 } else { 0.0 };
            let got = recon.data()[[i, ny / 2, k]];
            num += (got - want).powi(2);
            den += want * want;
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 0.05, "relative L2 away from the edge band: {rel}");
}

#[test]
fn hamming_fbp_stays_close_to_unit_density() {
    let (nx, ny, radius) = (64usize, 4usize, 14.0);
    let stack = disk_stack(nx, ny, radius);
    let cfg = FbpConfig {
        filter: FbpFilter::HammingWindowedRamLak,
    };
    let recon = fbp_solve(&stack, (nx, ny, nx), &cfg).unwrap();
    let c = (nx / 2) as f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..nx {
        for k in 0..nx {
            let r = ((i as f64 - c).powi(2) + (k as f64 - c).powi(2)).sqrt();
            if r <= radius - 3.0 {
                sum += recon.data()[[i, ny / 2, k]];
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    assert!((mean - 1.0).abs() < 0.1, "interior mean {mean}");
}
