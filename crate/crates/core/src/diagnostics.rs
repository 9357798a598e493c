//! Discrete energies, per-step records and the coarsening power-law fit.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::operators::grad_norm_sq_long;
use crate::scheme::StepDiagnostics;
use crate::spectral::SpectralPlan;

/// `E_h(phi) = 1/4 ||phi||_4^4 - 1/2 ||phi||_2^2 + 1/4 |Omega| + eps^2/2 ||grad_(4) phi||_2^2`.
pub fn energy(phi: &Field, eps: f64) -> Result<f64> {
    // the bulk part is summed as 1/4 (phi^2 - 1)^2 so it stays non-negative under rounding
    let w = phi.grid().cell_volume();
    let bulk = 0.25
        * w
        * crate::grid::pairwise_sum(phi.values().len(), |k| {
            let v = phi.values()[k];
            let s = v * v - 1.0;
            s * s
        });
    Ok(bulk + 0.5 * eps * eps * grad_norm_sq_long(phi)?)
}

/// `E_h(new) + ||new - old||_{-1}^2 / (4 dt) + ||new - old||_2^2 / 2`.
pub fn modified_energy(
    phi_new: &Field,
    phi_old: &Field,
    eps: f64,
    dt: f64,
    plan: &SpectralPlan,
) -> Result<f64> {
    let diff = phi_new.zip_map(phi_old, |a, b| a - b)?;
    let (mean_new, mean_diff) = (phi_new.mean(), diff.mean());
    if mean_diff.abs() > 1e-9 * (1.0 + mean_new.abs()) {
        return Err(Error::MassMismatch {
            mean: mean_new,
            expected: phi_old.mean(),
        });
    }
    let diff = diff.mean_free();
    let hm1 = plan.hminus1_norm(&diff)?;
    Ok(energy(phi_new, eps)? + hm1 * hm1 / (4.0 * dt) + 0.5 * diff.norm_l2().powi(2))
}

/// Discrete `H^1` quantity `||phi||_2^2 + ||grad_(4) phi||_2^2` monitored along a run.
pub fn h1_norm_sq(phi: &Field) -> Result<f64> {
    Ok(phi.norm_l2().powi(2) + grad_norm_sq_long(phi)?)
}

/// One row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub psd_iters: usize,
    pub residual: f64,
}

impl EnergyRecord {
    pub fn from_step(d: &StepDiagnostics) -> Self {
        Self {
            step: d.step,
            t: d.t,
            mass: d.mass,
            energy: d.energy,
            modified_energy: d.modified_energy,
            psd_iters: d.solve.iterations,
            residual: d.solve.final_residual(),
        }
    }
}

/// `E ~ amplitude * t^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub samples: usize,
}

/// Least-squares fit of `log E` against `log t` over records with `t in [t_min, t_max]`.
pub fn fit_power_law(records: &[EnergyRecord], t_min: f64, t_max: f64) -> Result<PowerLawFit> {
    let window: Vec<_> = records
        .iter()
        .filter(|r| r.t >= t_min && r.t <= t_max)
        .collect();
    if window.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} records in [{t_min}, {t_max}], need at least 10",
            window.len()
        )));
    }
    if let Some(r) = window.iter().find(|r| !(r.energy > 0.0) || !(r.t > 0.0)) {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs positive t and energy, got t = {}, E = {}",
            r.t, r.energy
        )));
    }
    let n = window.len() as f64;
    let xs: Vec<f64> = window.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|r| r.energy.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    let slope = sxy / sxx;
    Ok(PowerLawFit {
        amplitude: (my - slope * mx).exp(),
        exponent: -slope,
        samples: window.len(),
    })
}
