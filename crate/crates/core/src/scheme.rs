//! Modified BDF2 time stepping with a long-stencil Laplacian.
//!
//! One step solves, for `phi = phi^{k+1}`,
//!
//! ```text
//! (3/2 phi - 2 phi^k + 1/2 phi^{k-1}) / dt = Lap_(4) mu + S^{k+1}
//! mu = phi^3 - (2 phi^k - phi^{k-1}) - eps^2 Lap_(4) phi - A dt Lap_(4) (phi - phi^k)
//! ```
//!
//! Applying `T = (-Lap_(4))^{-1}` turns this into `N[phi] = f` with
//!
//! ```text
//! N[phi] = T(3/2 phi - 2 phi^k + 1/2 phi^{k-1}) + dt phi^3 - dt (A dt + eps^2) Lap_(4) phi
//! f      = 2 dt phi^k - dt phi^{k-1} - A dt^2 Lap_(4) phi^k + dt T(S^{k+1})
//! ```
//!
//! which holds up to an additive constant; only the mean-free part is solved
//! for, on the hyperplane `mean(phi) = beta0`. `N - f` is the gradient of the
//! strictly convex functional computed by [`objective_f`].

use std::f64::consts::PI;

use log::warn;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::operators::{grad_norm_sq_long, laplace_long, laplace_long_scaled_into};
use crate::psd_solver::{self, PsdConfig, SolveStats};
use crate::spectral::SpectralPlan;

/// Regularization threshold above which the modified energy is non-increasing.
pub const A_STABLE: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Interface width.
    pub eps: f64,
    /// Douglas-Dupont regularization coefficient.
    pub a: f64,
    pub dt: f64,
}

impl SchemeParams {
    pub fn new(eps: f64, a: f64, dt: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidParameter(format!("A must be non-negative, got {a}")));
        }
        if a < A_STABLE {
            warn!("A = {a} is below 1/16; the modified energy is not guaranteed to decay");
        }
        Ok(Self { eps, a, dt })
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.eps, self.a, dt)
    }

    pub fn energy_stable(&self) -> bool {
        self.a >= A_STABLE
    }
}

/// Two-level history carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    /// `phi^{k-1}`
    pub phi_prev: Field,
    /// `phi^k`
    pub phi_curr: Field,
    pub t: f64,
    /// Conserved mean.
    pub beta0: f64,
    pub step_index: usize,
}

impl StepState {
    pub fn grid(&self) -> &GridSpec {
        self.phi_curr.grid()
    }
}

/// Space-time forcing added to the right-hand side of the evolution equation.
pub trait Forcing: Send + Sync {
    fn value(&self, x: f64, y: f64, t: f64) -> f64;

    fn sample(&self, grid: GridSpec, t: f64) -> Field {
        Field::from_fn(grid, |x, y| self.value(x, y, t))
    }
}

/// Exact solution `phi_e = sin(a x) cos(a y) cos(t) / (2 pi)`, `a = 2 pi / L`, and
/// the forcing that makes it solve the Cahn-Hilliard equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub eps: f64,
    pub length: f64,
}

impl ManufacturedSolution {
    pub fn new(eps: f64, length: f64) -> Self {
        Self { eps, length }
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn exact(&self, x: f64, y: f64, t: f64) -> f64 {
        let a = self.wavenumber();
        (a * x).sin() * (a * y).cos() * t.cos() / (2.0 * PI)
    }

    pub fn exact_field(&self, grid: GridSpec, t: f64) -> Field {
        Field::from_fn(grid, |x, y| self.exact(x, y, t))
    }

    /// `S = phi_t - Lap(phi^3) + Lap(phi) + eps^2 Lap^2(phi)` in closed form.
    pub fn source(&self, x: f64, y: f64, t: f64) -> f64 {
        let a = self.wavenumber();
        let (sx, cx) = (a * x).sin_cos();
        let (sy, cy) = (a * y).sin_cos();
        let amp = 1.0 / (2.0 * PI);
        let phi = amp * sx * cy * t.cos();
        let phi_t = -amp * sx * cy * t.sin();
        let lap = -2.0 * a * a * phi;
        let bilap = 4.0 * a.powi(4) * phi;
        let g = amp * a * t.cos();
        let grad_sq = g * g * (cx * cx * cy * cy + sx * sx * sy * sy);
        let lap_cube = 3.0 * phi * phi * lap + 6.0 * phi * grad_sq;
        phi_t - lap_cube + lap + self.eps * self.eps * bilap
    }
}

impl Forcing for ManufacturedSolution {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.source(x, y, t)
    }
}

/// `mu = phi^3 - phi - eps^2 Lap_(4) phi`.
pub fn chemical_potential(phi: &Field, eps: f64) -> Result<Field> {
    let mut mu = phi.map(|v| v * v * v - v);
    mu.axpy(-eps * eps, &laplace_long(phi)?)?;
    Ok(mu)
}

/// `dt * T(P0 S(t))`, the forcing contribution in the `N[phi] = f` form.
fn forcing_term(plan: &SpectralPlan, source: &dyn Forcing, t: f64, dt: f64) -> Result<Field> {
    let s = source.sample(*plan.grid(), t).mean_free();
    Ok(plan.invert_laplace_long(&s)?.scaled(dt))
}

/// Ghost step `phi^{-1} = phi^0 - dt Lap_(4) mu^0`, with the forcing at `t = 0`
/// folded in (`phi^{-1} = phi^0 - dt (Lap_(4) mu^0 + S^0)`) when present.
pub fn ghost_init(
    phi0: Field,
    params: &SchemeParams,
    source: Option<&dyn Forcing>,
) -> Result<StepState> {
    ghost_init_at(phi0, params, source, 0.0)
}

pub fn ghost_init_at(
    phi0: Field,
    params: &SchemeParams,
    source: Option<&dyn Forcing>,
    t0: f64,
) -> Result<StepState> {
    let mu0 = chemical_potential(&phi0, params.eps)?;
    let mut phi_prev = phi0.clone();
    phi_prev.axpy(-params.dt, &laplace_long(&mu0)?)?;
    if let Some(src) = source {
        let s = src.sample(*phi0.grid(), t0).mean_free();
        phi_prev.axpy(-params.dt, &s)?;
    }
    Ok(StepState {
        beta0: phi0.mean(),
        phi_prev,
        phi_curr: phi0,
        t: t0,
        step_index: 0,
    })
}

/// Restart with `phi^{-1} = phi^0`, used whenever the time step changes.
pub fn restart_flat(phi0: Field, t: f64) -> StepState {
    StepState {
        beta0: phi0.mean(),
        phi_prev: phi0.clone(),
        phi_curr: phi0,
        t,
        step_index: 0,
    }
}

/// Right-hand side `f` of `N[phi] = f` for the step from `t` to `t + dt`.
pub fn assemble_rhs(
    state: &StepState,
    params: &SchemeParams,
    plan: &SpectralPlan,
    source: Option<&dyn Forcing>,
) -> Result<Field> {
    let dt = params.dt;
    let mut f = state.phi_curr.scaled(2.0 * dt);
    f.axpy(-dt, &state.phi_prev)?;
    f.axpy(-params.a * dt * dt, &laplace_long(&state.phi_curr)?)?;
    if let Some(src) = source {
        f.axpy(1.0, &forcing_term(plan, src, state.t + dt, dt)?)?;
    }
    Ok(f)
}

fn check_mass(state: &StepState, phi: &Field) -> Result<()> {
    let mean = phi.mean();
    if (mean - state.beta0).abs() > 1e-9 * (1.0 + state.beta0.abs()) {
        return Err(Error::MassMismatch {
            mean,
            expected: state.beta0,
        });
    }
    Ok(())
}

/// `3/2 phi - 2 phi^k + 1/2 phi^{k-1}` with its (rounding-level) mean removed.
fn bdf_increment(state: &StepState, phi: &Field) -> Result<Field> {
    let mut b = phi.scaled(1.5);
    b.axpy(-2.0, &state.phi_curr)?;
    b.axpy(0.5, &state.phi_prev)?;
    Ok(b.mean_free())
}

/// `N[phi]` together with `F[phi]`; both share `T(bdf increment)`.
pub(crate) fn evaluate(
    state: &StepState,
    params: &SchemeParams,
    phi: &Field,
    rhs: &Field,
    plan: &SpectralPlan,
) -> Result<(Field, f64)> {
    check_mass(state, phi)?;
    let dt = params.dt;
    let diffusion = dt * (params.a * dt + params.eps * params.eps);
    let b = bdf_increment(state, phi)?;
    let tb = plan.invert_laplace_long(&b)?;

    let mut lap = Field::zeros(*phi.grid());
    laplace_long_scaled_into(phi, -diffusion, &mut lap)?;
    let mut n = tb.clone();
    {
        let out = n.values_mut();
        for ((o, &p), &l) in out.iter_mut().zip(phi.values()).zip(lap.values()) {
            *o += dt * p * p * p + l;
        }
    }

    // F = 1/3 ||b||_{-1}^2 + dt/4 ||phi||_4^4 + dt/2 (A dt + eps^2) ||grad_(4) phi||^2 - (f, phi)
    // with ||grad_(4) phi||^2 = (phi, -Lap_(4) phi) = (phi, lap) / diffusion.
    let objective = b.inner(&tb)? / 3.0 + dt / 4.0 * phi.norm4_pow4() + 0.5 * phi.inner(&lap)?
        - rhs.inner(phi)?;
    Ok((n, objective))
}

/// Nonlinear operator `N[phi]`. Requires `mean(phi) = beta0`.
pub fn apply_n(
    state: &StepState,
    params: &SchemeParams,
    phi: &Field,
    plan: &SpectralPlan,
) -> Result<Field> {
    let zero = Field::zeros(*phi.grid());
    Ok(evaluate(state, params, phi, &zero, plan)?.0)
}

/// Convex objective whose gradient is `N[phi] - f`.
pub fn objective_f(
    state: &StepState,
    params: &SchemeParams,
    phi: &Field,
    rhs: &Field,
    plan: &SpectralPlan,
) -> Result<f64> {
    check_mass(state, phi)?;
    let dt = params.dt;
    let b = bdf_increment(state, phi)?;
    let hm1 = plan.hminus1_norm(&b)?;
    Ok(hm1 * hm1 / 3.0
        + dt / 4.0 * phi.norm4_pow4()
        + dt / 2.0 * (params.a * dt + params.eps * params.eps) * grad_norm_sq_long(phi)?
        - rhs.inner(phi)?)
}

/// Residual of the two-field form, `(3/2 phi - 2 phi^k + 1/2 phi^{k-1})/dt - Lap_(4) mu - S`,
/// for a candidate `phi^{k+1}`.
pub fn two_field_residual(
    state: &StepState,
    params: &SchemeParams,
    phi_next: &Field,
    source: Option<&dyn Forcing>,
) -> Result<Field> {
    let dt = params.dt;
    let mut res = phi_next.scaled(1.5 / dt);
    res.axpy(-2.0 / dt, &state.phi_curr)?;
    res.axpy(0.5 / dt, &state.phi_prev)?;

    let mut mu = phi_next.map(|v| v * v * v);
    mu.axpy(-2.0, &state.phi_curr)?;
    mu.axpy(1.0, &state.phi_prev)?;
    mu.axpy(-params.eps * params.eps, &laplace_long(phi_next)?)?;
    let diff = phi_next.zip_map(&state.phi_curr, |a, b| a - b)?;
    mu.axpy(-params.a * dt, &laplace_long(&diff)?)?;
    res.axpy(-1.0, &laplace_long(&mu)?)?;
    if let Some(src) = source {
        res.axpy(-1.0, &src.sample(*phi_next.grid(), state.t + dt))?;
    }
    Ok(res)
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub modified_energy: f64,
    /// `||phi||_2^2 + ||grad_(4) phi||_2^2`
    pub h1_sq: f64,
    pub solve: SolveStats,
}

/// Advances `state` by one step of size `params.dt`.
pub fn step(
    state: &StepState,
    params: &SchemeParams,
    plan: &SpectralPlan,
    cfg: &PsdConfig,
    source: Option<&dyn Forcing>,
) -> Result<(StepState, StepDiagnostics)> {
    let rhs = assemble_rhs(state, params, plan, source)?;
    let (phi_next, stats) = psd_solver::solve(state, params, &rhs, plan, cfg)?;
    let step_index = state.step_index + 1;
    if !phi_next.is_finite() {
        return Err(Error::NonFinite { step: step_index });
    }
    let energy = diagnostics::energy(&phi_next, params.eps)?;
    let modified_energy =
        diagnostics::modified_energy(&phi_next, &state.phi_curr, params.eps, params.dt, plan)?;
    let h1_sq = diagnostics::h1_norm_sq(&phi_next)?;
    let t = state.t + params.dt;
    let diag = StepDiagnostics {
        step: step_index,
        t,
        mass: phi_next.mean(),
        energy,
        modified_energy,
        h1_sq,
        solve: stats,
    };
    let next = StepState {
        phi_prev: state.phi_curr.clone(),
        phi_curr: phi_next,
        t,
        beta0: state.beta0,
        step_index,
    };
    Ok((next, diag))
}
