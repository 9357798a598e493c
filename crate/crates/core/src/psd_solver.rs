//! Preconditioned steepest descent for `N[phi] = f` on the mass hyperplane.
//!
//! Each iteration
//!
//! 1. forms the projected residual `r = P0 (f - N[phi])`,
//! 2. solves `L_h d = r` with the FFT-diagonal preconditioner,
//! 3. moves to `phi + alpha d`, where `alpha` is the unique zero of the cubic
//!    `q(alpha) = (N[phi + alpha d] - f, d)`, i.e. the exact minimizer of the
//!    convex objective along `d`.
//!
//! Expanding `(phi + alpha d)^3` gives `q = c0 + c1 alpha + c2 alpha^2 + c3 alpha^3`:
//!
//! ```text
//! c0 = (N[phi] - f, d)
//! c1 = 3/2 ||d||_{-1}^2 + 3 dt (phi^2 d, d) + dt (A dt + eps^2) (d, -Lap_(4) d)
//! c2 = 3 dt (phi, d^3)
//! c3 = dt ||d||_4^4
//! ```

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Field};
use crate::operators::laplace_long;
use crate::scheme::{self, SchemeParams, StepState};
use crate::spectral::SpectralPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// `phi^k`
    Previous,
    /// `2 phi^k - phi^{k-1}`
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdConfig {
    /// Relative tolerance on `||P0 f||_2`.
    pub tol_rel: f64,
    /// Absolute floor, in units of `dt * |Omega|^{1/2} * max(1, ||phi^k||_inf)`.
    pub tol_abs: f64,
    pub max_iter: usize,
    pub init_guess: InitialGuess,
    /// Power of `-Lap_(4)` in the preconditioner's diffusion term (1 or 2).
    pub precond_power: u32,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-10,
            tol_abs: 1e-13,
            max_iter: 200,
            init_guess: InitialGuess::Extrapolated,
            precond_power: 1,
        }
    }
}

impl PsdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) || !(self.tol_abs >= 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(1..=2).contains(&self.precond_power) {
            return Err(Error::InvalidParameter(format!(
                "precond_power must be 1 or 2, got {}",
                self.precond_power
            )));
        }
        Ok(())
    }
}

/// History of one nonlinear solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Number of descent updates performed.
    pub iterations: usize,
    /// `||r^{(n)}||_2` for every visited iterate, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// `F[phi^{(n)}]` for every visited iterate.
    pub objective: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub target: f64,
}

impl SolveStats {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// Largest ratio `r_{n+1} / r_n` over the second half of the history.
    pub fn tail_ratio(&self) -> Option<f64> {
        let n = self.residuals.len();
        if n < 2 {
            return None;
        }
        let start = (n - 1) / 2;
        self.residuals[start..]
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
    }

    /// Geometric-mean contraction factor over the whole solve.
    pub fn mean_ratio(&self) -> Option<f64> {
        let n = self.residuals.len();
        if n < 2 || self.residuals[0] == 0.0 {
            return None;
        }
        Some((self.residuals[n - 1] / self.residuals[0]).powf(1.0 / (n - 1) as f64))
    }

    /// Largest increase `F_{n+1} - F_n` relative to `|F_n|` (negative when monotone).
    pub fn worst_objective_increase(&self) -> f64 {
        self.objective
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cubic `q(alpha) = c0 + c1 alpha + c2 alpha^2 + c3 alpha^3` along a search direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchCubic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl LineSearchCubic {
    pub fn eval(&self, a: f64) -> f64 {
        self.c0 + a * (self.c1 + a * (self.c2 + a * self.c3))
    }

    pub fn derivative(&self, a: f64) -> f64 {
        self.c1 + a * (2.0 * self.c2 + 3.0 * a * self.c3)
    }

    fn converged(&self, a: f64) -> bool {
        self.eval(a).abs() <= 1e-12 * self.c0.abs() + 1e-30
    }

    /// Unique real zero, by Newton's method safeguarded with bisection.
    pub fn root(&self) -> Result<f64> {
        if self.c0 == 0.0 {
            return Ok(0.0);
        }
        if !(self.c1 > 0.0 || self.c3 > 0.0) {
            return Err(Error::DegenerateDirection);
        }
        let (mut lo, mut hi) = if self.c0 < 0.0 {
            let mut hi = 1.0;
            while self.eval(hi) < 0.0 {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::LineSearch(format!("no sign change found for {self:?}")));
                }
            }
            (0.0, hi)
        } else {
            let mut lo = -1.0;
            while self.eval(lo) > 0.0 {
                lo *= 2.0;
                if lo < -1e300 {
                    return Err(Error::LineSearch(format!("no sign change found for {self:?}")));
                }
            }
            (lo, 0.0)
        };

        let mut a = if self.c1 > 0.0 {
            (-self.c0 / self.c1).clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..300 {
            let q = self.eval(a);
            if self.converged(a) {
                return Ok(a);
            }
            if q < 0.0 {
                lo = a;
            } else {
                hi = a;
            }
            let dq = self.derivative(a);
            let newton = a - q / dq;
            a = if dq > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                return Ok(a);
            }
        }
        if a.is_finite() {
            Ok(a)
        } else {
            Err(Error::LineSearch(format!("root iteration diverged for {self:?}")))
        }
    }
}

/// `P0 (f - N[phi])`.
pub fn residual(
    state: &StepState,
    params: &SchemeParams,
    phi: &Field,
    rhs: &Field,
    plan: &SpectralPlan,
) -> Result<Field> {
    let n = scheme::apply_n(state, params, phi, plan)?;
    Ok(rhs.zip_map(&n, |f, n| f - n)?.mean_free())
}

/// `d = L_h^{-1} r`.
pub fn search_direction(
    plan: &SpectralPlan,
    r: &Field,
    params: &SchemeParams,
    cfg: &PsdConfig,
) -> Result<Field> {
    plan.precondition_solve(r, params.dt, params.eps, params.a, cfg.precond_power)
}

/// Cubic coefficients given `c0 = (N[phi] - f, d)`.
pub fn cubic_coefficients(
    params: &SchemeParams,
    phi: &Field,
    d: &Field,
    c0: f64,
    plan: &SpectralPlan,
) -> Result<LineSearchCubic> {
    let dt = params.dt;
    let td = plan.invert_laplace_long(&d.mean_free())?;
    let neg_lap_d = laplace_long(d)?.scaled(-1.0);
    let (p, dv) = (phi.values(), d.values());
    let w = phi.grid().cell_volume();
    let phi2_dd = w * pairwise_sum(p.len(), |k| p[k] * p[k] * dv[k] * dv[k]);
    let phi_d3 = w * pairwise_sum(p.len(), |k| p[k] * dv[k] * dv[k] * dv[k]);
    Ok(LineSearchCubic {
        c0,
        c1: 1.5 * d.inner(&td)?
            + 3.0 * dt * phi2_dd
            + dt * (params.a * dt + params.eps * params.eps) * d.inner(&neg_lap_d)?,
        c2: 3.0 * dt * phi_d3,
        c3: dt * d.norm4_pow4(),
    })
}

/// Exact line minimization of the objective from `phi` along mean-free `d`.
pub fn line_search(
    state: &StepState,
    params: &SchemeParams,
    phi: &Field,
    d: &Field,
    rhs: &Field,
    plan: &SpectralPlan,
) -> Result<f64> {
    if d.norm_linf() == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let n = scheme::apply_n(state, params, phi, plan)?;
    let c0 = n.zip_map(rhs, |a, b| a - b)?.inner(d)?;
    cubic_coefficients(params, phi, d, c0, plan)?.root()
}

/// Initial iterate for the configured strategy.
pub fn initial_guess(state: &StepState, cfg: &PsdConfig) -> Result<Field> {
    Ok(match cfg.init_guess {
        InitialGuess::Previous => state.phi_curr.clone(),
        InitialGuess::Extrapolated => {
            let mut g = state.phi_curr.scaled(2.0);
            g.axpy(-1.0, &state.phi_prev)?;
            g
        }
    })
}

/// Solves `N[phi] = f` to `||r||_2 <= tol_abs * scale + tol_rel * ||P0 f||_2`.
pub fn solve(
    state: &StepState,
    params: &SchemeParams,
    rhs: &Field,
    plan: &SpectralPlan,
    cfg: &PsdConfig,
) -> Result<(Field, SolveStats)> {
    cfg.validate()?;
    let grid = *state.grid();
    let scale = params.dt * grid.volume().sqrt() * state.phi_curr.norm_linf().max(1.0);
    let target = cfg.tol_abs * scale + cfg.tol_rel * rhs.mean_free().norm_l2();
    let mut stats = SolveStats {
        target,
        ..Default::default()
    };

    let mut phi = initial_guess(state, cfg)?;
    loop {
        let (n, objective) = scheme::evaluate(state, params, &phi, rhs, plan)?;
        let r = rhs.zip_map(&n, |f, n| f - n)?.mean_free();
        let res = r.norm_l2();
        stats.residuals.push(res);
        stats.objective.push(objective);
        if res <= target {
            return Ok((phi, stats));
        }
        if !res.is_finite() || stats.iterations >= cfg.max_iter {
            return Err(Error::NotConverged {
                iterations: stats.iterations,
                last: res,
                target,
                history: stats.residuals,
            });
        }
        let d = search_direction(plan, &r, params, cfg)?;
        // d is mean-free, so (N - f, d) = -(r, d)
        let c0 = -r.inner(&d)?;
        let alpha = cubic_coefficients(params, &phi, &d, c0, plan)?.root()?;
        phi.axpy(alpha, &d)?;
        stats.step_lengths.push(alpha);
        stats.iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{assemble_rhs, objective_f};
    use crate::test_util::{params, random_on_hyperplane, random_state};

    #[test]
    fn linear_cubic_root_is_exact() {
        let q = LineSearchCubic { c0: -3.0, c1: 4.0, c2: 0.0, c3: 0.0 };
        assert_eq!(q.root().unwrap(), 0.75);
        let q = LineSearchCubic { c0: 2.0, c1: 0.5, c2: 0.0, c3: 0.0 };
        assert_eq!(q.root().unwrap(), -4.0);
    }

    #[test]
    fn stationary_point_gives_zero_step() {
        let q = LineSearchCubic { c0: 0.0, c1: 1.0, c2: 2.0, c3: 3.0 };
        assert_eq!(q.root().unwrap(), 0.0);
    }

    #[test]
    fn cubic_root_with_bracket_expansion() {
        // root far beyond the initial bracket [0, 1]
        let q = LineSearchCubic { c0: -1e6, c1: 1.0, c2: 0.5, c3: 1e-3 };
        let a = q.root().unwrap();
        assert!(a > 1.0);
        assert!(q.eval(a).abs() <= 1e-12 * 1e6 + 1e-30);
        // negative root
        let q = LineSearchCubic { c0: 5.0, c1: 0.1, c2: -0.2, c3: 0.4 };
        let a = q.root().unwrap();
        assert!(a < 0.0 && q.eval(a).abs() <= 5e-12);
    }

    #[test]
    fn degenerate_cubic_errors() {
        let q = LineSearchCubic { c0: -1.0, c1: 0.0, c2: 0.0, c3: 0.0 };
        assert!(matches!(q.root(), Err(Error::DegenerateDirection)));
    }

    #[test]
    fn tail_ratio_and_monotonicity_helpers() {
        let stats = SolveStats {
            residuals: vec![1.0, 0.5, 0.2, 0.1, 0.04],
            objective: vec![3.0, 2.0, 1.5, 1.4, 1.39],
            ..Default::default()
        };
        assert!((stats.tail_ratio().unwrap() - 0.5).abs() < 1e-15);
        assert!(stats.worst_objective_increase() < 0.0);
        assert!((stats.mean_ratio().unwrap() - 0.04f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(PsdConfig::default().validate().is_ok());
        let bad = PsdConfig { precond_power: 3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PsdConfig { max_iter: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn residual_matches_brute_recomputation() {
        let (plan, st) = random_state(16, 2.0, 0.1, 31);
        let p = params();
        let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
        let phi = random_on_hyperplane(&plan, 0.1, 0.5, 32);
        let r = residual(&st, &p, &phi, &rhs, &plan).unwrap();
        // N[phi] = T(b) + dt phi^3 - dt (A dt + eps^2) Lap phi, with Lap through the symbol
        let mut b = phi.scaled(1.5);
        b.axpy(-2.0, &st.phi_curr).unwrap();
        b.axpy(0.5, &st.phi_prev).unwrap();
        let tb = plan.invert_laplace_long(&b.mean_free()).unwrap();
        let lap = plan.laplace_long_spectral(&phi).unwrap();
        let c = p.dt * (p.a * p.dt + p.eps * p.eps);
        let raw: Vec<f64> = (0..phi.values().len())
            .map(|k| {
                let v = phi.values()[k];
                rhs.values()[k] - (tb.values()[k] + p.dt * v * v * v - c * lap.values()[k])
            })
            .collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        for (k, v) in raw.iter().enumerate() {
            assert!((r.values()[k] - (v - mean)).abs() < 1e-13);
        }
    }

    #[test]
    fn search_direction_is_a_descent_direction() {
        let p = params();
        let cfg = PsdConfig::default();
        for seed in 0..1000 {
            let (plan, st) = random_state(8, 1.0, 0.05, seed);
            let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
            let phi = random_on_hyperplane(&plan, 0.05, 0.8, seed + 5000);
            let r = residual(&st, &p, &phi, &rhs, &plan).unwrap();
            let d = search_direction(&plan, &r, &p, &cfg).unwrap();
            assert!(d.mean().abs() < 1e-15);
            let n = scheme::apply_n(&st, &p, &phi, &plan).unwrap();
            let slope = n.zip_map(&rhs, |a, b| a - b).unwrap().inner(&d).unwrap();
            assert!(slope < 0.0, "seed {seed}: {slope}");
        }
        let (plan, _) = random_state(8, 1.0, 0.0, 0);
        let zero = Field::zeros(*plan.grid());
        assert_eq!(search_direction(&plan, &zero, &p, &cfg).unwrap(), zero);
    }

    #[test]
    fn line_search_matches_golden_section_scan() {
        let p = params();
        let cfg = PsdConfig::default();
        for seed in 0..5 {
            let (plan, st) = random_state(8, 1.0, -0.1, 40 + seed);
            let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
            let phi = random_on_hyperplane(&plan, -0.1, 0.9, 60 + seed);
            let r = residual(&st, &p, &phi, &rhs, &plan).unwrap();
            let d = search_direction(&plan, &r, &p, &cfg).unwrap();
            let alpha = line_search(&st, &p, &phi, &d, &rhs, &plan).unwrap();
            let along = |a: f64| {
                let mut x = phi.clone();
                x.axpy(a, &d).unwrap();
                objective_f(&st, &p, &x, &rhs, &plan).unwrap()
            };
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            while hi - lo > 1e-9 {
                let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
                if along(a) < along(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            assert!((alpha - 0.5 * (lo + hi)).abs() < 1e-6, "{alpha} vs {lo}");
        }
    }

    #[test]
    fn zero_direction_is_rejected() {
        let (plan, st) = random_state(8, 1.0, 0.0, 1);
        let p = params();
        let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
        let zero = Field::zeros(*plan.grid());
        assert!(matches!(
            line_search(&st, &p, &st.phi_curr, &zero, &rhs, &plan),
            Err(Error::DegenerateDirection)
        ));
    }

    #[test]
    fn quadratic_instance_has_exact_step() {
        // phi = 0 makes c2 vanish; a direction with tiny amplitude makes c3 negligible
        let (plan, st) = random_state(8, 1.0, 0.0, 2);
        let p = params();
        let d = random_on_hyperplane(&plan, 0.0, 1.0, 3);
        let zero = Field::zeros(*plan.grid());
        let q = cubic_coefficients(&p, &zero, &d, -2.0, &plan).unwrap();
        assert_eq!(q.c2, 0.0);
        assert!(q.c1 > 0.0 && q.c3 > 0.0);
        let q = LineSearchCubic { c3: 0.0, ..q };
        assert_eq!(q.root().unwrap(), 2.0 / q.c1);
        let _ = st;
    }

    #[test]
    fn solve_is_healthy() {
        let (plan, st) = random_state(32, 3.2, 0.25, 77);
        let p = params();
        let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
        let cfg = PsdConfig::default();
        let (a, s) = solve(&st, &p, &rhs, &plan, &cfg).unwrap();
        assert!(s.iterations <= 200);
        assert!(s.final_residual() <= s.target);
        assert!(s.tail_ratio().unwrap() < 1.0);
        assert!(s.worst_objective_increase() <= 1e-12);
        assert!((a.mean() - st.beta0).abs() <= 1e-11 * (1.0 + st.beta0.abs()));

        let prev = PsdConfig { init_guess: InitialGuess::Previous, ..cfg };
        let (c, _) = solve(&st, &p, &rhs, &plan, &prev).unwrap();
        assert!(c.zip_map(&a, |x, y| x - y).unwrap().norm_l2() <= 10.0 * cfg.tol_rel * a.norm_l2());
    }

    #[test]
    fn solution_does_not_depend_on_preconditioner_power() {
        // the squared-Laplacian metric over-weights high modes, so it needs many more iterations
        let (plan, st) = random_state(16, 3.2, 0.25, 78);
        let p = params();
        let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
        let cfg1 = PsdConfig::default();
        let cfg2 = PsdConfig { precond_power: 2, max_iter: 50_000, ..cfg1 };
        let (a, _) = solve(&st, &p, &rhs, &plan, &cfg1).unwrap();
        let (b, s2) = solve(&st, &p, &rhs, &plan, &cfg2).unwrap();
        assert!(s2.worst_objective_increase() <= 1e-12);
        let diff = a.zip_map(&b, |x, y| x - y).unwrap().norm_l2();
        assert!(diff <= 10.0 * cfg1.tol_rel * a.norm_l2(), "{diff} after {} iterations", s2.iterations);
    }

    #[test]
    fn non_convergence_reports_history() {
        let (plan, st) = random_state(16, 2.0, 0.0, 8);
        let p = params();
        let rhs = assemble_rhs(&st, &p, &plan, None).unwrap();
        let cfg = PsdConfig { max_iter: 1, tol_rel: 1e-16, tol_abs: 0.0, ..Default::default() };
        match solve(&st, &p, &rhs, &plan, &cfg) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
