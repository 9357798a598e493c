//! Numerical studies backing the discretization: truncation rates, symbol
//! bounds, norm inequalities, ghost-step accuracy and manufactured-solution
//! convergence.
//!
//! Every study is deterministic for a fixed seed and renders to CSV.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Axis, Dim, Field, GridSpec};
use crate::operators::{d1_long, grad_norm_sq_long, grad_norm_sq_std, laplace_long, laplace_std};
use crate::psd_solver::{PsdConfig, SolveStats};
use crate::random::{random_trig_field, seeded};
use crate::scheme::{self, ManufacturedSolution, SchemeParams, A_STABLE};
use crate::spectral::{lambda_long_symbol, SpectralPlan};

/// `log2(coarse / fine)`.
pub fn halving_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Least-squares slope of `log e` against `log h`.
pub fn regression_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(_, &e)| e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub m: usize,
    pub h: f64,
    pub error_l2: f64,
    pub error_linf: f64,
    /// Rate against the previous (coarser) row.
    pub rate_l2: Option<f64>,
    pub rate_linf: Option<f64>,
}

/// Errors over a sequence of grids, with Table-style consecutive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub name: String,
    pub parameters: Vec<(String, String)>,
    pub rows: Vec<RefinementRow>,
}

impl RefinementReport {
    pub fn new(name: impl Into<String>, parameters: Vec<(String, String)>) -> Self {
        Self {
            name: name.into(),
            parameters,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, m: usize, h: f64, error_l2: f64, error_linf: f64) {
        let (rate_l2, rate_linf) = match self.rows.last() {
            Some(prev) => (
                Some(halving_rate(prev.error_l2, error_l2) / (prev.h / h).log2()),
                Some(halving_rate(prev.error_linf, error_linf) / (prev.h / h).log2()),
            ),
            None => (None, None),
        };
        self.rows.push(RefinementRow {
            m,
            h,
            error_l2,
            error_linf,
            rate_l2,
            rate_linf,
        });
    }

    /// Rates of the last `n` consecutive pairs, `(l2, linf)`.
    pub fn finest_rates(&self, n: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .rev()
            .take(n)
            .filter_map(|r| Some((r.rate_l2?, r.rate_linf?)))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect()
    }

    pub fn slope_l2(&self) -> Option<f64> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| r.error_l2).collect();
        regression_slope(&h, &e)
    }

    pub fn slope_linf(&self) -> Option<f64> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| r.error_linf).collect();
        regression_slope(&h, &e)
    }

    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
        let mut s = String::new();
        writeln!(s, "# {}", self.name).unwrap();
        for (k, v) in &self.parameters {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        writeln!(s, "m,h,error_linf,rate_linf,error_l2,rate_l2").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.16e},{:.16e},{},{:.16e},{}",
                r.m,
                r.h,
                r.error_linf,
                fmt_opt(r.rate_linf),
                r.error_l2,
                fmt_opt(r.rate_l2)
            )
            .unwrap();
        }
        writeln!(
            s,
            "# regression slope: linf = {}, l2 = {}",
            fmt_opt(self.slope_linf()),
            fmt_opt(self.slope_l2())
        )
        .unwrap();
        s
    }
}

/// Smooth periodic test functions with known derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `sin(2 pi kx x / L) cos(2 pi ky y / L)`; the y factor is dropped in 1-D.
    Mode { kx: u32, ky: u32 },
    /// `exp(sin(2 pi x / L)) cos(2 pi y / L)`; the y factor is dropped in 1-D.
    ExpSinCos,
}

impl TestFunction {
    fn y_factor(dim: Dim, w: f64, y: f64) -> (f64, f64) {
        match dim {
            Dim::One => (1.0, 0.0),
            Dim::Two => ((w * y).cos(), w * w),
        }
    }

    pub fn value(&self, length: f64, dim: Dim, x: f64, y: f64) -> f64 {
        let w = 2.0 * PI / length;
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Mode { kx, ky } => {
                (kx as f64 * w * x).sin() * Self::y_factor(dim, ky as f64 * w, y).0
            }
            TestFunction::ExpSinCos => (w * x).sin().exp() * Self::y_factor(dim, w, y).0,
        }
    }

    pub fn dx(&self, length: f64, dim: Dim, x: f64, y: f64) -> f64 {
        let w = 2.0 * PI / length;
        match *self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::Mode { kx, ky } => {
                let a = kx as f64 * w;
                a * (a * x).cos() * Self::y_factor(dim, ky as f64 * w, y).0
            }
            TestFunction::ExpSinCos => {
                w * (w * x).cos() * (w * x).sin().exp() * Self::y_factor(dim, w, y).0
            }
        }
    }

    pub fn laplacian(&self, length: f64, dim: Dim, x: f64, y: f64) -> f64 {
        let w = 2.0 * PI / length;
        match *self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::Mode { kx, ky } => {
                let (fy, b2) = Self::y_factor(dim, ky as f64 * w, y);
                let a = kx as f64 * w;
                -(a * a + b2) * (a * x).sin() * fy
            }
            TestFunction::ExpSinCos => {
                let (fy, b2) = Self::y_factor(dim, w, y);
                let (s, c) = (w * x).sin_cos();
                let fxx = w * w * s.exp() * (c * c - s);
                fxx * fy - b2 * s.exp() * fy
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Constant(c) => format!("constant({c})"),
            TestFunction::Mode { kx, ky } => format!("sin({kx}wx)cos({ky}wy)"),
            TestFunction::ExpSinCos => "exp(sin(wx))cos(wy)".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncatedOperator {
    /// `Lap_(4) f - Lap f`
    Laplacian,
    /// `D1_(4),x f - f_x`
    FirstDerivative,
}

/// Truncation error of a long-stencil operator applied to sampled `func`.
pub fn truncation_error(
    grid: GridSpec,
    func: TestFunction,
    op: TruncatedOperator,
) -> Result<Field> {
    let (l, dim) = (grid.length(), grid.dim());
    let f = Field::from_fn(grid, |x, y| func.value(l, dim, x, y));
    let (approx, exact) = match op {
        TruncatedOperator::Laplacian => (
            laplace_long(&f)?,
            Field::from_fn(grid, |x, y| func.laplacian(l, dim, x, y)),
        ),
        TruncatedOperator::FirstDerivative => (
            d1_long(&f, Axis::X)?,
            Field::from_fn(grid, |x, y| func.dx(l, dim, x, y)),
        ),
    };
    approx.zip_map(&exact, |a, b| a - b)
}

pub fn truncation_study(
    dim: Dim,
    func: TestFunction,
    op: TruncatedOperator,
    length: f64,
    m_list: &[usize],
) -> Result<RefinementReport> {
    if m_list.len() < 2 {
        return Err(Error::InsufficientData("truncation study needs at least two grids".into()));
    }
    let mut report = RefinementReport::new(
        format!("truncation {op:?} {}", func.label()),
        vec![
            ("dim".into(), dim.count().to_string()),
            ("L".into(), length.to_string()),
        ],
    );
    for &m in m_list {
        let grid = GridSpec::new(length, m, dim)?;
        let tau = truncation_error(grid, func, op)?;
        report.push(m, grid.spacing(), tau.norm_l2(), tau.norm_linf());
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolBoundRow {
    pub m: usize,
    /// `max_k |lambda_long[k] + (2 k pi / L)^2| / (h^4 (2 k pi / L)^6)`
    pub ratio: f64,
    /// `min_k (lambda_long[k] + (2 k pi / L)^2) * h^2`, should be non-negative.
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBoundReport {
    pub length: f64,
    pub rows: Vec<SymbolBoundRow>,
}

impl SymbolBoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// `max_m R(m) <= 2 R(m_finest)`.
    pub fn bounded(&self) -> bool {
        self.rows
            .last()
            .is_some_and(|last| self.max_ratio() <= 2.0 * last.ratio)
    }

    pub fn all_nonnegative(&self) -> bool {
        self.rows.iter().all(|r| r.min_gap >= 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# symbol bound, L = {}\nm,ratio,min_gap\n", self.length);
        for r in &self.rows {
            writeln!(s, "{},{:.16e},{:.16e}", r.m, r.ratio, r.min_gap).unwrap();
        }
        s
    }
}

pub fn symbol_bound_study(length: f64, m_list: &[usize]) -> Result<SymbolBoundReport> {
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        if m < 8 {
            return Err(Error::InvalidParameter(format!("symbol study needs m >= 8, got {m}")));
        }
        let grid = GridSpec::line(length, m)?;
        let h = grid.spacing();
        let mut ratio: f64 = 0.0;
        let mut min_gap = f64::INFINITY;
        for k in 1..=m / 2 {
            let w = 2.0 * PI * k as f64 / length;
            let gap = lambda_long_symbol(&grid, k as isize) + w * w;
            ratio = ratio.max(gap.abs() / (h.powi(4) * w.powi(6)));
            min_gap = min_gap.min(gap * h * h);
        }
        rows.push(SymbolBoundRow { m, ratio, min_gap });
    }
    Ok(SymbolBoundReport { length, rows })
}

/// Slack statistics of the norm inequalities over random fields.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub m: usize,
    pub trials: usize,
    /// Violations of `||f||^2 <= ||f||_{-1} ||grad_(4) f||`.
    pub interpolation_violations: usize,
    /// Smallest relative slack `(rhs - lhs) / rhs` seen.
    pub interpolation_min_slack: f64,
    /// Violations of `||Lap_h f|| <= ||Lap_(4) f||`.
    pub laplacian_violations: usize,
    pub laplacian_min_slack: f64,
    /// `max ||f||_6 / (||f||_2 + ||grad_h f||_2)`.
    pub embedding_ratio_max: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.interpolation_violations == 0 && self.laplacian_violations == 0
    }

    pub fn csv_header() -> &'static str {
        "m,trials,interp_violations,interp_min_slack,lap_violations,lap_min_slack,embedding_ratio_max\n"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.16e},{},{:.16e},{:.16e}\n",
            self.m,
            self.trials,
            self.interpolation_violations,
            self.interpolation_min_slack,
            self.laplacian_violations,
            self.laplacian_min_slack,
            self.embedding_ratio_max
        )
    }
}

/// Relative slack threshold below which an inequality counts as violated.
pub const INEQUALITY_SLACK: f64 = -1e-12;

pub fn inequality_study(grid: GridSpec, n_trials: usize, seed: u64) -> Result<InequalityReport> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("inequality study needs at least one trial".into()));
    }
    let plan = SpectralPlan::new(grid)?;
    let mut rng = seeded(seed);
    let max_mode = grid.points() / 4;
    let mut report = InequalityReport {
        m: grid.points(),
        trials: n_trials,
        interpolation_violations: 0,
        interpolation_min_slack: f64::INFINITY,
        laplacian_violations: 0,
        laplacian_min_slack: f64::INFINITY,
        embedding_ratio_max: 0.0,
    };
    for _ in 0..n_trials {
        let f = random_trig_field(&plan, max_mode, true, &mut rng)?;
        let lhs = f.norm_l2().powi(2);
        let rhs = plan.hminus1_norm(&f)? * grad_norm_sq_long(&f)?.sqrt();
        let slack = if rhs > 0.0 { (rhs - lhs) / rhs } else { 0.0 };
        report.interpolation_min_slack = report.interpolation_min_slack.min(slack);
        if slack < INEQUALITY_SLACK {
            report.interpolation_violations += 1;
        }

        let g = random_trig_field(&plan, max_mode, false, &mut rng)?;
        let (a, b) = (laplace_std(&g)?.norm_l2(), laplace_long(&g)?.norm_l2());
        let slack = if b > 0.0 { (b - a) / b } else { 0.0 };
        report.laplacian_min_slack = report.laplacian_min_slack.min(slack);
        if slack < INEQUALITY_SLACK {
            report.laplacian_violations += 1;
        }

        let denom = g.norm_l2() + grad_norm_sq_std(&g)?.sqrt();
        if denom > 0.0 {
            report.embedding_ratio_max = report.embedding_ratio_max.max(g.norm_lp(6.0) / denom);
        }
    }
    Ok(report)
}

/// Manufactured-solution convergence settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub length: f64,
    pub eps: f64,
    pub a: f64,
    pub t_final: f64,
    /// `dt = dt_factor * h^2`
    pub dt_factor: f64,
    pub m_list: Vec<usize>,
    pub solver: PsdConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            length: 3.2,
            eps: 0.1,
            a: A_STABLE,
            t_final: 0.32,
            dt_factor: 1.0,
            m_list: vec![16, 32, 64, 128],
            solver: PsdConfig::default(),
        }
    }
}

/// Solver and invariant summary of one manufactured run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub m: usize,
    pub dt: f64,
    pub steps: usize,
    pub max_iterations: usize,
    pub total_iterations: usize,
    /// Largest tail contraction ratio over all solves.
    pub worst_tail_ratio: f64,
    /// Largest relative increase of the objective across PSD iterations.
    pub worst_objective_increase: f64,
    /// Largest `|mean(phi^k) - beta0| / (1 + |beta0|)`.
    pub mass_drift: f64,
}

impl LevelSummary {
    fn new(m: usize, dt: f64, steps: usize) -> Self {
        Self {
            m,
            dt,
            steps,
            max_iterations: 0,
            total_iterations: 0,
            worst_tail_ratio: 0.0,
            worst_objective_increase: f64::NEG_INFINITY,
            mass_drift: 0.0,
        }
    }

    pub fn absorb(&mut self, stats: &SolveStats) {
        self.max_iterations = self.max_iterations.max(stats.iterations);
        self.total_iterations += stats.iterations;
        if let Some(r) = stats.tail_ratio() {
            self.worst_tail_ratio = self.worst_tail_ratio.max(r);
        }
        self.worst_objective_increase = self
            .worst_objective_increase
            .max(stats.worst_objective_increase());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub report: RefinementReport,
    pub levels: Vec<LevelSummary>,
}

/// Runs the manufactured problem to `t_final` on `m` points; returns the final
/// error field against the exact solution and the solver summary.
pub fn manufactured_run(cfg: &ConvergenceConfig, m: usize) -> Result<(Field, LevelSummary)> {
    let grid = GridSpec::square(cfg.length, m)?;
    let plan = SpectralPlan::new(grid)?;
    let exact = ManufacturedSolution::new(cfg.eps, cfg.length);
    let h = grid.spacing();
    let steps = (cfg.t_final / (cfg.dt_factor * h * h)).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParameter("final time shorter than one step".into()));
    }
    let dt = cfg.t_final / steps as f64;
    let params = SchemeParams::new(cfg.eps, cfg.a, dt)?;
    let mut state = scheme::ghost_init(exact.exact_field(grid, 0.0), &params, Some(&exact))?;
    let mut summary = LevelSummary::new(m, dt, steps);
    for k in 0..steps {
        let (mut next, diag) = scheme::step(&state, &params, &plan, &cfg.solver, Some(&exact))?;
        next.t = (k + 1) as f64 * dt;
        summary.absorb(&diag.solve);
        let drift = (diag.mass - state.beta0).abs() / (1.0 + state.beta0.abs());
        summary.mass_drift = summary.mass_drift.max(drift);
        state = next;
    }
    let err = state
        .phi_curr
        .zip_map(&exact.exact_field(grid, state.t), |a, b| a - b)?;
    Ok((err, summary))
}

/// Table-style convergence study. Levels run on separate threads; rows are
/// assembled in grid order.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceOutcome> {
    if cfg.m_list.len() < 2 {
        return Err(Error::InsufficientData("convergence study needs at least two grids".into()));
    }
    let results: Vec<Result<(Field, LevelSummary)>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .m_list
            .iter()
            .map(|&m| s.spawn(move || manufactured_run(cfg, m)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence level panicked"))
            .collect()
    });
    let mut report = RefinementReport::new(
        "manufactured convergence",
        vec![
            ("L".into(), cfg.length.to_string()),
            ("eps".into(), cfg.eps.to_string()),
            ("A".into(), cfg.a.to_string()),
            ("T".into(), cfg.t_final.to_string()),
            ("dt".into(), format!("{} * h^2", cfg.dt_factor)),
        ],
    );
    let mut levels = Vec::new();
    for res in results {
        let (err, summary) = res?;
        report.push(summary.m, err.grid().spacing(), err.norm_l2(), err.norm_linf());
        levels.push(summary);
    }
    Ok(ConvergenceOutcome { report, levels })
}

/// `||phi^{-1} - phi_e(-dt)||_2` for each `dt`, at fixed grid `m`.
pub fn ghost_step_errors(
    length: f64,
    eps: f64,
    m: usize,
    dts: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let grid = GridSpec::square(length, m)?;
    let exact = ManufacturedSolution::new(eps, length);
    dts.iter()
        .map(|&dt| {
            let params = SchemeParams::new(eps, A_STABLE, dt)?;
            let state = scheme::ghost_init(exact.exact_field(grid, 0.0), &params, Some(&exact))?;
            let err = state
                .phi_prev
                .zip_map(&exact.exact_field(grid, -dt), |a, b| a - b)?;
            Ok((dt, err.norm_l2()))
        })
        .collect()
}
