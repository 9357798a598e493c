//! Shared fixtures for unit tests.

use crate::grid::{Field, GridSpec};
use crate::random::{random_trig_field, seeded};
use crate::scheme::{SchemeParams, StepState};
use crate::spectral::SpectralPlan;

/// Smooth random two-level state with a common mean.
pub fn random_state(m: usize, length: f64, mean: f64, seed: u64) -> (SpectralPlan, StepState) {
    let grid = GridSpec::square(length, m).unwrap();
    let plan = SpectralPlan::new(grid).unwrap();
    let mut rng = seeded(seed);
    let mut prev = random_trig_field(&plan, m / 4, true, &mut rng).unwrap();
    let mut curr = prev.clone();
    curr.axpy(0.05, &random_trig_field(&plan, m / 4, true, &mut rng).unwrap())
        .unwrap();
    let s = 0.4 / curr.norm_linf();
    prev.scale(s);
    curr.scale(s);
    prev.add_constant(mean);
    curr.add_constant(mean);
    let state = StepState {
        phi_prev: prev,
        phi_curr: curr,
        t: 0.0,
        beta0: mean,
        step_index: 1,
    };
    (plan, state)
}

pub fn random_on_hyperplane(plan: &SpectralPlan, mean: f64, amp: f64, seed: u64) -> Field {
    let m = plan.grid().points();
    let mut f = random_trig_field(plan, m / 4, true, &mut seeded(seed)).unwrap();
    f.scale(amp / f.norm_linf());
    f.add_constant(mean);
    f
}

pub fn params() -> SchemeParams {
    SchemeParams::new(0.1, 1.0 / 16.0, 0.01).unwrap()
}
