use cahn_hilliard::verification::{convergence_study, ghost_step_errors, ConvergenceConfig};

#[test]
fn manufactured_rates_are_fourth_order() {
    // the coarser pairs are pre-asymptotic: unstable modes near |k| = 1/(sqrt(2) eps)
    // amplify the truncation error of Lap(phi^3)
    let cfg = ConvergenceConfig {
        m_list: vec![32, 64, 128],
        ..ConvergenceConfig::default()
    };
    let out = convergence_study(&cfg).unwrap();
    println!("{}", out.report.to_csv());
    let (l2, linf) = *out.report.finest_rates(1).last().unwrap();
    assert!((3.8..=4.1).contains(&l2), "l2 rate {l2}");
    assert!((3.8..=4.1).contains(&linf), "linf rate {linf}");
    for lvl in &out.levels {
        assert!(lvl.max_iterations <= 200);
        assert!(lvl.mass_drift <= 1e-11, "{lvl:?}");
        assert!(lvl.worst_tail_ratio < 1.0, "{lvl:?}");
    }
}

#[test]
fn ghost_step_is_second_order_in_time() {
    let dts = [0.02, 0.01, 0.005, 0.0025];
    let errs = ghost_step_errors(3.2, 0.1, 64, &dts).unwrap();
    for w in errs.windows(2) {
        let order = (w[0].1 / w[1].1).log2();
        assert!(order >= 1.9, "{errs:?}");
    }
}
