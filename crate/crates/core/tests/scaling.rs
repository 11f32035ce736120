//! Monte Carlo scaling checks on the experiment runners.

use massim::harness::{
    run_convergence, run_shadow_sweep, run_sinr_cdf, CdfMode, ExperimentConfig, ExperimentKind,
};

/// The std across fading realizations of the user-mean SINR averages K
/// per-user terms, each fluctuating like 1/sqrt(M), so it falls like 1/K.
#[test]
fn convergence_std_falls_with_k() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::Convergence);
    c.k_values = vec![20, 80];
    c.n_values = vec![1];
    c.xi_values = vec![1.0];
    c.n_fading_realizations = 150;
    let r = run_convergence(&c).unwrap();
    let ratio = r[0].std_sinr_db / r[1].std_sinr_db;
    println!("std K=20 {:.4} dB, K=80 {:.4} dB, ratio {ratio:.3}", r[0].std_sinr_db, r[1].std_sinr_db);
    assert!((ratio / 4.0 - 1.0).abs() <= 0.3, "ratio {ratio}");
    // and the mean approaches its limit from above
    let gap20 = r[0].mean_sinr_db - r[0].limit_db;
    let gap80 = r[1].mean_sinr_db - r[1].limit_db;
    assert!(gap80 < gap20 && gap80 > 0.0, "{gap20} {gap80}");
}

#[test]
fn larger_shadowing_spreads_the_cdf() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::ShadowSweep);
    c.k_values = vec![20];
    c.n_values = vec![5];
    c.shadow_sigma_values = vec![0.0, 6.0, 10.0];
    c.n_drops = 200;
    let s = run_shadow_sweep(&c).unwrap();
    let spread = |i: usize| s[i].quantile(0.9) - s[i].quantile(0.1);
    println!("spreads: {:.2} {:.2} {:.2}", spread(0), spread(1), spread(2));
    assert!(spread(2) > spread(1));
    // upper tail rises with the shadowing spread
    assert!(s[2].quantile(0.9) > s[1].quantile(0.9));
    assert!(s.iter().all(|x| x.values.iter().all(|v| v.is_finite())));
}

#[test]
fn single_user_mode_tags_one_user() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::SingleUserCdf);
    c.k_values = vec![10];
    c.n_values = vec![1, 5];
    c.xi_values = vec![1.0];
    c.n_drops = 100;
    let single = run_sinr_cdf(&c, CdfMode::SingleUser).unwrap();
    let mean = run_sinr_cdf(&c, CdfMode::MeanUser).unwrap();
    assert_eq!(single.len(), 2);
    // one user's SINR spreads far more across drops than the user average
    for (s, m) in single.iter().zip(&mean) {
        let w = |x: &massim::harness::CdfSeries| x.quantile(0.9) - x.quantile(0.1);
        assert!(w(s) > w(m), "{} vs {}", w(s), w(m));
    }
}
