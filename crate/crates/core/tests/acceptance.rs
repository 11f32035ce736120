//! Acceptance criteria. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use massim::channel::{quadratic_form_limit_check, sample_channel, user_gain_spectrum, ChannelPair};
use massim::correlation::{build_geometry, DistanceUnit, TransmitCorrelation};
use massim::harness::{
    run, run_convergence, run_error_cdf, run_lambda_table, run_sinr_cdf, CdfMode, CdfSeries,
    ExperimentConfig, ExperimentKind, LinkModel,
};
use massim::linkgain::{beta_averages, GainModel, LinkGains};
use massim::mf::{
    expected_powers, limit_sinr, limit_sinr_special, simulate_downlink, LimitInputs, SinrParams,
    SpecialCase,
};
use massim::rng::substream;
use massim::units::from_db;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "{} criterion {id} ({name}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn median_of(series: &[CdfSeries], n: usize, k: usize) -> f64 {
    series
        .iter()
        .find(|s| s.label.n == n && s.label.k == k)
        .unwrap_or_else(|| panic!("missing series N={n} K={k}"))
        .median()
}

#[test]
fn criterion_1_equal_power_limit() {
    let gains = LinkGains::new(DMatrix::from_element(1, 10, 1.0), GainModel::Statistical).unwrap();
    let inputs = LimitInputs {
        rho_f: 10.0,
        alpha: 10.0,
        xi: 1.0,
        lambda_bar_sq: 1.0,
        averages: beta_averages(&gains),
        noise_power: 1.0,
    };
    let general = limit_sinr(&inputs, 0).unwrap();
    let special =
        limit_sinr_special(SpecialCase::NoCorrelationEqualPowerPerfectCsi, &inputs, 0).unwrap();
    let target = 100.0 / 11.0;
    let (e1, e2) = (rel(general, target), rel(special, target));
    report(
        1,
        "equal-power limit 100/11",
        e1 <= 1e-12 && e2 <= 1e-12,
        &format!("general {general:.15}, special {special:.15}, rel err {e1:.1e}/{e2:.1e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_2_closed_form_matches_monte_carlo() {
    const DRAWS: usize = 1_000_000;
    const TOL: f64 = 0.01;
    let xis = [0.0, 0.5, 0.8, 1.0];
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for inst in 0..20u64 {
        let mut rng = substream(2024, &[inst]);
        let clusters = 1 + (inst as usize % 2);
        // M = clusters * dim <= 16 with dim even (x-pol pairs)
        let dim = 2 * rng.random_range(1..=8 / clusters);
        let users = rng.random_range(1..=4usize);
        let xi = xis[inst as usize % 4];
        let correlated = inst % 8 < 4;
        let corr = if correlated {
            let geom = build_geometry(dim, 0.2, 2.6e9).unwrap();
            TransmitCorrelation::build(&geom, 4.0, 0.3, DistanceUnit::Wavelength).unwrap()
        } else {
            TransmitCorrelation::identity(dim)
        };
        let beta = DMatrix::from_fn(clusters, users, |_, _| from_db(rng.random_range(-10.0..10.0)));
        let gains = LinkGains::new(beta, GainModel::Statistical).unwrap();
        let params = SinrParams {
            rho_f: from_db(rng.random_range(0.0..15.0)),
            xi,
            noise_power: 1.0,
        };
        let pair = ChannelPair::sample(&mut rng, &gains, &corr, xi).unwrap();
        let cf = expected_powers(&pair.g_hat, &gains, &corr, &params).unwrap();
        let mc = simulate_downlink(&mut rng, &pair.g_hat, &gains, &corr, &params, DRAWS).unwrap();
        let mut inst_worst: f64 = 0.0;
        for i in 0..users {
            inst_worst = inst_worst
                .max(rel(mc.signal[i], cf.signal[i]))
                .max(rel(mc.interference_noise[i], cf.interference_noise[i]));
        }
        worst = worst.max(inst_worst);
        lines.push(format!(
            "  instance {inst}: M={} K={users} xi={xi} correlated={correlated} max rel dev {inst_worst:.2e}",
            clusters * dim
        ));
    }
    for l in &lines {
        println!("{l}");
    }
    report(
        2,
        "closed-form powers vs Monte Carlo",
        worst <= TOL,
        &format!("20 instances, {DRAWS} draws, worst rel deviation {worst:.3e} (tol {TOL})"),
    );
}

#[test]
fn criterion_3_convergence_to_limit() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::Convergence);
    c.system.model = LinkModel::Limiting;
    c.system.correlated = false;
    c.system.beta_max_db = 15.0;
    c.system.beta_min_db = -15.0;
    c.k_values = vec![100];
    c.n_values = vec![1, 2];
    c.xi_values = vec![1.0, 0.8];
    c.validate().unwrap();
    let records = run_convergence(&c).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for r in &records {
        let gap = (r.mean_sinr_db - r.limit_db).abs();
        pass &= gap <= 1.0;
        detail.push(format!("N={} xi={}: |sim-limit| {gap:.3} dB", r.n, r.xi));
    }
    for n in [1, 2] {
        let l = |xi: f64| {
            records
                .iter()
                .find(|r| r.n == n && r.xi == xi)
                .unwrap()
                .limit_db
        };
        let drop = l(1.0) - l(0.8);
        pass &= (drop - 1.94).abs() <= 0.05;
        detail.push(format!("N={n}: xi=0.8 limit {drop:.4} dB below xi=1"));
    }
    report(
        3,
        "convergence at K=100 (tol 1 dB; gap 1.94 +- 0.05 dB)",
        pass,
        &detail.join(", "),
    );
}

#[test]
fn criterion_4_xi_squared_scaling() {
    let mut worst: f64 = 0.0;
    for set in 0..100u64 {
        let mut rng = substream(4, &[set]);
        let n = rng.random_range(1..=4usize);
        let k = rng.random_range(1..=50usize);
        let beta = DMatrix::from_fn(n, k, |_, _| from_db(rng.random_range(-30.0..20.0)));
        let gains = LinkGains::new(beta, GainModel::Statistical).unwrap();
        let xi: f64 = rng.random_range(0.0..1.0);
        let mut inputs = LimitInputs {
            rho_f: from_db(rng.random_range(-10.0..30.0)),
            alpha: rng.random_range(0.5..50.0),
            xi: 1.0,
            lambda_bar_sq: rng.random_range(1.0..40.0),
            averages: beta_averages(&gains),
            noise_power: rng.random_range(0.1..10.0),
        };
        let i = rng.random_range(0..k);
        let full = limit_sinr(&inputs, i).unwrap();
        inputs.xi = xi;
        let partial = limit_sinr(&inputs, i).unwrap();
        worst = worst.max(rel(partial / full, xi * xi));
    }
    report(
        4,
        "limit scales with xi^2",
        worst <= 1e-12,
        &format!("100 parameter sets, worst rel deviation {worst:.2e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_5_lambda_table() {
    let c = ExperimentConfig::defaults(ExperimentKind::LambdaTable);
    assert_eq!(c.system.distance_unit().unwrap(), DistanceUnit::Wavelength);
    let table = run_lambda_table(&c).unwrap();
    let at = |n: usize, r: f64| {
        table
            .iter()
            .find(|x| x.n == n && (x.r_pol - r).abs() < 1e-12)
            .unwrap()
            .lambda_bar_sq
    };
    let v1 = at(1, 0.1);
    let v5 = at(5, 0.5);
    let ok1 = rel(v1, 28.71) <= 0.10;
    let ok5 = rel(v5, 1.75) <= 0.10;
    let ns = [1, 2, 5, 10];
    let rs = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut mono = true;
    for &n in &ns {
        for w in rs.windows(2) {
            mono &= at(n, w[1]) > at(n, w[0]);
        }
    }
    for &r in &rs {
        for w in ns.windows(2) {
            mono &= at(w[1], r) < at(w[0], r);
        }
    }
    for row in ns {
        let vals: Vec<String> = rs.iter().map(|&r| format!("{:.3}", at(row, r))).collect();
        println!("  N={row}: {}", vals.join(" "));
    }
    report(
        5,
        "lambda table (tol 10%, strict monotonicity)",
        ok1 && ok5 && mono,
        &format!(
            "(N=1, r=0.1) = {v1:.3} vs 28.71 [{}], (N=5, r=0.5) = {v5:.3} vs 1.75 [{}], monotone [{}]",
            if ok1 { "ok" } else { "off" },
            if ok5 { "ok" } else { "off" },
            if mono { "ok" } else { "off" }
        ),
    );
}

fn reduced_sinr_cdf(correlated: bool) -> Vec<CdfSeries> {
    let mut c = ExperimentConfig::defaults(ExperimentKind::SinrCdf);
    c.k_values = vec![40];
    c.n_values = vec![1, 5];
    c.xi_values = vec![0.8];
    c.n_drops = 200;
    c.system.correlated = correlated;
    c.seed = 6;
    c.validate().unwrap();
    run_sinr_cdf(&c, CdfMode::MeanUser).unwrap()
}

#[test]
fn criterion_6_correlated_vs_uncorrelated_gap() {
    let corr = reduced_sinr_cdf(true);
    let uncorr = reduced_sinr_cdf(false);
    let corr_gain = median_of(&corr, 5, 40) - median_of(&corr, 1, 40);
    let uncorr_loss = median_of(&uncorr, 1, 40) - median_of(&uncorr, 5, 40);
    let ok_c = corr_gain >= 8.0;
    let ok_u = (0.5..=2.0).contains(&uncorr_loss);
    report(
        6,
        "N=5 vs N=1 median mean SINR, K=40, xi=0.8, 200 drops",
        ok_c && ok_u,
        &format!(
            "correlated N5-N1 = {corr_gain:.2} dB (need >= 8) [{}], uncorrelated N1-N5 = {uncorr_loss:.2} dB (need 0.5..2) [{}]",
            if ok_c { "ok" } else { "off" },
            if ok_u { "ok" } else { "off" }
        ),
    );
}

fn error_cdf(correlated: bool) -> Vec<CdfSeries> {
    let mut c = ExperimentConfig::defaults(ExperimentKind::ErrorCdf);
    c.k_values = vec![20, 60, 100];
    c.n_values = vec![1, 5];
    c.xi_values = vec![1.0];
    c.n_drops = 300;
    c.system.correlated = correlated;
    c.seed = 7;
    c.validate().unwrap();
    run_error_cdf(&c).unwrap()
}

#[test]
fn criterion_7_error_trend() {
    let corr = error_cdf(true);
    let uncorr = error_cdf(false);
    let mut trend_ok = true;
    let mut cells = Vec::new();
    for (name, series) in [("corr", &corr), ("uncorr", &uncorr)] {
        for n in [1, 5] {
            let m: Vec<f64> = [20, 60, 100].iter().map(|&k| median_of(series, n, k)).collect();
            let dec = m.windows(2).all(|w| w[1] < w[0]);
            trend_ok &= dec;
            cells.push(format!(
                "{name} N={n}: {:.1} -> {:.1} -> {:.1}{}",
                m[0],
                m[1],
                m[2],
                if dec { "" } else { " (not decreasing)" }
            ));
        }
    }
    let gap = median_of(&corr, 1, 60) - median_of(&uncorr, 1, 60);
    let gap_ok = gap >= 20.0;
    report(
        7,
        "median Error % decreasing in K; corr-uncorr N=1 gap at K=60 >= 20 points",
        trend_ok && gap_ok,
        &format!("{}; gap {gap:.1} points", cells.join(", ")),
    );
}

#[test]
fn criterion_8_structural_invariants() {
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // trace identity and PSD square root of the correlated covariance
    let geom = build_geometry(64, 1.0, 2.6e9).unwrap();
    let corr = TransmitCorrelation::build(&geom, 4.0, 0.1, DistanceUnit::Wavelength).unwrap();
    let r = corr.matrix();
    let trace_ok = (r.trace() - 64.0).abs() < 1e-9
        && (corr.eigenvalues().sum() - 64.0).abs() < 1e-9
        && (corr.lambda_bar_sq() - r.norm_squared() / 64.0).abs() < 1e-9;
    checks.push(("trace identities", trace_ok));
    let s = corr.sqrt_matrix();
    let psd_ok = (s * s - r).amax() < 1e-9
        && (s - s.transpose()).amax() < 1e-12
        && corr.eigenvalues().iter().all(|&l| l >= 0.0);
    checks.push(("PSD square root", psd_ok));

    let gains = LinkGains::new(
        DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 2.0, 0.25, 3.0, 1.5]),
        GainModel::Statistical,
    )
    .unwrap();
    let spec_ok = (0..3).all(|i| {
        let sp = user_gain_spectrum(i, &gains, &corr).unwrap();
        let want = 64.0 * gains.beta.column(i).sum();
        (sp.trace() - want).abs() < 1e-9 * want
    });
    checks.push(("user covariance trace", spec_ok));

    // sample covariance of the channel converges to beta * R
    let small_geom = build_geometry(8, 0.3, 2.6e9).unwrap();
    let small = TransmitCorrelation::build(&small_geom, 4.0, 0.3, DistanceUnit::Wavelength).unwrap();
    let one = LinkGains::new(DMatrix::from_element(1, 1, 2.0), GainModel::Statistical).unwrap();
    let mut rng = substream(8, &[0]);
    let draws = 40_000;
    let mut cov = DMatrix::<Complex64>::zeros(8, 8);
    for _ in 0..draws {
        let g = sample_channel(&mut rng, &one, &small).unwrap();
        cov += &g * g.adjoint();
    }
    cov /= Complex64::new(draws as f64, 0.0);
    let target = small.matrix() * 2.0;
    let cov_err = (0..8)
        .flat_map(|a| (0..8).map(move |b| (a, b)))
        .map(|(a, b)| (cov[(a, b)] - Complex64::new(target[(a, b)], 0.0)).norm())
        .fold(0.0, f64::max);
    checks.push(("covariance convergence", cov_err < 0.06));

    // determinism under a fixed seed
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::ErrorCdf);
    cfg.k_values = vec![10];
    cfg.n_values = vec![1, 5];
    cfg.n_drops = 20;
    cfg.system.correlated = true;
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    checks.push(("determinism", a.to_csv() == b.to_csv()));

    // CDF validity
    let cdf_ok = match &a {
        massim::harness::ExperimentOutput::Cdf(series) => series.iter().all(|s| {
            s.values.windows(2).all(|w| w[0] <= w[1])
                && s.probabilities.windows(2).all(|w| w[0] <= w[1])
                && s.probabilities.iter().all(|p| (0.0..=1.0).contains(p))
                && *s.probabilities.last().unwrap() == 1.0
        }),
        _ => false,
    };
    checks.push(("CDF validity", cdf_ok));

    // quadratic-form concentration: std halves per 4x M
    let samples = 4000;
    let stds: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&m| {
            let g = LinkGains::new(
                DMatrix::from_row_slice(2, 1, &[1.0, 3.0]),
                GainModel::Statistical,
            )
            .unwrap();
            let id = TransmitCorrelation::identity(m / 2);
            let sp = user_gain_spectrum(0, &g, &id).unwrap();
            let mut rng = substream(88, &[m as u64]);
            let v: Vec<f64> = (0..samples)
                .map(|_| quadratic_form_limit_check(&mut rng, &sp))
                .collect();
            let mean = v.iter().sum::<f64>() / samples as f64;
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64).sqrt()
        })
        .collect();
    let ratios = [stds[0] / stds[1], stds[1] / stds[2]];
    let halving_ok = ratios.iter().all(|r| (r / 2.0 - 1.0).abs() <= 0.2);
    checks.push(("quadratic-form std halving", halving_ok));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, ok)| format!("{n} [{}]", if *ok { "ok" } else { "off" }))
        .collect();
    report(
        8,
        "structural invariants",
        pass,
        &format!(
            "{}; std ratios {:.3}, {:.3} (target 2 +- 20%)",
            detail.join(", "),
            ratios[0],
            ratios[1]
        ),
    );
}
