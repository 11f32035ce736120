use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn massim(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_massim"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("MASSIM_THREADS", t),
        None => cmd.env_remove("MASSIM_THREADS"),
    };
    cmd.output().expect("failed to launch massim")
}

const CONVERGENCE: &str = "\
# small convergence run
experiment = convergence
k_values = 10, 20
n_values = 1, 2
xi_values = 1, 0.8
n_fading_realizations = 8
seed = 11
";

#[test]
fn convergence_csv_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("conv.cfg"), CONVERGENCE).unwrap();
    let out = massim(dir.path(), &["conv.cfg", "--output", "res/conv.csv"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1, "{stdout}");

    let csv = fs::read_to_string(dir.path().join("res/conv.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("K,N,xi,mean_sinr_db,std_sinr_db,limit_db"));
    assert_eq!(lines.count(), 8);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/conv.csv.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["experiment"], "convergence");
    assert!(meta["version"].as_str().unwrap().starts_with('v'));
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(meta["config"]["n_fading_realizations"], 8);
}

#[test]
fn same_seed_gives_identical_files_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = error_cdf\nk_values = 10\nn_values = 1, 5\nn_drops = 12\ncorrelated = true\nxi_values = 0.8\n";
    fs::write(dir.path().join("e.cfg"), cfg).unwrap();
    let a = massim(dir.path(), &["e.cfg", "--seed", "5", "--output", "a.csv"], Some("1"));
    let b = massim(dir.path(), &["e.cfg", "--seed", "5", "--output", "b.csv"], Some("3"));
    let c = massim(dir.path(), &["e.cfg", "--seed", "5", "--output", "c.csv"], Some("0"));
    for o in [&a, &b, &c] {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    let d = massim(dir.path(), &["e.cfg", "--seed", "6", "--output", "d.csv"], None);
    assert!(d.status.success());
    assert_ne!(read("a.csv"), read("d.csv"));
}

#[test]
fn antenna_constraint_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "experiment = sinr_cdf\nk_values = 25\nn_values = 2\n",
    )
    .unwrap();
    let out = massim(dir.path(), &["bad.cfg"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("divisible by 2N"), "{err}");
    assert!(!dir.path().join("sinr_cdf.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(massim(dir.path(), &[], None).status.code(), Some(2));
    assert_eq!(massim(dir.path(), &["missing.cfg"], None).status.code(), Some(2));
    assert_eq!(massim(dir.path(), &["--bogus-flag"], None).status.code(), Some(2));
    assert_eq!(
        massim(dir.path(), &["--experiment", "lambda_table", "--set", "nope=1"], None)
            .status
            .code(),
        Some(2)
    );
    let out = massim(dir.path(), &["--experiment", "lambda_table"], Some("x"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_correlation_base_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = massim(
        dir.path(),
        &["--experiment", "lambda_table", "--set", "corr_a=0.5"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corr_a"));
}

#[test]
fn lambda_table_via_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = massim(
        dir.path(),
        &["--experiment", "lambda_table", "--set", "lambda_table_m=40", "--set", "n_values=1,2"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("lambda_table.csv")).unwrap();
    assert!(csv.starts_with("N,r_pol,m_per_cluster,lambda_bar_sq,reference,rel_deviation\n"));
    assert_eq!(csv.lines().count(), 11);
}
