//! Experiment configuration.
//!
//! Config files are flat `key = value` text. Blank lines and lines starting
//! with `#` are ignored; list values are comma separated. Every experiment
//! kind has its own defaults, which the file and then the command line
//! override.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::correlation::DistanceUnit;
use crate::error::{Error, Result};
use crate::linkgain::Profile;
use crate::units::from_db;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    ErrorCdf,
    ShadowSweep,
    SinrCdf,
    SingleUserCdf,
    LambdaTable,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Convergence,
        ExperimentKind::ErrorCdf,
        ExperimentKind::ShadowSweep,
        ExperimentKind::SinrCdf,
        ExperimentKind::SingleUserCdf,
        ExperimentKind::LambdaTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::ErrorCdf => "error_cdf",
            ExperimentKind::ShadowSweep => "shadow_sweep",
            ExperimentKind::SinrCdf => "sinr_cdf",
            ExperimentKind::SingleUserCdf => "single_user_cdf",
            ExperimentKind::LambdaTable => "lambda_table",
        }
    }

    /// Stable tag mixed into random substreams.
    pub(crate) fn tag(self) -> u64 {
        ExperimentKind::ALL.iter().position(|k| *k == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown experiment '{s}' (expected one of convergence, error_cdf, \
                     shadow_sweep, sinr_cdf, single_user_cdf, lambda_table)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModel {
    Statistical,
    Limiting,
}

impl FromStr for LinkModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statistical" => Ok(LinkModel::Statistical),
            "limiting" => Ok(LinkModel::Limiting),
            other => Err(Error::config(format!(
                "model must be 'statistical' or 'limiting', got '{other}'"
            ))),
        }
    }
}

/// How the per-drop "virtual limit" is obtained in the error-CDF experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VirtualLimit {
    /// Evaluate the limit formula with the drop's own gain averages.
    Analytic,
    /// Simulate a large system (`virtual_limit_antennas` antennas) whose
    /// users cycle through the drop's gain columns.
    Simulated,
}

impl FromStr for VirtualLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(VirtualLimit::Analytic),
            "simulated" => Ok(VirtualLimit::Simulated),
            other => Err(Error::config(format!(
                "virtual_limit must be 'analytic' or 'simulated', got '{other}'"
            ))),
        }
    }
}

/// Scalar system parameters shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub alpha: f64,
    pub rho_f_db: f64,
    pub noise_power: f64,
    pub model: LinkModel,
    pub profile: u32,
    pub beta_max_db: f64,
    pub beta_min_db: f64,
    pub shadow_sigma_db: f64,
    pub pathloss_exponent: f64,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub region_radius_m: f64,
    pub correlated: bool,
    pub corr_a: f64,
    pub r_pol: f64,
    pub side_length_m: f64,
    pub carrier_freq_hz: f64,
    pub distance_unit: String,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            alpha: 10.0,
            rho_f_db: 10.0,
            noise_power: 1.0,
            model: LinkModel::Statistical,
            profile: 1,
            beta_max_db: 15.0,
            beta_min_db: -15.0,
            shadow_sigma_db: 8.0,
            pathloss_exponent: 4.0,
            d_min_m: 50.0,
            d_max_m: 1000.0,
            region_radius_m: 1000.0,
            correlated: false,
            corr_a: 4.0,
            r_pol: 0.1,
            side_length_m: 1.0,
            carrier_freq_hz: 2.6e9,
            distance_unit: "wavelength".into(),
        }
    }
}

impl SystemConfig {
    pub fn rho_f(&self) -> f64 {
        from_db(self.rho_f_db)
    }

    pub fn beta_max(&self) -> f64 {
        from_db(self.beta_max_db)
    }

    pub fn beta_min(&self) -> f64 {
        from_db(self.beta_min_db)
    }

    pub fn profile(&self) -> Result<Profile> {
        Profile::from_index(self.profile)
    }

    pub fn distance_unit(&self) -> Result<DistanceUnit> {
        self.distance_unit.parse()
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub system: SystemConfig,
    pub k_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub xi_values: Vec<f64>,
    pub shadow_sigma_values: Vec<f64>,
    pub r_pol_values: Vec<f64>,
    pub n_drops: usize,
    /// Convergence: fading realizations per K. CDF experiments: realizations
    /// averaged per drop when `average_fading` is set.
    pub n_fading_realizations: usize,
    /// CDF experiments: average the expected SINR over
    /// `n_fading_realizations` channel draws per drop instead of using one.
    pub average_fading: bool,
    pub seed: u64,
    pub output_path: PathBuf,
    /// Total antenna count used for the Λ̄² table.
    pub lambda_table_m: usize,
    pub virtual_limit: VirtualLimit,
    pub virtual_limit_antennas: usize,
    /// Index of the tagged user in the single-user CDF.
    pub tagged_user: usize,
}

impl ExperimentConfig {
    /// Defaults for the given experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            system: SystemConfig::default(),
            k_values: vec![100],
            n_values: vec![1, 5],
            xi_values: vec![1.0],
            shadow_sigma_values: vec![8.0],
            r_pol_values: vec![0.1],
            n_drops: 500,
            n_fading_realizations: 50,
            average_fading: false,
            seed: 1,
            output_path: PathBuf::from(format!("{}.csv", kind.name())),
            lambda_table_m: 1000,
            virtual_limit: VirtualLimit::Analytic,
            virtual_limit_antennas: 1400,
            tagged_user: 0,
        };
        match kind {
            ExperimentKind::Convergence => {
                c.system.model = LinkModel::Limiting;
                c.k_values = vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100];
                c.n_values = vec![1, 2];
                c.xi_values = vec![1.0, 0.8];
                c.n_drops = 1;
                c.n_fading_realizations = 200;
            }
            ExperimentKind::ErrorCdf => {
                c.k_values = vec![20, 60, 100];
                c.n_drops = 300;
            }
            ExperimentKind::ShadowSweep => {
                c.k_values = vec![60];
                c.n_values = vec![5];
                c.shadow_sigma_values = vec![6.0, 8.0, 10.0];
            }
            ExperimentKind::SinrCdf => {
                c.xi_values = vec![1.0, 0.8];
            }
            ExperimentKind::SingleUserCdf => {
                c.n_values = vec![1, 2, 5];
                c.xi_values = vec![1.0, 0.8];
            }
            ExperimentKind::LambdaTable => {
                c.system.correlated = true;
                c.n_values = vec![1, 2, 5, 10];
                c.r_pol_values = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                c.n_drops = 1;
            }
        }
        c
    }

    /// Parses config text, using `kind_override` (if any) instead of the
    /// file's `experiment` key to select defaults.
    pub fn parse(text: &str, kind_override: Option<ExperimentKind>) -> Result<Self> {
        let entries = parse_entries(text)?;
        let kind = match (kind_override, entries.get("experiment")) {
            (Some(k), _) => k,
            (None, Some(v)) => v.parse()?,
            (None, None) => {
                return Err(Error::config(
                    "config does not name an experiment (set 'experiment = ...' or pass --experiment)",
                ))
            }
        };
        let mut config = ExperimentConfig::defaults(kind);
        for (key, value) in &entries {
            if key != "experiment" {
                config.set(key, value)?;
            }
        }
        Ok(config)
    }

    /// Sets a single key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.system;
        match key {
            "experiment" => self.experiment = value.parse()?,
            "alpha" => s.alpha = num(key, value)?,
            "rho_f_db" => s.rho_f_db = num(key, value)?,
            "noise_power" => s.noise_power = num(key, value)?,
            "model" => s.model = value.parse()?,
            "profile" => s.profile = num(key, value)?,
            "beta_max_db" => s.beta_max_db = num(key, value)?,
            "beta_min_db" => s.beta_min_db = num(key, value)?,
            "shadow_sigma_db" => s.shadow_sigma_db = num(key, value)?,
            "pathloss_exponent" => s.pathloss_exponent = num(key, value)?,
            "d_min_m" => s.d_min_m = num(key, value)?,
            "d_max_m" => s.d_max_m = num(key, value)?,
            "region_radius_m" => s.region_radius_m = num(key, value)?,
            "correlated" => s.correlated = boolean(key, value)?,
            "corr_a" => s.corr_a = num(key, value)?,
            "r_pol" => s.r_pol = num(key, value)?,
            "side_length_m" => s.side_length_m = num(key, value)?,
            "carrier_freq_hz" => s.carrier_freq_hz = num(key, value)?,
            "distance_unit" => {
                value.parse::<DistanceUnit>()?;
                s.distance_unit = value.to_string();
            }
            "k_values" => self.k_values = list(key, value)?,
            "n_values" => self.n_values = list(key, value)?,
            "xi_values" => self.xi_values = list(key, value)?,
            "shadow_sigma_values" => self.shadow_sigma_values = list(key, value)?,
            "r_pol_values" => self.r_pol_values = list(key, value)?,
            "n_drops" => self.n_drops = num(key, value)?,
            "n_fading_realizations" => self.n_fading_realizations = num(key, value)?,
            "average_fading" => self.average_fading = boolean(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output_path" => self.output_path = PathBuf::from(value),
            "lambda_table_m" => self.lambda_table_m = num(key, value)?,
            "virtual_limit" => self.virtual_limit = value.parse()?,
            "virtual_limit_antennas" => self.virtual_limit_antennas = num(key, value)?,
            "tagged_user" => self.tagged_user = num(key, value)?,
            other => return Err(Error::config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Total antenna count `M = α K` for `users`, if it is a whole number.
    pub fn antennas(&self, users: usize) -> Option<usize> {
        let m = self.system.alpha * users as f64;
        let r = m.round();
        ((m - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
    }

    /// Checks every constraint that can be verified before running.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if !(s.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", s.alpha)));
        }
        if !(s.noise_power > 0.0) {
            return Err(Error::config("noise_power must be positive"));
        }
        if !s.rho_f_db.is_finite() {
            return Err(Error::config("rho_f_db must be finite"));
        }
        if self.n_drops < 1 {
            return Err(Error::config("n_drops must be at least 1"));
        }
        if self.n_fading_realizations < 1 {
            return Err(Error::config("n_fading_realizations must be at least 1"));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::config("n_values must be a non-empty list of positive integers"));
        }
        s.distance_unit()?;
        if s.correlated || self.experiment == ExperimentKind::LambdaTable {
            if !(s.corr_a >= 1.0 && s.corr_a.is_finite()) {
                return Err(Error::config(format!(
                    "corr_a must be finite and at least 1, got {}",
                    s.corr_a
                )));
            }
            if !(s.side_length_m > 0.0 && s.carrier_freq_hz > 0.0) {
                return Err(Error::config("side_length_m and carrier_freq_hz must be positive"));
            }
            if !(0.0..1.0).contains(&s.r_pol) {
                return Err(Error::config(format!("r_pol must lie in [0, 1), got {}", s.r_pol)));
            }
            if self.r_pol_values.iter().any(|r| !(0.0..1.0).contains(r)) {
                return Err(Error::config("every r_pol value must lie in [0, 1)"));
            }
        }
        for xi in &self.xi_values {
            if !(0.0..=1.0).contains(xi) {
                return Err(Error::config(format!("xi values must lie in [0, 1], got {xi}")));
            }
        }
        if self.xi_values.is_empty() {
            return Err(Error::config("xi_values must not be empty"));
        }

        if self.experiment == ExperimentKind::LambdaTable {
            for &n in &self.n_values {
                if !self.lambda_table_m.is_multiple_of(2 * n) {
                    return Err(Error::config(format!(
                        "lambda_table_m = {} must be divisible by 2N = {}",
                        self.lambda_table_m,
                        2 * n
                    )));
                }
            }
            return Ok(());
        }

        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::config("k_values must be a non-empty list of positive integers"));
        }
        for &k in &self.k_values {
            let m = self.antennas(k).ok_or_else(|| {
                Error::config(format!(
                    "K * alpha must be an integer: K = {k}, alpha = {}",
                    s.alpha
                ))
            })?;
            for &n in &self.n_values {
                if m % (2 * n) != 0 {
                    return Err(Error::config(format!(
                        "K * alpha = {m} (K = {k}) must be divisible by 2N = {} (N = {n})",
                        2 * n
                    )));
                }
            }
        }
        match self.experiment {
            ExperimentKind::Convergence => {
                if s.model != LinkModel::Limiting {
                    return Err(Error::config("the convergence experiment uses model = limiting"));
                }
                if let Some(&n) = self.n_values.iter().find(|&&n| n > 2) {
                    return Err(Error::Unsupported(format!(
                        "the limiting link gain model supports N <= 2, got N = {n}"
                    )));
                }
                s.profile()?;
                if !(s.beta_min_db <= s.beta_max_db) {
                    return Err(Error::config("beta_min_db must not exceed beta_max_db"));
                }
            }
            ExperimentKind::SingleUserCdf => {
                if let Some(&k) = self.k_values.iter().find(|&&k| self.tagged_user >= k) {
                    return Err(Error::config(format!(
                        "tagged_user {} is out of range for K = {k}",
                        self.tagged_user
                    )));
                }
            }
            _ => {}
        }
        if self.experiment != ExperimentKind::Convergence {
            if !(s.d_max_m > s.d_min_m && s.d_min_m > 0.0) {
                return Err(Error::config(format!(
                    "need 0 < d_min_m < d_max_m, got d_min_m = {}, d_max_m = {}",
                    s.d_min_m, s.d_max_m
                )));
            }
            if self
                .shadow_sigma_values
                .iter()
                .chain(std::iter::once(&s.shadow_sigma_db))
                .any(|v| !(*v >= 0.0))
            {
                return Err(Error::config("shadowing standard deviations must be nonnegative"));
            }
        }
        Ok(())
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::config(format!("{key}: expected true/false, got '{other}'"))),
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| num(key, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file_with_comments() {
        let text = "\
# convergence study
experiment = convergence
k_values = 20, 40 ,60
xi_values = 1,0.8
seed = 42   # trailing comment
profile = 2
";
        let c = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Convergence);
        assert_eq!(c.k_values, vec![20, 40, 60]);
        assert_eq!(c.xi_values, vec![1.0, 0.8]);
        assert_eq!(c.seed, 42);
        assert_eq!(c.system.profile, 2);
        assert_eq!(c.system.model, LinkModel::Limiting);
        c.validate().unwrap();
    }

    #[test]
    fn override_selects_defaults() {
        let c = ExperimentConfig::parse("experiment = convergence\n", Some(ExperimentKind::LambdaTable))
            .unwrap();
        assert_eq!(c.experiment, ExperimentKind::LambdaTable);
        assert_eq!(c.n_values, vec![1, 2, 5, 10]);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ExperimentConfig::parse("experiment = convergence\nfoo = 1\n", None).is_err());
        assert!(ExperimentConfig::parse("experiment = convergence\nseed\n", None).is_err());
        assert!(ExperimentConfig::parse("experiment = nope\n", None).is_err());
        assert!(ExperimentConfig::parse("seed = 1\n", None).is_err());
        assert!(ExperimentConfig::parse("experiment = sinr_cdf\nseed = 1\nseed = 2\n", None).is_err());
        assert!(ExperimentConfig::parse("experiment = sinr_cdf\nseed = x\n", None).is_err());
    }

    #[test]
    fn antenna_divisibility_is_enforced() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::SinrCdf);
        c.k_values = vec![25];
        c.n_values = vec![1, 2];
        c.system.alpha = 10.0;
        // M = 250 is not divisible by 2N = 4 for N = 2
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("divisible by 2N"), "{err}");
        c.k_values = vec![3];
        c.system.alpha = 1.5;
        assert!(c.validate().unwrap_err().to_string().contains("integer"));
    }

    #[test]
    fn limiting_model_rejects_many_clusters() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Convergence);
        c.n_values = vec![5];
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn all_defaults_validate() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::defaults(kind).validate().unwrap();
        }
    }
}
