//! Batch engine for the Monte Carlo experiments: empirical level under the
//! null models, power curves over the perturbation grid, and machine-readable
//! reports. CSV ingestion for real data lives in [`io`].
//!
//! Reproducibility contract: trial t draws from an rng stream derived
//! deterministically from (seed, t) by a counter-based 64-bit mix, so a report
//! depends only on (seed, config) — never on thread count or scheduling.

pub mod io;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{run_test, TestOptions};
use crate::models::{
    alternative_sample, elliptical_sample, AlternativeModel, CovarianceModel, MixingDistribution,
    MixingFamily, ShockFamily,
};

pub use io::{
    emit_report, emit_report_to_path, log_returns, parse_report_csv, read_csv_matrix,
    read_csv_matrix_from, ColumnSelection, CsvOptions, ReportFormat,
};

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-trial rng: a 32-byte ChaCha key expanded from
/// mix(seed, index) with a splitmix64 sequence.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = mix64(seed ^ mix64(index ^ 0xd6e8_feb8_6659_fd93));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    use rand::SeedableRng;
    ChaCha8Rng::from_seed(key)
}

/// Stream index reserved for building the covariance model; trials use
/// 0..trials.
const SETUP_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Level,
    Power,
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Level => "level",
            SimMode::Power => "power",
        })
    }
}

/// The five mixing settings of the level experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixingSetting {
    /// (i) χ²_p.
    #[serde(rename = "i")]
    ChiSquared,
    /// (ii) Beta-Prime with τ = 3.
    #[serde(rename = "ii")]
    BetaPrime,
    /// (iii) (p+4)·Beta(p/2, 2).
    #[serde(rename = "iii")]
    ScaledBeta,
    /// (iv) Gamma(p/5, 1/5).
    #[serde(rename = "iv")]
    Gamma,
    /// (v) Gamma(p,1)²/(p+1).
    #[serde(rename = "v")]
    GammaSquared,
}

impl MixingSetting {
    pub const ALL: [MixingSetting; 5] = [
        MixingSetting::ChiSquared,
        MixingSetting::BetaPrime,
        MixingSetting::ScaledBeta,
        MixingSetting::Gamma,
        MixingSetting::GammaSquared,
    ];

    pub fn mixing(self, p: usize) -> Result<MixingDistribution> {
        let family = match self {
            MixingSetting::ChiSquared => MixingFamily::ChiSquared,
            MixingSetting::BetaPrime => MixingFamily::BetaPrime { tau: 3.0 },
            MixingSetting::ScaledBeta => MixingFamily::BetaScaled { b: 2.0 },
            MixingSetting::Gamma => MixingFamily::GammaShapeRate { tau: 5.0 },
            MixingSetting::GammaSquared => MixingFamily::GammaSquaredScaled,
        };
        MixingDistribution::new(family, p)
    }
}

impl fmt::Display for MixingSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixingSetting::ChiSquared => "i",
            MixingSetting::BetaPrime => "ii",
            MixingSetting::ScaledBeta => "iii",
            MixingSetting::Gamma => "iv",
            MixingSetting::GammaSquared => "v",
        })
    }
}

impl FromStr for MixingSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(MixingSetting::ChiSquared),
            "ii" | "2" => Ok(MixingSetting::BetaPrime),
            "iii" | "3" => Ok(MixingSetting::ScaledBeta),
            "iv" | "4" => Ok(MixingSetting::Gamma),
            "v" | "5" => Ok(MixingSetting::GammaSquared),
            other => Err(Error::InvalidConfig(format!(
                "unknown mixing setting {other:?} (expected i..v)"
            ))),
        }
    }
}

/// The four covariance models of the experiments, at their default
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovModelKind {
    #[serde(alias = "1")]
    Spiked,
    #[serde(alias = "2")]
    Toeplitz,
    #[serde(alias = "3")]
    Decay,
    #[serde(alias = "4")]
    Identity,
}

impl CovModelKind {
    pub const ALL: [CovModelKind; 4] = [
        CovModelKind::Spiked,
        CovModelKind::Toeplitz,
        CovModelKind::Decay,
        CovModelKind::Identity,
    ];

    pub fn model(self) -> CovarianceModel {
        match self {
            CovModelKind::Spiked => CovarianceModel::spiked_default(),
            CovModelKind::Toeplitz => CovarianceModel::toeplitz_default(),
            CovModelKind::Decay => CovarianceModel::decay_default(),
            CovModelKind::Identity => CovarianceModel::Identity,
        }
    }
}

impl fmt::Display for CovModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovModelKind::Spiked => "spiked",
            CovModelKind::Toeplitz => "toeplitz",
            CovModelKind::Decay => "decay",
            CovModelKind::Identity => "identity",
        })
    }
}

impl FromStr for CovModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spiked" | "1" => Ok(CovModelKind::Spiked),
            "toeplitz" | "2" => Ok(CovModelKind::Toeplitz),
            "decay" | "3" => Ok(CovModelKind::Decay),
            "identity" | "4" => Ok(CovModelKind::Identity),
            other => Err(Error::InvalidConfig(format!(
                "unknown covariance model {other:?} (expected spiked|toeplitz|decay|identity or 1..4)"
            ))),
        }
    }
}

/// Shock families for the power experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockKind {
    #[serde(alias = "a")]
    Laplace,
    #[serde(alias = "b")]
    Beta,
}

impl ShockKind {
    pub fn family(self) -> ShockFamily {
        match self {
            ShockKind::Laplace => ShockFamily::LaplaceStd,
            ShockKind::Beta => ShockFamily::BetaStd,
        }
    }
}

impl fmt::Display for ShockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShockKind::Laplace => "laplace",
            ShockKind::Beta => "beta",
        })
    }
}

impl FromStr for ShockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laplace" | "a" => Ok(ShockKind::Laplace),
            "beta" | "b" => Ok(ShockKind::Beta),
            other => Err(Error::InvalidConfig(format!(
                "unknown shock family {other:?} (expected laplace|beta)"
            ))),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

/// One Monte Carlo experiment. A level run needs `setting`; a power run needs
/// `shock` and a non-empty `h_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub mode: SimMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<MixingSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shock: Option<ShockKind>,
    pub model: CovModelKind,
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_grid: Vec<f64>,
    pub seed: u64,
    /// Worker threads; 0 means one per core. Never serialized: thread count
    /// cannot influence a report.
    #[serde(default, skip_serializing)]
    pub threads: usize,
}

impl SimulationConfig {
    pub fn level(
        setting: MixingSetting,
        model: CovModelKind,
        n: usize,
        p: usize,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            mode: SimMode::Level,
            setting: Some(setting),
            shock: None,
            model,
            n,
            p,
            trials,
            alpha: default_alpha(),
            h_grid: Vec::new(),
            seed,
            threads: 0,
        }
    }

    pub fn power(
        shock: ShockKind,
        model: CovModelKind,
        n: usize,
        p: usize,
        trials: usize,
        h_grid: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            mode: SimMode::Power,
            setting: None,
            shock: Some(shock),
            model,
            n,
            p,
            trials,
            alpha: default_alpha(),
            h_grid,
            seed,
            threads: 0,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "n must be even and at least 4, got {}",
                self.n
            )));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Rejection rate for one experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub trials: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Monte Carlo standard error √(rate·(1−rate)/trials).
    pub se: f64,
}

impl ReportRow {
    fn new(h: Option<f64>, trials: usize, rejections: usize) -> Self {
        let rate = rejections as f64 / trials as f64;
        Self { h, trials, rejections, rate, se: (rate * (1.0 - rate) / trials as f64).sqrt() }
    }
}

/// A finished experiment: the config echo plus one row per cell (a level run
/// has a single row, a power run one row per h).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub rows: Vec<ReportRow>,
    /// Wall-clock seconds; informational only and never serialized, so that
    /// reports from the same (seed, config) are byte-identical.
    #[serde(skip)]
    pub wall_secs: f64,
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))
}

/// Empirical level under a null model: the rejection rate of the test over
/// `cfg.trials` independent datasets.
pub fn simulate_level(cfg: &SimulationConfig) -> Result<SimulationReport> {
    if cfg.mode != SimMode::Level {
        return Err(Error::InvalidConfig("simulate_level needs mode = level".into()));
    }
    if !cfg.h_grid.is_empty() {
        return Err(Error::InvalidConfig("level mode takes no h_grid".into()));
    }
    if cfg.shock.is_some() {
        return Err(Error::InvalidConfig("level mode takes no shock family".into()));
    }
    let setting = cfg
        .setting
        .ok_or_else(|| Error::InvalidConfig("level mode needs a mixing setting".into()))?;
    cfg.validate_common()?;

    let mix = setting.mixing(cfg.p)?;
    let (_, root) = cfg
        .model
        .model()
        .build_with_root(cfg.p, &mut substream(cfg.seed, SETUP_STREAM))?;
    let opts = TestOptions { alpha: cfg.alpha, ..Default::default() };

    let start = Instant::now();
    let pool = thread_pool(cfg.threads)?;
    let outcomes: Result<Vec<bool>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(cfg.seed, t as u64);
                let x = elliptical_sample(cfg.n, &root, &mix, &mut rng)?;
                Ok(run_test(&x, &opts)?.reject)
            })
            .collect()
    });
    let rejections = outcomes?.iter().filter(|r| **r).count();

    Ok(SimulationReport {
        config: cfg.clone(),
        rows: vec![ReportRow::new(None, cfg.trials, rejections)],
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Rejection-rate curve over the h grid of a perturbation model; the h = 0
/// row is a level estimate.
pub fn simulate_power(cfg: &SimulationConfig) -> Result<SimulationReport> {
    if cfg.mode != SimMode::Power {
        return Err(Error::InvalidConfig("simulate_power needs mode = power".into()));
    }
    let shock = cfg
        .shock
        .ok_or_else(|| Error::InvalidConfig("power mode needs a shock family".into()))?;
    if cfg.setting.is_some() {
        return Err(Error::InvalidConfig("power mode takes no mixing setting".into()));
    }
    if cfg.h_grid.is_empty() {
        return Err(Error::InvalidConfig("power mode needs a non-empty h_grid".into()));
    }
    if cfg.h_grid.iter().any(|h| !(0.0..=1.0).contains(h)) {
        return Err(Error::InvalidConfig("h values must lie in [0,1]".into()));
    }
    cfg.validate_common()?;

    let (_, root) = cfg
        .model
        .model()
        .build_with_root(cfg.p, &mut substream(cfg.seed, SETUP_STREAM))?;
    let opts = TestOptions { alpha: cfg.alpha, ..Default::default() };

    let start = Instant::now();
    let pool = thread_pool(cfg.threads)?;
    let mut rows = Vec::with_capacity(cfg.h_grid.len());
    for (h_idx, &h) in cfg.h_grid.iter().enumerate() {
        let alt = AlternativeModel::new(root.clone(), h, shock.family())?;
        let base = (h_idx * cfg.trials) as u64;
        let outcomes: Result<Vec<bool>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = substream(cfg.seed, base + t as u64);
                    let x = alternative_sample(cfg.n, &alt, &mut rng)?;
                    Ok(run_test(&x, &opts)?.reject)
                })
                .collect()
        });
        let rejections = outcomes?.iter().filter(|r| **r).count();
        rows.push(ReportRow::new(Some(h), cfg.trials, rejections));
    }

    Ok(SimulationReport { config: cfg.clone(), rows, wall_secs: start.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_level() -> SimulationConfig {
        let mut cfg = SimulationConfig::level(
            MixingSetting::ChiSquared,
            CovModelKind::Identity,
            40,
            10,
            20,
            7,
        );
        cfg.threads = 1;
        cfg
    }

    #[test]
    fn substreams_differ_and_repeat() {
        use rand::RngCore;
        let a = substream(1, 0).next_u64();
        let b = substream(1, 1).next_u64();
        let c = substream(2, 0).next_u64();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, substream(1, 0).next_u64());
    }

    #[test]
    fn single_trial_rate_is_binary() {
        let mut cfg = tiny_level();
        cfg.trials = 1;
        let report = simulate_level(&cfg).unwrap();
        assert!(report.rows[0].rate == 0.0 || report.rows[0].rate == 1.0);
    }

    #[test]
    fn se_formula_is_consistent() {
        let report = simulate_level(&tiny_level()).unwrap();
        let row = &report.rows[0];
        let want = (row.rate * (1.0 - row.rate) / row.trials as f64).sqrt();
        assert!((row.se - want).abs() <= 1e-12);
        assert_eq!(row.rate, row.rejections as f64 / row.trials as f64);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut one = tiny_level();
        one.threads = 1;
        let mut many = tiny_level();
        many.threads = 4;
        let a = simulate_level(&one).unwrap();
        let b = simulate_level(&many).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn power_rows_follow_grid() {
        let mut cfg = SimulationConfig::power(
            ShockKind::Laplace,
            CovModelKind::Identity,
            40,
            10,
            10,
            vec![0.0, 0.5, 1.0],
            3,
        );
        cfg.threads = 1;
        let report = simulate_power(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].h, Some(0.0));
        assert_eq!(report.rows[2].h, Some(1.0));

        // A singleton grid is just one cell, and repeats exactly.
        cfg.h_grid = vec![0.5];
        let a = simulate_power(&cfg).unwrap();
        let b = simulate_power(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_level();
        cfg.h_grid = vec![0.5];
        assert!(simulate_level(&cfg).is_err());

        let mut cfg = tiny_level();
        cfg.setting = None;
        assert!(simulate_level(&cfg).is_err());

        let mut cfg = tiny_level();
        cfg.n = 41;
        assert!(simulate_level(&cfg).is_err());

        let mut cfg = tiny_level();
        cfg.trials = 0;
        assert!(simulate_level(&cfg).is_err());

        let mut power = SimulationConfig::power(
            ShockKind::Beta,
            CovModelKind::Identity,
            20,
            5,
            5,
            vec![],
            1,
        );
        power.threads = 1;
        assert!(simulate_power(&power).is_err());
        power.h_grid = vec![1.5];
        assert!(simulate_power(&power).is_err());
    }

    #[test]
    fn setting_and_model_round_trip_strings() {
        for s in MixingSetting::ALL {
            assert_eq!(s.to_string().parse::<MixingSetting>().unwrap(), s);
        }
        for m in CovModelKind::ALL {
            assert_eq!(m.to_string().parse::<CovModelKind>().unwrap(), m);
        }
        assert_eq!("2".parse::<CovModelKind>().unwrap(), CovModelKind::Toeplitz);
        assert!("sphere".parse::<CovModelKind>().is_err());
    }
}
