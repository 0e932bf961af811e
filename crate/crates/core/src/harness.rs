//! Monte Carlo link evaluation.
//!
//! A trial draws channels, a sender and data symbols, precodes, transmits
//! through AWGN, runs the curious receiver and demodulates the designated
//! antennas. Sweeps aggregate trials per `(snr, precoder)` cell.
//!
//! # Seeding
//!
//! Every trial owns a private ChaCha8 generator seeded with
//!
//! ```text
//! h = splitmix64(master_seed ^ splitmix64(precoder_code))
//! h = splitmix64(h ^ snr_index)
//! seed = splitmix64(h ^ trial_index)
//! ```
//!
//! where `splitmix64(x)` is the SplitMix64 output function applied to
//! `x + 0x9E3779B97F4A7C15` (multipliers `0xBF58476D1CE4E5B9`,
//! `0x94D049BB133111EB`, shifts 30/27/31), and precoder codes are
//! svd = 0, zf = 1, mmse = 2, im_anon = 3, ci_anon = 4. Trial outcomes are
//! collected in index order and summed sequentially, so a sweep is
//! bit-identical for any worker count.
//!
//! Inside a trial the generator is consumed in a fixed order: channel seed
//! (block mode only), true sender, `d` symbol indices, alias choice, noise,
//! tie break.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::airlink::{
    add_awgn, demodulate, modulate, sample_channel_set, AirlinkError, ChannelMode, NoiseModel,
    Scenario,
};
use crate::detect::{detect, DEFAULT_TIE_TOL};
use crate::numerics::{self, ComplexVector};
use crate::precode::{self, PrecodeError};

/// Bisection tolerance for the CI precoder inside trials.
pub const DEFAULT_CI_TOL: f64 = 1e-7;

/// Two-sided 95% normal quantile.
pub const DEFAULT_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderId {
    Svd,
    Zf,
    Mmse,
    ImAnon,
    CiAnon,
}

impl PrecoderId {
    pub const ALL: [PrecoderId; 5] = [
        PrecoderId::Svd,
        PrecoderId::Zf,
        PrecoderId::Mmse,
        PrecoderId::ImAnon,
        PrecoderId::CiAnon,
    ];

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecoderId::Svd => "svd",
            PrecoderId::Zf => "zf",
            PrecoderId::Mmse => "mmse",
            PrecoderId::ImAnon => "im_anon",
            PrecoderId::CiAnon => "ci_anon",
        }
    }

    pub fn is_anonymous(self) -> bool {
        matches!(self, PrecoderId::ImAnon | PrecoderId::CiAnon)
    }
}

impl fmt::Display for PrecoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecoderId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrecoderId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown precoder '{s}' (expected svd, zf, mmse, im_anon or ci_anon)"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrialError {
    #[error(transparent)]
    Precode(#[from] PrecodeError),
    #[error(transparent)]
    Airlink(#[from] AirlinkError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sweep needs at least one trial")]
    NoTrials,
    #[error("sweep needs at least one SNR point")]
    EmptyGrid,
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub true_sender: usize,
    pub declared: usize,
    pub detection_error: bool,
    pub symbol_errors: usize,
    pub symbols: usize,
    pub entropy_bits: f64,
    pub margin_or_gain: f64,
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed; see the module docs for the exact recipe.
pub fn trial_seed(master_seed: u64, precoder: PrecoderId, snr_index: u64, trial_index: u64) -> u64 {
    let h = splitmix64(master_seed ^ splitmix64(precoder.code()));
    let h = splitmix64(h ^ snr_index);
    splitmix64(h ^ trial_index)
}

/// One pass through the link. `snr_db = +∞` runs without noise; the posterior
/// is then uniform over the residual tie group.
pub fn run_trial(
    scenario: &Scenario,
    precoder: PrecoderId,
    snr_db: f64,
    trial_seed: u64,
) -> Result<TrialOutcome, TrialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let channel_seed = match scenario.channel_mode() {
        ChannelMode::Block => rng.random::<u64>(),
        ChannelMode::Fixed(seed) => seed,
    };
    let channels = sample_channel_set(scenario, channel_seed)?;
    let k_count = scenario.k_candidates();
    let c = scenario.constellation();
    let d = scenario.n_streams();
    let power = scenario.power_watts();

    let k = rng.random_range(0..k_count);
    let indices: Vec<usize> = (0..d).map(|_| rng.random_range(0..c.order())).collect();
    let s = modulate(&indices, c)?;
    let aliases = scenario.alias_policy().select(k, k_count, &mut rng);
    let noise = if snr_db.is_finite() {
        Some(NoiseModel::from_snr_db(power, snr_db)?)
    } else {
        None
    };
    let sigma2 = noise.map_or(0.0, |n| n.sigma2());

    let h_k = channels.channel(k);
    let result = match precoder {
        PrecoderId::Svd => precode::svd_precoder(h_k, &s, power)?,
        PrecoderId::Zf => precode::zf_precoder(h_k, &s, power)?,
        PrecoderId::Mmse => precode::mmse_precoder(h_k, &s, power, sigma2)?,
        PrecoderId::ImAnon => {
            if aliases.is_empty() {
                return Err(PrecodeError::NoAliases.into());
            }
            precode::im_anonymous_precoder(&channels, k, &aliases, &s, power)?
        }
        PrecoderId::CiAnon => {
            if aliases.is_empty() {
                return Err(PrecodeError::NoAliases.into());
            }
            precode::ci_anonymous_precoder(&channels, k, &aliases, &s, power, c, DEFAULT_CI_TOL)?
        }
    };

    let clean = h_k * &result.x;
    let y = match &noise {
        Some(n) => add_awgn(&clean, n, &mut rng),
        None => clean,
    };
    let report = detect(&y, &channels, noise.map(|n| n.sigma2()), DEFAULT_TIE_TOL, &mut rng);
    let declared = report.declared;

    let received: Vec<Complex64> = match precoder {
        PrecoderId::ImAnon | PrecoderId::CiAnon => y.rows(0, d).iter().copied().collect(),
        PrecoderId::Zf | PrecoderId::Mmse => {
            let reconstructed: ComplexVector = channels.projector(declared) * &y;
            reconstructed.rows(0, d).iter().copied().collect()
        }
        PrecoderId::Svd => {
            let (u, sigma, _) = numerics::svd_factors(channels.channel(declared));
            let proj = u.columns(0, d).adjoint() * &y;
            (0..d).map(|i| proj[i].unscale(sigma[i])).collect()
        }
    };
    let decided = demodulate(&received, c);
    let symbol_errors = decided.iter().zip(&indices).filter(|(a, b)| a != b).count();

    Ok(TrialOutcome {
        true_sender: k,
        declared,
        detection_error: declared != k,
        symbol_errors,
        symbols: d,
        entropy_bits: report.entropy_bits,
        margin_or_gain: result.gain_or_margin,
    })
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n >= 1 && successes <= n, "need 0 ≤ successes ≤ n, n ≥ 1");
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub z: f64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(snr_grid_db: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        Self {
            snr_grid_db,
            trials,
            master_seed,
            z: DEFAULT_Z,
            workers: 0,
        }
    }
}

/// Aggregates for one `(snr, precoder)` cell. Rates are NaN when every
/// trial was infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub snr_db: f64,
    pub precoder: PrecoderId,
    pub der: f64,
    pub der_ci: (f64, f64),
    pub ser: f64,
    pub ser_ci: (f64, f64),
    pub mean_entropy_bits: f64,
    /// Completed trials.
    pub trials: u64,
    pub infeasible: u64,
    pub detection_errors: u64,
    pub symbol_errors: u64,
    pub symbols: u64,
    /// First infeasibility reason seen, if any.
    pub infeasible_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by SNR grid position, then by the requested precoder order.
    pub cells: Vec<SweepCell>,
    pub master_seed: u64,
}

impl SweepResult {
    pub fn cell(&self, precoder: PrecoderId, snr_db: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.precoder == precoder && c.snr_db == snr_db)
    }

    /// Cells of one precoder in grid order.
    pub fn series(&self, precoder: PrecoderId) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.precoder == precoder).collect()
    }
}

fn aggregate(
    snr_db: f64,
    precoder: PrecoderId,
    outcomes: Vec<Result<TrialOutcome, TrialError>>,
    z: f64,
) -> SweepCell {
    let mut trials = 0u64;
    let mut infeasible = 0u64;
    let mut detection_errors = 0u64;
    let mut symbol_errors = 0u64;
    let mut symbols = 0u64;
    let mut entropy_sum = 0.0;
    let mut infeasible_reason = None;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                trials += 1;
                detection_errors += o.detection_error as u64;
                symbol_errors += o.symbol_errors as u64;
                symbols += o.symbols as u64;
                entropy_sum += o.entropy_bits;
            }
            Err(e) => {
                infeasible += 1;
                infeasible_reason.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let (der, der_ci, ser, ser_ci, mean_entropy_bits) = if trials == 0 {
        let nan = f64::NAN;
        (nan, (nan, nan), nan, (nan, nan), nan)
    } else {
        (
            detection_errors as f64 / trials as f64,
            wilson_interval(detection_errors, trials, z),
            symbol_errors as f64 / symbols as f64,
            wilson_interval(symbol_errors, symbols, z),
            entropy_sum / trials as f64,
        )
    };
    SweepCell {
        snr_db,
        precoder,
        der,
        der_ci,
        ser,
        ser_ci,
        mean_entropy_bits,
        trials,
        infeasible,
        detection_errors,
        symbol_errors,
        symbols,
        infeasible_reason,
    }
}

/// Runs every `(snr, precoder)` cell. Trials run in parallel; the result does
/// not depend on the number of workers.
pub fn run_sweep(
    scenario: &Scenario,
    precoders: &[PrecoderId],
    cfg: &SweepConfig,
) -> Result<SweepResult, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    if cfg.snr_grid_db.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let cells = pool.install(|| {
        let mut cells = Vec::with_capacity(cfg.snr_grid_db.len() * precoders.len());
        for (snr_index, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
            for &precoder in precoders {
                let outcomes: Vec<_> = (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|t| {
                        let seed = trial_seed(cfg.master_seed, precoder, snr_index as u64, t);
                        run_trial(scenario, precoder, snr_db, seed)
                    })
                    .collect();
                cells.push(aggregate(snr_db, precoder, outcomes, cfg.z));
            }
        }
        cells
    });
    Ok(SweepResult {
        cells,
        master_seed: cfg.master_seed,
    })
}
