//! Built-in property suites.
//!
//! Each suite draws seeded random instances, checks one family of
//! invariants and reports the worst error as a multiple of its tolerance
//! (`score ≤ 1` passes). The fault hook perturbs the computed quantity a
//! suite inspects, so the suite must notice.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phyanon::airlink::{ci_margin, demodulate, modulate, sample_channel_set};
use phyanon::detect::residuals;
use phyanon::harness::DEFAULT_CI_TOL;
use phyanon::numerics::{self, min_norm_qp, ComplexMatrix, QpProblem, QpStatus};
use phyanon::oracles::qp_by_enumeration;
use phyanon::precode::{ci_anonymous_precoder, im_anonymous_precoder};
use phyanon::{psk_constellation, AliasPolicy, ChannelMode, ComplexVector, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Penrose,
    Projector,
    QpOracle,
    AnonymityResidual,
    ModulationRoundtrip,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Penrose,
        Suite::Projector,
        Suite::QpOracle,
        Suite::AnonymityResidual,
        Suite::ModulationRoundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Penrose => "penrose",
            Suite::Projector => "projector",
            Suite::QpOracle => "qp_oracle",
            Suite::AnonymityResidual => "anonymity_residual",
            Suite::ModulationRoundtrip => "modulation_roundtrip",
        }
    }

    fn default_cases(self) -> usize {
        match self {
            Suite::Penrose | Suite::Projector => 100,
            Suite::QpOracle => 200,
            Suite::AnonymityResidual => 100,
            Suite::ModulationRoundtrip => 1000,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub failures: usize,
    /// Worst error divided by its tolerance.
    pub score: f64,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    failures: usize,
    score: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            failures: 0,
            score: 0.0,
        }
    }

    fn check(&mut self, error: f64, tol: f64) -> bool {
        let s = if error.is_nan() { f64::INFINITY } else { error / tol };
        self.score = self.score.max(s);
        s <= 1.0
    }

    fn case(&mut self, ok: bool) {
        if !ok {
            self.failures += 1;
        }
    }

    /// Runs every check, so the score sees the worst error.
    fn check_all(&mut self, errors: &[f64], tol: f64) -> bool {
        let mut ok = true;
        for &e in errors {
            ok &= self.check(e, tol);
        }
        ok
    }

    /// A case made of one check.
    fn single(&mut self, error: f64, tol: f64) {
        let ok = self.check(error, tol);
        self.case(ok);
    }
}

fn cgauss(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

/// Dense random matrix, or a product that is rank deficient for one case
/// in three.
fn random_instance(rng: &mut impl Rng, case: usize) -> ComplexMatrix {
    let rows = rng.random_range(1..=8);
    let cols = rng.random_range(1..=8);
    if case.is_multiple_of(3) {
        let rank = rng.random_range(1..=rows.min(cols));
        random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols)
    } else {
        random_matrix(rng, rows, cols)
    }
}

fn penrose(cases: usize, fault: bool, rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..cases {
        let h = random_instance(rng, case);
        let mut p = numerics::pseudo_inverse(&h);
        if fault {
            p[(0, 0)] += Complex64::new(1e-3, 0.0);
        }
        let hp = &h * &p;
        let ph = &p * &h;
        let errors = [
            (&hp * &h - &h).norm() / h.norm().max(1e-300),
            (&ph * &p - &p).norm() / p.norm().max(1e-300),
            (&hp - hp.adjoint()).norm() / hp.norm().max(1.0),
            (&ph - ph.adjoint()).norm() / ph.norm().max(1.0),
        ];
        let ok = t.check_all(&errors, 1e-10);
        t.case(ok);
    }
    t
}

fn projector(cases: usize, fault: bool, rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..cases {
        let h = random_instance(rng, case);
        let mut p = numerics::projector(&h);
        if fault {
            p *= Complex64::new(1.001, 0.0);
        }
        let errors = [
            (&p * &p - &p).norm() / p.norm().max(1.0),
            (&p - p.adjoint()).norm() / p.norm().max(1.0),
            (&p * &h - &h).norm() / h.norm().max(1e-300),
        ];
        let ok = t.check_all(&errors, 1e-10);
        t.case(ok);
    }
    t
}

fn qp_oracle(cases: usize, fault: bool, rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let tol = 1e-9;
    for _ in 0..cases {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let c = DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let b = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let ok = match QpProblem::new(c.clone(), b.clone()).and_then(|p| min_norm_qp(&p, tol)) {
            Err(_) => t.check(f64::INFINITY, 1.0),
            Ok(mut sol) => {
                if fault {
                    sol.z[0] += 1e-3;
                }
                match (sol.status, qp_by_enumeration(&c, &b, tol)) {
                    (QpStatus::Optimal, Some(z)) => {
                        let a = t.check((&sol.z - z).amax(), 1e-6);
                        t.check(sol.kkt_residual, tol) && a
                    }
                    (QpStatus::Infeasible, None) => true,
                    _ => t.check(f64::INFINITY, 1.0),
                }
            }
        };
        t.case(ok);
    }
    t
}

/// Noiseless checks on the full-anonymity geometry K=5, 10x11, d=4, QPSK.
fn anonymity_residual(cases: usize, fault: bool, rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let qpsk = psk_constellation(4).expect("qpsk");
    let power = 1.0;
    let scenario = Scenario::new(5, 10, 11, 4, qpsk.clone(), power, AliasPolicy::All, ChannelMode::Block)
        .expect("valid geometry");
    for _ in 0..cases {
        let Ok(channels) = sample_channel_set(&scenario, rng.random()) else {
            t.single(f64::INFINITY, 1.0);
            continue;
        };
        let k = rng.random_range(0..5);
        let aliases: Vec<usize> = (0..5).filter(|&j| j != k).collect();
        let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let s = modulate(&idx, &qpsk).expect("indices in range");

        let mut ok = true;
        match im_anonymous_precoder(&channels, k, &aliases, &s, power) {
            Ok(mut r) => {
                if fault {
                    let bump = 1e-3 * r.x.norm();
                    r.x[0] += Complex64::new(bump, 0.0);
                }
                let y = channels.channel(k) * &r.x;
                ok &= residual_spread(&mut t, &y, &channels);
                let g = r.gain_or_margin;
                for i in 0..4 {
                    ok &= t.check((y[i] - s[i] * g).norm() / g, 1e-9);
                }
                ok &= t.check((r.x.norm_squared() - power).abs() / power, 1e-9);
            }
            Err(_) => ok &= t.check(f64::INFINITY, 1.0),
        }
        match ci_anonymous_precoder(&channels, k, &aliases, &s, power, &qpsk, DEFAULT_CI_TOL) {
            Ok(mut r) => {
                if fault {
                    let bump = 1e-3 * r.x.norm();
                    r.x[1] += Complex64::new(0.0, bump);
                }
                let y = channels.channel(k) * &r.x;
                ok &= residual_spread(&mut t, &y, &channels);
                ok &= t.check((r.x.norm_squared() / power - 1.0).max(0.0), 1e-9);
                let theta = qpsk.ci_half_angle();
                for i in 0..4 {
                    let short = r.gain_or_margin - DEFAULT_CI_TOL - ci_margin(y[i] * s[i].conj(), theta);
                    ok &= t.check(short.max(0.0), DEFAULT_CI_TOL);
                }
            }
            Err(_) => ok &= t.check(f64::INFINITY, 1.0),
        }
        t.case(ok);
    }
    t
}

/// Residual spread across all candidates, relative to `||y||`.
fn residual_spread(t: &mut Tally, y: &ComplexVector, channels: &phyanon::ChannelSet) -> bool {
    let d = residuals(y, channels);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    t.check((hi - lo) / y.norm(), 1e-8)
}

fn modulation_roundtrip(cases: usize, fault: bool, rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for order in [2usize, 4, 8] {
        let c = psk_constellation(order).expect("supported order");
        let sector = 2.0 * std::f64::consts::PI / order as f64;
        for _ in 0..cases {
            let idx: Vec<usize> = (0..8).map(|_| rng.random_range(0..order)).collect();
            let s = modulate(&idx, &c).expect("indices in range");
            // Scaled and rotated strictly inside the sector.
            let received: Vec<Complex64> = s
                .iter()
                .map(|&p| {
                    let spin: f64 = rng.random_range(-0.45..0.45) * sector;
                    let gain: f64 = rng.random_range(0.01..100.0);
                    let turn = if fault { sector } else { 0.0 };
                    p * Complex64::from_polar(gain, spin + turn)
                })
                .collect();
            let back = demodulate(&received, &c);
            let wrong = back.iter().zip(&idx).filter(|(a, b)| a != b).count();
            t.single(wrong as f64, 0.5);
        }
        // Gray labelling: neighbouring points differ in one bit.
        let labels = c.labels();
        for m in 0..order {
            let diff = (labels[m] ^ labels[(m + 1) % order]).count_ones();
            t.single((diff as f64 - 1.0).abs(), 0.5);
        }
    }
    t
}

/// Runs one suite with `cases` instances.
pub fn run_suite(suite: Suite, cases: usize, fault: bool, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (suite as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let start = Instant::now();
    let tally = match suite {
        Suite::Penrose => penrose(cases, fault, &mut rng),
        Suite::Projector => projector(cases, fault, &mut rng),
        Suite::QpOracle => qp_oracle(cases, fault, &mut rng),
        Suite::AnonymityResidual => anonymity_residual(cases, fault, &mut rng),
        Suite::ModulationRoundtrip => modulation_roundtrip(cases, fault, &mut rng),
    };
    SuiteReport {
        suite,
        cases,
        failures: tally.failures,
        score: tally.score,
        elapsed: start.elapsed(),
    }
}

/// Every suite at its default size; `fault` corrupts the named suite.
pub fn run_all(fault: Option<Suite>) -> Vec<SuiteReport> {
    Suite::ALL
        .into_iter()
        .map(|s| run_suite(s, s.default_cases(), fault == Some(s), 0x5E1F_7E57))
        .collect()
}

pub fn format_table(reports: &[SuiteReport]) -> String {
    let mut out = format!(
        "{:<22} {:>6} {:>8} {:>12} {:>9}  {}\n",
        "suite", "cases", "failures", "worst/tol", "seconds", "result"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<22} {:>6} {:>8} {:>12.3e} {:>9.3}  {}\n",
            r.suite.name(),
            r.cases,
            r.failures,
            r.score,
            r.elapsed.as_secs_f64(),
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nonsense".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass_and_faults_are_caught() {
        for s in Suite::ALL {
            let clean = run_suite(s, 5, false, 1);
            assert!(clean.passed(), "{s}: score {}", clean.score);
            let broken = run_suite(s, 5, true, 1);
            assert!(!broken.passed(), "{s}: fault went unnoticed");
        }
    }
}
