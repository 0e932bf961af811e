//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p phyanon-cli --test acceptance -- --nocapture` to see them.
//!
//! The link-level criteria share one sweep on the reference geometry: K = 5
//! candidates, 10 transmit and 11 receive antennas, 4 QPSK streams, 1 W,
//! full anonymity, 10⁴ trials per point.

use std::collections::HashMap;
use std::fs;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use phyanon::detect::{declare, residuals, DEFAULT_TIE_TOL};
use phyanon::harness::{run_sweep, SweepConfig};
use phyanon::numerics::{bisect_max_margin, realify_vector};
use phyanon::oracles::grid_max_margin;
use phyanon::precode::ci_min_power;
use phyanon::{
    airlink::{modulate, sample_channel_set},
    psk_constellation, AliasPolicy, ChannelMode, ComplexVector, PrecoderId, Scenario, SweepCell,
};
use phyanon_cli::selftest::{run_suite, Suite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TRIALS: usize = 10_000;
const MASTER_SEED: u64 = 2024;
const SWEEP_BUDGET: Duration = Duration::from_secs(300);

fn reference_scenario() -> Scenario {
    Scenario::new(
        5,
        10,
        11,
        4,
        psk_constellation(4).unwrap(),
        1.0,
        AliasPolicy::All,
        ChannelMode::Block,
    )
    .unwrap()
}

fn snr_grid() -> Vec<f64> {
    (0..=15).map(|i| 2.0 * i as f64).collect()
}

struct Sweeps {
    series: HashMap<PrecoderId, Vec<SweepCell>>,
    elapsed: HashMap<PrecoderId, Duration>,
}

/// One sweep per precoder, timed separately and computed once.
fn sweeps() -> &'static Sweeps {
    static SWEEPS: OnceLock<Sweeps> = OnceLock::new();
    SWEEPS.get_or_init(|| {
        let scenario = reference_scenario();
        let cfg = SweepConfig::new(snr_grid(), TRIALS, MASTER_SEED);
        let mut series = HashMap::new();
        let mut elapsed = HashMap::new();
        for p in [PrecoderId::Svd, PrecoderId::Zf, PrecoderId::ImAnon, PrecoderId::CiAnon] {
            let start = Instant::now();
            let result = run_sweep(&scenario, &[p], &cfg).unwrap();
            elapsed.insert(p, start.elapsed());
            series.insert(p, result.cells);
        }
        Sweeps { series, elapsed }
    })
}

fn series(p: PrecoderId) -> &'static [SweepCell] {
    &sweeps().series[&p]
}

fn at(p: PrecoderId, snr: f64) -> &'static SweepCell {
    series(p).iter().find(|c| c.snr_db == snr).unwrap()
}

fn report(id: &str, pass: bool, detail: String) {
    println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

/// SNR where the SER curve first crosses `target`, interpolated linearly in
/// log10(SER) between grid points.
fn snr_at_ser(cells: &[SweepCell], target: f64) -> Option<f64> {
    let first = cells.first()?;
    if first.ser <= target {
        return Some(first.snr_db);
    }
    cells.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.ser > target && b.ser <= target).then(|| {
            if b.ser == 0.0 {
                return b.snr_db;
            }
            let (la, lb, lt) = (a.ser.log10(), b.ser.log10(), target.log10());
            a.snr_db + (b.snr_db - a.snr_db) * (la - lt) / (la - lb)
        })
    })
}

#[test]
fn c1_full_anonymity_der() {
    let mut pass = true;
    let mut notes = Vec::new();
    for p in [PrecoderId::ImAnon, PrecoderId::CiAnon] {
        let high: Vec<&SweepCell> = series(p).iter().filter(|c| c.snr_db >= 15.0).collect();
        let lo = high.iter().map(|c| c.der).fold(f64::INFINITY, f64::min);
        let hi = high.iter().map(|c| c.der).fold(f64::NEG_INFINITY, f64::max);
        let secs = sweeps().elapsed[&p].as_secs_f64();
        pass &= lo >= 0.77 && hi <= 0.83 && sweeps().elapsed[&p] < SWEEP_BUDGET;
        notes.push(format!("{p} DER in [{lo:.4}, {hi:.4}] over SNR ≥ 15 dB, sweep {secs:.0} s"));
    }
    report("C1 full-anonymity DER in [0.77, 0.83]", pass, notes.join("; "));
}

#[test]
fn c2_baseline_detectability() {
    let svd = series(PrecoderId::Svd);
    let der10 = at(PrecoderId::Svd, 10.0).der;
    let der20 = at(PrecoderId::Svd, 20.0).der;
    let broken: Vec<String> = svd
        .windows(2)
        .filter(|w| w[0].snr_db >= 0.0 && w[1].der_ci.0 > w[0].der_ci.1)
        .map(|w| format!("{}→{} dB", w[0].snr_db, w[1].snr_db))
        .collect();
    let pass = der10 <= 0.05 && der20 <= 0.01 && broken.is_empty();
    report(
        "C2 SVD DER ≤ 0.05 @10 dB, ≤ 0.01 @20 dB, monotone",
        pass,
        format!(
            "DER(10 dB) = {der10:.4}, DER(20 dB) = {der20:.4}, monotonicity breaks: {}",
            if broken.is_empty() { "none".to_string() } else { broken.join(", ") }
        ),
    );
}

#[test]
fn c3_ser_ordering_and_gain() {
    let ci_snr = snr_at_ser(series(PrecoderId::CiAnon), 1e-2);
    let zf_snr = snr_at_ser(series(PrecoderId::Zf), 1e-2);
    let gain = match (ci_snr, zf_snr) {
        (Some(ci), Some(zf)) => zf - ci,
        (Some(_), None) => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    let gain_ok = gain >= 6.0;

    let ci_vs_im: Vec<f64> = series(PrecoderId::CiAnon)
        .iter()
        .zip(series(PrecoderId::ImAnon))
        .filter(|(ci, im)| ci.ser_ci.0 > im.ser_ci.1)
        .map(|(ci, _)| ci.snr_db)
        .collect();

    let im_vs_svd: Vec<f64> = series(PrecoderId::ImAnon)
        .iter()
        .zip(series(PrecoderId::Svd))
        .filter(|(im, _)| im.snr_db >= 12.0)
        .filter(|(im, svd)| im.ser >= svd.ser)
        .map(|(im, _)| im.snr_db)
        .collect();

    let pass = gain_ok && ci_vs_im.is_empty() && im_vs_svd.is_empty();
    report(
        "C3 CI ≥ 6 dB over ZF at SER 1e-2, CI ≤ IM, IM < SVD above 12 dB",
        pass,
        format!(
            "SNR@1e-2: ci_anon {}, zf {} (gain {gain:.2} dB); CI > IM at {:?}; IM ≥ SVD at {:?}",
            ci_snr.map_or("not reached".into(), |v| format!("{v:.2} dB")),
            zf_snr.map_or("not reached".into(), |v| format!("{v:.2} dB")),
            ci_vs_im,
            im_vs_svd
        ),
    );
}

#[test]
fn c4_noiseless_exactness() {
    let r = run_suite(Suite::AnonymityResidual, 100, false, 404);
    report(
        "C4 noiseless exactness (100 instances)",
        r.passed(),
        format!("{} failures, worst error/tolerance {:.3e}", r.failures, r.score),
    );
}

#[test]
fn c5_solver_oracles() {
    let qp = run_suite(Suite::QpOracle, 200, false, 505);

    let qpsk = psk_constellation(4).unwrap();
    let scenario = reference_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(506);
    let tol = 1e-3;
    let mut worst: f64 = 0.0;
    let mut misses = 0;
    for _ in 0..50 {
        let channels = sample_channel_set(&scenario, rng.random()).unwrap();
        let k = rng.random_range(0..5);
        let aliases: Vec<usize> = (0..5).filter(|&j| j != k).collect();
        let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let s = modulate(&idx, &qpsk).unwrap();
        let probe = |t: f64| -> (f64, ComplexVector) {
            ci_min_power(&channels, k, &aliases, &s, &qpsk, t, 1e-12).unwrap()
        };
        let bis = bisect_max_margin(
            |t| {
                let (p, x) = probe(t);
                Ok((p, realify_vector(&x)))
            },
            1.0,
            1.0,
            tol,
        )
        .unwrap();
        let t_max = bis.history[0].1;
        let grid = grid_max_margin(|t| probe(t).0, 1.0, tol, t_max);
        let gap = (bis.t_star - grid).abs();
        worst = worst.max(gap);
        misses += (gap > tol) as usize;
    }
    report(
        "C5 QP vs enumeration (200) and bisection vs grid (50)",
        qp.passed() && misses == 0,
        format!(
            "QP: {} failures, worst error/tolerance {:.3e}; bisection: {misses} misses, worst gap {worst:.2e} (tol {tol:e})",
            qp.failures, qp.score
        ),
    );
}

#[test]
fn c6_detector_oracles() {
    let scenario = reference_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let channels = sample_channel_set(&scenario, rng.random()).unwrap();
        let y = ComplexVector::from_fn(11, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let d = residuals(&y, &channels);
        for (j, dj) in d.iter().enumerate() {
            let q = channels.basis(j);
            let identity = y.norm_squared() - (q.adjoint() * &y).norm_squared();
            worst = worst.max((dj * dj - identity).abs() / y.norm_squared());
        }
    }
    let identity_ok = worst <= 1e-10;

    // Uniform tie breaking over groups of size 2 and 5: χ² against the 1%
    // critical values for 1 and 4 degrees of freedom.
    let draws = 10_000;
    let mut chi = Vec::new();
    for (size, critical) in [(2usize, 6.635), (5, 13.277)] {
        let mut counts = vec![0usize; size];
        let tied = vec![0.25; size];
        for _ in 0..draws {
            counts[declare(&tied, DEFAULT_TIE_TOL, &mut rng)] += 1;
        }
        let expected = draws as f64 / size as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        chi.push((size, stat, critical));
    }
    let chi_ok = chi.iter().all(|(_, s, c)| s < c);
    let chi_text: Vec<String> = chi
        .iter()
        .map(|(n, s, c)| format!("|T|={n}: χ² = {s:.2} < {c}"))
        .collect();
    report(
        "C6 residual identity and uniform tie breaking",
        identity_ok && chi_ok,
        format!("worst identity error {worst:.2e} (≤ 1e-10); {}", chi_text.join(", ")),
    );
}

#[test]
fn c7_entropy_metric() {
    let target = 0.95 * 5f64.log2();
    let mut pass = true;
    let mut notes = Vec::new();
    for p in [PrecoderId::ImAnon, PrecoderId::CiAnon] {
        let low = series(p)
            .iter()
            .filter(|c| c.snr_db >= 15.0)
            .map(|c| c.mean_entropy_bits)
            .fold(f64::INFINITY, f64::min);
        pass &= low >= target;
        notes.push(format!("{p} min entropy over SNR ≥ 15 dB = {low:.4} bits"));
    }
    let svd20 = at(PrecoderId::Svd, 20.0).mean_entropy_bits;
    pass &= svd20 <= 0.2;
    notes.push(format!("svd at 20 dB = {svd20:.4} bits"));
    report(
        &format!("C7 entropy ≥ {target:.4} bits anonymous, ≤ 0.2 bits SVD @20 dB"),
        pass,
        notes.join("; "),
    );
}

#[test]
fn c8_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("repro.cfg");
    fs::write(
        &cfg,
        "scenario.k = 5\nscenario.nt = 10\nscenario.nr = 11\nscenario.streams = 4\n\
         sweep.snr_db = 0, 10, 20, inf\nsweep.trials = 300\nseed = 8\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (run, workers) in ["1", "4", "1", "2"].into_iter().enumerate() {
        let out = dir.path().join(format!("r{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_phyanon"))
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    report(
        "C8 byte-identical CSV across runs and worker counts",
        identical,
        format!("4 runs (workers 1, 4, 1, 2), {} bytes each", outputs[0].len()),
    );
}

#[test]
fn interpolation_helper() {
    let cell = |snr_db: f64, ser: f64| SweepCell {
        snr_db,
        precoder: PrecoderId::Zf,
        der: 0.0,
        der_ci: (0.0, 0.0),
        ser,
        ser_ci: (ser, ser),
        mean_entropy_bits: 0.0,
        trials: 1,
        infeasible: 0,
        detection_errors: 0,
        symbol_errors: 0,
        symbols: 1,
        infeasible_reason: None,
    };
    let cells = vec![cell(0.0, 1e-1), cell(10.0, 1e-3)];
    assert!((snr_at_ser(&cells, 1e-2).unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(snr_at_ser(&cells, 1e-4), None);
    assert_eq!(snr_at_ser(&cells, 0.5), Some(0.0));
}
