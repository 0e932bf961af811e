//! System model: scenario, PSK constellations with constructive-interference
//! geometry, Rayleigh flat-fading channels and receiver noise.
//!
//! The receiver never equalizes anonymous transmissions; each designated
//! receive antenna is demodulated on its own by phase sector. Designated
//! antennas are receive antennas `0..n_streams`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::{self, ComplexMatrix, ComplexVector};

/// Retries allowed when a sampled channel is rank deficient.
const MAX_RANK_RETRIES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirlinkError {
    #[error("unsupported PSK order {0} (expected 2, 4 or 8)")]
    UnsupportedOrder(usize),
    #[error("symbol index {index} out of range for {order}-PSK")]
    IndexOutOfRange { index: usize, order: usize },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("noise variance must be positive and finite, got {0}")]
    NoiseVariance(f64),
    #[error("channel {0} stayed rank deficient after {MAX_RANK_RETRIES} draws")]
    RankRetriesExhausted(usize),
}

/// Unit-energy M-PSK constellation.
///
/// Point `m` sits at angle `offset + 2πm/M` and carries Gray label
/// `m ^ (m >> 1)`. The offsets are 0 (BPSK), π/4 (QPSK) and π/8 (8PSK), so
/// QPSK index 0 is `(1+i)/√2` with label `00`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    offset: f64,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

/// Builds the M-PSK constellation for `order` ∈ {2, 4, 8}.
pub fn psk_constellation(order: usize) -> Result<Constellation, AirlinkError> {
    let offset = match order {
        2 => 0.0,
        4 => PI / 4.0,
        8 => PI / 8.0,
        _ => return Err(AirlinkError::UnsupportedOrder(order)),
    };
    let points = (0..order)
        .map(|m| Complex64::from_polar(1.0, offset + 2.0 * PI * m as f64 / order as f64))
        .collect();
    let labels = (0..order as u32).map(|m| m ^ (m >> 1)).collect();
    Ok(Constellation {
        order,
        offset,
        points,
        labels,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Gray bit label of each point.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Half-angle of each decision sector, π/M.
    pub fn ci_half_angle(&self) -> f64 {
        PI / self.order as f64
    }

    pub fn name(&self) -> &'static str {
        match self.order {
            2 => "bpsk",
            4 => "qpsk",
            _ => "8psk",
        }
    }

    /// Decision for a single sample. Sector `m` is the half-open arc
    /// `[φ_m − π/M, φ_m + π/M)`, so boundaries go counterclockwise.
    pub fn decide(&self, y: Complex64) -> usize {
        let width = 2.0 * PI / self.order as f64;
        let a = (y.arg() - (self.offset - 0.5 * width)).rem_euclid(2.0 * PI);
        ((a / width).floor() as usize) % self.order
    }
}

/// Looks up the constellation point for every index.
pub fn modulate(indices: &[usize], c: &Constellation) -> Result<ComplexVector, AirlinkError> {
    indices
        .iter()
        .map(|&i| {
            c.points
                .get(i)
                .copied()
                .ok_or(AirlinkError::IndexOutOfRange {
                    index: i,
                    order: c.order,
                })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ComplexVector::from_vec)
}

/// Phase-sector decision per entry, no equalization.
pub fn demodulate(received: &[Complex64], c: &Constellation) -> Vec<usize> {
    received.iter().map(|&y| c.decide(y)).collect()
}

/// Distance of `u` (rotated so the nominal symbol lies on the positive real
/// axis) to the nearer sector boundary; negative outside the sector.
pub fn ci_margin(u: Complex64, half_angle: f64) -> f64 {
    u.re * half_angle.sin() - u.im.abs() * half_angle.cos()
}

/// Which candidates the anonymous precoders must make indistinguishable from
/// the true sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AliasPolicy {
    /// Every other candidate.
    All,
    /// One other candidate chosen uniformly per transmission.
    RandomOne,
    /// A fixed set; the true sender is removed from it at use time.
    Fixed(Vec<usize>),
}

impl AliasPolicy {
    /// Nominal alias-set size used by the load-time feasibility check.
    pub fn set_size(&self, k_candidates: usize) -> usize {
        match self {
            AliasPolicy::All => k_candidates - 1,
            AliasPolicy::RandomOne => 1,
            AliasPolicy::Fixed(set) => set.len(),
        }
    }

    /// Aliases for true sender `k`, sorted ascending.
    pub fn select<R: Rng + ?Sized>(&self, k: usize, k_candidates: usize, rng: &mut R) -> Vec<usize> {
        match self {
            AliasPolicy::All => (0..k_candidates).filter(|&j| j != k).collect(),
            AliasPolicy::RandomOne => {
                let draw = rng.random_range(0..k_candidates - 1);
                vec![if draw >= k { draw + 1 } else { draw }]
            }
            AliasPolicy::Fixed(set) => {
                let mut out: Vec<usize> = set.iter().copied().filter(|&j| j != k).collect();
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AliasPolicy::All => "all",
            AliasPolicy::RandomOne => "random_one",
            AliasPolicy::Fixed(_) => "fixed",
        }
    }
}

/// How channels evolve across Monte Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Fresh channels every trial (block fading).
    Block,
    /// The same channel set in every trial, drawn from this seed.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    k_candidates: usize,
    n_tx: usize,
    n_rx: usize,
    n_streams: usize,
    constellation: Constellation,
    power_watts: f64,
    alias_policy: AliasPolicy,
    channel_mode: ChannelMode,
}

impl Scenario {
    /// Validates every scenario invariant, including the anonymity dimension
    /// condition `d ≤ N_t − |A|(N_r − N_t)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k_candidates: usize,
        n_tx: usize,
        n_rx: usize,
        n_streams: usize,
        constellation: Constellation,
        power_watts: f64,
        alias_policy: AliasPolicy,
        channel_mode: ChannelMode,
    ) -> Result<Self, AirlinkError> {
        let bad = |msg: String| Err(AirlinkError::Scenario(msg));
        if k_candidates < 2 {
            return bad(format!("need at least 2 candidate senders, got {k_candidates}"));
        }
        if n_tx == 0 {
            return bad("need at least one transmit antenna".into());
        }
        if n_tx >= n_rx {
            return bad(format!(
                "N_t < N_r violated: nt = {n_tx}, nr = {n_rx} (residual detection needs tall channels)"
            ));
        }
        if n_streams == 0 || n_streams > n_tx {
            return bad(format!("1 ≤ streams ≤ N_t violated: streams = {n_streams}, nt = {n_tx}"));
        }
        if !(power_watts > 0.0 && power_watts.is_finite()) {
            return bad(format!("power budget must be positive, got {power_watts}"));
        }
        if let AliasPolicy::Fixed(set) = &alias_policy {
            if set.is_empty() {
                return bad("fixed alias set is empty".into());
            }
            if let Some(&j) = set.iter().find(|&&j| j >= k_candidates) {
                return bad(format!("alias index {j} out of range for k = {k_candidates}"));
            }
        }
        let alias_count = alias_policy.set_size(k_candidates);
        let dim = n_tx as i64 - (alias_count * (n_rx - n_tx)) as i64;
        if (n_streams as i64) > dim {
            return bad(format!(
                "streams exceeds anonymity dimension: d ≤ N_t − |A|(N_r − N_t) violated \
                 ({n_streams} > {n_tx} − {alias_count}·{} = {dim})",
                n_rx - n_tx
            ));
        }
        Ok(Self {
            k_candidates,
            n_tx,
            n_rx,
            n_streams,
            constellation,
            power_watts,
            alias_policy,
            channel_mode,
        })
    }

    pub fn k_candidates(&self) -> usize {
        self.k_candidates
    }
    pub fn n_tx(&self) -> usize {
        self.n_tx
    }
    pub fn n_rx(&self) -> usize {
        self.n_rx
    }
    pub fn n_streams(&self) -> usize {
        self.n_streams
    }
    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }
    pub fn power_watts(&self) -> f64 {
        self.power_watts
    }
    pub fn alias_policy(&self) -> &AliasPolicy {
        &self.alias_policy
    }
    pub fn channel_mode(&self) -> ChannelMode {
        self.channel_mode
    }

    /// Generic dimension of the anonymity subspace under the configured policy.
    pub fn anonymity_dimension(&self) -> i64 {
        self.n_tx as i64
            - (self.alias_policy.set_size(self.k_candidates) * (self.n_rx - self.n_tx)) as i64
    }
}

/// The candidate senders' channels as known to the receiver, with cached
/// range bases and projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<ComplexMatrix>,
    bases: Vec<ComplexMatrix>,
    projectors: Vec<ComplexMatrix>,
}

impl ChannelSet {
    /// Wraps explicit channel matrices, computing the cached bases.
    pub fn from_channels(channels: Vec<ComplexMatrix>) -> Self {
        let bases: Vec<ComplexMatrix> = channels.iter().map(numerics::orthonormal_range_basis).collect();
        let projectors = bases.iter().map(|q| q * q.adjoint()).collect();
        Self {
            channels,
            bases,
            projectors,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channel(&self, j: usize) -> &ComplexMatrix {
        &self.channels[j]
    }

    pub fn channels(&self) -> &[ComplexMatrix] {
        &self.channels
    }

    pub fn basis(&self, j: usize) -> &ComplexMatrix {
        &self.bases[j]
    }

    pub fn projector(&self, j: usize) -> &ComplexMatrix {
        &self.projectors[j]
    }

    pub fn n_rx(&self) -> usize {
        self.channels.first().map_or(0, |h| h.nrows())
    }

    pub fn n_tx(&self) -> usize {
        self.channels.first().map_or(0, |h| h.ncols())
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws `K` i.i.d. Rayleigh channels of shape `N_r × N_t` with unit-variance
/// circularly-symmetric entries, deterministically from `seed`.
pub fn sample_channel_set(s: &Scenario, seed: u64) -> Result<ChannelSet, AirlinkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = Vec::with_capacity(s.k_candidates);
    for j in 0..s.k_candidates {
        let mut attempt = 0;
        let h = loop {
            let h = ComplexMatrix::from_fn(s.n_rx, s.n_tx, |_, _| complex_gaussian(&mut rng, 1.0));
            if numerics::numerical_rank(&h) == s.n_tx {
                break h;
            }
            attempt += 1;
            if attempt >= MAX_RANK_RETRIES {
                return Err(AirlinkError::RankRetriesExhausted(j));
            }
        };
        channels.push(h);
    }
    Ok(ChannelSet::from_channels(channels))
}

/// Per-receive-antenna complex noise variance σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self, AirlinkError> {
        if sigma2 > 0.0 && sigma2.is_finite() {
            Ok(Self { sigma2 })
        } else {
            Err(AirlinkError::NoiseVariance(sigma2))
        }
    }

    /// `SNR_dB = 10·log10(P/σ²)`.
    pub fn from_snr_db(power_watts: f64, snr_db: f64) -> Result<Self, AirlinkError> {
        Self::new(power_watts / 10f64.powf(snr_db / 10.0))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// `y + n` with `n` i.i.d. CN(0, σ²).
pub fn add_awgn<R: Rng + ?Sized>(y: &ComplexVector, noise: &NoiseModel, rng: &mut R) -> ComplexVector {
    y.map(|v| v + complex_gaussian(rng, noise.sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk() -> Constellation {
        psk_constellation(4).unwrap()
    }

    #[test]
    fn constellation_geometry() {
        let b = psk_constellation(2).unwrap();
        assert_eq!(b.ci_half_angle(), PI / 2.0);
        assert!((b.point(0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((b.point(1) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);

        let q = qpsk();
        assert_eq!(q.ci_half_angle(), PI / 4.0);
        let h = 0.5f64.sqrt();
        assert!((q.point(0) - Complex64::new(h, h)).norm() < 1e-15);
        assert_eq!(q.labels()[0], 0b00);

        let e = psk_constellation(8).unwrap();
        assert_eq!(e.points().len(), 8);
        for m in 0..8 {
            let diff = e.labels()[m] ^ e.labels()[(m + 1) % 8];
            assert_eq!(diff.count_ones(), 1, "labels {m} and {} not Gray", (m + 1) % 8);
        }
        assert!(matches!(psk_constellation(16), Err(AirlinkError::UnsupportedOrder(16))));
    }

    #[test]
    fn modulate_examples() {
        let b = psk_constellation(2).unwrap();
        let v = modulate(&[0, 1], &b).unwrap();
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
        assert!((v[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            modulate(&[4], &qpsk()),
            Err(AirlinkError::IndexOutOfRange { index: 4, order: 4 })
        ));
    }

    #[test]
    fn demodulate_examples() {
        assert_eq!(demodulate(&[Complex64::new(0.9, 0.8)], &qpsk()), vec![0]);
        let b = psk_constellation(2).unwrap();
        assert_eq!(demodulate(&[Complex64::new(-0.1, 5.0)], &b), vec![1]);
        for order in [2, 4, 8] {
            let c = psk_constellation(order).unwrap();
            let idx: Vec<usize> = (0..order).collect();
            let v = modulate(&idx, &c).unwrap();
            assert_eq!(demodulate(v.as_slice(), &c), idx);
            assert!(v.iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn boundary_goes_counterclockwise() {
        let q = qpsk();
        // Positive imaginary axis separates sector 0 (first quadrant) from 1.
        assert_eq!(q.decide(Complex64::new(0.0, 1.0)), 1);
        assert_eq!(q.decide(Complex64::new(1.0, 0.0)), 0);
        assert_eq!(q.decide(Complex64::new(-1.0, 0.0)), 2);
        assert_eq!(q.decide(Complex64::new(0.0, -1.0)), 3);
    }

    #[test]
    fn margin_examples() {
        assert!((ci_margin(Complex64::new(1.0, 0.0), PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((ci_margin(Complex64::new(1.0, 0.0), PI / 4.0) - 0.5f64.sqrt()).abs() < 1e-15);
        let on_edge = Complex64::from_polar(2.0, PI / 4.0);
        assert!(ci_margin(on_edge, PI / 4.0).abs() < 1e-15);
    }

    fn scenario(policy: AliasPolicy) -> Result<Scenario, AirlinkError> {
        Scenario::new(5, 10, 11, 4, qpsk(), 1.0, policy, ChannelMode::Block)
    }

    #[test]
    fn scenario_validation() {
        assert!(scenario(AliasPolicy::All).is_ok());
        assert_eq!(scenario(AliasPolicy::All).unwrap().anonymity_dimension(), 6);
        let err = Scenario::new(5, 11, 11, 4, qpsk(), 1.0, AliasPolicy::All, ChannelMode::Block)
            .unwrap_err();
        assert!(err.to_string().contains("N_t < N_r"));
        let err = Scenario::new(5, 10, 12, 4, qpsk(), 1.0, AliasPolicy::All, ChannelMode::Block)
            .unwrap_err();
        assert!(err.to_string().contains("anonymity dimension"));
        assert!(scenario(AliasPolicy::Fixed(vec![])).is_err());
        assert!(scenario(AliasPolicy::Fixed(vec![7])).is_err());
        assert!(Scenario::new(1, 10, 11, 4, qpsk(), 1.0, AliasPolicy::All, ChannelMode::Block).is_err());
        assert!(Scenario::new(5, 10, 11, 4, qpsk(), 0.0, AliasPolicy::All, ChannelMode::Block).is_err());
    }

    #[test]
    fn alias_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(AliasPolicy::All.select(2, 5, &mut rng), vec![0, 1, 3, 4]);
        assert_eq!(AliasPolicy::Fixed(vec![3, 1, 2]).select(2, 5, &mut rng), vec![1, 3]);
        let mut seen = [0usize; 5];
        for _ in 0..4000 {
            let a = AliasPolicy::RandomOne.select(2, 5, &mut rng);
            assert_eq!(a.len(), 1);
            seen[a[0]] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen.iter().enumerate().all(|(j, &c)| j == 2 || (800..1200).contains(&c)));
    }

    #[test]
    fn channel_shapes_and_determinism() {
        let s = scenario(AliasPolicy::All).unwrap();
        let a = sample_channel_set(&s, 11).unwrap();
        let b = sample_channel_set(&s, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.channels().iter().all(|h| h.shape() == (11, 10)));
        assert_ne!(a, sample_channel_set(&s, 12).unwrap());
    }

    #[test]
    fn noise_model_checks() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        let n = NoiseModel::from_snr_db(1.0, 10.0).unwrap();
        assert!((n.sigma2() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn awgn_is_deterministic_under_fixed_state() {
        let n = NoiseModel::new(0.5).unwrap();
        let y = ComplexVector::zeros(8);
        let a = add_awgn(&y, &n, &mut ChaCha8Rng::seed_from_u64(9));
        let b = add_awgn(&y, &n, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
