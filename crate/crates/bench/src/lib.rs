//! Fixed inputs for the kernel benchmarks, built on the reference geometry
//! (5 candidates, 10x11 channels, 4 QPSK streams, 1 W).

use nalgebra::{DMatrix, DVector};
use phyanon::airlink::{modulate, sample_channel_set};
use phyanon::numerics::QpProblem;
use phyanon::{psk_constellation, AliasPolicy, ChannelMode, ChannelSet, ComplexVector, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference_scenario() -> Scenario {
    Scenario::new(
        5,
        10,
        11,
        4,
        psk_constellation(4).expect("qpsk"),
        1.0,
        AliasPolicy::All,
        ChannelMode::Block,
    )
    .expect("valid geometry")
}

pub struct LinkFixture {
    pub scenario: Scenario,
    pub channels: ChannelSet,
    pub sender: usize,
    pub aliases: Vec<usize>,
    pub symbols: ComplexVector,
}

pub fn link_fixture(seed: u64) -> LinkFixture {
    let scenario = reference_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = sample_channel_set(&scenario, rng.random()).expect("full-rank draw");
    let sender = rng.random_range(0..5);
    let aliases = (0..5).filter(|&j| j != sender).collect();
    let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
    let symbols = modulate(&idx, scenario.constellation()).expect("indices in range");
    LinkFixture {
        scenario,
        channels,
        sender,
        aliases,
        symbols,
    }
}

/// Feasible min-norm QP with `m` constraints over `n` variables.
pub fn qp_fixture(m: usize, n: usize, seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..0.5));
    QpProblem::new(c, b).expect("finite instance")
}
