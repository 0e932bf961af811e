#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phyanon::numerics::{ComplexMatrix, ComplexVector};
use phyanon::{psk_constellation, AliasPolicy, ChannelMode, ChannelSet, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * 0.5f64.sqrt()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| cgauss(rng))
}

/// Random matrix of the given rank (generically), built as a product.
pub fn random_rank(rng: &mut impl Rng, rows: usize, cols: usize, rank: usize) -> ComplexMatrix {
    random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols)
}

pub fn real_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn real_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_channels(rng: &mut impl Rng, k: usize, nr: usize, nt: usize) -> ChannelSet {
    ChannelSet::from_channels((0..k).map(|_| random_matrix(rng, nr, nt)).collect())
}

pub fn random_symbols(rng: &mut impl Rng, order: usize, d: usize) -> ComplexVector {
    let c = psk_constellation(order).unwrap();
    ComplexVector::from_fn(d, |_, _| c.point(rng.random_range(0..order)))
}

pub fn reference_scenario(policy: AliasPolicy) -> Scenario {
    Scenario::new(
        5,
        10,
        11,
        4,
        psk_constellation(4).unwrap(),
        1.0,
        policy,
        ChannelMode::Block,
    )
    .unwrap()
}

/// Largest absolute entry, for relative comparisons.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
