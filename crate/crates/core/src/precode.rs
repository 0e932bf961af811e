//! Sender-side precoders.
//!
//! Baselines ([`svd_precoder`], [`zf_precoder`], [`mmse_precoder`]) need the
//! receiver to equalize with the sender's channel. The anonymous precoders
//! ([`im_anonymous_precoder`], [`ci_anonymous_precoder`]) restrict the
//! transmit vector to the anonymity subspace
//!
//! ```text
//!     S = { x : (I − P_j) H_k x = 0  for every alias j }
//! ```
//!
//! so that `H_k x` lies in the range of every alias channel and the
//! receiver's reconstruction residual is identical across the anonymity set.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::airlink::{ChannelSet, Constellation};
use crate::numerics::{
    self, bisect_max_margin, complexify_vector, min_norm_qp, realify_matrix, ComplexMatrix,
    ComplexVector, NumericsError, QpProblem, QpStatus,
};

/// Bisection seed for the CI margin bracket, in amplitude units.
pub const CI_BRACKET_SEED: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecodeError {
    #[error("alias set is empty")]
    NoAliases,
    #[error("alias set contains the true sender {0}")]
    AliasIsSender(usize),
    #[error("candidate index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("anonymity subspace is empty for this geometry")]
    EmptySubspace,
    #[error("{streams} streams exceed the available dimension {dim}")]
    TooManyStreams { streams: usize, dim: usize },
    #[error("designated channel block is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Orthonormal basis of the anonymity subspace for one sender/alias set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnonymitySubspace {
    basis: ComplexMatrix,
    aliases: Vec<usize>,
}

impl AnonymitySubspace {
    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn aliases(&self) -> &[usize] {
        &self.aliases
    }
}

/// Receiver-side metadata for the SVD baseline: `ŝ ∝ Σ_d⁻¹ U_dᴴ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdEqualizer {
    pub u_d: ComplexMatrix,
    pub sigma_d: DVector<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeResult {
    pub x: ComplexVector,
    /// Per-antenna gain `g` (IM, ZF and the other baselines) or CI margin `t*`.
    pub gain_or_margin: f64,
    pub feasible: bool,
    pub diagnostics: Diagnostics,
    /// True sender plus aliases covered by the anonymity constraint.
    pub anonymity_set: Vec<usize>,
    pub equalizer: Option<SvdEqualizer>,
}

fn check_aliases(channels: &ChannelSet, k: usize, aliases: &[usize]) -> Result<(), PrecodeError> {
    if k >= channels.len() {
        return Err(PrecodeError::IndexOutOfRange(k));
    }
    for &j in aliases {
        if j >= channels.len() {
            return Err(PrecodeError::IndexOutOfRange(j));
        }
        if j == k {
            return Err(PrecodeError::AliasIsSender(k));
        }
    }
    Ok(())
}

/// Null space of the stacked blocks `(I − P_j) H_k` over the aliases.
pub fn anonymity_subspace(
    channels: &ChannelSet,
    k: usize,
    aliases: &[usize],
) -> Result<AnonymitySubspace, PrecodeError> {
    if aliases.is_empty() {
        return Err(PrecodeError::NoAliases);
    }
    check_aliases(channels, k, aliases)?;
    let hk = channels.channel(k);
    let (nr, nt) = hk.shape();
    let mut stacked = ComplexMatrix::zeros(aliases.len() * nr, nt);
    for (slot, &j) in aliases.iter().enumerate() {
        let block = hk - channels.projector(j) * hk;
        stacked.rows_mut(slot * nr, nr).copy_from(&block);
    }
    let basis = numerics::null_space_basis_scaled(&stacked, hk.norm());
    if basis.ncols() == 0 {
        return Err(PrecodeError::EmptySubspace);
    }
    Ok(AnonymitySubspace {
        basis,
        aliases: aliases.to_vec(),
    })
}

/// Basis used by the anonymous precoders: the anonymity subspace, or the
/// whole transmit space when there are no aliases.
fn precoding_basis(
    channels: &ChannelSet,
    k: usize,
    aliases: &[usize],
) -> Result<ComplexMatrix, PrecodeError> {
    if aliases.is_empty() {
        check_aliases(channels, k, aliases)?;
        let nt = channels.n_tx();
        Ok(ComplexMatrix::identity(nt, nt))
    } else {
        Ok(anonymity_subspace(channels, k, aliases)?.basis)
    }
}

fn anonymity_set(k: usize, aliases: &[usize]) -> Vec<usize> {
    let mut set: Vec<usize> = aliases.to_vec();
    set.push(k);
    set.sort_unstable();
    set
}

/// Interference-mitigation anonymous precoder.
///
/// `x = g·B·G_D⁺ s` with `G_D` the designated rows of `H_k B`, so each
/// designated antenna receives exactly `g·s_i` and `||x||² = P`.
pub fn im_anonymous_precoder(
    channels: &ChannelSet,
    k: usize,
    aliases: &[usize],
    s: &ComplexVector,
    power: f64,
) -> Result<PrecodeResult, PrecodeError> {
    let basis = precoding_basis(channels, k, aliases)?;
    let d = s.len();
    if d > basis.ncols() {
        return Err(PrecodeError::TooManyStreams {
            streams: d,
            dim: basis.ncols(),
        });
    }
    let g_d = (channels.channel(k) * &basis).rows(0, d).into_owned();
    let rank = numerics::numerical_rank(&g_d);
    if rank < d {
        return Err(PrecodeError::RankDeficient { rank, needed: d });
    }
    let w = &basis * (numerics::pseudo_inverse(&g_d) * s);
    let gain = power.sqrt() / w.norm();
    Ok(PrecodeResult {
        x: w.scale(gain),
        gain_or_margin: gain,
        feasible: true,
        diagnostics: Diagnostics::default(),
        anonymity_set: anonymity_set(k, aliases),
        equalizer: None,
    })
}

/// Realified CI constraints `C z ≥ t` over subspace coordinates `z`.
///
/// For designated antenna `i` with rotated entry `u_i = (H_k B z)_i·conj(s_i)`
/// the two rows are `sin θ·Re u_i ∓ cos θ·Im u_i`.
fn ci_constraints(
    channels: &ChannelSet,
    k: usize,
    basis: &ComplexMatrix,
    s: &ComplexVector,
    half_angle: f64,
) -> nalgebra::DMatrix<f64> {
    let d = s.len();
    let r = basis.ncols();
    let g = channels.channel(k) * basis;
    let (sin, cos) = half_angle.sin_cos();
    let mut c = nalgebra::DMatrix::<f64>::zeros(2 * d, 2 * r);
    for i in 0..d {
        let row = g.rows(i, 1).map(|v| v * s[i].conj());
        let re_im = realify_matrix(&row);
        for col in 0..2 * r {
            let re = re_im[(0, col)];
            let im = re_im[(1, col)];
            c[(2 * i, col)] = sin * re - cos * im;
            c[(2 * i + 1, col)] = sin * re + cos * im;
        }
    }
    c
}

fn min_power_at(
    c: &nalgebra::DMatrix<f64>,
    t: f64,
    tol: f64,
    iterations: &mut usize,
) -> Result<(f64, DVector<f64>), NumericsError> {
    let p = QpProblem::new(c.clone(), DVector::from_element(c.nrows(), t))?;
    let sol = min_norm_qp(&p, tol)?;
    *iterations += sol.iterations;
    Ok(match sol.status {
        QpStatus::Optimal => (sol.objective, sol.z),
        QpStatus::Infeasible => (f64::INFINITY, DVector::zeros(c.ncols())),
    })
}

/// Minimum transmit power that places every designated antenna at CI margin
/// `margin` or deeper, with the minimizing `x`. Infinite power means the
/// margin is unreachable in this geometry.
pub fn ci_min_power(
    channels: &ChannelSet,
    k: usize,
    aliases: &[usize],
    s: &ComplexVector,
    c: &Constellation,
    margin: f64,
    tol: f64,
) -> Result<(f64, ComplexVector), PrecodeError> {
    let basis = precoding_basis(channels, k, aliases)?;
    let cons = ci_constraints(channels, k, &basis, s, c.ci_half_angle());
    let (power, z) = min_power_at(&cons, margin, tol, &mut 0)?;
    Ok((power, &basis * complexify_vector(&z)))
}

/// Constructive-interference anonymous precoder.
///
/// Maximizes the smallest CI margin over the designated antennas subject to
/// `||x||² ≤ P` and the anonymity constraint. The margin is found by
/// bisection over the minimum-power QP; the minimizer is then scaled to the
/// full budget, which only deepens every margin.
pub fn ci_anonymous_precoder(
    channels: &ChannelSet,
    k: usize,
    aliases: &[usize],
    s: &ComplexVector,
    power: f64,
    c: &Constellation,
    tol: f64,
) -> Result<PrecodeResult, PrecodeError> {
    let basis = precoding_basis(channels, k, aliases)?;
    let cons = ci_constraints(channels, k, &basis, s, c.ci_half_angle());
    let qp_tol = (tol * 1e-3).max(1e-12);
    let mut iterations = 0;
    let report = bisect_max_margin(
        |t| min_power_at(&cons, t, qp_tol, &mut iterations),
        power,
        CI_BRACKET_SEED,
        tol,
    )?;
    let z = complexify_vector(&report.z_star);
    let norm = z.norm();
    let x = if report.t_star > 0.0 && norm > 0.0 {
        (&basis * z).scale(power.sqrt() / norm)
    } else {
        ComplexVector::zeros(basis.nrows())
    };
    Ok(PrecodeResult {
        x,
        gain_or_margin: report.t_star,
        feasible: report.t_star > 0.0,
        diagnostics: Diagnostics {
            iterations,
            evaluations: report.evaluations,
        },
        anonymity_set: anonymity_set(k, aliases),
        equalizer: None,
    })
}

/// SVD baseline: `x = √P/||s||·V_d s` over the top `d` right singular vectors.
pub fn svd_precoder(h: &ComplexMatrix, s: &ComplexVector, power: f64) -> Result<PrecodeResult, PrecodeError> {
    let d = s.len();
    let (u, sigma, v) = numerics::svd_factors(h);
    let rank = numerics::numerical_rank(h);
    if rank < d {
        return Err(PrecodeError::RankDeficient { rank, needed: d });
    }
    let scale = power.sqrt() / s.norm();
    let x = v.columns(0, d) * s.scale(scale);
    Ok(PrecodeResult {
        x,
        gain_or_margin: scale,
        feasible: true,
        diagnostics: Diagnostics::default(),
        anonymity_set: Vec::new(),
        equalizer: Some(SvdEqualizer {
            u_d: u.columns(0, d).into_owned(),
            sigma_d: sigma.rows(0, d).into_owned(),
            scale,
        }),
    })
}

fn designated_block(h: &ComplexMatrix, d: usize) -> Result<ComplexMatrix, PrecodeError> {
    let h_d = h.rows(0, d).into_owned();
    let rank = numerics::numerical_rank(&h_d);
    if rank < d {
        return Err(PrecodeError::RankDeficient { rank, needed: d });
    }
    Ok(h_d)
}

fn baseline(w: ComplexVector, power: f64) -> PrecodeResult {
    let gain = power.sqrt() / w.norm();
    PrecodeResult {
        x: w.scale(gain),
        gain_or_margin: gain,
        feasible: true,
        diagnostics: Diagnostics::default(),
        anonymity_set: Vec::new(),
        equalizer: None,
    }
}

/// Zero-forcing over the designated antennas: `x ∝ H_D⁺ s`.
pub fn zf_precoder(h: &ComplexMatrix, s: &ComplexVector, power: f64) -> Result<PrecodeResult, PrecodeError> {
    let h_d = designated_block(h, s.len())?;
    Ok(baseline(numerics::pseudo_inverse(&h_d) * s, power))
}

/// Regularized ZF: `x ∝ H_Dᴴ (H_D H_Dᴴ + (dσ²/P) I)⁻¹ s`.
pub fn mmse_precoder(
    h: &ComplexMatrix,
    s: &ComplexVector,
    power: f64,
    sigma2: f64,
) -> Result<PrecodeResult, PrecodeError> {
    let d = s.len();
    let h_d = designated_block(h, d)?;
    let reg = Complex64::new(d as f64 * sigma2 / power, 0.0);
    let gram = &h_d * h_d.adjoint() + ComplexMatrix::identity(d, d) * reg;
    let rank = numerics::numerical_rank(&gram);
    let a = gram
        .lu()
        .solve(s)
        .ok_or(PrecodeError::RankDeficient { rank, needed: d })?;
    Ok(baseline(h_d.adjoint() * a, power))
}
