//! Physical-layer anonymous precoding laboratory.
//!
//! A curious receiver that knows the channels of `K` candidate senders tries
//! to tell which one transmitted by projecting the received vector onto each
//! candidate's channel range. Anonymous precoders confine the transmit vector
//! so that several candidates explain the received signal equally well, while
//! still delivering data to the receiver's designated antennas without
//! equalization.
//!
//! Modules, bottom up:
//!
//! * [`numerics`]: complex SVD kernels, realification, min-norm QP, bisection.
//! * [`airlink`]: scenario, PSK constellations, Rayleigh channels, noise.
//! * [`precode`]: SVD/ZF/MMSE baselines and the IM and CI anonymous precoders.
//! * [`detect`]: residual-based sender detection, posterior and entropy.
//! * [`harness`]: deterministic Monte Carlo trials and SNR sweeps.
//! * [`oracles`]: brute-force reference computations for verification.

pub mod airlink;
pub mod detect;
pub mod harness;
pub mod numerics;
pub mod oracles;
pub mod precode;

pub use airlink::{
    psk_constellation, AliasPolicy, ChannelMode, ChannelSet, Constellation, NoiseModel, Scenario,
};
pub use detect::DetectionReport;
pub use harness::{PrecoderId, SweepCell, SweepConfig, SweepResult, TrialOutcome};
pub use numerics::{ComplexMatrix, ComplexVector};
pub use precode::{AnonymitySubspace, PrecodeResult};
