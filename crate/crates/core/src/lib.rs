//! Simulation and rate analysis for time-bin qubit quantum communication.
//!
//! The crate has four layers:
//!
//! - [`fock`]: a sparse state-vector engine over truncated Fock occupation
//!   states of (spatial channel, time-bin) modes, with linear-optical
//!   elements and projective detection.
//! - [`protocol`]: the teleportation protocol built on top of it — state
//!   preparation, singlet Bell-state measurement by two independent routes,
//!   a two-knob noise channel, and fidelity/visibility figures.
//! - [`rates`]: analytic secret-key rates for direct fiber links and
//!   n-trunk teleportation relays, with maximum-distance and optimal-n
//!   searches.
//! - [`mc`]: an event-level Monte Carlo of the relay used as an independent
//!   cross-check of the analytic rates.
//!
//! All numerics are generic over the scalar type through the [`Real`]
//! trait; concrete `f64` aliases for the main types live at the crate root.

pub mod fock;
pub mod mc;
pub mod protocol;
pub mod rates;

/// Floating-point scalar the simulation is generic over: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
}
impl Real for f32 {}
impl Real for f64 {}

pub type StateVector64 = fock::StateVector<f64>;
pub type TimeBinQubit64 = protocol::TimeBinQubit<f64>;
pub type DensityMatrix64 = protocol::DensityMatrix<f64>;
pub type NoiseKnobs64 = protocol::NoiseKnobs<f64>;
pub type TeleportReport64 = protocol::TeleportReport<f64>;
pub type DetectorModel64 = rates::DetectorModel<f64>;
pub type LinkParams64 = rates::LinkParams<f64>;
pub type RateReport64 = rates::RateReport<f64>;
pub type McEstimate64 = mc::McEstimate<f64>;

pub type StateVector32 = fock::StateVector<f32>;
pub type DetectorModel32 = rates::DetectorModel<f32>;
pub type RateReport32 = rates::RateReport<f32>;

pub(crate) fn uniform<R: Real>(rng: &mut impl rand::RngCore) -> R {
    // 53 uniform bits, enough for either scalar width
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    R::from_f64(u).unwrap()
}
