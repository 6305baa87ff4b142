//! Analytic secret-key rates for direct fiber links and n-trunk
//! teleportation relays.
//!
//! A direct link detects correctly with `C = tη` and incorrectly with
//! `Q = (1−tη)D`. Splitting the channel into `n` equal trunks (odd `n`, each
//! with transmission `t^{1/n}`) and chaining `(n−1)/2` Bell measurements
//! gives `C = (1/2)^{(n−1)/2}·t·η^n` and
//! `Q = (t^{1/n}η + (1−t^{1/n}η)·D)^n − t·η^n`. The net rate after error
//! correction and privacy amplification uses the linear approximation
//! `R_net = R_raw·(1 − QBER/15%) = C − (85/15)·Q` and is reported signed, so
//! root finding over distance is well-posed.

use serde::Serialize;
use thiserror::Error;

use crate::Real;

/// QBER at which the net rate crosses zero in the linear approximation.
pub const QBER_CUTOFF: f64 = 0.15;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("detector efficiency must lie in (0, 1] (got {eta})")]
    BadEfficiency { eta: f64 },
    #[error("dark-count probability must lie in [0, 1) (got {dark})")]
    BadDarkCount { dark: f64 },
    #[error("trunk count must be an odd positive integer (got {n})")]
    BadTrunkCount { n: u32 },
    #[error("attenuation must be positive and length non-negative (got {alpha} dB/km, {length} km)")]
    BadLink { alpha: f64, length: f64 },
    #[error("optical error floor must lie in [0, 1) (got {value})")]
    BadOpticalError { value: f64 },
    #[error("net rate is not positive even at zero distance")]
    NoPositiveRateRegion,
    #[error("grid must be non-empty")]
    EmptyGrid,
}

/// Photon-counting detector: efficiency `η` and dark-count probability `D`
/// per transmission, with an optional constant optical-error floor that
/// reclassifies a fraction of correct detections as errors (default 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorModel<R> {
    pub eta: R,
    pub dark: R,
    pub optical_error: R,
}

impl<R: Real> DetectorModel<R> {
    pub fn new(eta: R, dark: R) -> Result<Self, RateError> {
        Self::with_optical_error(eta, dark, R::zero())
    }

    pub fn with_optical_error(eta: R, dark: R, optical_error: R) -> Result<Self, RateError> {
        if eta <= R::zero() || eta > R::one() {
            return Err(RateError::BadEfficiency { eta: eta.to_f64().unwrap_or(f64::NAN) });
        }
        if dark < R::zero() || dark >= R::one() {
            return Err(RateError::BadDarkCount { dark: dark.to_f64().unwrap_or(f64::NAN) });
        }
        if optical_error < R::zero() || optical_error >= R::one() {
            return Err(RateError::BadOpticalError {
                value: optical_error.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { eta, dark, optical_error })
    }

    /// The operating point discussed throughout: `η = 0.25`, `D = 1e-4`.
    pub fn reference() -> Self {
        Self {
            eta: R::from_f64(0.25).unwrap(),
            dark: R::from_f64(1e-4).unwrap(),
            optical_error: R::zero(),
        }
    }
}

/// Fiber link: attenuation `α` (dB/km), end-to-end length `L` (km) and an
/// odd trunk count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkParams<R> {
    pub alpha_db_per_km: R,
    pub length_km: R,
    pub n_trunks: u32,
}

impl<R: Real> LinkParams<R> {
    pub fn new(alpha_db_per_km: R, length_km: R, n_trunks: u32) -> Result<Self, RateError> {
        if alpha_db_per_km <= R::zero() || length_km < R::zero() {
            return Err(RateError::BadLink {
                alpha: alpha_db_per_km.to_f64().unwrap_or(f64::NAN),
                length: length_km.to_f64().unwrap_or(f64::NAN),
            });
        }
        check_trunks(n_trunks)?;
        Ok(Self { alpha_db_per_km, length_km, n_trunks })
    }

    /// Reference attenuation `α = 0.25` dB/km.
    pub fn reference_alpha() -> R {
        R::from_f64(0.25).unwrap()
    }
}

fn check_trunks(n: u32) -> Result<(), RateError> {
    if n == 0 || n % 2 == 0 {
        return Err(RateError::BadTrunkCount { n });
    }
    Ok(())
}

/// Per-pulse detection rates at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport<R> {
    pub c: R,
    pub q: R,
    pub r_raw: R,
    pub qber: R,
    pub r_net: R,
}

impl<R: Real> RateReport<R> {
    fn from_rates(c: R, q: R) -> Self {
        let r_raw = c + q;
        let qber = if r_raw > R::zero() { q / r_raw } else { R::zero() };
        let slope = R::from_f64((1.0 - QBER_CUTOFF) / QBER_CUTOFF).unwrap();
        Self { c, q, r_raw, qber, r_net: c - slope * q }
    }
}

/// Fiber transmission `t = 10^{−αL/10}`.
pub fn transmission<R: Real>(alpha_db_per_km: R, length_km: R) -> R {
    let ten = R::from_f64(10.0).unwrap();
    ten.powf(-alpha_db_per_km * length_km / ten)
}

fn apply_optical_error<R: Real>(c: R, q: R, det: &DetectorModel<R>) -> (R, R) {
    let flipped = c * det.optical_error;
    (c - flipped, q + flipped)
}

/// Direct-link rates: `C = tη`, `Q = (1−tη)·D`.
pub fn rates_direct<R: Real>(t: R, det: &DetectorModel<R>) -> RateReport<R> {
    let c = t * det.eta;
    let q = (R::one() - c) * det.dark;
    let (c, q) = apply_optical_error(c, q, det);
    RateReport::from_rates(c, q)
}

/// n-trunk relay rates; `n = 1` coincides exactly with [`rates_direct`].
pub fn rates_relay<R: Real>(n: u32, t: R, det: &DetectorModel<R>) -> Result<RateReport<R>, RateError> {
    check_trunks(n)?;
    if n == 1 {
        return Ok(rates_direct(t, det));
    }
    let s = t.powf(R::from_u32(n).unwrap().recip()) * det.eta;
    let half = R::from_f64(0.5).unwrap();
    let bell_factor = half.powi(((n - 1) / 2) as i32);
    let c = bell_factor * t * det.eta.powi(n as i32);
    // q = (s + x)^n − s^n with x = (1−s)D, evaluated through the exact
    // factorization x·Σ_k (s+x)^k·s^{n−1−k} to avoid the cancellation of
    // two nearly equal powers when D is small.
    let x = (R::one() - s) * det.dark;
    let a = s + x;
    let mut series = R::zero();
    for k in 0..n {
        series += a.powi(k as i32) * s.powi((n - 1 - k) as i32);
    }
    let q = x * series;
    let (c, q) = apply_optical_error(c, q, det);
    Ok(RateReport::from_rates(c, q))
}

/// The incorrect-detection rate written as the explicit event sum over
/// `k = 1..n` dark counts among the firing detectors,
/// `Σ_k C(n,k)·(1−s)^k·D^k·s^{n−k}`. Algebraically equal to the closed form
/// in [`rates_relay`]; kept as an independent route for cross-checking.
pub fn q_relay_event_sum<R: Real>(n: u32, t: R, det: &DetectorModel<R>) -> Result<R, RateError> {
    check_trunks(n)?;
    let s = t.powf(R::from_u32(n).unwrap().recip()) * det.eta;
    let mut total = R::zero();
    let mut binom = R::one();
    for k in 1..=n {
        // running binomial coefficient C(n, k)
        binom = binom * R::from_u32(n - k + 1).unwrap() / R::from_u32(k).unwrap();
        total += binom
            * ((R::one() - s) * det.dark).powi(k as i32)
            * s.powi((n - k) as i32);
    }
    Ok(total)
}

/// One row of a rate-versus-distance sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveRow<R> {
    pub l_km: R,
    pub n: u32,
    #[serde(flatten)]
    pub report: RateReport<R>,
}

/// Net-rate curves over a distance grid for each trunk count.
pub fn r_net_curve<R: Real>(
    lengths_km: &[R],
    trunk_counts: &[u32],
    det: &DetectorModel<R>,
    alpha_db_per_km: R,
) -> Result<Vec<CurveRow<R>>, RateError> {
    if lengths_km.is_empty() || trunk_counts.is_empty() {
        return Err(RateError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(lengths_km.len() * trunk_counts.len());
    for &n in trunk_counts {
        check_trunks(n)?;
        for &l in lengths_km {
            let report = rates_relay(n, transmission(alpha_db_per_km, l), det)?;
            rows.push(CurveRow { l_km: l, n, report });
        }
    }
    Ok(rows)
}

/// Maximum distance at which the net rate stays positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MaxDistance<R> {
    /// Root of `R_net(L) = 0`, to 1e-3 km.
    FiniteKm(R),
    /// Noiseless detectors: the net rate never crosses zero.
    NoFiniteLimit,
}

pub fn max_distance<R: Real>(
    n: u32,
    det: &DetectorModel<R>,
    alpha_db_per_km: R,
) -> Result<MaxDistance<R>, RateError> {
    check_trunks(n)?;
    let r_net_at = |l: R| -> Result<R, RateError> {
        Ok(rates_relay(n, transmission(alpha_db_per_km, l), det)?.r_net)
    };
    if r_net_at(R::zero())? <= R::zero() {
        return Err(RateError::NoPositiveRateRegion);
    }
    if det.dark == R::zero() && det.optical_error == R::zero() {
        return Ok(MaxDistance::NoFiniteLimit);
    }
    let mut lo = R::zero();
    let mut hi = R::from_f64(100.0).unwrap();
    let cap = R::from_f64(1e7).unwrap();
    while r_net_at(hi)? > R::zero() {
        hi = hi * R::from_f64(2.0).unwrap();
        if hi > cap {
            return Ok(MaxDistance::NoFiniteLimit);
        }
    }
    let tol = R::from_f64(1e-3).unwrap();
    while hi - lo > tol {
        let mid = (lo + hi) * R::from_f64(0.5).unwrap();
        if r_net_at(mid)? > R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxDistance::FiniteKm((lo + hi) * R::from_f64(0.5).unwrap()))
}

/// Best trunk count at a fixed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OptimalN<R> {
    Best { n: u32, r_net: R },
    /// No odd `n ≤ n_max` yields a positive net rate.
    LinkDead,
}

/// Argmax of `R_net` over odd `n ∈ [1, n_max]`; ties go to the smaller `n`.
pub fn optimal_n<R: Real>(
    length_km: R,
    det: &DetectorModel<R>,
    alpha_db_per_km: R,
    n_max: u32,
) -> Result<OptimalN<R>, RateError> {
    check_trunks(n_max)?;
    let t = transmission(alpha_db_per_km, length_km);
    let mut best: Option<(u32, R)> = None;
    for n in (1..=n_max).step_by(2) {
        let r_net = rates_relay(n, t, det)?.r_net;
        if best.map_or(true, |(_, b)| r_net > b) {
            best = Some((n, r_net));
        }
    }
    match best {
        Some((n, r_net)) if r_net > R::zero() => Ok(OptimalN::Best { n, r_net }),
        _ => Ok(OptimalN::LinkDead),
    }
}
