//! Event-level Monte Carlo of the n-trunk relay.
//!
//! The trial semantics mirror the analytic bookkeeping in [`crate::rates`]:
//! each of the `n` photons independently survives its trunk and is detected
//! with probability `t^{1/n}·η`; a slot without a real detection fires as a
//! dark count with probability `D`. A trial where every slot fired counts as
//! correct with probability `(1/2)^{(n−1)/2}` when all detections were real
//! (the chained Bell measurements), and as incorrect when at least one was a
//! dark count. Everything else is no detection.
//!
//! Trials are split over a fixed number of shards with sub-seeds derived as
//! `seed ⊕ shard_index`, so results are reproducible regardless of how many
//! worker threads run them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rates::{rates_relay, DetectorModel, RateError, RateReport};
use crate::Real;

const SHARDS: u64 = 64;

/// Expected incorrect-detection events below which an estimate is marked
/// low-statistics.
pub const LOW_STATS_EVENTS: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("trial count must be >= 1")]
    NoTrials,
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Classification of a single relay transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Correct,
    Incorrect,
    NoDetection,
}

/// Monte Carlo rate estimates with one-sigma binomial errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate<R> {
    pub c_hat: R,
    pub q_hat: R,
    pub c_err: R,
    pub q_err: R,
    pub trials: u64,
    pub seed: u64,
    /// Fewer than [`LOW_STATS_EVENTS`] incorrect events were observed.
    pub low_stats: bool,
}

/// Comparison of a Monte Carlo run against the analytic rates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McComparison<R> {
    pub estimate: McEstimate<R>,
    pub analytic: RateReport<R>,
    /// `(ĉ − c)/σ_c`; `None` when the estimate has zero variance.
    pub z_c: Option<R>,
    pub z_q: Option<R>,
}

fn sample_outcome(rng: &mut ChaCha12Rng, n: u32, s: f64, dark: f64, bell_pass: f64) -> TrialOutcome {
    let mut any_dark = false;
    for _ in 0..n {
        let detected = uniform_f64(rng) < s;
        if !detected {
            if uniform_f64(rng) < dark {
                any_dark = true;
            } else {
                return TrialOutcome::NoDetection;
            }
        }
    }
    if any_dark {
        TrialOutcome::Incorrect
    } else if bell_pass >= 1.0 || uniform_f64(rng) < bell_pass {
        TrialOutcome::Correct
    } else {
        TrialOutcome::NoDetection
    }
}

fn uniform_f64(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Runs `trials` independent relay attempts and estimates the correct and
/// incorrect detection rates. Deterministic in `(inputs, seed)`.
pub fn run_trials<R: Real>(
    n: u32,
    t: R,
    det: &DetectorModel<R>,
    trials: u64,
    seed: u64,
) -> Result<McEstimate<R>, McError> {
    if trials == 0 {
        return Err(McError::NoTrials);
    }
    if n == 0 || n % 2 == 0 {
        return Err(McError::Rate(RateError::BadTrunkCount { n }));
    }
    let t64 = t.to_f64().unwrap();
    let s = t64.powf(1.0 / n as f64) * det.eta.to_f64().unwrap();
    let dark = det.dark.to_f64().unwrap();
    let bell_pass = 0.5f64.powi(((n - 1) / 2) as i32);

    let shards = SHARDS.min(trials);
    let counts: Vec<(u64, u64)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let shard_trials = trials / shards + u64::from(shard < trials % shards);
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ shard);
            let mut correct = 0u64;
            let mut incorrect = 0u64;
            for _ in 0..shard_trials {
                match sample_outcome(&mut rng, n, s, dark, bell_pass) {
                    TrialOutcome::Correct => correct += 1,
                    TrialOutcome::Incorrect => incorrect += 1,
                    TrialOutcome::NoDetection => {}
                }
            }
            (correct, incorrect)
        })
        .collect();
    let (correct, incorrect) = counts
        .iter()
        .fold((0u64, 0u64), |(c, q), &(dc, dq)| (c + dc, q + dq));

    let trials_r = R::from_u64(trials).unwrap();
    let binomial_err = |hat: R| ((hat * (R::one() - hat)) / trials_r).sqrt();
    let c_hat = R::from_u64(correct).unwrap() / trials_r;
    let q_hat = R::from_u64(incorrect).unwrap() / trials_r;
    Ok(McEstimate {
        c_hat,
        q_hat,
        c_err: binomial_err(c_hat),
        q_err: binomial_err(q_hat),
        trials,
        seed,
        low_stats: (incorrect as f64) < LOW_STATS_EVENTS,
    })
}

/// Trial count that targets [`LOW_STATS_EVENTS`] expected incorrect events,
/// clamped to `[min_trials, max_trials]`.
pub fn suggested_trials<R: Real>(
    n: u32,
    t: R,
    det: &DetectorModel<R>,
    min_trials: u64,
    max_trials: u64,
) -> Result<u64, McError> {
    let q = rates_relay(n, t, det)?.q.to_f64().unwrap();
    if q <= 0.0 {
        return Ok(max_trials);
    }
    let wanted = (LOW_STATS_EVENTS / q).ceil() as u64;
    Ok(wanted.clamp(min_trials, max_trials))
}

/// Runs trials and reports z-scores against the analytic rates.
pub fn compare<R: Real>(
    n: u32,
    t: R,
    det: &DetectorModel<R>,
    trials: u64,
    seed: u64,
) -> Result<McComparison<R>, McError> {
    let estimate = run_trials(n, t, det, trials, seed)?;
    let analytic = rates_relay(n, t, det)?;
    let z = |hat: R, err: R, truth: R| {
        if err > R::zero() {
            Some((hat - truth) / err)
        } else {
            None
        }
    };
    Ok(McComparison {
        estimate,
        analytic,
        z_c: z(estimate.c_hat, estimate.c_err, analytic.c),
        z_q: z(estimate.q_hat, estimate.q_err, analytic.q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type Det = DetectorModel<f64>;

    #[test]
    fn ideal_lossless_relay() {
        let det = Det::new(1.0, 0.0).unwrap();
        let est = run_trials(3, 1.0, &det, 200_000, 9).unwrap();
        // only all-real events are possible: q is exactly zero, c → 1/2
        assert_eq!(est.q_hat, 0.0);
        assert!((est.c_hat - 0.5).abs() < 3.0 * est.c_err);
    }

    #[test]
    fn dark_counts_only() {
        let det = Det::new(0.25, 0.05).unwrap();
        let est = run_trials(3, 0.0, &det, 2_000_000, 11).unwrap();
        assert_eq!(est.c_hat, 0.0);
        let expected = 0.05f64.powi(3);
        assert!((est.q_hat - expected).abs() < 3.0 * est.q_err.max(1e-9));
    }

    #[test]
    fn matches_analytic_rates() {
        let det = Det::reference();
        let report = compare(3, 0.1, &det, 10_000_000, 5).unwrap();
        assert!(report.z_c.unwrap().abs() < 3.0, "z_c = {:?}", report.z_c);
        assert!(report.z_q.unwrap().abs() < 3.0, "z_q = {:?}", report.z_q);

        let direct = compare(1, 0.1, &det, 2_000_000, 5).unwrap();
        assert!(direct.z_c.unwrap().abs() < 3.0);
        assert!(direct.z_q.unwrap().abs() < 3.0);
    }

    #[test]
    fn deterministic_in_seed() {
        let det = Det::reference();
        let a = run_trials(3, 0.2, &det, 500_000, 123).unwrap();
        let b = run_trials(3, 0.2, &det, 500_000, 123).unwrap();
        assert_eq!(a, b);
        let c = run_trials(3, 0.2, &det, 500_000, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn estimates_stay_in_range() {
        let det = Det::new(0.9, 0.3).unwrap();
        for seed in 0..5 {
            let est = run_trials(5, 0.8, &det, 100_000, seed).unwrap();
            assert!(est.q_hat >= 0.0);
            assert!(est.c_hat + est.q_hat <= 1.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let det = Det::reference();
        assert_eq!(run_trials(2, 0.5, &det, 100, 0).unwrap_err(), McError::Rate(RateError::BadTrunkCount { n: 2 }));
        assert_eq!(run_trials(3, 0.5, &det, 0, 0).unwrap_err(), McError::NoTrials);
    }

    #[test]
    fn suggested_trials_targets_q_events() {
        let det = Det::reference();
        let trials = suggested_trials(1, 0.1, &det, 1_000, 100_000_000).unwrap();
        let q = rates_relay(1, 0.1, &det).unwrap().q;
        assert_abs_diff_eq!(trials as f64 * q, 100.0, epsilon = 1.0);
    }

    #[test]
    fn low_stats_is_flagged() {
        let det = Det::new(0.25, 1e-6).unwrap();
        let est = run_trials(1, 1.0, &det, 10_000, 3).unwrap();
        assert!(est.low_stats);
    }
}
