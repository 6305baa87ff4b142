//! Sparse state-vector engine over a truncated Fock space of
//! (spatial channel, time-bin) modes.
//!
//! States are immutable values: every operation returns a new state and
//! renormalizes, so `Σ|amplitude|² = 1` holds after every public call.
//! Amplitudes below a small prune threshold are dropped.

use std::collections::BTreeMap;

use num_complex::Complex;
use serde_json::json;
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("state dimensions must all be >= 1 (channels {channels}, bins {bins}, cap {cap})")]
    BadDimensions { channels: usize, bins: usize, cap: u32 },
    #[error("mode (channel {channel}, bin {bin}) is outside the state dimensions")]
    ModeOutOfRange { channel: usize, bin: usize },
    #[error("operation would exceed the photon truncation cap {cap}")]
    TruncationOverflow { cap: u32 },
    #[error("delay by {bins} bins pushes occupied bins past the bin range")]
    DelayOverflow { bins: usize },
    #[error("pump amplitudes must be normalized (got squared norm {norm_sq})")]
    UnnormalizedPump { norm_sq: f64 },
    #[error("creation amplitudes must be normalized (got squared norm {norm_sq})")]
    UnnormalizedCreation { norm_sq: f64 },
    #[error("detection pattern repeats mode (channel {channel}, bin {bin})")]
    DuplicatePatternMode { channel: usize, bin: usize },
    #[error("tensor factors must share the bin count ({left} vs {right})")]
    BinMismatch { left: usize, right: usize },
}

/// A single (spatial channel, time-bin) mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeId {
    pub channel: usize,
    pub bin: usize,
}

impl ModeId {
    pub fn new(channel: usize, bin: usize) -> Self {
        Self { channel, bin }
    }
}

/// Photon counts, one per mode, in channel-major order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisState {
    occupations: Vec<u8>,
}

impl FockBasisState {
    pub fn occupations(&self) -> &[u8] {
        &self.occupations
    }

    pub fn total_photons(&self) -> u32 {
        self.occupations.iter().map(|&n| n as u32).sum()
    }
}

/// A linear-optical element acting on whole channels.
///
/// The beamsplitter maps creation operators as
/// `a† → cosθ·a† + i·e^{iφ}·sinθ·b†` and
/// `b† → i·e^{−iφ}·sinθ·a† + cosθ·b†`, independently in every time-bin;
/// `θ = π/4` is the 50/50 coupler. The delay shifts every occupied bin of a
/// channel up by `bins`; the phase advances each photon in a channel by `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearElement<R> {
    BeamSplitter { theta: R, phi: R, channels: (usize, usize) },
    Phase { phi: R, channel: usize },
    Delay { bins: usize, channel: usize },
}

/// Sparse complex state vector over the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<R: Real> {
    n_channels: usize,
    n_bins: usize,
    n_max: u32,
    terms: BTreeMap<FockBasisState, Complex<R>>,
}

fn prune_threshold<R: Real>() -> R {
    let floor = R::from_f64(1e-14).unwrap_or_else(R::epsilon);
    floor.max(R::epsilon() * R::from_f64(8.0).unwrap())
}

fn factorial<R: Real>(k: u32) -> R {
    (1..=k).fold(R::one(), |acc, i| acc * R::from_u32(i).unwrap())
}

fn binomial<R: Real>(n: u32, k: u32) -> R {
    factorial::<R>(n) / (factorial::<R>(k) * factorial::<R>(n - k))
}

impl<R: Real> StateVector<R> {
    /// The zero-photon state on `n_channels × n_bins` modes with photon
    /// cap `n_max`.
    pub fn vacuum(n_channels: usize, n_bins: usize, n_max: u32) -> Result<Self, FockError> {
        if n_channels == 0 || n_bins == 0 || n_max == 0 {
            return Err(FockError::BadDimensions {
                channels: n_channels,
                bins: n_bins,
                cap: n_max,
            });
        }
        let mut terms = BTreeMap::new();
        terms.insert(
            FockBasisState { occupations: vec![0; n_channels * n_bins] },
            Complex::new(R::one(), R::zero()),
        );
        Ok(Self { n_channels, n_bins, n_max, terms })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    fn mode_index(&self, mode: ModeId) -> Result<usize, FockError> {
        if mode.channel >= self.n_channels || mode.bin >= self.n_bins {
            return Err(FockError::ModeOutOfRange { channel: mode.channel, bin: mode.bin });
        }
        Ok(mode.channel * self.n_bins + mode.bin)
    }

    fn from_terms(
        n_channels: usize,
        n_bins: usize,
        n_max: u32,
        terms: BTreeMap<FockBasisState, Complex<R>>,
    ) -> Self {
        let mut state = Self { n_channels, n_bins, n_max, terms };
        state.prune_and_renormalize();
        state
    }

    fn prune_and_renormalize(&mut self) {
        let cutoff = prune_threshold::<R>();
        self.terms.retain(|_, amp| amp.norm() >= cutoff);
        let norm = self.norm();
        if norm > R::zero() {
            let inv = R::one() / norm;
            for amp in self.terms.values_mut() {
                *amp = amp.scale(inv);
            }
        }
    }

    pub fn norm(&self) -> R {
        self.terms.values().map(|a| a.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn amplitude(&self, occupations: &[u8]) -> Complex<R> {
        self.terms
            .get(&FockBasisState { occupations: occupations.to_vec() })
            .copied()
            .unwrap_or_else(|| Complex::new(R::zero(), R::zero()))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisState, &Complex<R>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Complex<R> {
        let mut acc = Complex::new(R::zero(), R::zero());
        for (basis, amp) in &self.terms {
            if let Some(b) = other.terms.get(basis) {
                acc += amp.conj() * *b;
            }
        }
        acc
    }

    /// Expectation of the total photon number.
    pub fn total_photons(&self) -> R {
        self.terms
            .iter()
            .map(|(basis, amp)| amp.norm_sqr() * R::from_u32(basis.total_photons()).unwrap())
            .sum()
    }

    /// Largest photon count carried by any stored basis term.
    pub fn max_term_photons(&self) -> u32 {
        self.terms.keys().map(|b| b.total_photons()).max().unwrap_or(0)
    }

    /// Applies a single creation operator and renormalizes.
    pub fn create_photon(&self, mode: ModeId) -> Result<Self, FockError> {
        self.create_superposed(&[(mode, Complex::new(R::one(), R::zero()))])
    }

    /// Applies `Σ c_m a†_m` for a normalized coefficient list and
    /// renormalizes. This is the single-photon wavepacket primitive behind
    /// qubit preparation.
    pub fn create_superposed(
        &self,
        amplitudes: &[(ModeId, Complex<R>)],
    ) -> Result<Self, FockError> {
        let norm_sq: R = amplitudes.iter().map(|(_, c)| c.norm_sqr()).sum();
        let tol = R::from_f64(1e-9).unwrap_or_else(R::epsilon);
        if (norm_sq - R::one()).abs() > tol {
            return Err(FockError::UnnormalizedCreation {
                norm_sq: norm_sq.to_f64().unwrap_or(f64::NAN),
            });
        }
        if self.max_term_photons() + 1 > self.n_max {
            return Err(FockError::TruncationOverflow { cap: self.n_max });
        }
        let mut out: BTreeMap<FockBasisState, Complex<R>> = BTreeMap::new();
        for (mode, coef) in amplitudes {
            let idx = self.mode_index(*mode)?;
            for (basis, amp) in &self.terms {
                let mut occ = basis.occupations.clone();
                let n = occ[idx] as u32;
                occ[idx] += 1;
                // a†|n⟩ = √(n+1)|n+1⟩
                let w = *amp * coef.scale(R::from_u32(n + 1).unwrap().sqrt());
                *out.entry(FockBasisState { occupations: occ })
                    .or_insert_with(|| Complex::new(R::zero(), R::zero())) += w;
            }
        }
        Ok(Self::from_terms(self.n_channels, self.n_bins, self.n_max, out))
    }

    /// First-order pair source: applies
    /// `Σ_b c_b · a†(signal, b) · a†(idler, b)` with the per-bin pump
    /// amplitudes `c_b`, then renormalizes. A pump `(1/√2, 1/√2)` on the
    /// vacuum yields the time-bin EPR state.
    pub fn pair_source(
        &self,
        pump_amplitudes: &[Complex<R>],
        signal_channel: usize,
        idler_channel: usize,
    ) -> Result<Self, FockError> {
        let norm_sq: R = pump_amplitudes.iter().map(|c| c.norm_sqr()).sum();
        let tol = R::from_f64(1e-9).unwrap_or_else(R::epsilon);
        if (norm_sq - R::one()).abs() > tol {
            return Err(FockError::UnnormalizedPump {
                norm_sq: norm_sq.to_f64().unwrap_or(f64::NAN),
            });
        }
        if pump_amplitudes.len() > self.n_bins {
            return Err(FockError::ModeOutOfRange {
                channel: signal_channel,
                bin: pump_amplitudes.len() - 1,
            });
        }
        if self.max_term_photons() + 2 > self.n_max {
            return Err(FockError::TruncationOverflow { cap: self.n_max });
        }
        let mut out: BTreeMap<FockBasisState, Complex<R>> = BTreeMap::new();
        for (bin, coef) in pump_amplitudes.iter().enumerate() {
            let sig = self.mode_index(ModeId::new(signal_channel, bin))?;
            let idl = self.mode_index(ModeId::new(idler_channel, bin))?;
            for (basis, amp) in &self.terms {
                let mut occ = basis.occupations.clone();
                let ns = occ[sig] as u32;
                occ[sig] += 1;
                let ni = occ[idl] as u32;
                occ[idl] += 1;
                let w = *amp
                    * coef.scale(
                        (R::from_u32(ns + 1).unwrap() * R::from_u32(ni + 1).unwrap()).sqrt(),
                    );
                *out.entry(FockBasisState { occupations: occ })
                    .or_insert_with(|| Complex::new(R::zero(), R::zero())) += w;
            }
        }
        Ok(Self::from_terms(self.n_channels, self.n_bins, self.n_max, out))
    }

    /// Applies a linear-optical element.
    pub fn apply_element(&self, element: &LinearElement<R>) -> Result<Self, FockError> {
        match element {
            LinearElement::BeamSplitter { theta, phi, channels: (a, b) } => {
                let c = theta.cos();
                let s = theta.sin();
                let i_phase = Complex::new(R::zero(), R::one())
                    * Complex::from_polar(R::one(), *phi);
                let i_phase_conj = Complex::new(R::zero(), R::one())
                    * Complex::from_polar(R::one(), -*phi);
                // creation-operator matrix rows: a† → m00 a† + m01 b†, etc.
                let m = [
                    [Complex::new(c, R::zero()), i_phase.scale(s)],
                    [i_phase_conj.scale(s), Complex::new(c, R::zero())],
                ];
                let mut state = self.clone();
                for bin in 0..self.n_bins {
                    let ia = state.mode_index(ModeId::new(*a, bin))?;
                    let ib = state.mode_index(ModeId::new(*b, bin))?;
                    state = state.apply_two_mode(&m, ia, ib);
                }
                Ok(state)
            }
            LinearElement::Phase { phi, channel } => {
                if *channel >= self.n_channels {
                    return Err(FockError::ModeOutOfRange { channel: *channel, bin: 0 });
                }
                let start = channel * self.n_bins;
                let mut out = BTreeMap::new();
                for (basis, amp) in &self.terms {
                    let n: u32 = basis.occupations[start..start + self.n_bins]
                        .iter()
                        .map(|&x| x as u32)
                        .sum();
                    let rot =
                        Complex::from_polar(R::one(), *phi * R::from_u32(n).unwrap());
                    out.insert(basis.clone(), *amp * rot);
                }
                Ok(Self::from_terms(self.n_channels, self.n_bins, self.n_max, out))
            }
            LinearElement::Delay { bins, channel } => {
                if *channel >= self.n_channels {
                    return Err(FockError::ModeOutOfRange { channel: *channel, bin: 0 });
                }
                let start = channel * self.n_bins;
                let k = *bins;
                let mut out = BTreeMap::new();
                for (basis, amp) in &self.terms {
                    let occ = &basis.occupations;
                    let slice = &occ[start..start + self.n_bins];
                    if slice[self.n_bins.saturating_sub(k)..].iter().any(|&x| x > 0) {
                        return Err(FockError::DelayOverflow { bins: k });
                    }
                    let mut new_occ = occ.clone();
                    for bin in 0..self.n_bins {
                        new_occ[start + bin] = if bin >= k { slice[bin - k] } else { 0 };
                    }
                    out.insert(FockBasisState { occupations: new_occ }, *amp);
                }
                Ok(Self::from_terms(self.n_channels, self.n_bins, self.n_max, out))
            }
        }
    }

    // Two-mode passive transform by binomial expansion of
    // (m00 a† + m01 b†)^p (m10 a† + m11 b†)^q on each basis term.
    fn apply_two_mode(&self, m: &[[Complex<R>; 2]; 2], ia: usize, ib: usize) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let mut out: BTreeMap<FockBasisState, Complex<R>> = BTreeMap::new();
        for (basis, amp) in &self.terms {
            let na = basis.occupations[ia] as u32;
            let nb = basis.occupations[ib] as u32;
            if na == 0 && nb == 0 {
                *out.entry(basis.clone()).or_insert(zero) += *amp;
                continue;
            }
            let prefactor = (factorial::<R>(na) * factorial::<R>(nb)).sqrt().recip();
            for j in 0..=na {
                for k in 0..=nb {
                    let p = j + k;
                    let q = na + nb - p;
                    let coef = m[0][0].powu(j)
                        * m[0][1].powu(na - j)
                        * m[1][0].powu(k)
                        * m[1][1].powu(nb - k);
                    let weight = binomial::<R>(na, j)
                        * binomial::<R>(nb, k)
                        * prefactor
                        * (factorial::<R>(p) * factorial::<R>(q)).sqrt();
                    let mut occ = basis.occupations.clone();
                    occ[ia] = p as u8;
                    occ[ib] = q as u8;
                    *out.entry(FockBasisState { occupations: occ }).or_insert(zero) +=
                        *amp * coef.scale(weight);
                }
            }
        }
        Self::from_terms(self.n_channels, self.n_bins, self.n_max, out)
    }

    /// Time-resolved projective detection: projects onto the subspace where
    /// each listed mode carries exactly the given count. Returns the outcome
    /// probability and the renormalized post-measurement state with the
    /// detected modes emptied; a zero-probability outcome returns `None`.
    pub fn project_pattern(
        &self,
        pattern: &[(ModeId, u8)],
    ) -> Result<(R, Option<Self>), FockError> {
        let mut indices = Vec::with_capacity(pattern.len());
        for (mode, _) in pattern {
            let idx = self.mode_index(*mode)?;
            if indices.contains(&idx) {
                return Err(FockError::DuplicatePatternMode {
                    channel: mode.channel,
                    bin: mode.bin,
                });
            }
            indices.push(idx);
        }
        let mut probability = R::zero();
        let mut post: BTreeMap<FockBasisState, Complex<R>> = BTreeMap::new();
        for (basis, amp) in &self.terms {
            let matches = pattern
                .iter()
                .zip(&indices)
                .all(|((_, count), &idx)| basis.occupations[idx] == *count);
            if !matches {
                continue;
            }
            probability += amp.norm_sqr();
            let mut occ = basis.occupations.clone();
            for &idx in &indices {
                occ[idx] = 0;
            }
            post.insert(FockBasisState { occupations: occ }, *amp);
        }
        let floor = prune_threshold::<R>() * prune_threshold::<R>();
        if probability <= floor {
            return Ok((R::zero(), None));
        }
        Ok((probability, Some(Self::from_terms(self.n_channels, self.n_bins, self.n_max, post))))
    }

    /// Tensor product; `other`'s channels are appended after `self`'s.
    pub fn tensor(&self, other: &Self) -> Result<Self, FockError> {
        if self.n_bins != other.n_bins {
            return Err(FockError::BinMismatch { left: self.n_bins, right: other.n_bins });
        }
        let n_channels = self.n_channels + other.n_channels;
        let n_max = self.n_max + other.n_max;
        let mut out = BTreeMap::new();
        for (ba, aa) in &self.terms {
            for (bb, ab) in &other.terms {
                let mut occ = ba.occupations.clone();
                occ.extend_from_slice(&bb.occupations);
                out.insert(FockBasisState { occupations: occ }, *aa * *ab);
            }
        }
        Ok(Self::from_terms(n_channels, self.n_bins, n_max, out))
    }

    /// Debug dump of the amplitudes as JSON.
    pub fn debug_json(&self) -> serde_json::Value {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(basis, amp)| {
                json!({
                    "occupations": basis.occupations,
                    "re": amp.re.to_f64(),
                    "im": amp.im.to_f64(),
                })
            })
            .collect();
        json!(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type Sv = StateVector<f64>;
    type C = Complex<f64>;

    fn splitter(theta: f64, phi: f64) -> LinearElement<f64> {
        LinearElement::BeamSplitter { theta, phi, channels: (0, 1) }
    }

    #[test]
    fn vacuum_is_normalized_and_empty() {
        let v = Sv::vacuum(2, 2, 3).unwrap();
        assert_eq!(v.num_terms(), 1);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.total_photons(), 0.0, epsilon = 1e-12);
        assert!(Sv::vacuum(1, 1, 1).is_ok());
        assert_abs_diff_eq!(Sv::vacuum(4, 3, 3).unwrap().total_photons(), 0.0);
        assert!(matches!(Sv::vacuum(0, 2, 3), Err(FockError::BadDimensions { .. })));
    }

    #[test]
    fn create_photon_single_and_double() {
        let v = Sv::vacuum(2, 2, 3).unwrap();
        let one = v.create_photon(ModeId::new(0, 0)).unwrap();
        assert_abs_diff_eq!(one.amplitude(&[1, 0, 0, 0]).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one.total_photons(), 1.0, epsilon = 1e-12);

        let two = one.create_photon(ModeId::new(0, 0)).unwrap();
        assert_abs_diff_eq!(two.amplitude(&[2, 0, 0, 0]).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(two.norm(), 1.0, epsilon = 1e-12);

        let capped = Sv::vacuum(1, 1, 1).unwrap().create_photon(ModeId::new(0, 0)).unwrap();
        assert!(matches!(
            capped.create_photon(ModeId::new(0, 0)),
            Err(FockError::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn splitter_matches_stated_convention() {
        let one = Sv::vacuum(2, 1, 2).unwrap().create_photon(ModeId::new(0, 0)).unwrap();
        let out = one.apply_element(&splitter(std::f64::consts::FRAC_PI_4, 0.0)).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(out.amplitude(&[1, 0]).re, inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amplitude(&[0, 1]).im, inv_sqrt2, epsilon = 1e-12);
    }

    #[test]
    fn splitter_then_inverse_is_identity() {
        let one = Sv::vacuum(2, 1, 2).unwrap().create_photon(ModeId::new(0, 0)).unwrap();
        let back = one
            .apply_element(&splitter(std::f64::consts::FRAC_PI_4, 0.3))
            .unwrap()
            .apply_element(&splitter(-std::f64::consts::FRAC_PI_4, 0.3))
            .unwrap();
        assert_abs_diff_eq!(one.overlap(&back).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one.overlap(&back).im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hong_ou_mandel_cancellation() {
        // Brute-force oracle: a†b† → (c a† + i s b†)(i s a† + c b†) has
        // coincidence coefficient c² − s², zero at θ=π/4.
        let theta = std::f64::consts::FRAC_PI_4;
        let (c, s) = (theta.cos(), theta.sin());
        let expected_coincidence = c * c - s * s;

        let two = Sv::vacuum(2, 1, 2)
            .unwrap()
            .create_photon(ModeId::new(0, 0))
            .unwrap()
            .create_photon(ModeId::new(1, 0))
            .unwrap();
        let out = two.apply_element(&splitter(theta, 0.0)).unwrap();
        assert_abs_diff_eq!(out.amplitude(&[1, 1]).norm(), expected_coincidence.abs(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.amplitude(&[1, 1]).norm(), 0.0, epsilon = 1e-12);
        // bunched outputs carry everything
        assert_abs_diff_eq!(
            out.amplitude(&[2, 0]).norm_sqr() + out.amplitude(&[0, 2]).norm_sqr(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn hom_coincidence_maximal_for_distinguishable_bins() {
        let two = Sv::vacuum(2, 2, 2)
            .unwrap()
            .create_photon(ModeId::new(0, 0))
            .unwrap()
            .create_photon(ModeId::new(1, 1))
            .unwrap();
        let out = two.apply_element(&splitter(std::f64::consts::FRAC_PI_4, 0.0)).unwrap();
        let coincidence = [
            vec![(ModeId::new(0, 0), 1), (ModeId::new(0, 1), 0), (ModeId::new(1, 0), 0), (ModeId::new(1, 1), 1)],
            vec![(ModeId::new(0, 0), 0), (ModeId::new(0, 1), 1), (ModeId::new(1, 0), 1), (ModeId::new(1, 1), 0)],
        ];
        let p: f64 = coincidence.iter().map(|pat| out.project_pattern(pat).unwrap().0).sum();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pair_source_cases() {
        let vac = Sv::vacuum(2, 2, 3).unwrap();
        let one = C::new(1.0, 0.0);
        let half = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);

        let single = vac.pair_source(&[one], 0, 1).unwrap();
        assert_abs_diff_eq!(single.amplitude(&[1, 0, 1, 0]).re, 1.0, epsilon = 1e-12);

        let epr = vac.pair_source(&[half, half], 0, 1).unwrap();
        assert_abs_diff_eq!(epr.amplitude(&[1, 0, 1, 0]).re, half.re, epsilon = 1e-12);
        assert_abs_diff_eq!(epr.amplitude(&[0, 1, 0, 1]).re, half.re, epsilon = 1e-12);
        assert_abs_diff_eq!(epr.total_photons(), 2.0, epsilon = 1e-12);

        let phi = 1.1;
        let phased = vac.pair_source(&[half, Complex::from_polar(half.re, phi)], 0, 1).unwrap();
        assert_abs_diff_eq!(phased.amplitude(&[0, 1, 0, 1]).arg(), phi, epsilon = 1e-12);

        assert!(matches!(
            vac.pair_source(&[one, one], 0, 1),
            Err(FockError::UnnormalizedPump { .. })
        ));
        assert!(matches!(
            Sv::vacuum(2, 2, 1).unwrap().pair_source(&[half, half], 0, 1),
            Err(FockError::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn project_pattern_basics() {
        let one = Sv::vacuum(1, 2, 2).unwrap().create_photon(ModeId::new(0, 0)).unwrap();
        let (p, post) = one
            .project_pattern(&[(ModeId::new(0, 0), 1), (ModeId::new(0, 1), 0)])
            .unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        assert!(post.is_some());

        let (p0, none) = one.project_pattern(&[(ModeId::new(0, 1), 1)]).unwrap();
        assert_eq!(p0, 0.0);
        assert!(none.is_none());
    }

    #[test]
    fn epr_heralding_collapses_idler() {
        let half = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let epr = Sv::vacuum(2, 2, 3).unwrap().pair_source(&[half, half], 0, 1).unwrap();
        // Oracle: direct arithmetic on the 2-term ket gives p = 1/2 and the
        // idler left in bin 0.
        let (p, post) = epr
            .project_pattern(&[(ModeId::new(0, 0), 1), (ModeId::new(0, 1), 0)])
            .unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        let post = post.unwrap();
        assert_abs_diff_eq!(post.amplitude(&[0, 0, 1, 0]).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn delay_shifts_and_overflows() {
        let one = Sv::vacuum(1, 3, 2).unwrap().create_photon(ModeId::new(0, 0)).unwrap();
        let shifted = one
            .apply_element(&LinearElement::Delay { bins: 2, channel: 0 })
            .unwrap();
        assert_abs_diff_eq!(shifted.amplitude(&[0, 0, 1]).norm(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            shifted.apply_element(&LinearElement::Delay { bins: 1, channel: 0 }),
            Err(FockError::DelayOverflow { .. })
        ));
    }

    #[test]
    fn phase_counts_channel_photons() {
        let one = Sv::vacuum(1, 2, 2).unwrap().create_photon(ModeId::new(0, 1)).unwrap();
        let rotated = one
            .apply_element(&LinearElement::Phase { phi: 0.7, channel: 0 })
            .unwrap();
        assert_abs_diff_eq!(rotated.amplitude(&[0, 1]).arg(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn two_quarter_splitters_equal_one_half_splitter() {
        let theta = std::f64::consts::FRAC_PI_4;
        for (a0, a1, phase) in [(1.0, 0.0, 0.0), (0.6, 0.8, 1.3), (0.28, 0.96, -2.0)] {
            let base = Sv::vacuum(2, 1, 2)
                .unwrap()
                .create_superposed(&[
                    (ModeId::new(0, 0), C::new(a0, 0.0)),
                    (ModeId::new(1, 0), Complex::from_polar(a1, phase)),
                ])
                .unwrap();
            let twice = base
                .apply_element(&splitter(theta, 0.4))
                .unwrap()
                .apply_element(&splitter(theta, 0.4))
                .unwrap();
            let swap = base.apply_element(&splitter(2.0 * theta, 0.4)).unwrap();
            assert_abs_diff_eq!(twice.overlap(&swap).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let one = StateVector::<f32>::vacuum(2, 1, 2)
            .unwrap()
            .create_photon(ModeId::new(0, 0))
            .unwrap();
        let out = one
            .apply_element(&LinearElement::BeamSplitter {
                theta: std::f32::consts::FRAC_PI_4,
                phi: 0.0,
                channels: (0, 1),
            })
            .unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-6);
        assert!((out.amplitude(&[1, 0]).re - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn projection_probabilities_partition_unity() {
        let half = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let epr = Sv::vacuum(2, 2, 3).unwrap().pair_source(&[half, half], 0, 1).unwrap();
        let mut total = 0.0;
        for c0 in 0..=2u8 {
            for c1 in 0..=2u8 {
                for c2 in 0..=2u8 {
                    for c3 in 0..=2u8 {
                        let pat = [
                            (ModeId::new(0, 0), c0),
                            (ModeId::new(0, 1), c1),
                            (ModeId::new(1, 0), c2),
                            (ModeId::new(1, 1), c3),
                        ];
                        total += epr.project_pattern(&pat).unwrap().0;
                    }
                }
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn norm_preserved_by_random_element_sequences(
            thetas in proptest::collection::vec(-3.0f64..3.0, 1..6),
            phis in proptest::collection::vec(-3.0f64..3.0, 6),
            weight in 0.01f64..0.99,
            phase in -3.0f64..3.0,
        ) {
            let a0 = weight.sqrt();
            let a1 = (1.0 - weight).sqrt();
            let mut state = Sv::vacuum(2, 2, 3)
                .unwrap()
                .create_superposed(&[
                    (ModeId::new(0, 0), C::new(a0, 0.0)),
                    (ModeId::new(1, 1), Complex::from_polar(a1, phase)),
                ])
                .unwrap();
            for (i, theta) in thetas.iter().enumerate() {
                state = state.apply_element(&splitter(*theta, phis[i])).unwrap();
                prop_assert!((state.norm() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn element_then_inverse_is_identity(
            theta in -3.0f64..3.0,
            phi in -3.0f64..3.0,
            weight in 0.01f64..0.99,
            phase in -3.0f64..3.0,
        ) {
            let state = Sv::vacuum(2, 2, 3)
                .unwrap()
                .create_superposed(&[
                    (ModeId::new(0, 0), C::new(weight.sqrt(), 0.0)),
                    (ModeId::new(1, 0), Complex::from_polar((1.0 - weight).sqrt(), phase)),
                ])
                .unwrap();
            let back = state
                .apply_element(&splitter(theta, phi))
                .unwrap()
                .apply_element(&splitter(-theta, phi))
                .unwrap();
            prop_assert!((state.overlap(&back).norm() - 1.0).abs() < 1e-12);
        }
    }
}
