//! Teleportation of time-bin qubits with singlet post-selection.
//!
//! The protocol is evaluated by two independent routes: a physical one that
//! runs the 50/50 coupler and the time-resolved coincidence patterns through
//! the Fock engine, and an abstract projection onto the singlet state on the
//! Alice⊗Charlie qubit subspace. A two-knob phenomenological channel
//! (`ξ` for photon indistinguishability at the Bell measurement, `f_acc` for
//! the accidental-coincidence fraction) reproduces measured pole/equator
//! fidelities and is exactly invertible from them.
//!
//! Conventions: channels are Alice = 0, Charlie = 1, Bob = 2; the singlet
//! heralding patterns are (C1 at bin 0, C2 at bin 1) and the reverse; the
//! fixed Pauli correction for the singlet outcome (bin swap plus sign flip)
//! is folded into the reported Bob state, so fidelities compare against
//! `ψ_Alice` itself. Bob's analyzer at phase `β` projects onto
//! `(|1,0⟩ + e^{−iβ}|0,1⟩)/√2`, which makes the fringe
//! `(1 + V·cos(α+β))/2` with zero offset.

use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fock::{FockError, LinearElement, ModeId, StateVector};
use crate::{uniform, Real};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("qubit amplitudes must satisfy a0² + a1² = 1 with a0, a1 >= 0 (got {a0}, {a1})")]
    BadQubit { a0: f64, a1: f64 },
    #[error("noise knobs must lie in [0, 1] (got xi {xi}, f_acc {f_acc})")]
    BadKnobs { xi: f64, f_acc: f64 },
    #[error("joint state must carry exactly one photon in each of the Alice, Charlie and Bob channels")]
    PhotonNumberMismatch,
    #[error("fidelities ({f_pole}, {f_equator}) map outside the knob ranges")]
    FidelitiesOutOfRange { f_pole: f64, f_equator: f64 },
    #[error("sample count must be >= 1")]
    NoSamples,
    #[error(transparent)]
    Fock(#[from] FockError),
}

const ALICE: usize = 0;
const CHARLIE: usize = 1;
const BOB: usize = 2;

/// A pure time-bin qubit `a0|1,0⟩ + a1·e^{iα}|0,1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBinQubit<R> {
    a0: R,
    a1: R,
    alpha: R,
}

impl<R: Real> TimeBinQubit<R> {
    pub fn new(a0: R, a1: R, alpha: R) -> Result<Self, ProtocolError> {
        let tol = R::from_f64(1e-12).unwrap_or_else(R::epsilon);
        let tol = tol.max(R::epsilon() * R::from_f64(16.0).unwrap());
        if a0 < R::zero() || a1 < R::zero() || (a0 * a0 + a1 * a1 - R::one()).abs() > tol {
            return Err(ProtocolError::BadQubit {
                a0: a0.to_f64().unwrap_or(f64::NAN),
                a1: a1.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { a0, a1, alpha })
    }

    /// First time-bin pole `|1,0⟩`.
    pub fn pole_early() -> Self {
        Self { a0: R::one(), a1: R::zero(), alpha: R::zero() }
    }

    /// Second time-bin pole `|0,1⟩`.
    pub fn pole_late() -> Self {
        Self { a0: R::zero(), a1: R::one(), alpha: R::zero() }
    }

    /// Equal superposition with phase `alpha`.
    pub fn equatorial(alpha: R) -> Self {
        let h = R::FRAC_1_SQRT_2();
        Self { a0: h, a1: h, alpha }
    }

    /// Haar-uniform qubit: `a0²` uniform on [0,1], phase uniform on [0,2π).
    pub fn haar(rng: &mut impl RngCore) -> Self {
        let u: R = uniform(rng);
        let alpha = uniform::<R>(rng) * R::from_f64(2.0).unwrap() * R::PI();
        Self { a0: u.sqrt(), a1: (R::one() - u).sqrt(), alpha }
    }

    pub fn a0(&self) -> R {
        self.a0
    }

    pub fn a1(&self) -> R {
        self.a1
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    /// Amplitudes on `{|1,0⟩, |0,1⟩}`.
    pub fn amplitudes(&self) -> [Complex<R>; 2] {
        [
            Complex::new(self.a0, R::zero()),
            Complex::from_polar(self.a1, self.alpha),
        ]
    }
}

/// 2×2 conditional Bob state in the `{|1,0⟩, |0,1⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<R> {
    m: [[Complex<R>; 2]; 2],
}

impl<R: Real> DensityMatrix<R> {
    pub fn from_matrix(m: [[Complex<R>; 2]; 2]) -> Self {
        Self { m }
    }

    /// `|ψ⟩⟨ψ|` for normalized amplitudes.
    pub fn from_amplitudes(b: [Complex<R>; 2]) -> Self {
        let norm = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        let b = [b[0].unscale(norm), b[1].unscale(norm)];
        let mut m = [[Complex::new(R::zero(), R::zero()); 2]; 2];
        for (i, bi) in b.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                m[i][j] = *bi * bj.conj();
            }
        }
        Self { m }
    }

    pub fn from_pure(psi: &TimeBinQubit<R>) -> Self {
        Self::from_amplitudes(psi.amplitudes())
    }

    pub fn maximally_mixed() -> Self {
        let h = Complex::new(R::from_f64(0.5).unwrap(), R::zero());
        let z = Complex::new(R::zero(), R::zero());
        Self { m: [[h, z], [z, h]] }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<R> {
        self.m[i][j]
    }

    pub fn trace(&self) -> Complex<R> {
        self.m[0][0] + self.m[1][1]
    }

    /// Largest violation of hermiticity / unit trace / positivity.
    pub fn validity_defect(&self) -> R {
        let herm = (self.m[0][1] - self.m[1][0].conj()).norm()
            .max(self.m[0][0].im.abs())
            .max(self.m[1][1].im.abs());
        let tr = (self.trace() - Complex::new(R::one(), R::zero())).norm();
        // eigenvalues of a 2x2 hermitian matrix
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let off = self.m[0][1].norm_sqr();
        let disc = ((a - d) * (a - d) * R::from_f64(0.25).unwrap() + off).sqrt();
        let lambda_min = (a + d) * R::from_f64(0.5).unwrap() - disc;
        herm.max(tr).max((-lambda_min).max(R::zero()))
    }

    /// Distance `max_ij |ρ_ij − σ_ij|`.
    pub fn max_entry_distance(&self, other: &Self) -> R {
        let mut d = R::zero();
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }
}

/// Photon indistinguishability `ξ` at the Bell measurement and
/// accidental-coincidence fraction `f_acc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseKnobs<R> {
    pub xi: R,
    pub f_acc: R,
}

impl<R: Real> NoiseKnobs<R> {
    pub fn new(xi: R, f_acc: R) -> Result<Self, ProtocolError> {
        let in_unit = |x: R| x >= R::zero() && x <= R::one();
        if !in_unit(xi) || !in_unit(f_acc) {
            return Err(ProtocolError::BadKnobs {
                xi: xi.to_f64().unwrap_or(f64::NAN),
                f_acc: f_acc.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { xi, f_acc })
    }

    pub fn ideal() -> Self {
        Self { xi: R::one(), f_acc: R::zero() }
    }
}

/// Result of a Bell-state measurement attempt.
#[derive(Debug, Clone, Copy)]
pub struct BsmOutcome<R> {
    pub success: bool,
    pub probability: R,
    /// Bob's state conditioned on the singlet outcome, after the fixed
    /// Pauli correction. `None` when the outcome never occurs.
    pub conditional_state: Option<DensityMatrix<R>>,
}

/// Fidelity figures of one operating point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TeleportReport<R> {
    pub f_pole: R,
    pub f_equator: R,
    pub f_mean: R,
    pub visibility: R,
}

/// Result of inverting the noise model from measured fidelities.
#[derive(Debug, Clone, Copy)]
pub struct NoiseFit<R> {
    pub knobs: NoiseKnobs<R>,
    /// `f_pole = 0.5` leaves `ξ` undetermined; it is reported as 1.
    pub degenerate: bool,
}

/// One point of an equatorial fringe scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FringePoint<R> {
    pub beta_rad: R,
    pub rate: R,
}

/// Alice's photon: `a0|1,0⟩ + a1·e^{iα}|0,1⟩` on a one-channel state.
pub fn prepare_alice<R: Real>(q: &TimeBinQubit<R>) -> StateVector<R> {
    let vac = StateVector::vacuum(1, 2, 1).expect("fixed dimensions");
    let [c0, c1] = q.amplitudes();
    vac.create_superposed(&[(ModeId::new(0, 0), c0), (ModeId::new(0, 1), c1)])
        .expect("normalized qubit amplitudes")
}

/// The time-bin EPR pair `(|1,0⟩|1,0⟩ + |0,1⟩|0,1⟩)/√2` over the
/// Charlie (channel 0) and Bob (channel 1) channels.
pub fn prepare_epr<R: Real>() -> StateVector<R> {
    let vac = StateVector::vacuum(2, 2, 2).expect("fixed dimensions");
    let h = Complex::new(R::FRAC_1_SQRT_2(), R::zero());
    vac.pair_source(&[h, h], 0, 1).expect("normalized pump")
}

/// The 3-photon joint state (Alice, Charlie, Bob channels).
pub fn teleport_joint<R: Real>(q: &TimeBinQubit<R>) -> StateVector<R> {
    prepare_alice(q).tensor(&prepare_epr()).expect("matching bins")
}

fn check_joint<R: Real>(joint: &StateVector<R>) -> Result<(), ProtocolError> {
    if joint.n_channels() != 3 || joint.n_bins() < 2 {
        return Err(ProtocolError::PhotonNumberMismatch);
    }
    let bins = joint.n_bins();
    for (basis, _) in joint.terms() {
        let occ = basis.occupations();
        for channel in [ALICE, CHARLIE, BOB] {
            let count: u32 = occ[channel * bins..(channel + 1) * bins]
                .iter()
                .map(|&x| x as u32)
                .sum();
            if count != 1 {
                return Err(ProtocolError::PhotonNumberMismatch);
            }
        }
    }
    Ok(())
}

// Fixed Pauli correction for the singlet outcome: bin swap then sign flip.
fn singlet_corrected<R: Real>(raw: [Complex<R>; 2]) -> [Complex<R>; 2] {
    [raw[1], -raw[0]]
}

fn bob_amplitudes<R: Real>(post: &StateVector<R>) -> Result<[Complex<R>; 2], ProtocolError> {
    let bins = post.n_bins();
    let mut early = vec![0u8; 3 * bins];
    early[BOB * bins] = 1;
    let mut late = vec![0u8; 3 * bins];
    late[BOB * bins + 1] = 1;
    let b = [post.amplitude(&early), post.amplitude(&late)];
    let norm_sq = b[0].norm_sqr() + b[1].norm_sqr();
    if (norm_sq - R::one()).abs() > R::from_f64(1e-9).unwrap() {
        return Err(ProtocolError::PhotonNumberMismatch);
    }
    Ok(b)
}

/// Bell-state measurement through the physical route: 50/50 coupler between
/// the Alice and Charlie channels, then the two time-resolved coincidence
/// patterns that herald the singlet.
pub fn bsm_physical<R: Real>(joint: &StateVector<R>) -> Result<BsmOutcome<R>, ProtocolError> {
    check_joint(joint)?;
    let mixed = joint.apply_element(&LinearElement::BeamSplitter {
        theta: R::FRAC_PI_4(),
        phi: R::zero(),
        channels: (ALICE, CHARLIE),
    })?;
    let patterns = [
        // C1 at bin 0 & C2 at bin 1
        [
            (ModeId::new(ALICE, 0), 1),
            (ModeId::new(ALICE, 1), 0),
            (ModeId::new(CHARLIE, 0), 0),
            (ModeId::new(CHARLIE, 1), 1),
        ],
        // C1 at bin 1 & C2 at bin 0
        [
            (ModeId::new(ALICE, 0), 0),
            (ModeId::new(ALICE, 1), 1),
            (ModeId::new(CHARLIE, 0), 1),
            (ModeId::new(CHARLIE, 1), 0),
        ],
    ];
    let mut probability = R::zero();
    let mut rho_acc = [[Complex::new(R::zero(), R::zero()); 2]; 2];
    for pattern in &patterns {
        let (p, post) = mixed.project_pattern(pattern)?;
        let Some(post) = post else { continue };
        let b = singlet_corrected(bob_amplitudes(&post)?);
        let pure = DensityMatrix::from_amplitudes(b);
        for i in 0..2 {
            for j in 0..2 {
                rho_acc[i][j] += pure.entry(i, j).scale(p);
            }
        }
        probability += p;
    }
    if probability <= R::zero() {
        return Ok(BsmOutcome { success: false, probability: R::zero(), conditional_state: None });
    }
    for row in rho_acc.iter_mut() {
        for entry in row.iter_mut() {
            *entry = entry.unscale(probability);
        }
    }
    Ok(BsmOutcome {
        success: true,
        probability,
        conditional_state: Some(DensityMatrix::from_matrix(rho_acc)),
    })
}

/// Bell-state measurement through the abstract route: projection onto the
/// normalized singlet `(|1,0⟩_A|0,1⟩_C − |0,1⟩_A|1,0⟩_C)/√2`.
pub fn bsm_projector<R: Real>(joint: &StateVector<R>) -> Result<BsmOutcome<R>, ProtocolError> {
    check_joint(joint)?;
    let bins = joint.n_bins();
    let h = R::FRAC_1_SQRT_2();
    let mut bob = [Complex::new(R::zero(), R::zero()); 2];
    for (basis, amp) in joint.terms() {
        let occ = basis.occupations();
        let alice_bin = (0..bins).find(|&b| occ[ALICE * bins + b] == 1);
        let charlie_bin = (0..bins).find(|&b| occ[CHARLIE * bins + b] == 1);
        let bob_bin = (0..bins).find(|&b| occ[BOB * bins + b] == 1);
        let (Some(a), Some(c), Some(b)) = (alice_bin, charlie_bin, bob_bin) else {
            return Err(ProtocolError::PhotonNumberMismatch);
        };
        let overlap = match (a, c) {
            (0, 1) => h,
            (1, 0) => -h,
            _ => continue,
        };
        if b < 2 {
            bob[b] += amp.scale(overlap);
        }
    }
    let probability = bob[0].norm_sqr() + bob[1].norm_sqr();
    if probability <= R::from_f64(1e-28).unwrap() {
        return Ok(BsmOutcome { success: false, probability: R::zero(), conditional_state: None });
    }
    let corrected = singlet_corrected(bob);
    Ok(BsmOutcome {
        success: true,
        probability,
        conditional_state: Some(DensityMatrix::from_amplitudes(corrected)),
    })
}

/// The two-knob channel
/// `ρ → (1−f_acc)·[ξ·ρ + (1−ξ)·diag(ρ)] + f_acc·I/2`.
pub fn apply_noise<R: Real>(rho: &DensityMatrix<R>, knobs: &NoiseKnobs<R>) -> DensityMatrix<R> {
    let z = Complex::new(R::zero(), R::zero());
    let keep = (R::one() - knobs.f_acc) * knobs.xi;
    let dephase = (R::one() - knobs.f_acc) * (R::one() - knobs.xi);
    let mix = knobs.f_acc * R::from_f64(0.5).unwrap();
    let mut m = [[z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = rho.entry(i, j).scale(keep);
            if i == j {
                m[i][j] += rho.entry(i, j).scale(dephase) + Complex::new(mix, R::zero());
            }
        }
    }
    DensityMatrix::from_matrix(m)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity<R: Real>(psi: &TimeBinQubit<R>, rho: &DensityMatrix<R>) -> R {
    let b = psi.amplitudes();
    let mut acc = Complex::new(R::zero(), R::zero());
    for i in 0..2 {
        for j in 0..2 {
            acc += b[i].conj() * rho.entry(i, j) * b[j];
        }
    }
    acc.re
}

/// Full teleportation of one qubit: joint state, singlet projection, noise.
/// Returns the heralding probability and Bob's conditional state.
pub fn teleport<R: Real>(
    q: &TimeBinQubit<R>,
    knobs: &NoiseKnobs<R>,
) -> Result<(R, DensityMatrix<R>), ProtocolError> {
    let outcome = bsm_projector(&teleport_joint(q))?;
    let rho = outcome.conditional_state.ok_or(ProtocolError::PhotonNumberMismatch)?;
    Ok((outcome.probability, apply_noise(&rho, knobs)))
}

/// Mean fidelity by pole/equator decomposition:
/// `F̄ = (2/3)·F_equator + (1/3)·F_pole`, with `V = 2·F_equator − 1`.
///
/// Poles are averaged over the two basis states; the equator average uses
/// four symmetric phases, which is exact because the channel is
/// phase-covariant.
pub fn mean_fidelity_decomposed<R: Real>(
    knobs: &NoiseKnobs<R>,
) -> Result<TeleportReport<R>, ProtocolError> {
    let poles = [TimeBinQubit::pole_early(), TimeBinQubit::pole_late()];
    let mut f_pole = R::zero();
    for psi in &poles {
        let (_, rho) = teleport(psi, knobs)?;
        f_pole += fidelity(psi, &rho);
    }
    f_pole = f_pole / R::from_f64(2.0).unwrap();

    let mut f_equator = R::zero();
    let quarter = R::FRAC_PI_2();
    for k in 0..4 {
        let psi = TimeBinQubit::equatorial(quarter * R::from_i32(k).unwrap());
        let (_, rho) = teleport(&psi, knobs)?;
        f_equator += fidelity(&psi, &rho);
    }
    f_equator = f_equator / R::from_f64(4.0).unwrap();

    let third = R::from_f64(3.0).unwrap().recip();
    Ok(TeleportReport {
        f_pole,
        f_equator,
        f_mean: (R::from_f64(2.0).unwrap() * f_equator + f_pole) * third,
        visibility: R::from_f64(2.0).unwrap() * f_equator - R::one(),
    })
}

/// Monte Carlo mean fidelity over Haar-uniform inputs pushed through the
/// full teleport pipeline and the noise channel. Deterministic in `seed`.
pub fn mean_fidelity_haar<R: Real>(
    knobs: &NoiseKnobs<R>,
    n_samples: u64,
    seed: u64,
) -> Result<R, ProtocolError> {
    if n_samples == 0 {
        return Err(ProtocolError::NoSamples);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut acc = R::zero();
    for _ in 0..n_samples {
        let psi = TimeBinQubit::haar(&mut rng);
        let (_, rho) = teleport(&psi, knobs)?;
        acc += fidelity(&psi, &rho);
    }
    Ok(acc / R::from_u64(n_samples).unwrap())
}

/// Conditional detection rate at Bob's analyzer while its phase `β` is
/// scanned, for the equatorial input of phase `alpha`. The fringe is
/// `(1 + V·cos(α+β))/2` with `V = (1−f_acc)·ξ`.
pub fn equatorial_scan<R: Real>(
    alpha: R,
    beta_grid: &[R],
    knobs: &NoiseKnobs<R>,
) -> Result<Vec<FringePoint<R>>, ProtocolError> {
    if beta_grid.is_empty() {
        return Err(ProtocolError::NoSamples);
    }
    let (_, rho) = teleport(&TimeBinQubit::equatorial(alpha), knobs)?;
    beta_grid
        .iter()
        .map(|&beta| {
            let analyzer = TimeBinQubit::equatorial(-beta);
            Ok(FringePoint { beta_rad: beta, rate: fidelity(&analyzer, &rho) })
        })
        .collect()
}

/// Least-squares fit of `rate = c0 + c1·cosβ + c2·sinβ`; the visibility is
/// `2·√(c1² + c2²)`.
pub fn fit_visibility<R: Real>(points: &[FringePoint<R>]) -> Result<R, ProtocolError> {
    if points.len() < 3 {
        return Err(ProtocolError::NoSamples);
    }
    // 3x3 normal equations
    let mut a = [[R::zero(); 3]; 3];
    let mut b = [R::zero(); 3];
    for p in points {
        let row = [R::one(), p.beta_rad.cos(), p.beta_rad.sin()];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * p.rate;
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                let upper = a[col][k];
                a[row][k] -= factor * upper;
            }
            let upper = b[col];
            b[row] -= factor * upper;
        }
    }
    let mut x = [R::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(R::from_f64(2.0).unwrap() * (x[1] * x[1] + x[2] * x[2]).sqrt())
}

/// Inverts the noise model from measured pole and equator fidelities:
/// `f_acc = 2(1−F_pole)`, `ξ = 2(F_equator − f_acc/2)/(1−f_acc) − 1`.
pub fn fit_noise_knobs<R: Real>(
    f_pole: R,
    f_equator: R,
) -> Result<NoiseFit<R>, ProtocolError> {
    let out_of_range = || ProtocolError::FidelitiesOutOfRange {
        f_pole: f_pole.to_f64().unwrap_or(f64::NAN),
        f_equator: f_equator.to_f64().unwrap_or(f64::NAN),
    };
    let two = R::from_f64(2.0).unwrap();
    let f_acc = two * (R::one() - f_pole);
    if f_acc < R::zero() || f_acc > R::one() {
        return Err(out_of_range());
    }
    if (R::one() - f_acc).abs() < R::from_f64(1e-12).unwrap() {
        // fully accidental: every ξ reproduces F_equator = 1/2
        return Ok(NoiseFit { knobs: NoiseKnobs { xi: R::one(), f_acc }, degenerate: true });
    }
    let xi = two * (f_equator - f_acc / two) / (R::one() - f_acc) - R::one();
    if xi < R::zero() || xi > R::one() {
        return Err(out_of_range());
    }
    Ok(NoiseFit { knobs: NoiseKnobs { xi, f_acc }, degenerate: false })
}
