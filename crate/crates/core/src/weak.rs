//! Pre- and post-selected weak measurements with an `O (x) n` coupling.
//!
//! An ancilla prepared in `|Phi>` couples to a probe mode through
//! `exp(-i kappa_T O n)` and is then post-selected on `|omega>`. The probe is
//! left in
//!
//! ```text
//! sum_n psi_n <omega| exp(-i kappa_T n O) |Phi> |n>
//! ```
//!
//! which the weak-measurement approximation replaces by
//! `<omega|Phi> exp(-i kappa_T O_W n) |psi>`, with `O_W` the weak value.
//! A positive imaginary part of `O_W` turns that into the amplifier `g^n` with
//! `g = exp(kappa_T Im O_W)`.
//!
//! States returned here are unnormalized; norms carry the outcome weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, FockVector};
use crate::numerics::UniformGrid;

/// Below this `|<omega|Phi>|` the weak value is treated as undefined.
pub const OVERLAP_FLOOR: f64 = 1e-14;

/// Completeness tolerance for discrete measurements.
pub const DISCRETE_COMPLETENESS_TOLERANCE: f64 = 1e-10;

/// Default completeness tolerance for quadrature grids.
pub const CONTINUOUS_COMPLETENESS_TOLERANCE: f64 = 1e-6;

/// Relative tail below which Fock levels of the pre-selected state are
/// ignored when checking a continuous measurement for completeness.
pub const SUPPORT_TAIL: f64 = 1e-14;

/// Weak values with `|Im O_W|` below this count as real.
pub const IMAGINARY_FLOOR: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weak value `O_W`. The real part generates a phase ramp, the imaginary part
/// a gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakValue {
    value: Complex64,
}

impl WeakValue {
    pub fn new(value: Complex64) -> Self {
        Self { value }
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }

    /// `g = exp(kappa_T Im O_W)`
    pub fn gain(&self, kappa_t: f64) -> f64 {
        (kappa_t * self.value.im).exp()
    }
}

/// Hermitian ancilla observable with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
    /// `None` when the matrix is diagonal in the Fock basis.
    eigenvectors: Option<DMatrix<Complex64>>,
}

impl Observable {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("observable must be a non-empty square matrix".into()));
        }
        let asymmetry = (&matrix - matrix.adjoint()).iter().map(|a| a.norm()).fold(0.0, f64::max);
        if !asymmetry.is_finite() || asymmetry > 1e-12 {
            return Err(Error::NotHermitian { asymmetry });
        }
        let dim = matrix.nrows();
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || matrix[(i, j)] == ZERO));
        if diagonal {
            let eigenvalues = (0..dim).map(|i| matrix[(i, i)].re).collect();
            return Ok(Self { matrix, eigenvalues, eigenvectors: None });
        }
        let eig = SymmetricEigen::new(matrix.clone());
        Ok(Self {
            matrix,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: Some(eig.eigenvectors),
        })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Self::new(DMatrix::from_diagonal(&d))
    }

    /// Photon-number operator on `n = 0..=truncation`.
    pub fn number(truncation: usize) -> Self {
        let v: Vec<f64> = (0..=truncation).map(|n| n as f64).collect();
        Self::diagonal(&v).expect("diagonal real matrix is Hermitian")
    }

    pub fn identity(truncation: usize) -> Self {
        Self::diagonal(&vec![1.0; truncation + 1]).expect("identity is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_diagonal(&self) -> bool {
        self.eigenvectors.is_none()
    }

    /// Eigenvector `k` as a Fock vector.
    pub fn eigenvector(&self, k: usize) -> FockVector {
        match &self.eigenvectors {
            None => FockVector::basis(k, self.dim() - 1).expect("k < dim"),
            Some(v) => FockVector::new(v.column(k).iter().copied().collect()).expect("finite"),
        }
    }

    pub fn apply(&self, state: &FockVector) -> Result<FockVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { left: state.dim(), right: self.dim() });
        }
        let v = DVector::from_column_slice(state.amplitudes());
        FockVector::new((&self.matrix * v).iter().copied().collect())
    }

    /// `<omega|v_k><v_k|Phi>` for each eigenvector `v_k`.
    fn spectral_weights(&self, post: &FockVector, pre: &FockVector) -> Vec<Complex64> {
        match &self.eigenvectors {
            None => post.amplitudes().iter().zip(pre.amplitudes()).map(|(w, p)| w.conj() * p).collect(),
            Some(v) => {
                let vd = v.adjoint();
                let a = &vd * DVector::from_column_slice(post.amplitudes());
                let b = &vd * DVector::from_column_slice(pre.amplitudes());
                a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).collect()
            }
        }
    }
}

/// Ancilla pre-selection, post-selection, observable and integrated coupling.
#[derive(Debug, Clone)]
pub struct PrePostSelection {
    pre: FockVector,
    post: FockVector,
    observable: Observable,
    kappa_t: f64,
    spectral: Vec<Complex64>,
}

impl PrePostSelection {
    pub fn new(pre: FockVector, post: FockVector, observable: Observable, kappa_t: f64) -> Result<Self> {
        if pre.dim() != post.dim() {
            return Err(Error::DimensionMismatch { left: pre.dim(), right: post.dim() });
        }
        if pre.dim() != observable.dim() {
            return Err(Error::DimensionMismatch { left: pre.dim(), right: observable.dim() });
        }
        if !kappa_t.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        let spectral = observable.spectral_weights(&post, &pre);
        Ok(Self { pre, post, observable, kappa_t, spectral })
    }

    /// Post-selection on the quadrature eigenstate `|p>`, resolved in the
    /// ancilla's Fock basis.
    pub fn quadrature(pre: FockVector, p: f64, observable: Observable, kappa_t: f64) -> Result<Self> {
        let post = fock::quadrature_state(p, pre.truncation())?;
        Self::new(pre, post, observable, kappa_t)
    }

    pub fn pre(&self) -> &FockVector {
        &self.pre
    }

    pub fn post(&self) -> &FockVector {
        &self.post
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn kappa_t(&self) -> f64 {
        self.kappa_t
    }

    pub fn with_kappa_t(&self, kappa_t: f64) -> Self {
        Self { kappa_t, ..self.clone() }
    }

    /// `<omega|Phi>`
    pub fn overlap(&self) -> Complex64 {
        self.spectral.iter().sum()
    }

    /// `<omega| exp(-i kappa_T n O) |Phi>` for `n = 0..=n_max`.
    pub fn transfer_amplitudes(&self, n_max: usize) -> Vec<Complex64> {
        let ev = self.observable.eigenvalues();
        (0..=n_max)
            .map(|n| {
                let phase = -self.kappa_t * n as f64;
                self.spectral
                    .iter()
                    .zip(ev)
                    .map(|(w, &l)| w * Complex64::from_polar(1.0, phase * l))
                    .sum()
            })
            .collect()
    }
}

/// `<omega|O|Phi> / <omega|Phi>`
pub fn weak_value(sel: &PrePostSelection) -> Result<WeakValue> {
    let overlap = sel.overlap();
    if overlap.norm() <= OVERLAP_FLOOR {
        return Err(Error::VanishingOverlap { overlap: overlap.norm() });
    }
    let o_phi = sel.observable.apply(&sel.pre)?;
    let num = fock::inner(&sel.post, &o_phi)?;
    Ok(WeakValue::new(num / overlap))
}

/// `exp(-i kappa_T O_W n) |probe>`, i.e. the phase ramp `exp(-i kappa_T Re(O_W) n)`
/// times the gain `g^n`.
pub fn weak_evolve(probe: &FockVector, w: WeakValue, kappa_t: f64) -> Result<FockVector> {
    let rate = Complex64::new(w.im(), -w.re()) * kappa_t;
    let amplitudes: Vec<Complex64> = probe
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, a)| a * (rate * n as f64).exp())
        .collect();
    FockVector::new(amplitudes).map_err(|_| Error::Overflow { gain: w.gain(kappa_t), n: probe.truncation() })
}

/// Unnormalized probe state after the exact coupling and post-selection, and
/// its squared norm (the outcome weight before the measurement's own `a_omega`).
#[derive(Debug, Clone, PartialEq)]
pub struct PostSelected {
    pub state: FockVector,
    pub weight: f64,
}

/// `<omega| exp(-i kappa_T O n) |Phi> |probe>` evaluated exactly, one
/// ancilla propagator per probe photon number.
pub fn exact_postselected_evolve(probe: &FockVector, sel: &PrePostSelection) -> Result<PostSelected> {
    let transfer = sel.transfer_amplitudes(probe.truncation());
    let state = FockVector::new(probe.amplitudes().iter().zip(&transfer).map(|(a, t)| a * t).collect())?;
    let weight = state.norm_sqr();
    Ok(PostSelected { state, weight })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeaknessResiduals {
    /// `r_n` for `n = 0..=N`.
    pub residuals: Vec<f64>,
    pub max: f64,
}

impl WeaknessResiduals {
    pub(crate) fn from_residuals(residuals: Vec<f64>) -> Self {
        let max = residuals.iter().copied().fold(0.0, f64::max);
        Self { residuals, max }
    }
}

/// `r_n = |(<omega|e^{-i kappa_T O n}|Phi>/<omega|Phi> - e^{-i kappa_T O_W n}) psi_n|`
pub fn weakness_residuals(probe: &FockVector, sel: &PrePostSelection) -> Result<WeaknessResiduals> {
    let w = weak_value(sel)?;
    let transfer = sel.transfer_amplitudes(probe.truncation());
    let t0 = transfer[0];
    let rate = Complex64::new(w.im(), -w.re()) * sel.kappa_t;
    let residuals = probe
        .amplitudes()
        .iter()
        .zip(&transfer)
        .enumerate()
        .map(|(n, (a, t))| ((t / t0 - (rate * n as f64).exp()) * a).norm())
        .collect();
    Ok(WeaknessResiduals::from_residuals(residuals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PomKind {
    /// `sum_omega a_omega |omega><omega| = 1`
    Discrete,
    /// Quadrature outcomes on a grid; weights are quadrature weights `dp`.
    Continuous,
}

/// A measurement on the ancilla: elements `a_omega |omega><omega|`.
#[derive(Debug, Clone)]
pub struct Pom {
    outcomes: Vec<FockVector>,
    weights: Vec<f64>,
    kind: PomKind,
    tolerance: f64,
}

impl Pom {
    pub fn discrete(outcomes: Vec<FockVector>, weights: Vec<f64>) -> Result<Self> {
        Self::build(outcomes, weights, PomKind::Discrete, DISCRETE_COMPLETENESS_TOLERANCE)
    }

    /// Projective measurement in the eigenbasis of `observable`.
    pub fn eigenbasis(observable: &Observable) -> Self {
        let outcomes = (0..observable.dim()).map(|k| observable.eigenvector(k)).collect();
        Self::discrete(outcomes, vec![1.0; observable.dim()]).expect("eigenbasis is well formed")
    }

    /// Photon counting on `n = 0..=truncation`.
    pub fn fock_basis(truncation: usize) -> Self {
        Self::eigenbasis(&Observable::number(truncation))
    }

    /// Homodyne detection discretized on `grid` with Simpson weights.
    pub fn quadrature_grid(grid: &UniformGrid, truncation: usize) -> Result<Self> {
        let outcomes = grid
            .points()
            .into_iter()
            .map(|p| fock::quadrature_state(p, truncation))
            .collect::<Result<Vec<_>>>()?;
        Self::build(outcomes, grid.simpson_weights(), PomKind::Continuous, CONTINUOUS_COMPLETENESS_TOLERANCE)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn build(outcomes: Vec<FockVector>, weights: Vec<f64>, kind: PomKind, tolerance: f64) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != weights.len() {
            return Err(Error::InvalidParameter("need one positive weight per outcome".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("POM weights must be non-negative".into()));
        }
        let dim = outcomes[0].dim();
        if let Some(bad) = outcomes.iter().find(|o| o.dim() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: bad.dim() });
        }
        Ok(Self { outcomes, weights, kind, tolerance })
    }

    pub fn outcomes(&self) -> &[FockVector] {
        &self.outcomes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> PomKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].dim()
    }

    /// Largest entry of `|sum a |omega><omega| - 1|` on Fock levels `0..=top`.
    pub fn completeness_deviation(&self, top: usize) -> f64 {
        let d = (top + 1).min(self.dim());
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (o, &w) in self.outcomes.iter().zip(&self.weights) {
            let a = &o.amplitudes()[..d];
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += a[i] * a[j].conj() * w;
                }
            }
        }
        for i in 0..d {
            m[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        m.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Completeness check against the pre-selected state: discrete measurements
    /// must resolve the whole space, continuous ones the levels `pre` occupies.
    pub fn check_complete_for(&self, pre: &FockVector) -> Result<f64> {
        let top = match self.kind {
            PomKind::Discrete => self.dim() - 1,
            PomKind::Continuous => pre.support_cutoff(SUPPORT_TAIL),
        };
        let deviation = self.completeness_deviation(top);
        if deviation > self.tolerance {
            return Err(Error::IncompletePom { deviation, tolerance: self.tolerance });
        }
        Ok(deviation)
    }
}

/// Expectation value against its decomposition into weak values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `<Phi|O|Phi>`
    pub lhs: f64,
    /// `sum_omega a_omega |<omega|Phi>|^2 O_W(omega)`
    pub rhs: Complex64,
    /// `sum_omega a_omega |<omega|Phi>|^2 Im O_W(omega)`
    pub im_sum: f64,
    /// Outcome probability carried by weak values with positive imaginary part.
    pub gain_mass: f64,
    /// Outcome probability carried by weak values with negative imaginary part.
    pub loss_mass: f64,
}

/// Check `<Phi|O|Phi> = sum_omega a_omega |<omega|Phi>|^2 O_W(omega)`.
///
/// Outcomes orthogonal to `Phi` carry zero weight and are skipped.
pub fn decomposition_check(pre: &FockVector, observable: &Observable, pom: &Pom) -> Result<Decomposition> {
    if pom.dim() != pre.dim() {
        return Err(Error::DimensionMismatch { left: pre.dim(), right: pom.dim() });
    }
    pom.check_complete_for(pre)?;
    let lhs = fock::inner(pre, &observable.apply(pre)?)?.re;
    let mut rhs = ZERO;
    let mut gain_mass = 0.0;
    let mut loss_mass = 0.0;
    for (omega, &a) in pom.outcomes.iter().zip(&pom.weights) {
        let sel = PrePostSelection::new(pre.clone(), omega.clone(), observable.clone(), 0.0)?;
        let w = match weak_value(&sel) {
            Ok(w) => w,
            Err(Error::VanishingOverlap { .. }) => continue,
            Err(e) => return Err(e),
        };
        let prob = a * sel.overlap().norm_sqr();
        rhs += w.value() * prob;
        if w.im() > IMAGINARY_FLOOR {
            gain_mass += prob;
        } else if w.im() < -IMAGINARY_FLOOR {
            loss_mass += prob;
        }
    }
    Ok(Decomposition { lhs, rhs, im_sum: rhs.im, gain_mass, loss_mass })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbability {
    pub exact: f64,
    pub weak_approx: f64,
}

/// Probability (or density, for continuous measurements) of the outcome
/// `omega`, exactly and in the weak approximation
/// `a_omega |<omega|Phi>|^2 <psi| e^{2 kappa_T Im(O_W) n} |psi>`.
pub fn outcome_probability(probe: &FockVector, sel: &PrePostSelection, a_omega: f64) -> Result<OutcomeProbability> {
    let exact = a_omega * exact_postselected_evolve(probe, sel)?.weight;
    let w = weak_value(sel)?;
    let g2 = (2.0 * sel.kappa_t * w.im()).exp();
    let moment: f64 = probe
        .photon_probabilities()
        .iter()
        .enumerate()
        .map(|(n, p)| p * g2.powi(n as i32))
        .sum();
    let weak_approx = a_omega * sel.overlap().norm_sqr() * moment;
    Ok(OutcomeProbability { exact, weak_approx })
}

/// `|<psi_weak|psi_exact>|^2` between the normalized weak-approximation and
/// exact post-selected probe states.
pub fn approximation_fidelity(probe: &FockVector, sel: &PrePostSelection) -> Result<f64> {
    let w = weak_value(sel)?;
    let weak = weak_evolve(probe, w, sel.kappa_t)?;
    let exact = exact_postselected_evolve(probe, sel)?.state;
    fock::fidelity(&weak, &exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplifier::apply_gain;
    use crate::fock::{coherent_real, quadrature_state, TwoModeVector};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// A Hermitian matrix that is not diagonal in the Fock basis.
    fn quadrature_like(truncation: usize) -> Observable {
        let d = truncation + 1;
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for n in 0..d {
            m[(n, n)] = c(0.3 * n as f64, 0.0);
            if n + 1 < d {
                let s = ((n + 1) as f64).sqrt();
                m[(n, n + 1)] = c(0.0, -s);
                m[(n + 1, n)] = c(0.0, s);
            }
        }
        Observable::new(m).unwrap()
    }

    fn random_state(truncation: usize, seed: u64) -> FockVector {
        // small deterministic LCG, enough for fixed test vectors
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let v: Vec<Complex64> = (0..=truncation).map(|_| c(next(), next())).collect();
        FockVector::new(v).unwrap().normalized().unwrap()
    }

    #[test]
    fn rejects_non_hermitian_observable() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(Observable::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn weak_value_of_matching_selection_is_expectation() {
        let phi = random_state(6, 3);
        let obs = quadrature_like(6);
        let sel = PrePostSelection::new(phi.clone(), phi.clone(), obs.clone(), 0.1).unwrap();
        let w = weak_value(&sel).unwrap();
        let expect = fock::inner(&phi, &obs.apply(&phi).unwrap()).unwrap();
        assert_relative_eq!(w.re(), expect.re, epsilon = 1e-13);
        assert!(w.im().abs() < 1e-13);
    }

    #[test]
    fn weak_value_of_identity_is_one() {
        let sel = PrePostSelection::new(random_state(5, 1), random_state(5, 2), Observable::identity(5), 0.3).unwrap();
        let w = weak_value(&sel).unwrap();
        assert!((w.value() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn weak_value_vanishing_overlap() {
        let sel = PrePostSelection::new(
            FockVector::basis(0, 3).unwrap(),
            FockVector::basis(1, 3).unwrap(),
            Observable::number(3),
            0.1,
        )
        .unwrap();
        assert!(matches!(weak_value(&sel), Err(Error::VanishingOverlap { .. })));
    }

    #[test]
    fn number_weak_value_for_homodyne_post_selection() {
        let alpha: f64 = 2.0;
        let p: f64 = -1.0;
        let sel = PrePostSelection::quadrature(coherent_real(alpha, 40).unwrap(), p, Observable::number(40), 0.0).unwrap();
        let w = weak_value(&sel).unwrap();
        assert_relative_eq!(w.im(), -2f64.sqrt() * alpha * p, epsilon = 1e-8);
        assert_relative_eq!(w.re(), alpha * alpha, epsilon = 1e-8);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let r = PrePostSelection::new(FockVector::vacuum(3), FockVector::vacuum(4), Observable::number(3), 0.1);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let r = PrePostSelection::new(FockVector::vacuum(3), FockVector::vacuum(3), Observable::number(4), 0.1);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn weak_evolve_cases() {
        let probe = coherent_real(0.3, 20).unwrap();
        assert_eq!(weak_evolve(&probe, WeakValue::new(c(0.0, 0.0)), 0.7).unwrap(), probe);

        let w = WeakValue::new(c(0.0, 0.8));
        let k = 0.5;
        let weak = weak_evolve(&probe, w, k).unwrap();
        let gained = apply_gain(&probe, w.gain(k)).unwrap().state;
        for (a, b) in weak.amplitudes().iter().zip(gained.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }

        let w = WeakValue::new(c(3.3, 0.0));
        assert_relative_eq!(weak_evolve(&probe, w, 0.9).unwrap().norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_evolution_trivial_limits() {
        let sel = PrePostSelection::new(random_state(6, 5), random_state(6, 6), quadrature_like(6), 0.0).unwrap();
        let probe = coherent_real(0.4, 15).unwrap();
        let out = exact_postselected_evolve(&probe, &sel).unwrap();
        let ov = sel.overlap();
        for (a, b) in out.state.amplitudes().iter().zip(probe.amplitudes()) {
            assert!((a - b * ov).norm() < 1e-14);
        }
        assert_relative_eq!(out.weight, ov.norm_sqr(), epsilon = 1e-14);

        let sel = sel.with_kappa_t(0.9);
        let out = exact_postselected_evolve(&FockVector::vacuum(15), &sel).unwrap();
        assert_relative_eq!(out.weight, sel.overlap().norm_sqr(), epsilon = 1e-14);
    }

    /// Brute force: build `exp(-i kappa n (x) O)` on the joint space from the
    /// dense matrix exponential series of each ancilla block.
    fn dense_reference(probe: &FockVector, sel: &PrePostSelection) -> FockVector {
        let o = sel.observable().matrix();
        let d = o.nrows();
        let pre = DVector::from_column_slice(sel.pre().amplitudes());
        let post = DVector::from_column_slice(sel.post().amplitudes());
        let amps = (0..probe.dim())
            .map(|n| {
                // Taylor series of exp(A), A = -i kappa n O, with scaling and squaring
                let a = o * c(0.0, -sel.kappa_t() * n as f64);
                let squarings = 8;
                let scaled = &a * c(1.0 / f64::from(1u32 << squarings), 0.0);
                let mut term = DMatrix::<Complex64>::identity(d, d);
                let mut sum = term.clone();
                for k in 1..30 {
                    term = &term * &scaled * c(1.0 / k as f64, 0.0);
                    sum += &term;
                }
                for _ in 0..squarings {
                    sum = &sum * &sum;
                }
                let t = (post.adjoint() * sum * &pre)[(0, 0)];
                probe.amplitude(n) * t
            })
            .collect();
        FockVector::new(amps).unwrap()
    }

    #[test]
    fn exact_evolution_matches_dense_exponential() {
        let sel = PrePostSelection::new(random_state(7, 11), random_state(7, 12), quadrature_like(7), 0.37).unwrap();
        assert!(!sel.observable().is_diagonal());
        let probe = random_state(9, 13);
        let got = exact_postselected_evolve(&probe, &sel).unwrap().state;
        let want = dense_reference(&probe, &sel);
        for (a, b) in got.amplitudes().iter().zip(want.amplitudes()) {
            assert!((a - b).norm() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_evolution_matches_two_mode_tensor() {
        // cross-Kerr joint evolution written out on the two-mode grid
        let (alpha, kappa, p) = (2.0, 0.05, 0.4);
        let probe = coherent_real(0.2, 20).unwrap();
        let anc = coherent_real(alpha, 60).unwrap();
        let mut joint = TwoModeVector::product(&probe, &anc);
        for n in 0..=20 {
            for m in 0..=60 {
                let phase = Complex64::from_polar(1.0, -kappa * (n * m) as f64);
                joint.set_amplitude(n, m, joint.amplitude(n, m) * phase);
            }
        }
        let post = quadrature_state(p, 60).unwrap();
        let projected: Vec<Complex64> = (0..=20)
            .map(|n| (0..=60).map(|m| post.amplitude(m).conj() * joint.amplitude(n, m)).sum())
            .collect();
        let sel = PrePostSelection::new(anc, post, Observable::number(60), kappa).unwrap();
        let got = exact_postselected_evolve(&probe, &sel).unwrap().state;
        for (a, b) in got.amplitudes().iter().zip(&projected) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn weakness_residual_limits() {
        let sel = PrePostSelection::quadrature(coherent_real(1.5, 40).unwrap(), -0.7, Observable::number(40), 0.05).unwrap();
        let probe = coherent_real(0.3, 15).unwrap();
        let r = weakness_residuals(&probe, &sel).unwrap();
        assert_eq!(r.residuals.len(), 16);
        assert_eq!(r.residuals[0], 0.0);
        assert!(r.max > 0.0);
        let r = weakness_residuals(&probe, &sel.with_kappa_t(0.0)).unwrap();
        assert!(r.residuals.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decomposition_with_identity_and_eigenbasis() {
        let phi = random_state(6, 21);
        let pom = Pom::discrete((0..=6).map(|k| random_basis_vector(6, k)).collect(), vec![1.0; 7]).unwrap();
        let d = decomposition_check(&phi, &Observable::identity(6), &pom).unwrap();
        assert_relative_eq!(d.lhs, 1.0, epsilon = 1e-12);
        assert!((d.rhs - c(1.0, 0.0)).norm() < 1e-12);
        assert!(d.im_sum.abs() < 1e-12);

        let obs = quadrature_like(6);
        let d = decomposition_check(&phi, &obs, &Pom::eigenbasis(&obs)).unwrap();
        assert_relative_eq!(d.rhs.re, d.lhs, epsilon = 1e-12);
        assert!(d.im_sum.abs() < 1e-12);
        assert_eq!(d.gain_mass + d.loss_mass, 0.0, "eigenbasis weak values are real");
    }

    /// Columns of a fixed unitary (discrete Fourier basis).
    fn random_basis_vector(truncation: usize, k: usize) -> FockVector {
        let d = truncation + 1;
        let amps = (0..d)
            .map(|j| Complex64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64))
            .collect();
        FockVector::new(amps).unwrap()
    }

    #[test]
    fn decomposition_sign_dichotomy_in_rotated_basis() {
        let phi = random_state(6, 31);
        let obs = quadrature_like(6);
        let pom = Pom::discrete((0..=6).map(|k| random_basis_vector(6, k)).collect(), vec![1.0; 7]).unwrap();
        let d = decomposition_check(&phi, &obs, &pom).unwrap();
        assert!((d.rhs - c(d.lhs, 0.0)).norm() < 1e-10);
        assert!(d.im_sum.abs() < 1e-10);
        assert!(d.gain_mass > 0.0 && d.loss_mass > 0.0);
    }

    #[test]
    fn decomposition_rejects_incomplete_pom() {
        let phi = random_state(4, 41);
        let outcomes = (0..4).map(|k| FockVector::basis(k, 4).unwrap()).collect();
        let pom = Pom::discrete(outcomes, vec![1.0; 4]).unwrap();
        assert!(matches!(
            decomposition_check(&phi, &Observable::number(4), &pom),
            Err(Error::IncompletePom { .. })
        ));
    }

    #[test]
    fn homodyne_decomposition_of_photon_number() {
        let phi = coherent_real(1.0, 40).unwrap();
        let grid = UniformGrid::with_max_step(-8.0, 8.0, 0.01).unwrap();
        let pom = Pom::quadrature_grid(&grid, 40).unwrap();
        let d = decomposition_check(&phi, &Observable::number(40), &pom).unwrap();
        assert_relative_eq!(d.lhs, 1.0, epsilon = 1e-12);
        assert!((d.rhs - c(1.0, 0.0)).norm() < 1e-6);
        assert!(d.im_sum.abs() < 1e-6);
        // Im n_W = -sqrt2 alpha p: the negative half line amplifies; the
        // p = 0 node (real weak value) holds the remaining ~0.4 %
        assert_relative_eq!(d.gain_mass, 0.5, epsilon = 5e-3);
        assert_relative_eq!(d.gain_mass, d.loss_mass, epsilon = 1e-12);
    }

    #[test]
    fn outcome_probability_trivial_limits() {
        let sel = PrePostSelection::quadrature(coherent_real(1.0, 30).unwrap(), -0.5, Observable::number(30), 0.0).unwrap();
        let probe = coherent_real(0.3, 15).unwrap();
        let base = 0.01 * sel.overlap().norm_sqr();
        let pr = outcome_probability(&probe, &sel, 0.01).unwrap();
        assert_relative_eq!(pr.exact, base, epsilon = 1e-15);
        assert_relative_eq!(pr.weak_approx, base, epsilon = 1e-15);
        let pr = outcome_probability(&FockVector::vacuum(15), &sel.with_kappa_t(0.2), 0.01).unwrap();
        assert_relative_eq!(pr.exact, base, epsilon = 1e-15);
        assert_relative_eq!(pr.weak_approx, base, epsilon = 1e-15);
    }

    #[test]
    fn exact_outcome_probabilities_sum_to_one() {
        let phi = random_state(8, 51);
        let probe = random_state(6, 52);
        let obs = quadrature_like(8);
        for pom in [Pom::fock_basis(8), Pom::discrete((0..=8).map(|k| random_basis_vector(8, k)).collect(), vec![1.0; 9]).unwrap()] {
            let total: f64 = pom
                .outcomes()
                .iter()
                .zip(pom.weights())
                .map(|(o, &a)| {
                    let sel = PrePostSelection::new(phi.clone(), o.clone(), obs.clone(), 0.8).unwrap();
                    a * exact_postselected_evolve(&probe, &sel).unwrap().weight
                })
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn approximation_fidelity_limits_and_convergence() {
        let anc = coherent_real(2.0, 60).unwrap();
        let probe = coherent_real(0.2, 20).unwrap();
        let sel = PrePostSelection::quadrature(anc, -1.0, Observable::number(60), 0.0).unwrap();
        assert_relative_eq!(approximation_fidelity(&probe, &sel).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            approximation_fidelity(&FockVector::vacuum(20), &sel.with_kappa_t(0.3)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let f: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&k| approximation_fidelity(&probe, &sel.with_kappa_t(k)).unwrap())
            .collect();
        assert!(f[0] < f[1] && f[1] < f[2], "{f:?}");
        assert!(1.0 - f[2] < 1e-9);
    }

    proptest! {
        #[test]
        fn weighted_imaginary_parts_cancel(seed in 0u64..1000) {
            let phi = random_state(5, seed);
            let obs = quadrature_like(5);
            let pom = Pom::discrete((0..=5).map(|k| random_basis_vector(5, k)).collect(), vec![1.0; 6]).unwrap();
            let d = decomposition_check(&phi, &obs, &pom).unwrap();
            prop_assert!(d.im_sum.abs() < 1e-10);
            // a nonzero imaginary part forces both signs to occur
            if d.gain_mass > 0.0 || d.loss_mass > 0.0 {
                prop_assert!(d.gain_mass > 0.0 && d.loss_mass > 0.0);
            }
        }
    }
}
