//! Truncated Fock-basis numerics for one and two bosonic modes.
//!
//! All single-mode states live in [`FockVector`], an amplitude list indexed by
//! photon number `n = 0..=N`. Two-mode states ([`TwoModeVector`]) are used for
//! beam splitting and as brute-force references for the closed forms used
//! elsewhere in the crate.
//!
//! # Quadrature convention
//!
//! Quadrature eigenstates use the fixed phase rule
//!
//! ```text
//! <n|p> = i^n pi^{-1/4} (2^n n!)^{-1/2} H_n(p) e^{-p^2/2}
//! ```
//!
//! with `H_n` the physicists' Hermite polynomial. Under this rule
//! `<p|gamma> = pi^{-1/4} exp(-p^2/2 - |gamma|^2/2 + gamma^2/2 - i sqrt(2) gamma p)`
//! and, for real `alpha`, `<p|n|alpha>/<p|alpha> = alpha^2 - i sqrt(2) alpha p`.
//!
//! # Beam splitter convention
//!
//! `a^dag -> t a^dag + r b^dag`, `b^dag -> t b^dag - r a^dag` with
//! `r = sqrt(1 - t^2)`, so `|1,0> -> t|1,0> + r|0,1>` and
//! `|gamma>|0> -> |t gamma>|r gamma>`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::cis_m1;

/// Largest truncated tail mass accepted by the state constructors.
pub const TAIL_MASS_LIMIT: f64 = 1e-10;

/// Highest photon number supported by the Hermite-function recurrence.
pub const MAX_HERMITE_ORDER: usize = 1000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `i^n`
fn i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `ln k!` for `k = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Single-mode state in the photon-number basis, truncated at `N`.
///
/// Constructors in this module return normalized vectors; the operations in
/// the amplifier and weak-measurement modules return unnormalized ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("a Fock vector needs at least one amplitude".into()));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn zeros(truncation: usize) -> Self {
        Self { amplitudes: vec![ZERO; truncation + 1] }
    }

    /// Number state `|n>` in a space truncated at `truncation`.
    pub fn basis(n: usize, truncation: usize) -> Result<Self> {
        if n > truncation {
            return Err(Error::InvalidParameter(format!(
                "photon number {n} exceeds truncation {truncation}"
            )));
        }
        let mut v = Self::zeros(truncation);
        v.amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn vacuum(truncation: usize) -> Self {
        Self::basis(0, truncation).expect("n = 0 always fits")
    }

    pub fn truncation(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        self.amplitudes.get(n).copied().unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { amplitudes: self.amplitudes.iter().map(|a| a * c).collect() }
    }

    /// Photon-number distribution `|a_n|^2` (unnormalized if the state is).
    pub fn photon_probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<n>` of the normalized state.
    pub fn mean_photon_number(&self) -> Result<f64> {
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let s: f64 = self.photon_probabilities().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        Ok(s / norm)
    }

    /// Smallest `n` such that the relative weight above `n` is below `tol`.
    pub fn support_cutoff(&self, tol: f64) -> usize {
        let total = self.norm_sqr();
        let mut tail = 0.0;
        for n in (0..self.dim()).rev() {
            tail += self.amplitudes[n].norm_sqr();
            if tail > tol * total {
                return n;
            }
        }
        0
    }

    /// Same state embedded in (or cut down to) a different truncation.
    pub fn resized(&self, truncation: usize) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.resize(truncation + 1, ZERO);
        Self { amplitudes }
    }
}

/// Truncated coherent state `|gamma>`, re-normalized, together with the
/// probability mass that lay above the truncation.
pub fn coherent_with_tail(gamma: Complex64, truncation: usize) -> Result<(FockVector, f64)> {
    let mean = gamma.norm_sqr();
    if !mean.is_finite() {
        return Err(Error::InvalidParameter("coherent amplitude must be finite".into()));
    }
    if mean == 0.0 {
        return Ok((FockVector::vacuum(truncation), 0.0));
    }
    let ln_abs = gamma.norm().ln();
    let arg = gamma.arg();
    let lnf = ln_factorials(truncation);
    let amplitudes: Vec<Complex64> = (0..=truncation)
        .map(|n| {
            let ln_mag = -0.5 * mean + n as f64 * ln_abs - 0.5 * lnf[n];
            Complex64::from_polar(ln_mag.exp(), n as f64 * arg)
        })
        .collect();
    let head: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let tail = poisson_tail(mean, truncation, head);
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::TailMassTooLarge { tail, limit: TAIL_MASS_LIMIT });
    }
    let state = FockVector { amplitudes }.normalized()?;
    Ok((state, tail))
}

/// Truncated, re-normalized coherent state `|gamma>`.
pub fn coherent(gamma: Complex64, truncation: usize) -> Result<FockVector> {
    coherent_with_tail(gamma, truncation).map(|(s, _)| s)
}

/// Coherent state with a real amplitude.
pub fn coherent_real(amplitude: f64, truncation: usize) -> Result<FockVector> {
    coherent(Complex64::new(amplitude, 0.0), truncation)
}

/// Poisson mass above `truncation`; summed directly once past the mode so
/// that tiny tails keep their relative accuracy.
fn poisson_tail(mean: f64, truncation: usize, head: f64) -> f64 {
    if ((truncation + 1) as f64) <= mean {
        return (1.0 - head).max(0.0);
    }
    let n0 = truncation + 1;
    let ln_term0 = -mean + n0 as f64 * mean.ln() - ln_factorials(n0)[n0];
    let mut term = ln_term0.exp();
    let mut sum: f64 = 0.0;
    let mut n = n0;
    while term > 0.0 && term > 1e-30 * sum.max(1e-300) {
        sum += term;
        n += 1;
        term *= mean / n as f64;
    }
    sum
}

/// Truncated squeezed vacuum with real squeezing parameter `r`, plus its
/// truncated tail mass. Odd photon numbers carry exactly zero amplitude.
pub fn squeezed_vacuum_with_tail(r: f64, truncation: usize) -> Result<(FockVector, f64)> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter("squeezing parameter must be finite".into()));
    }
    let mut amplitudes = vec![ZERO; truncation + 1];
    let th = r.tanh();
    let mut a = 1.0 / r.cosh().sqrt();
    amplitudes[0] = Complex64::new(a, 0.0);
    let mut m = 1usize;
    while 2 * m <= truncation {
        // a_{2m} / a_{2m-2} = -tanh(r) sqrt((2m - 1) / (2m))
        a *= -th * (((2 * m - 1) as f64) / ((2 * m) as f64)).sqrt();
        amplitudes[2 * m] = Complex64::new(a, 0.0);
        m += 1;
    }
    let head: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let tail = (1.0 - head).max(0.0);
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::TailMassTooLarge { tail, limit: TAIL_MASS_LIMIT });
    }
    let state = FockVector { amplitudes }.normalized()?;
    Ok((state, tail))
}

pub fn squeezed_vacuum(r: f64, truncation: usize) -> Result<FockVector> {
    squeezed_vacuum_with_tail(r, truncation).map(|(s, _)| s)
}

/// Normalized Hermite functions `psi_n(p) = pi^{-1/4} (2^n n!)^{-1/2} H_n(p) e^{-p^2/2}`
/// for `n = 0..=n_max`, via the three-term recurrence on the functions
/// themselves (raw `H_n` overflows long before `n = 1000`).
pub fn hermite_functions(n_max: usize, p: f64) -> Result<Vec<f64>> {
    if n_max > MAX_HERMITE_ORDER {
        return Err(Error::HermiteOrderOutOfRange { n: n_max, max: MAX_HERMITE_ORDER });
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let psi0 = PI.powf(-0.25) * (-0.5 * p * p).exp();
    out.push(psi0);
    if n_max >= 1 {
        out.push(std::f64::consts::SQRT_2 * p * psi0);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * p * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    Ok(out)
}

/// `<n|p>` under the crate's quadrature convention.
pub fn quadrature_overlap_fock(n: usize, p: f64) -> Result<Complex64> {
    let psi = hermite_functions(n, p)?;
    Ok(i_pow(n) * psi[n])
}

/// The (improper) quadrature eigenstate `|p>` resolved on `n = 0..=N`:
/// amplitudes are `<n|p>`, so `inner(&quadrature_state(p, N), &x) = <p|x>`.
pub fn quadrature_state(p: f64, truncation: usize) -> Result<FockVector> {
    let psi = hermite_functions(truncation, p)?;
    Ok(FockVector {
        amplitudes: psi.iter().enumerate().map(|(n, &v)| i_pow(n) * v).collect(),
    })
}

/// `ln <p|alpha e^{i theta}>` for `alpha >= 0`.
///
/// The term `(gamma^2 - |gamma|^2)/2 = alpha^2 (e^{2i theta} - 1)/2` is formed
/// with [`cis_m1`]; evaluating `gamma^2/2` and `|gamma|^2/2` separately at
/// `alpha = 1e4` would cancel two numbers of size `5e7`.
pub fn ln_quadrature_overlap_coherent_polar(alpha: f64, theta: f64, p: f64) -> Complex64 {
    let quad = 0.5 * alpha * alpha * cis_m1(2.0 * theta);
    let gamma = Complex64::from_polar(alpha, theta);
    let linear = Complex64::new(0.0, -std::f64::consts::SQRT_2 * p) * gamma;
    Complex64::new(-0.25 * PI.ln() - 0.5 * p * p, 0.0) + quad + linear
}

/// `<p|alpha e^{i theta}>`.
pub fn quadrature_overlap_coherent_polar(alpha: f64, theta: f64, p: f64) -> Complex64 {
    ln_quadrature_overlap_coherent_polar(alpha, theta, p).exp()
}

/// `<p|gamma>` for an arbitrary complex amplitude.
pub fn quadrature_overlap_coherent(gamma: Complex64, p: f64) -> Complex64 {
    quadrature_overlap_coherent_polar(gamma.norm(), gamma.arg(), p)
}

fn check_dims(u: &FockVector, v: &FockVector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { left: u.dim(), right: v.dim() });
    }
    Ok(())
}

/// `<u|v>`, antilinear in the first argument.
pub fn inner(u: &FockVector, v: &FockVector) -> Result<Complex64> {
    check_dims(u, v)?;
    Ok(u.amplitudes.iter().zip(&v.amplitudes).map(|(a, b)| a.conj() * b).sum())
}

pub fn norm(u: &FockVector) -> f64 {
    u.norm()
}

/// `|<u|v>|^2` between the normalized versions of `u` and `v`.
pub fn fidelity(u: &FockVector, v: &FockVector) -> Result<f64> {
    check_dims(u, v)?;
    let nu = u.norm_sqr();
    let nv = v.norm_sqr();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ov = inner(u, v)?.norm_sqr();
    Ok((ov / (nu * nv)).clamp(0.0, 1.0))
}

/// `min_phi || u - e^{i phi} v ||`
pub fn phase_aligned_distance(u: &FockVector, v: &FockVector) -> Result<f64> {
    let ov = inner(u, v)?;
    // explicit difference: the closed form sqrt(|u|^2 + |v|^2 - 2|<u|v>|)
    // cancels down to sqrt(eps) and cannot resolve distances below ~1e-8
    let phase = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { Complex64::new(1.0, 0.0) };
    Ok(u.amplitudes.iter().zip(&v.amplitudes).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>().sqrt())
}

/// Two-mode pure state with amplitudes indexed by `(n_first, n_second)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeVector {
    amplitudes: DMatrix<Complex64>,
}

impl TwoModeVector {
    pub fn from_matrix(amplitudes: DMatrix<Complex64>) -> Result<Self> {
        if amplitudes.nrows() == 0 || amplitudes.ncols() == 0 {
            return Err(Error::InvalidParameter("empty two-mode amplitude grid".into()));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(first: usize, second: usize) -> Self {
        Self { amplitudes: DMatrix::zeros(first + 1, second + 1) }
    }

    /// `|u> (x) |v>`
    pub fn product(u: &FockVector, v: &FockVector) -> Self {
        let amplitudes =
            DMatrix::from_fn(u.dim(), v.dim(), |i, j| u.amplitudes[i] * v.amplitudes[j]);
        Self { amplitudes }
    }

    pub fn truncations(&self) -> (usize, usize) {
        (self.amplitudes.nrows() - 1, self.amplitudes.ncols() - 1)
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, first: usize, second: usize) -> Complex64 {
        self.amplitudes[(first, second)]
    }

    pub fn set_amplitude(&mut self, first: usize, second: usize, value: Complex64) {
        self.amplitudes[(first, second)] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Probability that may be dropped from unrepresentable photon-number
/// sectors before [`beam_splitter`] reports [`Error::TruncationLoss`].
pub const BEAM_SPLITTER_LOSS_LIMIT: f64 = 1e-24;

/// Unitary of the splitter restricted to the `K`-photon sector, on the basis
/// `|j, K - j>`, `j = 0..=K`.
fn sector_unitary(k: usize, theta: f64) -> DMatrix<Complex64> {
    let dim = k + 1;
    // H = i G with G = a b^dag - a^dag b (real antisymmetric, tridiagonal).
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 1..=k {
        let g = ((j * (k - j + 1)) as f64).sqrt();
        // G[j-1, j] = g, G[j, j-1] = -g
        h[(j - 1, j)] = Complex64::new(0.0, g);
        h[(j, j - 1)] = Complex64::new(0.0, -g);
    }
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -theta * l)),
    ));
    // exp(theta G) = exp(-i theta H)
    &v * phases * v.adjoint()
}

/// Apply a lossless beam splitter with amplitude transmissivity `t`.
///
/// The output keeps the input truncations. Photon number is conserved, so a
/// sector with `K` photons fits only if every `|j, K - j>` with nonzero output
/// amplitude is representable; probability pushed outside the grid is dropped
/// and, above [`BEAM_SPLITTER_LOSS_LIMIT`], reported as
/// [`Error::TruncationLoss`]. Keeping `K <= min(N_first, N_second)` for all
/// occupied sectors guarantees no loss.
pub fn beam_splitter(input: &TwoModeVector, t: f64) -> Result<TwoModeVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
    }
    let theta = t.acos();
    if theta == 0.0 {
        return Ok(input.clone());
    }
    let (n1, n2) = input.truncations();
    let mut out = TwoModeVector::zeros(n1, n2);
    let mut lost = 0.0;
    for k in 0..=(n1 + n2) {
        let j_lo = k.saturating_sub(n2);
        let j_hi = k.min(n1);
        let occupied = (j_lo..=j_hi).any(|j| input.amplitudes[(j, k - j)] != ZERO);
        if !occupied {
            continue;
        }
        let u = sector_unitary(k, theta);
        for jo in 0..=k {
            let amp: Complex64 = (j_lo..=j_hi).map(|j| u[(jo, j)] * input.amplitudes[(j, k - j)]).sum();
            if jo >= j_lo && jo <= j_hi {
                out.amplitudes[(jo, k - jo)] = amp;
            } else {
                lost += amp.norm_sqr();
            }
        }
    }
    if lost > BEAM_SPLITTER_LOSS_LIMIT {
        return Err(Error::TruncationLoss { lost });
    }
    Ok(out)
}

/// [`beam_splitter`] on `|psi> x |0>` in closed form: `|n, 0>` maps to
/// `sum_j sqrt(C(n, j)) t^j r^(n-j) |j, n - j>`.
pub fn split_with_vacuum(input: &FockVector, t: f64) -> Result<TwoModeVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
    }
    let n = input.truncation();
    let r = (1.0 - t * t).sqrt();
    let lf = ln_factorials(n);
    let mut out = TwoModeVector::zeros(n, n);
    for (k, &a) in input.amplitudes().iter().enumerate() {
        if a == ZERO {
            continue;
        }
        for j in 0..=k {
            let ln_binom = 0.5 * (lf[k] - lf[j] - lf[k - j]);
            let c = ln_binom.exp() * t.powi(j as i32) * r.powi((k - j) as i32);
            out.amplitudes[(j, k - j)] = a * c;
        }
    }
    Ok(out)
}

/// Which mode of a [`TwoModeVector`] a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    First,
    Second,
}

/// Density operator of a single truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("density matrix must be square and non-empty".into()));
        }
        Ok(Self { matrix })
    }

    /// `|psi><psi|` (not renormalized).
    pub fn pure(psi: &FockVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Self { matrix: &v * v.adjoint() }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn truncation(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `Tr(rho^2)`
    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum_ij |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<psi|rho|psi>`; with normalized `psi` this is the fidelity to a pure target.
    pub fn expectation(&self, psi: &FockVector) -> Result<f64> {
        if psi.dim() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch { left: psi.dim(), right: self.matrix.nrows() });
        }
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    pub fn max_hermitian_asymmetry(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Reduced state after tracing out `traced`.
pub fn partial_trace(input: &TwoModeVector, traced: Mode) -> DensityMatrix {
    let a = &input.amplitudes;
    let matrix = match traced {
        Mode::Second => a * a.adjoint(),
        Mode::First => {
            let at = a.transpose();
            &at * at.adjoint()
        }
    };
    DensityMatrix { matrix }
}

/// Pure-loss channel: mix the mode with vacuum on a beam splitter of
/// amplitude transmissivity `t` and discard the reflected port.
///
/// Kraus form `E_k = sum_n sqrt(C(n, k)) t^{n-k} r^k |n-k><n|`, which is what
/// [`beam_splitter`] followed by [`partial_trace`] produces.
pub fn attenuate(rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")));
    }
    let dim = rho.matrix.nrows();
    let r2 = 1.0 - t * t;
    let lnf = ln_factorials(dim);
    let ln_binom = |n: usize, k: usize| lnf[n] - lnf[k] - lnf[n - k];
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let tpow = t.powi((a + b) as i32);
            let mut acc = ZERO;
            let mut r2k = 1.0;
            for k in 0..dim - a.max(b) {
                let c = (0.5 * (ln_binom(a + k, k) + ln_binom(b + k, k))).exp();
                acc += rho.matrix[(a + k, b + k)] * (c * tpow * r2k);
                r2k *= r2;
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix { matrix: out })
}
