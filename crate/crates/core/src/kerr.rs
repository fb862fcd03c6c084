//! Cross-Kerr coupling to a coherent ancilla read out by homodyne detection.
//!
//! The ancilla `|alpha>` (real `alpha`, typically `1e4`) couples to the probe
//! through `exp(-i kappa_T n_A n_B)` and is post-selected on the quadrature
//! eigenstate `|p>`. With the crate's quadrature convention the number weak
//! value is `n_W = alpha^2 - i sqrt(2) alpha p`, so outcomes `p < 0` amplify
//! with gain `g(p) = exp(-sqrt(2) alpha p kappa_T)`.
//!
//! The real part `+alpha^2` differs in sign from the value sometimes quoted
//! for this setup. It only contributes the known phase ramp
//! `exp(-i kappa_T alpha^2 n)`, which the exact state carries too, so it drops
//! out of every fidelity and probability computed here.
//!
//! The ancilla is never expanded in a Fock basis: at `alpha = 1e4` it holds
//! `1e8` photons on average. Every exact quantity goes through the closed form
//! of `<p|alpha e^{-i kappa_T n}>`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, FockVector};
use crate::numerics::{simpson, UniformGrid};
use crate::weak::{weak_evolve, WeakValue, WeaknessResiduals};

/// Physical and numerical parameters of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Ancilla coherent amplitude (real, > 0).
    pub alpha: f64,
    /// Probe coherent amplitude (real, >= 0).
    pub beta: f64,
    /// Integrated cross-Kerr coupling.
    pub kappa_t: f64,
    /// Probe photon-number truncation.
    pub truncation: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_step: f64,
    /// Success window `[window_lo, window_hi]` of homodyne outcomes.
    pub window_lo: f64,
    pub window_hi: f64,
}

impl ProtocolConfig {
    /// `alpha = 1e4`, `beta = 0.2`, `kappa_T = 4e-5`, outcomes on `[-6, 2]` in
    /// steps of `0.005`, success for `-1.6 <= p <= p_threshold`.
    pub fn fig2() -> Self {
        Self::weak_model(4e-5, 0.2)
    }

    /// [`fig2`](Self::fig2) settings with a different coupling and probe amplitude; the
    /// window upper edge follows the cloning threshold.
    pub fn weak_model(kappa_t: f64, beta: f64) -> Self {
        let alpha = 1e4;
        Self {
            alpha,
            beta,
            kappa_t,
            truncation: 40,
            p_min: -6.0,
            p_max: 2.0,
            p_step: 0.005,
            window_lo: -1.6,
            window_hi: success_threshold(alpha, kappa_t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("kappa_t", self.kappa_t)?;
        positive("p_step", self.p_step)?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must be non-negative", self.beta)));
        }
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min < self.p_max) {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] must be a finite, non-empty range",
                self.p_min, self.p_max
            )));
        }
        if !(self.window_lo.is_finite() && self.window_hi.is_finite()) {
            return Err(Error::InvalidParameter("window edges must be finite".into()));
        }
        if self.window_lo > self.window_hi
            || self.window_lo < self.p_min
            || self.window_hi > self.p_max
        {
            return Err(Error::WindowOutsideGrid {
                lo: self.window_lo,
                hi: self.window_hi,
                min: self.p_min,
                max: self.p_max,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::with_max_step(self.p_min, self.p_max, self.p_step)
    }

    /// Integration grid spanning exactly the success window.
    pub fn window_grid(&self) -> Result<UniformGrid> {
        self.validate()?;
        UniformGrid::with_max_step(self.window_lo, self.window_hi, self.p_step)
    }

    /// Largest gain inside the success window.
    pub fn max_window_gain(&self) -> f64 {
        gain(self, self.window_lo).max(gain(self, self.window_hi))
    }

    /// Probe state `|beta>` after checking that the truncation also holds the
    /// amplified amplitude `g_max beta`.
    pub fn probe(&self) -> Result<FockVector> {
        fock::coherent_real(self.beta * self.max_window_gain(), self.truncation)?;
        fock::coherent_real(self.beta, self.truncation)
    }

    pub fn contains(&self, p: f64) -> bool {
        const SLACK: f64 = 1e-12;
        p >= self.window_lo - SLACK && p <= self.window_hi + SLACK
    }
}

/// `n_W = <p|n|alpha> / <p|alpha> = alpha^2 - i sqrt(2) alpha p`.
pub fn number_weak_value(alpha: f64, p: f64) -> WeakValue {
    WeakValue::new(Complex64::new(alpha * alpha, -std::f64::consts::SQRT_2 * alpha * p))
}

/// `g(p) = exp(kappa_T Im n_W) = exp(-sqrt(2) alpha p kappa_T)`.
pub fn gain(cfg: &ProtocolConfig, p: f64) -> f64 {
    number_weak_value(cfg.alpha, p).gain(cfg.kappa_t)
}

/// Outcome where the gain reaches `sqrt(2)`: `-ln 2 / (2 sqrt(2) alpha kappa_T)`.
pub fn success_threshold(alpha: f64, kappa_t: f64) -> f64 {
    -std::f64::consts::LN_2 / (2.0 * std::f64::consts::SQRT_2 * alpha * kappa_t)
}

/// Exact post-selected state of an arbitrary probe:
/// `psi_n <p|alpha e^{-i kappa_T n}>`, unnormalized.
pub fn exact_probe_state_for(probe: &FockVector, alpha: f64, kappa_t: f64, p: f64) -> FockVector {
    let amplitudes = probe
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, a)| a * fock::quadrature_overlap_coherent_polar(alpha, -kappa_t * n as f64, p))
        .collect();
    FockVector::new(amplitudes).expect("overlaps are bounded by pi^{-1/4}")
}

/// Exact probe state for the configured coherent probe. Its squared norm is
/// the exact outcome density at `p`.
pub fn exact_probe_state(cfg: &ProtocolConfig, p: f64) -> Result<FockVector> {
    let probe = cfg.probe()?;
    Ok(exact_probe_state_for(&probe, cfg.alpha, cfg.kappa_t, p))
}

/// Weak-approximation density `exp(-p^2 + (g^2 - 1) beta^2) / sqrt(pi)`.
pub fn density_weak(cfg: &ProtocolConfig, p: f64) -> f64 {
    let g = gain(cfg, p);
    (-p * p + (g * g - 1.0) * cfg.beta * cfg.beta).exp() / std::f64::consts::PI.sqrt()
}

pub fn density_exact(cfg: &ProtocolConfig, p: f64) -> Result<f64> {
    Ok(exact_probe_state(cfg, p)?.norm_sqr())
}

/// Everything recorded for one homodyne outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub p: f64,
    pub n_w: WeakValue,
    pub gain: f64,
    pub density_weak: f64,
    pub density_exact: f64,
    /// Fidelity between the normalized weak-approximation and exact states.
    pub fidelity: f64,
    pub weak_state: FockVector,
    pub exact_state: FockVector,
}

fn outcome_with_probe(cfg: &ProtocolConfig, probe: &FockVector, p: f64) -> Result<OutcomeRecord> {
    let n_w = number_weak_value(cfg.alpha, p);
    let exact_state = exact_probe_state_for(probe, cfg.alpha, cfg.kappa_t, p);
    let weak_state = weak_evolve(probe, n_w, cfg.kappa_t)?;
    Ok(OutcomeRecord {
        p,
        n_w,
        gain: n_w.gain(cfg.kappa_t),
        density_weak: density_weak(cfg, p),
        density_exact: exact_state.norm_sqr(),
        fidelity: fock::fidelity(&weak_state, &exact_state)?,
        weak_state,
        exact_state,
    })
}

pub fn outcome(cfg: &ProtocolConfig, p: f64) -> Result<OutcomeRecord> {
    outcome_with_probe(cfg, &cfg.probe()?, p)
}

fn records_on(cfg: &ProtocolConfig, grid: &UniformGrid) -> Result<Vec<OutcomeRecord>> {
    let probe = cfg.probe()?;
    grid.points()
        .par_iter()
        .map(|&p| outcome_with_probe(cfg, &probe, p))
        .collect()
}

/// One record per grid point, ordered by `p`.
pub fn sweep(cfg: &ProtocolConfig) -> Result<Vec<OutcomeRecord>> {
    cfg.validate()?;
    records_on(cfg, &cfg.grid()?)
}

/// Records on the success-window integration grid.
pub fn window_sweep(cfg: &ProtocolConfig) -> Result<Vec<OutcomeRecord>> {
    records_on(cfg, &cfg.window_grid()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbability {
    /// Integral of the weak-approximation density over the window.
    pub weak: f64,
    /// Integral of the exact density over the window.
    pub exact: f64,
}

/// Simpson integral of both densities over the success window.
pub fn success_probability(cfg: &ProtocolConfig) -> Result<SuccessProbability> {
    let grid = cfg.window_grid()?;
    let records = records_on(cfg, &grid)?;
    let weak: Vec<f64> = records.iter().map(|r| r.density_weak).collect();
    let exact: Vec<f64> = records.iter().map(|r| r.density_exact).collect();
    Ok(SuccessProbability { weak: simpson(&grid, &weak), exact: simpson(&grid, &exact) })
}

/// Minimum weak/exact fidelity over the window integration nodes.
pub fn window_min_fidelity(cfg: &ProtocolConfig) -> Result<f64> {
    Ok(window_sweep(cfg)?.iter().map(|r| r.fidelity).fold(1.0, f64::min))
}

/// Weakness residuals of the protocol at outcome `p`, using the closed-form
/// transfer ratio `<p|alpha e^{-i kappa_T n}> / <p|alpha>`.
pub fn protocol_weakness_residuals(cfg: &ProtocolConfig, p: f64) -> Result<WeaknessResiduals> {
    let probe = fock::coherent_real(cfg.beta, cfg.truncation)?;
    let n_w = number_weak_value(cfg.alpha, p);
    let rate = Complex64::new(n_w.im(), -n_w.re()) * cfg.kappa_t;
    let l0 = fock::ln_quadrature_overlap_coherent_polar(cfg.alpha, 0.0, p);
    let residuals = probe
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let ln = fock::ln_quadrature_overlap_coherent_polar(cfg.alpha, -cfg.kappa_t * n as f64, p);
            let ratio = (ln - l0).exp();
            ((ratio - (rate * n as f64).exp()) * a).norm()
        })
        .collect();
    Ok(WeaknessResiduals::from_residuals(residuals))
}

/// Header of the sweep CSV.
pub const CSV_HEADER: &str = "p,gain,density_weak,density_exact,fidelity";

/// Six significant digits: fixed notation for magnitudes in `[1e-4, 1e6)`,
/// scientific (`1.23456e-7`) otherwise.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// Write records as CSV with columns `p, gain, density_weak, density_exact, fidelity`.
pub fn write_csv<W: Write>(records: &[OutcomeRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_sig6(r.p),
            format_sig6(r.gain),
            format_sig6(r.density_weak),
            format_sig6(r.density_exact),
            format_sig6(r.fidelity)
        )?;
    }
    Ok(())
}
