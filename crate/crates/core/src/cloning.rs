//! Two clones of `|beta>` from an amplified probe, using linear optics only.
//!
//! The amplified state (ideally `|g beta>`, `g >= sqrt 2`) is split on a beam
//! splitter with `t = 1/g`, which leaves amplitude `beta` in the first output
//! and `sqrt(g^2 - 1) beta` in the second. The second output is then
//! attenuated with `t' = 1/sqrt(g^2 - 1)` (a second splitter whose tapped port
//! is discarded). For coherent inputs both steps are exact.
//!
//! Clone quality is the fidelity `<beta|rho|beta>` of each output with the
//! ideal coherent state.

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, partial_trace, DensityMatrix, FockVector, Mode};
use crate::kerr::{self, ProtocolConfig};

/// Slack on the `g >= sqrt(2)` requirement.
pub const GAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CloneReport {
    pub gain_used: f64,
    /// Amplitude transmissivities: the splitter, then the attenuator on output 2.
    pub transmissivity_schedule: Vec<f64>,
    pub clone_fidelities: (f64, f64),
    /// `Tr(rho_1^2)` of the first output right after the splitter. Equals 1
    /// exactly when the split leaves the two outputs unentangled, as it does
    /// for a coherent input.
    pub joint_state_purity: f64,
}

/// Split `amplified` into two approximate copies of `|beta>`.
pub fn extract_clones(amplified: &FockVector, beta: f64, g: f64) -> Result<CloneReport> {
    if !(g.is_finite() && g >= SQRT_2 - GAIN_SLACK) {
        return Err(Error::GainTooSmall { gain: g });
    }
    let state = amplified.normalized()?;
    let n = state.truncation();
    let target = fock::coherent_real(beta, n)?;

    let t_split = 1.0 / g;
    // g slightly under sqrt 2 (within the slack) would push t' past 1
    let t_atten = (1.0 / (g * g - 1.0).sqrt()).min(1.0);

    let split = fock::split_with_vacuum(&state, t_split)?;
    let first = partial_trace(&split, Mode::Second);
    let second = fock::attenuate(&partial_trace(&split, Mode::First), t_atten)?;

    Ok(CloneReport {
        gain_used: g,
        transmissivity_schedule: vec![t_split, t_atten],
        clone_fidelities: (clone_fidelity(&first, &target)?, clone_fidelity(&second, &target)?),
        joint_state_purity: first.purity(),
    })
}

fn clone_fidelity(rho: &DensityMatrix, target: &FockVector) -> Result<f64> {
    Ok(rho.expectation(target)?.clamp(0.0, 1.0))
}

/// Undo the known phase ramp `exp(-i phi n)` with a phase shifter.
pub fn compensate_phase(state: &FockVector, phi_per_photon: f64) -> FockVector {
    let amplitudes = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, a)| a * Complex64::from_polar(1.0, (phi_per_photon * n as f64).rem_euclid(TAU)))
        .collect();
    FockVector::new(amplitudes).expect("unit-modulus phases keep amplitudes finite")
}

/// Run the protocol at outcome `p` and split the exact heralded state.
///
/// The real part of the weak value rotates the probe by `Re(n_W) kappa_T`
/// per photon. That rotation is known in advance, so it is undone before the
/// splitter; otherwise the clones are compared against a rotated target.
pub fn pipeline_clone_fidelity(cfg: &ProtocolConfig, p: f64) -> Result<CloneReport> {
    let g = kerr::gain(cfg, p);
    if g < SQRT_2 - GAIN_SLACK {
        return Err(Error::GainTooSmall { gain: g });
    }
    if !cfg.contains(p) {
        return Err(Error::OutsideWindow { p, lo: cfg.window_lo, hi: cfg.window_hi });
    }
    let state = kerr::exact_probe_state(cfg, p)?;
    let phi = kerr::number_weak_value(cfg.alpha, p).re() * cfg.kappa_t;
    extract_clones(&compensate_phase(&state, phi), cfg.beta, g)
}
