//! The ideal noiseless amplifier `c g^n`, its truncated physical version, and
//! the Kraus-constraint audit showing why the untruncated map cannot succeed.
//!
//! The success probability of the ideal map on `|alpha>` is the squared norm
//! of `c g^n |alpha>`, i.e. `|c|^2 exp(+(g^2 - 1)|alpha|^2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockVector;

/// Tolerance on `Gamma^dag Gamma <= 1`.
pub const KRAUS_TOLERANCE: f64 = 1e-12;

/// `c sum_{n <= N} g^n |n><n|`, or the untruncated `c g^n` when `truncation`
/// is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainOperator {
    gain: f64,
    scale: Complex64,
    truncation: Option<usize>,
}

/// Output of a diagonal gain: the unnormalized state and its squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplified {
    pub state: FockVector,
    pub norm_sqr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausAudit {
    pub valid: bool,
    /// `sup_n |c|^2 g^{2n}` over the checked range.
    pub max_violation: f64,
}

impl GainOperator {
    pub fn new(gain: f64, scale: Complex64, truncation: Option<usize>) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidParameter(format!("gain {gain} must be positive and finite")));
        }
        if !(scale.re.is_finite() && scale.im.is_finite()) {
            return Err(Error::InvalidParameter("scale must be finite".into()));
        }
        Ok(Self { gain, scale, truncation })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn scale(&self) -> Complex64 {
        self.scale
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    /// Apply to `state`; components above the truncation are removed.
    pub fn apply(&self, state: &FockVector) -> Result<Amplified> {
        let cut = self.truncation.unwrap_or(usize::MAX);
        let amplitudes = state
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(n, a)| {
                if n > cut {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let gn = self.gain.powi(n as i32);
                if !gn.is_finite() {
                    return Err(Error::Overflow { gain: self.gain, n });
                }
                Ok(a * self.scale * gn)
            })
            .collect::<Result<Vec<_>>>()?;
        let state = FockVector::new(amplitudes).map_err(|_| Error::Overflow {
            gain: self.gain,
            n: state.truncation(),
        })?;
        let norm_sqr = state.norm_sqr();
        if !norm_sqr.is_finite() {
            return Err(Error::Overflow { gain: self.gain, n: state.truncation() });
        }
        Ok(Amplified { state, norm_sqr })
    }

    /// Squared norm of the output for a normalized copy of `state`: the
    /// heralding probability of this single-outcome operation.
    pub fn success_probability(&self, state: &FockVector) -> Result<f64> {
        Ok(self.apply(&state.normalized()?)?.norm_sqr)
    }
}

/// `g^n` applied to `state` with unit scale.
pub fn apply_gain(state: &FockVector, g: f64) -> Result<Amplified> {
    GainOperator::new(g, Complex64::new(1.0, 0.0), None)?.apply(state)
}

/// Truncated amplifier with the largest scale the Kraus constraint allows,
/// `|c_N|^2 = 1 / max_{n <= N} g^{2n}`, i.e. `g^{-2N}` for `g > 1`.
pub fn truncated_amplifier(truncation: usize, g: f64) -> Result<GainOperator> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidParameter(format!("gain {g} must be positive and finite")));
    }
    let scale = if g > 1.0 { g.powi(-(truncation as i32)) } else { 1.0 };
    GainOperator::new(g, Complex64::new(scale, 0.0), Some(truncation))
}

/// Check `|c|^2 g^{2n} <= 1` for every `n <= n_check` (and within the
/// operator's own truncation, if any).
pub fn kraus_validity(op: &GainOperator, n_check: usize) -> KrausAudit {
    let top = op.truncation.map_or(n_check, |t| t.min(n_check));
    let c2 = op.scale.norm_sqr();
    // g^{2n} is monotone, so the supremum sits at one end of the range.
    let sup = if op.gain >= 1.0 {
        c2 * op.gain.powi(2 * top as i32)
    } else {
        c2
    };
    KrausAudit { valid: sup <= 1.0 + KRAUS_TOLERANCE, max_violation: sup }
}

/// `|c|^2 exp((g^2 - 1) alpha^2)`, the squared norm of `c g^n |alpha>`.
pub fn exact_success_probability(g: f64, alpha: f64, c: Complex64) -> f64 {
    c.norm_sqr() * ((g * g - 1.0) * alpha * alpha).exp()
}
