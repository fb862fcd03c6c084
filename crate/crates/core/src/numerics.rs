//! Small numerical kernels shared by the physics modules: a cancellation-free
//! `e^{ix} - 1`, uniform grids, and composite Simpson weights.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `e^{ix} - 1` without cancellation for small `x`.
///
/// The real part is `cos x - 1 = -2 sin^2(x/2)`, which stays accurate when
/// `x` is tiny and the result is later multiplied by a large prefactor.
pub fn cis_m1(x: f64) -> Complex64 {
    let h = (0.5 * x).sin();
    Complex64::new(-2.0 * h * h, x.sin())
}

/// A uniform grid with an even number of intervals so that composite Simpson
/// integration applies directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub min: f64,
    pub max: f64,
    intervals: usize,
}

impl UniformGrid {
    /// Grid on `[min, max]` whose spacing does not exceed `step`.
    ///
    /// The interval count is the smallest even integer with
    /// `(max - min) / intervals <= step`. A degenerate range (`min == max`)
    /// yields a single node.
    pub fn with_max_step(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if max < min {
            return Err(Error::InvalidParameter(format!("grid max {max} < min {min}")));
        }
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!("grid step {step} must be positive")));
        }
        let width = max - min;
        if width == 0.0 {
            return Ok(Self { min, max, intervals: 0 });
        }
        // Relative slack so that e.g. 8 / 0.005 lands on 1600, not 1601.
        let mut intervals = (width / step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Ok(Self { min, max, intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        if self.intervals == 0 {
            0.0
        } else {
            (self.max - self.min) / self.intervals as f64
        }
    }

    /// Node `i`, computed from the endpoints to avoid accumulated drift.
    pub fn point(&self, i: usize) -> f64 {
        if self.intervals == 0 {
            return self.min;
        }
        if i == self.intervals {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / self.intervals as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Composite Simpson weights on this grid.
    pub fn simpson_weights(&self) -> Vec<f64> {
        simpson_weights(self.intervals, self.step())
    }
}

/// Composite Simpson weights `h/3 * [1, 4, 2, 4, ..., 4, 1]`.
///
/// `intervals` must be even; zero intervals gives a single zero weight.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    assert!(intervals.is_multiple_of(2), "Simpson rule needs an even interval count");
    if intervals == 0 {
        return vec![0.0];
    }
    (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Simpson integral of samples taken on `grid`.
pub fn simpson(grid: &UniformGrid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.len());
    grid.simpson_weights().iter().zip(values).map(|(w, v)| w * v).sum()
}
