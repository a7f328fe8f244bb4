use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Closed interval of the real line on which a linguistic variable lives.
///
/// The sample grid is only used for plotting and diagnostics; inference
/// evaluates membership functions analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Universe {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self, FuzzyError> {
        let u = Universe { lo, hi, points };
        u.validate()?;
        Ok(u)
    }

    pub(crate) fn validate(&self) -> Result<(), FuzzyError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(FuzzyError::InvalidUniverse(format!(
                "bounds must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.points < 2 {
            return Err(FuzzyError::InvalidUniverse(format!(
                "need at least 2 sample points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    /// Evenly spaced samples including both endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == self.points - 1 {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl Default for Universe {
    fn default() -> Self {
        Universe {
            lo: -100.0,
            hi: 100.0,
            points: 200,
        }
    }
}

/// Type-1 Gaussian membership function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMf {
    pub center: f64,
    pub sigma: f64,
}

impl GaussianMf {
    pub fn new(center: f64, sigma: f64) -> Result<Self, FuzzyError> {
        if !center.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FuzzyError::InvalidMembership(format!(
                "gaussian needs finite center and sigma > 0, got center={center} sigma={sigma}"
            )));
        }
        Ok(GaussianMf { center, sigma })
    }

    #[inline]
    pub fn degree(&self, x: f64) -> f64 {
        gaussian(x, self.center, self.sigma)
    }
}

#[inline]
pub(crate) fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let d = x - center;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Interval of membership (or firing) degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiringInterval {
    pub lower: f64,
    pub upper: f64,
}

impl FiringInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, FuzzyError> {
        if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper {
            return Err(FuzzyError::InvalidFiring { lower, upper });
        }
        Ok(FiringInterval { lower, upper })
    }

    pub const fn crisp(value: f64) -> Self {
        FiringInterval {
            lower: value,
            upper: value,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Elementwise minimum (the t-norm applied to both bounds).
    pub fn meet(self, other: FiringInterval) -> FiringInterval {
        FiringInterval {
            lower: self.lower.min(other.lower),
            upper: self.upper.min(other.upper),
        }
    }

    /// Elementwise maximum (the s-norm applied to both bounds).
    pub fn join(self, other: FiringInterval) -> FiringInterval {
        FiringInterval {
            lower: self.lower.max(other.lower),
            upper: self.upper.max(other.upper),
        }
    }
}

/// Interval type-2 Gaussian with an uncertain mean.
///
/// The footprint of uncertainty is swept by moving the center across
/// `[center - spread, center + spread]` with a fixed `sigma`. A zero spread
/// collapses it to an ordinary [`GaussianMf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct It2GaussianMf {
    pub center: f64,
    pub sigma: f64,
    #[serde(default)]
    pub spread: f64,
}

impl It2GaussianMf {
    pub fn new(center: f64, sigma: f64, spread: f64) -> Result<Self, FuzzyError> {
        GaussianMf::new(center, sigma)?;
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(FuzzyError::InvalidMembership(format!(
                "center spread must be finite and nonnegative, got {spread}"
            )));
        }
        Ok(It2GaussianMf {
            center,
            sigma,
            spread,
        })
    }

    pub fn upper(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        if d <= self.spread {
            1.0
        } else {
            gaussian(d - self.spread, 0.0, self.sigma)
        }
    }

    pub fn lower(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        gaussian(d + self.spread, 0.0, self.sigma)
    }

    pub fn degree(&self, x: f64) -> FiringInterval {
        FiringInterval {
            lower: self.lower(x),
            upper: self.upper(x),
        }
    }

    /// Centroid interval of the set, used as the rule consequent under
    /// center-of-sets type reduction.
    pub fn centroid(&self) -> (f64, f64) {
        (self.center - self.spread, self.center + self.spread)
    }

    /// The type-1 set obtained by dropping the uncertainty.
    pub fn principal(&self) -> GaussianMf {
        GaussianMf {
            center: self.center,
            sigma: self.sigma,
        }
    }
}

/// Degree of `x` in a type-1 Gaussian.
pub fn mf_degree(x: f64, mf: &GaussianMf) -> f64 {
    mf.degree(x)
}

/// Lower and upper degree of `x` in an interval type-2 Gaussian.
pub fn it2_degree(x: f64, mf: &It2GaussianMf) -> FiringInterval {
    mf.degree(x)
}
