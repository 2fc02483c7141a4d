//! Closed-form test functions with known ranges and optima.

use serde::{Deserialize, Serialize};

use crate::partition::Domain;

/// Maximizer of the double-sine on `[0, 1]`, found by a dense grid followed
/// by bounded scalar refinement.
pub const DOUBLE_SINE_ARGMAX: f64 = 0.867_526_208_255_979;
pub const DOUBLE_SINE_MAX: f64 = 0.975_599_143_811_574_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `height - slope * max_j |x_j - center|`.
    Wedge {
        center: f64,
        height: f64,
        slope: f64,
    },
    /// `(1 + sin(13 x) sin(27 x)) / 2` on the first coordinate: a global
    /// peak near 0.8675 and a close runner-up near 0.398.
    DoubleSine,
    Constant {
        value: f64,
    },
    /// `intercept + slope * x_0`.
    Linear {
        intercept: f64,
        slope: f64,
    },
}

impl TestFunction {
    /// The canonical wedge `0.5 - |x - 0.5|`.
    pub fn wedge() -> Self {
        TestFunction::Wedge {
            center: 0.5,
            height: 0.5,
            slope: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        TestFunction::Linear { intercept, slope }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Wedge { .. } => "wedge",
            TestFunction::DoubleSine => "double-sine",
            TestFunction::Constant { .. } => "const",
            TestFunction::Linear { .. } => "linear",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Wedge {
                center,
                height,
                slope,
            } => {
                let dist = x.iter().fold(0.0f64, |m, v| m.max((v - center).abs()));
                height - slope * dist
            }
            TestFunction::DoubleSine => 0.5 * (1.0 + (13.0 * x[0]).sin() * (27.0 * x[0]).sin()),
            TestFunction::Constant { value } => value,
            TestFunction::Linear { intercept, slope } => intercept + slope * x[0],
        }
    }

    /// Closed-form `(min, max)` of the function over `domain`.
    pub fn range(&self, domain: &Domain) -> (f64, f64) {
        match *self {
            TestFunction::Wedge {
                center,
                height,
                slope,
            } => {
                let (mut near, mut far) = (0.0f64, 0.0f64);
                for j in 0..domain.dim() {
                    let (lo, hi) = (domain.lows()[j], domain.highs()[j]);
                    let gap = if center < lo {
                        lo - center
                    } else if center > hi {
                        center - hi
                    } else {
                        0.0
                    };
                    near = near.max(gap);
                    far = far.max((lo - center).abs().max((hi - center).abs()));
                }
                let a = height - slope * near;
                let b = height - slope * far;
                (a.min(b), a.max(b))
            }
            TestFunction::DoubleSine => (0.0, 1.0),
            TestFunction::Constant { value } => (value, value),
            TestFunction::Linear { intercept, slope } => {
                let a = intercept + slope * domain.lows()[0];
                let b = intercept + slope * domain.highs()[0];
                (a.min(b), a.max(b))
            }
        }
    }

    /// Declared bound on `|f|` over `domain`.
    pub fn abs_bound(&self, domain: &Domain) -> f64 {
        let (lo, hi) = self.range(domain);
        lo.abs().max(hi.abs())
    }

    /// A global maximizer and its value, when known in closed form.
    pub fn optimum(&self, domain: &Domain) -> Option<(Vec<f64>, f64)> {
        match *self {
            TestFunction::Wedge {
                center,
                height,
                slope,
            } => {
                let inside = domain
                    .lows()
                    .iter()
                    .zip(domain.highs())
                    .all(|(lo, hi)| (*lo..=*hi).contains(&center));
                (inside && slope >= 0.0).then(|| (vec![center; domain.dim()], height))
            }
            TestFunction::DoubleSine => {
                let unit = domain.lows()[0] == 0.0 && domain.highs()[0] == 1.0;
                unit.then(|| {
                    let mut x = domain.center();
                    x[0] = DOUBLE_SINE_ARGMAX;
                    (x, DOUBLE_SINE_MAX)
                })
            }
            TestFunction::Constant { value } => Some((domain.center(), value)),
            TestFunction::Linear { intercept, slope } => {
                let mut x = domain.center();
                x[0] = if slope >= 0.0 {
                    domain.highs()[0]
                } else {
                    domain.lows()[0]
                };
                let v = intercept + slope * x[0];
                Some((x, v))
            }
        }
    }

    /// Smoothness pair `(nu, rho)` valid for the canonical `K`-ary
    /// partition of a one-dimensional domain.
    pub fn smoothness(&self, domain: &Domain, branching: u32) -> Option<(f64, f64)> {
        if domain.dim() != 1 {
            return None;
        }
        let width = domain.width(0);
        let rho = 1.0 / branching as f64;
        let lipschitz = match *self {
            TestFunction::Wedge { slope, .. } => slope.abs(),
            TestFunction::DoubleSine => 20.0,
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Linear { slope, .. } => slope.abs(),
        };
        Some(((lipschitz * width).max(f64::MIN_POSITIVE), rho))
    }
}
