//! Textual environment specifications.
//!
//! ```text
//! det:wedge                    deterministic feedback
//! sto:double-sine              mean function plus bounded noise
//! switch:wedge,const(0.3)      first function for ceil(n/2) rounds, then the second
//! drift:wedge,linear(-1,2)     mean modulated by (b/2) sin(2 pi t / n)
//! perm:wedge,const(0.2)/1,0    contiguous blocks streamed in the given order
//! lure                         switch crafted to mislead follow-the-leader
//! ```
//!
//! Functions are `wedge`, `wedge(center)`, `wedge(center,height,slope)`,
//! `double-sine`, `const(value)` and `linear(intercept,slope)`.

use std::fmt;
use std::str::FromStr;

use crate::environments::{AdversarySpec, NoiseLaw, RewardProcess, TestFunction};
use crate::error::{Error, Result};
use crate::partition::Domain;

/// Center, peak height and slope of the wedge underlying [`EnvSpec::Lure`].
pub const LURE_CENTER: f64 = 0.65;
pub const LURE_HEIGHT: f64 = 0.65;
pub const LURE_SLOPE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Deterministic(TestFunction),
    Stochastic(TestFunction),
    Adversary(AdversarySpec),
    /// `g + b/2` for the first half of the rounds and `g - b/2` afterwards,
    /// `g` a wedge peaked at 0.65. A learner sweeping cells left to right
    /// sees the inflated left half first and settles next to 0.5.
    Lure,
}

fn env_error(message: impl Into<String>) -> Error {
    Error::config("env", message)
}

/// Splits on commas outside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

pub fn parse_function(s: &str) -> Result<TestFunction> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        Some(open) => {
            let close = s
                .strip_suffix(')')
                .ok_or_else(|| env_error(format!("unbalanced parentheses in `{s}`")))?;
            let args = close[open + 1..]
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| env_error(format!("bad number `{a}` in `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            (s[..open].trim(), args)
        }
        None => (s, Vec::new()),
    };
    let arity = |expected: &[usize]| {
        if expected.contains(&args.len()) {
            Ok(())
        } else {
            Err(env_error(format!(
                "`{name}` takes {expected:?} arguments, got {}",
                args.len()
            )))
        }
    };
    match name.to_ascii_lowercase().as_str() {
        "wedge" => {
            arity(&[0, 1, 3])?;
            let mut f = TestFunction::wedge();
            if let TestFunction::Wedge {
                center,
                height,
                slope,
            } = &mut f
            {
                if let Some(&c) = args.first() {
                    *center = c;
                }
                if args.len() == 3 {
                    *height = args[1];
                    *slope = args[2];
                }
            }
            Ok(f)
        }
        "double-sine" | "double_sine" | "doublesine" => {
            arity(&[0])?;
            Ok(TestFunction::DoubleSine)
        }
        "const" | "constant" => {
            arity(&[1])?;
            Ok(TestFunction::constant(args[0]))
        }
        "linear" => {
            arity(&[2])?;
            Ok(TestFunction::linear(args[0], args[1]))
        }
        other => Err(env_error(format!("unknown function `{other}`"))),
    }
}

impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("lure") {
            return Ok(EnvSpec::Lure);
        }
        let (law, body) = s
            .split_once(':')
            .ok_or_else(|| env_error(format!("expected `<law>:<functions>`, got `{s}`")))?;
        let two = |body: &str| -> Result<(TestFunction, TestFunction)> {
            match split_top(body).as_slice() {
                [a, b] => Ok((parse_function(a)?, parse_function(b)?)),
                _ => Err(env_error(format!("`{law}` needs exactly two functions"))),
            }
        };
        match law.trim().to_ascii_lowercase().as_str() {
            "det" | "deterministic" => Ok(EnvSpec::Deterministic(parse_function(body)?)),
            "sto" | "stochastic" => Ok(EnvSpec::Stochastic(parse_function(body)?)),
            "switch" => {
                let (first, second) = two(body)?;
                Ok(EnvSpec::Adversary(AdversarySpec::Switch { first, second }))
            }
            "drift" => {
                let (mean, modulation) = two(body)?;
                Ok(EnvSpec::Adversary(AdversarySpec::Drift {
                    mean,
                    modulation,
                }))
            }
            "perm" | "permutation" => {
                let (pool, order) = match body.rsplit_once('/') {
                    Some((pool, order)) => (pool, Some(order)),
                    None => (body, None),
                };
                let pool = split_top(pool)
                    .into_iter()
                    .map(parse_function)
                    .collect::<Result<Vec<_>>>()?;
                let permutation = match order {
                    Some(order) => order
                        .split(',')
                        .map(|i| {
                            i.trim()
                                .parse::<usize>()
                                .map_err(|_| env_error(format!("bad block index `{i}`")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                    None => (0..pool.len()).collect(),
                };
                Ok(EnvSpec::Adversary(AdversarySpec::TaskPermutation {
                    pool,
                    permutation,
                }))
            }
            other => Err(env_error(format!("unknown feedback law `{other}`"))),
        }
    }
}

fn write_function(f: &TestFunction, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match *f {
        TestFunction::Wedge {
            center,
            height,
            slope,
        } => {
            if (center, height, slope) == (0.5, 0.5, 1.0) {
                write!(out, "wedge")
            } else {
                write!(out, "wedge({center},{height},{slope})")
            }
        }
        TestFunction::DoubleSine => write!(out, "double-sine"),
        TestFunction::Constant { value } => write!(out, "const({value})"),
        TestFunction::Linear { intercept, slope } => write!(out, "linear({intercept},{slope})"),
    }
}

struct Fun<'a>(&'a TestFunction);

impl fmt::Display for Fun<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_function(self.0, f)
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Deterministic(g) => write!(f, "det:{}", Fun(g)),
            EnvSpec::Stochastic(g) => write!(f, "sto:{}", Fun(g)),
            EnvSpec::Adversary(AdversarySpec::Switch { first, second }) => {
                write!(f, "switch:{},{}", Fun(first), Fun(second))
            }
            EnvSpec::Adversary(AdversarySpec::Drift { mean, modulation }) => {
                write!(f, "drift:{},{}", Fun(mean), Fun(modulation))
            }
            EnvSpec::Adversary(AdversarySpec::TaskPermutation { pool, permutation }) => {
                write!(f, "perm:")?;
                for (i, g) in pool.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", Fun(g))?;
                }
                let order: Vec<String> = permutation.iter().map(|i| i.to_string()).collect();
                write!(f, "/{}", order.join(","))
            }
            EnvSpec::Lure => write!(f, "lure"),
        }
    }
}

impl EnvSpec {
    /// The switch behind [`EnvSpec::Lure`] for a variation range `b`.
    pub fn lure_switch(range: f64) -> Result<AdversarySpec> {
        // The best left-half value under the first function must beat the
        // right-half optimum under the second.
        let gap = LURE_SLOPE * (LURE_CENTER - 0.5);
        if range.is_nan() || range <= gap {
            return Err(Error::config(
                "b",
                format!("the lure needs b > {gap}, got {range}"),
            ));
        }
        let wedge = |height| TestFunction::Wedge {
            center: LURE_CENTER,
            height,
            slope: LURE_SLOPE,
        };
        Ok(AdversarySpec::Switch {
            first: wedge(LURE_HEIGHT + range / 2.0),
            second: wedge(LURE_HEIGHT - range / 2.0),
        })
    }

    /// Builds the process for one repetition. `range` is the noise range or
    /// the adversary's variation budget; it is ignored for deterministic
    /// feedback.
    pub fn build(
        &self,
        domain: &Domain,
        horizon: u64,
        range: f64,
        noise: NoiseLaw,
        seed: u64,
    ) -> Result<RewardProcess> {
        match self {
            EnvSpec::Deterministic(f) => {
                RewardProcess::deterministic(f.clone(), domain.clone(), horizon)
            }
            EnvSpec::Stochastic(f) => {
                RewardProcess::stochastic(f.clone(), domain.clone(), horizon, range, noise, seed)
            }
            EnvSpec::Adversary(spec) => {
                RewardProcess::adversary(spec.clone(), domain.clone(), horizon, range)
            }
            EnvSpec::Lure => {
                RewardProcess::adversary(Self::lure_switch(range)?, domain.clone(), horizon, range)
            }
        }
    }

    /// Smoothness pair of the average function when it is a single test
    /// function.
    pub fn smoothness(&self, domain: &Domain, branching: u32) -> Option<(f64, f64)> {
        match self {
            EnvSpec::Deterministic(f) | EnvSpec::Stochastic(f) => f.smoothness(domain, branching),
            EnvSpec::Lure => TestFunction::Wedge {
                center: LURE_CENTER,
                height: LURE_HEIGHT,
                slope: LURE_SLOPE,
            }
            .smoothness(domain, branching),
            EnvSpec::Adversary(_) => None,
        }
    }

    /// Whether the process draws per-round noise.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, EnvSpec::Stochastic(_))
    }
}
