//! Monotone parametric specifications over a single signal `x`.
//!
//! Concrete syntax (`.psl`):
//!
//! ```text
//! param tau in [0,1];
//! param h in [0,1];
//! spec G[tau,1] (x < h)
//! ```
//!
//! Every parameter receives a polarity from its syntactic position. Parameters
//! that make the formula harder to satisfy as they grow are flipped (`p -> 1 - p`)
//! before being mapped onto their raw range, so the truth value is monotone
//! non-decreasing in every coordinate of the normalized unit box.

mod eval;
mod parser;
mod print;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use parser::parse;
pub use print::render;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undeclared parameter `{name}`")]
    Undeclared {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("parameter `{0}` declared more than once")]
    Redeclared(String),
    #[error("parameter `{name}` has an empty range [{lo}, {hi}]")]
    EmptyRange { name: String, lo: f64, hi: f64 },
    #[error("parameter `{0}` occurs with both polarities; the specification is not monotone")]
    InconsistentPolarity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Increasing,
    Decreasing,
}

impl Polarity {
    pub fn flip(self) -> Self {
        match self {
            Polarity::Increasing => Polarity::Decreasing,
            Polarity::Decreasing => Polarity::Increasing,
        }
    }

    fn times(self, other: Polarity) -> Self {
        if self == other {
            Polarity::Increasing
        } else {
            Polarity::Decreasing
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Increasing => "+",
            Polarity::Decreasing => "-",
        })
    }
}

/// A temporal bound or atom threshold: a raw constant or a declared parameter
/// (by index into [`ParametricSpec::params`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Const(f64),
    Param(usize),
}

/// Formula in negation normal form: `Not` only wraps atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Globally {
        lo: Bound,
        hi: Bound,
        child: Box<Formula>,
    },
    Eventually {
        lo: Bound,
        hi: Bound,
        child: Box<Formula>,
    },
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Less(Bound),
    Greater(Bound),
}

impl Formula {
    /// Negation pushed through to the atoms.
    pub fn negate(self) -> Formula {
        match self {
            Formula::Globally { lo, hi, child } => Formula::Eventually {
                lo,
                hi,
                child: Box::new(child.negate()),
            },
            Formula::Eventually { lo, hi, child } => Formula::Globally {
                lo,
                hi,
                child: Box::new(child.negate()),
            },
            Formula::And(cs) => Formula::Or(cs.into_iter().map(Formula::negate).collect()),
            Formula::Or(cs) => Formula::And(cs.into_iter().map(Formula::negate).collect()),
            Formula::Not(atom) => *atom,
            atom @ (Formula::Less(_) | Formula::Greater(_)) => Formula::Not(Box::new(atom)),
        }
    }

    /// Conjunction, flattening nested conjunctions in order.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::And(cs) => flat.extend(cs),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Formula::And(flat)
        }
    }

    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::Or(cs) => flat.extend(cs),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Formula::Or(flat)
        }
    }

    /// Replaces parameters by raw constants.
    pub fn substitute(&self, raw: &[f64]) -> Formula {
        let sub = |b: &Bound| match *b {
            Bound::Param(i) => Bound::Const(raw[i]),
            c => c,
        };
        match self {
            Formula::Globally { lo, hi, child } => Formula::Globally {
                lo: sub(lo),
                hi: sub(hi),
                child: Box::new(child.substitute(raw)),
            },
            Formula::Eventually { lo, hi, child } => Formula::Eventually {
                lo: sub(lo),
                hi: sub(hi),
                child: Box::new(child.substitute(raw)),
            },
            Formula::And(cs) => Formula::And(cs.iter().map(|c| c.substitute(raw)).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(|c| c.substitute(raw)).collect()),
            Formula::Not(c) => Formula::Not(Box::new(c.substitute(raw))),
            Formula::Less(b) => Formula::Less(sub(b)),
            Formula::Greater(b) => Formula::Greater(sub(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub polarity: Polarity,
}

impl ParamDecl {
    /// Maps a normalized coordinate onto the raw range, flipping decreasing parameters.
    pub fn to_raw(&self, unit: f64) -> f64 {
        let u = match self.polarity {
            Polarity::Increasing => unit,
            Polarity::Decreasing => 1.0 - unit,
        };
        self.lo + (self.hi - self.lo) * u
    }
}

/// A parsed, polarity-checked specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSpec {
    pub formula: Formula,
    pub params: Vec<ParamDecl>,
}

impl ParametricSpec {
    /// Builds a spec from a formula and `(name, lo, hi)` declarations, inferring polarities.
    pub fn new(formula: Formula, decls: Vec<(String, f64, f64)>) -> Result<Self, SpecError> {
        let mut seen = std::collections::HashSet::new();
        for (name, lo, hi) in &decls {
            if !seen.insert(name.as_str()) {
                return Err(SpecError::Redeclared(name.clone()));
            }
            if !(lo < hi) {
                return Err(SpecError::EmptyRange {
                    name: name.clone(),
                    lo: *lo,
                    hi: *hi,
                });
            }
        }
        let names: Vec<String> = decls.iter().map(|d| d.0.clone()).collect();
        let polarity = infer_polarity(&formula, &names)?;
        let params = decls
            .into_iter()
            .map(|(name, lo, hi)| ParamDecl {
                polarity: polarity.get(&name).copied().unwrap_or(Polarity::Increasing),
                name,
                lo,
                hi,
            })
            .collect();
        Ok(Self { formula, params })
    }

    /// `G[tau, t_max] (x < h)` with `tau in [0, t_max]` and `h in [h_lo, h_hi]`.
    pub fn slowdown(t_max: f64, h_lo: f64, h_hi: f64) -> Self {
        let formula = Formula::Globally {
            lo: Bound::Param(0),
            hi: Bound::Const(t_max),
            child: Box::new(Formula::Less(Bound::Param(1))),
        };
        Self::new(
            formula,
            vec![("tau".into(), 0.0, t_max), ("h".into(), h_lo, h_hi)],
        )
        .expect("built-in specification is monotone")
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Raw parameter values for a point of the normalized unit box.
    pub fn to_raw(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.dim(), "parameter dimension mismatch");
        self.params
            .iter()
            .zip(theta)
            .map(|(p, &u)| p.to_raw(u))
            .collect()
    }

    /// The parameter-free formula obtained by fixing `theta`.
    pub fn instantiate(&self, theta: &[f64]) -> Formula {
        self.formula.substitute(&self.to_raw(theta))
    }

    /// Canonical text; `parse(&spec.pretty_print())` yields a structurally equal spec.
    pub fn pretty_print(&self) -> String {
        print::program(self)
    }

    /// Stable short identifier derived from the canonical text (FNV-1a, 64 bit).
    pub fn spec_id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.pretty_print().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

impl fmt::Display for ParametricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty_print())
    }
}

/// Polarity of every parameter occurring in `formula`; `names[i]` names `Bound::Param(i)`.
pub fn infer_polarity(
    formula: &Formula,
    names: &[String],
) -> Result<BTreeMap<String, Polarity>, SpecError> {
    fn note(
        b: &Bound,
        pol: Polarity,
        names: &[String],
        out: &mut BTreeMap<String, Polarity>,
    ) -> Result<(), SpecError> {
        if let Bound::Param(i) = *b {
            let name = &names[i];
            match out.get(name) {
                Some(&prev) if prev != pol => {
                    return Err(SpecError::InconsistentPolarity(name.clone()))
                }
                _ => {
                    out.insert(name.clone(), pol);
                }
            }
        }
        Ok(())
    }

    fn walk(
        f: &Formula,
        ctx: Polarity,
        names: &[String],
        out: &mut BTreeMap<String, Polarity>,
    ) -> Result<(), SpecError> {
        use Polarity::{Decreasing as Neg, Increasing as Pos};
        match f {
            Formula::Globally { lo, hi, child } => {
                note(lo, ctx.times(Pos), names, out)?;
                note(hi, ctx.times(Neg), names, out)?;
                walk(child, ctx, names, out)
            }
            Formula::Eventually { lo, hi, child } => {
                note(lo, ctx.times(Neg), names, out)?;
                note(hi, ctx.times(Pos), names, out)?;
                walk(child, ctx, names, out)
            }
            Formula::And(cs) | Formula::Or(cs) => {
                cs.iter().try_for_each(|c| walk(c, ctx, names, out))
            }
            Formula::Not(c) => walk(c, ctx.flip(), names, out),
            Formula::Less(b) => note(b, ctx.times(Pos), names, out),
            Formula::Greater(b) => note(b, ctx.times(Neg), names, out),
        }
    }

    let mut out = BTreeMap::new();
    walk(formula, Polarity::Increasing, names, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Trace;

    fn polarities(src: &str) -> BTreeMap<String, Polarity> {
        let spec = parse(src).unwrap();
        spec.params
            .iter()
            .map(|p| (p.name.clone(), p.polarity))
            .collect()
    }

    #[test]
    fn slowdown_spec_is_increasing_in_both() {
        let p = polarities("param tau in [0,1]; param h in [0,1]; spec G[tau,1] (x < h)");
        assert_eq!(p["tau"], Polarity::Increasing);
        assert_eq!(p["h"], Polarity::Increasing);
        assert_eq!(
            parse("param tau in [0,1]; param h in [0,1]; spec G[tau,1] (x < h)").unwrap(),
            ParametricSpec::slowdown(1.0, 0.0, 1.0)
        );
    }

    #[test]
    fn eventually_and_greater_rules() {
        let p = polarities("param a in [0,1]; param c in [0,1]; spec F[a,1] (x > c)");
        assert_eq!(p["a"], Polarity::Decreasing);
        assert_eq!(p["c"], Polarity::Decreasing);
    }

    #[test]
    fn negation_flips() {
        let p = polarities("param p in [0,1]; spec not (x < p)");
        assert_eq!(p["p"], Polarity::Decreasing);
    }

    #[test]
    fn conflicting_occurrences_rejected() {
        let err = parse("param p in [0,1]; spec (x < p) and (x > p)").unwrap_err();
        assert_eq!(err, SpecError::InconsistentPolarity("p".into()));
    }

    #[test]
    fn parameter_free_spec() {
        let spec = parse("spec x < 0.5").unwrap();
        assert_eq!(spec.dim(), 0);
        let t = Trace::new("c", &[(0.0, 0.2)]).unwrap();
        assert!(spec.evaluate(&t, &[]));
    }

    #[test]
    fn decreasing_parameters_flip_onto_raw_range() {
        let spec = parse("param a in [2,4]; spec F[a,10] (x > 1)").unwrap();
        assert_eq!(spec.to_raw(&[0.0]), vec![4.0]);
        assert_eq!(spec.to_raw(&[1.0]), vec![2.0]);
    }
}
