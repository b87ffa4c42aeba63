use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use crate::error::{Error, Result};

/// A column reference with an optional lag, written `L2.name` or `name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub column: String,
    pub lag: u32,
}

impl Factor {
    pub fn new(column: impl Into<String>, lag: u32) -> Self {
        Factor {
            column: column.into(),
            lag,
        }
    }

    pub fn values(&self, frame: &Frame) -> Result<Vec<Option<f64>>> {
        frame.lagged(&self.column, self.lag)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lag == 0 {
            write!(f, "{}", self.column)
        } else {
            write!(f, "L{}.{}", self.lag, self.column)
        }
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("malformed factor `{s}`"));
        if let Some(rest) = s.strip_prefix('L') {
            if let Some((digits, col)) = rest.split_once('.') {
                if let Ok(lag) = digits.parse::<u32>() {
                    return valid_name(col).then(|| Factor::new(col, lag)).ok_or_else(bad);
                }
            }
        }
        valid_name(s).then(|| Factor::new(s, 0)).ok_or_else(bad)
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Product of one or more factors, written `a * L1.b * c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Term {
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn single(f: Factor) -> Self {
        Term { factors: vec![f] }
    }

    /// Elementwise product; a missing factor makes the product missing.
    pub fn values(&self, frame: &Frame) -> Result<Vec<Option<f64>>> {
        let mut out = vec![Some(1.0); frame.len()];
        for f in &self.factors {
            let v = f.values(frame)?;
            for (o, x) in out.iter_mut().zip(v) {
                *o = match (*o, x) {
                    (Some(a), Some(b)) => Some(a * b),
                    _ => None,
                };
            }
        }
        Ok(out)
    }

    /// The term with every factor named in `drop` removed; `None` if nothing is left.
    pub fn without(&self, drop: &[&str]) -> Option<Term> {
        let factors: Vec<Factor> = self
            .factors
            .iter()
            .filter(|f| !drop.contains(&f.column.as_str()))
            .cloned()
            .collect();
        (!factors.is_empty()).then_some(Term { factors })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("*"))
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s.split('*').map(str::parse).collect::<Result<Vec<Factor>>>()?;
        Ok(Term { factors })
    }
}

impl TryFrom<String> for Term {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.to_string()
    }
}

/// Materializes product columns for a list of terms.
pub fn build_interactions(frame: &Frame, terms: &[Term]) -> Result<Vec<Vec<Option<f64>>>> {
    terms.iter().map(|t| t.values(frame)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Cmp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Row predicate `factor cmp value`; rows with a missing factor fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub factor: Term,
    pub cmp: Cmp,
    pub value: f64,
}

impl Filter {
    pub fn mask(&self, frame: &Frame) -> Result<Vec<bool>> {
        Ok(self
            .factor
            .values(frame)?
            .into_iter()
            .map(|v| v.is_some_and(|x| self.cmp.apply(x, self.value)))
            .collect())
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.factor, self.cmp.symbol(), self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame() -> Frame {
        let keys = (0..4).map(|i| (format!("f{}", i / 2), 33u16, 2000 + (i % 2) as i32));
        let mut f = Frame::new(keys).unwrap();
        f.insert("nz", vec![Some(1.0), Some(1.0), Some(0.0), Some(1.0)])
            .unwrap();
        f.insert("sm", vec![Some(1.0), None, Some(1.0), Some(1.0)]).unwrap();
        f.insert("bank_dep", vec![Some(0.0), Some(0.0), Some(1.0), Some(1.0)])
            .unwrap();
        f.insert("bc_z", vec![Some(0.2), Some(0.3), Some(0.4), Some(0.5)])
            .unwrap();
        f
    }

    #[test]
    fn parse_and_display() {
        let t: Term = "L1.nz * L1.sm*bc_z".parse().unwrap();
        assert_eq!(t.factors[0], Factor::new("nz", 1));
        assert_eq!(t.to_string(), "L1.nz*L1.sm*bc_z");
        assert!("L1.".parse::<Term>().is_err());
        assert!("a**b".parse::<Term>().is_err());
    }

    #[test]
    fn zero_factor_and_missing_factor() {
        let f = frame();
        let t: Term = "nz*sm*bank_dep*bc_z".parse().unwrap();
        let v = t.values(&f).unwrap();
        assert_eq!(v[0], Some(0.0));
        assert_eq!(v[1], None);
        assert_eq!(v[3], Some(0.5));
    }

    #[test]
    fn identity_dummies_collapse() {
        let mut f = frame();
        f.insert("one", vec![Some(1.0); 4]).unwrap();
        let full: Term = "L1.nz*one*one*L1.bc_z".parse().unwrap();
        let base: Term = "L1.nz*L1.bc_z".parse().unwrap();
        assert_eq!(full.values(&f).unwrap(), base.values(&f).unwrap());
        assert_eq!(full.without(&["one"]).unwrap(), base);
    }

    #[test]
    fn unknown_column_errors() {
        let t: Term = "nz*nope".parse().unwrap();
        assert!(matches!(t.values(&frame()), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn filter_mask() {
        let flt = Filter {
            factor: "sm".parse().unwrap(),
            cmp: Cmp::Eq,
            value: 1.0,
        };
        assert_eq!(flt.mask(&frame()).unwrap(), vec![true, false, true, true]);
    }

    proptest! {
        #[test]
        fn products_match_columnwise_oracle(a in prop::collection::vec(prop::option::of(-5.0f64..5.0), 4),
                                            b in prop::collection::vec(prop::option::of(-5.0f64..5.0), 4)) {
            let mut f = frame();
            f.insert("a", a.clone()).unwrap();
            f.insert("b", b.clone()).unwrap();
            let cols = build_interactions(&f, &["a*b".parse().unwrap()]).unwrap();
            for i in 0..4 {
                let expect = match (a[i], b[i]) { (Some(x), Some(y)) => Some(x * y), _ => None };
                prop_assert_eq!(cols[0][i], expect);
            }
        }
    }
}
