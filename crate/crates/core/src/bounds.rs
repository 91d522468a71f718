//! Depth and size bounds per class.
//!
//! Values are exact while they fit in [`EXACT_BITS`] bits; beyond that only a
//! log2 estimate and the formula are kept.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{Class, Program};

pub const EXACT_BITS: u64 = 1 << 16;

#[derive(Clone, Debug)]
pub struct Big {
    exact: Option<BigUint>,
    log2: f64,
    expr: String,
}

fn log2_of(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 53 {
        return n.to_f64().unwrap().log2();
    }
    let top = (n >> (bits - 53)).to_f64().unwrap();
    top.log2() + (bits - 53) as f64
}

impl Big {
    pub fn new(n: impl Into<BigUint>) -> Big {
        let n = n.into();
        Big {
            log2: log2_of(&n),
            expr: n.to_string(),
            exact: Some(n),
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        self.exact.as_ref()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.exact.as_ref()?.to_u64()
    }

    /// log2 of the value; may be infinite for values beyond `f64`.
    pub fn log2(&self) -> f64 {
        self.log2
    }

    /// Whether the value is strictly greater than `n`.
    pub fn exceeds(&self, n: u64) -> bool {
        match &self.exact {
            Some(v) => *v > BigUint::from(n),
            None => true,
        }
    }

    /// Exact value with up to 40 digits, otherwise the formula and its magnitude.
    pub fn short(&self) -> String {
        match &self.exact {
            Some(v) if self.log2 < 132.0 => v.to_string(),
            _ if self.log2.is_finite() => format!("{} ~ 2^{:.0}", self.expr, self.log2),
            _ => self.expr.clone(),
        }
    }

    fn operand(&self) -> String {
        if self.expr.contains(['+', '*', '^']) {
            format!("({})", self.expr)
        } else {
            self.expr.clone()
        }
    }

    fn formula(&self, op: &str, other: &Big) -> String {
        format!("{}{op}{}", self.operand(), other.operand())
    }

    fn symbolic(&self, op: &str, other: &Big, log2: f64) -> Big {
        Big {
            exact: None,
            log2,
            expr: self.formula(op, other),
        }
    }

    /// An exact result that keeps its formula once the digits get long.
    fn combined(&self, op: &str, other: &Big, n: BigUint) -> Big {
        let mut b = Big::new(n);
        if b.expr.len() > 24 {
            b.expr = self.formula(op, other);
        }
        b
    }

    pub fn add(&self, other: &Big) -> Big {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => self.combined("+", other, a + b),
            _ => {
                let (hi, lo) = if self.log2 >= other.log2 {
                    (self.log2, other.log2)
                } else {
                    (other.log2, self.log2)
                };
                self.symbolic("+", other, hi + (1.0 + (lo - hi).exp2()).log2())
            }
        }
    }

    pub fn mul(&self, other: &Big) -> Big {
        if self.exact.as_ref().is_some_and(Zero::is_zero)
            || other.exact.as_ref().is_some_and(Zero::is_zero)
        {
            return Big::new(0u32);
        }
        let log2 = self.log2 + other.log2;
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) if log2 <= EXACT_BITS as f64 => self.combined("*", other, a * b),
            _ => self.symbolic("*", other, log2),
        }
    }

    pub fn pow(&self, exp: &Big) -> Big {
        if exp.exact.as_ref().is_some_and(Zero::is_zero) {
            return Big::new(1u32);
        }
        if let Some(b) = &self.exact {
            if b.is_zero() || b.is_one() {
                return self.clone();
            }
        }
        let log2 = match &exp.exact {
            Some(e) => e.to_f64().unwrap_or(f64::INFINITY) * self.log2,
            None => (exp.log2 + self.log2.log2()).exp2(),
        };
        match (&self.exact, exp.to_u64()) {
            (Some(b), Some(e)) if log2 <= EXACT_BITS as f64 => {
                self.combined("^", exp, b.pow(e as u32))
            }
            _ => self.symbolic("^", exp, log2),
        }
    }
}

impl fmt::Display for Big {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(v) => write!(f, "{v}"),
            None => f.write_str(&self.expr),
        }
    }
}

impl PartialEq for Big {
    fn eq(&self, other: &Big) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => self.expr == other.expr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub class: Class,
    /// Bound on the depth of any term of a finite chase.
    pub d: Big,
    /// Size factor: a finite chase has at most |D|·f atoms.
    pub f: Big,
}

fn n(x: usize) -> Big {
    Big::new(x as u64)
}

pub fn depth_bound(p: &Program, class: Class) -> Result<Big> {
    let (s, a) = (n(p.pred_count()), n(p.max_arity()));
    match class {
        Class::SimpleLinear => Ok(s.mul(&a)),
        Class::Linear => Ok(s.mul(&a.pow(&a.add(&n(1))))),
        Class::Guarded => {
            let two_a_1 = n(2 * p.max_arity() + 1);
            Ok(s.mul(&a.pow(&two_a_1)).mul(&n(2).pow(&s.mul(&a.pow(&a)))))
        }
        Class::General => Err(Error::WrongClass {
            expected: Class::Guarded,
            found: Class::General,
        }),
    }
}

/// d_C and f_C = (d_C+1)·||Σ||^(2·ar·(d_C+1)) for the given class.
pub fn bounds(p: &Program, class: Class) -> Result<Bounds> {
    let d = depth_bound(p, class)?;
    let d1 = d.add(&n(1));
    let norm = Big::new(p.norm());
    let f = d1.mul(&norm.pow(&n(2 * p.max_arity()).mul(&d1)));
    Ok(Bounds { class, d, f })
}

/// Atom cap |D|·f.
pub fn size_bound(db_len: usize, b: &Bounds) -> Big {
    n(db_len).mul(&b.f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn prog(src: &str) -> Program {
        parse_program(src).unwrap().program
    }

    #[test]
    fn simple_linear_example() {
        let p = prog("R(X,Y) -> exists Z: R(Y,Z).");
        let b = bounds(&p, Class::SimpleLinear).unwrap();
        assert_eq!(b.d.to_u64(), Some(2));
        assert_eq!(b.f.to_u64(), Some(3 * 4u64.pow(12)));
        assert_eq!(b.f.to_string(), "50331648");
        assert_eq!(depth_bound(&p, Class::Linear).unwrap().to_u64(), Some(8));
    }

    #[test]
    fn guarded_unary() {
        let p = prog("R(X) -> exists Z: R(Z).");
        assert_eq!(depth_bound(&p, Class::Guarded).unwrap().to_u64(), Some(2));
    }

    #[test]
    fn general_has_no_bound() {
        let p = prog("R(X,Y), R(Y,Z) -> R(X,Z).");
        assert!(bounds(&p, Class::General).is_err());
    }

    #[test]
    fn symbolic_values() {
        // |sch|=3, ar=4: d_G = 3·4^9·2^768, too large for f_G to be exact.
        let p = prog("R(X,Y,Z,W), S(X) -> exists V: R(Y,Z,W,V), T(V).");
        let b = bounds(&p, Class::Guarded).unwrap();
        assert_eq!(
            b.d.exact().unwrap(),
            &((BigUint::from(3u32) * BigUint::from(4u32).pow(9)) << 768)
        );
        assert!(b.f.exact().is_none());
        assert!(b.f.exceeds(u64::MAX));
        assert!(b.f.log2() > 1e200);
        assert!(b.f.to_string().contains('^'));
        assert_eq!(b.d.short(), format!("786432*(2^768) ~ 2^{:.0}", b.d.log2()));
        assert!(!b.f.to_string().contains("0000"));
    }

    #[test]
    fn arithmetic_matches_biguint() {
        let vals = [0u64, 1, 2, 3, 7, 1000];
        for &a in &vals {
            for &b in &vals {
                let (x, y) = (Big::new(a), Big::new(b));
                assert_eq!(x.add(&y).to_u64(), Some(a + b));
                assert_eq!(x.mul(&y).to_u64(), Some(a * b));
                if b < 5 {
                    assert_eq!(x.pow(&y).exact().unwrap(), &BigUint::from(a).pow(b as u32));
                }
            }
        }
        let big = Big::new(2u32).pow(&Big::new(100_000u32));
        assert!(big.exact().is_none());
        assert!((big.log2() - 100_000.0).abs() < 1e-6);
        assert!((big.mul(&big).log2() - 200_000.0).abs() < 1e-6);
    }

    #[test]
    fn empty_program_bound_is_database_size() {
        let p = prog("");
        let b = bounds(&p, Class::SimpleLinear).unwrap();
        assert_eq!(size_bound(5, &b).to_u64(), Some(5));
    }
}
