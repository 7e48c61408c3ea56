//! Scalar arithmetic over two backends: exact Gaussian rationals and
//! complex `f64`.  Mixing the two promotes to floats.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::Result;

/// A Gaussian rational `re + im·i` with arbitrary-precision parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn zero() -> Self {
        GaussianRational::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        GaussianRational::new(BigRational::one(), BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        GaussianRational::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    pub fn from_bigint(n: BigInt) -> Self {
        GaussianRational::new(BigRational::from_integer(n), BigRational::zero())
    }

    /// `p/q` as a real Gaussian rational.  Panics if `q == 0`.
    pub fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        GaussianRational::new(
            BigRational::new(BigInt::from(p), BigInt::from(q)),
            BigRational::zero(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        GaussianRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        GaussianRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }

    pub fn neg(&self) -> Self {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        GaussianRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }

    pub fn conj(&self) -> Self {
        GaussianRational::new(self.re.clone(), -self.im.clone())
    }

    /// Squared modulus `re² + im²` as a rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse.  Panics on zero.
    pub fn inv(&self) -> Self {
        let n = self.norm_sqr();
        assert!(!n.is_zero(), "inverse of zero Gaussian rational");
        GaussianRational::new(&self.re / &n, -&self.im / &n)
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.inv())
    }

    /// Integer power by repeated squaring; negative exponents invert first.
    pub fn powi(&self, exp: i64) -> Self {
        if exp == 0 {
            return GaussianRational::one();
        }
        let (mut base, mut e) = if exp < 0 {
            (self.inv(), exp.unsigned_abs())
        } else {
            (self.clone(), exp as u64)
        };
        let mut acc = GaussianRational::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

/// Parse a rational in `p`, `p/q`, or signed form.  Rejects zero denominators.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("bad rational literal {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
        }
        Ok(BigRational::new(n, d))
    } else {
        let n = BigInt::from_str(s).map_err(|_| bad())?;
        Ok(BigRational::from_integer(n))
    }
}

/// A scalar in one of the two backends.
///
/// Arithmetic between mixed backends promotes to [`Scalar::Float`]; purely
/// exact arithmetic stays exact.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(GaussianRational),
    Float(Complex64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(GaussianRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(GaussianRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::Exact(GaussianRational::from_int(n))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Scalar::Exact(GaussianRational::from_bigint(n))
    }

    pub fn from_ratio(p: i64, q: i64) -> Self {
        Scalar::Exact(GaussianRational::from_ratio(p, q))
    }

    pub fn from_f64(x: f64) -> Self {
        Scalar::Float(Complex64::new(x, 0.0))
    }

    pub fn from_complex(z: Complex64) -> Self {
        Scalar::Float(z)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(g) => g.is_zero(),
            Scalar::Float(z) => z.re == 0.0 && z.im == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Exact(g) => g.is_one(),
            Scalar::Float(z) => z.re == 1.0 && z.im == 0.0,
        }
    }

    /// Modulus as `f64` (exact values are converted for the comparison).
    pub fn abs(&self) -> f64 {
        match self {
            Scalar::Exact(g) => g.to_complex().norm(),
            Scalar::Float(z) => z.norm(),
        }
    }

    /// Zero test with a tolerance; exact scalars ignore the tolerance.
    pub fn is_zero_within(&self, tol: f64) -> bool {
        match self {
            Scalar::Exact(g) => g.is_zero(),
            Scalar::Float(z) => z.norm() <= tol,
        }
    }

    /// `|self − other| ≤ tol`, exact when both sides are exact.
    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => (self.to_complex() - other.to_complex()).norm() <= tol,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Scalar::Exact(g) => g.to_complex(),
            Scalar::Float(z) => *z,
        }
    }

    pub fn add(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.add(b)),
            _ => Scalar::Float(self.to_complex() + rhs.to_complex()),
        }
    }

    pub fn sub(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.sub(b)),
            _ => Scalar::Float(self.to_complex() - rhs.to_complex()),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(a.neg()),
            Scalar::Float(z) => Scalar::Float(-z),
        }
    }

    pub fn mul(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.mul(b)),
            _ => Scalar::Float(self.to_complex() * rhs.to_complex()),
        }
    }

    /// Division; panics on an exact zero divisor, so callers must guard.
    pub fn div(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.div(b)),
            _ => Scalar::Float(self.to_complex() / rhs.to_complex()),
        }
    }

    /// Integer power; negative exponents invert (exact stays exact).
    pub fn powi(&self, exp: i64) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(g.powi(exp)),
            Scalar::Float(z) => {
                if exp.abs() <= i32::MAX as i64 {
                    Scalar::Float(z.powi(exp as i32))
                } else {
                    Scalar::Float(z.powf(exp as f64))
                }
            }
        }
    }

    pub fn conj(&self) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(g.conj()),
            Scalar::Float(z) => Scalar::Float(z.conj()),
        }
    }

    /// Deterministic total order used for canonical sorting: exact before
    /// float on ties, otherwise by `(re, im)` of the complex image.
    pub fn total_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => {
                let x = self.to_complex();
                let y = other.to_complex();
                x.re.total_cmp(&y.re)
                    .then_with(|| x.im.total_cmp(&y.im))
                    .then_with(|| self.is_exact().cmp(&other.is_exact()))
            }
        }
    }

    /// True if any component is non-finite.
    pub fn is_non_finite(&self) -> bool {
        match self {
            Scalar::Exact(_) => false,
            Scalar::Float(z) => !z.re.is_finite() || !z.im.is_finite(),
        }
    }

    /// Parse either backend: `"p/q"` / `"p/q,r/s"` exact forms, or a bare
    /// float like `"1.5"` / `"1.5,-2"` (real, imaginary).
    pub fn parse(s: &str, exact: bool) -> Result<Scalar> {
        let s = s.trim();
        let (re_s, im_s) = match s.split_once(',') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, ""),
        };
        if exact {
            let re = parse_rational(re_s)?;
            let im = if im_s.is_empty() { BigRational::zero() } else { parse_rational(im_s)? };
            Ok(Scalar::Exact(GaussianRational::new(re, im)))
        } else {
            let bad = |p: &str| Error::InvalidInput(format!("bad float literal {p:?}"));
            let parse_f = |p: &str| -> Result<f64> {
                if let Some((num, den)) = p.split_once('/') {
                    let n: f64 = num.trim().parse().map_err(|_| bad(p))?;
                    let d: f64 = den.trim().parse().map_err(|_| bad(p))?;
                    if d == 0.0 {
                        return Err(bad(p));
                    }
                    Ok(n / d)
                } else {
                    p.parse().map_err(|_| bad(p))
                }
            };
            let re = parse_f(re_s)?;
            let im = if im_s.is_empty() { 0.0 } else { parse_f(im_s)? };
            Ok(Scalar::Float(Complex64::new(re, im)))
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(g) => {
                if g.im.is_zero() {
                    write!(f, "{}", g.re)
                } else if g.im.is_positive() {
                    write!(f, "{}+{}i", g.re, g.im)
                } else {
                    write!(f, "{}{}i", g.re, g.im)
                }
            }
            Scalar::Float(z) => {
                if z.im == 0.0 {
                    write!(f, "{}", z.re)
                } else if z.im > 0.0 {
                    write!(f, "{}+{}i", z.re, z.im)
                } else {
                    write!(f, "{}{}i", z.re, z.im)
                }
            }
        }
    }
}

// Wire format: exact scalars as a pair of rational strings, floats as a
// pair of numbers.  ["3/2", "0"] vs [1.5, 0.0].
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(g) => [g.re.to_string(), g.im.to_string()].serialize(ser),
            Scalar::Float(z) => [z.re, z.im].serialize(ser),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WirePart {
    Str(String),
    Num(f64),
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let parts: Vec<WirePart> = Vec::deserialize(de)?;
        if parts.len() != 2 {
            return Err(D::Error::custom("scalar must be a [re, im] pair"));
        }
        match (&parts[0], &parts[1]) {
            (WirePart::Str(re), WirePart::Str(im)) => {
                let re = parse_rational(re).map_err(D::Error::custom)?;
                let im = parse_rational(im).map_err(D::Error::custom)?;
                Ok(Scalar::Exact(GaussianRational::new(re, im)))
            }
            (WirePart::Num(re), WirePart::Num(im)) => {
                Ok(Scalar::Float(Complex64::new(*re, *im)))
            }
            _ => Err(D::Error::custom(
                "scalar pair must be two strings (exact) or two numbers (float)",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gr(p: i64, q: i64) -> GaussianRational {
        GaussianRational::from_ratio(p, q)
    }

    #[test]
    fn gaussian_field_ops() {
        let i = GaussianRational::new(BigRational::zero(), BigRational::one());
        assert_eq!(i.mul(&i), GaussianRational::from_int(-1));
        let z = GaussianRational::new(
            BigRational::new(BigInt::from(1), BigInt::from(2)),
            BigRational::new(BigInt::from(-3), BigInt::from(4)),
        );
        assert!(z.mul(&z.inv()).is_one());
        assert_eq!(z.add(&z.neg()), GaussianRational::zero());
    }

    #[test]
    fn powers_including_negative() {
        let two = GaussianRational::from_int(2);
        assert_eq!(two.powi(10), GaussianRational::from_int(1024));
        assert_eq!(two.powi(-2), gr(1, 4));
        assert_eq!(two.powi(0), GaussianRational::one());
        let i = GaussianRational::new(BigRational::zero(), BigRational::one());
        assert_eq!(i.powi(4), GaussianRational::one());
        assert_eq!(i.powi(-1), i.powi(3));
    }

    #[test]
    fn promotion_rules() {
        let e = Scalar::from_ratio(1, 3);
        let f = Scalar::from_f64(0.5);
        assert!(e.add(&e).is_exact());
        assert!(!e.add(&f).is_exact());
        assert!(e.mul(&f).approx_eq(&Scalar::from_f64(1.0 / 6.0), 1e-15));
        assert_eq!(e.add(&e), Scalar::from_ratio(2, 3));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(parse_rational("-3/7").unwrap(), BigRational::new(BigInt::from(-3), BigInt::from(7)));
        assert_eq!(parse_rational("42").unwrap(), BigRational::from_integer(BigInt::from(42)));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        let s = Scalar::parse("2/3,-1/5", true).unwrap();
        assert_eq!(s, Scalar::Exact(GaussianRational::new(
            BigRational::new(BigInt::from(2), BigInt::from(3)),
            BigRational::new(BigInt::from(-1), BigInt::from(5)),
        )));
        let f = Scalar::parse("1.25,-2", false).unwrap();
        assert_eq!(f, Scalar::Float(Complex64::new(1.25, -2.0)));
        // Rational syntax is accepted by the float parser too.
        let f2 = Scalar::parse("1/4", false).unwrap();
        assert_eq!(f2, Scalar::Float(Complex64::new(0.25, 0.0)));
    }

    #[test]
    fn json_round_trip_exact_is_lossless() {
        let s = Scalar::Exact(GaussianRational::new(
            BigRational::new(BigInt::from(22), BigInt::from(7)),
            BigRational::new(BigInt::from(-1), BigInt::from(3)),
        ));
        let txt = serde_json::to_string(&s).unwrap();
        assert_eq!(txt, r#"["22/7","-1/3"]"#);
        let back: Scalar = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, s);

        let f = Scalar::Float(Complex64::new(1.5, -2.0));
        let txt = serde_json::to_string(&f).unwrap();
        let back: Scalar = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, f);

        // Integer JSON numbers deserialize onto the float backend.
        let g: Scalar = serde_json::from_str("[2, 0]").unwrap();
        assert_eq!(g, Scalar::Float(Complex64::new(2.0, 0.0)));
        assert!(serde_json::from_str::<Scalar>(r#"["1/2", 3]"#).is_err());
    }

    #[test]
    fn total_order_is_deterministic() {
        let mut v = [Scalar::from_f64(3.0),
            Scalar::from_int(2),
            Scalar::from_f64(-1.0),
            Scalar::from_ratio(5, 2)];
        v.sort_by(|a, b| a.total_cmp(b));
        let shown: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, vec!["-1", "2", "5/2", "3"]);
    }
}
