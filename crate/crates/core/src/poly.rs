//! Symbolic exponential polynomials `f(x) = Σ_j p_j(x) λ_j^x` on `Z^d`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::lattice::{LatticePoint, MultiIndex};
use crate::scalar::Scalar;
use crate::Result;

/// Default tolerance for merging float witnesses and dropping float
/// coefficients during normalization.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

/// An exponential witness `λ ∈ (C \ {0})^d`, evaluated as `λ^x = Π λ_i^{x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialWitness {
    components: Vec<Scalar>,
}

impl ExponentialWitness {
    /// Every component must be nonzero (and finite on the float backend).
    pub fn new(components: Vec<Scalar>) -> Result<Self> {
        for (axis, c) in components.iter().enumerate() {
            if c.is_zero() || c.is_non_finite() {
                return Err(Error::ZeroWitnessComponent { axis });
            }
        }
        if components.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(ExponentialWitness { components })
    }

    /// Real integer witness, handy in tests: `λ = (n_1, …, n_d)`.
    pub fn from_ints(ns: &[i64]) -> Result<Self> {
        ExponentialWitness::new(ns.iter().map(|&n| Scalar::from_int(n)).collect())
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Scalar] {
        &self.components
    }

    pub fn is_exact(&self) -> bool {
        self.components.iter().all(|c| c.is_exact())
    }

    /// `λ^x` with `0^0 = 1`; negative coordinates use the inverse.
    pub fn eval_at(&self, x: &LatticePoint) -> Result<Scalar> {
        x.check_dim(self.dim())?;
        let mut acc = Scalar::one();
        for (c, &e) in self.components.iter().zip(&x.0) {
            if e != 0 {
                acc = acc.mul(&c.powi(e));
            }
        }
        Ok(acc)
    }

    /// Componentwise inverse, the witness of `x ↦ λ^{−x}`.
    pub fn inverse(&self) -> ExponentialWitness {
        ExponentialWitness {
            components: self.components.iter().map(|c| c.powi(-1)).collect(),
        }
    }

    /// Componentwise product of witnesses.
    pub fn mul(&self, other: &ExponentialWitness) -> Result<ExponentialWitness> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        ExponentialWitness::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.mul(b))
                .collect(),
        )
    }

    /// Componentwise agreement: exact equality when both sides are exact,
    /// otherwise distance at most `tol` in every component.
    pub fn matches(&self, other: &ExponentialWitness, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a.approx_eq(b, tol))
    }

    fn cmp_key(&self, other: &ExponentialWitness) -> std::cmp::Ordering {
        for (a, b) in self.components.iter().zip(&other.components) {
            let c = a.total_cmp(b);
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// One exponential-polynomial term `p(x) λ^x` with `p` stored as a sparse
/// coefficient map in graded lexicographic order.
#[derive(Clone, Debug)]
pub struct ExpTerm {
    pub witness: ExponentialWitness,
    pub coeffs: BTreeMap<MultiIndex, Scalar>,
}

impl ExpTerm {
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|a| a.total_degree()).max()
    }
}

/// A finite sum of exponential-polynomial terms on `Z^d`.
#[derive(Clone, Debug)]
pub struct ExpPoly {
    dim: usize,
    terms: Vec<ExpTerm>,
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

impl ExpPoly {
    pub fn zero(dim: usize) -> Self {
        ExpPoly { dim, terms: Vec::new() }
    }

    /// The single term `c · x^α λ^x`.
    pub fn monomial(
        witness: ExponentialWitness,
        alpha: MultiIndex,
        coeff: Scalar,
    ) -> Result<Self> {
        let dim = witness.dim();
        alpha.check_dim(dim)?;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(alpha, coeff);
        Ok(ExpPoly { dim, terms: vec![ExpTerm { witness, coeffs }] })
    }

    /// Assemble from explicit terms, validating dimensions.
    pub fn from_terms(dim: usize, terms: Vec<ExpTerm>) -> Result<Self> {
        for t in &terms {
            if t.witness.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.witness.dim() });
            }
            for alpha in t.coeffs.keys() {
                alpha.check_dim(dim)?;
            }
        }
        Ok(ExpPoly { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn is_exact(&self) -> bool {
        self.terms.iter().all(|t| {
            t.witness.is_exact() && t.coeffs.values().all(|c| c.is_exact())
        })
    }

    /// Largest total degree over all terms, `None` for the zero function.
    pub fn degree(&self) -> Option<u32> {
        self.terms.iter().filter_map(|t| t.degree()).max()
    }

    /// Number of stored terms (after normalization, the number of distinct
    /// witnesses).
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Evaluate at a lattice point.  `0^0 = 1` throughout; float results
    /// are checked for overflow.
    pub fn eval(&self, x: &LatticePoint) -> Result<Scalar> {
        x.check_dim(self.dim)?;
        let mut acc = Scalar::zero();
        for t in &self.terms {
            let mut poly_val = Scalar::zero();
            for (alpha, c) in &t.coeffs {
                let mut mono = BigInt::one();
                for (i, &e) in alpha.0.iter().enumerate() {
                    if e > 0 {
                        mono *= BigInt::from(x.0[i]).pow(e);
                    }
                }
                poly_val = poly_val.add(&c.mul(&Scalar::from_bigint(mono)));
            }
            acc = acc.add(&poly_val.mul(&t.witness.eval_at(x)?));
        }
        if acc.is_non_finite() {
            return Err(Error::EvalOverflow { at: x.0.clone() });
        }
        Ok(acc)
    }

    /// Merge terms with matching witnesses, drop vanishing coefficients
    /// (float ones below `merge_tol`), and sort terms canonically.
    pub fn normalize_with(&self, merge_tol: f64) -> ExpPoly {
        let mut merged: Vec<ExpTerm> = Vec::new();
        for t in &self.terms {
            match merged.iter_mut().find(|m| m.witness.matches(&t.witness, merge_tol)) {
                Some(m) => {
                    for (alpha, c) in &t.coeffs {
                        m.coeffs
                            .entry(alpha.clone())
                            .and_modify(|acc| *acc = acc.add(c))
                            .or_insert_with(|| c.clone());
                    }
                }
                None => merged.push(t.clone()),
            }
        }
        for m in &mut merged {
            m.coeffs.retain(|_, c| !c.is_zero_within(merge_tol));
        }
        merged.retain(|m| !m.coeffs.is_empty());
        merged.sort_by(|a, b| a.witness.cmp_key(&b.witness));
        ExpPoly { dim: self.dim, terms: merged }
    }

    pub fn normalize(&self) -> ExpPoly {
        self.normalize_with(DEFAULT_MERGE_TOL)
    }

    /// True when normalization leaves nothing.
    pub fn is_zero(&self) -> bool {
        self.normalize().terms.is_empty()
    }

    /// Zero test with an explicit coefficient tolerance for the float
    /// backend; witnesses within `tol` are merged first.
    pub fn approx_zero(&self, tol: f64) -> bool {
        self.normalize_with(tol).terms.is_empty()
    }

    /// The translate `x ↦ f(x + y)`, computed by binomial expansion; the
    /// result stays on the backend of `self` (exact stays exact).
    pub fn translate(&self, y: &LatticePoint) -> Result<ExpPoly> {
        y.check_dim(self.dim)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let lead = t.witness.eval_at(y)?;
            let mut coeffs: BTreeMap<MultiIndex, Scalar> = BTreeMap::new();
            for (alpha, c) in &t.coeffs {
                for beta in alpha_descendants(alpha) {
                    let mut factor = BigInt::one();
                    for i in 0..self.dim {
                        let (a, b) = (alpha.0[i], beta.0[i]);
                        factor *= binomial(a, b) * BigInt::from(y.0[i]).pow(a - b);
                    }
                    let contrib = c.mul(&Scalar::from_bigint(factor)).mul(&lead);
                    coeffs
                        .entry(beta)
                        .and_modify(|acc| *acc = acc.add(&contrib))
                        .or_insert(contrib);
                }
            }
            terms.push(ExpTerm { witness: t.witness.clone(), coeffs });
        }
        Ok(ExpPoly { dim: self.dim, terms })
    }

    /// Multiply every coefficient by `c`.
    pub fn scale(&self, c: &Scalar) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpTerm {
                witness: t.witness.clone(),
                coeffs: t.coeffs.iter().map(|(a, v)| (a.clone(), v.mul(c))).collect(),
            })
            .collect();
        ExpPoly { dim: self.dim, terms }
    }

    /// Pointwise product with the exponential `x ↦ m^x`: witnesses multiply
    /// componentwise, polynomial parts are untouched.
    pub fn mul_exponential(&self, m: &ExponentialWitness) -> Result<ExpPoly> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.dim() });
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            terms.push(ExpTerm { witness: t.witness.mul(m)?, coeffs: t.coeffs.clone() });
        }
        Ok(ExpPoly { dim: self.dim, terms })
    }

    /// `Σ c_i f_i` over functions on the same lattice.
    pub fn linear_combine(parts: &[(Scalar, &ExpPoly)]) -> Result<ExpPoly> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidInput("empty linear combination".into()));
        };
        let dim = first.dim;
        let mut terms = Vec::new();
        for (c, f) in parts {
            if f.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.dim });
            }
            terms.extend(f.scale(c).terms);
        }
        Ok(ExpPoly { dim, terms }.normalize())
    }

    pub fn add(&self, other: &ExpPoly) -> Result<ExpPoly> {
        ExpPoly::linear_combine(&[(Scalar::one(), self), (Scalar::one(), other)])
    }

    pub fn sub(&self, other: &ExpPoly) -> Result<ExpPoly> {
        ExpPoly::linear_combine(&[(Scalar::one(), self), (Scalar::from_int(-1), other)])
    }

    /// Structural equality after exact normalization; requires the exact
    /// backend on both sides.
    pub fn eq_exact(&self, other: &ExpPoly) -> Result<bool> {
        if !self.is_exact() || !other.is_exact() {
            return Err(Error::ExactBackendRequired { context: "structural equality".into() });
        }
        Ok(self.sub(other)?.is_zero())
    }

    /// Largest coefficient modulus, 0 for the zero polynomial.
    pub fn max_coeff_abs(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.coeffs.values())
            .map(|c| c.abs())
            .fold(0.0, f64::max)
    }
}

/// All `β ≤ α` componentwise.
fn alpha_descendants(alpha: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex(Vec::with_capacity(alpha.dim()))];
    for &a in &alpha.0 {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for b in 0..=a {
                let mut v = prefix.0.clone();
                v.push(b);
                next.push(MultiIndex(v));
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Wire format.

#[derive(Serialize, Deserialize)]
struct CoeffRepr {
    alpha: Vec<u32>,
    c: Scalar,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    lambda: Vec<Scalar>,
    coeffs: Vec<CoeffRepr>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    dim: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for ExpPoly {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = PolyRepr {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    lambda: t.witness.components().to_vec(),
                    coeffs: t
                        .coeffs
                        .iter()
                        .map(|(a, c)| CoeffRepr { alpha: a.0.clone(), c: c.clone() })
                        .collect(),
                })
                .collect(),
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ExpPoly {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PolyRepr::deserialize(de)?;
        let mut terms = Vec::with_capacity(repr.terms.len());
        for t in repr.terms {
            let witness = ExponentialWitness::new(t.lambda).map_err(D::Error::custom)?;
            let mut coeffs = BTreeMap::new();
            for entry in t.coeffs {
                let alpha = MultiIndex(entry.alpha);
                if coeffs.insert(alpha, entry.c).is_some() {
                    return Err(D::Error::custom("duplicate exponent in term"));
                }
            }
            terms.push(ExpTerm { witness, coeffs });
        }
        ExpPoly::from_terms(repr.dim, terms).map_err(D::Error::custom)
    }
}
