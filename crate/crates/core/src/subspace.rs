//! Finite-dimensional spaces spanned by exponential monomials, with exact
//! linear algebra: containment, one-step invariant extensions
//! `V + L(V) + … + L^n(V)`, closure chains, and the matrix of a modified
//! difference operator on a graded monomial basis.

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diffops::{apply_modified_value, OpFactor, PhiSpec};
use crate::error::Error;
use crate::lattice::{LatticePoint, MultiIndex};
use crate::poly::{ExpPoly, ExpTerm, ExponentialWitness};
use crate::scalar::{GaussianRational, Scalar};
use crate::Result;

type MonomialKey = (Vec<GaussianRational>, MultiIndex);

fn witness_key(w: &ExponentialWitness) -> Result<Vec<GaussianRational>> {
    w.components()
        .iter()
        .map(|c| match c {
            Scalar::Exact(g) => Ok(g.clone()),
            Scalar::Float(_) => Err(Error::ExactBackendRequired {
                context: "span spaces need exact witnesses".into(),
            }),
        })
        .collect()
}

fn key_to_witness(key: &[GaussianRational]) -> ExponentialWitness {
    ExponentialWitness::new(key.iter().map(|g| Scalar::Exact(g.clone())).collect())
        .expect("keys come from validated witnesses")
}

/// Exact coordinates of a normalized polynomial over a fixed monomial
/// enumeration; `None` when the polynomial uses a monomial outside it.
fn coords_of(
    f: &ExpPoly,
    index: &BTreeMap<MonomialKey, usize>,
) -> Result<Option<Vec<GaussianRational>>> {
    let mut v = vec![GaussianRational::zero(); index.len()];
    for t in f.normalize().terms() {
        let wk = witness_key(&t.witness)?;
        for (alpha, c) in &t.coeffs {
            let Scalar::Exact(g) = c else {
                return Err(Error::ExactBackendRequired {
                    context: "span spaces need exact coefficients".into(),
                });
            };
            match index.get(&(wk.clone(), alpha.clone())) {
                Some(&col) => v[col] = v[col].add(g),
                None => return Ok(None),
            }
        }
    }
    Ok(Some(v))
}

/// In-place reduced row echelon form; returns the rank.  Rows end up with
/// leading 1 pivots, eliminated pivot columns, ordered by pivot column;
/// zero rows are dropped.
fn rref(rows: &mut Vec<Vec<GaussianRational>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let Some(src) = (pivot_row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, src);
        let inv = rows[pivot_row][col].inv();
        for x in rows[pivot_row].iter_mut() {
            *x = x.mul(&inv);
        }
        let pivot = rows[pivot_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_row && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot) {
                    *x = x.sub(&f.mul(p));
                }
            }
        }
        pivot_row += 1;
        if pivot_row == rows.len() {
            break;
        }
    }
    rows.truncate(pivot_row);
    pivot_row
}

/// A finite-dimensional subspace of exponential polynomials on `Z^d`,
/// stored with a canonical reduced basis.  Exact backend only.
#[derive(Clone, Debug)]
pub struct SpanSpace {
    lattice_dim: usize,
    keys: Vec<MonomialKey>,
    index: BTreeMap<MonomialKey, usize>,
    rows: Vec<Vec<GaussianRational>>,
}

impl SpanSpace {
    /// Span of the given generators (the zero space for an empty list).
    pub fn new(lattice_dim: usize, gens: &[ExpPoly]) -> Result<Self> {
        let mut index: BTreeMap<MonomialKey, usize> = BTreeMap::new();
        let mut normalized = Vec::with_capacity(gens.len());
        for g in gens {
            if g.dim() != lattice_dim {
                return Err(Error::DimensionMismatch { expected: lattice_dim, got: g.dim() });
            }
            let g = g.normalize();
            for t in g.terms() {
                let wk = witness_key(&t.witness)?;
                for (alpha, c) in &t.coeffs {
                    if !c.is_exact() {
                        return Err(Error::ExactBackendRequired {
                            context: "span spaces need exact coefficients".into(),
                        });
                    }
                    let next = index.len();
                    index.entry((wk.clone(), alpha.clone())).or_insert(next);
                }
            }
            normalized.push(g);
        }
        // Re-key columns in sorted order so the basis is canonical.
        let keys: Vec<MonomialKey> = index.keys().cloned().collect();
        let index: BTreeMap<MonomialKey, usize> =
            keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut rows = Vec::with_capacity(normalized.len());
        for g in &normalized {
            let v = coords_of(g, &index)?.expect("index covers all generators");
            rows.push(v);
        }
        rref(&mut rows);
        Ok(SpanSpace { lattice_dim, keys, index, rows })
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// The canonical basis as polynomials.
    pub fn basis(&self) -> Vec<ExpPoly> {
        self.rows.iter().map(|row| self.row_to_poly(row)).collect()
    }

    fn row_to_poly(&self, row: &[GaussianRational]) -> ExpPoly {
        let mut by_witness: BTreeMap<Vec<GaussianRational>, BTreeMap<MultiIndex, Scalar>> =
            BTreeMap::new();
        for (col, g) in row.iter().enumerate() {
            if !g.is_zero() {
                let (wk, alpha) = &self.keys[col];
                by_witness
                    .entry(wk.clone())
                    .or_default()
                    .insert(alpha.clone(), Scalar::Exact(g.clone()));
            }
        }
        let terms = by_witness
            .into_iter()
            .map(|(wk, coeffs)| ExpTerm { witness: key_to_witness(&wk), coeffs })
            .collect();
        ExpPoly::from_terms(self.lattice_dim, terms).expect("dimensions preserved")
    }

    /// Exact membership test.
    pub fn contains(&self, f: &ExpPoly) -> Result<bool> {
        if f.dim() != self.lattice_dim {
            return Err(Error::DimensionMismatch { expected: self.lattice_dim, got: f.dim() });
        }
        let Some(mut v) = coords_of(f, &self.index)? else {
            return Ok(false);
        };
        // Reduce against the canonical rows.
        for row in &self.rows {
            let pivot = row.iter().position(|x| !x.is_zero()).expect("no zero rows");
            if !v[pivot].is_zero() {
                let f = v[pivot].clone();
                for (x, r) in v.iter_mut().zip(row) {
                    *x = x.sub(&f.mul(r));
                }
            }
        }
        Ok(v.iter().all(|x| x.is_zero()))
    }

    /// Subspace equality via mutual containment.
    pub fn equals(&self, other: &SpanSpace) -> Result<bool> {
        if self.dim() != other.dim() {
            return Ok(false);
        }
        for b in other.basis() {
            if !self.contains(&b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest space containing both.
    pub fn join(&self, other: &SpanSpace) -> Result<SpanSpace> {
        let mut gens = self.basis();
        gens.extend(other.basis());
        SpanSpace::new(self.lattice_dim, &gens)
    }

    fn apply_factor_once(&self, f: &ExpPoly, op: &OpFactor) -> Result<ExpPoly> {
        let c = match &op.phi {
            PhiSpec::Witness(w) => w.eval_at(&op.shift)?,
            PhiSpec::Table(t) => t.get(&op.shift)?.clone(),
        };
        apply_modified_value(f, &c, &op.shift, op.power)
    }

    /// Whether `L(V) ⊆ V` for `L` the operator of `op`.
    pub fn is_invariant_under(&self, op: &OpFactor) -> Result<bool> {
        for b in self.basis() {
            if !self.contains(&self.apply_factor_once(&b, op)?)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The extension `V + L(V) + … + L^n(V)`.
    ///
    /// The result is `L`-invariant exactly when `L^{n+1}(V)` falls inside
    /// it; `invariant` reports the outcome of that direct check.
    pub fn extend_once(&self, op: &OpFactor, n: u32) -> Result<ExtensionResult> {
        let mut gens = self.basis();
        let mut layer = self.basis();
        for _ in 0..n {
            let mut next = Vec::with_capacity(layer.len());
            for f in &layer {
                next.push(self.apply_factor_once(f, op)?);
            }
            gens.extend(next.iter().cloned());
            layer = next;
        }
        let space = SpanSpace::new(self.lattice_dim, &gens)?;
        let invariant = space.is_invariant_under(op)?;
        Ok(ExtensionResult { space, invariant })
    }

    /// Iterated extension `V_i = (V_{i−1}) + L_i(V_{i−1}) + … + L_i^{s_i}(V_{i−1})`.
    ///
    /// When every step came out invariant under its own operator, the final
    /// space is invariant under all of them (the operators commute); the
    /// direct check `invariant_under_all` must then agree.
    pub fn closure_chain(&self, steps: &[(OpFactor, u32)]) -> Result<ClosureResult> {
        let mut space = self.clone();
        let mut step_invariant = Vec::with_capacity(steps.len());
        for (op, depth) in steps {
            let ext = space.extend_once(op, *depth)?;
            space = ext.space;
            step_invariant.push(ext.invariant);
        }
        let mut invariant_under_all = true;
        for (op, _) in steps {
            if !space.is_invariant_under(op)? {
                invariant_under_all = false;
                break;
            }
        }
        if step_invariant.iter().all(|&b| b) {
            debug_assert!(
                invariant_under_all,
                "stepwise invariance must imply joint invariance"
            );
        }
        Ok(ClosureResult { space, step_invariant, invariant_under_all })
    }

    /// Whether every translate `τ_y(V)` for `y` in `shifts` stays in `V`.
    pub fn is_translation_invariant(&self, shifts: &[LatticePoint]) -> Result<bool> {
        for y in shifts {
            for b in self.basis() {
                if !self.contains(&b.translate(y)?)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Invariance of the space under translations, plain differences, and
    /// modified differences with weight `phi`, each checked independently
    /// over the given shifts.  For a fixed shift set the three notions
    /// agree on finite-dimensional spaces.
    pub fn invariance_flags(
        &self,
        shifts: &[LatticePoint],
        phi: &ExponentialWitness,
    ) -> Result<InvarianceFlags> {
        let translation = self.is_translation_invariant(shifts)?;
        let mut plain_difference = true;
        'outer_p: for y in shifts {
            for b in self.basis() {
                let d = b.translate(y)?.sub(&b)?;
                if !self.contains(&d)? {
                    plain_difference = false;
                    break 'outer_p;
                }
            }
        }
        let mut modified_difference = true;
        'outer_m: for y in shifts {
            let c = phi.eval_at(y)?;
            for b in self.basis() {
                let d = b.translate(y)?.sub(&b.scale(&c))?;
                if !self.contains(&d)? {
                    modified_difference = false;
                    break 'outer_m;
                }
            }
        }
        Ok(InvarianceFlags { translation, plain_difference, modified_difference })
    }
}

/// Outcome of a one-step extension.
#[derive(Clone, Debug, Serialize)]
pub struct ExtensionResult {
    pub space: SpanSpace,
    /// Whether the extension is invariant under the extending operator.
    pub invariant: bool,
}

/// Outcome of an iterated closure chain.
#[derive(Clone, Debug, Serialize)]
pub struct ClosureResult {
    pub space: SpanSpace,
    /// Per-step invariance under the step's own operator.
    pub step_invariant: Vec<bool>,
    /// Invariance of the final space under every operator in the chain.
    pub invariant_under_all: bool,
}

/// Independent invariance checks for the equivalent notions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceFlags {
    pub translation: bool,
    pub plain_difference: bool,
    pub modified_difference: bool,
}

impl Serialize for SpanSpace {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("SpanSpace", 3)?;
        st.serialize_field("dim", &self.lattice_dim)?;
        st.serialize_field("rank", &self.dim())?;
        st.serialize_field("basis", &self.basis())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SpanSpace {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            basis: Vec<ExpPoly>,
        }
        let repr = Repr::deserialize(de)?;
        SpanSpace::new(repr.dim, &repr.basis).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Graded monomial bases and operator matrices.

/// The basis `{x^α λ^x : |α| ≤ k}` in graded lexicographic order.
#[derive(Clone, Debug)]
pub struct GradedLexBasis {
    witness: ExponentialWitness,
    degree_bound: u32,
    monomials: Vec<MultiIndex>,
}

impl GradedLexBasis {
    pub fn new(witness: ExponentialWitness, degree_bound: u32) -> Self {
        let monomials = MultiIndex::all_up_to_degree(witness.dim(), degree_bound);
        GradedLexBasis { witness, degree_bound, monomials }
    }

    pub fn witness(&self) -> &ExponentialWitness {
        &self.witness
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn size(&self) -> usize {
        self.monomials.len()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    /// The `i`-th basis element as a polynomial.
    pub fn member(&self, i: usize) -> ExpPoly {
        ExpPoly::monomial(self.witness.clone(), self.monomials[i].clone(), Scalar::one())
            .expect("basis data is consistent")
    }

    /// The whole space spanned by this basis (exact witnesses only).
    pub fn span(&self) -> Result<SpanSpace> {
        let gens: Vec<ExpPoly> = (0..self.size()).map(|i| self.member(i)).collect();
        SpanSpace::new(self.witness.dim(), &gens)
    }
}

/// Dense square matrix of scalars, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    size: usize,
    entries: Vec<Scalar>,
}

impl OperatorMatrix {
    pub fn zero(size: usize) -> Self {
        OperatorMatrix { size, entries: vec![Scalar::zero(); size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> &Scalar {
        &self.entries[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Scalar) {
        self.entries[row * self.size + col] = v;
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.size, other.size);
        let mut out = OperatorMatrix::zero(self.size);
        for i in 0..self.size {
            for k in 0..self.size {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..self.size {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let cur = out.get(i, j).add(&a.mul(b));
                        out.set(i, j, cur);
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> OperatorMatrix {
        let mut out = OperatorMatrix::identity(self.size);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn identity(size: usize) -> OperatorMatrix {
        let mut m = OperatorMatrix::zero(size);
        for i in 0..size {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j).is_zero()))
    }

    pub fn diagonal(&self) -> Vec<Scalar> {
        (0..self.size).map(|i| self.get(i, i).clone()).collect()
    }

    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.is_zero_within(tol))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }
}

fn int_binomial(n: u32, k: u32) -> i64 {
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// Matrix of `Δ_{φ;h}` (with scalar weight value `φ(h) = phi_value`) on a
/// graded monomial basis: column `α` holds the expansion of
/// `Δ(x^α λ^x)`.  Always upper triangular with constant diagonal
/// `λ^h − φ(h)`; when the diagonal vanishes the matrix is nilpotent with
/// index at most the degree bound plus one.
pub fn operator_matrix(
    basis: &GradedLexBasis,
    phi_value: &Scalar,
    h: &LatticePoint,
) -> Result<OperatorMatrix> {
    let dim = basis.witness().dim();
    h.check_dim(dim)?;
    let lambda_h = basis.witness().eval_at(h)?;
    let n = basis.size();
    let mut m = OperatorMatrix::zero(n);
    let pos: BTreeMap<&MultiIndex, usize> =
        basis.monomials().iter().enumerate().map(|(i, a)| (a, i)).collect();
    for (col, alpha) in basis.monomials().iter().enumerate() {
        // Δ(x^α λ^x) = λ^h Σ_{β ≤ α} C(α,β) h^{α−β} x^β λ^x − φ(h) x^α λ^x.
        for beta in basis.monomials() {
            if !beta.le(alpha) {
                continue;
            }
            let mut factor: i64 = 1;
            for i in 0..dim {
                let (a, b) = (alpha.0[i], beta.0[i]);
                factor *= int_binomial(a, b) * h.0[i].pow(a - b);
            }
            if factor == 0 {
                continue;
            }
            let row = pos[beta];
            let mut entry = lambda_h.mul(&Scalar::from_int(factor));
            if beta == alpha {
                entry = entry.sub(phi_value);
            }
            m.set(row, col, entry);
        }
    }
    Ok(m)
}
