//! Slow reference implementations and seeded random instances.
//!
//! Everything here is deliberately independent of the optimized code
//! paths: operators are applied by literal recursion on their definition,
//! and nullspace dimensions on finite groups are computed by exhaustive
//! enumeration of shift tuples.  The fast paths are tested against these.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffops::DiffProduct;
use crate::error::Error;
use crate::lattice::{generation_status, LatticeBox, LatticePoint, MultiIndex};
use crate::poly::{ExpPoly, ExpTerm, ExponentialWitness};
use crate::sampled::SampledFunction;
use crate::scalar::Scalar;
use crate::Result;

// ---------------------------------------------------------------------------
// Literal operator application on sample boxes.

/// Apply an operator product by direct recursion on the definition
/// `Δ_{φ;y} f(x) = f(x+y) − φ(y) f(x)`, one application at a time, with no
/// reuse of intermediate tables.  Exponential in the total order; this is
/// the reference against which the fast path is checked.
pub fn brute_apply(s: &SampledFunction, prod: &DiffProduct) -> Result<SampledFunction> {
    // Resolve every factor to (φ(y), y), expanded to single applications.
    let mut apps: Vec<(Scalar, LatticePoint)> = Vec::new();
    let mut bx = s.bounds().clone();
    for factor in &prod.factors {
        factor.shift.check_dim(s.dim())?;
        let c = factor.phi.value_at(&factor.shift)?;
        for _ in 0..factor.power {
            apps.push((c.clone(), factor.shift.clone()));
        }
        bx = bx.shrink_for_shift(&factor.shift, factor.power)?;
    }

    fn eval(s: &SampledFunction, apps: &[(Scalar, LatticePoint)], x: &LatticePoint) -> Scalar {
        match apps.split_last() {
            None => s.get(x).expect("recursion stays inside the box").clone(),
            Some(((c, y), rest)) => {
                let ahead = eval(s, rest, &x.add(y));
                let here = eval(s, rest, x);
                ahead.sub(&here.mul(c))
            }
        }
    }

    SampledFunction::from_fn(bx, |x| Ok(eval(s, &apps, x)))
}

// ---------------------------------------------------------------------------
// Finite abelian groups Z_{m_1} × … × Z_{m_k}.

/// Default bound on the group order accepted by the exhaustive routines.
pub const DEFAULT_GROUP_BOUND: u64 = 4096;

/// Exact linear algebra is used whenever the group order is at most this.
pub const EXACT_GROUP_LIMIT: u64 = 16;

/// A finite abelian group given as a product of cyclic factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteGroupSpec {
    moduli: Vec<u64>,
}

impl FiniteGroupSpec {
    pub fn new(moduli: Vec<u64>) -> Result<Self> {
        Self::with_bound(moduli, DEFAULT_GROUP_BOUND)
    }

    pub fn with_bound(moduli: Vec<u64>, bound: u64) -> Result<Self> {
        if moduli.is_empty() || moduli.contains(&0) {
            return Err(Error::InvalidInput("group moduli must be positive".into()));
        }
        let mut order: u64 = 1;
        for &m in &moduli {
            order = order.checked_mul(m).ok_or(Error::GroupTooLarge {
                order: u64::MAX,
                bound,
            })?;
        }
        if order > bound {
            return Err(Error::GroupTooLarge { order, bound });
        }
        Ok(FiniteGroupSpec { moduli })
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().product::<u64>() as usize
    }

    /// Index of the element with the given canonical coordinates
    /// (mixed-radix, last modulus fastest, matching box iteration order).
    pub fn index_of(&self, coords: &[u64]) -> usize {
        let mut idx = 0usize;
        for (a, &m) in self.moduli.iter().enumerate() {
            idx = idx * m as usize + (coords[a] % m) as usize;
        }
        idx
    }

    pub fn coords_of(&self, mut idx: usize) -> Vec<u64> {
        let mut coords = vec![0u64; self.rank()];
        for a in (0..self.rank()).rev() {
            let m = self.moduli[a] as usize;
            coords[a] = (idx % m) as u64;
            idx /= m;
        }
        coords
    }

    /// Index of the sum of two elements given by index.
    pub fn add_indices(&self, i: usize, j: usize) -> usize {
        let a = self.coords_of(i);
        let b = self.coords_of(j);
        let sum: Vec<u64> = a
            .iter()
            .zip(&b)
            .zip(&self.moduli)
            .map(|((x, y), &m)| (x + y) % m)
            .collect();
        self.index_of(&sum)
    }

    /// Canonical representative of a lattice point in the group.
    pub fn reduce(&self, p: &LatticePoint) -> Result<Vec<u64>> {
        p.check_dim(self.rank())?;
        Ok(p
            .0
            .iter()
            .zip(&self.moduli)
            .map(|(&c, &m)| c.rem_euclid(m as i64) as u64)
            .collect())
    }
}

/// A function on a finite abelian group, indexed like
/// [`FiniteGroupSpec::index_of`].
#[derive(Clone, Debug)]
pub struct GroupTable {
    pub spec: FiniteGroupSpec,
    pub values: Vec<Scalar>,
}

impl GroupTable {
    pub fn new(spec: FiniteGroupSpec, values: Vec<Scalar>) -> Result<Self> {
        if values.len() != spec.order() {
            return Err(Error::InvalidInput(format!(
                "expected {} values on the group, got {}",
                spec.order(),
                values.len()
            )));
        }
        Ok(GroupTable { spec, values })
    }

    pub fn constant(spec: FiniteGroupSpec, v: Scalar) -> Self {
        let n = spec.order();
        GroupTable { spec, values: vec![v; n] }
    }
}

/// Apply an operator product on a finite group by literal recursion, with
/// all shifts reduced modulo the group.
pub fn brute_apply_group(t: &GroupTable, prod: &DiffProduct) -> Result<GroupTable> {
    let mut apps: Vec<(Scalar, usize)> = Vec::new();
    for factor in &prod.factors {
        let c = factor.phi.value_at(&factor.shift)?;
        let y = t.spec.index_of(&t.spec.reduce(&factor.shift)?);
        for _ in 0..factor.power {
            apps.push((c.clone(), y));
        }
    }

    fn eval(t: &GroupTable, apps: &[(Scalar, usize)], x: usize) -> Scalar {
        match apps.split_last() {
            None => t.values[x].clone(),
            Some(((c, y), rest)) => {
                let ahead = eval(t, rest, t.spec.add_indices(x, *y));
                let here = eval(t, rest, x);
                ahead.sub(&here.mul(c))
            }
        }
    }

    let values = (0..t.spec.order()).map(|x| eval(t, &apps, x)).collect();
    GroupTable::new(t.spec.clone(), values)
}

// ---------------------------------------------------------------------------
// Nullspaces of the two families of difference equations on a finite group:
// (1) Δ_{y_1} ⋯ Δ_{y_{n+1}} f = 0 for all shift tuples, and
// (2) Δ_y^{n+1} f = 0 for all single shifts.

/// Options for [`frechet_nullspaces`].
#[derive(Clone, Debug)]
pub struct FrechetOptions {
    /// Maximum number of shift multisets enumerated before falling back to
    /// seeded random sampling.
    pub tuple_cap: usize,
    /// Seed for the sampling fallback.
    pub seed: u64,
    /// Skip the exact backend even for small groups (testing hook).
    pub force_float: bool,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        FrechetOptions { tuple_cap: 1 << 20, seed: 0, force_float: false }
    }
}

/// Result of the nullspace comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrechetReport {
    pub moduli: Vec<u64>,
    pub n: u32,
    /// Nullspace dimension of the multi-shift family.
    pub dim1: usize,
    /// Nullspace dimension of the iterated single-shift family.
    pub dim2: usize,
    /// Whether the two nullspaces coincide as subspaces.
    pub equal: bool,
    /// `"exact"` or `"float"`.
    pub backend: String,
    /// False when the shift-tuple family was only sampled, not enumerated.
    pub exhaustive: bool,
}

/// Incremental row echelon over `f64` rows with recorded pivot columns.
struct FloatEchelon {
    rows: Vec<Vec<f64>>,
    pivots: Vec<usize>,
    tol: f64,
}

impl FloatEchelon {
    fn new(tol: f64) -> Self {
        FloatEchelon { rows: Vec::new(), pivots: Vec::new(), tol }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the rows; keep it if a residual remains.
    /// Returns true when the row added new information.
    fn insert(&mut self, mut v: Vec<f64>) -> bool {
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let f = v[p] / row[p];
            if f != 0.0 {
                for (vi, ri) in v.iter_mut().zip(row) {
                    *vi -= f * ri;
                }
            }
        }
        let (piv, max) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bm), (i, x)| {
                if x.abs() > bm {
                    (i, x.abs())
                } else {
                    (bi, bm)
                }
            });
        if max > self.tol * scale {
            self.rows.push(v);
            self.pivots.push(piv);
            true
        } else {
            false
        }
    }
}

/// Incremental row echelon over exact rationals.
struct ExactEchelon {
    rows: Vec<Vec<BigRational>>,
    pivots: Vec<usize>,
}

impl ExactEchelon {
    fn new() -> Self {
        ExactEchelon { rows: Vec::new(), pivots: Vec::new() }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn insert(&mut self, mut v: Vec<BigRational>) -> bool {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !v[p].is_zero() {
                let f = &v[p] / &row[p];
                for (vi, ri) in v.iter_mut().zip(row) {
                    *vi = &*vi - &f * ri;
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            Some(piv) => {
                self.rows.push(v);
                self.pivots.push(piv);
                true
            }
            None => false,
        }
    }
}

/// Operator coefficient vector of `Δ_{y_1} ⋯ Δ_{y_m}` on the group: entry
/// `p[z]` is the coefficient of `f(x+z)` in the expanded product.
fn tuple_operator(spec: &FiniteGroupSpec, ys: &[usize]) -> Vec<i64> {
    let n = spec.order();
    let mut p = vec![0i64; n];
    p[0] = 1;
    for &y in ys {
        let mut next = vec![0i64; n];
        for z in 0..n {
            if p[z] != 0 {
                next[spec.add_indices(z, y)] += p[z];
                next[z] -= p[z];
            }
        }
        p = next;
    }
    p
}

/// Enumerate non-decreasing index tuples of length `len` over `0..n`.
/// Because difference factors commute, every shift tuple acts like its
/// sorted version, so this covers all operators of the full Cartesian
/// family exactly.
struct MultisetIter {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl MultisetIter {
    fn new(n: usize, len: usize) -> Self {
        MultisetIter { n, cur: Some(vec![0; len]) }
    }
}

impl Iterator for MultisetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.cur.take()?;
        let mut next = cur.clone();
        let len = next.len();
        let mut i = len;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if next[i] + 1 < self.n {
                let v = next[i] + 1;
                for slot in next.iter_mut().skip(i) {
                    *slot = v;
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(cur)
    }
}

fn multiset_count(n: usize, len: usize) -> Option<usize> {
    // C(n + len - 1, len), saturating to None on overflow.
    let mut acc: u128 = 1;
    for i in 0..len {
        acc = acc.checked_mul((n + len - 1 - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

enum Backend {
    Float { ops: FloatEchelon, action: FloatEchelon },
    Exact { ops: ExactEchelon, action: ExactEchelon },
}

impl Backend {
    fn new(exact: bool, n: usize) -> Backend {
        if exact {
            Backend::Exact { ops: ExactEchelon::new(), action: ExactEchelon::new() }
        } else {
            // Operator vectors are small integers; a relative pivot
            // threshold on integer data is safe at this scale.
            let tol = 1e-9 * n as f64;
            Backend::Float { ops: FloatEchelon::new(tol), action: FloatEchelon::new(tol) }
        }
    }

    /// Feed one operator vector; if it enlarges the operator span, stack
    /// its `|G|` action rows (row for base point `x` has `p[z]` at column
    /// `x+z`) into the action echelon.
    fn feed(&mut self, spec: &FiniteGroupSpec, p: &[i64]) {
        let n = p.len();
        match self {
            Backend::Float { ops, action } => {
                let v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
                if ops.insert(v) {
                    for x in 0..n {
                        let mut row = vec![0.0f64; n];
                        for (z, &pz) in p.iter().enumerate() {
                            if pz != 0 {
                                row[spec.add_indices(x, z)] += pz as f64;
                            }
                        }
                        action.insert(row);
                    }
                }
            }
            Backend::Exact { ops, action } => {
                let to_rat =
                    |x: i64| BigRational::from_integer(num_bigint::BigInt::from(x));
                let v: Vec<BigRational> = p.iter().map(|&x| to_rat(x)).collect();
                if ops.insert(v) {
                    for x in 0..n {
                        let mut row = vec![0i64; n];
                        for (z, &pz) in p.iter().enumerate() {
                            row[spec.add_indices(x, z)] += pz;
                        }
                        action.insert(row.iter().map(|&x| to_rat(x)).collect());
                    }
                }
            }
        }
    }

    fn action_rank(&self) -> usize {
        match self {
            Backend::Float { action, .. } => action.rank(),
            Backend::Exact { action, .. } => action.rank(),
        }
    }
}

/// Compute and compare the nullspaces of the two equation families for
/// order parameter `n` (so each operator has `n+1` difference factors).
pub fn frechet_nullspaces(
    spec: &FiniteGroupSpec,
    n: u32,
    opts: &FrechetOptions,
) -> Result<FrechetReport> {
    let order = spec.order();
    let exact = !opts.force_float && (order as u64) <= EXACT_GROUP_LIMIT;
    let len = n as usize + 1;
    // The constant functions are in every nullspace, so the action rank
    // can never exceed |G| − 1; reaching that rank ends the search early.
    let rank_cap = order - 1;

    // Family (2): one operator per single shift, always exhaustive.
    let mut fam2 = Backend::new(exact, order);
    let mut ops2: Vec<Vec<i64>> = Vec::new();
    for y in 0..order {
        let p = tuple_operator(spec, &vec![y; len]);
        let before = fam2.action_rank();
        fam2.feed(spec, &p);
        if fam2.action_rank() > before {
            ops2.push(p);
        }
        if fam2.action_rank() == rank_cap {
            break;
        }
    }

    // Family (1): all shift tuples, via sorted multisets.
    let mut fam1 = Backend::new(exact, order);
    let mut ops1: Vec<Vec<i64>> = Vec::new();
    let count = multiset_count(order, len);
    let exhaustive_plan = count.is_some_and(|c| c <= opts.tuple_cap);
    let mut saturated = false;
    let feed1 = |fam1: &mut Backend, ops1: &mut Vec<Vec<i64>>, ys: &[usize]| {
        let p = tuple_operator(spec, ys);
        let before = fam1.action_rank();
        fam1.feed(spec, &p);
        if fam1.action_rank() > before {
            ops1.push(p);
        }
        fam1.action_rank() == rank_cap
    };
    if exhaustive_plan {
        for ys in MultisetIter::new(order, len) {
            if feed1(&mut fam1, &mut ops1, &ys) {
                saturated = true;
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.tuple_cap {
            let mut ys: Vec<usize> =
                (0..len).map(|_| (rng.next_u64() % order as u64) as usize).collect();
            ys.sort_unstable();
            if feed1(&mut fam1, &mut ops1, &ys) {
                saturated = true;
                break;
            }
        }
    }

    let rank1 = fam1.action_rank();
    let rank2 = fam2.action_rank();
    let dim1 = order - rank1;
    let dim2 = order - rank2;

    // Nullspaces are equal iff the action row spaces coincide, which we
    // check by whether either family's rows extend the other's span.
    let equal = if rank1 == rank2 && rank1 == rank_cap {
        true
    } else {
        let grows = |base_ops: &[Vec<i64>], candidate_ops: &[Vec<i64>]| -> bool {
            let mut ech = Backend::new(exact, order);
            for p in base_ops {
                ech.feed(spec, p);
            }
            let base_rank = ech.action_rank();
            for p in candidate_ops {
                ech.feed(spec, p);
                if ech.action_rank() > base_rank {
                    return true;
                }
            }
            false
        };
        rank1 == rank2
            && !grows(&ops1, &ops2)
            && !grows(&ops2, &ops1)
    };

    Ok(FrechetReport {
        moduli: spec.moduli.clone(),
        n,
        dim1,
        dim2,
        equal,
        backend: if exact { "exact" } else { "float" }.into(),
        exhaustive: exhaustive_plan || saturated,
    })
}

// ---------------------------------------------------------------------------
// Seeded random instances.

/// Deterministic random stream used by instance generation.
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as usize) as i64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Shape of randomly generated exponential polynomials.
#[derive(Clone, Debug)]
pub struct RandomProfile {
    pub dim: usize,
    /// At most this many terms (at least one).
    pub max_terms: usize,
    pub max_degree: u32,
    /// Generate on the exact backend (small rationals) or float backend.
    pub exact: bool,
    /// Modulus range for float witness components.
    pub modulus_range: (f64, f64),
    /// Distinct witness components on any axis are at least this far
    /// apart (unless exactly equal).
    pub separation: f64,
    /// Magnitude cap for float coefficients.
    pub coeff_mag: f64,
}

impl Default for RandomProfile {
    fn default() -> Self {
        RandomProfile {
            dim: 1,
            max_terms: 3,
            max_degree: 2,
            exact: true,
            modulus_range: (0.8, 1.25),
            separation: 0.05,
            coeff_mag: 2.0,
        }
    }
}

fn random_exact_component(rng: &mut SeededRng) -> Scalar {
    loop {
        let p = rng.int_in(-6, 6);
        if p == 0 {
            continue;
        }
        let q = rng.int_in(1, 4);
        return Scalar::from_ratio(p, q);
    }
}

fn random_float_component(rng: &mut SeededRng, profile: &RandomProfile) -> Scalar {
    let (lo, hi) = profile.modulus_range;
    let r = rng.range(lo, hi);
    let theta = rng.range(0.0, std::f64::consts::TAU);
    Scalar::from_complex(Complex64::from_polar(r, theta))
}

/// Deterministic random exponential polynomial.  Witness components on a
/// shared axis are either exactly equal (reused) or separated by at least
/// `profile.separation`; witness tuples are pairwise distinct.
pub fn random_exppoly(seed: u64, profile: &RandomProfile) -> ExpPoly {
    let mut rng = SeededRng::new(seed);
    let dim = profile.dim.max(1);
    let n_terms = 1 + rng.below(profile.max_terms.max(1));
    let mut axis_values: Vec<Vec<Scalar>> = vec![Vec::new(); dim];
    let mut witnesses: Vec<Vec<Scalar>> = Vec::new();

    'terms: for _ in 0..n_terms {
        for _attempt in 0..60 {
            let mut comps = Vec::with_capacity(dim);
            for vals in &axis_values {
                let reuse = !vals.is_empty() && rng.chance(0.3);
                let v = if reuse {
                    vals[rng.below(vals.len())].clone()
                } else {
                    let mut fresh = None;
                    for _ in 0..80 {
                        let cand = if profile.exact {
                            random_exact_component(&mut rng)
                        } else {
                            random_float_component(&mut rng, profile)
                        };
                        let ok = vals.iter().all(|u| {
                            u == &cand
                                || (u.to_complex() - cand.to_complex()).norm()
                                    >= profile.separation
                        });
                        if ok {
                            fresh = Some(cand);
                            break;
                        }
                    }
                    match fresh {
                        Some(c) => c,
                        None => continue 'terms,
                    }
                };
                comps.push(v);
            }
            let duplicate = witnesses.iter().any(|w| w == &comps);
            if duplicate {
                continue;
            }
            for (axis, c) in comps.iter().enumerate() {
                if !axis_values[axis].contains(c) {
                    axis_values[axis].push(c.clone());
                }
            }
            witnesses.push(comps);
            continue 'terms;
        }
        break;
    }

    let exponents = MultiIndex::all_up_to_degree(dim, profile.max_degree);
    let mut terms = Vec::with_capacity(witnesses.len());
    for comps in witnesses {
        let witness = ExponentialWitness::new(comps).expect("components are nonzero");
        let support = 1 + rng.below(exponents.len().min(3));
        let mut coeffs: BTreeMap<MultiIndex, Scalar> = BTreeMap::new();
        for _ in 0..support {
            let alpha = exponents[rng.below(exponents.len())].clone();
            let c = if profile.exact {
                let p = {
                    let mut p = rng.int_in(-9, 9);
                    while p == 0 {
                        p = rng.int_in(-9, 9);
                    }
                    p
                };
                Scalar::from_ratio(p, rng.int_in(1, 3))
            } else {
                let mag = rng.range(0.5, profile.coeff_mag.max(0.6));
                let theta = rng.range(0.0, std::f64::consts::TAU);
                Scalar::from_complex(Complex64::from_polar(mag, theta))
            };
            coeffs.insert(alpha, c);
        }
        terms.push(ExpTerm { witness, coeffs });
    }
    ExpPoly::from_terms(dim, terms)
        .expect("dimensions are consistent by construction")
        .normalize()
}

/// Random shift set guaranteed to generate the whole lattice: random
/// vectors topped up with unit vectors when needed.
pub fn random_generating_shifts(
    seed: u64,
    dim: usize,
    count: usize,
    span: i64,
) -> Vec<LatticePoint> {
    let mut rng = SeededRng::new(seed);
    let mut shifts = Vec::with_capacity(count.max(dim));
    for _ in 0..count {
        loop {
            let p = LatticePoint((0..dim).map(|_| rng.int_in(-span, span)).collect());
            if !p.is_zero() {
                shifts.push(p);
                break;
            }
        }
    }
    if !generation_status(&shifts, dim).map(|s| s.is_full()).unwrap_or(false) {
        for axis in 0..dim {
            shifts.push(LatticePoint::unit(dim, axis));
        }
    }
    shifts
}

/// Random sample box for a profile: a cube centered near the origin.
pub fn centered_cube(dim: usize, side: usize) -> LatticeBox {
    let side = side.max(1) as i64;
    let lo = -(side / 2);
    let hi = lo + side - 1;
    LatticeBox::cube(dim, lo, hi).expect("side >= 1")
}
