//! Modified difference operators `Δ_{φ;y} f(x) = f(x+y) − φ(y) f(x)`,
//! their powers and products, on symbolic functions and on sample boxes.


use crate::error::Error;
use crate::lattice::{LatticeBox, LatticePoint};
use crate::poly::{ExpPoly, ExponentialWitness};
use crate::sampled::{PhiTable, SampledFunction};
use crate::scalar::Scalar;
use crate::Result;

/// How the weight function `φ` of an operator is given: as an exponential
/// witness (usable symbolically) or as a finite table of values (samples
/// only).
#[derive(Clone, Debug)]
pub enum PhiSpec {
    Witness(ExponentialWitness),
    Table(PhiTable),
}

impl PhiSpec {
    /// `φ(y)`.
    pub fn value_at(&self, y: &LatticePoint) -> Result<Scalar> {
        match self {
            PhiSpec::Witness(w) => w.eval_at(y),
            PhiSpec::Table(t) => t.get(y).cloned(),
        }
    }
}

/// One factor `Δ_{φ;y}^p` of an operator product; `p ≥ 1`.
#[derive(Clone, Debug)]
pub struct OpFactor {
    pub phi: PhiSpec,
    pub shift: LatticePoint,
    pub power: u32,
}

impl OpFactor {
    pub fn new(phi: PhiSpec, shift: LatticePoint, power: u32) -> Result<Self> {
        if power == 0 {
            return Err(Error::InvalidInput("operator power must be at least 1".into()));
        }
        Ok(OpFactor { phi, shift, power })
    }
}

/// A finite product of modified difference operators.  Factors commute, so
/// the stored order is presentation only.
#[derive(Clone, Debug, Default)]
pub struct DiffProduct {
    pub factors: Vec<OpFactor>,
}

impl DiffProduct {
    pub fn new(factors: Vec<OpFactor>) -> Self {
        DiffProduct { factors }
    }

    /// Total number of single-step applications.
    pub fn total_order(&self) -> u32 {
        self.factors.iter().map(|f| f.power).sum()
    }
}

// ---------------------------------------------------------------------------
// Symbolic applications.

/// `(τ_y − c)^power f` where `τ_y` is translation by `y`.
pub fn apply_modified_value(
    f: &ExpPoly,
    c: &Scalar,
    y: &LatticePoint,
    power: u32,
) -> Result<ExpPoly> {
    y.check_dim(f.dim())?;
    let mut g = f.clone();
    for _ in 0..power {
        let shifted = g.translate(y)?;
        g = shifted.sub(&g.scale(c))?;
    }
    Ok(g)
}

/// `Δ_{φ;y}^power f` with `φ` an exponential witness.
pub fn apply_modified(
    f: &ExpPoly,
    phi: &ExponentialWitness,
    y: &LatticePoint,
    power: u32,
) -> Result<ExpPoly> {
    if phi.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: phi.dim() });
    }
    apply_modified_value(f, &phi.eval_at(y)?, y, power)
}

/// Plain difference `Δ_y^power f` (weight identically 1).
pub fn apply_plain(f: &ExpPoly, y: &LatticePoint, power: u32) -> Result<ExpPoly> {
    apply_modified_value(f, &Scalar::one(), y, power)
}

/// Apply a whole operator product symbolically.  Every factor must carry
/// its weight as a witness; finite tables have no values off the sample
/// shifts and are rejected.
pub fn apply_product(f: &ExpPoly, prod: &DiffProduct) -> Result<ExpPoly> {
    let mut g = f.clone();
    for factor in &prod.factors {
        match &factor.phi {
            PhiSpec::Witness(w) => {
                g = apply_modified(&g, w, &factor.shift, factor.power)?;
            }
            PhiSpec::Table(_) => return Err(Error::PhiNotWitness),
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Sampled applications.  Each single application shrinks the box so that
// every output point only uses available samples.

/// `(τ_y − c)^power` on samples.
pub fn apply_sampled_value(
    s: &SampledFunction,
    c: &Scalar,
    y: &LatticePoint,
    power: u32,
) -> Result<SampledFunction> {
    y.check_dim(s.dim())?;
    let mut cur = s.clone();
    for _ in 0..power {
        let bx = cur.bounds().shrink_for_shift(y, 1)?;
        let next = SampledFunction::from_fn(bx, |p| {
            let ahead = cur.get(&p.add(y)).expect("shrunken box keeps shifts inside");
            let here = cur.get(p).expect("shrunken box is inside the original");
            Ok(ahead.sub(&here.mul(c)))
        })?;
        cur = next;
    }
    Ok(cur)
}

/// `Δ_{φ;y}^power` on samples with `φ` given as a finite table.
pub fn apply_sampled(
    s: &SampledFunction,
    phi: &PhiTable,
    y: &LatticePoint,
    power: u32,
) -> Result<SampledFunction> {
    let c = phi.get(y)?.clone();
    apply_sampled_value(s, &c, y, power)
}

/// `Δ_{φ;y}^power` on samples with `φ` an exponential witness.
pub fn apply_sampled_witness(
    s: &SampledFunction,
    phi: &ExponentialWitness,
    y: &LatticePoint,
    power: u32,
) -> Result<SampledFunction> {
    if phi.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: phi.dim() });
    }
    apply_sampled_value(s, &phi.eval_at(y)?, y, power)
}

/// Apply a whole operator product to samples.
pub fn apply_product_sampled(s: &SampledFunction, prod: &DiffProduct) -> Result<SampledFunction> {
    let mut cur = s.clone();
    for factor in &prod.factors {
        let c = factor.phi.value_at(&factor.shift)?;
        cur = apply_sampled_value(&cur, &c, &factor.shift, factor.power)?;
    }
    Ok(cur)
}

/// Apply the shift polynomial `q(τ_h) = Σ_j q_j τ_h^j` to samples.
pub fn apply_shift_polynomial(
    s: &SampledFunction,
    h: &LatticePoint,
    q: &[Scalar],
) -> Result<SampledFunction> {
    h.check_dim(s.dim())?;
    if q.is_empty() {
        return Err(Error::InvalidInput("empty shift polynomial".into()));
    }
    let deg = (q.len() - 1) as u32;
    let bx = if deg == 0 {
        s.bounds().clone()
    } else {
        s.bounds().shrink_for_shift(h, deg)?
    };
    SampledFunction::from_fn(bx, |p| {
        let mut acc = Scalar::zero();
        let mut cursor = p.clone();
        for qj in q {
            let v = s.get(&cursor).expect("shrunken box keeps all steps inside");
            acc = acc.add(&qj.mul(v));
            cursor = cursor.add(h);
        }
        Ok(acc)
    })
}

// ---------------------------------------------------------------------------
// The product identity linking modified and plain differences:
//
//   Δ_{φ;y_1} ⋯ Δ_{φ;y_m} f (x)
//     = φ(x + y_1 + … + y_m) · [Δ_{y_1} ⋯ Δ_{y_m} (f · φ̌)](x),
//
// where `φ̌(x) = φ(−x)` and `φ` is exponential.

/// Verify the identity for a symbolic `f` by evaluating both sides at
/// every point of `bx`.  Exact inputs are compared exactly; otherwise to
/// relative tolerance `rtol`.
pub fn difmod_check_symbolic(
    f: &ExpPoly,
    phi: &ExponentialWitness,
    shifts: &[LatticePoint],
    bx: &LatticeBox,
    rtol: f64,
) -> Result<bool> {
    if phi.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: phi.dim() });
    }
    if bx.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: bx.dim() });
    }
    let mut lhs = f.clone();
    for y in shifts {
        lhs = apply_modified(&lhs, phi, y, 1)?;
    }
    let mut total = LatticePoint::zero(f.dim());
    let mut rhs = f.mul_exponential(&phi.inverse())?;
    for y in shifts {
        rhs = apply_plain(&rhs, y, 1)?;
        total = total.add(y);
    }
    rhs = rhs.mul_exponential(phi)?;
    rhs = rhs.scale(&phi.eval_at(&total)?);
    compare_on_box(|p| lhs.eval(p), |p| rhs.eval(p), bx, rtol)
}

/// Verify the identity on samples; the two sides are built by independent
/// pipelines and compared on the common shrunken box.
pub fn difmod_check_sampled(
    s: &SampledFunction,
    phi: &ExponentialWitness,
    shifts: &[LatticePoint],
    rtol: f64,
) -> Result<bool> {
    if phi.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: phi.dim() });
    }
    let mut lhs = s.clone();
    for y in shifts {
        lhs = apply_sampled_witness(&lhs, phi, y, 1)?;
    }
    let phi_inv = phi.inverse();
    let mut total = LatticePoint::zero(s.dim());
    let mut rhs = SampledFunction::from_fn(s.bounds().clone(), |p| {
        Ok(s.get(p).unwrap().mul(&phi_inv.eval_at(p)?))
    })?;
    for y in shifts {
        rhs = apply_sampled_value(&rhs, &Scalar::one(), y, 1)?;
        total = total.add(y);
    }
    let rhs = SampledFunction::from_fn(rhs.bounds().clone(), |p| {
        let inner = rhs.get(p).unwrap();
        Ok(inner.mul(&phi.eval_at(&p.add(&total))?))
    })?;
    compare_on_box(
        |p| Ok(lhs.get(p).unwrap().clone()),
        |p| Ok(rhs.get(p).unwrap().clone()),
        lhs.bounds(),
        rtol,
    )
}

fn compare_on_box<L, R>(mut lhs: L, mut rhs: R, bx: &LatticeBox, rtol: f64) -> Result<bool>
where
    L: FnMut(&LatticePoint) -> Result<Scalar>,
    R: FnMut(&LatticePoint) -> Result<Scalar>,
{
    let mut pairs = Vec::with_capacity(bx.volume());
    let mut all_exact = true;
    let mut scale: f64 = 1.0;
    for p in bx.iter() {
        let l = lhs(&p)?;
        let r = rhs(&p)?;
        all_exact &= l.is_exact() && r.is_exact();
        scale = scale.max(l.abs()).max(r.abs());
        pairs.push((l, r));
    }
    if all_exact {
        Ok(pairs.iter().all(|(l, r)| l == r))
    } else {
        Ok(pairs
            .iter()
            .all(|(l, r)| (l.to_complex() - r.to_complex()).norm() <= rtol * scale))
    }
}
