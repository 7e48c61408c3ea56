//! Recovery of the exponential-polynomial decomposition of a function from
//! its samples on a box: per-direction minimal annihilating recurrences,
//! root clustering, spectral projections, and a joint least-squares
//! coefficient fit.  Optionally lifts the result back to exact rationals.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::diffops::{apply_sampled_value, apply_shift_polynomial};
use crate::error::Error;
use crate::lattice::{LatticeBox, LatticePoint, MultiIndex};
use crate::poly::{ExpPoly, ExpTerm, ExponentialWitness};
use crate::sampled::SampledFunction;
use crate::scalar::{GaussianRational, Scalar};
use crate::Result;
use std::collections::BTreeMap;

/// Tunables for the recovery pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Largest recurrence order tried per direction.
    pub max_order: usize,
    /// Acceptance threshold for annihilator residuals and the singular
    /// value cutoff of the least-squares solves (relative to the sample
    /// sup-norm).
    pub rank_tol: f64,
    /// Roots closer than this merge into one cluster.
    pub cluster_tol: f64,
    /// Acceptance threshold for the final relative residual, and the
    /// contribution floor below which fitted terms are discarded.
    pub residual_tol: f64,
    /// Attempt to snap the float result to exact Gaussian rationals.
    pub exact_lift: bool,
    /// Largest denominator considered by the exact lift.
    pub lift_max_den: u64,
    /// How close a float must be to a small rational to snap.
    pub lift_tol: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            max_order: 12,
            rank_tol: 1e-9,
            cluster_tol: 1e-6,
            residual_tol: 1e-8,
            exact_lift: false,
            lift_max_den: 64,
            lift_tol: 1e-9,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::InvalidInput("max_order must be at least 1".into()));
        }
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("cluster_tol", self.cluster_tol),
            ("residual_tol", self.residual_tol),
            ("lift_tol", self.lift_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// A recovered recurrence root (shared value, multiplicity).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootCluster {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

impl RootCluster {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Result of a recovery run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    /// The fitted exponential polynomial (float backend).
    pub poly: ExpPoly,
    /// Relative sup-norm residual on the sample box: the largest deviation
    /// between the fit and the samples, divided by `max(1, ‖s‖∞)`.
    pub residual: f64,
    /// Whether the residual met the configured tolerance.
    pub success: bool,
    /// Clustered recurrence roots found per axis.
    pub axis_roots: Vec<Vec<RootCluster>>,
    /// Exact-rational lift of `poly`, when requested and verified.
    pub exact: Option<ExpPoly>,
}

// ---------------------------------------------------------------------------
// Dense complex polynomial helpers (coefficients ascending).

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given roots and multiplicities.
fn poly_from_roots(roots: &[(Complex64, usize)]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for &(r, m) in roots {
        for _ in 0..m {
            out = poly_mul(&out, &[-r, Complex64::new(1.0, 0.0)]);
        }
    }
    out
}

/// First `count` Taylor coefficients of `p` at `v` via repeated synthetic
/// division by `(x − v)`.
fn taylor_at(p: &[Complex64], v: Complex64, count: usize) -> Vec<Complex64> {
    let mut cur = p.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        // Divide cur by (x − v): quotient + remainder.
        let mut quot = vec![Complex64::new(0.0, 0.0); cur.len().saturating_sub(1)];
        let mut carry = Complex64::new(0.0, 0.0);
        for i in (0..cur.len()).rev() {
            let c = cur[i] + carry;
            if i == 0 {
                out.push(c);
            } else {
                quot[i - 1] = c;
                carry = c * v;
            }
        }
        if quot.is_empty() {
            // Pad remaining orders with zero.
            while out.len() < count {
                out.push(Complex64::new(0.0, 0.0));
            }
            break;
        }
        cur = quot;
    }
    out
}

/// Coefficients of the truncated power-series inverse of `a` (length
/// `a.len()`), requiring `a[0] ≠ 0`.
fn series_inverse(a: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.is_empty() || a[0].norm() == 0.0 {
        return Err(Error::IllConditionedProjection { estimate: f64::INFINITY });
    }
    let mut u = vec![Complex64::new(0.0, 0.0); a.len()];
    u[0] = a[0].finv();
    for k in 1..a.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=k {
            acc += a[i] * u[k - i];
        }
        u[k] = -acc * u[0];
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// Minimal annihilating recurrences.

/// Find the lowest-order monic recurrence `q` with
/// `Σ_j q_j s(x + j·h) ≈ 0` on the box, searching orders `1..=max_order`.
/// Returns the ascending coefficients of `q` (constant term first); the
/// zero function gets the trivial `q = 1`.
pub fn direction_annihilator(
    s: &SampledFunction,
    h: &LatticePoint,
    cfg: &RecoveryConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    h.check_dim(s.dim())?;
    if h.is_zero() {
        return Err(Error::InvalidInput("annihilator direction must be nonzero".into()));
    }
    let scale = s.max_abs();
    if scale == 0.0 {
        return Ok(vec![Complex64::new(1.0, 0.0)]);
    }
    let values = s.to_complex_values();
    let bx = s.bounds();
    let inv_scale = 1.0 / scale;

    let mut truncated = false;
    for m in 1..=cfg.max_order {
        let Ok(rows_box) = bx.shrink_for_shift(h, m as u32) else {
            truncated = true;
            break;
        };
        let n_rows = rows_box.volume();
        if n_rows < m + 1 {
            truncated = true;
            break;
        }
        let mut a = nalgebra::DMatrix::<Complex64>::zeros(n_rows, m);
        let mut b = nalgebra::DVector::<Complex64>::zeros(n_rows);
        for (r, x) in rows_box.iter().enumerate() {
            let mut cursor = x.clone();
            for j in 0..m {
                a[(r, j)] = values[bx.index_of(&cursor)] * inv_scale;
                cursor = cursor.add(h);
            }
            b[r] = -values[bx.index_of(&cursor)] * inv_scale;
        }
        let svd = a.clone().svd(true, true);
        // Confluent instances push genuine signal directions below the
        // rank threshold; retry with a finer truncation before giving up.
        // The acceptance bar stays at rank_tol either way.
        for eps in [cfg.rank_tol, cfg.rank_tol * 1e-5] {
            let Ok(q) = svd.solve(&b, eps) else { continue };
            let res = (&a * &q - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if res <= cfg.rank_tol {
                let mut out: Vec<Complex64> = q.iter().copied().collect();
                out.push(Complex64::new(1.0, 0.0));
                return Ok(out);
            }
        }
    }
    if truncated {
        Err(Error::InsufficientBox {
            reason: format!(
                "box {}..{} too small to test recurrences up to order {} along {}",
                bx.lo(),
                bx.hi(),
                cfg.max_order,
                h
            ),
        })
    } else {
        Err(Error::NoAnnihilator { max_order: cfg.max_order })
    }
}

/// Minimal annihilator along a coordinate axis.
pub fn section_annihilator(
    s: &SampledFunction,
    axis: usize,
    cfg: &RecoveryConfig,
) -> Result<Vec<Complex64>> {
    if axis >= s.dim() {
        return Err(Error::InvalidInput(format!(
            "axis {axis} out of range for dimension {}",
            s.dim()
        )));
    }
    direction_annihilator(s, &LatticePoint::unit(s.dim(), axis), cfg)
}

/// Roots of a monic polynomial via its companion matrix.
pub fn companion_roots(q: &[Complex64]) -> Vec<Complex64> {
    let m = q.len().saturating_sub(1);
    if m == 0 {
        return Vec::new();
    }
    let mat = faer::Mat::<faer::c64>::from_fn(m, m, |i, j| {
        if j == m - 1 {
            faer::c64::new(-q[i].re, -q[i].im)
        } else if i == j + 1 {
            faer::c64::new(1.0, 0.0)
        } else {
            faer::c64::new(0.0, 0.0)
        }
    });
    let ev = mat.eigenvalues().expect("companion eigenvalues converge");
    ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// Greedy clustering of roots: sorted by `(re, im)`, a root joins the
/// current cluster when it lies within `tol` of the running mean.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<RootCluster> {
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then_with(|| a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in sorted {
        match clusters.last_mut() {
            Some((mean, count)) if (r - *mean).norm() <= tol => {
                let n = *count as f64;
                *mean = (*mean * n + r) / (n + 1.0);
                *count += 1;
            }
            _ => clusters.push((r, 1)),
        }
    }
    clusters.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then_with(|| a.0.im.total_cmp(&b.0.im)));
    clusters
        .into_iter()
        .map(|(v, m)| RootCluster { re: v.re, im: v.im, multiplicity: m })
        .collect()
}

// ---------------------------------------------------------------------------
// Spectral projections.

/// Split `s` into per-cluster spectral components along direction `h`.
///
/// With `q = Π_j (x − v_j)^{m_j}` annihilating `s`, each component is
/// `u_j(S − v_j) · Q_j(S) s` where `Q_j` is the complementary factor and
/// `u_j` the truncated inverse of `Q_j` around `v_j`; the components live
/// on the box shrunk by `deg q − 1` steps of `h` and sum back to `s`
/// there.  A single cluster returns `s` unchanged.
pub fn split_spectrum(
    s: &SampledFunction,
    h: &LatticePoint,
    clusters: &[RootCluster],
    cfg: &RecoveryConfig,
) -> Result<Vec<SampledFunction>> {
    cfg.validate()?;
    h.check_dim(s.dim())?;
    if clusters.is_empty() {
        return Ok(Vec::new());
    }
    if clusters.len() == 1 {
        return Ok(vec![s.to_float()]);
    }
    let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
    let final_box = s.bounds().shrink_for_shift(h, (total - 1) as u32)?;
    let sf = s.to_float();

    // Condition estimate before any work: Σ ‖u_j‖₁ ‖Q_j‖₁ bounds the
    // projector norms.
    let mut parts: Vec<(Vec<Complex64>, Vec<Complex64>, Complex64)> = Vec::new();
    let mut cond: f64 = 0.0;
    for (j, cl) in clusters.iter().enumerate() {
        let others: Vec<(Complex64, usize)> = clusters
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, c)| (c.value(), c.multiplicity))
            .collect();
        let qj = poly_from_roots(&others);
        let a = taylor_at(&qj, cl.value(), cl.multiplicity);
        let u = series_inverse(&a)?;
        let norm_u: f64 = u.iter().map(|c| c.norm()).sum();
        let norm_q: f64 = qj.iter().map(|c| c.norm()).sum();
        cond = cond.max(norm_u * norm_q);
        parts.push((qj, u, cl.value()));
    }
    if cond > 1.0 / cfg.rank_tol {
        return Err(Error::IllConditionedProjection { estimate: cond });
    }

    let mut out = Vec::with_capacity(clusters.len());
    for (qj, u, v) in parts {
        let q_scalars: Vec<Scalar> = qj.iter().map(|&c| Scalar::from_complex(c)).collect();
        let t = apply_shift_polynomial(&sf, h, &q_scalars)?;
        let mut acc = SampledFunction::from_fn(final_box.clone(), |_| Ok(Scalar::zero()))?;
        let mut r = t;
        for (k, uk) in u.iter().enumerate() {
            let restricted = r.restricted_to(&final_box)?;
            let uk_s = Scalar::from_complex(*uk);
            acc = SampledFunction::from_fn(final_box.clone(), |p| {
                Ok(acc.get(p).unwrap().add(&uk_s.mul(restricted.get(p).unwrap())))
            })?;
            if k + 1 < u.len() {
                r = apply_sampled_value(&r, &Scalar::from_complex(v), h, 1)?;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Full recovery.

struct AxisRootsAcc {
    per_axis: Vec<Vec<(Complex64, usize)>>,
    tol: f64,
}

impl AxisRootsAcc {
    fn add(&mut self, axis: usize, clusters: &[RootCluster]) {
        for cl in clusters {
            let v = cl.value();
            match self.per_axis[axis]
                .iter_mut()
                .find(|(u, _)| (*u - v).norm() <= self.tol)
            {
                Some((_, m)) => *m = (*m).max(cl.multiplicity),
                None => self.per_axis[axis].push((v, cl.multiplicity)),
            }
        }
    }
}

type Leaf = Vec<(Complex64, usize)>;

fn recover_axes(
    s: &SampledFunction,
    axis: usize,
    cfg: &RecoveryConfig,
    acc: &mut AxisRootsAcc,
    floor: f64,
    cluster_tol: f64,
) -> Result<Vec<Leaf>> {
    let d = s.dim();
    if axis == d {
        return Ok(if s.max_abs() > floor { vec![Vec::new()] } else { Vec::new() });
    }
    if s.max_abs() <= floor {
        return Ok(Vec::new());
    }
    let q = direction_annihilator(s, &LatticePoint::unit(d, axis), cfg)?;
    if q.len() == 1 {
        return Ok(Vec::new());
    }
    let clusters = cluster_roots(&companion_roots(&q), cluster_tol);
    acc.add(axis, &clusters);
    let comps = split_spectrum(s, &LatticePoint::unit(d, axis), &clusters, cfg)?;
    let mut leaves = Vec::new();
    for (cl, comp) in clusters.iter().zip(&comps) {
        // A vanishing root cannot come from exponential data; leaving it
        // out surfaces the discrepancy in the final residual instead.
        if comp.max_abs() <= floor || cl.value().norm() < 1e-300 {
            continue;
        }
        for tail in recover_axes(comp, axis + 1, cfg, acc, floor, cluster_tol)? {
            let mut leaf = Vec::with_capacity(d - axis);
            leaf.push((cl.value(), cl.multiplicity));
            leaf.extend(tail);
            leaves.push(leaf);
        }
    }
    Ok(leaves)
}

/// Merge witness tuples that agree within `tol` on every axis, keeping the
/// larger multiplicity bound per axis.
fn merge_leaves(leaves: Vec<Leaf>, tol: f64) -> Vec<Leaf> {
    let mut merged: Vec<Leaf> = Vec::new();
    for leaf in leaves {
        match merged.iter_mut().find(|m| {
            m.len() == leaf.len()
                && m.iter().zip(&leaf).all(|((u, _), (v, _))| (*u - *v).norm() <= tol)
        }) {
            Some(m) => {
                for (slot, (_, mult)) in m.iter_mut().zip(&leaf) {
                    slot.1 = slot.1.max(*mult);
                }
            }
            None => merged.push(leaf),
        }
    }
    merged.sort_by(|a, b| {
        for ((u, _), (v, _)) in a.iter().zip(b) {
            let c = u.re.total_cmp(&v.re).then_with(|| u.im.total_cmp(&v.im));
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        std::cmp::Ordering::Equal
    });
    merged
}

/// One fitted column: a witness tuple and a monomial exponent.
struct FitColumn {
    witness: Vec<Complex64>,
    alpha: MultiIndex,
    scale: f64,
    samples: Vec<Complex64>,
}

fn build_columns(bx: &LatticeBox, leaves: &[Leaf]) -> Vec<FitColumn> {
    let points: Vec<LatticePoint> = bx.iter().collect();
    let mut cols = Vec::new();
    for leaf in leaves {
        let witness: Vec<Complex64> = leaf.iter().map(|(v, _)| *v).collect();
        let mults: Vec<usize> = leaf.iter().map(|(_, m)| *m).collect();
        // All exponents below the per-axis multiplicity bounds.
        let mut alphas: Vec<Vec<u32>> = vec![Vec::new()];
        for &m in &mults {
            let mut next = Vec::with_capacity(alphas.len() * m);
            for prefix in &alphas {
                for e in 0..m as u32 {
                    let mut v = prefix.clone();
                    v.push(e);
                    next.push(v);
                }
            }
            alphas = next;
        }
        for alpha in alphas {
            let mut samples = Vec::with_capacity(points.len());
            let mut scale: f64 = 0.0;
            for p in &points {
                let mut v = Complex64::new(1.0, 0.0);
                for (i, &w) in witness.iter().enumerate() {
                    let x = p.0[i];
                    v *= w.powi(x as i32);
                    if alpha[i] > 0 {
                        v *= (x as f64).powi(alpha[i] as i32);
                    }
                }
                scale = scale.max(v.norm());
                samples.push(v);
            }
            if scale == 0.0 {
                continue;
            }
            for v in &mut samples {
                *v /= scale;
            }
            cols.push(FitColumn { witness: witness.clone(), alpha: MultiIndex(alpha), scale, samples });
        }
    }
    cols
}

fn least_squares_fit(
    cols: &[FitColumn],
    target: &[Complex64],
    rank_tol: f64,
) -> Vec<Complex64> {
    let rows = target.len();
    let a = nalgebra::DMatrix::<Complex64>::from_fn(rows, cols.len(), |r, c| {
        cols[c].samples[r]
    });
    let b = nalgebra::DVector::<Complex64>::from_row_slice(target);
    let svd = a.svd(true, true);
    match svd.solve(&b, rank_tol) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![Complex64::new(0.0, 0.0); cols.len()],
    }
}

/// Best rational approximation with denominator at most `max_den`, within
/// `tol`, by continued fractions.
pub fn snap_to_rational(x: f64, max_den: u64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, x.floor() as i128, 1i128);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let approx = p1 as f64 / q1 as f64;
        if (approx - x).abs() <= tol {
            break;
        }
        if frac.abs() < f64::EPSILON {
            break;
        }
        let r = 1.0 / frac;
        let a = r.floor();
        frac = r - a;
        let a = a as i128;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 || q2 <= 0 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let approx = p1 as f64 / q1 as f64;
    if q1 > 0 && q1 <= max_den as i128 && (approx - x).abs() <= tol {
        Some(BigRational::new(BigInt::from(p1), BigInt::from(q1)))
    } else {
        None
    }
}

fn snap_scalar(z: Complex64, max_den: u64, tol: f64) -> Option<Scalar> {
    let re = snap_to_rational(z.re, max_den, tol)?;
    let im = snap_to_rational(z.im, max_den, tol)?;
    Some(Scalar::Exact(GaussianRational::new(re, im)))
}

fn try_exact_lift(poly: &ExpPoly, cfg: &RecoveryConfig) -> Option<ExpPoly> {
    let mut terms = Vec::with_capacity(poly.terms().len());
    for t in poly.terms() {
        let comps: Option<Vec<Scalar>> = t
            .witness
            .components()
            .iter()
            .map(|c| snap_scalar(c.to_complex(), cfg.lift_max_den, cfg.lift_tol))
            .collect();
        let witness = ExponentialWitness::new(comps?).ok()?;
        let mut coeffs = BTreeMap::new();
        for (alpha, c) in &t.coeffs {
            let s = snap_scalar(c.to_complex(), cfg.lift_max_den, cfg.lift_tol)?;
            coeffs.insert(alpha.clone(), s);
        }
        terms.push(ExpTerm { witness, coeffs });
    }
    ExpPoly::from_terms(poly.dim(), terms).ok().map(|p| p.normalize())
}

/// Recover an exponential-polynomial decomposition from samples.
///
/// Roots are clustered at several radii, from `max(cluster_tol, 1e−3)`
/// down tenfold to `cluster_tol`, accepting the first pass whose residual
/// check succeeds.  Eigenvalues of a recurrence root with multiplicity `m`
/// scatter like the coefficient error to the power `1/m`, so no single
/// radius serves every multiplicity; scanning wide-to-narrow picks the
/// most parsimonious model that reproduces the samples (an over-merge of
/// genuinely distinct witnesses misses its residual and falls through to
/// the narrower passes).
pub fn recover(s: &SampledFunction, cfg: &RecoveryConfig) -> Result<Decomposition> {
    cfg.validate()?;
    let d = s.dim();
    if s.max_abs() == 0.0 {
        return Ok(Decomposition {
            poly: ExpPoly::zero(d),
            residual: 0.0,
            success: true,
            axis_roots: vec![Vec::new(); d],
            exact: if cfg.exact_lift { Some(ExpPoly::zero(d)) } else { None },
        });
    }
    let mut best: Option<Decomposition> = None;
    let mut last_err: Option<Error> = None;
    let mut radius = cfg.cluster_tol.max(1e-3);
    loop {
        let is_last = radius <= cfg.cluster_tol;
        match recover_with_radius(s, cfg, radius) {
            Ok(dec) => {
                if dec.success {
                    return Ok(dec);
                }
                if best.as_ref().is_none_or(|b| dec.residual < b.residual) {
                    best = Some(dec);
                }
            }
            // Colliding projectors: this radius drew the clusters wrong;
            // a narrower pass may separate them.
            Err(Error::IllConditionedProjection { estimate }) => {
                last_err = Some(Error::IllConditionedProjection { estimate });
            }
            // Anything else (box too small, no recurrence) is independent
            // of the radius and will not improve.
            Err(e) => return Err(e),
        }
        if is_last {
            break;
        }
        radius = (radius / 10.0).max(cfg.cluster_tol);
    }
    match best {
        Some(dec) => Ok(dec),
        None => Err(last_err.expect("no decomposition implies an error")),
    }
}

fn recover_with_radius(
    s: &SampledFunction,
    cfg: &RecoveryConfig,
    cluster_tol: f64,
) -> Result<Decomposition> {
    let d = s.dim();
    let scale = s.max_abs();

    // Work on normalized float samples so every tolerance is relative.
    let inv = Scalar::from_f64(1.0 / scale);
    let sf = s.map(|_, v| v.mul(&inv));
    let floor = cfg.residual_tol * 0.1;
    let mut acc = AxisRootsAcc { per_axis: vec![Vec::new(); d], tol: cluster_tol };
    let leaves = merge_leaves(
        recover_axes(&sf, 0, cfg, &mut acc, floor, cluster_tol)?,
        cluster_tol,
    );

    let target = sf.to_complex_values();
    let mut cols = build_columns(sf.bounds(), &leaves);
    let mut coeffs = if cols.is_empty() {
        Vec::new()
    } else {
        least_squares_fit(&cols, &target, cfg.rank_tol)
    };
    // Columns are scaled to unit sup-norm, so a coefficient's modulus is
    // the term's largest contribution: drop the negligible ones and refit.
    if coeffs.iter().any(|c| c.norm() <= cfg.residual_tol) {
        cols = cols
            .into_iter()
            .zip(&coeffs)
            .filter_map(|(col, c)| (c.norm() > cfg.residual_tol).then_some(col))
            .collect();
        coeffs = if cols.is_empty() {
            Vec::new()
        } else {
            least_squares_fit(&cols, &target, cfg.rank_tol)
        };
    }

    // Assemble the normalized-fit polynomial.
    let mut by_witness: Vec<(Vec<Complex64>, BTreeMap<MultiIndex, Scalar>)> = Vec::new();
    for (col, c) in cols.iter().zip(&coeffs) {
        let value = *c / col.scale;
        let slot = by_witness.iter_mut().find(|(w, _)| w == &col.witness);
        let map = match slot {
            Some((_, m)) => m,
            None => {
                by_witness.push((col.witness.clone(), BTreeMap::new()));
                &mut by_witness.last_mut().unwrap().1
            }
        };
        map.insert(col.alpha.clone(), Scalar::from_complex(value));
    }
    let terms: Vec<ExpTerm> = by_witness
        .into_iter()
        .map(|(w, coeffs)| {
            let witness = ExponentialWitness::new(
                w.into_iter().map(Scalar::from_complex).collect(),
            )
            .expect("recovered roots are nonzero");
            ExpTerm { witness, coeffs }
        })
        .collect();
    let fit_normalized = ExpPoly::from_terms(d, terms)?.normalize_with(cfg.residual_tol * 1e-3);

    // Relative residual on the original box.
    let mut residual: f64 = 0.0;
    for p in sf.bounds().iter() {
        let fv = fit_normalized.eval(&p)?.to_complex();
        let sv = sf.get(&p).unwrap().to_complex();
        residual = residual.max((fv - sv).norm());
    }
    let success = residual <= cfg.residual_tol;

    let poly = fit_normalized.scale(&Scalar::from_f64(scale)).normalize_with(f64::MIN_POSITIVE);
    let exact = if cfg.exact_lift && success {
        try_exact_lift(&poly, cfg).and_then(|cand| {
            // Verify the lift by re-evaluation against the samples.
            let mut worst: f64 = 0.0;
            for p in s.bounds().iter() {
                let Ok(v) = cand.eval(&p) else { return None };
                let sv = s.get(&p).unwrap().to_complex();
                worst = worst.max((v.to_complex() - sv).norm());
            }
            if worst <= cfg.residual_tol * scale.max(1.0) {
                Some(cand)
            } else {
                None
            }
        })
    } else {
        None
    };

    let axis_roots = acc
        .per_axis
        .into_iter()
        .map(|mut list| {
            list.sort_by(|a, b| {
                a.0.re.total_cmp(&b.0.re).then_with(|| a.0.im.total_cmp(&b.0.im))
            });
            list.into_iter()
                .map(|(v, m)| RootCluster { re: v.re, im: v.im, multiplicity: m })
                .collect()
        })
        .collect();

    Ok(Decomposition { poly, residual, success, axis_roots, exact })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint(c.to_vec())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_helpers() {
        // (x−2)(x−1)² = x³ − 4x² + 5x − 2.
        let p = poly_from_roots(&[(c(2.0, 0.0), 1), (c(1.0, 0.0), 2)]);
        let expect = [-2.0, 5.0, -4.0, 1.0];
        for (a, e) in p.iter().zip(expect) {
            assert!((a - c(e, 0.0)).norm() < 1e-12);
        }
        // Taylor of x² − 3x + 2 at 1: value 0, derivative −1.
        let t = taylor_at(&[c(2.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)], c(1.0, 0.0), 2);
        assert!((t[0] - c(0.0, 0.0)).norm() < 1e-12);
        assert!((t[1] - c(-1.0, 0.0)).norm() < 1e-12);
        // Series inverse of (2 + x): 1/2 − x/4.
        let u = series_inverse(&[c(2.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((u[0] - c(0.5, 0.0)).norm() < 1e-12);
        assert!((u[1] - c(-0.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn companion_roots_of_a_cubic() {
        let mut roots = companion_roots(&[c(-2.0, 0.0), c(5.0, 0.0), c(-4.0, 0.0), c(1.0, 0.0)]);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - c(1.0, 0.0)).norm() < 1e-6);
        assert!((roots[1] - c(1.0, 0.0)).norm() < 1e-6);
        assert!((roots[2] - c(2.0, 0.0)).norm() < 1e-6);
        let cl = cluster_roots(&roots, 1e-4);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].multiplicity, 2);
        assert_eq!(cl[1].multiplicity, 1);
    }

    fn two_term_function() -> ExpPoly {
        // f(n) = 2·3^n + n·2^n.
        let a = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[3]).unwrap(),
            MultiIndex(vec![0]),
            Scalar::from_int(2),
        )
        .unwrap();
        let b = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[2]).unwrap(),
            MultiIndex(vec![1]),
            Scalar::one(),
        )
        .unwrap();
        a.add(&b).unwrap()
    }

    #[test]
    fn minimal_annihilator_for_two_exponentials() {
        // 2^n + 3^n is killed by (τ−2)(τ−3) = τ² − 5τ + 6 and nothing shorter.
        let f = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[2]).unwrap(),
            MultiIndex(vec![0]),
            Scalar::one(),
        )
        .unwrap()
        .add(
            &ExpPoly::monomial(
                ExponentialWitness::from_ints(&[3]).unwrap(),
                MultiIndex(vec![0]),
                Scalar::one(),
            )
            .unwrap(),
        )
        .unwrap();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, -4, 6).unwrap()).unwrap();
        let q = direction_annihilator(&s, &pt(&[1]), &RecoveryConfig::default()).unwrap();
        assert_eq!(q.len(), 3);
        assert!((q[0] - c(6.0, 0.0)).norm() < 1e-7);
        assert!((q[1] - c(-5.0, 0.0)).norm() < 1e-7);
        assert!((q[2] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_samples_get_the_trivial_annihilator() {
        let s = SampledFunction::new(
            LatticeBox::cube(1, 0, 7).unwrap(),
            vec![Scalar::zero(); 8],
        )
        .unwrap();
        let q = section_annihilator(&s, 0, &RecoveryConfig::default()).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn too_small_boxes_are_reported() {
        let f = two_term_function();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, 0, 2).unwrap()).unwrap();
        let err = direction_annihilator(&s, &pt(&[1]), &RecoveryConfig::default());
        assert!(matches!(err, Err(Error::InsufficientBox { .. })));
    }

    #[test]
    fn spectral_split_separates_exponentials() {
        let f = two_term_function();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, -3, 8).unwrap()).unwrap();
        let cfg = RecoveryConfig::default();
        let q = direction_annihilator(&s, &pt(&[1]), &cfg).unwrap();
        // The double root at 2 scatters ~1e−6, so cluster with more slack.
        let clusters = cluster_roots(&companion_roots(&q), 1e-4);
        assert_eq!(clusters.len(), 2);
        let comps = split_spectrum(&s, &pt(&[1]), &clusters, &cfg).unwrap();
        assert_eq!(comps.len(), 2);
        // Components sum back to the function on the final box.
        let total = clusters.iter().map(|c| c.multiplicity).sum::<usize>();
        let final_box = s.bounds().shrink_for_shift(&pt(&[1]), total as u32 - 1).unwrap();
        for p in final_box.iter() {
            let sum: Complex64 = comps
                .iter()
                .map(|comp| comp.get(&p).unwrap().to_complex())
                .sum();
            let orig = s.get(&p).unwrap().to_complex();
            assert!((sum - orig).norm() <= 1e-8 * s.max_abs());
        }
        // The cluster at 2 carries the n·2^n part: check one value.
        let idx2 = clusters.iter().position(|cl| (cl.value() - c(2.0, 0.0)).norm() < 1e-6).unwrap();
        let comp2 = &comps[idx2];
        let at3 = comp2.get(&pt(&[3])).unwrap().to_complex();
        assert!((at3 - c(24.0, 0.0)).norm() < 1e-6, "got {at3}");
    }

    #[test]
    fn colliding_clusters_are_ill_conditioned() {
        let f = two_term_function();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, 0, 8).unwrap()).unwrap();
        let clusters = vec![
            RootCluster { re: 2.0, im: 0.0, multiplicity: 1 },
            RootCluster { re: 2.0, im: 0.0, multiplicity: 1 },
        ];
        assert!(matches!(
            split_spectrum(&s, &pt(&[1]), &clusters, &RecoveryConfig::default()),
            Err(Error::IllConditionedProjection { .. })
        ));
    }

    #[test]
    fn recovery_round_trip_one_dimension() {
        let f = two_term_function();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, -8, 7).unwrap()).unwrap();
        let dec = recover(&s, &RecoveryConfig::default()).unwrap();
        assert!(dec.success, "residual {}", dec.residual);
        assert_eq!(dec.poly.term_count(), 2);
        assert_eq!(dec.axis_roots[0].len(), 2);
        // Root 2 with multiplicity 2 (degree-1 coefficient), root 3 simple.
        assert_eq!(dec.axis_roots[0][0].multiplicity, 2);
        assert_eq!(dec.axis_roots[0][1].multiplicity, 1);
        for p in s.bounds().iter() {
            let fv = dec.poly.eval(&p).unwrap().to_complex();
            let sv = s.get(&p).unwrap().to_complex();
            assert!((fv - sv).norm() <= 1e-7 * s.max_abs());
        }
    }

    #[test]
    fn recovery_with_exact_lift() {
        let f = two_term_function();
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, -8, 7).unwrap()).unwrap();
        let cfg = RecoveryConfig { exact_lift: true, ..Default::default() };
        let dec = recover(&s, &cfg).unwrap();
        let exact = dec.exact.expect("integer data lifts exactly");
        assert!(exact.eq_exact(&f).unwrap());
    }

    #[test]
    fn recovery_of_the_zero_function() {
        let s = SampledFunction::new(
            LatticeBox::cube(2, -2, 2).unwrap(),
            vec![Scalar::zero(); 25],
        )
        .unwrap();
        let dec = recover(&s, &RecoveryConfig::default()).unwrap();
        assert!(dec.success);
        assert!(dec.poly.is_zero());
        assert_eq!(dec.residual, 0.0);
    }

    #[test]
    fn recovery_two_dimensions() {
        // f(x, y) = 2^x 3^y + (x·?) — keep it simple: 2^x3^y + (1/2)^x with
        // a linear factor in y.
        let a = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[2, 3]).unwrap(),
            MultiIndex(vec![0, 0]),
            Scalar::one(),
        )
        .unwrap();
        let b = ExpPoly::monomial(
            ExponentialWitness::new(vec![Scalar::from_ratio(1, 2), Scalar::from_int(1)])
                .unwrap(),
            MultiIndex(vec![0, 1]),
            Scalar::from_int(3),
        )
        .unwrap();
        let f = a.add(&b).unwrap();
        let s = SampledFunction::sample(&f, LatticeBox::cube(2, -5, 5).unwrap()).unwrap();
        let dec = recover(&s, &RecoveryConfig::default()).unwrap();
        assert!(dec.success, "residual {}", dec.residual);
        assert_eq!(dec.poly.term_count(), 2);
        for p in s.bounds().iter() {
            let fv = dec.poly.eval(&p).unwrap().to_complex();
            let sv = s.get(&p).unwrap().to_complex();
            assert!((fv - sv).norm() <= 1e-6 * s.max_abs());
        }
    }

    #[test]
    fn snapping_rationals() {
        assert_eq!(
            snap_to_rational(0.5, 64, 1e-9).unwrap(),
            BigRational::new(BigInt::from(1), BigInt::from(2))
        );
        assert_eq!(
            snap_to_rational(-2.0 / 3.0, 64, 1e-9).unwrap(),
            BigRational::new(BigInt::from(-2), BigInt::from(3))
        );
        assert_eq!(
            snap_to_rational(7.0, 64, 1e-9).unwrap(),
            BigRational::from_integer(BigInt::from(7))
        );
        // π has no small-denominator representation at this tolerance.
        assert!(snap_to_rational(std::f64::consts::PI, 64, 1e-9).is_none());
    }
}
