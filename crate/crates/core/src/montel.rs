//! Annihilation certificates: verify that products of modified difference
//! operators kill a function, find least annihilating powers, recover the
//! weight values a certificate must use, and check that no factor of a
//! multi-weight system is redundant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffops::{apply_modified_value, apply_sampled_value};
use crate::error::Error;
use crate::lattice::{generation_status, GenerationStatus, LatticeBox, LatticePoint};
use crate::poly::ExpPoly;
use crate::recover::{cluster_roots, companion_roots, direction_annihilator, RecoveryConfig};
use crate::sampled::SampledFunction;
use crate::scalar::Scalar;
use crate::Result;

/// Tolerances for certification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MontelConfig {
    /// Absolute floor of the zero test.
    pub atol: f64,
    /// Relative part of the zero test (scaled by the input's sup-norm).
    pub rtol: f64,
    /// Root clustering radius for witness certification.
    pub cluster_tol: f64,
    /// Singular-value threshold for the annihilator search.
    pub rank_tol: f64,
}

impl Default for MontelConfig {
    fn default() -> Self {
        MontelConfig { atol: 1e-10, rtol: 1e-9, cluster_tol: 1e-6, rank_tol: 1e-9 }
    }
}

impl MontelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("atol", self.atol),
            ("rtol", self.rtol),
            ("cluster_tol", self.cluster_tol),
            ("rank_tol", self.rank_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// What the certificate is about: a symbolic function or its samples.
#[derive(Clone, Copy, Debug)]
pub enum Subject<'a> {
    Symbolic(&'a ExpPoly),
    Sampled(&'a SampledFunction),
}

impl Subject<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Subject::Symbolic(f) => f.dim(),
            Subject::Sampled(s) => s.dim(),
        }
    }

    /// Sup-norm proxy used to scale the zero test.
    fn scale(&self) -> f64 {
        match self {
            Subject::Symbolic(f) => f.max_coeff_abs(),
            Subject::Sampled(s) => s.max_abs(),
        }
    }
}

fn poly_is_exact(f: &ExpPoly) -> bool {
    f.terms().iter().all(|t| {
        t.witness.components().iter().all(|c| c.is_exact())
            && t.coeffs.values().all(|c| c.is_exact())
    })
}

/// Outcome of an annihilation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Annihilated,
    /// The product along `shift_index` left a nonzero value at `point`.
    Violated { shift_index: usize, point: LatticePoint },
}

impl Verdict {
    pub fn is_annihilated(&self) -> bool {
        matches!(self, Verdict::Annihilated)
    }
}

/// Certificate that each `Δ_{φ(h_k);h_k}^{orders_k}` annihilates the
/// subject.  `generation` records whether the shifts generate the full
/// lattice; a subgroup-only certificate speaks only about the subgroup the
/// shifts span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MontelCertificate {
    pub shifts: Vec<LatticePoint>,
    pub orders: Vec<u32>,
    pub phi_values: Vec<Scalar>,
    pub verdict: Verdict,
    pub generation: GenerationStatus,
}

// ---------------------------------------------------------------------------
// Applying one operator chain to either kind of subject.

enum Applied {
    Symbolic(ExpPoly),
    Sampled(SampledFunction),
}

fn apply_chain(
    subject: Subject<'_>,
    ops: &[(Scalar, LatticePoint, u32)],
) -> Result<Applied> {
    match subject {
        Subject::Symbolic(f) => {
            let mut g = f.clone();
            for (c, h, p) in ops {
                g = apply_modified_value(&g, c, h, *p)?;
            }
            Ok(Applied::Symbolic(g))
        }
        Subject::Sampled(s) => {
            let mut g = s.clone();
            for (c, h, p) in ops {
                g = apply_sampled_value(&g, c, h, *p)?;
            }
            Ok(Applied::Sampled(g))
        }
    }
}

/// Locate a lattice point where a nonzero symbolic result exceeds `tol`,
/// scanning cubes of growing radius; falls back to the largest value seen.
fn symbolic_witness_point(g: &ExpPoly, tol: f64) -> LatticePoint {
    let d = g.dim();
    let degree_budget: i64 = g
        .terms()
        .iter()
        .map(|t| {
            1 + t
                .coeffs
                .keys()
                .map(|a| a.total_degree() as i64)
                .max()
                .unwrap_or(0)
        })
        .sum();
    let cap = degree_budget.clamp(2, 24);
    let mut best: Option<(f64, LatticePoint)> = None;
    for r in 0..=cap {
        let bx = LatticeBox::cube(d, -r, r).expect("radius cube");
        for p in bx.iter() {
            if r > 0 && p.0.iter().all(|&c| c.abs() < r) {
                continue; // interior already scanned
            }
            let Ok(v) = g.eval(&p) else { continue };
            let a = v.abs();
            if a > tol {
                return p;
            }
            if best.as_ref().is_none_or(|(b, _)| a > *b) {
                best = Some((a, p));
            }
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| LatticePoint(vec![0; d]))
}

/// Zero test for an applied operator result; `None` means zero (within the
/// tolerance budget for float data), otherwise a witness point is returned.
fn nonzero_witness(applied: &Applied, exact: bool, tol: f64) -> Option<LatticePoint> {
    match applied {
        Applied::Symbolic(g) => {
            let zero = if exact { g.is_zero() } else { g.approx_zero(tol) };
            if zero {
                None
            } else {
                Some(symbolic_witness_point(g, tol))
            }
        }
        Applied::Sampled(g) => {
            let mut worst: Option<(f64, LatticePoint)> = None;
            for p in g.bounds().iter() {
                let a = g.get(&p).unwrap().abs();
                if worst.as_ref().is_none_or(|(b, _)| a > *b) {
                    worst = Some((a, p));
                }
            }
            let (a, p) = worst?;
            if a > tol {
                Some(p)
            } else {
                None
            }
        }
    }
}

fn check_shapes(
    dim: usize,
    shifts: &[LatticePoint],
    orders: &[u32],
    phi_values: &[Scalar],
) -> Result<()> {
    if shifts.is_empty() {
        return Err(Error::InvalidInput("at least one shift is required".into()));
    }
    if shifts.len() != orders.len() || shifts.len() != phi_values.len() {
        return Err(Error::InvalidInput(format!(
            "shifts/orders/phi_values lengths differ: {}/{}/{}",
            shifts.len(),
            orders.len(),
            phi_values.len()
        )));
    }
    for h in shifts {
        h.check_dim(dim)?;
        if h.is_zero() {
            return Err(Error::InvalidInput("shifts must be nonzero".into()));
        }
    }
    if orders.contains(&0) {
        return Err(Error::InvalidInput("orders must be at least 1".into()));
    }
    Ok(())
}

/// Check that `Δ_{φ(h_k);h_k}^{orders_k}` annihilates the subject for every
/// shift separately, producing a certificate.
pub fn verify_annihilation(
    subject: Subject<'_>,
    shifts: &[LatticePoint],
    orders: &[u32],
    phi_values: &[Scalar],
    cfg: &MontelConfig,
) -> Result<MontelCertificate> {
    cfg.validate()?;
    let d = subject.dim();
    check_shapes(d, shifts, orders, phi_values)?;
    let generation = generation_status(shifts, d)?;
    let exact = match subject {
        Subject::Symbolic(f) => poly_is_exact(f) && phi_values.iter().all(|c| c.is_exact()),
        Subject::Sampled(_) => false,
    };
    let tol = cfg.atol + cfg.rtol * subject.scale();

    let mut verdict = Verdict::Annihilated;
    for (k, ((h, &p), c)) in shifts.iter().zip(orders).zip(phi_values).enumerate() {
        let applied = apply_chain(subject, &[(c.clone(), h.clone(), p)])?;
        if let Some(point) = nonzero_witness(&applied, exact, tol) {
            verdict = Verdict::Violated { shift_index: k, point };
            break;
        }
    }
    Ok(MontelCertificate {
        shifts: shifts.to_vec(),
        orders: orders.to_vec(),
        phi_values: phi_values.to_vec(),
        verdict,
        generation,
    })
}

/// For each shift, the least power `p ≤ max_power` with
/// `Δ_{φ(h_k);h_k}^p(subject) = 0`, or `None` when no power that size
/// annihilates.  A sampled box too small to settle the question is an
/// error rather than a `None`.
pub fn minimal_orders(
    subject: Subject<'_>,
    shifts: &[LatticePoint],
    phi_values: &[Scalar],
    max_power: u32,
    cfg: &MontelConfig,
) -> Result<Vec<Option<u32>>> {
    cfg.validate()?;
    if max_power == 0 {
        return Err(Error::InvalidInput("max_power must be at least 1".into()));
    }
    let d = subject.dim();
    check_shapes(d, shifts, &vec![1; shifts.len()], phi_values)?;
    let exact = match subject {
        Subject::Symbolic(f) => poly_is_exact(f) && phi_values.iter().all(|c| c.is_exact()),
        Subject::Sampled(_) => false,
    };
    let tol = cfg.atol + cfg.rtol * subject.scale();

    let mut out = Vec::with_capacity(shifts.len());
    for (h, c) in shifts.iter().zip(phi_values) {
        let mut found = None;
        let mut cur = apply_chain(subject, &[])?;
        for p in 1..=max_power {
            cur = match cur {
                Applied::Symbolic(g) => {
                    Applied::Symbolic(apply_modified_value(&g, c, h, 1)?)
                }
                Applied::Sampled(g) => Applied::Sampled(apply_sampled_value(&g, c, h, 1)?),
            };
            if nonzero_witness(&cur, exact, tol).is_none() {
                found = Some(p);
                break;
            }
        }
        out.push(found);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Witness certification from samples.

/// Candidate weight-value assignments per shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessCandidates {
    /// The samples vanish: every assignment annihilates.
    All,
    /// Each entry assigns one value per shift, all verified to annihilate
    /// at power `max_power`.
    Assignments { values: Vec<Vec<Scalar>> },
}

/// Clustering radii scanned wide-to-narrow, mirroring the recovery
/// pipeline's parsimony rule (see `recover`).
fn radius_schedule(cluster_tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = cluster_tol.max(1e-3);
    while r > cluster_tol {
        out.push(r);
        r /= 10.0;
    }
    out.push(cluster_tol);
    out
}

/// Recover the weight values a single-weight certificate must assign to
/// each shift: roots of the minimal annihilating recurrence along the
/// shift, combined across shifts and kept only when `verify_annihilation`
/// accepts the combination at power `max_power`.
pub fn certify_witness(
    s: &SampledFunction,
    shifts: &[LatticePoint],
    max_power: u32,
    cfg: &MontelConfig,
) -> Result<WitnessCandidates> {
    cfg.validate()?;
    if max_power == 0 {
        return Err(Error::InvalidInput("max_power must be at least 1".into()));
    }
    check_shapes(s.dim(), shifts, &vec![1; shifts.len()], &vec![Scalar::one(); shifts.len()])?;
    if s.max_abs() == 0.0 {
        return Ok(WitnessCandidates::All);
    }
    let rcfg = RecoveryConfig {
        max_order: max_power as usize,
        rank_tol: cfg.rank_tol,
        cluster_tol: cfg.cluster_tol,
        ..RecoveryConfig::default()
    };
    let mut per_shift_roots: Vec<Vec<Complex64>> = Vec::with_capacity(shifts.len());
    for h in shifts {
        let q = direction_annihilator(s, h, &rcfg).map_err(|e| match e {
            Error::NoAnnihilator { max_order } => Error::NoCandidate {
                context: format!(
                    "no annihilating recurrence of order ≤ {max_order} along {h}"
                ),
            },
            other => other,
        })?;
        per_shift_roots.push(companion_roots(&q));
    }

    let orders = vec![max_power; shifts.len()];
    for radius in radius_schedule(cfg.cluster_tol) {
        let value_lists: Vec<Vec<Scalar>> = per_shift_roots
            .iter()
            .map(|roots| {
                cluster_roots(roots, radius)
                    .into_iter()
                    .map(|cl| Scalar::from_complex(cl.value()))
                    .collect()
            })
            .collect();
        // Cartesian combinations, lexicographic in the per-shift lists.
        let mut accepted: Vec<Vec<Scalar>> = Vec::new();
        let mut idx = vec![0usize; value_lists.len()];
        'combos: loop {
            let assignment: Vec<Scalar> = idx
                .iter()
                .zip(&value_lists)
                .map(|(&i, vs)| vs[i].clone())
                .collect();
            let cert = verify_annihilation(
                Subject::Sampled(s),
                shifts,
                &orders,
                &assignment,
                cfg,
            )?;
            if cert.verdict.is_annihilated() {
                accepted.push(assignment);
            }
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < value_lists[k].len() {
                    continue 'combos;
                }
                idx[k] = 0;
                if k == 0 {
                    break 'combos;
                }
            }
        }
        if !accepted.is_empty() {
            return Ok(WitnessCandidates::Assignments { values: accepted });
        }
    }
    Ok(WitnessCandidates::Assignments { values: Vec::new() })
}

// ---------------------------------------------------------------------------
// Multi-weight systems.

/// A verified instance of the multi-weight equation
/// `Π_i Δ_{φ_i(h_{j_i});h_{j_i}}^{orders_{i,j_i}} f = 0` over all
/// assignments of shifts to factors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemCertificate {
    pub shifts: Vec<LatticePoint>,
    /// `phi_tables[i][j]` is factor `i`'s value at `shifts[j]`.
    pub phi_tables: Vec<Vec<Scalar>>,
    /// `orders[i][j]` is factor `i`'s power when paired with `shifts[j]`.
    pub orders: Vec<Vec<u32>>,
    pub satisfied: bool,
    pub violation: Option<SystemViolation>,
}

/// The first failing assignment: `assignment[i]` indexes the shift used by
/// factor `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemViolation {
    pub assignment: Vec<usize>,
    pub point: LatticePoint,
}

const MAX_SYSTEM_ASSIGNMENTS: usize = 4096;

fn check_system_shapes(
    dim: usize,
    shifts: &[LatticePoint],
    phi_tables: &[Vec<Scalar>],
    orders: &[Vec<u32>],
) -> Result<()> {
    if phi_tables.is_empty() {
        return Err(Error::InvalidInput("at least one factor is required".into()));
    }
    if phi_tables.len() != orders.len() {
        return Err(Error::InvalidInput(format!(
            "{} factor tables but {} order rows",
            phi_tables.len(),
            orders.len()
        )));
    }
    check_shapes(dim, shifts, &vec![1; shifts.len()], &vec![Scalar::one(); shifts.len()])?;
    for (tab, row) in phi_tables.iter().zip(orders) {
        if tab.len() != shifts.len() || row.len() != shifts.len() {
            return Err(Error::InvalidInput(
                "each factor needs one value and one order per shift".into(),
            ));
        }
        if row.contains(&0) {
            return Err(Error::InvalidInput("orders must be at least 1".into()));
        }
    }
    let combos = (shifts.len() as f64).powi(phi_tables.len() as i32);
    if combos > MAX_SYSTEM_ASSIGNMENTS as f64 {
        return Err(Error::InvalidInput(format!(
            "{}^{} shift assignments exceed the cap of {MAX_SYSTEM_ASSIGNMENTS}",
            shifts.len(),
            phi_tables.len()
        )));
    }
    Ok(())
}

fn subject_exactness(subject: Subject<'_>, phi_tables: &[Vec<Scalar>]) -> bool {
    match subject {
        Subject::Symbolic(f) => {
            poly_is_exact(f)
                && phi_tables.iter().all(|t| t.iter().all(|c| c.is_exact()))
        }
        Subject::Sampled(_) => false,
    }
}

/// Run the product over one assignment of shifts to factors; `skip` omits
/// that factor (used by the redundancy check).
fn system_product(
    subject: Subject<'_>,
    shifts: &[LatticePoint],
    phi_tables: &[Vec<Scalar>],
    orders: &[Vec<u32>],
    assignment: &[usize],
    skip: Option<usize>,
) -> Result<Applied> {
    let ops: Vec<(Scalar, LatticePoint, u32)> = assignment
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, &j)| (phi_tables[i][j].clone(), shifts[j].clone(), orders[i][j]))
        .collect();
    apply_chain(subject, &ops)
}

/// Iterate `r`-tuples over `0..t` in lexicographic order.
fn for_each_assignment<F>(r: usize, t: usize, mut f: F) -> Result<bool>
where
    F: FnMut(&[usize]) -> Result<bool>,
{
    let mut idx = vec![0usize; r];
    loop {
        if !f(&idx)? {
            return Ok(false);
        }
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(true);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < t {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Verify the multi-weight equation for every assignment of shifts to
/// factors.
pub fn verify_system(
    subject: Subject<'_>,
    shifts: &[LatticePoint],
    phi_tables: &[Vec<Scalar>],
    orders: &[Vec<u32>],
    cfg: &MontelConfig,
) -> Result<SystemCertificate> {
    cfg.validate()?;
    check_system_shapes(subject.dim(), shifts, phi_tables, orders)?;
    let exact = subject_exactness(subject, phi_tables);
    let tol = cfg.atol + cfg.rtol * subject.scale();

    let mut violation = None;
    for_each_assignment(phi_tables.len(), shifts.len(), |assignment| {
        let applied = system_product(subject, shifts, phi_tables, orders, assignment, None)?;
        if let Some(point) = nonzero_witness(&applied, exact, tol) {
            violation = Some(SystemViolation { assignment: assignment.to_vec(), point });
            Ok(false)
        } else {
            Ok(true)
        }
    })?;
    Ok(SystemCertificate {
        shifts: shifts.to_vec(),
        phi_tables: phi_tables.to_vec(),
        orders: orders.to_vec(),
        satisfied: violation.is_none(),
        violation,
    })
}

/// Per-factor non-redundancy: factor `k` is essential when some assignment
/// of shifts to the remaining factors leaves a nonzero function.  With a
/// single factor the answer is just whether the subject is nonzero.
pub fn check_minimal_set(
    subject: Subject<'_>,
    system: &SystemCertificate,
    cfg: &MontelConfig,
) -> Result<Vec<bool>> {
    cfg.validate()?;
    check_system_shapes(subject.dim(), &system.shifts, &system.phi_tables, &system.orders)?;
    let exact = subject_exactness(subject, &system.phi_tables);
    let tol = cfg.atol + cfg.rtol * subject.scale();
    let r = system.phi_tables.len();

    if r == 1 {
        let whole = apply_chain(subject, &[])?;
        return Ok(vec![nonzero_witness(&whole, exact, tol).is_some()]);
    }

    let mut flags = Vec::with_capacity(r);
    for k in 0..r {
        let mut essential = false;
        for_each_assignment(r, system.shifts.len(), |assignment| {
            // Factor k's slot is skipped, so only vary the others: fix
            // slot k at 0 to avoid repeating identical work.
            if assignment[k] != 0 {
                return Ok(true);
            }
            let applied = system_product(
                subject,
                &system.shifts,
                &system.phi_tables,
                &system.orders,
                assignment,
                Some(k),
            )?;
            if nonzero_witness(&applied, exact, tol).is_some() {
                essential = true;
                Ok(false)
            } else {
                Ok(true)
            }
        })?;
        flags.push(essential);
    }
    Ok(flags)
}
