//! Lattice points, multi-indices, iteration boxes, and a Smith normal
//! form used to certify that a set of shifts generates the whole lattice.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn zero(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    /// Standard unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        LatticePoint(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }

    pub fn scaled(&self, k: i64) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| a * k).collect())
    }

    /// Error unless this point has dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: dim, got: self.dim() })
        }
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A monomial exponent `α ∈ N^d`, ordered by graded lexicographic order:
/// lower total degree first, ties broken lexicographically from axis 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Componentwise difference; caller must ensure `other ≤ self`.
    pub fn sub(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: dim, got: self.dim() })
        }
    }

    /// All multi-indices of dimension `dim` with total degree ≤ `bound`,
    /// in graded lexicographic order.
    pub fn all_up_to_degree(dim: usize, bound: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dim];
        fn rec(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, axis: usize, left: u32) {
            if axis == cur.len() {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for v in 0..=left {
                cur[axis] = v;
                rec(out, cur, axis + 1, left - v);
            }
            cur[axis] = 0;
        }
        rec(&mut out, &mut cur, 0, bound);
        out.sort();
        out
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

/// An axis-aligned box `[lo, hi]` of lattice points, bounds inclusive.
///
/// Iteration is row-major with the **last axis varying fastest**.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: LatticePoint,
    hi: LatticePoint,
}

impl LatticeBox {
    pub fn new(lo: LatticePoint, hi: LatticePoint) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::InvalidBox {
                reason: format!("bounds have dimensions {} and {}", lo.dim(), hi.dim()),
            });
        }
        if lo.dim() == 0 {
            return Err(Error::InvalidBox { reason: "zero-dimensional box".into() });
        }
        if lo.0.iter().zip(&hi.0).any(|(a, b)| a > b) {
            return Err(Error::InvalidBox {
                reason: format!("lower bound {lo} exceeds upper bound {hi}"),
            });
        }
        Ok(LatticeBox { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        LatticeBox::new(LatticePoint(vec![lo; dim]), LatticePoint(vec![hi; dim]))
    }

    pub fn lo(&self) -> &LatticePoint {
        &self.lo
    }

    pub fn hi(&self) -> &LatticePoint {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    /// Side length (point count) along `axis`.
    pub fn len(&self, axis: usize) -> usize {
        (self.hi.0[axis] - self.lo.0[axis] + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|a| self.len(a)).product()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim()
            && p.0
                .iter()
                .enumerate()
                .all(|(i, &c)| self.lo.0[i] <= c && c <= self.hi.0[i])
    }

    /// Flat index of `p` in iteration order; caller guarantees containment.
    pub fn index_of(&self, p: &LatticePoint) -> usize {
        debug_assert!(self.contains(p));
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.len(a) + (p.0[a] - self.lo.0[a]) as usize;
        }
        idx
    }

    /// Iterate all points in row-major order (last axis fastest).
    pub fn iter(&self) -> BoxIter<'_> {
        BoxIter { bx: self, next: Some(self.lo.clone()) }
    }

    /// Shrink so that `x` and `x + power·y` both stay inside the original
    /// box whenever `x` is inside the result.
    pub fn shrink_for_shift(&self, y: &LatticePoint, power: u32) -> Result<LatticeBox> {
        y.check_dim(self.dim())?;
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for a in 0..self.dim() {
            let total = y.0[a] * power as i64;
            if total >= 0 {
                hi.0[a] -= total;
            } else {
                lo.0[a] -= total;
            }
            if lo.0[a] > hi.0[a] {
                return Err(Error::InsufficientBox {
                    reason: format!(
                        "box {}..{} cannot absorb shift {} applied {} times",
                        self.lo, self.hi, y, power
                    ),
                });
            }
        }
        Ok(LatticeBox { lo, hi })
    }

    /// Largest box contained in both, if non-empty.
    pub fn intersect(&self, other: &LatticeBox) -> Result<LatticeBox> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let lo = LatticePoint(
            self.lo.0.iter().zip(&other.lo.0).map(|(a, b)| *a.max(b)).collect(),
        );
        let hi = LatticePoint(
            self.hi.0.iter().zip(&other.hi.0).map(|(a, b)| *a.min(b)).collect(),
        );
        LatticeBox::new(lo, hi)
    }
}

pub struct BoxIter<'a> {
    bx: &'a LatticeBox,
    next: Option<LatticePoint>,
}

impl Iterator for BoxIter<'_> {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        for a in (0..self.bx.dim()).rev() {
            if succ.0[a] < self.bx.hi.0[a] {
                succ.0[a] += 1;
                self.next = Some(succ);
                return Some(cur);
            }
            succ.0[a] = self.bx.lo.0[a];
        }
        Some(cur)
    }
}

/// Whether a shift set generates all of `Z^d` or only a proper subgroup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationStatus {
    /// The shifts generate the full lattice.
    FullLattice,
    /// The shifts generate a proper subgroup; `invariant_factors` are the
    /// nontrivial diagonal entries of the Smith normal form (0 marks a
    /// missing direction).
    Subgroup { rank: usize, invariant_factors: Vec<u64> },
}

impl GenerationStatus {
    pub fn is_full(&self) -> bool {
        matches!(self, GenerationStatus::FullLattice)
    }
}

/// Invariant factors (Smith normal form diagonal) of an integer matrix,
/// nonnegative and each dividing the next; trailing zeros mark rank
/// deficiency.  The length is `min(rows, cols)`.
#[allow(clippy::needless_range_loop)] // index loops touch two rows at once
pub fn smith_invariant_factors(mut m: Vec<Vec<i128>>) -> Vec<i128> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let n = rows.min(cols);
    let mut out = vec![0i128; n];
    let mut k = 0usize;
    while k < n {
        // Find the entry of smallest nonzero magnitude in the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if m[i][j] != 0
                    && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        // Reduce the pivot row and column; restart whenever a remainder
        // becomes the new smallest entry.
        loop {
            let p = m[k][k];
            let mut clean = true;
            for i in (k + 1)..rows {
                let q = m[i][k].div_euclid(p);
                if q != 0 {
                    for j in k..cols {
                        m[i][j] -= q * m[k][j];
                    }
                }
                if m[i][k] != 0 {
                    m.swap(k, i);
                    clean = false;
                    break;
                }
            }
            if !clean {
                continue;
            }
            for j in (k + 1)..cols {
                let q = m[k][j].div_euclid(p);
                if q != 0 {
                    for row in m.iter_mut().skip(k) {
                        row[j] -= q * row[k];
                    }
                }
                if m[k][j] != 0 {
                    for row in m.iter_mut() {
                        row.swap(k, j);
                    }
                    clean = false;
                    break;
                }
            }
            if clean {
                break;
            }
        }
        // Enforce the divisibility chain: the pivot must divide every
        // remaining entry; if not, fold the offending column in and redo.
        let p = m[k][k];
        let mut redo = false;
        'scan: for i in (k + 1)..rows {
            for j in (k + 1)..cols {
                if m[i][j] % p != 0 {
                    for r in k..rows {
                        let add = m[r][j];
                        m[r][k] += add;
                    }
                    redo = true;
                    break 'scan;
                }
            }
        }
        if redo {
            continue;
        }
        out[k] = p.abs();
        k += 1;
    }
    out
}

/// Decide whether `shifts` generate the full lattice `Z^dim`.
pub fn generation_status(shifts: &[LatticePoint], dim: usize) -> Result<GenerationStatus> {
    for s in shifts {
        s.check_dim(dim)?;
    }
    if dim == 0 {
        return Err(Error::InvalidBox { reason: "zero-dimensional lattice".into() });
    }
    // One column per shift.
    let m: Vec<Vec<i128>> = (0..dim)
        .map(|a| shifts.iter().map(|s| s.0[a] as i128).collect())
        .collect();
    let factors = smith_invariant_factors(m);
    let rank = factors.iter().filter(|&&f| f != 0).count();
    if rank == dim && factors.iter().all(|&f| f == 1) {
        Ok(GenerationStatus::FullLattice)
    } else {
        let mut inv: Vec<u64> = factors.iter().map(|&f| f as u64).collect();
        inv.resize(dim, 0);
        Ok(GenerationStatus::Subgroup { rank, invariant_factors: inv })
    }
}
