//! Functions known only through their values on a finite lattice box,
//! plus finite tables of weight-function values.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::lattice::{LatticeBox, LatticePoint};
use crate::poly::{ExpPoly, ExponentialWitness};
use crate::scalar::Scalar;
use crate::Result;

/// Samples of a function on a lattice box, stored in box iteration order
/// (row-major, last axis fastest).
#[derive(Clone, Debug)]
pub struct SampledFunction {
    bx: LatticeBox,
    values: Vec<Scalar>,
}

impl SampledFunction {
    pub fn new(bx: LatticeBox, values: Vec<Scalar>) -> Result<Self> {
        if values.len() != bx.volume() {
            return Err(Error::InvalidInput(format!(
                "expected {} sample values for the box, got {}",
                bx.volume(),
                values.len()
            )));
        }
        Ok(SampledFunction { bx, values })
    }

    /// Tabulate an arbitrary function over the box.
    pub fn from_fn<F>(bx: LatticeBox, mut f: F) -> Result<Self>
    where
        F: FnMut(&LatticePoint) -> Result<Scalar>,
    {
        let mut values = Vec::with_capacity(bx.volume());
        for p in bx.iter() {
            values.push(f(&p)?);
        }
        Ok(SampledFunction { bx, values })
    }

    /// Tabulate a symbolic exponential polynomial.
    pub fn sample(f: &ExpPoly, bx: LatticeBox) -> Result<Self> {
        if f.dim() != bx.dim() {
            return Err(Error::DimensionMismatch { expected: bx.dim(), got: f.dim() });
        }
        SampledFunction::from_fn(bx, |p| f.eval(p))
    }

    pub fn bounds(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn dim(&self) -> usize {
        self.bx.dim()
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn get(&self, p: &LatticePoint) -> Option<&Scalar> {
        if self.bx.contains(p) {
            Some(&self.values[self.bx.index_of(p)])
        } else {
            None
        }
    }

    pub fn is_exact(&self) -> bool {
        self.values.iter().all(|v| v.is_exact())
    }

    /// Largest sample modulus; 0 for an all-zero table.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Restrict to a sub-box.
    pub fn restricted_to(&self, sub: &LatticeBox) -> Result<SampledFunction> {
        if sub.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: sub.dim() });
        }
        for (lo, hi) in [(sub.lo(), sub.hi())] {
            if !self.bx.contains(lo) || !self.bx.contains(hi) {
                return Err(Error::InvalidBox {
                    reason: format!(
                        "sub-box {}..{} not contained in {}..{}",
                        sub.lo(),
                        sub.hi(),
                        self.bx.lo(),
                        self.bx.hi()
                    ),
                });
            }
        }
        SampledFunction::from_fn(sub.clone(), |p| {
            Ok(self.values[self.bx.index_of(p)].clone())
        })
    }

    /// Pointwise map.
    pub fn map<F>(&self, mut f: F) -> SampledFunction
    where
        F: FnMut(&LatticePoint, &Scalar) -> Scalar,
    {
        let values = self
            .bx
            .iter()
            .map(|p| f(&p, &self.values[self.bx.index_of(&p)]))
            .collect();
        SampledFunction { bx: self.bx.clone(), values }
    }

    /// Convert all samples to complex floats (box order preserved).
    pub fn to_complex_values(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v.to_complex()).collect()
    }

    /// Same box, float backend.
    pub fn to_float(&self) -> SampledFunction {
        SampledFunction {
            bx: self.bx.clone(),
            values: self.values.iter().map(|v| Scalar::from_complex(v.to_complex())).collect(),
        }
    }

    /// Largest pointwise deviation from `other` on the common box domain.
    pub fn max_deviation(&self, other: &SampledFunction) -> Result<f64> {
        if self.bx != other.bx {
            return Err(Error::InvalidBox {
                reason: "deviation requires identical sample boxes".into(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.to_complex() - b.to_complex()).norm())
            .fold(0.0, f64::max))
    }
}

#[derive(Serialize, Deserialize)]
struct SampledRepr {
    lo: Vec<i64>,
    hi: Vec<i64>,
    values: Vec<Scalar>,
}

impl Serialize for SampledFunction {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SampledRepr {
            lo: self.bx.lo().0.clone(),
            hi: self.bx.hi().0.clone(),
            values: self.values.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SampledFunction {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = SampledRepr::deserialize(de)?;
        let bx = LatticeBox::new(LatticePoint(repr.lo), LatticePoint(repr.hi))
            .map_err(D::Error::custom)?;
        SampledFunction::new(bx, repr.values).map_err(D::Error::custom)
    }
}

/// A finite table of weight-function values `y ↦ φ(y)`.
///
/// Used where the weight is only known at the shifts actually applied;
/// looking up a missing shift is an error, not a default.
#[derive(Clone, Debug, Default)]
pub struct PhiTable {
    values: BTreeMap<LatticePoint, Scalar>,
}

impl PhiTable {
    pub fn new() -> Self {
        PhiTable::default()
    }

    pub fn insert(&mut self, shift: LatticePoint, value: Scalar) {
        self.values.insert(shift, value);
    }

    pub fn from_entries(entries: Vec<(LatticePoint, Scalar)>) -> Self {
        PhiTable { values: entries.into_iter().collect() }
    }

    /// Tabulate an exponential witness at the given shifts.
    pub fn from_witness(w: &ExponentialWitness, shifts: &[LatticePoint]) -> Result<Self> {
        let mut t = PhiTable::new();
        for s in shifts {
            t.insert(s.clone(), w.eval_at(s)?);
        }
        Ok(t)
    }

    pub fn get(&self, shift: &LatticePoint) -> Result<&Scalar> {
        self.values
            .get(shift)
            .ok_or_else(|| Error::MissingPhiValue { shift: shift.0.clone() })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&LatticePoint, &Scalar)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Serialize for PhiTable {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<(Vec<i64>, Scalar)> = self
            .values
            .iter()
            .map(|(p, v)| (p.0.clone(), v.clone()))
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PhiTable {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<(Vec<i64>, Scalar)> = Vec::deserialize(de)?;
        Ok(PhiTable {
            values: rows.into_iter().map(|(p, v)| (LatticePoint(p), v)).collect(),
        })
    }
}
