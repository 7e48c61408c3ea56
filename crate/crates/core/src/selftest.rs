//! Condensed self-test: one deterministic smoke pass over every major
//! capability, reported as named checks.  The full property suite lives in
//! the integration tests; this is the quick in-process version behind the
//! CLI's `selftest` subcommand.

use serde::{Deserialize, Serialize};

use crate::diffops::{
    apply_product, difmod_check_sampled, difmod_check_symbolic, DiffProduct, OpFactor, PhiSpec,
};
use crate::error::Error;
use crate::lattice::{
    generation_status, smith_invariant_factors, LatticeBox, LatticePoint, MultiIndex,
};
use crate::montel::{
    certify_witness, minimal_orders, MontelConfig, Subject, WitnessCandidates,
};
use crate::oracle::{
    centered_cube, frechet_nullspaces, random_exppoly, random_generating_shifts, FiniteGroupSpec,
    FrechetOptions, RandomProfile, SeededRng,
};
use crate::poly::{ExpPoly, ExponentialWitness};
use crate::recover::{recover, RecoveryConfig};
use crate::sampled::SampledFunction;
use crate::scalar::Scalar;
use crate::subspace::{operator_matrix, GradedLexBasis, SpanSpace};
use crate::Result;

/// One named check and its outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Results of a full self-test pass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<SelftestCheck>,
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg.into()))
    }
}

fn scalar_backend(_seed: u64) -> Result<String> {
    let a = Scalar::from_ratio(3, 4);
    let b = Scalar::from_ratio(-2, 5);
    let prod = a.mul(&b);
    ensure(prod == Scalar::from_ratio(-3, 10), "exact product")?;
    let z = a.add(&Scalar::from_f64(0.25));
    ensure(!z.is_exact(), "mixing promotes to float")?;
    ensure((z.to_complex().re - 1.0).abs() < 1e-15, "promoted sum value")?;
    let wire = serde_json::to_string(&a).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let back: Scalar =
        serde_json::from_str(&wire).map_err(|e| Error::InvalidInput(e.to_string()))?;
    ensure(back == a, "serde round-trip keeps exactness")?;
    Ok("field ops, promotion, serde".into())
}

fn lattice_generation(_seed: u64) -> Result<String> {
    ensure(
        smith_invariant_factors(vec![vec![2, 0], vec![0, 3]]) == vec![1, 6],
        "invariant factors of diag(2,3)",
    )?;
    let full = generation_status(
        &[LatticePoint(vec![1, 0]), LatticePoint(vec![0, 1])],
        2,
    )?;
    ensure(full.is_full(), "unit vectors generate")?;
    let sub = generation_status(&[LatticePoint(vec![2])], 1)?;
    ensure(!sub.is_full(), "even shifts do not generate")?;
    Ok("Smith form and generation checks".into())
}

fn symbolic_annihilation(seed: u64) -> Result<String> {
    let mut count = 0usize;
    for i in 0..8u64 {
        let profile = RandomProfile {
            dim: 1 + (i as usize % 3),
            max_terms: 3,
            max_degree: 2,
            ..RandomProfile::default()
        };
        let f = random_exppoly(seed.wrapping_add(i), &profile);
        if f.is_zero() {
            continue;
        }
        let shifts = random_generating_shifts(seed ^ i, profile.dim, 2, 2);
        for h in shifts.iter().take(2) {
            let factors: Vec<OpFactor> = f
                .terms()
                .iter()
                .map(|t| {
                    let deg = t.coeffs.keys().map(|a| a.total_degree()).max().unwrap_or(0);
                    OpFactor::new(
                        PhiSpec::Witness(t.witness.clone()),
                        h.clone(),
                        deg + 1,
                    )
                })
                .collect::<Result<_>>()?;
            let g = apply_product(&f, &DiffProduct::new(factors))?;
            ensure(g.is_zero(), format!("product failed to annihilate instance {i}"))?;
            count += 1;
        }
    }
    Ok(format!("{count} exact annihilations"))
}

fn difference_identity(seed: u64) -> Result<String> {
    let mut count = 0usize;
    for i in 0..6u64 {
        let exact = i % 2 == 0;
        let profile = RandomProfile {
            dim: 1 + (i as usize % 2),
            max_terms: 2,
            max_degree: 1,
            exact,
            ..RandomProfile::default()
        };
        let f = random_exppoly(seed.wrapping_add(100 + i), &profile);
        let phi = random_exppoly(seed.wrapping_add(200 + i), &profile)
            .terms()
            .first()
            .map(|t| t.witness.clone())
            .unwrap_or(ExponentialWitness::from_ints(&vec![2; profile.dim])?);
        let shifts = random_generating_shifts(seed ^ (300 + i), profile.dim, 2, 2);
        let bx = centered_cube(profile.dim, 9);
        ensure(
            difmod_check_symbolic(&f, &phi, &shifts[..2], &bx, 1e-10)?,
            format!("symbolic identity failed on instance {i}"),
        )?;
        let s = SampledFunction::sample(&f, bx)?;
        ensure(
            difmod_check_sampled(&s, &phi, &shifts[..2], 1e-10)?,
            format!("sampled identity failed on instance {i}"),
        )?;
        count += 1;
    }
    Ok(format!("{count} instances, symbolic and sampled"))
}

fn operator_matrices(seed: u64) -> Result<String> {
    let mut rng = SeededRng::new(seed ^ 0x6d61_7472);
    let mut checked = 0usize;
    for i in 0..6 {
        let dim = 1 + i % 2;
        let degree = 1 + (i as u32 % 2);
        let witness = ExponentialWitness::new(
            (0..dim)
                .map(|_| Scalar::from_ratio(rng.int_in(1, 5), rng.int_in(1, 3)))
                .collect(),
        )?;
        let basis = GradedLexBasis::new(witness.clone(), degree);
        let h = LatticePoint((0..dim).map(|_| rng.int_in(-2, 2)).collect());
        let matched = witness.eval_at(&h)?;
        let off = matched.add(&Scalar::from_int(rng.int_in(1, 3)));
        for phi in [matched.clone(), off] {
            let m = operator_matrix(&basis, &phi, &h)?;
            ensure(m.is_upper_triangular(), "strict lower part must vanish")?;
            let expect = matched.add(&phi.mul(&Scalar::from_int(-1)));
            ensure(
                m.diagonal().iter().all(|d| *d == expect),
                "diagonal must be weight difference",
            )?;
            checked += 1;
        }
        let nil = operator_matrix(&basis, &matched, &h)?.pow(degree + 1);
        ensure(nil.is_zero_within(0.0), "matched weight must be nilpotent")?;
    }
    Ok(format!("{checked} matrices triangular with correct diagonal"))
}

fn invariant_extensions(seed: u64) -> Result<String> {
    let mut count = 0usize;
    for i in 0..4u64 {
        let profile = RandomProfile {
            dim: 1 + (i as usize % 2),
            max_terms: 2,
            max_degree: 1,
            ..RandomProfile::default()
        };
        let f = random_exppoly(seed.wrapping_add(400 + i), &profile);
        if f.is_zero() {
            continue;
        }
        let space = SpanSpace::new(profile.dim, std::slice::from_ref(&f))?;
        let phi = random_exppoly(seed.wrapping_add(500 + i), &profile)
            .terms()
            .first()
            .map(|t| t.witness.clone())
            .unwrap_or(ExponentialWitness::from_ints(&vec![3; profile.dim])?);
        let h = LatticePoint(vec![1; profile.dim]);
        let op = OpFactor::new(PhiSpec::Witness(phi), h, 1)?;
        // Extend until the chain stabilizes; the fixed point must be
        // invariant and contain the seed space.
        let mut cur = space.clone();
        for _ in 0..8 {
            let ext = cur.extend_once(&op, 1)?;
            let done = ext.invariant;
            cur = ext.space;
            if done {
                break;
            }
        }
        ensure(cur.is_invariant_under(&op)?, "fixed point must be invariant")?;
        ensure(cur.contains(&f)?, "closure must contain the seed")?;
        count += 1;
    }
    Ok(format!("{count} closures reached an invariant fixed point"))
}

fn group_recurrences(_seed: u64) -> Result<String> {
    let mut lines = Vec::new();
    for (moduli, n) in [
        (vec![4u64], 0u32),
        (vec![4], 2),
        (vec![5], 1),
        (vec![2, 2], 1),
        (vec![6], 1),
    ] {
        let spec = FiniteGroupSpec::new(moduli.clone())?;
        let rep = frechet_nullspaces(&spec, n, &FrechetOptions::default())?;
        ensure(
            rep.equal,
            format!("family nullspaces differ on {moduli:?} at n={n}"),
        )?;
        lines.push(format!("{moduli:?}:{}", rep.dim1));
    }
    Ok(format!("nullspaces agree ({})", lines.join(", ")))
}

fn sample_recovery(seed: u64) -> Result<String> {
    let mut ok = 0usize;
    let total = 5usize;
    for i in 0..total as u64 {
        let profile = RandomProfile {
            dim: 1 + (i as usize % 2),
            max_terms: 2,
            max_degree: 1,
            exact: false,
            modulus_range: (0.8, 1.25),
            separation: 0.1,
            coeff_mag: 2.0,
        };
        let f = random_exppoly(seed.wrapping_add(700 + i), &profile);
        if f.is_zero() {
            ok += 1;
            continue;
        }
        let s = SampledFunction::sample(&f, centered_cube(profile.dim, 16))?;
        let Ok(dec) = recover(&s, &RecoveryConfig::default()) else { continue };
        if !dec.success {
            continue;
        }
        let witnesses_match = f.terms().iter().all(|t| {
            dec.poly.terms().iter().any(|r| {
                t.witness
                    .components()
                    .iter()
                    .zip(r.witness.components())
                    .all(|(a, b)| (a.to_complex() - b.to_complex()).norm() <= 1e-6)
            })
        });
        if witnesses_match {
            ok += 1;
        }
    }
    ensure(
        ok + 1 >= total,
        format!("only {ok}/{total} random decompositions recovered"),
    )?;
    Ok(format!("{ok}/{total} decompositions recovered"))
}

fn certification(seed: u64) -> Result<String> {
    let cfg = MontelConfig::default();
    // Restrictions with growing polynomial degree need growing orders.
    for i in 1u32..=3 {
        let base = 1i64 << i;
        let f = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[base])?,
            MultiIndex(vec![i]),
            Scalar::one(),
        )?;
        let got = minimal_orders(
            Subject::Symbolic(&f),
            &[LatticePoint(vec![1])],
            &[Scalar::from_int(base)],
            6,
            &cfg,
        )?;
        ensure(
            got == vec![Some(i + 1)],
            format!("degree-{i} restriction should need order {}", i + 1),
        )?;
    }
    // A genuine two-exponential mixture never gets a single-weight pass.
    let mut rng = SeededRng::new(seed ^ 0x6365_7274);
    for _ in 0..2 {
        let a = rng.int_in(2, 4);
        let b = a + rng.int_in(1, 2);
        let f = ExpPoly::monomial(
            ExponentialWitness::from_ints(&[a])?,
            MultiIndex(vec![0]),
            Scalar::one(),
        )?
        .add(&ExpPoly::monomial(
            ExponentialWitness::from_ints(&[b])?,
            MultiIndex(vec![0]),
            Scalar::one(),
        )?)?;
        let s = SampledFunction::sample(&f, LatticeBox::cube(1, 0, 14)?)?;
        let got = certify_witness(&s, &[LatticePoint(vec![1])], 2, &cfg)?;
        ensure(
            got == WitnessCandidates::Assignments { values: Vec::new() },
            format!("mixture {a}^n+{b}^n must reject single weights"),
        )?;
    }
    Ok("minimal orders and negative control".into())
}

type CheckFn = fn(u64) -> Result<String>;

/// Run every check group with the given seed.
pub fn run(seed: u64) -> SelftestReport {
    let groups: Vec<(&str, CheckFn)> = vec![
        ("scalar-backend", scalar_backend),
        ("lattice-generation", lattice_generation),
        ("symbolic-annihilation", symbolic_annihilation),
        ("difference-identity", difference_identity),
        ("operator-matrices", operator_matrices),
        ("invariant-extensions", invariant_extensions),
        ("group-recurrences", group_recurrences),
        ("sample-recovery", sample_recovery),
        ("certification", certification),
    ];
    let mut checks = Vec::with_capacity(groups.len());
    for (name, f) in groups {
        let (passed, detail) = match f(seed) {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        checks.push(SelftestCheck { name: name.to_string(), passed, detail });
    }
    let passed = checks.iter().all(|c| c.passed);
    SelftestReport { seed, passed, checks }
}
