//! Minimal tour: the matched weight annihilates at power deg+1, exactly.

use exppoly::diffops::{apply_modified, apply_plain};
use exppoly::lattice::{LatticePoint, MultiIndex};
use exppoly::poly::{ExpPoly, ExponentialWitness};
use exppoly::scalar::Scalar;

fn main() -> exppoly::Result<()> {
    // f(n) = n·2^n on Z.
    let f = ExpPoly::monomial(
        ExponentialWitness::from_ints(&[2])?,
        MultiIndex(vec![1]),
        Scalar::one(),
    )?;
    let y = LatticePoint(vec![1]);

    // The matched weight annihilates at power deg+1 = 2, exactly.
    let w = ExponentialWitness::from_ints(&[2])?;
    assert!(apply_modified(&f, &w, &y, 2)?.is_zero());
    assert!(!apply_modified(&f, &w, &y, 1)?.is_zero());

    // The plain difference does not: 2 is not the weight 1.
    assert!(!apply_plain(&f, &y, 2)?.is_zero());

    println!("(τ_1 − 2)² annihilates n·2^n; (τ_1 − 2) and (τ_1 − 1)² do not.");
    Ok(())
}
