//! Unitaries used by the encoder and decoder.

use crate::error::{Error, Result};
use crate::tensor::{c, root_of_unity, Operator};

fn check_rank(rank: usize, dim: usize) -> Result<()> {
    if rank < 2 {
        return Err(Error::InvalidDimension(format!("rank {rank} must be at least 2")));
    }
    if rank > dim {
        return Err(Error::InvalidDimension(format!(
            "rank {rank} exceeds ambient dimension {dim}"
        )));
    }
    Ok(())
}

/// Cyclic shift `X|l⟩ = |l ⊕ 1⟩` on a `d`-level system.
pub fn pauli_x(d: usize) -> Result<Operator> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("dimension {d} must be at least 2")));
    }
    Ok(Operator::from_fn(d, d, |row, col| {
        if row == (col + 1) % d {
            c(1.0)
        } else {
            c(0.0)
        }
    }))
}

/// Inverse shift `X^{-1}|l⟩ = |l ⊖ 1⟩`, i.e. the transpose of [`pauli_x`].
pub fn pauli_x_inv(d: usize) -> Result<Operator> {
    Ok(pauli_x(d)?.adjoint())
}

/// Clock operator with phase period `rank`: `Z|l⟩ = e^{2πil/rank}|l⟩` for
/// `l < rank`, identity on the remaining `d - rank` levels.
pub fn pauli_z(rank: usize, d: usize) -> Result<Operator> {
    check_rank(rank, d)?;
    let diag: Vec<_> = (0..d)
        .map(|l| if l < rank { root_of_unity(l as i64, rank) } else { c(1.0) })
        .collect();
    Ok(Operator::diagonal(&diag))
}

/// Generalized XOR on `d1 ⊗ d2`: `|m⟩|n⟩ → |m⟩|m ⊖ n⟩`, arithmetic mod `d2`.
///
/// The map `n ↦ m − n` is an involution for every `m`, so the gate is a
/// symmetric permutation matrix: unitary, hermitian and self-inverse.
pub fn gxor(d1: usize, d2: usize) -> Result<Operator> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::InvalidDimension(format!(
            "GXOR needs both dimensions ≥ 2, got ({d1}, {d2})"
        )));
    }
    Ok(Operator::from_fn(d1 * d2, d1 * d2, |row, col| {
        let (m, n) = (col / d2, col % d2);
        let target = (m % d2 + d2 - n) % d2;
        if row == m * d2 + target {
            c(1.0)
        } else {
            c(0.0)
        }
    }))
}

/// Discrete Fourier transform on the leading `rank` levels of a `d`-level
/// system, identity on the rest.
pub fn fourier(rank: usize, d: usize) -> Result<Operator> {
    check_rank(rank, d)?;
    let norm = 1.0 / (rank as f64).sqrt();
    Ok(Operator::from_fn(d, d, |m, n| {
        if m < rank && n < rank {
            root_of_unity((m * n) as i64, rank) * norm
        } else if m == n {
            c(1.0)
        } else {
            c(0.0)
        }
    }))
}
