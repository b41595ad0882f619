use crate::error::{Error, Result};
use crate::qubo::QuboProblem;

/// Default dimension cap for exhaustive QUBO enumeration.
pub const DEFAULT_EXACT_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub bits: Vec<u8>,
    pub energy: f64,
}

/// Global minimum of `bᵀQb`; ties resolve to the lexicographically smallest
/// bitstring.
pub fn solve_exact(q: &QuboProblem) -> Result<ExactSolution> {
    solve_exact_capped(q, DEFAULT_EXACT_CAP)
}

pub fn solve_exact_capped(q: &QuboProblem, cap: usize) -> Result<ExactSolution> {
    let n = q.dim();
    if n > cap || n > 31 {
        return Err(Error::EnumerationCap {
            what: "exact QUBO solve",
            required: n,
            cap,
        });
    }
    let m = q.matrix();
    let flat: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|ij| m[ij])
        .collect();
    // Energies accumulate rounding along the Gray walk, so near-equal values
    // are treated as ties.
    let tol = 1e-12 * (1.0 + m.iter().map(|x| x.abs()).sum::<f64>());
    let lex_key = |code: u32| if n == 0 { 0 } else { code.reverse_bits() >> (32 - n) };

    let mut bits = vec![0u8; n];
    // field[i] = Σ_{j≠i} Q_ij b_j
    let mut field = vec![0.0f64; n];
    let mut energy = 0.0f64;
    let mut best_energy = 0.0f64;
    let mut best_code = 0u32;
    let mut best_key = 0u32;

    for step in 1u32..(1u32 << n) {
        let k = step.trailing_zeros() as usize;
        let up = bits[k] == 0;
        let delta = flat[k * n + k] + 2.0 * field[k];
        let sign = if up { 1.0 } else { -1.0 };
        energy += sign * delta;
        bits[k] ^= 1;
        for i in 0..n {
            if i != k {
                field[i] += sign * flat[i * n + k];
            }
        }
        let code = step ^ (step >> 1);
        if energy < best_energy - tol {
            best_energy = energy;
            best_code = code;
            best_key = lex_key(code);
        } else if energy <= best_energy + tol {
            let key = lex_key(code);
            if key < best_key {
                best_energy = best_energy.min(energy);
                best_code = code;
                best_key = key;
            }
        }
    }

    let bits: Vec<u8> = (0..n).map(|i| ((best_code >> i) & 1) as u8).collect();
    let energy = q.energy(&bits);
    Ok(ExactSolution { bits, energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::gaussian_qubo;
    use nalgebra::DMatrix;

    #[test]
    fn zero_matrix_picks_all_zeros() {
        let q = QuboProblem::new(DMatrix::zeros(5, 5)).unwrap();
        let s = solve_exact(&q).unwrap();
        assert_eq!(s.bits, vec![0; 5]);
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn scalar_negative() {
        let q = QuboProblem::new(DMatrix::from_element(1, 1, -1.0)).unwrap();
        let s = solve_exact(&q).unwrap();
        assert_eq!(s.bits, vec![1]);
        assert_eq!(s.energy, -1.0);
    }

    #[test]
    fn matches_independent_loop() {
        for seed in 0..10 {
            let q = gaussian_qubo(10, seed).unwrap();
            let mut best = (f64::INFINITY, 0u32);
            for code in 0..1024u32 {
                let b: Vec<u8> = (0..10).map(|i| ((code >> i) & 1) as u8).collect();
                let mut e = 0.0;
                for i in 0..10 {
                    for j in 0..10 {
                        e += q.matrix()[(i, j)] * f64::from(b[i]) * f64::from(b[j]);
                    }
                }
                if e < best.0 {
                    best = (e, code);
                }
            }
            let s = solve_exact(&q).unwrap();
            assert!((s.energy - best.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        // Minimized by exactly one of the two variables set: "01" and "10".
        let q = QuboProblem::new(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0])).unwrap();
        let s = solve_exact(&q).unwrap();
        assert_eq!(s.bits, vec![0, 1]);
        assert_eq!(s.energy, -1.0);
    }

    #[test]
    fn cap_is_enforced() {
        let q = QuboProblem::new(DMatrix::zeros(6, 6)).unwrap();
        assert!(matches!(
            solve_exact_capped(&q, 5),
            Err(Error::EnumerationCap {
                required: 6,
                cap: 5,
                ..
            })
        ));
    }
}
