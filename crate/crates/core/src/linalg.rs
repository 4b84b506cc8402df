//! Dense Gaussian elimination with partial pivoting.

use thiserror::Error;

/// A pivot is rejected when its magnitude is at most this fraction of the
/// largest magnitude in the same column of the original matrix.
pub const RELATIVE_PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("coefficient matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("right-hand side has {len} entries, expected {n}")]
    RhsLength { len: usize, n: usize },
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
}

/// Square system `a * x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl DenseSystem {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, LinalgError> {
        let system = DenseSystem { a, b };
        system.check_shape()?;
        Ok(system)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    fn check_shape(&self) -> Result<(), LinalgError> {
        let n = self.a.len();
        if let Some((row, r)) = self.a.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(LinalgError::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
        if self.b.len() != n {
            return Err(LinalgError::RhsLength {
                len: self.b.len(),
                n,
            });
        }
        Ok(())
    }

    /// Max-norm of `a * x - b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| {
                let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                (ax - bi).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn solve_dense(system: &DenseSystem) -> Result<Vec<f64>, LinalgError> {
    system.check_shape()?;
    let n = system.dim();
    let mut a = system.a.clone();
    let mut b = system.b.clone();

    let column_scale: Vec<f64> = (0..n)
        .map(|c| a.iter().map(|row| row[c].abs()).fold(0.0, f64::max))
        .collect();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty pivot range");
        let pivot = a[pivot_row][col];
        if pivot.is_nan() || pivot.abs() <= RELATIVE_PIVOT_TOLERANCE * column_scale[col] {
            return Err(LinalgError::SingularMatrix { column: col, pivot });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);

        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_coeffs = &upper[col];
        let b_pivot = b[col];
        for (row, rhs) in lower.iter_mut().zip(&mut b[col + 1..]) {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for (x, p) in row[col..].iter_mut().zip(&pivot_coeffs[col..]) {
                *x -= factor * p;
            }
            *rhs -= factor * b_pivot;
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_returns_rhs() {
        let system = DenseSystem::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![3.0, -1.5, 8.0],
        )
        .unwrap();
        assert_eq!(solve_dense(&system).unwrap(), vec![3.0, -1.5, 8.0]);
    }

    #[test]
    fn diagonal_system() {
        let system =
            DenseSystem::new(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![2.0, 8.0]).unwrap();
        assert_eq!(solve_dense(&system).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn needs_pivoting() {
        let system =
            DenseSystem::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![5.0, 7.0]).unwrap();
        assert_eq!(solve_dense(&system).unwrap(), vec![7.0, 5.0]);
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let system = DenseSystem::new(
            vec![
                vec![1.0, 2.0, 3.0],
                vec![1.0, 2.0, 3.0],
                vec![0.0, 1.0, 5.0],
            ],
            vec![1.0, 1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            solve_dense(&system),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn zero_column_is_singular() {
        let system =
            DenseSystem::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            solve_dense(&system),
            Err(LinalgError::SingularMatrix { column: 1, .. })
        ));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            DenseSystem::new(vec![vec![1.0, 2.0]], vec![1.0]),
            Err(LinalgError::NotSquare { .. })
        ));
        assert!(matches!(
            DenseSystem::new(vec![vec![1.0]], vec![1.0, 2.0]),
            Err(LinalgError::RhsLength { .. })
        ));
    }

    #[test]
    fn singularity_is_scale_invariant() {
        let tiny = vec![vec![1e-20, 2e-20], vec![3e-20, 1e-20]];
        let x = solve_dense(&DenseSystem::new(tiny, vec![1e-20, 1e-20]).unwrap()).unwrap();
        assert!((x[0] - 0.2).abs() < 1e-12 && (x[1] - 0.4).abs() < 1e-12);
    }

    fn diagonally_dominant(n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
            .prop_map(move |(mut a, b)| {
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] += n as f64 + 1.0;
                }
                (a, b)
            })
    }

    proptest! {
        #[test]
        fn residual_is_small((a, b) in (1usize..=10).prop_flat_map(diagonally_dominant)) {
            let system = DenseSystem::new(a, b).unwrap();
            let x = solve_dense(&system).unwrap();
            let scale = 1.0 + system.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(system.residual(&x) <= 1e-8 * scale);
        }

        #[test]
        fn row_permutation_invariance(
            (a, b) in (2usize..=8).prop_flat_map(diagonally_dominant),
            seed in any::<u64>(),
        ) {
            let n = b.len();
            let mut order: Vec<usize> = (0..n).collect();
            // deterministic shuffle
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let x = solve_dense(&DenseSystem::new(a.clone(), b.clone()).unwrap()).unwrap();
            let pa = order.iter().map(|&i| a[i].clone()).collect();
            let pb = order.iter().map(|&i| b[i]).collect();
            let y = solve_dense(&DenseSystem::new(pa, pb).unwrap()).unwrap();
            for (u, w) in x.iter().zip(&y) {
                prop_assert!((u - w).abs() <= 1e-9);
            }
        }
    }
}
