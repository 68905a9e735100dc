use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    // L below the diagonal (unit diagonal implied), U on and above.
    factors: Vec<C64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("LU of {}x{}", a.rows(), a.cols())));
        }
        let n = a.rows();
        let mut f = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = a.norm_max() * f64::EPSILON * (n.max(1) as f64);

        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, f[i * n + k].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::SingularSystem { pivot, column: k });
            }
            if p != k {
                for j in 0..n {
                    f.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = f[k * n + k].inv();
            for i in (k + 1)..n {
                let l = f[i * n + k] * inv;
                if l == ZERO {
                    continue;
                }
                f[i * n + k] = l;
                let (upper, lower) = f.split_at_mut(i * n);
                let row_k = &upper[k * n + k + 1..k * n + n];
                let row_i = &mut lower[k + 1..n];
                for (x, u) in row_i.iter_mut().zip(row_k) {
                    *x -= l * u;
                }
            }
        }
        Ok(Self {
            n,
            factors: f,
            perm,
        })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.factors[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.factors[i * n + j] * x[j];
            }
            x[i] = s / self.factors[i * n + i];
        }
        x
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let lu = Lu::factor(a)?;
    let cols: Vec<Vec<C64>> = (0..b.cols()).map(|j| lu.solve_vec(&b.column(j))).collect();
    Ok(ComplexMatrix::from_columns(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_returns_rhs() {
        let b = ComplexMatrix::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64 - 0.5));
        let x = solve_linear(&ComplexMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_system_divides() {
        let a = ComplexMatrix::diagonal(&[C64::new(2.0, 0.0), C64::new(0.0, 4.0)]);
        let b = ComplexMatrix::from_rows(&[&[C64::new(1.0, 0.0)], &[C64::new(2.0, 0.0)]]);
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-16);
        assert!((x[(1, 0)] - C64::new(0.0, -0.5)).norm() < 1e-16);
    }

    #[test]
    fn singular_system_detected() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = ComplexMatrix::identity(2);
        assert!(matches!(
            solve_linear(&a, &b),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn rhs_row_mismatch() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::zeros(3, 1);
        assert!(matches!(solve_linear(&a, &b), Err(Error::Dimension(_))));
    }
}
