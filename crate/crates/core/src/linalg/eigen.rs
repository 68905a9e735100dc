//! Eigendecompositions for small dense complex matrices.
//!
//! Hermitian input goes through cyclic complex Jacobi rotations, which are
//! accurate to working precision for the dimensions used here (d <= 64).
//! General input is reduced to Hessenberg form, driven to complex Schur form
//! by shifted QR, and eigenvectors are recovered by back substitution.

use super::lu::solve_linear;
use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`eig_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Sorted descending by real part.
    pub eigenvalues: Vec<C64>,
    /// Columns are eigenvectors in the order of `eigenvalues`. `None` when the
    /// matrix was detected to be defective.
    pub eigenvectors: Option<ComplexMatrix>,
    pub defective: bool,
}

impl Spectrum {
    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    /// Eigenvector `k`, if available.
    pub fn vector(&self, k: usize) -> Option<Vec<C64>> {
        self.eigenvectors.as_ref().map(|v| v.column(k))
    }
}

pub fn eig_hermitian(a: &ComplexMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eig_hermitian on {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let deviation = a.hermiticity_defect();
    let scale = a.norm_max().max(1.0);
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::Hermiticity { deviation });
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let norm = m.norm_fro();

    let mut previous_off = f64::INFINITY;
    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off == 0.0 || off <= 1e-17 * norm || off >= previous_off {
            break;
        }
        previous_off = off;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let g00 = C64::new(c, 0.0);
                let g01 = C64::new(s, 0.0);
                let g10 = -phase.conj() * s;
                let g11 = phase.conj() * c;
                rotate(&mut m, &mut v, p, q, [g00, g01, g10, g11]);
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n).map(|k| (m[(k, k)].re, v.column(k))).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let eigenvalues = pairs.iter().map(|(l, _)| C64::new(*l, 0.0)).collect();
    let vectors: Vec<Vec<C64>> = pairs.into_iter().map(|(_, c)| c).collect();
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(ComplexMatrix::from_columns(&vectors)),
        defective: false,
    })
}

// m <- G^† m G on rows/cols (p, q), v <- v G.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, g: [C64; 4]) {
    let [g00, g01, g10, g11] = g;
    let n = m.rows();
    for k in 0..n {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = mp * g00 + mq * g10;
        m[(k, q)] = mp * g01 + mq * g11;
        let vp = v[(k, p)];
        let vq = v[(k, q)];
        v[(k, p)] = vp * g00 + vq * g10;
        v[(k, q)] = vp * g01 + vq * g11;
    }
    for k in 0..n {
        let mp = m[(p, k)];
        let mq = m[(q, k)];
        m[(p, k)] = g00.conj() * mp + g10.conj() * mq;
        m[(q, k)] = g01.conj() * mp + g11.conj() * mq;
    }
}

/// Applies `f` to the eigenvalues of a Hermitian matrix: V f(Λ) V†.
pub fn hermitian_function(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let spec = eig_hermitian(a)?;
    let v = spec.eigenvectors.expect("hermitian spectra carry vectors");
    let lam: Vec<f64> = spec.eigenvalues.iter().map(|z| f(z.re)).collect();
    let n = a.rows();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] * lam[k] * v[(j, k)].conj()).sum()
    }))
}

/// Eigenvalues (and, when diagonalizable, eigenvectors) of a general square matrix.
pub fn eig_general(a: &ComplexMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eig_general on {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            eigenvectors: Some(ComplexMatrix::zeros(0, 0)),
            defective: false,
        });
    }
    let (mut h, mut z) = hessenberg(a);
    schur_qr(&mut h, &mut z);
    let norm = a.norm_fro().max(f64::MIN_POSITIVE);

    let lambdas: Vec<C64> = (0..n).map(|k| h[(k, k)]).collect();
    // Back substitution on the triangular factor: (T - λ_k) y = 0, y_k = 1.
    let small = f64::EPSILON * norm;
    let mut columns = Vec::with_capacity(n);
    for k in 0..n {
        let mut y = vec![ZERO; n];
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for m in (j + 1)..=k {
                s += h[(j, m)] * y[m];
            }
            let mut denom = h[(j, j)] - lambdas[k];
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            y[j] = -s / denom;
        }
        let x = z.mul_vec(&y);
        let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        columns.push(x.into_iter().map(|c| c / nrm).collect::<Vec<_>>());
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        lambdas[j]
            .re
            .total_cmp(&lambdas[i].re)
            .then(lambdas[j].im.total_cmp(&lambdas[i].im))
    });
    let eigenvalues: Vec<C64> = order.iter().map(|&k| lambdas[k]).collect();
    let vectors = ComplexMatrix::from_columns(
        &order
            .iter()
            .map(|&k| columns[k].clone())
            .collect::<Vec<_>>(),
    );

    let defective = is_defective(&vectors);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: if defective { None } else { Some(vectors) },
        defective,
    })
}

// Eigenvector matrix that is numerically singular means no eigenbasis exists.
fn is_defective(vectors: &ComplexMatrix) -> bool {
    let n = vectors.rows();
    match solve_linear(vectors, &ComplexMatrix::identity(n)) {
        Err(_) => true,
        Ok(inv) => inv.norm_max() * vectors.norm_max() * (n as f64) > 1e8,
    }
}

fn householder_vector(x: &[C64]) -> Option<(Vec<C64>, C64)> {
    let alpha_norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if alpha_norm == 0.0 {
        return None;
    }
    let phase = if x[0].norm() > 0.0 {
        x[0] / x[0].norm()
    } else {
        ONE
    };
    let mut v = x.to_vec();
    v[0] += phase * alpha_norm;
    let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if vnorm == 0.0 {
        return None;
    }
    for c in v.iter_mut() {
        *c /= vnorm;
    }
    Some((v, -phase * alpha_norm))
}

// Returns (H, Q) with A = Q H Q†.
fn hessenberg(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let Some((v, _)) = householder_vector(&x) else {
            continue;
        };
        // H <- P H P with P = I - 2 v v† acting on indices k+1..n
        for j in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * h[(k + 1 + t, j)])
                .sum();
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vi * dot * 2.0;
            }
        }
        for i in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| h[(i, k + 1 + t)] * vi)
                .sum();
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= dot * vi.conj() * 2.0;
            }
            let dotq: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| q[(i, k + 1 + t)] * vi)
                .sum();
            for (t, vi) in v.iter().enumerate() {
                q[(i, k + 1 + t)] -= dotq * vi.conj() * 2.0;
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    // Returns (c, s) with [[c, s], [-conj(s), c]] [a; b] = [r; 0].
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, b.conj() / b.norm());
    }
    let an = a.norm();
    let r = (an * an + b.norm_sqr()).sqrt();
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

// Shifted QR on an upper Hessenberg matrix; accumulates into z.
fn schur_qr(h: &mut ComplexMatrix, z: &mut ComplexMatrix) {
    let n = h.rows();
    let mut hi = n - 1;
    let mut iter_since_deflation = 0usize;
    let mut total_iter = 0usize;
    while hi > 0 {
        // find active block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let scale = if scale == 0.0 { h.norm_max() } else { scale };
            if sub <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        total_iter += 1;
        iter_since_deflation += 1;
        if total_iter > 100 * n.max(4) {
            break;
        }

        // Wilkinson shift from the trailing 2x2 block.
        let a = h[(hi - 1, hi - 1)];
        let b = h[(hi - 1, hi)];
        let c = h[(hi, hi - 1)];
        let d = h[(hi, hi)];
        let mut mu = {
            let tr = a + d;
            let det = a * d - b * c;
            let disc = (tr * tr * 0.25 - det).sqrt();
            let l1 = tr * 0.5 + disc;
            let l2 = tr * 0.5 - disc;
            if (l1 - d).norm() < (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };
        if iter_since_deflation % 11 == 10 {
            mu = d + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0);
        }

        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rots.push((c, s));
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            let top = (k + 2).min(hi);
            for i in 0..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
}
