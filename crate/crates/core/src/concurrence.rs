//! Wootters concurrence of two-qubit states.

use crate::error::{Error, Result};
use crate::linalg::{eig_general, eig_hermitian, ComplexMatrix, HERMITIAN_TOL};

const TRACE_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-9;
/// Negative eigenvalues of `rho * rho_tilde` below this are reported as errors.
pub const PSD_TOL: f64 = 1e-8;
const X_PATTERN_TOL: f64 = 1e-10;

/// Validated 4×4 density matrix in the basis `{|00>, |01>, |10>, |11>}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    rho: ComplexMatrix,
}

impl TwoQubitState {
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        if rho.shape() != (4, 4) {
            return Err(Error::Dimension(format!(
                "two-qubit state must be 4x4, got {}x{}",
                rho.rows(),
                rho.cols()
            )));
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite);
        }
        let deviation = rho.hermiticity_defect();
        if deviation > HERMITIAN_TOL {
            return Err(Error::Hermiticity { deviation });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!(
                "trace {tr} differs from 1"
            )));
        }
        let lowest = *eig_hermitian(&rho)?
            .real_eigenvalues()
            .last()
            .expect("four eigenvalues");
        if lowest < -EIGEN_TOL {
            return Err(Error::NotPositive { eigenvalue: lowest });
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.rho
    }
}

/// `σ_y ⊗ σ_y`, which is real in this basis.
fn sigma_yy() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[
        &[0.0, 0.0, 0.0, -1.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[-1.0, 0.0, 0.0, 0.0],
    ])
}

/// `(σ_y ⊗ σ_y) rho* (σ_y ⊗ σ_y)`
pub fn spin_flip(state: &TwoQubitState) -> ComplexMatrix {
    let y = sigma_yy();
    &(&y * &state.rho.conj()) * &y
}

pub fn concurrence(state: &TwoQubitState) -> Result<f64> {
    let r = &state.rho * &spin_flip(state);
    let spectrum = eig_general(&r)?;
    let mut lambdas = Vec::with_capacity(4);
    for ev in &spectrum.eigenvalues {
        if ev.re < -PSD_TOL {
            return Err(Error::NumericalPsd { eigenvalue: ev.re });
        }
        lambdas.push(ev.re.max(0.0).sqrt());
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1..].iter().sum::<f64>();
    Ok(c.clamp(0.0, 1.0))
}

/// `2 max(0, |rho_12| - sqrt(rho_00 rho_33))` for states whose only
/// off-diagonal entries are the `|01><10|` block.
pub fn concurrence_x(state: &TwoQubitState) -> Result<f64> {
    let rho = &state.rho;
    let mut deviation: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let allowed = i == j || (i, j) == (1, 2) || (i, j) == (2, 1);
            if !allowed {
                deviation = deviation.max(rho[(i, j)].norm());
            }
        }
    }
    if deviation > X_PATTERN_TOL {
        return Err(Error::NotXState { deviation });
    }
    let coherence = rho[(1, 2)].norm();
    let corners = (rho[(0, 0)].re.max(0.0) * rho[(3, 3)].re.max(0.0)).sqrt();
    Ok((2.0 * (coherence - corners)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn singlet_like() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.5, 0.0],
            &[0.0, 0.5, 0.5, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
        ])
    }

    fn werner(p: f64) -> TwoQubitState {
        let mixed = ComplexMatrix::identity(4).scale_re((1.0 - p) / 4.0);
        TwoQubitState::new(&singlet_like().scale_re(p) + &mixed).unwrap()
    }

    #[test]
    fn spin_flip_fixed_points() {
        let mixed = TwoQubitState::new(ComplexMatrix::identity(4).scale_re(0.25)).unwrap();
        assert!(spin_flip(&mixed).max_abs_diff(mixed.rho()) < 1e-16);
        let s = TwoQubitState::new(singlet_like()).unwrap();
        assert!(spin_flip(&s).max_abs_diff(s.rho()) < 1e-16);
    }

    #[test]
    fn spin_flip_is_an_involution() {
        let rho = ComplexMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(0.25, 0.0)
            } else if i < j {
                C64::new(0.01 * (i + j) as f64, 0.02 * j as f64)
            } else {
                C64::new(0.01 * (i + j) as f64, -0.02 * i as f64)
            }
        });
        let s = TwoQubitState::new(rho).unwrap();
        let once = TwoQubitState::new(spin_flip(&s)).unwrap();
        assert!(spin_flip(&once).max_abs_diff(s.rho()) < 1e-16);
    }

    #[test]
    fn bell_and_product_values() {
        let s = TwoQubitState::new(singlet_like()).unwrap();
        assert!((concurrence(&s).unwrap() - 1.0).abs() < 1e-12);
        let mut g = ComplexMatrix::zeros(4, 4);
        g[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(concurrence(&TwoQubitState::new(g).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn werner_family() {
        for p in [0.0f64, 1.0 / 3.0, 0.6, 1.0] {
            let expected = ((3.0 * p - 1.0) / 2.0).max(0.0);
            let c = concurrence(&werner(p)).unwrap();
            assert!((c - expected).abs() < 1e-7, "p = {p}: {c} vs {expected}");
        }
    }

    #[test]
    fn x_form_matches_general_route() {
        let s = TwoQubitState::new(singlet_like()).unwrap();
        assert!((concurrence_x(&s).unwrap() - 1.0).abs() < 1e-15);
        let d = TwoQubitState::new(ComplexMatrix::real_diagonal(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(concurrence_x(&d).unwrap(), 0.0);
        for p in [0.2, 0.5, 0.9] {
            let w = werner(p);
            assert!((concurrence_x(&w).unwrap() - concurrence(&w).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn x_form_rejects_other_coherences() {
        let mut rho = ComplexMatrix::identity(4).scale_re(0.25);
        rho[(0, 3)] = C64::new(0.1, 0.0);
        rho[(3, 0)] = C64::new(0.1, 0.0);
        let s = TwoQubitState::new(rho).unwrap();
        assert!(matches!(concurrence_x(&s), Err(Error::NotXState { .. })));
    }

    #[test]
    fn state_validation() {
        assert!(matches!(
            TwoQubitState::new(ComplexMatrix::identity(2)),
            Err(Error::Dimension(_))
        ));
        assert!(TwoQubitState::new(ComplexMatrix::identity(4)).is_err());
        let neg = ComplexMatrix::real_diagonal(&[1.2, -0.2, 0.0, 0.0]);
        assert!(matches!(
            TwoQubitState::new(neg),
            Err(Error::NotPositive { .. })
        ));
        let mut nh = ComplexMatrix::identity(4).scale_re(0.25);
        nh[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            TwoQubitState::new(nh),
            Err(Error::Hermiticity { .. })
        ));
    }
}
