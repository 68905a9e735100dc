//! The effective four-level "diamond" machine: two degenerate qubits whose
//! symmetric and antisymmetric collective transitions each couple to their
//! own bath.
//!
//! Basis order is `{|00>, |01>, |10>, |11>}` with the first digit for qubit 1
//! and `|1>` the excited level. Site operators are tensor-product lowering
//! operators, `c1 = σ⁻ ⊗ 1` and `c2 = 1 ⊗ σ⁻`.

use std::collections::BTreeMap;

use crate::concurrence::{concurrence, TwoQubitState};
use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, C64};
use crate::lindblad::{steady_state, Direction, LindbladChannel, OpenSystem, SteadyState};

pub const LABEL_S: &str = "S";
pub const LABEL_A: &str = "A";

/// Single-qubit lowering operator `|0><1|`.
pub fn qubit_lowering() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
}

/// Lowering operator of `site` (0 or 1) on the two-qubit space.
pub fn site_lowering(site: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    match site {
        0 => kron(&qubit_lowering(), &id),
        1 => kron(&id, &qubit_lowering()),
        _ => panic!("two-qubit model has sites 0 and 1, got {site}"),
    }
}

/// `(J_S, J_A) = (c1 + c2, c1 - c2)`.
pub fn collective_ops() -> (ComplexMatrix, ComplexMatrix) {
    let c1 = site_lowering(0);
    let c2 = site_lowering(1);
    (&c1 + &c2, &c1 - &c2)
}

/// Number operator `c1†c1 + c2†c2`.
pub fn excitation_number() -> ComplexMatrix {
    let c1 = site_lowering(0);
    let c2 = site_lowering(1);
    &(&c1.dagger() * &c1) + &(&c2.dagger() * &c2)
}

/// Index of a state in [`bell_basis`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellState {
    G = 0,
    S = 1,
    A = 2,
    E = 3,
}

/// Columns `|G>, |S>, |A>, |E>` over the computational basis.
pub fn bell_basis() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, h, h, 0.0],
        &[0.0, h, -h, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ])
}

pub fn bell_state(which: BellState) -> Vec<C64> {
    bell_basis().column(which as usize)
}

/// Rates of the collective-bath model; `omega0` is the transition energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiamondSpec {
    pub omega0: f64,
    pub gamma_plus: f64,
    pub gamma_minus_s: f64,
    pub gamma_minus_a: f64,
}

impl DiamondSpec {
    pub fn new(
        omega0: f64,
        gamma_plus: f64,
        gamma_minus_s: f64,
        gamma_minus_a: f64,
    ) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "omega0 must be > 0, got {omega0}"
            )));
        }
        if !(gamma_plus > 0.0) || !gamma_plus.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma_plus must be > 0, got {gamma_plus}"
            )));
        }
        for (name, v) in [
            ("gamma_minus_s", gamma_minus_s),
            ("gamma_minus_a", gamma_minus_a),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self {
            omega0,
            gamma_plus,
            gamma_minus_s,
            gamma_minus_a,
        })
    }

    pub fn with_omega0(self, omega0: f64) -> Result<Self> {
        Self::new(
            omega0,
            self.gamma_plus,
            self.gamma_minus_s,
            self.gamma_minus_a,
        )
    }

    pub fn max_rate(&self) -> f64 {
        self.gamma_plus
            .max(self.gamma_minus_s)
            .max(self.gamma_minus_a)
    }
}

/// `Γ⁻_i = Γ⁺ e^{β_i}` with β in units of 1/ω₀; ω₀ is set to 1.
pub fn rates_from_betas(beta_a: f64, beta_s: f64, gamma_plus: f64) -> Result<DiamondSpec> {
    for b in [beta_a, beta_s] {
        if !b.is_finite() {
            return Err(Error::NonFiniteBeta(b));
        }
    }
    DiamondSpec::new(
        1.0,
        gamma_plus,
        gamma_plus * beta_s.exp(),
        gamma_plus * beta_a.exp(),
    )
}

/// `(β_A, β_S) = (ln Γ⁻_A/Γ⁺, ln Γ⁻_S/Γ⁺)`; a zero decay rate gives `-inf`.
pub fn betas_from_rates(spec: &DiamondSpec) -> (f64, f64) {
    let beta = |g: f64| {
        if g == 0.0 {
            f64::NEG_INFINITY
        } else {
            (g / spec.gamma_plus).ln()
        }
    };
    (beta(spec.gamma_minus_a), beta(spec.gamma_minus_s))
}

/// Inverse temperatures per bath label in units of 1/energy (β/ω₀).
pub fn bath_betas(spec: &DiamondSpec) -> BTreeMap<String, f64> {
    let (ba, bs) = betas_from_rates(spec);
    BTreeMap::from([
        (LABEL_A.to_string(), ba / spec.omega0),
        (LABEL_S.to_string(), bs / spec.omega0),
    ])
}

/// `H₀ = ω₀ (n₁ + n₂)` with pump and decay channels on both collective modes.
pub fn build_diamond(spec: &DiamondSpec) -> OpenSystem {
    let (js, ja) = collective_ops();
    let h = excitation_number().scale_re(spec.omega0);
    let channels = vec![
        LindbladChannel::new(LABEL_S, Direction::Absorption, js.dagger(), spec.gamma_plus),
        LindbladChannel::new(LABEL_S, Direction::Emission, js, spec.gamma_minus_s),
        LindbladChannel::new(LABEL_A, Direction::Absorption, ja.dagger(), spec.gamma_plus),
        LindbladChannel::new(LABEL_A, Direction::Emission, ja, spec.gamma_minus_a),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("spec rates are validated");
    OpenSystem::new(h, channels).expect("diamond operators are consistent")
}

pub fn diamond_steady_state(spec: &DiamondSpec) -> Result<SteadyState> {
    steady_state(&build_diamond(spec))
}

/// Value of the closed-form steady-state concurrence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticConcurrence {
    pub value: f64,
    /// Set when an exponent exceeded [`OVERFLOW_BETA`] and the rescaled form was used.
    pub overflow_handled: bool,
}

/// Above this β the products of exponentials in the direct form approach
/// the double-precision range, and the rescaled form takes over.
pub const OVERFLOW_BETA: f64 = 100.0;
const FROZEN_BETA: f64 = 700.0;

/// Closed-form steady-state concurrence as a function of the two inverse
/// temperatures (dimensionless, in units of 1/ω₀). Symmetric in its arguments.
pub fn analytic_concurrence(beta_a: f64, beta_s: f64) -> f64 {
    analytic_concurrence_detail(beta_a, beta_s).value
}

pub fn analytic_concurrence_detail(beta_a: f64, beta_s: f64) -> AnalyticConcurrence {
    assert!(
        !beta_a.is_nan() && !beta_s.is_nan(),
        "inverse temperatures must not be NaN"
    );
    let hi = beta_a.max(beta_s);
    let lo = beta_a.min(beta_s);
    if hi <= OVERFLOW_BETA {
        let (x, y) = (hi.exp(), lo.exp());
        let s = x + y;
        let a = x - y;
        let p = (hi + lo).exp();
        let n1 = (a * (s / 2.0 - 1.0)).abs();
        let n2 = ((s / 2.0 + 1.0) * (2.0 * s * s + 2.0 * p * (s - 2.0))).sqrt();
        let d = 1.0 + s * s + s * (p + 3.0) / 2.0 - p;
        return AnalyticConcurrence {
            value: ((n1 - n2) / d).max(0.0),
            overflow_handled: false,
        };
    }
    if lo > FROZEN_BETA {
        // N1/d ~ e^{-lo}: both baths frozen, nothing survives in double precision.
        return AnalyticConcurrence {
            value: 0.0,
            overflow_handled: true,
        };
    }
    // Divide N1, N2 and d by e^{2 hi}; u = e^{-hi}, q = e^{lo - hi}.
    let u = (-hi).exp();
    let q = (lo - hi).exp();
    let s = 1.0 + q;
    let a = 1.0 - q;
    let e_lo = lo.exp();
    let n1 = (a * (s / 2.0 - u)).abs();
    let n2 = ((s / 2.0 + u) * (2.0 * s * s * u + 2.0 * q * (s - 2.0 * u))).sqrt();
    let d = u * u + s * s + s * (e_lo + 3.0 * u) / 2.0 - q;
    AnalyticConcurrence {
        value: ((n1 - n2) / d).max(0.0),
        overflow_handled: true,
    }
}

/// Closed form next to the Wootters concurrence of the numerically solved
/// steady state (Γ⁺ = 1, ω₀ = 1).
pub fn concurrence_vs_numeric(beta_a: f64, beta_s: f64) -> Result<(f64, f64)> {
    let spec = rates_from_betas(beta_a, beta_s, 1.0)?;
    let ss = diamond_steady_state(&spec)?;
    let numeric = concurrence(&TwoQubitState::new(ss.rho)?)?;
    Ok((analytic_concurrence(beta_a, beta_s), numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn apply(op: &ComplexMatrix, which: BellState) -> Vec<C64> {
        op.mul_vec(&bell_state(which))
    }

    fn close(a: &[C64], b: &[C64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-15)
    }

    fn scaled(which: BellState, s: f64) -> Vec<C64> {
        bell_state(which).into_iter().map(|c| c * s).collect()
    }

    #[test]
    fn collective_operator_action() {
        let (js, ja) = collective_ops();
        let r2 = std::f64::consts::SQRT_2;
        assert!(close(&apply(&js, BellState::A), &[ZERO; 4]));
        assert!(close(&apply(&ja, BellState::S), &[ZERO; 4]));
        assert!(close(&apply(&js, BellState::S), &scaled(BellState::G, r2)));
        assert!(close(&apply(&js, BellState::E), &scaled(BellState::S, r2)));
        // Tensor-product signs: c1|10> = |00>, c2|01> = |00>.
        assert!(close(&apply(&ja, BellState::A), &scaled(BellState::G, -r2)));
        assert!(close(&apply(&ja, BellState::E), &scaled(BellState::A, r2)));
    }

    #[test]
    fn collective_number_identity() {
        let (js, ja) = collective_ops();
        let lhs = &(&js.dagger() * &js) + &(&ja.dagger() * &ja);
        let rhs = excitation_number().scale_re(2.0);
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        let b = bell_basis();
        assert!((&b.dagger() * &b).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn rates_from_betas_examples() {
        let s = rates_from_betas(0.0, 0.0, 1.0).unwrap();
        assert_eq!((s.gamma_minus_a, s.gamma_minus_s), (1.0, 1.0));
        let s = rates_from_betas(0.0, 2f64.ln(), 1.0).unwrap();
        assert!((s.gamma_minus_s - 2.0).abs() < 1e-15);
        let s = rates_from_betas(-(3f64.ln()), 0.0, 3.0).unwrap();
        assert!((s.gamma_minus_a - 1.0).abs() < 1e-15);
        assert!(s.gamma_plus > s.gamma_minus_a);
        assert!(matches!(
            rates_from_betas(f64::INFINITY, 0.0, 1.0),
            Err(Error::NonFiniteBeta(_))
        ));
    }

    #[test]
    fn betas_round_trip_and_sentinel() {
        let spec = rates_from_betas(-1.25, 3.5, 0.7).unwrap();
        let (ba, bs) = betas_from_rates(&spec);
        assert!((ba + 1.25).abs() < 1e-12 && (bs - 3.5).abs() < 1e-12);
        let dark = DiamondSpec::new(1.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(betas_from_rates(&dark).0, f64::NEG_INFINITY);
        let eq = DiamondSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(betas_from_rates(&eq), (0.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        assert!(DiamondSpec::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(DiamondSpec::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(DiamondSpec::new(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let ss = diamond_steady_state(&rates_from_betas(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(
            ss.rho
                .max_abs_diff(&ComplexMatrix::identity(4).scale_re(0.25))
                < 1e-14
        );
    }

    #[test]
    fn dark_hot_bath_concentrates_on_antisymmetric_state() {
        let spec = DiamondSpec::new(1.0, 1.0, 50.0, 0.0).unwrap();
        let rho = diamond_steady_state(&spec).unwrap().rho;
        let b = bell_basis();
        let pops: Vec<f64> = (0..4)
            .map(|k| rho.expectation(&b.column(k), &b.column(k)).re)
            .collect();
        let a = pops[BellState::A as usize];
        for (k, p) in pops.iter().enumerate() {
            if k != BellState::A as usize {
                assert!(a > *p, "A population {a} vs {p} at {k}");
            }
        }
    }

    #[test]
    fn steady_state_has_x_zero_pattern() {
        let rho = diamond_steady_state(&rates_from_betas(-1.0, 2.5, 1.0).unwrap())
            .unwrap()
            .rho;
        let allowed = [(0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (2, 1)];
        for i in 0..4 {
            for j in 0..4 {
                if !allowed.contains(&(i, j)) {
                    assert!(rho[(i, j)].norm() < 1e-14, "({i},{j}) = {}", rho[(i, j)]);
                }
            }
        }
        assert!(rho[(1, 2)].norm() > 1e-3);
    }

    #[test]
    fn analytic_equal_betas_vanish() {
        for b in [-7.0, -1.0, 0.0, 0.3, 12.0] {
            assert_eq!(analytic_concurrence(b, b), 0.0);
        }
    }

    #[test]
    fn analytic_thermal_limit() {
        assert!((analytic_concurrence(0.0, 30.0) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn analytic_overflow_branch_matches_limits() {
        // β_S -> ∞ at fixed β_A gives 1/(2 + e^{β_A}).
        let c = analytic_concurrence_detail(0.0, 800.0);
        assert!(c.overflow_handled);
        assert!((c.value - 1.0 / 3.0).abs() < 1e-12);
        let c = analytic_concurrence_detail(-3.0, 1000.0);
        assert!((c.value - 1.0 / (2.0 + (-3f64).exp())).abs() < 1e-12);
        // Continuity across the switch.
        let below = analytic_concurrence(-1.0, OVERFLOW_BETA - 1e-9);
        let above = analytic_concurrence(-1.0, OVERFLOW_BETA + 1e-9);
        assert!((below - above).abs() < 1e-12);
        assert_eq!(analytic_concurrence(900.0, 800.0), 0.0);
        assert!(analytic_concurrence(f64::NEG_INFINITY, 40.0) > 0.4999);
    }

    #[test]
    fn numeric_matches_analytic_at_examples() {
        for (ba, bs) in [
            (0.0, 0.0),
            (0.0, 4.0),
            (-2.0, 3.0),
            (-4.0, 4.0),
            (3.0, -2.5),
        ] {
            let (a, n) = concurrence_vs_numeric(ba, bs).unwrap();
            assert!((a - n).abs() < 1e-8, "({ba}, {bs}): {a} vs {n}");
        }
    }
}
