//! Steady-state heat currents and entropy production.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::lindblad::{apply_channels, Direction, OpenSystem};

/// Imaginary parts of `Tr{H L_i(rho)}` above this indicate a non-Hermitian input.
const IMAG_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ThermoReport {
    /// Energy per unit time flowing from each heat bath into the system.
    pub heat_currents: BTreeMap<String, f64>,
    /// `-Σ β_i Q̇_i`
    pub entropy_rate: f64,
    /// `entropy_rate / rate_unit`
    pub entropy_rate_normalized: f64,
}

impl ThermoReport {
    pub fn total_current(&self) -> f64 {
        self.heat_currents.values().sum()
    }
}

/// `Tr{H Σ_{channels with label} (rate/2) D[jump](rho)}`.
pub fn heat_current(sys: &OpenSystem, rho: &ComplexMatrix, label: &str) -> Result<f64> {
    if !sys.labels().contains(&label) {
        return Err(Error::UnknownBath(label.to_string()));
    }
    let l = apply_channels(sys, rho, |c| c.label == label)?;
    let q = sys.hamiltonian().trace_product(&l);
    if q.im.abs() > IMAG_TOL * (1.0 + q.re.abs()) {
        log::warn!("heat current for `{label}` has imaginary part {:.3e}", q.im);
    }
    Ok(q.re)
}

/// Labels carrying at least one absorption or emission channel.
pub fn heat_bath_labels(sys: &OpenSystem) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in sys.channels() {
        if c.direction != Direction::Neutral && !out.contains(&c.label) {
            out.push(c.label.clone());
        }
    }
    out
}

/// Heat currents of every heat bath and `-Σ β_i Q̇_i`. `betas` holds inverse
/// temperatures in units of 1/energy; `rate_unit` is the rate used for the
/// normalized entry.
pub fn entropy_rate(
    sys: &OpenSystem,
    rho: &ComplexMatrix,
    betas: &BTreeMap<String, f64>,
    rate_unit: f64,
) -> Result<ThermoReport> {
    if !(rate_unit > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate unit must be > 0, got {rate_unit}"
        )));
    }
    let mut heat_currents = BTreeMap::new();
    let mut sdot = 0.0;
    for label in heat_bath_labels(sys) {
        let beta = *betas
            .get(&label)
            .ok_or_else(|| Error::MissingBeta(label.clone()))?;
        let q = heat_current(sys, rho, &label)?;
        // An infinitely cold bath with no current contributes nothing.
        if q != 0.0 {
            sdot -= beta * q;
        }
        heat_currents.insert(label, q);
    }
    Ok(ThermoReport {
        heat_currents,
        entropy_rate: sdot,
        entropy_rate_normalized: sdot / rate_unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diamond::{bath_betas, build_diamond, rates_from_betas, LABEL_A, LABEL_S};
    use crate::lindblad::{steady_state, LindbladChannel};

    fn report(beta_a: f64, beta_s: f64) -> ThermoReport {
        let spec = rates_from_betas(beta_a, beta_s, 1.0).unwrap();
        let sys = build_diamond(&spec);
        let rho = steady_state(&sys).unwrap().rho;
        entropy_rate(&sys, &rho, &bath_betas(&spec), spec.gamma_plus).unwrap()
    }

    #[test]
    fn equilibrium_has_no_currents() {
        for b in [-3.0, 0.0, 3.0] {
            let r = report(b, b);
            for q in r.heat_currents.values() {
                assert!(q.abs() < 1e-10, "beta {b}: {q}");
            }
            assert!(r.entropy_rate.abs() < 1e-10);
        }
    }

    #[test]
    fn inverted_bath_feeds_the_system() {
        let r = report(-2.0, 3.0);
        let qa = r.heat_currents[LABEL_A];
        let qs = r.heat_currents[LABEL_S];
        assert!(qa > 0.0 && qs < 0.0);
        assert!(r.total_current().abs() < 1e-12);
        assert!(r.entropy_rate > 0.0);
        assert!((r.entropy_rate - (2.0 * qa - 3.0 * qs)).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_missing_labels() {
        let spec = rates_from_betas(0.0, 1.0, 1.0).unwrap();
        let sys = build_diamond(&spec);
        let rho = steady_state(&sys).unwrap().rho;
        assert!(matches!(
            heat_current(&sys, &rho, "cavity"),
            Err(Error::UnknownBath(_))
        ));
        let partial = BTreeMap::from([(LABEL_A.to_string(), 0.0)]);
        assert!(matches!(
            entropy_rate(&sys, &rho, &partial, 1.0),
            Err(Error::MissingBeta(l)) if l == LABEL_S
        ));
    }

    #[test]
    fn neutral_channels_need_no_beta() {
        let sz = ComplexMatrix::real_diagonal(&[1.0, -1.0]);
        let sm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let sys = OpenSystem::new(
            ComplexMatrix::real_diagonal(&[0.0, 1.0]),
            vec![
                LindbladChannel::new("z", Direction::Neutral, sz, 0.3).unwrap(),
                LindbladChannel::new("b", Direction::Emission, sm.clone(), 1.0).unwrap(),
                LindbladChannel::new("b", Direction::Absorption, sm.dagger(), 0.5).unwrap(),
            ],
        )
        .unwrap();
        let rho = steady_state(&sys).unwrap().rho;
        let betas = BTreeMap::from([("b".to_string(), 2f64.ln())]);
        let r = entropy_rate(&sys, &rho, &betas, 1.0).unwrap();
        assert_eq!(r.heat_currents.len(), 1);
        assert!(r.heat_currents["b"].abs() < 1e-14);
    }
}
