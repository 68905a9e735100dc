//! Two emitters in a lossy cavity (Tavis–Cummings) and the map onto the
//! effective collective-bath model.
//!
//! Basis index `(q1 * 2 + q2) * (n_max + 1) + n`, with `q_i ∈ {0, 1}` the
//! qubit levels and `n` the photon number. Energies are in units where the
//! qubit frequency is typically 1.

use crate::concurrence::{concurrence, TwoQubitState};
use crate::diamond::{analytic_concurrence, qubit_lowering};
use crate::error::{Error, Result};
use crate::linalg::{kron_all, partial_trace, ComplexMatrix};
use crate::lindblad::{steady_state_sectored, Direction, LindbladChannel, OpenSystem, SteadyState};

pub const LABEL_QUBIT1: &str = "qubit1";
pub const LABEL_QUBIT2: &str = "qubit2";
pub const LABEL_CAVITY: &str = "cavity";
pub const LABEL_DEPHASING1: &str = "dephasing1";
pub const LABEL_DEPHASING2: &str = "dephasing2";

/// Coupling-to-frequency ratio above which the rotating-wave form is suspect.
pub const RWA_LIMIT: f64 = 0.01;
/// Largest Fock cutoff used by [`converged_steady_state`].
pub const N_MAX_CAP: usize = 15;
pub const DEFAULT_C_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavitySpec {
    pub omega0: f64,
    pub omega_cav: f64,
    pub g: f64,
    pub kappa: f64,
    /// Incoherent pump per qubit.
    pub p: f64,
    /// Qubit relaxation.
    pub gamma: f64,
    /// Pure dephasing per qubit.
    pub gamma_z: f64,
    /// Qubit frequencies are `omega0 + delta` and `omega0 - delta`.
    pub delta: f64,
    /// Incoherent cavity pump.
    pub p_c: f64,
    pub n_max: usize,
}

impl CavitySpec {
    /// Resonant cavity with ω₀ = 1 and no dephasing, detuning or cavity pump.
    pub fn resonant(g: f64, kappa: f64, p: f64, gamma: f64, n_max: usize) -> Self {
        Self {
            omega0: 1.0,
            omega_cav: 1.0,
            g,
            kappa,
            p,
            gamma,
            gamma_z: 0.0,
            delta: 0.0,
            p_c: 0.0,
            n_max,
        }
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }

    pub fn dimension(&self) -> usize {
        4 * (self.n_max + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega0", self.omega0),
            ("g", self.g),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        let non_negative = [
            ("p", self.p),
            ("gamma", self.gamma),
            ("gamma_z", self.gamma_z),
            ("p_c", self.p_c),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [("omega_cav", self.omega_cav), ("delta", self.delta)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        if self.g / self.omega0 > RWA_LIMIT {
            log::warn!(
                "g/omega0 = {:.3e} exceeds {RWA_LIMIT}; the rotating-wave model may not apply",
                self.g / self.omega0
            );
        }
        Ok(())
    }
}

/// Truncated annihilation operator on `n_max + 1` Fock states.
pub fn annihilation(n_max: usize) -> ComplexMatrix {
    let d = n_max + 1;
    let mut a = ComplexMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = (n as f64).sqrt().into();
    }
    a
}

/// `(c1, c2, a)` on the full space.
pub fn mode_operators(n_max: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let q = ComplexMatrix::identity(2);
    let f = ComplexMatrix::identity(n_max + 1);
    let sm = qubit_lowering();
    (
        kron_all(&[&sm, &q, &f]),
        kron_all(&[&q, &sm, &f]),
        kron_all(&[&q, &q, &annihilation(n_max)]),
    )
}

/// Total excitation number `q1 + q2 + n` of every basis state.
pub fn excitation_charges(n_max: usize) -> Vec<i64> {
    let nf = n_max + 1;
    (0..4 * nf)
        .map(|idx| {
            let q = idx / nf;
            ((q >> 1) + (q & 1) + idx % nf) as i64
        })
        .collect()
}

/// Hamiltonian and dissipators of the cavity model. Channels with zero rate
/// are left out.
///
/// Dephasing enters as a neutral channel with jump `σᶻ` and rate `γ_z`,
/// which generates exactly `γ_z (σᶻ ρ σᶻ − ρ)`.
pub fn build_tavis_cummings(spec: &CavitySpec) -> Result<OpenSystem> {
    spec.validate()?;
    let (c1, c2, a) = mode_operators(spec.n_max);
    let n1 = &c1.dagger() * &c1;
    let n2 = &c2.dagger() * &c2;
    let na = &a.dagger() * &a;
    let mut h = n1.scale_re(spec.omega0 + spec.delta);
    h += &n2.scale_re(spec.omega0 - spec.delta);
    h += &na.scale_re(spec.omega_cav);
    for c in [&c1, &c2] {
        h += &(&c.dagger() * &a).scale_re(spec.g);
        h += &(c * &a.dagger()).scale_re(spec.g);
    }
    let h = h.hermitian_part();

    let d = spec.dimension();
    let id = ComplexMatrix::identity(d);
    let sz1 = &id - &n1.scale_re(2.0);
    let sz2 = &id - &n2.scale_re(2.0);
    let candidates = [
        (LABEL_QUBIT1, Direction::Absorption, c1.dagger(), spec.p),
        (LABEL_QUBIT1, Direction::Emission, c1, spec.gamma),
        (LABEL_QUBIT2, Direction::Absorption, c2.dagger(), spec.p),
        (LABEL_QUBIT2, Direction::Emission, c2, spec.gamma),
        (LABEL_CAVITY, Direction::Emission, a.clone(), spec.kappa),
        (LABEL_CAVITY, Direction::Absorption, a.dagger(), spec.p_c),
        (LABEL_DEPHASING1, Direction::Neutral, sz1, spec.gamma_z),
        (LABEL_DEPHASING2, Direction::Neutral, sz2, spec.gamma_z),
    ];
    let channels = candidates
        .into_iter()
        .filter(|c| c.3 > 0.0)
        .map(|(label, dir, op, rate)| LindbladChannel::new(label, dir, op, rate))
        .collect::<Result<Vec<_>>>()?;
    OpenSystem::new(h, channels)
}

/// Steady state at the spec's own `n_max`, solved within the
/// excitation-number sectors.
pub fn cavity_steady_state(spec: &CavitySpec) -> Result<SteadyState> {
    let sys = build_tavis_cummings(spec)?;
    steady_state_sectored(&sys, &excitation_charges(spec.n_max))
}

/// Two-qubit state after tracing out the cavity.
pub fn qubits_reduced_state(rho_full: &ComplexMatrix, n_max: usize) -> Result<TwoQubitState> {
    let d = 4 * (n_max + 1);
    if rho_full.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "state is {}x{}, expected {d}x{d} for n_max = {n_max}",
            rho_full.rows(),
            rho_full.cols()
        )));
    }
    let reduced = partial_trace(rho_full, &[2, 2, n_max + 1], &[0, 1])?;
    TwoQubitState::new(reduced.hermitian_part())
}

/// Effective collective-bath parameters obtained by eliminating the cavity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappedEffectiveParams {
    /// `Γ = 4 g² / κ`
    pub big_gamma: f64,
    /// `p / 2`
    pub gamma_plus: f64,
    /// `γ / 2`
    pub gamma_minus_a: f64,
    /// `Γ + γ / 2`
    pub gamma_minus_s: f64,
    /// `ln(γ / p)`, `-inf` when γ = 0.
    pub beta_a: f64,
    /// `ln((γ + 2Γ) / p)`
    pub beta_s: f64,
    /// κ/g > 1, where the elimination is justified.
    pub valid: bool,
}

impl MappedEffectiveParams {
    /// Closed-form concurrence of the effective model.
    pub fn concurrence(&self) -> f64 {
        analytic_concurrence(self.beta_a, self.beta_s)
    }
}

/// `(Γ⁺, Γ⁻_A, Γ⁻_S)`; defined for any pump rate.
pub fn effective_rates(spec: &CavitySpec) -> (f64, f64, f64) {
    let big_gamma = 4.0 * spec.g * spec.g / spec.kappa;
    (spec.p / 2.0, spec.gamma / 2.0, big_gamma + spec.gamma / 2.0)
}

pub fn adiabatic_map(spec: &CavitySpec) -> Result<MappedEffectiveParams> {
    spec.validate()?;
    if spec.p == 0.0 {
        return Err(Error::MapUndefined);
    }
    let (gamma_plus, gamma_minus_a, gamma_minus_s) = effective_rates(spec);
    let big_gamma = gamma_minus_s - gamma_minus_a;
    let beta_a = if spec.gamma == 0.0 {
        f64::NEG_INFINITY
    } else {
        (spec.gamma / spec.p).ln()
    };
    let beta_s = ((spec.gamma + 2.0 * big_gamma) / spec.p).ln();
    Ok(MappedEffectiveParams {
        big_gamma,
        gamma_plus,
        gamma_minus_a,
        gamma_minus_s,
        beta_a,
        beta_s,
        valid: spec.kappa / spec.g > 1.0,
    })
}

/// Result of the Fock-cutoff ladder.
#[derive(Clone, Debug)]
pub struct ConvergedState {
    pub steady: SteadyState,
    pub n_used: usize,
    pub qubits: TwoQubitState,
    pub concurrence: f64,
    /// `(n_max, concurrence)` for every level solved.
    pub ladder: Vec<(usize, f64)>,
}

/// Cutoffs tried by [`converged_steady_state`]: 2, 4, …, 14, then the cap.
pub fn cutoff_ladder() -> Vec<usize> {
    let mut levels: Vec<usize> = (1..)
        .map(|k| 2 * k)
        .take_while(|&n| n < N_MAX_CAP)
        .collect();
    levels.push(N_MAX_CAP);
    levels
}

/// Solves at increasing cutoffs until the reduced-state concurrence changes
/// by less than `c_tol` between consecutive levels. The spec's own `n_max`
/// is ignored.
pub fn converged_steady_state(spec: &CavitySpec, c_tol: f64) -> Result<ConvergedState> {
    if !(c_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c_tol must be > 0, got {c_tol}"
        )));
    }
    let mut ladder = Vec::new();
    let mut previous: Option<f64> = None;
    for n_max in cutoff_ladder() {
        let level = spec.with_n_max(n_max);
        let steady = cavity_steady_state(&level)?;
        let qubits = qubits_reduced_state(&steady.rho, n_max)?;
        let c = concurrence(&qubits)?;
        ladder.push((n_max, c));
        if let Some(prev) = previous {
            if (c - prev).abs() < c_tol {
                return Ok(ConvergedState {
                    steady,
                    n_used: n_max,
                    qubits,
                    concurrence: c,
                    ladder,
                });
            }
        }
        previous = Some(c);
    }
    let last = ladder[ladder.len() - 1].1;
    let prev = ladder[ladder.len() - 2].1;
    Err(Error::NoConvergence {
        n_max: N_MAX_CAP,
        last,
        previous: prev,
    })
}
