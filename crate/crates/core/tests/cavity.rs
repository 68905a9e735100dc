use qtherm::cavity::{
    adiabatic_map, cavity_steady_state, converged_steady_state, qubits_reduced_state, CavitySpec,
    DEFAULT_C_TOL, N_MAX_CAP,
};
use qtherm::concurrence::concurrence;

const G: f64 = 1e-3;

fn full(spec: &CavitySpec) -> f64 {
    converged_steady_state(spec, DEFAULT_C_TOL)
        .unwrap()
        .concurrence
}

#[test]
fn effective_model_tracks_full_model_above_kappa_g_one() {
    for k in [3.0, 10.0, 30.0] {
        let spec = CavitySpec::resonant(G, k * G, 2e-4 * G, 0.0, 2);
        let c_full = full(&spec);
        let c_eff = adiabatic_map(&spec).unwrap().concurrence();
        assert!(
            (c_full - c_eff).abs() < 0.02,
            "kappa/g = {k}: {c_full} vs {c_eff}"
        );
    }
}

#[test]
fn effective_limit_approaches_one_half() {
    let spec = CavitySpec::resonant(G, 10.0 * G, 2e-5 * G, 0.0, 2);
    let c = adiabatic_map(&spec).unwrap().concurrence();
    assert!((c - 0.5).abs() < 0.01, "{c}");
}

#[test]
fn adiabatic_elimination_breaks_down_at_small_kappa() {
    let spec = CavitySpec::resonant(G, 0.05 * G, 2e-4 * G, 0.0, 2);
    let c_full = full(&spec);
    let c_eff = adiabatic_map(&spec).unwrap().concurrence();
    assert!(c_full < c_eff - 0.05, "{c_full} vs {c_eff}");
}

#[test]
fn subradiant_window_closes_at_both_ends() {
    let at = |k: f64| full(&CavitySpec::resonant(G, k * G, 5e-3 * G, 1e-3 * G, 2));
    assert!(at(2.0) > 0.3);
    assert_eq!(at(0.01), 0.0);
    assert_eq!(at(1000.0), 0.0);
}

#[test]
fn strong_pump_needs_more_photons_but_converges() {
    let spec = CavitySpec::resonant(G, 2.0 * G, 5e-3 * G, 1e-3 * G, 2);
    let c = converged_steady_state(&spec, DEFAULT_C_TOL).unwrap();
    assert!(c.n_used <= N_MAX_CAP);
    let top = cavity_steady_state(&spec.with_n_max(N_MAX_CAP)).unwrap();
    let c_top = concurrence(&qubits_reduced_state(&top.rho, N_MAX_CAP).unwrap()).unwrap();
    assert!(
        (c_top - c.concurrence).abs() < DEFAULT_C_TOL,
        "{c_top} vs {}",
        c.concurrence
    );
}

#[test]
fn reduced_states_are_valid_densities() {
    let spec = CavitySpec::resonant(G, 2.0 * G, 5e-3 * G, 1e-3 * G, 8);
    let ss = cavity_steady_state(&spec).unwrap();
    let q = qubits_reduced_state(&ss.rho, 8).unwrap();
    assert!((q.rho().trace().re - 1.0).abs() < 1e-12);
    assert!(ss.residual < 1e-9 * 2.0 * G);
}

#[test]
fn dephasing_reduces_entanglement_but_not_to_zero() {
    let base = CavitySpec::resonant(G, 2.332 * G, 5.4239e-3 * G, 1e-3 * G, 2);
    let c0 = full(&base);
    let noisy = CavitySpec {
        gamma_z: base.p,
        ..base
    };
    let c1 = full(&noisy);
    assert!(c1 < c0 && c1 > 0.1 * c0, "{c1} vs {c0}");
}
