//! Lindblad dissipators, Liouvillian application, row-major vectorization and
//! the trace-replacement steady-state solve.
//!
//! Every channel contributes `(rate / 2) * D[L](rho)` with
//! `D[L](rho) = 2 L rho L† - {L†L, rho}`, and the coherent part is
//! `i [rho, H]`. Vectorization maps `|i><j|` to index `i * d + j`, so
//! `vec(A rho B) = (A ⊗ Bᵀ) vec(rho)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, ComplexMatrix, Lu, C64, I, ONE, ZERO};

/// Which way a channel moves energy relative to the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Emission,
    Absorption,
    Neutral,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Emission => "emission",
            Direction::Absorption => "absorption",
            Direction::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct LindbladChannel {
    pub label: String,
    pub direction: Direction,
    pub jump: ComplexMatrix,
    pub rate: f64,
}

impl LindbladChannel {
    pub fn new(
        label: impl Into<String>,
        direction: Direction,
        jump: ComplexMatrix,
        rate: f64,
    ) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "channel rate must be finite and >= 0, got {rate}"
            )));
        }
        if !jump.is_square() {
            return Err(Error::Dimension(format!(
                "jump operator is {}x{}",
                jump.rows(),
                jump.cols()
            )));
        }
        Ok(Self {
            label: label.into(),
            direction,
            jump,
            rate,
        })
    }
}

/// Hamiltonian plus labeled dissipative channels.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    hamiltonian: ComplexMatrix,
    channels: Vec<LindbladChannel>,
}

impl OpenSystem {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<LindbladChannel>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::Dimension(format!(
                "Hamiltonian is {}x{}",
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        let deviation = hamiltonian.hermiticity_defect();
        if deviation > 1e-10 * hamiltonian.norm_max().max(1.0) {
            return Err(Error::Hermiticity { deviation });
        }
        let d = hamiltonian.rows();
        if let Some(ch) = channels.iter().find(|c| c.jump.rows() != d) {
            return Err(Error::Dimension(format!(
                "channel `{}` has dimension {}, system has {d}",
                ch.label,
                ch.jump.rows()
            )));
        }
        Ok(Self {
            hamiltonian,
            channels,
        })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[LindbladChannel] {
        &self.channels
    }

    pub fn dimension(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn max_rate(&self) -> f64 {
        self.channels.iter().map(|c| c.rate).fold(0.0, f64::max)
    }

    /// Distinct channel labels in first-appearance order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.channels {
            if !out.contains(&c.label.as_str()) {
                out.push(&c.label);
            }
        }
        out
    }

    fn check_state(&self, rho: &ComplexMatrix) -> Result<()> {
        let d = self.dimension();
        if rho.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "state is {}x{}, system dimension {d}",
                rho.rows(),
                rho.cols()
            )));
        }
        Ok(())
    }
}

/// `2 o rho o† - o†o rho - rho o†o`
pub fn dissipator(o: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !o.is_square() || !rho.is_square() || o.rows() != rho.rows() {
        return Err(Error::Dimension(format!(
            "dissipator of {}x{} operator on {}x{} state",
            o.rows(),
            o.cols(),
            rho.rows(),
            rho.cols()
        )));
    }
    let od = o.dagger();
    let odo = &od * o;
    let mut out = (&(o * rho) * &od).scale_re(2.0);
    out -= &(&odo * rho);
    out -= &(rho * &odo);
    Ok(out)
}

/// Sum of `(rate/2) D[jump](rho)` over the channels selected by `keep`.
pub fn apply_channels(
    sys: &OpenSystem,
    rho: &ComplexMatrix,
    mut keep: impl FnMut(&LindbladChannel) -> bool,
) -> Result<ComplexMatrix> {
    sys.check_state(rho)?;
    let d = sys.dimension();
    let mut out = ComplexMatrix::zeros(d, d);
    for ch in sys.channels.iter().filter(|c| keep(c)) {
        if ch.rate == 0.0 {
            continue;
        }
        out += &dissipator(&ch.jump, rho)?.scale_re(ch.rate / 2.0);
    }
    Ok(out)
}

/// `i [rho, H] + Σ (rate/2) D[jump](rho)`
pub fn apply_liouvillian(sys: &OpenSystem, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = apply_channels(sys, rho, |_| true)?;
    out += &rho.commutator(&sys.hamiltonian).scale(I);
    Ok(out)
}

/// Row-major vectorization `|i><j| -> i * d + j`.
pub fn vectorize(rho: &ComplexMatrix) -> Vec<C64> {
    rho.as_slice().to_vec()
}

pub fn unvectorize(v: &[C64], d: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::new(d, d, v.to_vec())
}

/// Dense d²×d² Liouvillian built from Kronecker products.
pub fn superoperator(sys: &OpenSystem) -> ComplexMatrix {
    let d = sys.dimension();
    let id = ComplexMatrix::identity(d);
    let h = &sys.hamiltonian;
    // i rho H - i H rho  ->  -i (H ⊗ I) + i (I ⊗ Hᵀ)
    let mut f = (&kron(&id, &h.transpose()) - &kron(h, &id)).scale(I);
    for ch in &sys.channels {
        if ch.rate == 0.0 {
            continue;
        }
        let l = &ch.jump;
        let ldl = &l.dagger() * l;
        let mut term = kron(l, &l.conj()).scale_re(2.0);
        term -= &kron(&ldl, &id);
        term -= &kron(&id, &ldl.transpose());
        f += &term.scale_re(ch.rate / 2.0);
    }
    f
}

/// Liouvillian restricted to the vectorized coordinates `pairs` (each an
/// `(i, j)` for `|i><j|`), computed entry by entry without Kronecker products.
pub fn restricted_superoperator(sys: &OpenSystem, pairs: &[(usize, usize)]) -> ComplexMatrix {
    let h = &sys.hamiltonian;
    let active: Vec<(&LindbladChannel, ComplexMatrix)> = sys
        .channels
        .iter()
        .filter(|c| c.rate > 0.0)
        .map(|c| (c, &c.jump.dagger() * &c.jump))
        .collect();
    let m = pairs.len();
    let mut f = ComplexMatrix::zeros(m, m);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for (col, &(k, l)) in pairs.iter().enumerate() {
            let mut acc = ZERO;
            if j == l {
                acc -= I * h[(i, k)];
            }
            if i == k {
                acc += I * h[(l, j)];
            }
            for (ch, ldl) in &active {
                let jump = &ch.jump;
                let mut t = jump[(i, k)] * jump[(j, l)].conj() * 2.0;
                if j == l {
                    t -= ldl[(i, k)];
                }
                if i == k {
                    t -= ldl[(l, j)];
                }
                acc += t * (ch.rate / 2.0);
            }
            f[(row, col)] = acc;
        }
    }
    f
}

/// Which linear solve produced a steady state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Full d² unknowns.
    TraceReplacement,
    /// Only the coherences between basis states of equal conserved charge.
    ChargeSector,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::TraceReplacement => "trace-replacement",
            SolveMethod::ChargeSector => "charge-sector",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverInfo {
    pub method: SolveMethod,
    pub dimension: usize,
    pub unknowns: usize,
    /// Largest |eigenvalue| removed by PSD clipping.
    pub clipped: f64,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: ComplexMatrix,
    /// Frobenius norm of L[rho].
    pub residual: f64,
    pub solver: SolverInfo,
}

/// Negative eigenvalues down to this are treated as numerical noise.
pub const PSD_CLIP_TOL: f64 = 1e-9;
const UNIQUENESS_TOL: f64 = 1e-8;
const RESIDUAL_FACTOR: f64 = 1e-9;

/// Exact steady state from the full vectorized Liouvillian.
pub fn steady_state(sys: &OpenSystem) -> Result<SteadyState> {
    let d = sys.dimension();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    let f = superoperator(sys);
    solve_on_pairs(sys, f, &pairs, SolveMethod::TraceReplacement)
}

/// Steady state assuming it is block diagonal in a conserved charge.
///
/// `charges[i]` labels basis state `i`. The Hamiltonian must not mix
/// charges and every jump operator must shift the charge by a fixed amount,
/// so the Liouvillian maps block-diagonal operators to block-diagonal
/// operators and the solve can be restricted to those coherences.
pub fn steady_state_sectored(sys: &OpenSystem, charges: &[i64]) -> Result<SteadyState> {
    let d = sys.dimension();
    if charges.len() != d {
        return Err(Error::Dimension(format!(
            "{} charges for a {d}-dimensional system",
            charges.len()
        )));
    }
    check_charge_structure(sys, charges)?;
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|&(i, j)| charges[i] == charges[j])
        .collect();
    let f = restricted_superoperator(sys, &pairs);
    solve_on_pairs(sys, f, &pairs, SolveMethod::ChargeSector)
}

fn check_charge_structure(sys: &OpenSystem, charges: &[i64]) -> Result<()> {
    let d = sys.dimension();
    let tol = 1e-14;
    let h = sys.hamiltonian();
    for i in 0..d {
        for k in 0..d {
            if h[(i, k)].norm() > tol && charges[i] != charges[k] {
                return Err(Error::InvalidParameter(format!(
                    "Hamiltonian couples charge {} and {}",
                    charges[i], charges[k]
                )));
            }
        }
    }
    for ch in sys.channels() {
        let mut shift = None;
        for i in 0..d {
            for k in 0..d {
                if ch.jump[(i, k)].norm() > tol {
                    let s = charges[i] - charges[k];
                    match shift {
                        None => shift = Some(s),
                        Some(prev) if prev != s => {
                            return Err(Error::InvalidParameter(format!(
                                "channel `{}` does not shift the charge uniformly",
                                ch.label
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(())
}

fn solve_on_pairs(
    sys: &OpenSystem,
    f: ComplexMatrix,
    pairs: &[(usize, usize)],
    method: SolveMethod,
) -> Result<SteadyState> {
    let d = sys.dimension();
    let diag_rows: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| i == j)
        .map(|(k, _)| k)
        .collect();
    let first = diag_rows[0];
    let last = *diag_rows.last().expect("at least one diagonal coordinate");

    let x = trace_replaced_solve(&f, &diag_rows, first)?;
    if last != first {
        let probe = trace_replaced_solve(&f, &diag_rows, last)?;
        let difference = x
            .iter()
            .zip(&probe)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if difference > UNIQUENESS_TOL {
            return Err(Error::DegenerateSteadyState { difference });
        }
    }

    let mut rho = ComplexMatrix::zeros(d, d);
    for (value, &(i, j)) in x.iter().zip(pairs) {
        rho[(i, j)] = *value;
    }
    let rho = rho.hermitian_part();
    let (rho, clipped) = clip_to_density(rho)?;

    let residual = apply_liouvillian(sys, &rho)?.norm_fro();
    let bound = RESIDUAL_FACTOR * sys.max_rate();
    if residual > bound {
        return Err(Error::Residual { residual, bound });
    }
    Ok(SteadyState {
        rho,
        residual,
        solver: SolverInfo {
            method,
            dimension: d,
            unknowns: pairs.len(),
            clipped,
        },
    })
}

// Replace row `row` by the trace functional and solve against e_row, with
// one step of iterative refinement.
fn trace_replaced_solve(f: &ComplexMatrix, diag_rows: &[usize], row: usize) -> Result<Vec<C64>> {
    let m = f.rows();
    let mut a = f.clone();
    for col in 0..m {
        a[(row, col)] = ZERO;
    }
    for &k in diag_rows {
        a[(row, k)] = ONE;
    }
    let mut b = vec![ZERO; m];
    b[row] = ONE;
    let lu = Lu::factor(&a)?;
    let mut x = lu.solve_vec(&b);
    let ax = a.mul_vec(&x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let dx = lu.solve_vec(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    Ok(x)
}

/// Normalizes a Hermitian matrix to unit trace, removing negative
/// eigenvalues in `[-PSD_CLIP_TOL, 0)` by rank-one corrections.
pub fn clip_to_density(rho: ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let tr = rho.trace().re;
    if !(tr.abs() > 0.0) {
        return Err(Error::InvalidParameter("state has zero trace".into()));
    }
    let mut rho = rho.scale_re(1.0 / tr);
    let spec = eig_hermitian(&rho)?;
    let vectors = spec
        .eigenvectors
        .as_ref()
        .expect("hermitian spectra carry vectors");
    let mut clipped = 0.0f64;
    for (k, lam) in spec.eigenvalues.iter().enumerate() {
        let lam = lam.re;
        if lam >= 0.0 {
            continue;
        }
        if lam < -PSD_CLIP_TOL {
            return Err(Error::NotPositive { eigenvalue: lam });
        }
        let v = vectors.column(k);
        rho -= &ComplexMatrix::outer(&v, &v).scale_re(lam);
        clipped = clipped.max(-lam);
    }
    if clipped > 0.0 {
        let tr = rho.trace().re;
        rho = rho.scale_re(1.0 / tr);
    }
    Ok((rho, clipped))
}
