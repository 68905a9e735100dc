//! Quantum-jump unraveling and stochastic entropy production.
//!
//! Two samplers are provided. When every jump operator maps the states of a
//! chosen basis onto single basis states and the no-jump evolution is
//! diagonal there, trajectories reduce to a classical Markov jump process
//! and are sampled exactly with competing exponential waiting times.
//! Otherwise a fixed-step Kraus sampler propagates the conditional state.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{eig_hermitian, hermitian_function, ComplexMatrix, C64, I};
use crate::lindblad::{Direction, OpenSystem};

/// Largest `dt * max rate` accepted by [`kraus_set`].
pub const MAX_RATE_DT: f64 = 0.05;
/// Relative size below which matrix elements count as structural zeros.
const STRUCTURE_TOL: f64 = 1e-12;
/// Steady-state coherences in the sampling basis above this are logged.
const COHERENCE_WARN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausJump {
    pub label: String,
    pub direction: Direction,
    pub op: ComplexMatrix,
}

/// First-order Kraus decomposition of one time step.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub dt: f64,
    pub no_jump: ComplexMatrix,
    pub jumps: Vec<KrausJump>,
    /// `K̃₀ = K₀†`, filled by [`reversed_kraus`].
    pub reversed_no_jump: Option<ComplexMatrix>,
    /// One entry per forward jump, same order.
    pub reversed: Vec<KrausJump>,
    /// `‖K₀†K₀ + Σ K†K − 1‖_max`
    pub completeness_defect: f64,
}

impl KrausSet {
    /// `completeness_defect / dt²`, bounded for a first-order unraveling.
    pub fn completeness_constant(&self) -> f64 {
        self.completeness_defect / (self.dt * self.dt)
    }
}

/// `K = √(rate dt) L` per channel and `K₀ = 1 − dt (iH + ½ Σ rate L†L)`.
pub fn kraus_set(sys: &OpenSystem, dt: f64) -> Result<KrausSet> {
    let product = dt * sys.max_rate();
    if !(dt > 0.0) || !dt.is_finite() || product >= MAX_RATE_DT {
        return Err(Error::Timestep { dt, product });
    }
    let d = sys.dimension();
    let mut generator = sys.hamiltonian().scale(I);
    let mut jumps = Vec::new();
    for ch in sys.channels() {
        let ldl = &ch.jump.dagger() * &ch.jump;
        generator += &ldl.scale_re(ch.rate / 2.0);
        jumps.push(KrausJump {
            label: ch.label.clone(),
            direction: ch.direction,
            op: ch.jump.scale_re((ch.rate * dt).sqrt()),
        });
    }
    let no_jump = &ComplexMatrix::identity(d) - &generator.scale_re(dt);
    let mut sum = &no_jump.dagger() * &no_jump;
    for k in &jumps {
        sum += &(&k.op.dagger() * &k.op);
    }
    let completeness_defect = sum.max_abs_diff(&ComplexMatrix::identity(d));
    Ok(KrausSet {
        dt,
        no_jump,
        jumps,
        reversed_no_jump: None,
        reversed: Vec::new(),
        completeness_defect,
    })
}

/// Fills the reversed operators `K̃ = √ρ∞ K† √ρ∞⁻¹` with `ρ∞ = e^{−β H}` of
/// the jump's bath, and `K̃₀ = K₀†`.
///
/// The weight `e^{−β H}` is never normalized, so negative β is allowed.
/// Neutral channels without an entry in `betas` use β = 0.
pub fn reversed_kraus(
    kraus: &KrausSet,
    betas: &BTreeMap<String, f64>,
    h: &ComplexMatrix,
) -> Result<KrausSet> {
    let mut out = kraus.clone();
    out.reversed_no_jump = Some(kraus.no_jump.dagger());
    let mut reversed = Vec::with_capacity(kraus.jumps.len());
    for k in &kraus.jumps {
        let beta = match (betas.get(&k.label), k.direction) {
            (Some(&b), _) => b,
            (None, Direction::Neutral) => 0.0,
            (None, _) => return Err(Error::MissingBeta(k.label.clone())),
        };
        if !beta.is_finite() {
            return Err(Error::NonFiniteBeta(beta));
        }
        let op = if beta == 0.0 {
            k.op.dagger()
        } else {
            let half = hermitian_function(h, |e| (-beta * e / 2.0).exp())?;
            let half_inv = hermitian_function(h, |e| (beta * e / 2.0).exp())?;
            &(&half * &k.op.dagger()) * &half_inv
        };
        reversed.push(KrausJump {
            label: k.label.clone(),
            direction: reverse_direction(k.direction),
            op,
        });
    }
    out.reversed = reversed;
    Ok(out)
}

fn reverse_direction(d: Direction) -> Direction {
    match d {
        Direction::Emission => Direction::Absorption,
        Direction::Absorption => Direction::Emission,
        Direction::Neutral => Direction::Neutral,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub label: String,
    pub direction: Direction,
    /// Energy delivered to the system by the bath.
    pub dq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub id: usize,
    pub t0: f64,
    pub t_n: f64,
    pub initial_index: usize,
    pub events: Vec<JumpEvent>,
    pub final_index: usize,
    pub ds_boundary: f64,
    pub ds_conditional: f64,
    pub ds_total: f64,
    /// Part of the conditional term not carried by jump events; zero for
    /// the exact sampler.
    pub no_jump_correction: f64,
}

impl TrajectoryRecord {
    pub fn duration(&self) -> f64 {
        self.t_n - self.t0
    }

    pub fn count(&self, label: &str, direction: Direction) -> usize {
        self.events
            .iter()
            .filter(|e| e.label == label && e.direction == direction)
            .count()
    }
}

/// Fills the boundary and conditional entropy terms of `record`.
///
/// Boundary: `ln p[initial] − ln p̃[final]`. Conditional: `Σ −β δQ` over
/// jump events plus the stored no-jump correction.
pub fn stochastic_entropy(
    record: &mut TrajectoryRecord,
    p: &[f64],
    p_tilde: &[f64],
    betas: &BTreeMap<String, f64>,
) -> Result<f64> {
    let p0 = *p.get(record.initial_index).ok_or_else(|| {
        Error::Dimension(format!(
            "initial index {} with {} weights",
            record.initial_index,
            p.len()
        ))
    })?;
    let pn = *p_tilde.get(record.final_index).ok_or_else(|| {
        Error::Dimension(format!(
            "final index {} with {} weights",
            record.final_index,
            p_tilde.len()
        ))
    })?;
    if !(pn > 0.0) {
        return Err(Error::BoundaryWeight {
            index: record.final_index,
        });
    }
    if !(p0 > 0.0) {
        return Err(Error::BoundaryWeight {
            index: record.initial_index,
        });
    }
    let mut cond = record.no_jump_correction;
    for e in &record.events {
        if e.direction == Direction::Neutral && e.dq == 0.0 {
            continue;
        }
        let beta = *betas
            .get(&e.label)
            .ok_or_else(|| Error::MissingBeta(e.label.clone()))?;
        cond -= beta * e.dq;
    }
    record.ds_boundary = p0.ln() - pn.ln();
    record.ds_conditional = cond;
    record.ds_total = record.ds_boundary + cond;
    Ok(record.ds_total)
}

#[derive(Clone, Debug)]
struct Transition {
    target: usize,
    rate: f64,
    channel: usize,
}

#[derive(Clone, Debug)]
struct ChannelMeta {
    label: String,
    direction: Direction,
}

#[derive(Clone, Debug)]
enum Sampler {
    Exact {
        transitions: Vec<Vec<Transition>>,
        escape: Vec<f64>,
    },
    FixedStep {
        // Operators rotated into the sampling basis.
        kraus: KrausSet,
    },
}

/// Everything needed to draw steady-state trajectories of one model.
#[derive(Clone, Debug)]
pub struct TrajectoryModel {
    basis: ComplexMatrix,
    energies: Vec<f64>,
    weights: Vec<f64>,
    betas: BTreeMap<String, f64>,
    channels: Vec<ChannelMeta>,
    sampler: Sampler,
}

/// `B† M B`
fn rotate(m: &ComplexMatrix, basis: &ComplexMatrix) -> ComplexMatrix {
    &(&basis.dagger() * m) * basis
}

fn check_basis(basis: &ComplexMatrix, d: usize) -> Result<()> {
    if basis.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "basis is {}x{}, system dimension {d}",
            basis.rows(),
            basis.cols()
        )));
    }
    let defect = (&basis.dagger() * basis).max_abs_diff(&ComplexMatrix::identity(d));
    if defect > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "sampling basis is not orthonormal (defect {defect:.3e})"
        )));
    }
    Ok(())
}

fn off_diagonal_max(m: &ComplexMatrix) -> f64 {
    let d = m.rows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

impl TrajectoryModel {
    /// Exact jump-process sampler in `basis` (columns are basis states).
    /// `None` uses the eigenbasis of `rho_ss`.
    pub fn exact(
        sys: &OpenSystem,
        rho_ss: &ComplexMatrix,
        betas: &BTreeMap<String, f64>,
        basis: Option<&ComplexMatrix>,
    ) -> Result<Self> {
        let basis = resolve_basis(rho_ss, basis)?;
        let d = sys.dimension();
        check_basis(&basis, d)?;
        let h = rotate(sys.hamiltonian(), &basis);
        let scale = h.norm_max().max(1.0);
        if off_diagonal_max(&h) > STRUCTURE_TOL * scale {
            return Err(Error::NotJumpDiagonal(
                "Hamiltonian is not diagonal in the basis".into(),
            ));
        }
        let mut decay = ComplexMatrix::zeros(d, d);
        let mut transitions = vec![Vec::new(); d];
        let mut channels = Vec::new();
        for (c, ch) in sys.channels().iter().enumerate() {
            channels.push(ChannelMeta {
                label: ch.label.clone(),
                direction: ch.direction,
            });
            let l = rotate(&ch.jump, &basis);
            decay += &(&l.dagger() * &l).scale_re(ch.rate / 2.0);
            let tol = STRUCTURE_TOL * l.norm_max().max(1e-300);
            for k in 0..d {
                let hits: Vec<usize> = (0..d).filter(|&m| l[(m, k)].norm() > tol).collect();
                if hits.len() > 1 {
                    return Err(Error::NotJumpDiagonal(format!(
                        "channel `{}` ({}) spreads basis state {k} over {} states",
                        ch.label,
                        ch.direction,
                        hits.len()
                    )));
                }
                if let (Some(&m), true) = (hits.first(), ch.rate > 0.0) {
                    transitions[k].push(Transition {
                        target: m,
                        rate: ch.rate * l[(m, k)].norm_sqr(),
                        channel: c,
                    });
                }
            }
        }
        if off_diagonal_max(&decay) > STRUCTURE_TOL * decay.norm_max().max(1.0) {
            return Err(Error::NotJumpDiagonal(
                "no-jump evolution mixes basis states".into(),
            ));
        }
        let escape = transitions
            .iter()
            .map(|ts| ts.iter().map(|t| t.rate).sum())
            .collect();
        Self::assemble(
            sys,
            rho_ss,
            betas,
            basis,
            h,
            channels,
            Sampler::Exact {
                transitions,
                escape,
            },
        )
    }

    /// Fixed-step Kraus sampler; initial and final states are projected on
    /// `basis` (default: eigenbasis of `rho_ss`).
    pub fn fixed_step(
        sys: &OpenSystem,
        rho_ss: &ComplexMatrix,
        betas: &BTreeMap<String, f64>,
        basis: Option<&ComplexMatrix>,
        dt: f64,
    ) -> Result<Self> {
        let basis = resolve_basis(rho_ss, basis)?;
        check_basis(&basis, sys.dimension())?;
        let forward = kraus_set(sys, dt)?;
        let full = reversed_kraus(&forward, betas, sys.hamiltonian())?;
        let rot = |k: &KrausJump| KrausJump {
            label: k.label.clone(),
            direction: k.direction,
            op: rotate(&k.op, &basis),
        };
        let kraus = KrausSet {
            dt,
            no_jump: rotate(&full.no_jump, &basis),
            jumps: full.jumps.iter().map(rot).collect(),
            reversed_no_jump: full.reversed_no_jump.as_ref().map(|m| rotate(m, &basis)),
            reversed: full.reversed.iter().map(rot).collect(),
            completeness_defect: full.completeness_defect,
        };
        let h = rotate(sys.hamiltonian(), &basis);
        let channels = sys
            .channels()
            .iter()
            .map(|c| ChannelMeta {
                label: c.label.clone(),
                direction: c.direction,
            })
            .collect();
        Self::assemble(
            sys,
            rho_ss,
            betas,
            basis,
            h,
            channels,
            Sampler::FixedStep { kraus },
        )
    }

    fn assemble(
        sys: &OpenSystem,
        rho_ss: &ComplexMatrix,
        betas: &BTreeMap<String, f64>,
        basis: ComplexMatrix,
        h: ComplexMatrix,
        channels: Vec<ChannelMeta>,
        sampler: Sampler,
    ) -> Result<Self> {
        for ch in sys.channels() {
            if ch.direction != Direction::Neutral && !betas.contains_key(&ch.label) {
                return Err(Error::MissingBeta(ch.label.clone()));
            }
        }
        let rho = rotate(rho_ss, &basis);
        let coherence = off_diagonal_max(&rho);
        if coherence > COHERENCE_WARN {
            log::warn!("steady state keeps coherence {coherence:.3e} in the sampling basis");
        }
        let mut weights: Vec<f64> = rho.diag().iter().map(|z| z.re.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "steady state has no weight in the basis".into(),
            ));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            energies: h.diag().iter().map(|z| z.re).collect(),
            basis,
            weights,
            betas: betas.clone(),
            channels,
            sampler,
        })
    }

    /// Steady-state populations in the sampling basis; used both as the
    /// forward initial distribution and as the reverse one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.sampler, Sampler::Exact { .. })
    }

    /// Draws one trajectory of length `duration` using `rng`.
    pub fn sample_with<R: Rng>(
        &self,
        id: usize,
        duration: f64,
        rng: &mut R,
    ) -> Result<TrajectoryRecord> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duration must be >= 0, got {duration}"
            )));
        }
        let initial = draw_index(&self.weights, rng);
        let mut record = match &self.sampler {
            Sampler::Exact {
                transitions,
                escape,
            } => self.run_exact(id, initial, duration, transitions, escape, rng),
            Sampler::FixedStep { kraus } => self.run_fixed(id, initial, duration, kraus, rng)?,
        };
        stochastic_entropy(&mut record, &self.weights, &self.weights, &self.betas)?;
        Ok(record)
    }

    /// Trajectory `id` of the ensemble seeded by `seed`; the RNG stream
    /// depends only on `(seed, id)`.
    pub fn sample(&self, id: usize, duration: f64, seed: u64) -> Result<TrajectoryRecord> {
        let mut rng = trajectory_rng(seed, id);
        self.sample_with(id, duration, &mut rng)
    }

    fn event(&self, time: f64, channel: usize, from: usize, to: usize) -> JumpEvent {
        let meta = &self.channels[channel];
        JumpEvent {
            time,
            label: meta.label.clone(),
            direction: meta.direction,
            dq: self.energies[to] - self.energies[from],
        }
    }

    fn run_exact<R: Rng>(
        &self,
        id: usize,
        initial: usize,
        duration: f64,
        transitions: &[Vec<Transition>],
        escape: &[f64],
        rng: &mut R,
    ) -> TrajectoryRecord {
        let mut state = initial;
        let mut t = 0.0;
        let mut events = Vec::new();
        loop {
            let out = escape[state];
            if out <= 0.0 {
                break;
            }
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / out;
            if t > duration {
                break;
            }
            let mut pick = rng.random::<f64>() * out;
            let mut chosen = &transitions[state][transitions[state].len() - 1];
            for tr in &transitions[state] {
                if pick < tr.rate {
                    chosen = tr;
                    break;
                }
                pick -= tr.rate;
            }
            events.push(self.event(t, chosen.channel, state, chosen.target));
            state = chosen.target;
        }
        TrajectoryRecord {
            id,
            t0: 0.0,
            t_n: duration,
            initial_index: initial,
            events,
            final_index: state,
            ds_boundary: 0.0,
            ds_conditional: 0.0,
            ds_total: 0.0,
            no_jump_correction: 0.0,
        }
    }

    fn run_fixed<R: Rng>(
        &self,
        id: usize,
        initial: usize,
        duration: f64,
        kraus: &KrausSet,
        rng: &mut R,
    ) -> Result<TrajectoryRecord> {
        let d = self.weights.len();
        let steps = (duration / kraus.dt).round() as usize;
        let mut psi = vec![C64::new(0.0, 0.0); d];
        psi[initial] = C64::new(1.0, 0.0);
        // Operator index per step: None for no jump.
        let mut history: Vec<Option<usize>> = Vec::with_capacity(steps);
        let mut log_forward = 0.0;
        let mut events = Vec::new();
        let mut candidates: Vec<Vec<C64>> = Vec::with_capacity(kraus.jumps.len() + 1);
        for step in 0..steps {
            candidates.clear();
            candidates.push(kraus.no_jump.mul_vec(&psi));
            for k in &kraus.jumps {
                candidates.push(k.op.mul_vec(&psi));
            }
            let probs: Vec<f64> = candidates.iter().map(|v| norm_sqr(v)).collect();
            let total: f64 = probs.iter().sum();
            let choice = draw_index_unnormalized(&probs, total, rng);
            let p = probs[choice];
            log_forward += p.ln();
            let next: Vec<C64> = candidates[choice].iter().map(|z| z / p.sqrt()).collect();
            if choice > 0 {
                let channel = choice - 1;
                let from = expected_energy(&self.energies, &psi);
                let to = expected_energy(&self.energies, &next);
                let meta = &self.channels[channel];
                events.push(JumpEvent {
                    time: (step + 1) as f64 * kraus.dt,
                    label: meta.label.clone(),
                    direction: meta.direction,
                    dq: to - from,
                });
                history.push(Some(channel));
            } else {
                history.push(None);
            }
            psi = next;
        }
        let final_weights: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = final_weights.iter().sum();
        let final_index = draw_index_unnormalized(&final_weights, total, rng);
        log_forward += (final_weights[final_index] / total).ln();

        // Reverse sequence from the final basis state, read back to |initial>.
        let rev_no_jump = kraus
            .reversed_no_jump
            .as_ref()
            .expect("fixed-step models always carry reversed operators");
        let mut phi = vec![C64::new(0.0, 0.0); d];
        phi[final_index] = C64::new(1.0, 0.0);
        let mut log_reverse = 0.0;
        for h in history.iter().rev() {
            let op = match h {
                None => rev_no_jump,
                Some(c) => &kraus.reversed[*c].op,
            };
            phi = op.mul_vec(&phi);
            let n = norm_sqr(&phi);
            if !(n > 0.0) {
                return Err(Error::BoundaryWeight { index: final_index });
            }
            log_reverse += n.ln();
            let s = n.sqrt();
            phi.iter_mut().for_each(|z| *z /= s);
        }
        log_reverse += phi[initial].norm_sqr().ln();
        let literal = log_forward - log_reverse;

        let mut record = TrajectoryRecord {
            id,
            t0: 0.0,
            t_n: steps as f64 * kraus.dt,
            initial_index: initial,
            events,
            final_index,
            ds_boundary: 0.0,
            ds_conditional: 0.0,
            ds_total: 0.0,
            no_jump_correction: 0.0,
        };
        let mut jump_part = 0.0;
        for e in &record.events {
            if let Some(b) = self.betas.get(&e.label) {
                jump_part -= b * e.dq;
            }
        }
        record.no_jump_correction = literal - jump_part;
        if record.no_jump_correction.abs() > 1e-6 {
            log::debug!(
                "trajectory {id}: no-jump segments carry entropy {:.3e}",
                record.no_jump_correction
            );
        }
        Ok(record)
    }
}

fn resolve_basis(rho_ss: &ComplexMatrix, basis: Option<&ComplexMatrix>) -> Result<ComplexMatrix> {
    match basis {
        Some(b) => Ok(b.clone()),
        None => Ok(eig_hermitian(rho_ss)?
            .eigenvectors
            .expect("Hermitian eigensolver returns vectors")),
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn expected_energy(energies: &[f64], psi: &[C64]) -> f64 {
    let n = norm_sqr(psi);
    energies
        .iter()
        .zip(psi)
        .map(|(e, z)| e * z.norm_sqr())
        .sum::<f64>()
        / n
}

fn draw_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    draw_index_unnormalized(weights, weights.iter().sum(), rng)
}

fn draw_index_unnormalized<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut pick = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if pick < w {
            return i;
        }
        pick -= w;
        last = i;
    }
    last
}

/// ChaCha8 seeded with `seed`, stream `id`.
pub fn trajectory_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// `n` independent trajectories; identical for any execution mode.
pub fn run_ensemble(
    model: &TrajectoryModel,
    n: usize,
    duration: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrajectoryRecord>> {
    map_indexed(n, exec, |i| model.sample(i, duration, seed))
        .into_iter()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub duration: f64,
    pub mean_ds: f64,
    pub se_ds: f64,
    pub mean_exp_neg_ds: f64,
    pub se_exp_neg_ds: f64,
    /// `mean_ds / duration`
    pub rate_estimate: f64,
    pub se_rate: f64,
}

impl EnsembleStats {
    /// `|⟨e^{−ΔS}⟩ − 1| < k SE`
    pub fn fluctuation_theorem_holds(&self, k: f64) -> bool {
        (self.mean_exp_neg_ds - 1.0).abs() < k * self.se_exp_neg_ds
    }

    /// `⟨ΔS⟩ > k SE`
    pub fn second_law_strict(&self, k: f64) -> bool {
        self.mean_ds > k * self.se_ds
    }

    pub fn rate_matches(&self, rate: f64, k: f64) -> bool {
        (self.rate_estimate - rate).abs() < k * self.se_rate
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Sample means and standard errors of `ΔS` and `e^{−ΔS}`.
pub fn ensemble_estimators(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    let n = records.len();
    if n < 2 {
        return Err(Error::InconsistentEnsemble(format!(
            "need at least 2 records, got {n}"
        )));
    }
    let duration = records[0].duration();
    for r in records {
        if (r.duration() - duration).abs() > 1e-12 * duration.max(1.0) || r.t0 != records[0].t0 {
            return Err(Error::InconsistentEnsemble(format!(
                "record {} spans [{}, {}], expected [{}, {}]",
                r.id, r.t0, r.t_n, records[0].t0, records[0].t_n
            )));
        }
    }
    let (mean_ds, se_ds) = mean_and_se(records.iter().map(|r| r.ds_total), n);
    let (mean_exp_neg_ds, se_exp_neg_ds) =
        mean_and_se(records.iter().map(|r| (-r.ds_total).exp()), n);
    let (rate_estimate, se_rate) = if duration > 0.0 {
        (mean_ds / duration, se_ds / duration)
    } else {
        (0.0, 0.0)
    };
    Ok(EnsembleStats {
        n,
        duration,
        mean_ds,
        se_ds,
        mean_exp_neg_ds,
        se_exp_neg_ds,
        rate_estimate,
        se_rate,
    })
}

/// One `event` line per jump and one `summary` line per trajectory, comma
/// separated.
pub fn write_dump<W: Write>(records: &[TrajectoryRecord], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "kind,trajectory,time,bath,direction,dq,ds_boundary,ds_conditional"
    )?;
    for r in records {
        for e in &r.events {
            writeln!(
                out,
                "event,{},{},{},{},{},,",
                r.id, e.time, e.label, e.direction, e.dq
            )?;
        }
        writeln!(
            out,
            "summary,{},{},,,,{},{}",
            r.id, r.t_n, r.ds_boundary, r.ds_conditional
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diamond::{
        bath_betas, bell_basis, build_diamond, rates_from_betas, LABEL_A, LABEL_S,
    };
    use crate::lindblad::{steady_state, LindbladChannel};

    fn qubit(gamma_down: f64, gamma_up: f64) -> OpenSystem {
        let sm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        OpenSystem::new(
            ComplexMatrix::real_diagonal(&[0.0, 1.0]),
            vec![
                LindbladChannel::new("b", Direction::Emission, sm.clone(), gamma_down).unwrap(),
                LindbladChannel::new("b", Direction::Absorption, sm.dagger(), gamma_up).unwrap(),
            ],
        )
        .unwrap()
    }

    fn diamond_model(ba: f64, bs: f64) -> TrajectoryModel {
        let spec = rates_from_betas(ba, bs, 1.0).unwrap();
        let sys = build_diamond(&spec);
        let rho = steady_state(&sys).unwrap().rho;
        TrajectoryModel::exact(&sys, &rho, &bath_betas(&spec), Some(&bell_basis())).unwrap()
    }

    #[test]
    fn kraus_without_channels() {
        let h = ComplexMatrix::real_diagonal(&[0.0, 2.0]);
        let sys = OpenSystem::new(h.clone(), vec![]).unwrap();
        let k = kraus_set(&sys, 0.01).unwrap();
        assert!(k.jumps.is_empty());
        let expected = &ComplexMatrix::identity(2) - &h.scale(I * 0.01);
        assert!(k.no_jump.max_abs_diff(&expected) < 1e-16);
    }

    #[test]
    fn kraus_completeness_is_second_order() {
        let sys = qubit(1.0, 0.0);
        let a = kraus_set(&sys, 1e-2).unwrap();
        let b = kraus_set(&sys, 1e-3).unwrap();
        assert!(b.completeness_defect < a.completeness_defect / 50.0);
        assert!(a.completeness_constant() < 10.0);
        let expected = kraus_set(&sys, 1e-2).unwrap().jumps[0].op[(0, 1)].re;
        assert!((expected - 0.1).abs() < 1e-15);
    }

    #[test]
    fn kraus_rejects_large_steps() {
        assert!(matches!(
            kraus_set(&qubit(1.0, 0.0), 0.06),
            Err(Error::Timestep { .. })
        ));
    }

    #[test]
    fn reversed_at_zero_beta_is_adjoint() {
        let sys = qubit(1.0, 1.0);
        let k = kraus_set(&sys, 0.01).unwrap();
        let betas = BTreeMap::from([("b".to_string(), 0.0)]);
        let r = reversed_kraus(&k, &betas, sys.hamiltonian()).unwrap();
        assert!(r.reversed[0].op.max_abs_diff(&k.jumps[1].op) < 1e-16);
        assert_eq!(r.reversed[0].direction, Direction::Absorption);
    }

    #[test]
    fn reversed_ratio_is_boltzmann() {
        let beta = 0.7;
        let sys = qubit(1.0, 1.0);
        let k = kraus_set(&sys, 0.01).unwrap();
        let betas = BTreeMap::from([("b".to_string(), beta)]);
        let r = reversed_kraus(&k, &betas, sys.hamiltonian()).unwrap();
        // Emission |1> -> |0> forward, reversed |0> -> |1>.
        let fwd = k.jumps[0].op[(0, 1)].norm_sqr();
        let rev = r.reversed[0].op[(1, 0)].norm_sqr();
        assert!(((fwd / rev).ln() - beta).abs() < 1e-12);
    }

    #[test]
    fn diamond_transition_structure() {
        let m = diamond_model(-1.0, 2.0);
        assert!(m.is_exact());
        for (e, x) in m.energies().iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((e - x).abs() < 1e-15);
        }
        let sum: f64 = m.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn computational_basis_is_not_jump_diagonal() {
        let spec = rates_from_betas(-1.0, 2.0, 1.0).unwrap();
        let sys = build_diamond(&spec);
        let rho = steady_state(&sys).unwrap().rho;
        let id = ComplexMatrix::identity(4);
        assert!(matches!(
            TrajectoryModel::exact(&sys, &rho, &bath_betas(&spec), Some(&id)),
            Err(Error::NotJumpDiagonal(_))
        ));
    }

    #[test]
    fn zero_duration_trajectory() {
        let m = diamond_model(-1.0, 2.0);
        let r = m.sample(0, 0.0, 5).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.initial_index, r.final_index);
        assert_eq!(r.ds_total, 0.0);
    }

    #[test]
    fn seeds_are_reproducible() {
        let m = diamond_model(-1.0, 2.0);
        assert_eq!(m.sample(3, 5.0, 11).unwrap(), m.sample(3, 5.0, 11).unwrap());
        assert_ne!(m.sample(3, 5.0, 11).unwrap(), m.sample(4, 5.0, 11).unwrap());
    }

    #[test]
    fn single_emission_entropy() {
        let betas = BTreeMap::from([(LABEL_A.to_string(), -1.0), (LABEL_S.to_string(), 2.0)]);
        let mut r = TrajectoryRecord {
            id: 0,
            t0: 0.0,
            t_n: 1.0,
            initial_index: 2,
            events: vec![JumpEvent {
                time: 0.5,
                label: LABEL_A.into(),
                direction: Direction::Emission,
                dq: -1.0,
            }],
            final_index: 0,
            ds_boundary: 0.0,
            ds_conditional: 0.0,
            ds_total: 0.0,
            no_jump_correction: 0.0,
        };
        let w = [0.25; 4];
        let ds = stochastic_entropy(&mut r, &w, &w, &betas).unwrap();
        assert!((ds + 1.0).abs() < 1e-15);
        assert_eq!(r.ds_boundary, 0.0);
        let zero = [0.0, 0.5, 0.5, 0.0];
        assert!(matches!(
            stochastic_entropy(&mut r, &w, &zero, &betas),
            Err(Error::BoundaryWeight { index: 0 })
        ));
    }

    #[test]
    fn estimators_on_trivial_records() {
        let m = diamond_model(0.0, 0.0);
        let mut recs = run_ensemble(&m, 4, 0.0, 1, Execution::Sequential).unwrap();
        let s = ensemble_estimators(&recs).unwrap();
        assert_eq!(s.mean_ds, 0.0);
        assert_eq!(s.mean_exp_neg_ds, 1.0);
        recs[1].t_n = 2.0;
        assert!(matches!(
            ensemble_estimators(&recs),
            Err(Error::InconsistentEnsemble(_))
        ));
        assert!(ensemble_estimators(&recs[..1]).is_err());
    }

    #[test]
    fn dump_format() {
        let m = diamond_model(-1.0, 2.0);
        let recs = run_ensemble(&m, 2, 3.0, 9, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_dump(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let summaries = text.lines().filter(|l| l.starts_with("summary,")).count();
        let events: usize = recs.iter().map(|r| r.events.len()).sum();
        assert_eq!(summaries, 2);
        assert_eq!(text.lines().count(), 1 + 2 + events);
    }
}
