//! Sweep runners, one per mode. Points are evaluated on the worker pool and
//! written in grid order.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use qtherm::cavity::{adiabatic_map, converged_steady_state, CavitySpec};
use qtherm::concurrence::{concurrence, TwoQubitState};
use qtherm::diamond::{
    analytic_concurrence, bath_betas, bell_basis, build_diamond, rates_from_betas, LABEL_A, LABEL_S,
};
use qtherm::exec::{map_indexed, Execution};
use qtherm::lindblad::steady_state;
use qtherm::thermo::entropy_rate;
use qtherm::trajectories::{ensemble_estimators, run_ensemble, write_dump, TrajectoryModel};

use crate::config::{Config, ConfigError, Mode};
use crate::dataset::{Cell, Dataset};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Model(#[from] qtherm::Error),
}

/// Tolerance for the monotonicity of the robustness scans.
pub const MONOTONE_TOL: f64 = 1e-6;
/// Number of standard errors used by the trajectory checks.
pub const SE_FACTOR: f64 = 3.0;

pub fn run(mode: Mode, cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    match mode {
        Mode::EffectiveGrid => run_effective_grid(cfg, exec),
        Mode::CavityKappaScan => run_cavity_kappa_scan(cfg, exec),
        Mode::CavityGrid => run_cavity_grid(cfg, exec),
        Mode::Robustness => run_robustness(cfg, exec),
        Mode::Trajectories => run_trajectories(cfg, exec),
    }
}

fn argmax(values: &[Option<f64>]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .fold(None, |best: Option<(usize, f64)>, (i, x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

struct EffectivePoint {
    values: Vec<Cell>,
    imbalance: f64,
}

fn effective_point(
    ba: f64,
    bs: f64,
    gamma_plus: f64,
    omega0: f64,
) -> qtherm::Result<EffectivePoint> {
    let spec = rates_from_betas(ba, bs, gamma_plus)?.with_omega0(omega0)?;
    let sys = build_diamond(&spec);
    let ss = steady_state(&sys)?;
    let numeric = concurrence(&TwoQubitState::new(ss.rho.clone())?)?;
    let report = entropy_rate(&sys, &ss.rho, &bath_betas(&spec), gamma_plus)?;
    let qa = report.heat_currents[LABEL_A];
    let qs = report.heat_currents[LABEL_S];
    Ok(EffectivePoint {
        values: vec![
            analytic_concurrence(ba, bs).into(),
            numeric.into(),
            qa.into(),
            qs.into(),
            report.entropy_rate.into(),
            report.entropy_rate_normalized.into(),
            (report.entropy_rate / (omega0 * gamma_plus)).into(),
            ss.residual.into(),
        ],
        imbalance: (qa + qs).abs() / (omega0 * spec.max_rate()),
    })
}

pub fn run_effective_grid(cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    let ax = cfg.axis("beta_a")?;
    let ay = cfg.axis("beta_s")?;
    let gamma_plus = cfg.positive("gamma_plus")?;
    let omega0 = cfg.positive("omega0")?;
    let points: Vec<(f64, f64)> = match cfg.string("sampling")?.as_str() {
        "grid" => {
            let ys = ay.points();
            ax.points()
                .into_iter()
                .flat_map(|a| ys.iter().map(move |&b| (a, b)))
                .collect()
        }
        "random" => {
            let n = cfg.usize("n_random")?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64("seed")?);
            (0..n)
                .map(|_| {
                    let a = ax.min + (ax.max - ax.min) * rng.random::<f64>();
                    let b = ay.min + (ay.max - ay.min) * rng.random::<f64>();
                    (a, b)
                })
                .collect()
        }
        other => {
            return Err(cfg
                .invalid(
                    "sampling",
                    format!("expected grid or random, found `{other}`"),
                )
                .into())
        }
    };

    let results = map_indexed(points.len(), exec, |i| {
        effective_point(points[i].0, points[i].1, gamma_plus, omega0)
    });
    let mut d = Dataset::new(&[
        "beta_A",
        "beta_S",
        "concurrence_analytic",
        "concurrence_numeric",
        "qdot_A",
        "qdot_S",
        "sdot",
        "sdot_norm",
        "sdot_norm_omega_gamma",
        "residual",
        "error",
    ]);
    let mut imbalance: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    for (&(a, b), r) in points.iter().zip(results) {
        let r = r.map(|p| {
            imbalance = imbalance.max(p.imbalance);
            let gap = (p.values[0].as_f64().unwrap() - p.values[1].as_f64().unwrap()).abs();
            oracle_gap = oracle_gap.max(gap);
            p.values
        });
        d.push_point(vec![a.into(), b.into()], r);
    }

    let ba = d.values("beta_A");
    let bs = d.values("beta_S");
    let c = d.values("concurrence_analytic");
    let s = d.values("sdot_norm");
    d.note("points", d.rows.len());
    d.note("failures", d.failures);
    if let Some(k) = argmax(&c) {
        d.note("max_concurrence", c[k].unwrap());
        d.note(
            "argmax_concurrence",
            format!("beta_A={} beta_S={}", ba[k].unwrap(), bs[k].unwrap()),
        );
    }
    if let Some(k) = argmax(&s) {
        d.note("max_sdot_norm", s[k].unwrap());
        d.note(
            "argmax_sdot_norm",
            format!("beta_A={} beta_S={}", ba[k].unwrap(), bs[k].unwrap()),
        );
        d.note("concurrence_at_max_sdot", c[k].unwrap());
    }
    let min_sdot = d
        .values("sdot")
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    d.note("min_sdot", min_sdot);
    d.note("max_current_imbalance_over_omega0_rate", imbalance);
    d.note("max_analytic_numeric_gap", oracle_gap);
    Ok(d)
}

#[derive(Clone, Copy)]
struct CavityBase {
    g: f64,
    omega0: f64,
    c_tol: f64,
}

impl CavityBase {
    fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        Ok(Self {
            g: cfg.positive("g")?,
            omega0: cfg.positive("omega0")?,
            c_tol: cfg.positive("c_tol")?,
        })
    }

    /// Rates given in units of g.
    fn spec(&self, kappa: f64, p: f64, gamma: f64) -> CavitySpec {
        CavitySpec {
            omega0: self.omega0,
            omega_cav: self.omega0,
            g: self.g,
            kappa: kappa * self.g,
            p: p * self.g,
            gamma: gamma * self.g,
            gamma_z: 0.0,
            delta: 0.0,
            p_c: 0.0,
            n_max: 2,
        }
    }

    fn solve(&self, spec: &CavitySpec) -> qtherm::Result<(f64, usize, f64)> {
        let c = converged_steady_state(spec, self.c_tol)?;
        Ok((c.concurrence, c.n_used, c.steady.residual))
    }
}

pub fn run_cavity_kappa_scan(cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    let base = CavityBase::from_config(cfg)?;
    let kappas = cfg.axis("kappa_over_g")?.points();
    let pumps = cfg.f64_list("p_over_g")?;
    let gamma = cfg.non_negative("gamma_over_g")?;
    let points: Vec<(f64, f64)> = pumps
        .iter()
        .flat_map(|&p| kappas.iter().map(move |&k| (p, k)))
        .collect();
    let results = map_indexed(points.len(), exec, |i| {
        let (p, k) = points[i];
        let spec = base.spec(k, p, gamma);
        let (c, n_used, residual) = base.solve(&spec)?;
        let (c_eff, valid) = match adiabatic_map(&spec) {
            Ok(m) => (Cell::Num(m.concurrence()), m.valid),
            Err(qtherm::Error::MapUndefined) => (Cell::Empty, false),
            Err(e) => return Err(e),
        };
        Ok(vec![
            c.into(),
            c_eff,
            n_used.into(),
            valid.into(),
            residual.into(),
        ])
    });
    let mut d = Dataset::new(&[
        "p_over_g",
        "kappa_over_g",
        "C_full",
        "C_effective_mapped",
        "n_used",
        "map_valid",
        "residual",
        "error",
    ]);
    for (&(p, k), r) in points.iter().zip(results) {
        d.push_point(vec![p.into(), k.into()], r);
    }
    d.note("points", d.rows.len());
    d.note("failures", d.failures);
    d.note("gamma_over_g", gamma);
    let full = d.values("C_full");
    let eff = d.values("C_effective_mapped");
    let ks = d.values("kappa_over_g");
    let mut gap: f64 = 0.0;
    for i in 0..d.rows.len() {
        if let (Some(a), Some(b), Some(k)) = (full[i], eff[i], ks[i]) {
            if k > 1.0 {
                gap = gap.max((a - b).abs());
            }
        }
    }
    d.note("max_full_effective_gap_kappa_over_g_above_1", gap);
    Ok(d)
}

pub fn run_cavity_grid(cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    let base = CavityBase::from_config(cfg)?;
    let pa = cfg.axis("p_over_g")?;
    let ka = cfg.axis("kappa_over_g")?;
    let gamma = cfg.positive("gamma_over_g")?;
    let ks = ka.points();
    let points: Vec<(f64, f64)> = pa
        .points()
        .into_iter()
        .flat_map(|p| ks.iter().map(move |&k| (p, k)))
        .collect();
    let results = map_indexed(points.len(), exec, |i| {
        let (p, k) = points[i];
        base.solve(&base.spec(k, p, gamma))
            .map(|(c, n, r)| vec![c.into(), n.into(), r.into()])
    });
    let mut d = Dataset::new(&[
        "p_over_g",
        "kappa_over_g",
        "p_over_gamma",
        "C_full",
        "n_used",
        "residual",
        "error",
    ]);
    for (&(p, k), r) in points.iter().zip(results) {
        d.push_point(vec![p.into(), k.into(), (p / gamma).into()], r);
    }
    let c = d.values("C_full");
    d.note("points", d.rows.len());
    d.note("failures", d.failures);
    d.note("gamma_over_g", gamma);
    let Some(best) = argmax(&c) else {
        return Ok(d);
    };
    let (bp, bk) = points[best];
    d.note("grid_max_C", c[best].unwrap());
    d.note("grid_argmax_p_over_gamma", bp / gamma);
    d.note("grid_argmax_kappa_over_g", bk);
    let above: Vec<f64> = points
        .iter()
        .zip(&c)
        .filter(|(_, v)| v.is_some_and(|x| x > 1.0 / 3.0))
        .map(|((p, _), _)| p / gamma)
        .collect();
    if let Some(m) = above.iter().copied().reduce(f64::min) {
        d.note("min_p_over_gamma_with_C_above_one_third", m);
    }

    if cfg.bool("refine")? {
        let rounds = cfg.usize("refine_rounds")?;
        let n = cfg.usize("refine_points")?.max(3);
        let step = |a: &crate::config::Axis| (a.max.log10() - a.min.log10()) / (a.count - 1) as f64;
        let (mut lp, mut lk) = (bp.log10(), bk.log10());
        let (mut sp, mut sk) = (step(&pa), step(&ka));
        let mut best_c = c[best].unwrap();
        for _ in 0..rounds {
            let local: Vec<(f64, f64)> = (0..n * n)
                .map(|i| {
                    let u = -1.0 + 2.0 * (i / n) as f64 / (n - 1) as f64;
                    let v = -1.0 + 2.0 * (i % n) as f64 / (n - 1) as f64;
                    (lp + u * sp, lk + v * sk)
                })
                .collect();
            let vals = map_indexed(local.len(), exec, |i| {
                let (x, y) = local[i];
                base.solve(&base.spec(10f64.powf(y), 10f64.powf(x), gamma))
                    .ok()
                    .map(|r| r.0)
            });
            if let Some(k) = argmax(&vals) {
                if vals[k].unwrap() >= best_c {
                    best_c = vals[k].unwrap();
                    lp = local[k].0;
                    lk = local[k].1;
                }
            }
            sp *= 2.0 / (n - 1) as f64;
            sk *= 2.0 / (n - 1) as f64;
        }
        d.note("refined_max_C", best_c);
        d.note("refined_argmax_p_over_gamma", 10f64.powf(lp) / gamma);
        d.note("refined_argmax_kappa_over_g", 10f64.powf(lk));
    }
    Ok(d)
}

pub fn run_robustness(cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    let base = CavityBase::from_config(cfg)?;
    let p = cfg.positive("p_over_g")?;
    let point = base.spec(
        cfg.positive("kappa_over_g")?,
        p,
        cfg.non_negative("gamma_over_g")?,
    );
    let scans: [(&str, Vec<f64>); 3] = [
        ("gamma_z_over_p", cfg.axis("gamma_z_over_p")?.points()),
        ("delta_over_g", cfg.axis("delta_over_g")?.points()),
        ("p_c_over_g", cfg.axis("p_c_over_g")?.points()),
    ];
    let g = base.g;
    let apply = |scan: &str, v: f64| -> CavitySpec {
        match scan {
            "gamma_z_over_p" => CavitySpec {
                gamma_z: v * point.p,
                ..point
            },
            "delta_over_g" => CavitySpec {
                delta: v * g,
                ..point
            },
            _ => CavitySpec {
                p_c: v * g,
                ..point
            },
        }
    };
    let jobs: Vec<(&str, f64)> = scans
        .iter()
        .flat_map(|(name, vals)| vals.iter().map(move |&v| (*name, v)))
        .collect();
    let results = map_indexed(jobs.len(), exec, |i| {
        base.solve(&apply(jobs[i].0, jobs[i].1))
    });

    let mut d = Dataset::new(&["scan", "value", "C_full", "n_used", "residual", "error"]);
    let mut per_scan: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for (&(scan, v), r) in jobs.iter().zip(results) {
        per_scan
            .entry(scan)
            .or_default()
            .push(r.as_ref().ok().map(|x| x.0));
        d.push_point(
            vec![scan.into(), v.into()],
            r.map(|(c, n, res)| vec![c.into(), n.into(), res.into()]),
        );
    }
    d.note("points", d.rows.len());
    d.note("failures", d.failures);
    let base_c = base.solve(&point).map(|r| r.0);
    if let Ok(c) = base_c {
        d.note("base_C", c);
    }
    let at_p = base
        .solve(&CavitySpec {
            gamma_z: point.p,
            ..point
        })
        .map(|r| r.0);
    if let Ok(c) = at_p {
        d.note("C_at_gamma_z_eq_p", c);
    }
    for (name, _) in &scans {
        let vals = &per_scan[name];
        let mut worst = f64::NEG_INFINITY;
        for w in vals.windows(2) {
            if let [Some(a), Some(b)] = w {
                worst = worst.max(b - a);
            }
        }
        d.note(&format!("max_increase_{name}"), worst);
        d.note(&format!("non_increasing_{name}"), worst <= MONOTONE_TOL);
    }
    Ok(d)
}

fn verdict(ok: bool) -> Cell {
    Cell::Text(if ok { "PASS" } else { "FAIL" }.into())
}

pub fn run_trajectories(cfg: &Config, exec: Execution) -> Result<Dataset, SweepError> {
    let bas = cfg.f64_list("beta_a")?;
    let bss = cfg.f64_list("beta_s")?;
    if bas.len() != bss.len() {
        let msg = format!("{} values, but beta_a has {}", bss.len(), bas.len());
        return Err(cfg.invalid("beta_s", msg).into());
    }
    let gamma_plus = cfg.positive("gamma_plus")?;
    let n = cfg.usize("n_trajectories")?;
    if n < 2 {
        return Err(cfg
            .invalid("n_trajectories", "must be at least 2".into())
            .into());
    }
    let duration = cfg.positive("duration")?;
    let sampler = cfg.string("sampler")?;
    if !matches!(sampler.as_str(), "exact" | "fixed") {
        return Err(cfg
            .invalid(
                "sampler",
                format!("expected exact or fixed, found `{sampler}`"),
            )
            .into());
    }
    let dt_rate = cfg.positive("dt_rate")?;
    let seed = cfg.u64("seed")?;
    let dump = cfg.string("dump")?;

    let mut d = Dataset::new(&[
        "beta_A",
        "beta_S",
        "n",
        "duration",
        "mean_dS",
        "se_dS",
        "mean_exp_neg_dS",
        "se_exp_neg_dS",
        "rate_estimate",
        "se_rate",
        "sdot_thermo",
        "mean_boundary",
        "fluctuation_theorem",
        "second_law",
        "rate_consistency",
        "error",
    ]);
    for (k, (&ba, &bs)) in bas.iter().zip(&bss).enumerate() {
        let point_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let outcome = (|| -> Result<Vec<Cell>, SweepError> {
            let spec = rates_from_betas(ba, bs, gamma_plus)?;
            let sys = build_diamond(&spec);
            let rho = steady_state(&sys)?.rho;
            let betas = bath_betas(&spec);
            let sdot = entropy_rate(&sys, &rho, &betas, gamma_plus)?.entropy_rate;
            let model = match sampler.as_str() {
                "exact" => TrajectoryModel::exact(&sys, &rho, &betas, Some(&bell_basis()))?,
                _ => {
                    let dt = dt_rate / sys.max_rate();
                    TrajectoryModel::fixed_step(&sys, &rho, &betas, Some(&bell_basis()), dt)?
                }
            };
            let records = run_ensemble(&model, n, duration, point_seed, exec)?;
            if !dump.is_empty() {
                write_dump(&records, File::create(dump_path(&dump, k))?)?;
            }
            let st = ensemble_estimators(&records)?;
            let boundary = records.iter().map(|r| r.ds_boundary).sum::<f64>() / n as f64;
            let second_law = if ba != bs {
                st.second_law_strict(SE_FACTOR)
            } else {
                st.mean_ds.abs() <= SE_FACTOR * st.se_ds
            };
            let rate_ok =
                st.rate_matches(sdot, SE_FACTOR) || (st.rate_estimate - sdot).abs() < 1e-12;
            let ft_ok =
                st.fluctuation_theorem_holds(SE_FACTOR) || (st.mean_exp_neg_ds - 1.0).abs() < 1e-12;
            Ok(vec![
                n.into(),
                st.duration.into(),
                st.mean_ds.into(),
                st.se_ds.into(),
                st.mean_exp_neg_ds.into(),
                st.se_exp_neg_ds.into(),
                st.rate_estimate.into(),
                st.se_rate.into(),
                sdot.into(),
                boundary.into(),
                verdict(ft_ok),
                verdict(second_law),
                verdict(rate_ok),
            ])
        })();
        match outcome {
            Ok(v) => d.push_point(vec![ba.into(), bs.into()], Ok(v)),
            Err(SweepError::Model(e)) => d.push_point(vec![ba.into(), bs.into()], Err(e)),
            Err(e) => return Err(e),
        }
    }
    d.note("points", d.rows.len());
    d.note("failures", d.failures);
    d.note("seed", seed);
    d.note("sampler", &sampler);
    Ok(d)
}

/// `<stem>-<k>.<ext>` next to `path`.
pub fn dump_path(path: &str, k: usize) -> PathBuf {
    let p = Path::new(path);
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("dump");
    let ext = p.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    p.with_file_name(format!("{stem}-{k}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: Mode, text: &str) -> Config {
        Config::for_mode(mode, Some((text, "test"))).unwrap()
    }

    #[test]
    fn small_effective_grid_has_zero_diagonal() {
        let c = cfg(Mode::EffectiveGrid, "beta_a = -1, 1, 3\nbeta_s = -1, 1, 3");
        let d = run_effective_grid(&c, Execution::Sequential).unwrap();
        assert_eq!(d.rows.len(), 9);
        for row in &d.rows {
            if row[0] == row[1] {
                assert_eq!(row[2].as_f64(), Some(0.0));
            }
        }
        assert_eq!(d.exit_code(), 0);
    }

    #[test]
    fn random_sampling_is_seeded() {
        let c = cfg(
            Mode::EffectiveGrid,
            "sampling = random\nn_random = 5\nbeta_a = -4, 4, 2\nbeta_s = -4, 4, 2",
        );
        let a = run_effective_grid(&c, Execution::Sequential).unwrap();
        let b = run_effective_grid(&c, Execution::Parallel).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(a.rows.len(), 5);
    }

    #[test]
    fn dump_paths() {
        assert_eq!(dump_path("out/ev.csv", 2), PathBuf::from("out/ev-2.csv"));
        assert_eq!(dump_path("ev", 0), PathBuf::from("ev-0.csv"));
    }
}
