//! The ε-sweep: perturbed trajectories against the averaged equation, and
//! equidistribution of the angles along them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kdvlab_core::averaging::{
    action_deviation_series, harmonics, integrate_averaged, ActionFunctional, WeylAccumulator,
};
use kdvlab_core::birkhoff::linear_birkhoff_inverse_on;
use kdvlab_core::flow::integrate_with;
use kdvlab_core::measure::sample_member;
use kdvlab_core::spectral::SobolevIndex;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{ensure_dir, num, write_manifest, Table};
use crate::{LabError, LabResult};

/// Failing members beyond this fraction make the whole run an error.
pub const MAX_FAILED_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct MemberResult {
    pub member: u64,
    /// `sup_τ |I(u(τ)) − J(τ)|₁`; `None` when the averaged equation was not run.
    pub d1: Option<f64>,
    /// Same in the measure's `|·|_p`.
    pub dp: Option<f64>,
    /// Time-averaged `|Weyl sum|` per harmonic.
    pub weyl: Vec<f64>,
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRow {
    pub eps: f64,
    pub t_fast: f64,
    pub ok: usize,
    pub failed: usize,
    pub d_median: f64,
    pub d_q1: f64,
    pub d_q3: f64,
    pub dp_median: f64,
    /// `max_L` of the ensemble-mean Weyl sum.
    pub weyl_max: f64,
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<EpsRow>,
    pub harmonics: Vec<Vec<i64>>,
    /// Ensemble-mean Weyl sums per ε and harmonic.
    pub weyl: Vec<Vec<f64>>,
    pub members: Vec<Vec<Result<MemberResult, String>>>,
    pub runtimes: Vec<f64>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    /// Ensemble medians strictly decrease along the (decreasing) ε list and
    /// the last is at most half the first.
    pub fn d_criterion(&self) -> bool {
        let d: Vec<f64> = self.rows.iter().map(|r| r.d_median).collect();
        d.windows(2).all(|w| w[1] < w[0]) && d.len() >= 2 && d[d.len() - 1] <= 0.5 * d[0]
    }

    /// Weyl maxima decrease with ε and the smallest-ε value is below `bound`.
    pub fn weyl_criterion(&self, bound: f64) -> bool {
        let w: Vec<f64> = self.rows.iter().map(|r| r.weyl_max).collect();
        w.windows(2).all(|p| p[1] <= p[0]) && w.last().is_some_and(|x| *x <= bound)
    }
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let x = q * (sorted.len() - 1) as f64;
    let (i, w) = (x.floor() as usize, x.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - w) + sorted[i + 1] * w
    } else {
        sorted[i]
    }
}

/// One ensemble member at one ε.
pub fn run_member(cfg: &ExperimentConfig, eps: f64, member: u64, with_averaging: bool) -> LabResult<MemberResult> {
    let measure = cfg.measure()?;
    let f = cfg.perturbation()?;
    let avg_cfg = cfg.averaging()?;
    let p = measure.p();
    let horizon = cfg.sweep.horizon_slow;
    let v0 = sample_member(&measure, cfg.seeds.master, member);
    let u0 = linear_birkhoff_inverse_on(&v0, cfg.grid_size())?;
    let params = cfg.flow_params(eps, horizon / eps)?;

    let q = &cfg.equidist;
    let harm: Vec<Vec<i64>> = harmonics(q.n_angles, q.order);
    let mut weyl = WeylAccumulator::new(harm)?;
    let m = q.n_angles;
    let mut angles = vec![0.0; m];
    let traj = integrate_with(&u0, &params, &f, cfg.grid.n_modes, |t, z| {
        let tau = eps * t;
        if tau >= q.tau_start && tau <= q.tau_end {
            for (a, z) in angles.iter_mut().zip(z) {
                *a = z.arg();
            }
            weyl.push(&angles);
        }
        Ok(())
    })?;

    let (mut d1, mut dp, mut clips) = (None, None, 0);
    if with_averaging {
        let backend = avg_cfg.backend;
        let j0 = backend.actions_of(&u0, SobolevIndex::ONE)?;
        let avg = integrate_averaged(&j0, horizon, &f, &avg_cfg, cfg.seeds.master ^ 0x5eed_a11e, 1)?;
        clips = avg.clips.len();
        let s1 = action_deviation_series(&traj, &avg, SobolevIndex::ONE, &backend)?;
        d1 = Some(s1.iter().map(|s| s.1).fold(0.0, f64::max));
        let sp = action_deviation_series(&traj, &avg, p, &backend)?;
        dp = Some(sp.iter().map(|s| s.1).fold(0.0, f64::max));
    }
    Ok(MemberResult { member, d1, dp, weyl: weyl.values(), clips })
}

fn run_ensemble(cfg: &ExperimentConfig, eps: f64, with_averaging: bool) -> LabResult<Vec<Result<MemberResult, String>>> {
    let n = cfg.sweep.ensemble;
    // collect keeps member order, so the reduction below is deterministic
    let results: Vec<Result<MemberResult, String>> = (0..n as u64)
        .into_par_iter()
        .map(|k| run_member(cfg, eps, k, with_averaging).map_err(|e| e.to_string()))
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > MAX_FAILED_FRACTION * n as f64 {
        return Err(LabError::Ensemble { what: "sweep", failed, total: n });
    }
    Ok(results)
}

fn summarize(eps: f64, t_fast: f64, results: &[Result<MemberResult, String>], n_harm: usize) -> (EpsRow, Vec<f64>) {
    let ok: Vec<&MemberResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut d: Vec<f64> = ok.iter().filter_map(|m| m.d1).collect();
    let mut dp: Vec<f64> = ok.iter().filter_map(|m| m.dp).collect();
    d.sort_by(f64::total_cmp);
    dp.sort_by(f64::total_cmp);
    let weyl: Vec<f64> =
        (0..n_harm).map(|h| ok.iter().map(|m| m.weyl[h]).sum::<f64>() / ok.len().max(1) as f64).collect();
    let row = EpsRow {
        eps,
        t_fast,
        ok: ok.len(),
        failed: results.len() - ok.len(),
        d_median: quantile(&d, 0.5),
        d_q1: quantile(&d, 0.25),
        d_q3: quantile(&d, 0.75),
        dp_median: quantile(&dp, 0.5),
        weyl_max: weyl.iter().cloned().fold(0.0, f64::max),
        clips: ok.iter().map(|m| m.clips).sum(),
    };
    (row, weyl)
}

/// Runs every ε of the config; `with_averaging = false` skips the averaged
/// equation (equidistribution only).
pub fn sweep(cfg: &ExperimentConfig, with_averaging: bool) -> LabResult<SweepReport> {
    let harm = harmonics(cfg.equidist.n_angles, cfg.equidist.order);
    let mut report =
        SweepReport { rows: vec![], harmonics: harm.clone(), weyl: vec![], members: vec![], runtimes: vec![], files: vec![] };
    for &eps in &cfg.sweep.eps {
        let start = Instant::now();
        let results = run_ensemble(cfg, eps, with_averaging)?;
        let (row, weyl) = summarize(eps, cfg.sweep.horizon_slow / eps, &results, harm.len());
        report.rows.push(row);
        report.weyl.push(weyl);
        report.members.push(results);
        report.runtimes.push(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

fn harmonic_label(l: &[i64]) -> String {
    l.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn weyl_table(report: &SweepReport) -> Table {
    let mut t = Table::new("weyl", &["eps", "harmonic", "weyl_mean"]);
    for (row, w) in report.rows.iter().zip(&report.weyl) {
        for (l, v) in report.harmonics.iter().zip(w) {
            t.push(vec![num(row.eps), harmonic_label(l), num(*v)]);
        }
    }
    t
}

pub fn sweep_tables(report: &SweepReport) -> Vec<Table> {
    let mut rows = Table::new(
        "sweep",
        &["eps", "t_fast", "members_ok", "members_failed", "d_median", "d_q1", "d_q3", "dp_median", "weyl_max", "clips"],
    );
    let mut members = Table::new("members", &["eps", "member", "status", "d1", "dp", "weyl_max", "clips"]);
    for (row, res) in report.rows.iter().zip(&report.members) {
        rows.push(vec![
            num(row.eps),
            num(row.t_fast),
            row.ok.to_string(),
            row.failed.to_string(),
            num(row.d_median),
            num(row.d_q1),
            num(row.d_q3),
            num(row.dp_median),
            num(row.weyl_max),
            row.clips.to_string(),
        ]);
        for (k, r) in res.iter().enumerate() {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            members.push(match r {
                Ok(m) => vec![
                    num(row.eps),
                    k.to_string(),
                    "ok".into(),
                    opt(m.d1),
                    opt(m.dp),
                    num(m.weyl.iter().cloned().fold(0.0, f64::max)),
                    m.clips.to_string(),
                ],
                Err(e) => vec![num(row.eps), k.to_string(), format!("failed: {e}"), String::new(), String::new(), String::new(), String::new()],
            });
        }
    }
    vec![rows, members, weyl_table(report)]
}

fn write_timings(dir: &Path, report: &SweepReport) -> LabResult<()> {
    // wall-clock times vary between runs, so they stay out of the CSV tables
    let text: String = report.rows.iter().zip(&report.runtimes).map(|(r, t)| format!("eps={} seconds={t:.3}\n", r.eps)).collect();
    let path = dir.join("timings.txt");
    std::fs::write(&path, text).map_err(LabError::io(&path))
}

pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> LabResult<SweepReport> {
    let mut report = sweep(cfg, true)?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    for t in sweep_tables(&report) {
        report.files.push(t.write(out, &hash)?);
    }
    write_timings(out, &report)?;
    let m = write_manifest(out, "sweep", cfg, &report.files)?;
    report.files.push(m);
    Ok(report)
}

pub fn run_equidist(cfg: &ExperimentConfig, out: &Path) -> LabResult<SweepReport> {
    let mut report = sweep(cfg, false)?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    let mut max = Table::new("equidist", &["eps", "weyl_max"]);
    for r in &report.rows {
        max.push(vec![num(r.eps), num(r.weyl_max)]);
    }
    report.files.push(max.write(out, &hash)?);
    report.files.push(weyl_table(&report).write(out, &hash)?);
    let m = write_manifest(out, "equidist", cfg, &report.files)?;
    report.files.push(m);
    Ok(report)
}
