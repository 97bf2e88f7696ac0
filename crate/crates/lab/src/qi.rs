use std::path::{Path, PathBuf};

use kdvlab_core::flow::PerturbationSpec;
use kdvlab_core::measure::{ball_measure_ratio, probe_member, summarize, BallRatio, MeasureSpec, QiReport};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{ensure_dir, num, write_manifest, Table};
use crate::sweep::MAX_FAILED_FRACTION;
use crate::{LabError, LabResult};

/// Share of the measure put in the test ball.
pub const BALL_MASS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct QiRun {
    pub reports: Vec<QiReport>,
    pub balls: Vec<BallRatio>,
    /// `max |A(τ)|` over the ensemble with `f = 0`.
    pub control_max_a: f64,
    pub files: Vec<PathBuf>,
}

impl QiRun {
    /// `(max − min)/max` of `max|cⁿ|` across the dimensions.
    pub fn cn_spread(&self) -> f64 {
        let c: Vec<f64> = self.reports.iter().map(|r| r.max_abs_cn).collect();
        let hi = c.iter().cloned().fold(0.0, f64::max);
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi > 0.0 { (hi - lo) / hi } else { 0.0 }
    }

    pub fn balls_consistent(&self) -> bool {
        self.reports.iter().zip(&self.balls).all(|(r, b)| b.consistent_with(r.c_hat, r.tau_end))
    }
}

pub fn qi_measure(cfg: &ExperimentConfig) -> LabResult<MeasureSpec> {
    Ok(cfg.measure()?.truncated(cfg.qi.measure_modes)?)
}

fn probe(cfg: &ExperimentConfig, m: &MeasureSpec, f: &PerturbationSpec, n: usize) -> LabResult<QiReport> {
    let pc = cfg.probe_config(n);
    let results: Vec<_> =
        (0..pc.ensemble as u64).into_par_iter().map(|k| probe_member(m, f, &pc, cfg.seeds.master, k)).collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > MAX_FAILED_FRACTION * pc.ensemble as f64 {
        return Err(match results.into_iter().find_map(Result::err) {
            Some(e) if failed == pc.ensemble => e.into(),
            _ => LabError::Ensemble { what: "qi probe", failed, total: pc.ensemble },
        });
    }
    Ok(summarize(&pc, results.into_iter().filter_map(Result::ok).collect()))
}

pub fn qi(cfg: &ExperimentConfig) -> LabResult<QiRun> {
    let m = qi_measure(cfg)?;
    let f = cfg.perturbation()?;
    let zero = PerturbationSpec::zero(cfg.grid.n_modes, cfg.grid_size())?;
    let mut run = QiRun { reports: vec![], balls: vec![], control_max_a: 0.0, files: vec![] };
    for &n in &cfg.qi.n_list {
        run.reports.push(probe(cfg, &m, &f, n)?);
        run.balls.push(ball_measure_ratio(&m, &f, &cfg.probe_config(n), cfg.qi.ball_samples, BALL_MASS, cfg.seeds.master)?);
        let control = probe(cfg, &m, &zero, n)?;
        run.control_max_a = run.control_max_a.max(control.members.iter().map(|p| p.max_abs_a).fold(0.0, f64::max));
    }
    Ok(run)
}

pub const QI_COLUMNS: [&str; 12] = [
    "n", "eps", "tau_end", "members", "c_hat", "max_abs_cn", "max_identity_residual", "ball_ratio", "ball_ci_lo",
    "ball_ci_hi", "ball_consistent", "control_max_a",
];

pub fn qi_tables(run: &QiRun) -> Vec<Table> {
    let mut summary = Table::new("qi", &QI_COLUMNS);
    let mut records = Table::new("qi_records", &["n", "member", "tau", "log_b", "cn", "a"]);
    for (r, b) in run.reports.iter().zip(&run.balls) {
        summary.push(vec![
            r.n.to_string(),
            num(r.eps),
            num(r.tau_end),
            r.members.len().to_string(),
            num(r.c_hat),
            num(r.max_abs_cn),
            num(r.max_identity_residual),
            num(b.ratio),
            num(b.ci_lo),
            num(b.ci_hi),
            b.consistent_with(r.c_hat, r.tau_end).to_string(),
            num(run.control_max_a),
        ]);
        for p in &r.members {
            for d in &p.records {
                records.push(vec![r.n.to_string(), p.member.to_string(), num(d.tau), num(d.log_b), num(d.cn), num(d.a)]);
            }
        }
    }
    vec![summary, records]
}

pub fn run_qi(cfg: &ExperimentConfig, out: &Path) -> LabResult<QiRun> {
    let mut run = qi(cfg)?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    for t in qi_tables(&run) {
        run.files.push(t.write(out, &hash)?);
    }
    let m = write_manifest(out, "qi", cfg, &run.files)?;
    run.files.push(m);
    Ok(run)
}
