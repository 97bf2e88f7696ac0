use std::path::{Path, PathBuf};

use kdvlab_core::birkhoff::{actions, linear_birkhoff, linear_birkhoff_inverse_on};
use kdvlab_core::flow::{integrate, Trajectory};
use kdvlab_core::measure::sample_member;
use kdvlab_core::spectral::{hamiltonian, l2_sq, sobolev_norm, SobolevIndex, SpectralField};

use crate::config::ExperimentConfig;
use crate::output::{ensure_dir, num, write_manifest, Table};
use crate::LabResult;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub trajectory: Trajectory,
    /// `max_t |H(u(t)) − H(u₀)| / |H(u₀)|`.
    pub hamiltonian_drift: f64,
    /// `max_t |‖u(t)‖₀ − ‖u₀‖₀| / ‖u₀‖₀`.
    pub l2_drift: f64,
    pub files: Vec<PathBuf>,
}

pub fn initial_data(cfg: &ExperimentConfig) -> LabResult<SpectralField> {
    if cfg.simulate.initial.is_empty() {
        let v = sample_member(&cfg.measure()?, cfg.seeds.master, 0);
        Ok(linear_birkhoff_inverse_on(&v, cfg.grid_size())?)
    } else {
        cfg.field(&cfg.simulate.initial)
    }
}

pub fn trajectory_table(cfg: &ExperimentConfig, traj: &Trajectory) -> LabResult<Table> {
    let n = cfg.grid.n_modes;
    let p = SobolevIndex::new(cfg.measure.p)?;
    let mut header: Vec<String> = ["t", "tau", "hamiltonian", "norm0", "norm_p"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=n).map(|j| format!("I_{j}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("trajectory", &refs);
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![
            num(*t),
            num(traj.eps * t),
            num(hamiltonian(u)?),
            num(l2_sq(u).sqrt()),
            num(sobolev_norm(u, p)),
        ];
        row.extend(actions(&linear_birkhoff(u, p)).actions().iter().map(|a| num(*a)));
        table.push(row);
    }
    Ok(table)
}

/// Relative drifts of `H` and `‖u‖₀` along a trajectory.
pub fn conservation_drift(traj: &Trajectory) -> LabResult<(f64, f64)> {
    let h0 = hamiltonian(&traj.states[0])?;
    let n0 = l2_sq(&traj.states[0]).sqrt();
    let mut dh: f64 = 0.0;
    let mut dn: f64 = 0.0;
    for u in &traj.states {
        dh = dh.max((hamiltonian(u)? - h0).abs() / h0.abs().max(f64::MIN_POSITIVE));
        dn = dn.max((l2_sq(u).sqrt() - n0).abs() / n0.max(f64::MIN_POSITIVE));
    }
    Ok((dh, dn))
}

pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> LabResult<SimulateReport> {
    let u0 = initial_data(cfg)?;
    let f = cfg.perturbation()?;
    let params = cfg.flow_params(cfg.simulate.eps, cfg.simulate.t_end_fast)?;
    let trajectory = integrate(&u0, &params, &f)?;
    let (hamiltonian_drift, l2_drift) = conservation_drift(&trajectory)?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    let mut files = vec![trajectory_table(cfg, &trajectory)?.write(out, &hash)?];
    let mut diag = Table::new("conservation", &["eps", "t_end", "hamiltonian_drift", "l2_drift"]);
    diag.push(vec![num(params.eps), num(params.t_end), num(hamiltonian_drift), num(l2_drift)]);
    files.push(diag.write(out, &hash)?);
    files.push(write_manifest(out, "simulate", cfg, &files)?);
    Ok(SimulateReport { trajectory, hamiltonian_drift, l2_drift, files })
}
