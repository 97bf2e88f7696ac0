use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kdvlab::acceptance::{run_criterion, Criterion};
use kdvlab::output::load_config;
use kdvlab::{plots, qi, simulate, sweep, ExperimentConfig, LabError, LabResult};

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Perturbed KdV averaging laboratory")]
struct Cli {
    /// Experiment config (TOML) or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seeds.master`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 if the run's acceptance checks fail.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it with conservation diagnostics.
    Simulate,
    /// Compare perturbed actions with the averaged equation over the ε list.
    Sweep,
    /// Weyl sums of the angles along perturbed trajectories.
    Equidist,
    /// Density transport probe and ball-measure test.
    Qi,
    /// Write gnuplot scripts for existing CSV reports.
    EmitPlots {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run the acceptance criteria (all, or the listed ids); implies --check.
    Check { ids: Vec<u32> },
}

fn report(checks: &[Criterion]) -> LabResult<()> {
    for c in checks {
        println!("{c}");
    }
    let failed: Vec<u32> = checks.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    if failed.is_empty() { Ok(()) } else { Err(LabError::Acceptance(failed)) }
}

fn run(cli: Cli) -> LabResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::standard(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds.master = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    let out = cfg.output.dir.clone();
    let gate = |checks: Vec<Criterion>| if cli.check { report(&checks) } else { Ok(()) };
    match cli.command {
        Command::Simulate => {
            let r = simulate::run_simulate(&cfg, &out)?;
            println!("H drift {:.3e}, L2 drift {:.3e}", r.hamiltonian_drift, r.l2_drift);
            let ok = cfg.simulate.eps > 0.0 || (r.hamiltonian_drift <= 1e-8 && r.l2_drift <= 1e-10);
            gate(vec![Criterion { id: 1, name: "conservation", pass: ok, detail: "eps = 0 drifts".into() }])
        }
        Command::Sweep => {
            let r = sweep::run_sweep(&cfg, &out)?;
            for row in &r.rows {
                println!("eps={} D median {:.4e} [{:.4e}, {:.4e}] weyl max {:.3e} failed {}", row.eps, row.d_median, row.d_q1, row.d_q3, row.weyl_max, row.failed);
            }
            gate(vec![
                Criterion { id: 5, name: "D decreasing", pass: r.d_criterion(), detail: String::new() },
                Criterion { id: 6, name: "Weyl sums", pass: r.weyl_criterion(0.2), detail: String::new() },
            ])
        }
        Command::Equidist => {
            let r = sweep::run_equidist(&cfg, &out)?;
            for row in &r.rows {
                println!("eps={} weyl max {:.3e}", row.eps, row.weyl_max);
            }
            gate(vec![Criterion { id: 6, name: "Weyl sums", pass: r.weyl_criterion(0.2), detail: String::new() }])
        }
        Command::Qi => {
            let r = qi::run_qi(&cfg, &out)?;
            for rep in &r.reports {
                println!("n={} c_hat {:.4e} max|c^n| {:.4e}", rep.n, rep.c_hat, rep.max_abs_cn);
            }
            let pass = r.cn_spread() < 0.2 && r.balls_consistent() && r.control_max_a <= 1e-12;
            gate(vec![Criterion { id: 9, name: "quasi-invariance", pass, detail: String::new() }])
        }
        Command::EmitPlots { reports } => {
            for p in plots::emit_plots(&reports, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Check { ids } => {
            let ids = if ids.is_empty() { (1..=10).collect() } else { ids };
            let checks = ids
                .iter()
                .map(|i| run_criterion(*i).ok_or_else(|| LabError::config("check", format!("no criterion {i}"))))
                .collect::<LabResult<Vec<_>>>()?;
            report(&checks)
        }
    }
}

fn main() -> ExitCode {
    // usage errors are config errors (status 1); clap would use 2
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdvlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
