use std::path::PathBuf;

use kdvlab_core::averaging::{ActionBackend, AveragingConfig, QuadratureScheme};
use kdvlab_core::flow::{FlowParams, PerturbationSpec};
use kdvlab_core::measure::{MeasureSpec, ProbeConfig};
use kdvlab_core::spectral::{default_grid, SobolevIndex, SpectralField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{LabError, LabResult};

pub const STANDARD_TOML: &str = include_str!("../../../configs/standard.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub grid: GridConfig,
    pub perturbation: PerturbationConfig,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    pub sweep: SweepConfig,
    pub averaging: AveragingSection,
    #[serde(default)]
    pub equidist: EquidistConfig,
    #[serde(default)]
    pub qi: QiConfig,
    pub seeds: Seeds,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_modes: usize,
    pub grid_size: Option<usize>,
    pub dt_fast: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKindName {
    Fixed,
    Smoothing,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKindName,
    #[serde(default)]
    pub modes: Vec<(i64, f64)>,
    #[serde(default = "default_zeta0")]
    pub zeta0: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
}

fn default_zeta0() -> f64 {
    2.0
}

fn default_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub p: f64,
    pub zeta0: f64,
    pub sigma_exponent: f64,
    /// Rescale σ so that `(E‖u₀‖₀²)^½` equals this.
    pub target_norm0: Option<f64>,
    #[serde(default = "default_gain")]
    pub sigma_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub eps: f64,
    pub t_end_fast: f64,
    /// Explicit initial modes; empty means member 0 of the measure.
    #[serde(default)]
    pub initial: Vec<(i64, f64)>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { eps: 0.1, t_end_fast: 1.0, initial: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub horizon_slow: f64,
    pub ensemble: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Lattice,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendName {
    Linear,
    Hill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingSection {
    pub n_angles: usize,
    pub m_samples: usize,
    pub scheme: SchemeName,
    pub fd_step: f64,
    pub backend: BackendName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistConfig {
    pub order: usize,
    pub n_angles: usize,
    pub tau_start: f64,
    pub tau_end: f64,
}

impl Default for EquidistConfig {
    fn default() -> Self {
        EquidistConfig { order: 2, n_angles: 3, tau_start: 0.0, tau_end: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QiConfig {
    pub eps: f64,
    pub n_list: Vec<usize>,
    pub measure_modes: usize,
    pub ensemble: usize,
    pub tau_end: f64,
    pub n_records: usize,
    pub ball_samples: usize,
}

impl Default for QiConfig {
    fn default() -> Self {
        QiConfig {
            eps: 0.1,
            n_list: vec![2, 4, 8],
            measure_modes: 8,
            ensemble: 64,
            tau_end: 0.5,
            n_records: 26,
            ball_samples: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

fn check(ok: bool, path: &str, msg: &str) -> LabResult<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::config(path, msg))
    }
}

fn core_err(path: &str) -> impl FnOnce(kdvlab_core::Error) -> LabError + '_ {
    move |e| LabError::config(path, e.to_string())
}

impl ExperimentConfig {
    pub fn standard() -> Self {
        Self::from_toml_str(STANDARD_TOML).expect("built-in standard config is valid")
    }

    pub fn from_toml_str(s: &str) -> LabResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| {
            let path = e.span().map(|sp| format!("bytes {}..{}", sp.start, sp.end)).unwrap_or_else(|| "<root>".into());
            LabError::config(path, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded. The output
    /// directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> LabResult<()> {
        check(self.grid.n_modes > 0, "grid.n_modes", "must be positive")?;
        check(self.grid.dt_fast > 0.0 && self.grid.dt_fast.is_finite(), "grid.dt_fast", "must be positive")?;
        check(self.grid.record_every > 0, "grid.record_every", "must be positive")?;
        SpectralField::zeros(self.grid.n_modes, self.grid_size()).map_err(core_err("grid.grid_size"))?;
        for (s, _) in &self.perturbation.modes {
            check(
                *s != 0 && s.unsigned_abs() as usize <= self.grid.n_modes,
                "perturbation.modes",
                "mode indices must be nonzero and within n_modes",
            )?;
        }
        self.perturbation()?;
        self.measure()?;
        check(self.simulate.eps >= 0.0, "simulate.eps", "must be nonnegative")?;
        check(self.simulate.t_end_fast > 0.0, "simulate.t_end_fast", "must be positive")?;
        let eps = &self.sweep.eps;
        check(!eps.is_empty(), "sweep.eps", "must be nonempty")?;
        check(eps.iter().all(|e| *e > 0.0 && e.is_finite()), "sweep.eps", "entries must be positive")?;
        check(eps.windows(2).all(|w| w[0] > w[1]), "sweep.eps", "must be strictly decreasing")?;
        check(
            self.sweep.horizon_slow > 0.0 && self.sweep.horizon_slow <= 1.0,
            "sweep.horizon_slow",
            "must lie in (0, 1]",
        )?;
        check(self.sweep.ensemble > 0, "sweep.ensemble", "must be positive")?;
        self.averaging()?;
        check(self.averaging.n_angles <= self.grid.n_modes, "averaging.n_angles", "exceeds n_modes")?;
        let q = &self.equidist;
        check(q.order > 0, "equidist.order", "must be positive")?;
        check(q.n_angles > 0 && q.n_angles <= self.grid.n_modes, "equidist.n_angles", "must be in 1..=n_modes")?;
        check(
            0.0 <= q.tau_start && q.tau_start < q.tau_end && q.tau_end <= self.sweep.horizon_slow,
            "equidist.tau_end",
            "need 0 <= tau_start < tau_end <= sweep.horizon_slow",
        )?;
        let qi = &self.qi;
        check(qi.eps > 0.0, "qi.eps", "must be positive")?;
        check(!qi.n_list.is_empty(), "qi.n_list", "must be nonempty")?;
        check(
            qi.n_list.iter().all(|n| *n > 0 && *n <= qi.measure_modes),
            "qi.n_list",
            "entries must be in 1..=qi.measure_modes",
        )?;
        check(qi.measure_modes <= self.grid.n_modes, "qi.measure_modes", "exceeds grid.n_modes")?;
        check(qi.ensemble > 0, "qi.ensemble", "must be positive")?;
        check(qi.tau_end > 0.0, "qi.tau_end", "must be positive")?;
        check(qi.n_records >= 2, "qi.n_records", "must be at least 2")?;
        check(qi.ball_samples >= 100, "qi.ball_samples", "must be at least 100")?;
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.grid.grid_size.unwrap_or_else(|| default_grid(self.grid.n_modes))
    }

    pub fn field(&self, modes: &[(i64, f64)]) -> LabResult<SpectralField> {
        SpectralField::from_modes(self.grid.n_modes, self.grid_size(), modes).map_err(core_err("modes"))
    }

    pub fn perturbation(&self) -> LabResult<PerturbationSpec> {
        let p = &self.perturbation;
        let prof = self.field(&p.modes)?;
        let spec = match p.kind {
            PerturbationKindName::Zero => PerturbationSpec::zero(self.grid.n_modes, self.grid_size()),
            PerturbationKindName::Fixed => PerturbationSpec::fixed_profile(prof, p.zeta0),
            PerturbationKindName::Smoothing => PerturbationSpec::smoothing_map(prof, p.gain, p.zeta0),
        };
        spec.map_err(core_err("perturbation"))
    }

    /// The sampling measure on all `n_modes` pairs, rescaled per `target_norm0`.
    pub fn measure(&self) -> LabResult<MeasureSpec> {
        let m = &self.measure;
        check(m.sigma_scale > 0.0, "measure.sigma_scale", "must be positive")?;
        let p = SobolevIndex::new(m.p).map_err(core_err("measure.p"))?;
        let base = MeasureSpec::power_law(self.grid.n_modes, p, m.zeta0, m.sigma_exponent, m.sigma_scale)
            .map_err(core_err("measure"))?;
        match m.target_norm0 {
            None => Ok(base),
            Some(t) => {
                check(t > 0.0, "measure.target_norm0", "must be positive")?;
                base.scaled(t * t / expected_norm0_sq(&base)).map_err(core_err("measure.target_norm0"))
            }
        }
    }

    pub fn averaging(&self) -> LabResult<AveragingConfig> {
        let a = &self.averaging;
        let scheme = match a.scheme {
            SchemeName::Lattice => QuadratureScheme::LatticeQmc,
            SchemeName::Mc => QuadratureScheme::MonteCarlo,
        };
        let mut cfg = AveragingConfig::new(a.n_angles, a.m_samples, scheme).map_err(core_err("averaging"))?;
        cfg.fd_step = a.fd_step;
        cfg.backend = match a.backend {
            BackendName::Linear => ActionBackend::Linear,
            BackendName::Hill => ActionBackend::Hill { modes: a.n_angles },
        };
        cfg.validate().map_err(core_err("averaging.fd_step"))?;
        Ok(cfg)
    }

    pub fn flow_params(&self, eps: f64, t_end: f64) -> LabResult<FlowParams> {
        let mut p = FlowParams::new(eps, self.grid.dt_fast, t_end, self.grid.record_every)?;
        p.norm_p = SobolevIndex::new(self.measure.p).map_err(core_err("measure.p"))?;
        Ok(p)
    }

    pub fn probe_config(&self, n: usize) -> ProbeConfig {
        ProbeConfig {
            n,
            eps: self.qi.eps,
            tau_end: self.qi.tau_end,
            ensemble: self.qi.ensemble,
            n_records: self.qi.n_records,
            fd_step: self.averaging.fd_step,
        }
    }
}

/// `E‖u₀‖₀²` for `u₀ = dΨ(0)⁻¹ v`, `v ~ m`.
pub fn expected_norm0_sq(m: &MeasureSpec) -> f64 {
    (1..=m.n_modes()).map(|j| 2.0 * m.variance(j) * kdvlab_core::TAU * j as f64).sum()
}
