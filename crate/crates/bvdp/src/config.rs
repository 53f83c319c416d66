//! TOML run configuration.
//!
//! Every table is optional; missing keys take the reference values. A
//! minimal file only needs the load:
//!
//! ```toml
//! [loads.dirichlet]
//! profile = { kind = "ramp", slope = 1.0 }
//! matrix = [[1.0, 0.0], [0.0, 0.0]]
//! ```

use std::path::{Path, PathBuf};

use bvdp_core::bv_diagnostics::DiagnosticSettings;
use bvdp_core::energetics::Loads;
use bvdp_core::material_laws::MaterialParams;
use bvdp_core::reparam::ReparamSettings;
use bvdp_core::tensor_mesh::{Mesh, NonlocalQuadrature, Side};
use bvdp_core::viscous_solver::SolverSettings;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};
use crate::mesh_io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideName {
    Left,
    Right,
    Bottom,
    Top,
}

impl From<SideName> for Side {
    fn from(s: SideName) -> Self {
        match s {
            SideName::Left => Side::Left,
            SideName::Right => Side::Right,
            SideName::Bottom => Side::Bottom,
            SideName::Top => Side::Top,
        }
    }
}

/// Structured rectangle, or a mesh file when `file` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    /// Plain-text mesh, relative to the config file. Takes precedence over
    /// the rectangle keys.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub dirichlet: Vec<SideName>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            file: None,
            nx: 16,
            ny: 16,
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            dirichlet: vec![SideName::Left, SideName::Right],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t_end: f64,
    pub tau: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { t_end: 1.0, tau: 1e-3 }
    }
}

/// Run-level pass/fail thresholds besides the diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    pub max_edb_residual: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self { max_edb_residual: 2e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Viscosities, nonincreasing. Repeated entries are allowed and give
    /// identical ledgers.
    pub eps: Vec<f64>,
    /// Arclength points, shared by all members, at which energies are compared.
    pub shared_samples: usize,
    pub workers: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { eps: vec![4e-2, 2e-2, 1e-2, 5e-3], shared_samples: 16, workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub nonlocal: NonlocalQuadrature,
    pub material: MaterialParams,
    pub loads: Loads,
    pub time: TimeSpec,
    pub solver: SolverSettings,
    pub reparam: ReparamSettings,
    pub diagnostics: DiagnosticSettings,
    pub checks: CheckSpec,
    pub sweep: SweepSpec,
    pub output: OutputSpec,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub tau: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Reads and validates a config file. A relative mesh path is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(RunError::io(path))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(f) = &cfg.mesh.file {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.mesh.file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(eps) = o.eps {
            self.material.eps = eps;
        }
        if let Some(tau) = o.tau {
            self.time.tau = tau;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(w) = o.workers {
            self.sweep.workers = w;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(RunError::Config(m));
        self.material.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.diagnostics.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let TimeSpec { t_end, tau } = self.time;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return cfg(format!("t_end must be positive, got {t_end}"));
        }
        if !(tau > 0.0 && tau <= t_end) {
            return cfg(format!("tau must lie in (0, t_end], got {tau}"));
        }
        if self.reparam.n_samples < 2 || !(self.reparam.tol_eq > 0.0) {
            return cfg("reparam needs n_samples >= 2 and tol_eq > 0".into());
        }
        if !(self.checks.max_edb_residual > 0.0) {
            return cfg("checks.max_edb_residual must be positive".into());
        }
        let m = &self.mesh;
        if m.file.is_none() && (m.nx == 0 || m.ny == 0) {
            return cfg("mesh needs nx, ny >= 1".into());
        }
        if self.nonlocal.far_order == 0 || self.nonlocal.touch_order == 0 {
            return cfg("nonlocal quadrature orders must be positive".into());
        }
        let s = &self.sweep;
        if s.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return cfg("sweep eps values must be positive".into());
        }
        if s.eps.windows(2).any(|w| w[1] > w[0]) {
            return cfg(format!("sweep eps list must be nonincreasing, got {:?}", s.eps));
        }
        if s.shared_samples == 0 || s.workers == 0 {
            return cfg("sweep needs shared_samples >= 1 and workers >= 1".into());
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let m = &self.mesh;
        match &m.file {
            Some(path) => mesh_io::read_mesh(path),
            None => {
                let sides: Vec<Side> = m.dirichlet.iter().map(|s| Side::from(*s)).collect();
                Ok(Mesh::rectangle(m.nx, m.ny, m.lower, m.upper, &sides)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_the_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.loads = Loads::horizontal_stretch(1.0);
        cfg.mesh.file = Some("m.txt".into());
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid_values() {
        for text in [
            "[time]\ntau = 2.0",
            "[material]\nkappa = -1.0",
            "[sweep]\neps = [1e-2, 2e-2]",
            "[solver]\ntol_u = 0.0",
            "[mesh]\nnx = 0",
            "[mesh]\nunknown = 1",
            "[material]\nm = 1.5",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(RunError::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_are_validated() {
        let mut cfg = RunConfig::default();
        let o = Overrides { eps: Some(5e-3), tau: Some(2e-3), out: Some("x".into()), workers: Some(3) };
        cfg.apply(&o).unwrap();
        assert_eq!((cfg.material.eps, cfg.time.tau, cfg.sweep.workers), (5e-3, 2e-3, 3));
        assert!(cfg.apply(&Overrides { tau: Some(-1.0), ..Default::default() }).is_err());
    }
}
