//! Run configuration: one flat TOML table per concern, parsed into typed
//! sections with explicit defaults. Every resolved value is echoed back
//! into the output directory so a run can be reproduced from its own
//! artifacts, and the echo parses back to an equal configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::profile::Profile1d;
use crate::spde::CoefficientSet;

/// Experiment entry points the binary exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyIdentity,
    CertifyWeights,
    Simulate,
    Carleman,
    Observability,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::VerifyIdentity,
        Command::CertifyWeights,
        Command::Simulate,
        Command::Carleman,
        Command::Observability,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentity => "verify-identity",
            Command::CertifyWeights => "certify-weights",
            Command::Simulate => "simulate",
            Command::Carleman => "carleman",
            Command::Observability => "observability",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown command {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Weight shape. `lambda`, `beta` and `ell_shift` may be omitted; the
/// runner then fills them from the coefficient-size rule and the
/// positivity certificate and echoes the resolved values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    pub lambda: Option<f64>,
    pub c: f64,
    /// Defaults to 1 - c, the largest slope the certificate ladder accepts.
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub ell_shift: Option<f64>,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection { lambda: None, c: 0.1, k: None, beta: None, ell_shift: None }
    }
}

impl WeightSection {
    pub fn k_value(&self) -> f64 {
        self.k.unwrap_or(1.0 - self.c)
    }
}

/// Spatial resolution and time step. Exactly one of `dt` (absolute) and
/// `cfl` (fraction of the scheme's stability limit) may be given; with
/// neither, the full stability limit is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub cells: usize,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: 64, dt: None, cfl: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub t_final: f64,
    pub num_paths: usize,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { t_final: 0.0, num_paths: 0, seed: 0 }
    }
}

/// Equation coefficients; omitted entries are zero. `a2x`/`a2y` are the
/// two components of the gradient coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsSection {
    pub a1: Option<crate::profile::SeparableField>,
    pub a2x: Option<crate::profile::SeparableField>,
    pub a2y: Option<crate::profile::SeparableField>,
    pub a3: Option<crate::profile::SeparableField>,
    pub a4: Option<crate::profile::SeparableField>,
    pub f: Option<crate::profile::SeparableField>,
    pub g: Option<crate::profile::SeparableField>,
}

impl CoefficientsSection {
    pub fn to_set(&self) -> CoefficientSet {
        let mut set = CoefficientSet::zero();
        if let Some(a) = &self.a1 {
            set.a1 = a.clone();
        }
        if let Some(a) = &self.a2x {
            set.a2[0] = a.clone();
        }
        if let Some(a) = &self.a2y {
            set.a2[1] = a.clone();
        }
        if let Some(a) = &self.a3 {
            set.a3 = a.clone();
        }
        if let Some(a) = &self.a4 {
            set.a4 = a.clone();
        }
        if let Some(a) = &self.f {
            set.f = a.clone();
        }
        if let Some(a) = &self.g {
            set.g = a.clone();
        }
        set
    }
}

/// Separable spatial profile fx(x) fy(y); `fy` defaults to one so interval
/// configurations only name `fx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceProduct {
    pub fx: Profile1d,
    #[serde(default = "Profile1d::one")]
    pub fy: Profile1d,
}

impl SpaceProduct {
    pub fn value(&self, x: crate::geometry::Point) -> f64 {
        self.fx.eval(x[0]).v * self.fy.eval(x[1]).v
    }
}

/// Initial displacement and velocity; omitted entries are zero fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub y0: Option<SpaceProduct>,
    pub v0: Option<SpaceProduct>,
}

/// Knobs for the identity convergence ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitySection {
    /// Space cells per ladder level, coarse to fine.
    pub ladder: Vec<usize>,
    /// "identity" or "sinusoidal": constant or variable principal part.
    pub principal: String,
    /// Time step as a multiple of the space step.
    pub time_ratio: f64,
    /// Least-squares convergence order the run must reach to pass.
    pub min_order: f64,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            ladder: vec![32, 64, 128],
            principal: "identity".into(),
            time_ratio: 0.9,
            min_order: 1.8,
        }
    }
}

/// Positivity-scan controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificationSection {
    /// Scan lattice is `lattice x lattice` nodes.
    pub lattice: usize,
    /// Re-check the certified minima on a lattice this many times finer;
    /// 1 skips the re-check.
    pub verify_scale: usize,
}

impl Default for CertificationSection {
    fn default() -> Self {
        CertificationSection { lattice: 200, verify_scale: 1 }
    }
}

/// Parameter grid for `sweep`: the cartesian product of the three lists,
/// each point run through `command`. A missing list reuses the base
/// configuration value; an explicitly empty list empties the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Multiplies the time profile of a1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write the final fields as a binary dump next to the CSV reports.
    pub dump_fields: bool,
    /// Keep every n-th time node in the simulate series.
    pub series_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), dump_fields: false, series_stride: 1 }
    }
}

/// Complete run description. All sections have defaults so a minimal file
/// only names what it changes; validation is per command and names the
/// offending key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional cross-check against the command given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub identity: IdentitySection,
    #[serde(default)]
    pub certification: CertificationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&body)
    }

    pub fn to_toml_string(&self) -> String {
        // Serialization of this struct cannot fail: all maps are structs
        // with string keys.
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Command-line overrides; the echoed config carries the final values.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<&str>) {
        if let Some(s) = seed {
            self.simulation.seed = s;
        }
        if let Some(o) = out {
            self.output.dir = o.to_string();
        }
    }

    /// Structural checks shared by every command, then per-command
    /// requirements. Errors cite the section.key they refer to.
    pub fn validate(&self, command: Command) -> Result<()> {
        if let Some(declared) = self.command {
            if declared != command {
                return Err(Error::Config(format!(
                    "config declares command = \"{declared}\" but \"{command}\" was requested"
                )));
            }
        }
        // Rebuilding the domain re-runs its geometric feasibility checks,
        // which plain deserialization bypasses.
        let domain = DomainSpec::new(self.domain.shape, self.domain.x0)
            .map_err(|e| Error::Config(format!("domain: {e}")))?;

        let w = &self.weights;
        if !(w.c > 0.0) {
            return Err(Error::Config(format!(
                "weights.c must be positive, got {}",
                w.c
            )));
        }
        let k = w.k_value();
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::Config(format!(
                "weights.k must lie in (0, 1), got {k}"
            )));
        }
        if let Some(l) = w.lambda {
            if !(l > 0.0) {
                return Err(Error::Config(format!(
                    "weights.lambda must be positive, got {l}"
                )));
            }
        }
        if self.grid.dt.is_some() && self.grid.cfl.is_some() {
            return Err(Error::Config(
                "grid.dt and grid.cfl are mutually exclusive; set one".into(),
            ));
        }
        if let Some(dt) = self.grid.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!(
                    "grid.dt must be positive, got {dt}"
                )));
            }
        }
        if let Some(cfl) = self.grid.cfl {
            if !(cfl > 0.0 && cfl <= 1.0) {
                return Err(Error::Config(format!(
                    "grid.cfl must lie in (0, 1], got {cfl}"
                )));
            }
        }
        if self.output.series_stride == 0 {
            return Err(Error::Config("output.series_stride must be at least 1".into()));
        }

        let needs_grid = !matches!(command, Command::CertifyWeights);
        if needs_grid && self.grid.cells < 2 {
            return Err(Error::Config(format!(
                "grid.cells must be at least 2, got {}",
                self.grid.cells
            )));
        }
        let needs_horizon = !matches!(command, Command::VerifyIdentity);
        if needs_horizon && !(self.simulation.t_final > 0.0) {
            return Err(Error::Config(format!(
                "simulation.t_final must be positive, got {}",
                self.simulation.t_final
            )));
        }

        match command {
            Command::VerifyIdentity => {
                if self.identity.ladder.len() < 2 {
                    return Err(Error::Config(
                        "identity.ladder needs at least 2 levels to fit an order".into(),
                    ));
                }
                if self.identity.ladder.iter().any(|&c| c < 4) {
                    return Err(Error::Config(
                        "identity.ladder entries must be at least 4 cells".into(),
                    ));
                }
                if !matches!(self.identity.principal.as_str(), "identity" | "sinusoidal") {
                    return Err(Error::Config(format!(
                        "identity.principal must be \"identity\" or \"sinusoidal\", got {:?}",
                        self.identity.principal
                    )));
                }
                if !(self.identity.time_ratio > 0.0) {
                    return Err(Error::Config(format!(
                        "identity.time_ratio must be positive, got {}",
                        self.identity.time_ratio
                    )));
                }
                if !(self.simulation.t_final > 0.0) {
                    return Err(Error::Config(format!(
                        "simulation.t_final must be positive, got {}",
                        self.simulation.t_final
                    )));
                }
            }
            Command::CertifyWeights | Command::Carleman => {
                // The scan horizon must sit inside the admissible window;
                // rejecting it here names the key instead of failing deep
                // in the ladder search.
                let (lo, hi) = domain.admissible_time_window(w.c)?;
                let t = self.simulation.t_final;
                if !(t > lo && t < hi) {
                    return Err(Error::Config(format!(
                        "simulation.t_final = {t} lies outside the admissible horizon \
                         window ({lo:.6}, {hi:.6}) for coupling c = {}",
                        w.c
                    )));
                }
                if self.certification.lattice < 8 {
                    return Err(Error::Config(format!(
                        "certification.lattice must be at least 8, got {}",
                        self.certification.lattice
                    )));
                }
                if self.certification.verify_scale == 0 {
                    return Err(Error::Config(
                        "certification.verify_scale must be at least 1".into(),
                    ));
                }
            }
            Command::Simulate | Command::Observability => {}
            Command::Sweep => {
                let sweep = self.sweep.as_ref().ok_or_else(|| {
                    Error::Config("sweep requires a [sweep] section".into())
                })?;
                match sweep.command {
                    Command::Carleman | Command::Observability | Command::Simulate => {}
                    other => {
                        return Err(Error::Config(format!(
                            "sweep.command must be carleman, observability or simulate, \
                             got \"{other}\""
                        )));
                    }
                }
                for (name, list) in [("lambda", &sweep.lambda), ("beta", &sweep.beta)] {
                    if let Some(vals) = list {
                        if let Some(v) = vals.iter().find(|v| !(**v > 0.0)) {
                            return Err(Error::Config(format!(
                                "sweep.{name} entries must be positive, got {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn shell_config() -> ExperimentConfig {
        let mut cfg: ExperimentConfig = toml::from_str(
            r#"
            [domain]
            shape = "interval"
            a = 1.0
            b = 2.0
            x0 = [0.0, 0.0]
            "#,
        )
        .unwrap();
        cfg.simulation.t_final = 42.0;
        cfg
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("carlema".parse::<Command>().is_err());
    }

    #[test]
    fn echo_round_trips_to_an_equal_config() {
        let mut cfg = shell_config();
        cfg.weights.lambda = Some(16.0);
        cfg.weights.ell_shift = Some(-64.0);
        cfg.simulation.num_paths = 12;
        cfg.simulation.seed = 7;
        cfg.coefficients.a4 = Some(crate::profile::SeparableField {
            time: Profile1d::Constant { value: 1.0 },
            fx: Profile1d::one(),
            fy: Profile1d::one(),
        });
        cfg.initial.y0 = Some(SpaceProduct {
            fx: Profile1d::Sin { amp: 1.0, freq: 3.0, phase: 0.25 },
            fy: Profile1d::one(),
        });
        cfg.sweep = Some(SweepSection {
            command: Command::Carleman,
            lambda: Some(vec![16.0, 32.0]),
            beta: None,
            a1_scale: Some(vec![0.0, 1.0]),
        });
        let echoed = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&echoed).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = shell_config();
        assert_eq!(cfg.grid.cells, 64);
        assert_eq!(cfg.weights.c, 0.1);
        assert!((cfg.weights.k_value() - 0.9).abs() < 1e-15);
        assert_eq!(cfg.identity.ladder, vec![32, 64, 128]);
        assert_eq!(cfg.output.dir, "out");
        assert!(cfg.coefficients.to_set() == CoefficientSet::zero());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str(
            r#"
            [domain]
            shape = "interval"
            a = 0.0
            b = 1.0
            x0 = [2.0, 0.0]

            [grid]
            cels = 64
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cels"), "{err}");
    }

    #[test]
    fn horizon_outside_the_window_names_the_key_and_the_window() {
        let mut cfg = shell_config();
        cfg.simulation.t_final = 100.0;
        let err = cfg.validate(Command::CertifyWeights).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("simulation.t_final"), "{msg}");
        assert!(msg.contains("44.7"), "window bounds missing: {msg}");
        cfg.simulation.t_final = 42.0;
        cfg.validate(Command::CertifyWeights).unwrap();
    }

    #[test]
    fn conflicting_step_controls_are_rejected() {
        let mut cfg = shell_config();
        cfg.grid.dt = Some(1e-3);
        cfg.grid.cfl = Some(0.5);
        let err = cfg.validate(Command::Simulate).unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let mut cfg = shell_config();
        cfg.command = Some(Command::Simulate);
        assert!(cfg.validate(Command::Carleman).is_err());
        assert!(cfg.validate(Command::Simulate).is_ok());
    }

    #[test]
    fn sweep_requires_its_section_and_a_pointwise_command() {
        let mut cfg = shell_config();
        let err = cfg.validate(Command::Sweep).unwrap_err();
        assert!(err.to_string().contains("[sweep]"), "{err}");
        cfg.sweep = Some(SweepSection {
            command: Command::Sweep,
            lambda: None,
            beta: None,
            a1_scale: None,
        });
        assert!(cfg.validate(Command::Sweep).is_err());
        cfg.sweep.as_mut().unwrap().command = Command::Simulate;
        cfg.validate(Command::Sweep).unwrap();
    }

    #[test]
    fn overrides_replace_seed_and_output_directory() {
        let mut cfg = shell_config();
        cfg.apply_overrides(Some(99), Some("elsewhere"));
        assert_eq!(cfg.simulation.seed, 99);
        assert_eq!(cfg.output.dir, "elsewhere");
        cfg.apply_overrides(None, None);
        assert_eq!(cfg.simulation.seed, 99);
    }

    #[test]
    fn domain_feasibility_is_rechecked_on_validate() {
        // x0 inside the closure parses fine but must fail validation.
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [domain]
            shape = "interval"
            a = 0.0
            b = 1.0
            x0 = [0.5, 0.0]

            [simulation]
            t_final = 1.0
            "#,
        )
        .unwrap();
        let err = cfg.validate(Command::Simulate).unwrap_err();
        assert!(err.to_string().contains("domain"), "{err}");
    }

    #[test]
    fn space_products_default_to_a_flat_transverse_factor() {
        let p: SpaceProduct = toml::from_str(
            r#"
            fx = { kind = "sin", amp = 2.0, freq = 1.0, phase = 0.0 }
            "#,
        )
        .unwrap();
        assert_eq!(p.fy, Profile1d::one());
        assert!((p.value([std::f64::consts::FRAC_PI_2, 3.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shape_tags_are_flat_keys() {
        let cfg = shell_config();
        match cfg.domain.shape {
            Shape::Interval { a, b } => {
                assert_eq!((a, b), (1.0, 2.0));
            }
            _ => panic!("wrong shape"),
        }
        let echoed = cfg.to_toml_string();
        assert!(echoed.contains("shape = \"interval\""), "{echoed}");
    }
}
