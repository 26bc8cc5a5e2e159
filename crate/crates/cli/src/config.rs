//! TOML run configuration.
//!
//! Every key except `schema_version` may be omitted; the defaults below
//! reproduce the noiseless DMANH⁺ sweep (builtin 8-point matrix, dt = 0.5 fs,
//! 32768 steps, oracle backend, site-0 initial state).

use std::ops::Range;
use std::path::{Path, PathBuf};

use nucdyn::dynamics::{Backend, InitialStateSpec, RemapKind};
use nucdyn::mps::{DEFAULT_CHI_MAX, DEFAULT_TOL};
use nucdyn::simulator::NoiseModel;
use nucdyn::spectrum::{Window, DEFAULT_THRESHOLD_FACTOR};
use nucdyn::units::PROTON_MASS_AU;
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Spanned<u32>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub kinetic: KineticSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub mps: MpsSection,
    /// Shots per timestep and block for the noisy backend; 0 reads the exact
    /// outcome distribution instead of sampling.
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    source_text: String,
}

/// Uniform grid in Bohr, used by the analytic potentials.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_points: 8,
            x_min: -1.0,
            x_max: 1.0,
        }
    }
}

/// DAF kernel; `sigma` defaults to twice the grid spacing and `m_daf` to 20.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticSection {
    pub mass: f64,
    pub sigma: Option<f64>,
    pub m_daf: Option<u32>,
}

impl Default for KineticSection {
    fn default() -> Self {
        Self {
            mass: PROTON_MASS_AU,
            sigma: None,
            m_daf: None,
        }
    }
}

/// `source` is `builtin_dmanh`, `harmonic`, `box`, or a path to an
/// `x_bohr,v_hartree` CSV (whose grid replaces `[grid]`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub source: Spanned<String>,
    /// Angular frequency of the `harmonic` source, Hartree.
    pub omega: f64,
    /// Wall height at the two end points of the `box` source, Hartree.
    pub wall: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            source: Spanned::new(0..0, "builtin_dmanh".into()),
            omega: 0.01,
            wall: 1e7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Oracle,
    CircuitIdeal,
    CircuitNoisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemapName {
    FirstOrder,
    ExactPhase,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub dt_fs: f64,
    pub n_steps: usize,
    pub backend: BackendName,
    pub remap_mode: RemapName,
    /// Write the compiled block programs of every timestep (circuit backends).
    pub emit_programs: bool,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            dt_fs: 0.5,
            n_steps: 32768,
            backend: BackendName::Oracle,
            remap_mode: RemapName::ExactPhase,
            emit_programs: false,
        }
    }
}

/// `variant` is `site` (`params = [k]`), `two_site` (`[i, j, phase]`) or
/// `eigenstate` (`[k]`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub variant: Spanned<String>,
    pub params: Spanned<Vec<f64>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            variant: Spanned::new(0..0, "site".into()),
            params: Spanned::new(0..0, vec![0.0]),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub enabled: bool,
    pub fidelity_1q: f64,
    pub fidelity_ms: f64,
    pub fidelity_cnot: f64,
    pub readout_flip: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let m = NoiseModel::default();
        Self {
            enabled: true,
            fidelity_1q: m.fidelity_1q,
            fidelity_ms: m.fidelity_ms,
            fidelity_cnot: m.fidelity_cnot,
            readout_flip: m.readout_flip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowName {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub window: WindowName,
    pub threshold_factor: f64,
    pub max_deviation_cm1: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            window: WindowName::Rectangular,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            max_deviation_cm1: 25.0,
        }
    }
}

/// Coupled double-well × harmonic-mode model for `mps-demo`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpsSection {
    pub n_harmonic: usize,
    pub coupling_hartree: f64,
    pub t_fs: f64,
    pub substeps: usize,
    pub chi_max: usize,
    pub tol: f64,
}

impl Default for MpsSection {
    fn default() -> Self {
        Self {
            n_harmonic: 8,
            coupling_hartree: 0.002,
            t_fs: 10.0,
            substeps: 20,
            chi_max: DEFAULT_CHI_MAX,
            tol: DEFAULT_TOL,
        }
    }
}

fn default_shots() -> u64 {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: Spanned::new(0..0, SCHEMA_VERSION),
            grid: GridSection::default(),
            kinetic: KineticSection::default(),
            potential: PotentialSection::default(),
            dynamics: DynamicsSection::default(),
            initial: InitialSection::default(),
            noise: NoiseSection::default(),
            spectrum: SpectrumSection::default(),
            mps: MpsSection::default(),
            shots: default_shots(),
            seed: 0,
            output_dir: default_output_dir(),
            base_dir: PathBuf::from("."),
            source_text: String::new(),
        }
    }
}

/// Where the potential comes from after path resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSource {
    Builtin,
    Harmonic,
    Box,
    File(PathBuf),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.base_dir.as_os_str().is_empty() {
            cfg.base_dir = PathBuf::from(".");
        }
        cfg.output_dir = cfg.base_dir.join(&cfg.output_dir);
        cfg.source_text = text.to_string();
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn line_of(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.source_text.len());
        self.source_text[..end].matches('\n').count() + 1
    }

    fn at(&self, path: &Path, span: Range<usize>, msg: String) -> CliError {
        if self.source_text.is_empty() {
            CliError::config(msg)
        } else {
            CliError::config(format!("{}:{}: {msg}", path.display(), self.line_of(span)))
        }
    }

    fn validate(&self, path: &Path) -> Result<(), CliError> {
        let version = *self.schema_version.get_ref();
        if version != SCHEMA_VERSION {
            return Err(self.at(
                path,
                self.schema_version.span(),
                format!("schema_version {version} is not supported (expected {SCHEMA_VERSION})"),
            ));
        }
        if let PotentialSource::File(p) = self.potential_source() {
            if !p.is_file() {
                return Err(self.at(
                    path,
                    self.potential.source.span(),
                    format!("potential file {} does not exist", p.display()),
                ));
            }
        }
        self.initial_spec()
            .map_err(|msg| self.at(path, self.initial.params.span(), msg))?;
        Ok(())
    }

    /// Replaces `potential.source` from the command line; file paths resolve
    /// against the working directory.
    pub fn override_potential(&mut self, source: &str) -> Result<(), CliError> {
        let value = match source {
            "builtin_dmanh" | "harmonic" | "box" => source.to_string(),
            path => std::path::absolute(path)
                .map_err(|e| CliError::config(format!("{path}: {e}")))?
                .to_string_lossy()
                .into_owned(),
        };
        self.potential.source = Spanned::new(0..0, value);
        if let PotentialSource::File(p) = self.potential_source() {
            if !p.is_file() {
                return Err(CliError::config(format!("potential file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn potential_source(&self) -> PotentialSource {
        match self.potential.source.get_ref().as_str() {
            "builtin_dmanh" => PotentialSource::Builtin,
            "harmonic" => PotentialSource::Harmonic,
            "box" => PotentialSource::Box,
            other => PotentialSource::File(self.base_dir.join(other)),
        }
    }

    pub fn initial_spec(&self) -> Result<InitialStateSpec, String> {
        parse_initial(self.initial.variant.get_ref(), self.initial.params.get_ref())
    }

    pub fn noise_model(&self) -> NoiseModel {
        if !self.noise.enabled {
            return NoiseModel::noiseless();
        }
        NoiseModel {
            fidelity_1q: self.noise.fidelity_1q,
            fidelity_ms: self.noise.fidelity_ms,
            fidelity_cnot: self.noise.fidelity_cnot,
            readout_flip: self.noise.readout_flip,
        }
    }

    pub fn backend(&self) -> Backend {
        match self.dynamics.backend {
            BackendName::Oracle => Backend::Oracle,
            BackendName::CircuitIdeal => Backend::CircuitIdeal,
            BackendName::CircuitNoisy => Backend::CircuitNoisy {
                noise: self.noise_model(),
                shots: (self.shots > 0).then_some(self.shots),
            },
        }
    }

    pub fn remap(&self) -> RemapKind {
        match self.dynamics.remap_mode {
            RemapName::FirstOrder => RemapKind::FirstOrder,
            RemapName::ExactPhase => RemapKind::ExactPhase,
        }
    }

    pub fn window(&self) -> Window {
        match self.spectrum.window {
            WindowName::Rectangular => Window::Rectangular,
            WindowName::Hann => Window::Hann,
        }
    }
}

fn index(x: f64, what: &str) -> Result<usize, String> {
    if x >= 0.0 && x.fract() == 0.0 && x < u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(format!("{what} must be a non-negative integer, got {x}"))
    }
}

/// Parses a variant name with its numeric parameters.
pub fn parse_initial(variant: &str, params: &[f64]) -> Result<InitialStateSpec, String> {
    let want = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(format!("initial variant {variant} takes {n} parameter(s), got {}", params.len()))
        }
    };
    match variant {
        "site" => {
            want(1)?;
            Ok(InitialStateSpec::Site(index(params[0], "site index")?))
        }
        "eigenstate" => {
            want(1)?;
            Ok(InitialStateSpec::Eigenstate(index(params[0], "eigenstate index")?))
        }
        "two_site" => {
            want(3)?;
            Ok(InitialStateSpec::TwoSite {
                i: index(params[0], "first site")?,
                j: index(params[1], "second site")?,
                phase: params[2],
            })
        }
        other => Err(format!("unknown initial variant {other:?} (site, two_site, eigenstate)")),
    }
}

/// Command-line form `variant:p1:p2…`, e.g. `site:0` or `two_site:1:6:3.14159`.
pub fn parse_initial_arg(arg: &str) -> Result<InitialStateSpec, String> {
    let mut parts = arg.split(':');
    let variant = parts.next().unwrap_or_default();
    let params = parts
        .map(|p| p.parse::<f64>().map_err(|e| format!("{arg}: bad parameter {p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    parse_initial(variant, &params)
}

/// File-name label for an initial state.
pub fn initial_label(spec: &InitialStateSpec) -> String {
    match *spec {
        InitialStateSpec::Site(k) => format!("site_{k}"),
        InitialStateSpec::Eigenstate(k) => format!("eigenstate_{k}"),
        InitialStateSpec::TwoSite { i, j, .. } => format!("two_site_{i}_{j}"),
    }
}
