//! Scenario files: a flat key-value format with dotted section prefixes.
//!
//! ```text
//! # demographics
//! demographics.lifespan        = 1.0
//! demographics.mortality       = reciprocal:50
//! demographics.fertility       = hump
//! demographics.reproduction_target = 0.8
//!
//! discretization.age_cells     = 200
//! discretization.modes         = 4
//! discretization.horizon       = 1.25
//!
//! problem.control              = birth
//! problem.y0_age               = bump
//! ```
//!
//! Every key has a default; unknown keys and malformed values are rejected
//! with the offending line number. The resolved configuration is echoed as
//! a comment header into every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::demography::{DemographicModel, FertilityRate, MortalityRate};
use crate::error::Error;
use crate::grid::AgeGrid;
use crate::lqr::TerminalWeight;
use crate::spectral::NeumannBasis;
use crate::transport::ModalState;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum MortalitySpec {
    /// `reciprocal:<c>` — `μ(a) = 1/(c(A−a))`.
    Reciprocal { c: f64 },
    /// `constant:<rate>`.
    Constant { rate: f64 },
    /// `table:<path>` — two-column CSV `(age, rate)`.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FertilitySpec {
    /// `hump` — the benchmark mid-life window with its literal amplitude.
    Hump,
    /// `constant:<value>`.
    Constant { value: f64 },
    /// `table:<path>` — two-column CSV `(age, value)`.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlChoice {
    Birth,
    Band,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgeProfile {
    /// `bump`: `16 (a(A−a))²/A⁴`.
    Bump,
    /// `band:<lo>,<hi>`: quartic bump supported on `(lo, hi)`.
    Band {
        lo: f64,
        hi: f64,
    },
    Uniform,
    Zero,
    /// Survival-shaped profile `π(a)`.
    Survivor,
    /// Seeded low-order cosine mixture.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceProfile {
    Uniform,
    /// `gaussian:<center>,<width>`.
    Gaussian {
        center: f64,
        width: f64,
    },
    /// `mode:<k>` — the k-th eigenfunction.
    Mode {
        k: usize,
    },
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Horizon,
    Epsilon,
    StateWeight,
    Modes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub svg: bool,
}

/// Fully-typed scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub lifespan: f64,
    pub domain_length: f64,
    pub mortality: MortalitySpec,
    pub fertility: FertilitySpec,
    pub fertility_floor: f64,
    /// `None` keeps the literal fertility amplitude.
    pub reproduction_target: Option<f64>,
    pub age_cells: usize,
    pub space_points: usize,
    pub modes: usize,
    pub horizon: f64,
    pub time_steps: usize,
    pub state_weight: f64,
    pub terminal: TerminalWeight,
    pub band_width: f64,
    pub omega: (f64, f64),
    pub control: ControlChoice,
    pub y0_age: AgeProfile,
    pub y0_space: SpaceProfile,
    pub y0_scale: f64,
    pub yd_age: AgeProfile,
    pub yd_space: SpaceProfile,
    pub yd_scale: f64,
    pub plateau_threshold: f64,
    pub supply_terminal: bool,
    pub residual_tolerance: f64,
    pub sweep_variable: Option<SweepVariable>,
    pub sweep_values: Vec<f64>,
    pub out_dir: PathBuf,
    pub formats: OutputFormats,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            lifespan: 1.0,
            domain_length: 1.0,
            mortality: MortalitySpec::Reciprocal { c: 50.0 },
            fertility: FertilitySpec::Hump,
            fertility_floor: 0.0,
            reproduction_target: Some(0.8),
            age_cells: 200,
            space_points: 512,
            modes: 4,
            horizon: 1.25,
            time_steps: 240,
            state_weight: 1.0,
            terminal: TerminalWeight::HalfNorm,
            band_width: 0.2,
            omega: (0.0, 1.0),
            control: ControlChoice::Birth,
            y0_age: AgeProfile::Bump,
            y0_space: SpaceProfile::Uniform,
            y0_scale: 1.0,
            yd_age: AgeProfile::Zero,
            yd_space: SpaceProfile::Uniform,
            yd_scale: 1.0,
            plateau_threshold: 1e-2,
            supply_terminal: true,
            residual_tolerance: 1e-2,
            sweep_variable: None,
            sweep_values: Vec::new(),
            out_dir: PathBuf::from("out"),
            formats: OutputFormats {
                csv: true,
                svg: true,
            },
            seed: 0,
        }
    }
}

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    seen: BTreeMap<String, usize>,
    base_dir: PathBuf,
}

impl RawConfig {
    fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), (value, line_no)).is_some() {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key `{key}`"
                )));
            }
        }
        let seen = entries.iter().map(|(k, (_, l))| (k.clone(), *l)).collect();
        Ok(RawConfig {
            entries,
            seen,
            base_dir,
        })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| {
                Error::Config(format!("line {line}: `{key}` expects a number, got `{v}`"))
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "line {line}: `{key}` expects an integer, got `{v}`"
                ))
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::Config(format!(
                    "line {line}: `{key}` expects true/false, got `{other}`"
                ))),
            },
        }
    }

    fn pair(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "line {line}: `{key}` expects `lo,hi`, got `{v}`"
                    )));
                }
                let lo = parts[0].parse().map_err(|_| {
                    Error::Config(format!("line {line}: `{key}` lower bound is not a number"))
                })?;
                let hi = parts[1].parse().map_err(|_| {
                    Error::Config(format!("line {line}: `{key}` upper bound is not a number"))
                })?;
                Ok((lo, hi))
            }
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some((v, line)) => {
                if v.trim().is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|p| {
                        p.trim().parse().map_err(|_| {
                            Error::Config(format!(
                                "line {line}: `{key}` has a non-numeric entry `{p}`"
                            ))
                        })
                    })
                    .collect()
            }
        }
    }

    fn resolve_path(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_with_base(&text, base)
    }

    pub fn from_str_with_base(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut raw = RawConfig::parse(text, base_dir)?;
        let mut cfg = ScenarioConfig::default();

        cfg.lifespan = raw.f64("demographics.lifespan", cfg.lifespan)?;
        cfg.domain_length = raw.f64("demographics.domain_length", cfg.domain_length)?;
        if let Some((v, line)) = raw.take("demographics.mortality") {
            cfg.mortality = parse_mortality(&raw, &v, line)?;
        }
        if let Some((v, line)) = raw.take("demographics.fertility") {
            cfg.fertility = parse_fertility(&raw, &v, line)?;
        }
        cfg.fertility_floor = raw.f64("demographics.fertility_floor", cfg.fertility_floor)?;
        if let Some((v, line)) = raw.take("demographics.reproduction_target") {
            cfg.reproduction_target = if v == "literal" {
                None
            } else {
                Some(v.parse().map_err(|_| {
                    Error::Config(format!(
                        "line {line}: reproduction_target expects a number or `literal`"
                    ))
                })?)
            };
        }

        cfg.age_cells = raw.usize("discretization.age_cells", cfg.age_cells)?;
        cfg.space_points = raw.usize("discretization.space_points", cfg.space_points)?;
        cfg.modes = raw.usize("discretization.modes", cfg.modes)?;
        cfg.horizon = raw.f64("discretization.horizon", cfg.horizon)?;
        cfg.time_steps = raw.usize("discretization.time_steps", cfg.time_steps)?;

        cfg.state_weight = raw.f64("problem.state_weight", cfg.state_weight)?;
        if let Some((v, line)) = raw.take("problem.terminal") {
            cfg.terminal = match v.as_str() {
                "half_norm" => TerminalWeight::HalfNorm,
                "none" => TerminalWeight::None,
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: problem.terminal expects half_norm|none, got `{other}`"
                    )))
                }
            };
        }
        cfg.band_width = raw.f64("problem.band_width", cfg.band_width)?;
        cfg.omega = raw.pair("problem.omega", (0.0, cfg.domain_length))?;
        if let Some((v, line)) = raw.take("problem.control") {
            cfg.control = match v.as_str() {
                "birth" => ControlChoice::Birth,
                "band" => ControlChoice::Band,
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: problem.control expects birth|band, got `{other}`"
                    )))
                }
            };
        }
        if let Some((v, line)) = raw.take("problem.y0_age") {
            cfg.y0_age = parse_age_profile(&v, line)?;
        }
        if let Some((v, line)) = raw.take("problem.y0_space") {
            cfg.y0_space = parse_space_profile(&v, line)?;
        }
        cfg.y0_scale = raw.f64("problem.y0_scale", cfg.y0_scale)?;
        if let Some((v, line)) = raw.take("problem.yd_age") {
            cfg.yd_age = parse_age_profile(&v, line)?;
        }
        if let Some((v, line)) = raw.take("problem.yd_space") {
            cfg.yd_space = parse_space_profile(&v, line)?;
        }
        cfg.yd_scale = raw.f64("problem.yd_scale", cfg.yd_scale)?;
        cfg.plateau_threshold = raw.f64("problem.plateau_threshold", cfg.plateau_threshold)?;
        cfg.supply_terminal = raw.bool("problem.supply_terminal", cfg.supply_terminal)?;
        cfg.residual_tolerance = raw.f64("problem.residual_tolerance", cfg.residual_tolerance)?;

        if let Some((v, line)) = raw.take("sweep.variable") {
            cfg.sweep_variable = Some(match v.as_str() {
                "horizon" => SweepVariable::Horizon,
                "epsilon" | "band_width" => SweepVariable::Epsilon,
                "state_weight" => SweepVariable::StateWeight,
                "modes" => SweepVariable::Modes,
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: sweep.variable expects horizon|epsilon|state_weight|modes, \
                         got `{other}`"
                    )))
                }
            });
        }
        cfg.sweep_values = raw.list("sweep.values")?;

        if let Some((v, _)) = raw.take("output.directory") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some((v, line)) = raw.take("output.formats") {
            let mut formats = OutputFormats {
                csv: false,
                svg: false,
            };
            for part in v.split(',') {
                match part.trim() {
                    "csv" => formats.csv = true,
                    "svg" => formats.svg = true,
                    other => {
                        return Err(Error::Config(format!(
                            "line {line}: unknown output format `{other}`"
                        )))
                    }
                }
            }
            cfg.formats = formats;
        }
        cfg.seed = raw.usize("output.seed", cfg.seed as usize)? as u64;

        if let Some((key, (_, line))) = raw.entries.iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
        }
        cfg.validate_at(&raw.seen)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(&BTreeMap::new())
    }

    /// Semantic validation; messages are anchored to the line that set the
    /// offending key when the value came from a file.
    fn validate_at(&self, lines: &BTreeMap<String, usize>) -> Result<()> {
        let fail = |key: &str, msg: String| -> Result<()> {
            match lines.get(key) {
                Some(line) => Err(Error::Config(format!("line {line}: {msg}"))),
                None => Err(Error::Config(msg)),
            }
        };
        if self.lifespan <= 0.0 {
            return fail(
                "demographics.lifespan",
                format!("demographics.lifespan must be positive, got {}", self.lifespan),
            );
        }
        if self.domain_length <= 0.0 {
            return fail("demographics.domain_length", "demographics.domain_length must be positive".into());
        }
        if self.fertility_floor < 0.0 || self.fertility_floor >= self.lifespan {
            return fail("demographics.fertility_floor", "demographics.fertility_floor must lie in [0, lifespan)".into());
        }
        if self.age_cells < 4 {
            return fail("discretization.age_cells", "discretization.age_cells must be at least 4".into());
        }
        if self.space_points < 8 {
            return fail("discretization.space_points", "discretization.space_points must be at least 8".into());
        }
        if self.modes < 1 {
            return fail("discretization.modes", "discretization.modes must be at least 1".into());
        }
        if self.horizon <= 0.0 {
            return fail("discretization.horizon", "discretization.horizon must be positive".into());
        }
        if self.time_steps < 2 {
            return fail("discretization.time_steps", "discretization.time_steps must be at least 2".into());
        }
        if self.state_weight <= 0.0 {
            return fail("problem.state_weight", "problem.state_weight must be positive".into());
        }
        if !(0.0 < self.band_width && self.band_width < self.lifespan) {
            return fail("problem.band_width", "problem.band_width must lie in (0, lifespan)".into());
        }
        if !(0.0 <= self.omega.0
            && self.omega.0 < self.omega.1
            && self.omega.1 <= self.domain_length)
        {
            return fail(
                "problem.omega",
                format!(
                    "problem.omega = ({}, {}) must satisfy 0 <= lo < hi <= domain_length",
                    self.omega.0, self.omega.1
                ),
            );
        }
        if self.plateau_threshold <= 0.0 {
            return fail(
                "problem.plateau_threshold",
                "problem.plateau_threshold must be positive".into(),
            );
        }
        if self.residual_tolerance <= 0.0 {
            return fail(
                "problem.residual_tolerance",
                "problem.residual_tolerance must be positive".into(),
            );
        }
        Ok(())
    }

    /// Control window covering the whole spatial domain?
    pub fn omega_is_full(&self) -> bool {
        self.omega.0 <= 1e-12 && self.omega.1 >= self.domain_length * (1.0 - 1e-12)
    }

    /// Key-value echo of the resolved configuration (stable order), used as
    /// the comment header of every output file.
    pub fn resolved_lines(&self) -> Vec<String> {
        let mortality = match &self.mortality {
            MortalitySpec::Reciprocal { c } => format!("reciprocal:{c}"),
            MortalitySpec::Constant { rate } => format!("constant:{rate}"),
            MortalitySpec::Table { path } => format!("table:{}", path.display()),
        };
        let fertility = match &self.fertility {
            FertilitySpec::Hump => "hump".to_string(),
            FertilitySpec::Constant { value } => format!("constant:{value}"),
            FertilitySpec::Table { path } => format!("table:{}", path.display()),
        };
        let target = self
            .reproduction_target
            .map(|r| r.to_string())
            .unwrap_or_else(|| "literal".into());
        let mut lines = vec![
            format!("demographics.lifespan = {}", self.lifespan),
            format!("demographics.domain_length = {}", self.domain_length),
            format!("demographics.mortality = {mortality}"),
            format!("demographics.fertility = {fertility}"),
            format!("demographics.fertility_floor = {}", self.fertility_floor),
            format!("demographics.reproduction_target = {target}"),
            format!("discretization.age_cells = {}", self.age_cells),
            format!("discretization.space_points = {}", self.space_points),
            format!("discretization.modes = {}", self.modes),
            format!("discretization.horizon = {}", self.horizon),
            format!("discretization.time_steps = {}", self.time_steps),
            format!("problem.state_weight = {}", self.state_weight),
            format!(
                "problem.terminal = {}",
                if self.terminal == TerminalWeight::HalfNorm {
                    "half_norm"
                } else {
                    "none"
                }
            ),
            format!("problem.band_width = {}", self.band_width),
            format!("problem.omega = {},{}", self.omega.0, self.omega.1),
            format!(
                "problem.control = {}",
                if self.control == ControlChoice::Birth {
                    "birth"
                } else {
                    "band"
                }
            ),
            format!("problem.y0_age = {}", age_profile_name(&self.y0_age)),
            format!("problem.y0_space = {}", space_profile_name(&self.y0_space)),
            format!("problem.y0_scale = {}", self.y0_scale),
            format!("problem.yd_age = {}", age_profile_name(&self.yd_age)),
            format!("problem.yd_space = {}", space_profile_name(&self.yd_space)),
            format!("problem.yd_scale = {}", self.yd_scale),
            format!("problem.plateau_threshold = {}", self.plateau_threshold),
            format!("problem.supply_terminal = {}", self.supply_terminal),
            format!("problem.residual_tolerance = {}", self.residual_tolerance),
            format!("output.seed = {}", self.seed),
        ];
        if let Some(var) = self.sweep_variable {
            lines.push(format!(
                "sweep.variable = {}",
                match var {
                    SweepVariable::Horizon => "horizon",
                    SweepVariable::Epsilon => "epsilon",
                    SweepVariable::StateWeight => "state_weight",
                    SweepVariable::Modes => "modes",
                }
            ));
            let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
            lines.push(format!("sweep.values = {}", values.join(",")));
        }
        lines
    }

    pub fn age_grid(&self) -> AgeGrid {
        AgeGrid::new(self.lifespan, self.age_cells)
    }

    pub fn basis(&self) -> NeumannBasis {
        NeumannBasis::new(self.domain_length, self.modes, self.space_points)
    }

    /// Assemble the demographic model, loading tables and applying the
    /// support floor and reproduction rescale.
    pub fn build_model(&self) -> Result<DemographicModel> {
        let mortality = match &self.mortality {
            MortalitySpec::Reciprocal { c } => {
                MortalityRate::reciprocal_remaining(self.lifespan, *c)
            }
            MortalitySpec::Constant { rate } => MortalityRate::constant(self.lifespan, *rate),
            MortalitySpec::Table { path } => {
                let (ages, values) = load_table(path)?;
                MortalityRate::tabulated(self.lifespan, ages, values)?
            }
        };
        let mut fertility = match &self.fertility {
            FertilitySpec::Hump => FertilityRate::hump(self.lifespan),
            FertilitySpec::Constant { value } => FertilityRate::constant(self.lifespan, *value),
            FertilitySpec::Table { path } => {
                let (ages, values) = load_table(path)?;
                FertilityRate::tabulated(self.lifespan, ages, values)?
            }
        };
        if self.fertility_floor > 0.0 {
            fertility = fertility.with_support_floor(self.fertility_floor);
        }
        if let Some(target) = self.reproduction_target {
            let quad = AgeGrid::new(self.lifespan, 4096);
            fertility = fertility.rescaled_to_reproduction(&mortality, target, &quad)?;
        }
        DemographicModel::new(mortality, fertility)
    }

    fn age_profile_values(
        &self,
        profile: &AgeProfile,
        model: &DemographicModel,
        seed: u64,
    ) -> impl Fn(f64) -> f64 + '_ {
        let a_max = self.lifespan;
        let profile = profile.clone();
        let survival: Vec<f64> = (0..=64)
            .map(|i| model.survival(a_max * i as f64 / 64.0).unwrap_or(0.0))
            .collect();
        let random_coeffs: Vec<f64> = {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        move |a: f64| match &profile {
            AgeProfile::Bump => {
                let x = a * (a_max - a) / (a_max * a_max);
                16.0 * x * x
            }
            AgeProfile::Band { lo, hi } => {
                if a <= *lo || a >= *hi {
                    0.0
                } else {
                    let x = (a - lo) * (hi - a) / ((hi - lo) * (hi - lo));
                    16.0 * x * x
                }
            }
            AgeProfile::Uniform => 1.0,
            AgeProfile::Zero => 0.0,
            AgeProfile::Survivor => {
                let pos = (a / a_max * 64.0).clamp(0.0, 64.0);
                let i = pos.floor() as usize;
                if i >= 64 {
                    survival[64]
                } else {
                    let w = pos - i as f64;
                    survival[i] * (1.0 - w) + survival[i + 1] * w
                }
            }
            AgeProfile::Random => {
                let mut acc = 0.0;
                for (j, c) in random_coeffs.iter().enumerate() {
                    acc += c * ((j + 1) as f64 * std::f64::consts::PI * a / a_max).cos();
                }
                // Keep the profile bounded away from wild magnitudes.
                acc * (a * (a_max - a) / (a_max * a_max)) * 4.0
            }
        }
    }

    fn space_profile_samples(
        &self,
        profile: &SpaceProfile,
        basis: &NeumannBasis,
        seed: u64,
    ) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        basis
            .nodes()
            .iter()
            .map(|&x| match profile {
                SpaceProfile::Uniform => 1.0,
                SpaceProfile::Gaussian { center, width } => {
                    (-(x - center) * (x - center) / (2.0 * width * width)).exp()
                }
                SpaceProfile::Mode { k } => basis.eigenfunction(*k, x),
                SpaceProfile::Random => {
                    1.0 + coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| {
                            c * ((j + 1) as f64 * std::f64::consts::PI * x / self.domain_length)
                                .cos()
                        })
                        .sum::<f64>()
                }
            })
            .collect()
    }

    /// Separable per-mode initial states `y0_k(a) = c_k · profile(a)`.
    pub fn initial_modes(
        &self,
        model: &DemographicModel,
        basis: &NeumannBasis,
        grid: AgeGrid,
    ) -> Result<Vec<ModalState>> {
        self.separable_modes(
            model,
            basis,
            grid,
            &self.y0_age,
            &self.y0_space,
            self.y0_scale,
            self.seed,
        )
    }

    /// Separable per-mode targets for the LQ problem.
    pub fn target_modes(
        &self,
        model: &DemographicModel,
        basis: &NeumannBasis,
        grid: AgeGrid,
    ) -> Result<Vec<DVector<f64>>> {
        let states = self.separable_modes(
            model,
            basis,
            grid,
            &self.yd_age,
            &self.yd_space,
            self.yd_scale,
            self.seed ^ 0x5bf0_3635,
        )?;
        Ok(states
            .into_iter()
            .map(|s| DVector::from_column_slice(s.values()))
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn separable_modes(
        &self,
        model: &DemographicModel,
        basis: &NeumannBasis,
        grid: AgeGrid,
        age: &AgeProfile,
        space: &SpaceProfile,
        scale: f64,
        seed: u64,
    ) -> Result<Vec<ModalState>> {
        let spatial = self.space_profile_samples(space, basis, seed);
        let coeffs = basis.project(&spatial)?;
        let age_fn = self.age_profile_values(age, model, seed);
        (0..self.modes)
            .map(|k| {
                let c = coeffs.get(k) * scale;
                ModalState::new(k, grid, grid.nodes().map(|a| c * age_fn(a)).collect())
            })
            .collect()
    }
}

fn age_profile_name(p: &AgeProfile) -> String {
    match p {
        AgeProfile::Bump => "bump".into(),
        AgeProfile::Band { lo, hi } => format!("band:{lo},{hi}"),
        AgeProfile::Uniform => "uniform".into(),
        AgeProfile::Zero => "zero".into(),
        AgeProfile::Survivor => "survivor".into(),
        AgeProfile::Random => "random".into(),
    }
}

fn space_profile_name(p: &SpaceProfile) -> String {
    match p {
        SpaceProfile::Uniform => "uniform".into(),
        SpaceProfile::Gaussian { center, width } => format!("gaussian:{center},{width}"),
        SpaceProfile::Mode { k } => format!("mode:{k}"),
        SpaceProfile::Random => "random".into(),
    }
}

fn parse_mortality(raw: &RawConfig, value: &str, line: usize) -> Result<MortalitySpec> {
    if let Some(rest) = value.strip_prefix("reciprocal:") {
        let c = rest.parse().map_err(|_| {
            Error::Config(format!(
                "line {line}: reciprocal mortality expects `reciprocal:<c>`"
            ))
        })?;
        return Ok(MortalitySpec::Reciprocal { c });
    }
    if value == "reciprocal" {
        return Ok(MortalitySpec::Reciprocal { c: 50.0 });
    }
    if let Some(rest) = value.strip_prefix("constant:") {
        let rate = rest.parse().map_err(|_| {
            Error::Config(format!(
                "line {line}: constant mortality expects `constant:<rate>`"
            ))
        })?;
        return Ok(MortalitySpec::Constant { rate });
    }
    if let Some(rest) = value.strip_prefix("table:") {
        return Ok(MortalitySpec::Table {
            path: raw.resolve_path(rest),
        });
    }
    Err(Error::Config(format!(
        "line {line}: mortality expects reciprocal[:c]|constant:<rate>|table:<path>, got `{value}`"
    )))
}

fn parse_fertility(raw: &RawConfig, value: &str, line: usize) -> Result<FertilitySpec> {
    if value == "hump" {
        return Ok(FertilitySpec::Hump);
    }
    if let Some(rest) = value.strip_prefix("constant:") {
        let v = rest.parse().map_err(|_| {
            Error::Config(format!(
                "line {line}: constant fertility expects `constant:<value>`"
            ))
        })?;
        return Ok(FertilitySpec::Constant { value: v });
    }
    if let Some(rest) = value.strip_prefix("table:") {
        return Ok(FertilitySpec::Table {
            path: raw.resolve_path(rest),
        });
    }
    Err(Error::Config(format!(
        "line {line}: fertility expects hump|constant:<value>|table:<path>, got `{value}`"
    )))
}

fn parse_age_profile(value: &str, line: usize) -> Result<AgeProfile> {
    match value {
        "bump" => return Ok(AgeProfile::Bump),
        "uniform" => return Ok(AgeProfile::Uniform),
        "zero" => return Ok(AgeProfile::Zero),
        "survivor" => return Ok(AgeProfile::Survivor),
        "random" => return Ok(AgeProfile::Random),
        _ => {}
    }
    if let Some(rest) = value.strip_prefix("band:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(lo), Ok(hi)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
                return Ok(AgeProfile::Band { lo, hi });
            }
        }
    }
    Err(Error::Config(format!(
        "line {line}: age profile expects bump|band:<lo>,<hi>|uniform|zero|survivor|random, \
         got `{value}`"
    )))
}

fn parse_space_profile(value: &str, line: usize) -> Result<SpaceProfile> {
    match value {
        "uniform" => return Ok(SpaceProfile::Uniform),
        "random" => return Ok(SpaceProfile::Random),
        _ => {}
    }
    if let Some(rest) = value.strip_prefix("gaussian:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(center), Ok(width)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
                return Ok(SpaceProfile::Gaussian { center, width });
            }
        }
    }
    if let Some(rest) = value.strip_prefix("mode:") {
        if let Ok(k) = rest.trim().parse() {
            return Ok(SpaceProfile::Mode { k });
        }
    }
    Err(Error::Config(format!(
        "line {line}: space profile expects uniform|gaussian:<c>,<w>|mode:<k>|random, got `{value}`"
    )))
}

/// Two-column CSV `(abscissa, value)`; `#`-prefixed lines are comments.
pub fn load_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let bad = || {
            Error::Config(format!(
                "{}: line {}: expected `age,value`, got `{line}`",
                path.display(),
                idx + 1
            ))
        };
        let x: f64 = parts
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let y: f64 = parts
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}
