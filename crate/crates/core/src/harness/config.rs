use super::HarnessError;
use crate::fem::{LoadCase, MaterialParams, SolverOptions};
use crate::geometry::{PackingOptions, Rect};
use crate::idic::GaussNewtonOptions;
use crate::imaging::{Interpolation, SpeckleSpec};
use serde::{Deserialize, Serialize};

/// Environment variable prefix for config overrides:
/// `MICROID_<SECTION>__<KEY>=<toml value>`, or `MICROID_<KEY>` for top-level
/// keys.
pub const ENV_PREFIX: &str = "MICROID_";

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub imaging: ImagingConfig,
    pub solver: SolverOptions,
    pub idic: IdicConfig,
    pub mha: MhaConfig,
    pub campaign: CampaignConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 2024,
            geometry: GeometryConfig::default(),
            material: MaterialConfig::default(),
            imaging: ImagingConfig::default(),
            solver: SolverOptions::default(),
            idic: IdicConfig::default(),
            mha: MhaConfig::default(),
            campaign: CampaignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub domain: [f64; 2],
    pub inclusions: usize,
    pub diameter: f64,
    pub min_gap: f64,
    pub max_attempts: usize,
    /// Element edge length of the specimen mesh.
    pub dns_edge: f64,
    /// Side of the square MVE, centred in the specimen.
    pub mve_size: f64,
    /// Element edge length of the MVE mesh.
    pub mve_edge: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            domain: [10.0, 10.0],
            inclusions: 25,
            diameter: 1.0,
            min_gap: 0.05,
            max_attempts: PackingOptions::default().max_attempts,
            dns_edge: 0.125,
            mve_size: 4.0,
            mve_edge: 0.125,
        }
    }
}

impl GeometryConfig {
    pub fn mve_window(&self) -> Rect {
        Rect::centered([0.5 * self.domain[0], 0.5 * self.domain[1]], self.mve_size, self.mve_size)
    }
}

/// Reference moduli of the virtual specimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "G1")]
    pub g1: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "G2")]
    pub g2: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let [g1, k1, g2, k2] = MaterialParams::reference().values;
        MaterialConfig { g1, k1, g2, k2 }
    }
}

impl MaterialConfig {
    pub fn params(&self) -> MaterialParams {
        MaterialParams::new(self.g1, self.k1, self.g2, self.k2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingConfig {
    /// Pixels per side of the square field of view.
    pub fov_pixels: usize,
    /// Physical side of the field of view, centred on the MVE.
    pub fov_size: f64,
    pub sigma_eta: f64,
    pub interpolation: Interpolation,
    pub speckle: SpeckleSpec,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        ImagingConfig {
            fov_pixels: 512,
            fov_size: 6.0,
            sigma_eta: crate::correlation::DEFAULT_SIGMA_ETA,
            interpolation: Interpolation::default(),
            speckle: SpeckleSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdicConfig {
    /// Modulus held at its reference value.
    pub fix: String,
    /// Material start as a multiple of the reference moduli.
    pub start_factor: f64,
    /// Stride of the boundary reduction for boundary-enriched runs.
    pub stride: usize,
    pub gauss_newton: GaussNewtonOptions,
}

impl Default for IdicConfig {
    fn default() -> Self {
        IdicConfig {
            fix: "K1".into(),
            start_factor: 0.9,
            stride: 1,
            gauss_newton: GaussNewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhaConfig {
    pub steps: usize,
    pub burn_in: usize,
    /// Steps and burn-in for runs with boundary unknowns.
    pub relaxed_steps: usize,
    pub relaxed_burn_in: usize,
    pub fix: String,
    /// Prior mean of fixed-boundary runs as a multiple of the reference.
    pub prior_mean_factor: f64,
    pub prior_sigma: f64,
    /// Material step as a fraction of `(ref_i / sum ref) * prior_sigma`.
    pub step_fraction: f64,
    pub relaxed_step_fraction: f64,
    /// Boundary step as a fraction of the summed material steps.
    pub kin_step_fraction: f64,
    /// Half-width of the boundary prior relative to the largest MVE boundary
    /// displacement.
    pub e_bc_fraction: f64,
    pub stride: usize,
    /// Flat material prior for runs with all four moduli free.
    pub flat_prior_nonnorm: bool,
    pub tune: bool,
    pub pilot_steps: usize,
    pub credible_level: f64,
}

impl Default for MhaConfig {
    fn default() -> Self {
        MhaConfig {
            steps: 8000,
            burn_in: 6000,
            relaxed_steps: 24000,
            relaxed_burn_in: 22000,
            fix: "K1".into(),
            prior_mean_factor: 0.9,
            prior_sigma: 1.0,
            step_fraction: 0.01,
            relaxed_step_fraction: 0.005,
            kin_step_fraction: 0.004,
            e_bc_fraction: 0.1,
            stride: 1,
            flat_prior_nonnorm: true,
            tune: false,
            pilot_steps: 500,
            credible_level: 0.99,
        }
    }
}

/// Identification method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Idic,
    BeIdic,
    Mha,
    MhaRelaxed,
    MhaNonnorm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Idic => "idic",
            Method::BeIdic => "be-idic",
            Method::Mha => "mha",
            Method::MhaRelaxed => "mha-relaxed",
            Method::MhaNonnorm => "mha-nonnorm",
        }
    }

    pub fn has_free_boundary(self) -> bool {
        matches!(self, Method::BeIdic | Method::MhaRelaxed | Method::MhaNonnorm)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idic" => Ok(Method::Idic),
            "be-idic" => Ok(Method::BeIdic),
            "mha" => Ok(Method::Mha),
            "mha-relaxed" => Ok(Method::MhaRelaxed),
            "mha-nonnorm" => Ok(Method::MhaNonnorm),
            other => Err(format!(
                "unknown method `{other}` (expected idic, be-idic, mha, mha-relaxed or mha-nonnorm)"
            )),
        }
    }
}

/// Kind of boundary-data error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    None,
    /// Pillbox smoothing of diameter `level` inclusion diameters.
    Smooth,
    /// Uniform noise of relative amplitude `level` on the applied boundary.
    Noise,
}

impl PerturbationKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::Smooth => "smooth",
            PerturbationKind::Noise => "noise",
        }
    }
}

/// One boundary-data error setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Pillbox diameter in inclusion diameters.
    pub epsilon: f64,
    /// Noise amplitude relative to the largest specimen boundary displacement.
    pub sigma_bc: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::None,
            epsilon: 0.0,
            sigma_bc: 0.0,
            seed: 0,
        }
    }

    /// Setting of `kind` at grid value `level`.
    pub fn at_level(kind: PerturbationKind, level: f64, seed: u64) -> Self {
        let mut p = PerturbationSpec::none();
        p.kind = kind;
        p.seed = seed;
        match kind {
            PerturbationKind::None => {}
            PerturbationKind::Smooth => p.epsilon = level,
            PerturbationKind::Noise => p.sigma_bc = level,
        }
        p
    }

    pub fn level(&self) -> f64 {
        match self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::Smooth => self.epsilon,
            PerturbationKind::Noise => self.sigma_bc,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.epsilon >= 0.0 && self.sigma_bc >= 0.0) {
            return Err(HarnessError::Config("perturbation levels must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub tests: Vec<LoadCase>,
    pub methods: Vec<Method>,
    pub perturbation: PerturbationKind,
    pub levels: Vec<f64>,
    pub realizations: usize,
    /// Worker threads; unset uses every core.
    pub jobs: Option<usize>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            tests: vec![LoadCase::Tension],
            methods: vec![Method::Idic],
            perturbation: PerturbationKind::Noise,
            levels: vec![0.0, 0.05, 0.1],
            realizations: 5,
            jobs: None,
        }
    }
}

impl Config {
    /// Parses TOML text, applies environment overrides from `env` and
    /// validates the result.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Config, HarnessError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        // Parse the original text first so errors point at the user's lines.
        toml::from_str::<Config>(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut value: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (key, raw) in env {
            let Some(path) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let parts: Vec<String> = path.split("__").map(|p| p.to_ascii_lowercase()).collect();
            let parsed = parse_env_value(&raw);
            set_path(&mut value, &parts, parsed).map_err(|m| HarnessError::Config(format!("{key}: {m}")))?;
        }
        let text = toml::to_string(&value).map_err(|e| HarnessError::Config(e.to_string()))?;
        let config: Config = toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Config, HarnessError> {
        Config::from_toml_with_env(text, std::iter::empty())
    }

    /// Reads a file and applies overrides from the process environment.
    pub fn load(path: &std::path::Path) -> Result<Config, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml_with_env(&text, std::env::vars())
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let g = &self.geometry;
        if !(g.domain[0] > 0.0 && g.domain[1] > 0.0) {
            return bad("geometry.domain must be positive".into());
        }
        if !(g.dns_edge > 0.0 && g.mve_edge > 0.0) {
            return bad("geometry edge lengths must be positive".into());
        }
        if !(g.mve_size > 0.0 && g.mve_size <= g.domain[0].min(g.domain[1])) {
            return bad("geometry.mve_size must fit in the domain".into());
        }
        let fov = Rect::centered(g.mve_window().center(), self.imaging.fov_size, self.imaging.fov_size);
        if !Rect::new(0.0, 0.0, g.domain[0], g.domain[1]).contains_rect(&fov, 1e-12) {
            return bad("imaging.fov_size must fit in the domain".into());
        }
        if self.imaging.fov_size < g.mve_size {
            return bad("imaging.fov_size must cover the MVE".into());
        }
        if self.imaging.fov_pixels < 8 {
            return bad("imaging.fov_pixels must be at least 8".into());
        }
        if !(self.imaging.sigma_eta > 0.0) {
            return bad("imaging.sigma_eta must be positive".into());
        }
        self.imaging.speckle.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.material.params().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        for name in [&self.idic.fix, &self.mha.fix] {
            if MaterialParams::index_of(name).is_none() {
                return bad(format!("unknown modulus `{name}`"));
            }
        }
        if self.idic.stride == 0 || self.mha.stride == 0 {
            return bad("strides must be at least 1".into());
        }
        let m = &self.mha;
        if m.burn_in >= m.steps || m.relaxed_burn_in >= m.relaxed_steps {
            return bad("mha burn-in must be below the step count".into());
        }
        if !(m.prior_sigma > 0.0 && m.step_fraction > 0.0 && m.relaxed_step_fraction > 0.0 && m.kin_step_fraction > 0.0) {
            return bad("mha step and prior settings must be positive".into());
        }
        if !(m.credible_level > 0.0 && m.credible_level < 1.0) {
            return bad("mha.credible_level must lie in (0, 1)".into());
        }
        let c = &self.campaign;
        if c.realizations == 0 {
            return bad("campaign.realizations must be at least 1".into());
        }
        if c.levels.iter().any(|l| !(*l >= 0.0)) {
            return bad("campaign.levels must be non-negative".into());
        }
        Ok(())
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    match path {
        [] => Err("empty key".into()),
        [last] => {
            // Material keys are upper case in the file.
            let key = table
                .keys()
                .find(|k| k.eq_ignore_ascii_case(last))
                .cloned()
                .unwrap_or_else(|| {
                    if ["g1", "k1", "g2", "k2"].contains(&last.as_str()) {
                        last.to_ascii_uppercase()
                    } else {
                        last.clone()
                    }
                });
            table.insert(key, value);
            Ok(())
        }
        [head, rest @ ..] => {
            let entry = table
                .entry(head.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => set_path(t, rest, value),
                _ => Err(format!("`{head}` is not a section")),
            }
        }
    }
}
