//! Flat key:value configuration with one nesting level of section headers.
//! Every experiment is a reviewable text artifact; unknown keys are
//! rejected with their line number, and command-line overrides use the same
//! `section.key=value` addressing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pjipm_core::characteristics::CuspSpec;
use pjipm_core::grid::{Grid, GridFunction};
use pjipm_core::trajectory::StepPolicy;
use pjipm_core::weights::{WeightKind, WeightSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    PjStability,
    IpmBlowup,
    LinearDecay,
    QuasiDecay,
    SteadyClassify,
    Instability,
    BridgeRoundtrip,
    Acceptance,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "pj_stability" => Self::PjStability,
            "ipm_blowup" => Self::IpmBlowup,
            "linear_decay" => Self::LinearDecay,
            "quasi_decay" => Self::QuasiDecay,
            "steady_classify" => Self::SteadyClassify,
            "instability" => Self::Instability,
            "bridge_roundtrip" => Self::BridgeRoundtrip,
            "acceptance" => Self::Acceptance,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PjStability => "pj_stability",
            Self::IpmBlowup => "ipm_blowup",
            Self::LinearDecay => "linear_decay",
            Self::QuasiDecay => "quasi_decay",
            Self::SteadyClassify => "steady_classify",
            Self::Instability => "instability",
            Self::BridgeRoundtrip => "bridge_roundtrip",
            Self::Acceptance => "acceptance",
        }
    }
}

/// Named initial-data family or an external CSV.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Zero,
    Cos,
    SinCubed,
    CosK { k: usize, mu: f64 },
    SinHalf { k: usize, mu: f64 },
    CosPlus { amplitude: f64, mode: usize },
    Cusp { epsilon: f64, sigma: f64, r0: f64 },
    Csv(PathBuf),
}

impl InitialData {
    pub fn descriptor(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Cos => "cos".into(),
            Self::SinCubed => "sin_cubed".into(),
            Self::CosK { k, mu } => format!("cos_k: {{k: {k}, mu: {mu}}}"),
            Self::SinHalf { k, mu } => format!("sin_half: {{k: {k}, mu: {mu}}}"),
            Self::CosPlus { amplitude, mode } => {
                format!("cos_plus: {{amplitude: {amplitude}, mode: {mode}}}")
            }
            Self::Cusp { epsilon, sigma, r0 } => {
                format!("cusp: {{epsilon: {epsilon}, sigma: {sigma}, r0: {r0}}}")
            }
            Self::Csv(p) => format!("csv: {}", p.display()),
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (head, rest) = match s.find(':') {
            Some(i) => (s[..i].trim(), s[i + 1..].trim()),
            None => (s, ""),
        };
        let fields = if rest.is_empty() {
            BTreeMap::new()
        } else if head == "csv" {
            return Ok(Self::Csv(PathBuf::from(rest)));
        } else {
            parse_brace_fields(rest)?
        };
        let need = |key: &str| -> Result<f64, String> {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| format!("descriptor '{head}' needs field '{key}'"))
        };
        match head {
            "zero" => Ok(Self::Zero),
            "cos" => Ok(Self::Cos),
            "sin_cubed" => Ok(Self::SinCubed),
            "cos_k" => Ok(Self::CosK {
                k: need("k")? as usize,
                mu: need("mu")?,
            }),
            "sin_half" => Ok(Self::SinHalf {
                k: need("k")? as usize,
                mu: need("mu")?,
            }),
            "cos_plus" => Ok(Self::CosPlus {
                amplitude: need("amplitude")?,
                mode: need("mode")? as usize,
            }),
            "cusp" => Ok(Self::Cusp {
                epsilon: need("epsilon")?,
                sigma: need("sigma")?,
                r0: need("r0")?,
            }),
            other => Err(format!("unknown initial-data family '{other}'")),
        }
    }

    /// Sample the described data on a grid.
    pub fn build(&self, grid: &Grid) -> Result<GridFunction, String> {
        let pol = pjipm_core::grid::AccuracyPolicy::default();
        Ok(match self {
            Self::Zero => GridFunction::zeros(grid),
            Self::Cos => GridFunction::sample(grid, |x| x.cos()),
            Self::SinCubed => GridFunction::sample(grid, |x| x.sin().powi(3)),
            Self::CosK { k, mu } => {
                let (k, mu) = (*k as f64, *mu);
                GridFunction::sample(grid, move |x| mu * (k * x).cos())
            }
            Self::SinHalf { k, mu } => {
                let (k, mu) = ((2 * k + 1) as f64 / 2.0, *mu);
                GridFunction::sample(grid, move |x| mu * (k * x).sin())
            }
            Self::CosPlus { amplitude, mode } => {
                let (a, m) = (*amplitude, *mode as f64);
                GridFunction::sample(grid, move |x| x.cos() + a * (m * x).cos())
            }
            Self::Cusp { epsilon, sigma, r0 } => {
                let spec = CuspSpec {
                    epsilon: *epsilon,
                    sigma: *sigma,
                    support_radius: *r0,
                };
                pjipm_core::characteristics::build_cusp_data(&spec, grid, &pol)
                    .map_err(|e| e.to_string())?
            }
            Self::Csv(path) => read_grid_function_csv(path, grid)?,
        })
    }
}

fn parse_brace_fields(s: &str) -> Result<BTreeMap<String, f64>, String> {
    let inner = s
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| format!("expected {{key: value, ...}}, got '{s}'"))?;
    let mut out = BTreeMap::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once(':')
            .ok_or_else(|| format!("expected key: value, got '{part}'"))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("not a number: '{}'", v.trim()))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

fn read_grid_function_csv(path: &Path, grid: &Grid) -> Result<GridFunction, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with('x') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .ok_or_else(|| format!("{}:{}: missing value column", path.display(), i + 1))?;
        values.push(
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("{}:{}: bad number '{v}'", path.display(), i + 1))?,
        );
    }
    if values.len() != grid.len() {
        return Err(format!(
            "{}: {} rows but the grid has {} nodes",
            path.display(),
            values.len(),
            grid.len()
        ));
    }
    GridFunction::new(grid.clone(), values).map_err(|e| e.to_string())
}

/// Variant selector for the linear experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConfig {
    pub variant: String,
    pub x_star_0: f64,
    pub theta_prime: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            variant: "L0".into(),
            x_star_0: 0.0,
            theta_prime: 0.7,
            fit_lo: 0.5,
            fit_hi: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstabilityConfig {
    pub epsilon: f64,
    pub sigma: f64,
    pub support_radius: f64,
    pub z0: f64,
    pub refine: bool,
}

impl Default for InstabilityConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            sigma: 1.0,
            support_radius: 0.05,
            z0: 0.01,
            refine: false,
        }
    }
}

/// Full experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid_n: usize,
    pub horizon: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub initial_data: InitialData,
    pub nu0: Option<f64>,
    pub z0: f64,
    pub steady_tol: f64,
    pub snapshot_out_stride: usize,
    pub policy: StepPolicy,
    pub weight_kind: WeightKind,
    pub weight_theta: f64,
    pub weight_c: f64,
    pub exclusion_radius_h: f64,
    pub linear: LinearConfig,
    pub instability: InstabilityConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::PjStability,
            grid_n: 512,
            horizon: 12.0,
            seed: 0,
            output_dir: None,
            initial_data: InitialData::CosPlus {
                amplitude: 0.01,
                mode: 2,
            },
            nu0: None,
            z0: 0.0,
            steady_tol: 1e-6,
            snapshot_out_stride: 200,
            policy: StepPolicy::default(),
            weight_kind: WeightKind::WTheta,
            weight_theta: 0.3,
            weight_c: 12.0,
            exclusion_radius_h: 3.0,
            linear: LinearConfig::default(),
            instability: InstabilityConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn weight_spec(&self, grid: &Grid) -> WeightSpec {
        let mut spec = match self.weight_kind {
            WeightKind::WMinus1 => WeightSpec::w_minus1(),
            WeightKind::WTildeTheta => WeightSpec::w_tilde(self.weight_theta, self.weight_c),
            WeightKind::WTheta => WeightSpec::w_theta(self.weight_theta, self.weight_c),
            WeightKind::Omega => WeightSpec::omega(),
        };
        spec.theta = self.weight_theta;
        if self.weight_c > 0.0 {
            spec.c = self.weight_c;
        }
        spec.with_exclusion(self.exclusion_radius_h * grid.h())
    }

    /// Apply a single `key=value` or `section.key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.apply(key, value, 0)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let pf64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse().map_err(|_| err(line, format!("not a number: '{v}'")))
        };
        let pusize = |v: &str| -> Result<usize, ConfigError> {
            v.parse()
                .map_err(|_| err(line, format!("not an integer: '{v}'")))
        };
        match key {
            "experiment" => {
                self.experiment = Experiment::parse(value)
                    .ok_or_else(|| err(line, format!("unknown experiment '{value}'")))?;
            }
            "grid_n" => {
                let n = pusize(value)?;
                if n % 2 != 0 {
                    return Err(err(line, format!("grid_n must be even, got {n}")));
                }
                self.grid_n = n;
            }
            "horizon" => self.horizon = pf64(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| err(line, format!("not an integer: '{value}'")))?;
            }
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "initial_data" => {
                self.initial_data = InitialData::parse(value).map_err(|m| err(line, m))?;
            }
            "nu0" => self.nu0 = Some(pf64(value)?),
            "z0" => self.z0 = pf64(value)?,
            "steady_tol" => self.steady_tol = pf64(value)?,
            "snapshot_out_stride" => self.snapshot_out_stride = pusize(value)?,
            "policy.cfl" => self.policy.cfl = pf64(value)?,
            "policy.dt_max" => self.policy.dt_max = pf64(value)?,
            "policy.dt_min" => self.policy.dt_min = pf64(value)?,
            "policy.sup_cap" => self.policy.sup_cap = pf64(value)?,
            "policy.mean_tol" => self.policy.mean_tol = pf64(value)?,
            "policy.snapshot_stride" => self.policy.snapshot_stride = pusize(value)?,
            "policy.filter_rate" => self.policy.filter_rate = pf64(value)?,
            "weights.kind" => {
                self.weight_kind = match value.to_ascii_lowercase().as_str() {
                    "w_minus1" => WeightKind::WMinus1,
                    "w_tilde_theta" => WeightKind::WTildeTheta,
                    "w_theta" => WeightKind::WTheta,
                    "omega" => WeightKind::Omega,
                    other => return Err(err(line, format!("unknown weight kind '{other}'"))),
                };
            }
            "weights.theta" => self.weight_theta = pf64(value)?,
            "weights.c" => self.weight_c = pf64(value)?,
            "weights.exclusion_radius_h" => self.exclusion_radius_h = pf64(value)?,
            "linear.variant" => {
                let v = value.to_ascii_uppercase();
                if !["L0", "L", "QUASI", "DERIV"].contains(&v.as_str()) {
                    return Err(err(line, format!("unknown linear variant '{value}'")));
                }
                self.linear.variant = v;
            }
            "linear.x_star_0" => self.linear.x_star_0 = pf64(value)?,
            "linear.theta_prime" => self.linear.theta_prime = pf64(value)?,
            "linear.fit_lo" => self.linear.fit_lo = pf64(value)?,
            "linear.fit_hi" => self.linear.fit_hi = pf64(value)?,
            "instability.epsilon" => self.instability.epsilon = pf64(value)?,
            "instability.sigma" => self.instability.sigma = pf64(value)?,
            "instability.support_radius" => self.instability.support_radius = pf64(value)?,
            "instability.z0" => self.instability.z0 = pf64(value)?,
            "instability.refine" => {
                self.instability.refine = value
                    .parse()
                    .map_err(|_| err(line, format!("not a boolean: '{value}'")))?;
            }
            other => return Err(err(line, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a config file; unknown keys are rejected with line numbers.
    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut saw_experiment = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !["policy", "weights", "linear", "instability"].contains(&name) {
                    return Err(err(line_no, format!("unknown section '[{name}]'")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(line_no, format!("expected 'key: value', got '{line}'")))?;
            let key = key.trim();
            // the initial_data descriptor itself contains colons
            let full_key = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if full_key == "experiment" {
                saw_experiment = true;
            }
            cfg.apply(&full_key, value.trim(), line_no)?;
        }
        if !saw_experiment {
            return Err(err(0, "config must set 'experiment'"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(0, format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    /// Deterministic serialization; parse(serialize(cfg)) == cfg.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("experiment: {}\n", self.experiment.name()));
        s.push_str(&format!("grid_n: {}\n", self.grid_n));
        s.push_str(&format!("horizon: {}\n", self.horizon));
        s.push_str(&format!("seed: {}\n", self.seed));
        if let Some(dir) = &self.output_dir {
            s.push_str(&format!("output_dir: {}\n", dir.display()));
        }
        s.push_str(&format!("initial_data: {}\n", self.initial_data.descriptor()));
        if let Some(nu0) = self.nu0 {
            s.push_str(&format!("nu0: {nu0}\n"));
        }
        s.push_str(&format!("z0: {}\n", self.z0));
        s.push_str(&format!("steady_tol: {}\n", self.steady_tol));
        s.push_str(&format!("snapshot_out_stride: {}\n", self.snapshot_out_stride));
        s.push_str("\n[policy]\n");
        let p = &self.policy;
        s.push_str(&format!("cfl: {}\n", p.cfl));
        s.push_str(&format!("dt_max: {}\n", p.dt_max));
        s.push_str(&format!("dt_min: {}\n", p.dt_min));
        s.push_str(&format!("sup_cap: {}\n", p.sup_cap));
        s.push_str(&format!("mean_tol: {}\n", p.mean_tol));
        s.push_str(&format!("snapshot_stride: {}\n", p.snapshot_stride));
        s.push_str(&format!("filter_rate: {}\n", p.filter_rate));
        s.push_str("\n[weights]\n");
        s.push_str(&format!(
            "kind: {}\n",
            match self.weight_kind {
                WeightKind::WMinus1 => "w_minus1",
                WeightKind::WTildeTheta => "w_tilde_theta",
                WeightKind::WTheta => "w_theta",
                WeightKind::Omega => "omega",
            }
        ));
        s.push_str(&format!("theta: {}\n", self.weight_theta));
        s.push_str(&format!("c: {}\n", self.weight_c));
        s.push_str(&format!("exclusion_radius_h: {}\n", self.exclusion_radius_h));
        s.push_str("\n[linear]\n");
        s.push_str(&format!("variant: {}\n", self.linear.variant));
        s.push_str(&format!("x_star_0: {}\n", self.linear.x_star_0));
        s.push_str(&format!("theta_prime: {}\n", self.linear.theta_prime));
        s.push_str(&format!("fit_lo: {}\n", self.linear.fit_lo));
        s.push_str(&format!("fit_hi: {}\n", self.linear.fit_hi));
        s.push_str("\n[instability]\n");
        let i = &self.instability;
        s.push_str(&format!("epsilon: {}\n", i.epsilon));
        s.push_str(&format!("sigma: {}\n", i.sigma));
        s.push_str(&format!("support_radius: {}\n", i.support_radius));
        s.push_str(&format!("z0: {}\n", i.z0));
        s.push_str(&format!("refine: {}\n", i.refine));
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid_n % 2 != 0 || self.grid_n < 16 {
            return Err(err(
                0,
                format!("grid_n must be even and >= 16, got {}", self.grid_n),
            ));
        }
        self.policy
            .validate()
            .map_err(|e| err(0, e.to_string()))?;
        if let InitialData::Csv(path) = &self.initial_data {
            if !path.exists() {
                return Err(err(0, format!("initial data file missing: {}", path.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse_text("experiment: pj_stability\ngrid_n: 256\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::PjStability);
        assert_eq!(cfg.grid_n, 256);
        assert_eq!(cfg.policy.cfl, 0.5);
    }

    #[test]
    fn odd_grid_is_rejected_naming_the_field() {
        let e = ExperimentConfig::parse_text("experiment: pj_stability\ngrid_n: 15\n")
            .unwrap_err();
        assert!(e.message.contains("grid_n"));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let e = ExperimentConfig::parse_text("experiment: pj_stability\n\nwhatever: 3\n")
            .unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("whatever"));
    }

    #[test]
    fn descriptor_expansion_matches_handwritten_data() {
        let cfg = ExperimentConfig::parse_text(
            "experiment: pj_stability\ninitial_data: cos_plus: {amplitude: 0.01, mode: 2}\n",
        )
        .unwrap();
        let g = Grid::new(64).unwrap();
        let built = match cfg.initial_data {
            InitialData::CosPlus { amplitude, mode } => {
                assert_eq!(amplitude, 0.01);
                assert_eq!(mode, 2);
                cfg.initial_data.build(&g).unwrap()
            }
            _ => panic!("wrong family"),
        };
        let byhand = GridFunction::sample(&g, |x| x.cos() + 0.01 * (2.0 * x).cos());
        assert_eq!(built.sup_distance(&byhand), 0.0);
    }

    #[test]
    fn config_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("experiment", "ipm_blowup").unwrap();
        cfg.set("grid_n", "128").unwrap();
        cfg.set("policy.dt_max", "0.001").unwrap();
        cfg.set("weights.theta", "0.25").unwrap();
        cfg.set("initial_data", "sin_half: {k: 1, mu: -0.5}").unwrap();
        cfg.set("instability.refine", "true").unwrap();
        let text = cfg.to_text();
        let back = ExperimentConfig::parse_text(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn section_keys_apply() {
        let cfg = ExperimentConfig::parse_text(
            "experiment: linear_decay\n[linear]\nvariant: quasi\ntheta_prime: 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.linear.variant, "QUASI");
        assert_eq!(cfg.linear.theta_prime, 0.5);
    }
}
