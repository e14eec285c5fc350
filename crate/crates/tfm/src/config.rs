//! Experiment configuration: INI-style sections of `key = value` lines.
//!
//! ```text
//! [model]
//! kind = nonlinear2d
//!
//! [force]
//! kind = ring
//! magnitude = 1000
//! ```
//!
//! Every diagnostic carries the line it refers to. Unknown sections and keys
//! are rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use tfm_core::experiments::Region;
use tfm_core::forward2d::NewtonOptions;
use tfm_core::inversion::ParamSpace;
use tfm_core::material::{EnergyOffset, MaterialParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["kind", "order"]),
    ("domain", &["half_width", "depth", "data_cells", "recon_cells", "flip_recon"]),
    ("material", &["young", "poisson", "mu", "lambda", "offset"]),
    ("force", &["kind", "magnitude", "path", "thickness"]),
    ("noise", &["level_percent", "delta", "margin", "seed"]),
    ("inversion", &["tau", "rho", "max_outer", "max_inner", "param_space", "residual_floor", "initial_guess"]),
    ("newton", &["tol", "max_iterations", "homotopy_steps", "auto_homotopy"]),
    ("solver", &["cg_tol"]),
    ("compare", &["magnitudes", "two_stage", "two_stage_magnitude", "linear_iterations", "refine_iterations"]),
    ("output", &["dir", "truth"]),
];

/// Raw parsed sections, before validation.
#[derive(Debug, Clone, Default)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                    .trim()
                    .to_ascii_lowercase();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::at(line, format!("unknown section [{name}]")));
                }
                if ini.sections.contains_key(&name) {
                    return Err(ConfigError::at(line, format!("section [{name}] appears twice")));
                }
                ini.sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, "expected `key = value`"))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().trim_matches('"').to_string();
            let section = current
                .as_ref()
                .ok_or_else(|| ConfigError::at(line, "key outside of any section"))?;
            let allowed = SCHEMA.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::at(line, format!("unknown key `{key}` in [{section}]")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("empty value for `{key}`")));
            }
            let entries = ini.sections.get_mut(section).unwrap();
            if let Some(prev) = entries.get(&key) {
                return Err(ConfigError::at(line, format!("`{key}` already set on line {}", prev.line)));
            }
            entries.insert(key, Entry { value, line });
        }
        Ok(ini)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.entry(section, key).is_some()
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }

    fn parse_with<T>(&self, section: &str, key: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .ok_or_else(|| ConfigError::at(e.line, format!("`{key}` must be {what}, got `{}`", e.value))),
        }
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(section, key, |s| s.parse::<f64>().ok().filter(|v| v.is_finite()), "a finite number")
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(section, key, |s| s.parse::<usize>().ok(), "a non-negative integer")
    }

    fn flag(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse_with(
            section,
            key,
            |s| match s.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Some(true),
                "false" | "no" | "0" => Some(false),
                _ => None,
            },
            "true or false",
        )
    }

    fn floats(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.parse_with(
            section,
            key,
            |s| split_list(s).map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite())).collect(),
            "a list of numbers",
        )
    }

    fn counts(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.parse_with(section, key, |s| split_list(s).map(|t| t.parse::<usize>().ok()).collect(), "a list of integers")
    }

    fn text(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear25d,
    Linear2d,
    Nonlinear2d,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear25d => "linear25d",
            ModelKind::Linear2d => "linear2d",
            ModelKind::Nonlinear2d => "nonlinear2d",
        }
    }

    pub fn is_3d(self) -> bool {
        self == ModelKind::Linear25d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub half_width: f64,
    /// Substrate depth; only used by the 2.5D model.
    pub depth: f64,
    pub order: usize,
    pub data_cells: Vec<usize>,
    pub recon_cells: Vec<usize>,
    pub flip_recon: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForceSource {
    Ring(f64),
    Spots(f64),
    /// Measured displacements; the force is unknown.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Level { percent: f64, seed: u64 },
    Delta { delta: f64, seed: u64 },
    Margin(Region),
}

impl NoiseSpec {
    pub fn seed(&self) -> u64 {
        match *self {
            NoiseSpec::Level { seed, .. } | NoiseSpec::Delta { seed, .. } => seed,
            NoiseSpec::Margin(_) => 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            NoiseSpec::Level { percent, .. } => NoiseSpec::Level { percent, seed },
            NoiseSpec::Delta { delta, .. } => NoiseSpec::Delta { delta, seed },
            m => m,
        }
    }

    pub fn is_noise_free(&self) -> bool {
        matches!(*self, NoiseSpec::Level { percent, .. } if percent == 0.0) || matches!(*self, NoiseSpec::Delta { delta, .. } if delta == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionSettings {
    pub tau: f64,
    pub rho: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub param_space: ParamSpace,
    pub residual_floor: f64,
    pub initial_guess: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStage {
    pub magnitude: f64,
    pub linear_iterations: usize,
    pub refine_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSettings {
    pub magnitudes: Vec<f64>,
    pub two_stage: Option<TwoStage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthSource {
    Analytic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub domain: DomainConfig,
    pub material: MaterialParams,
    pub force: ForceSource,
    pub thickness: f64,
    pub noise: NoiseSpec,
    pub inversion: InversionSettings,
    pub newton: NewtonOptions,
    pub cg_tol: f64,
    pub compare: CompareSettings,
    pub output_dir: PathBuf,
    pub truth: Option<TruthSource>,
}

impl ExperimentConfig {
    /// Reads and validates a configuration file; relative paths inside it
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((Self::from_str_in(&text, base)?, text))
    }

    pub fn from_str_in(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text)?;
        Self::from_ini(&ini, base)
    }

    fn from_ini(ini: &Ini, base: &Path) -> Result<Self, ConfigError> {
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let model = match ini.text("model", "kind") {
            None => return Err(ConfigError::global("[model] kind is required (linear25d, linear2d or nonlinear2d)")),
            Some(k) => match k.to_ascii_lowercase().as_str() {
                "linear25d" => ModelKind::Linear25d,
                "linear2d" => ModelKind::Linear2d,
                "nonlinear2d" => ModelKind::Nonlinear2d,
                other => {
                    return Err(ConfigError::at(
                        ini.line("model", "kind").unwrap(),
                        format!("unknown model `{other}` (expected linear25d, linear2d or nonlinear2d)"),
                    ))
                }
            },
        };
        let order = ini.count("model", "order")?.unwrap_or(2);
        if !(1..=3).contains(&order) {
            return Err(ConfigError::at(ini.line("model", "order").unwrap(), "order must be 1, 2 or 3"));
        }

        let dims = if model.is_3d() { 3 } else { 2 };
        let default_cells = if model.is_3d() { vec![12, 12, 4] } else { vec![24, 24] };
        let cells = |key: &str, fallback: Vec<usize>| -> Result<Vec<usize>, ConfigError> {
            let v = ini.counts("domain", key)?.unwrap_or(fallback);
            if v.len() != dims || v.contains(&0) {
                return Err(ConfigError {
                    line: ini.line("domain", key),
                    message: format!("`{key}` needs {dims} positive counts for {}", model.name()),
                });
            }
            Ok(v)
        };
        let recon_cells = cells("recon_cells", default_cells.clone())?;
        let data_fallback = recon_cells.iter().map(|&n| n + n / 2).collect();
        let data_cells = cells("data_cells", data_fallback)?;
        let half_width = ini.float("domain", "half_width")?.unwrap_or(if model.is_3d() { 2.0 } else { 3.0 });
        let depth = ini.float("domain", "depth")?.unwrap_or(1.0);
        if half_width <= 0.0 || depth <= 0.0 {
            return Err(ConfigError {
                line: ini.line("domain", "half_width").or(ini.line("domain", "depth")),
                message: "domain extents must be positive".into(),
            });
        }
        let domain = DomainConfig {
            half_width,
            depth,
            order,
            data_cells,
            recon_cells,
            flip_recon: ini.flag("domain", "flip_recon")?.unwrap_or(false),
        };

        let material = material_from(ini)?;

        let force_line = ini.line("force", "kind");
        let force = match ini.text("force", "kind").map(str::to_ascii_lowercase).as_deref() {
            None => return Err(ConfigError::global("[force] kind is required (ring, spots or csv)")),
            Some(kind @ ("ring" | "spots")) => {
                if ini.has("force", "path") {
                    return Err(ConfigError::at(ini.line("force", "path").unwrap(), "`path` conflicts with an analytic force field"));
                }
                let default = if kind == "ring" { 1000.0 } else { 10.0 };
                let m = ini.float("force", "magnitude")?.unwrap_or(default);
                if kind == "ring" {
                    ForceSource::Ring(m)
                } else {
                    ForceSource::Spots(m)
                }
            }
            Some("csv") => {
                if ini.has("force", "magnitude") {
                    return Err(ConfigError::at(ini.line("force", "magnitude").unwrap(), "`magnitude` conflicts with measured data"));
                }
                match ini.text("force", "path") {
                    Some(p) => ForceSource::Csv(resolve(p)),
                    None => return Err(ConfigError::at(force_line.unwrap(), "force kind csv needs `path`")),
                }
            }
            Some(other) => return Err(ConfigError::at(force_line.unwrap(), format!("unknown force kind `{other}`"))),
        };
        let thickness = ini.float("force", "thickness")?.unwrap_or(1.0);
        if thickness <= 0.0 {
            return Err(ConfigError::at(ini.line("force", "thickness").unwrap(), "thickness must be positive"));
        }

        let noise = noise_from(ini)?;

        let inversion = InversionSettings {
            tau: ini.float("inversion", "tau")?.unwrap_or(1.2),
            rho: ini.float("inversion", "rho")?.unwrap_or(0.7),
            max_outer: ini.count("inversion", "max_outer")?.unwrap_or(30),
            max_inner: ini.count("inversion", "max_inner")?.unwrap_or(if model == ModelKind::Nonlinear2d { 20 } else { 200 }),
            param_space: match ini.text("inversion", "param_space").map(str::to_ascii_lowercase).as_deref() {
                None | Some("l2") => ParamSpace::L2,
                Some("h10") => ParamSpace::H10,
                Some(other) => {
                    return Err(ConfigError::at(
                        ini.line("inversion", "param_space").unwrap(),
                        format!("unknown parameter space `{other}` (expected l2 or h10)"),
                    ))
                }
            },
            residual_floor: ini.float("inversion", "residual_floor")?.unwrap_or(1e-14),
            initial_guess: ini.text("inversion", "initial_guess").map(resolve),
        };
        if !(inversion.tau > 1.0) {
            return Err(ConfigError {
                line: ini.line("inversion", "tau"),
                message: format!("tau must exceed 1, got {}", inversion.tau),
            });
        }
        if !(inversion.rho > 0.0 && inversion.rho < 1.0) {
            return Err(ConfigError::at(ini.line("inversion", "rho").unwrap(), "rho must lie in (0, 1)"));
        }
        if inversion.residual_floor < 0.0 {
            return Err(ConfigError::at(ini.line("inversion", "residual_floor").unwrap(), "residual_floor must be non-negative"));
        }
        if inversion.param_space == ParamSpace::H10 && model.is_3d() {
            return Err(ConfigError::at(ini.line("inversion", "param_space").unwrap(), "h10 is only available for the 2D models"));
        }

        let defaults = NewtonOptions::default();
        let newton = NewtonOptions {
            newton_tol: ini.float("newton", "tol")?.unwrap_or(defaults.newton_tol),
            max_newton: ini.count("newton", "max_iterations")?.unwrap_or(defaults.max_newton),
            homotopy_steps: ini.count("newton", "homotopy_steps")?.unwrap_or(defaults.homotopy_steps),
            auto_homotopy: ini.flag("newton", "auto_homotopy")?.unwrap_or(defaults.auto_homotopy),
            ..defaults
        };
        if !(newton.newton_tol > 0.0) || newton.homotopy_steps == 0 {
            return Err(ConfigError {
                line: ini.line("newton", "tol").or(ini.line("newton", "homotopy_steps")),
                message: "newton tol must be positive and homotopy_steps at least 1".into(),
            });
        }
        let cg_tol = ini.float("solver", "cg_tol")?.unwrap_or(1e-10);
        if !(cg_tol > 0.0 && cg_tol < 1.0) {
            return Err(ConfigError::at(ini.line("solver", "cg_tol").unwrap(), "cg_tol must lie in (0, 1)"));
        }

        let compare = CompareSettings {
            magnitudes: ini.floats("compare", "magnitudes")?.unwrap_or_else(|| vec![1e2, 1e3, 1e4, 5e4, 1e5, 2e5]),
            two_stage: if ini.flag("compare", "two_stage")?.unwrap_or(false) {
                Some(TwoStage {
                    magnitude: ini.float("compare", "two_stage_magnitude")?.unwrap_or(2e5),
                    linear_iterations: ini.count("compare", "linear_iterations")?.unwrap_or(300),
                    refine_iterations: ini.count("compare", "refine_iterations")?.unwrap_or(10),
                })
            } else {
                None
            },
        };
        if let Some(bad) = compare.magnitudes.iter().find(|m| **m < 0.0) {
            return Err(ConfigError::at(ini.line("compare", "magnitudes").unwrap(), format!("negative magnitude {bad}")));
        }

        let truth = match ini.text("output", "truth") {
            None => None,
            Some(t) if t.eq_ignore_ascii_case("analytic") => {
                if matches!(force, ForceSource::Csv(_)) {
                    return Err(ConfigError::at(ini.line("output", "truth").unwrap(), "analytic truth needs an analytic force field"));
                }
                Some(TruthSource::Analytic)
            }
            Some(p) => Some(TruthSource::File(resolve(p))),
        };

        Ok(Self {
            model,
            domain,
            material,
            force,
            thickness,
            noise,
            inversion,
            newton,
            cg_tol,
            compare,
            output_dir: resolve(ini.text("output", "dir").unwrap_or("out")),
            truth,
        })
    }
}

fn material_from(ini: &Ini) -> Result<MaterialParams, ConfigError> {
    let young = ini.float("material", "young")?;
    let poisson = ini.float("material", "poisson")?;
    let mu = ini.float("material", "mu")?;
    let lambda = ini.float("material", "lambda")?;
    let offset = match ini.text("material", "offset").map(str::to_ascii_lowercase).as_deref() {
        None | Some("consistent2d") => EnergyOffset::Consistent2d,
        Some("3d") => EnergyOffset::ThreeDimensional,
        Some(other) => {
            return Err(ConfigError::at(
                ini.line("material", "offset").unwrap(),
                format!("unknown energy offset `{other}` (expected consistent2d or 3d)"),
            ))
        }
    };
    let line = ini.line("material", "young").or(ini.line("material", "mu"));
    let params = match (young, poisson, mu, lambda) {
        (Some(e), Some(nu), None, None) => MaterialParams::from_young_poisson(e, nu),
        (None, None, Some(mu), Some(lambda)) => MaterialParams::new(mu, lambda),
        (None, None, None, None) => MaterialParams::from_young_poisson(10_000.0, 0.45),
        _ => {
            return Err(ConfigError {
                line,
                message: "give either young and poisson or mu and lambda".into(),
            })
        }
    };
    params.map(|p| p.with_offset(offset)).map_err(|e| ConfigError {
        line,
        message: format!("invalid material: {e}"),
    })
}

fn noise_from(ini: &Ini) -> Result<NoiseSpec, ConfigError> {
    let given: Vec<&str> = ["level_percent", "delta", "margin"].into_iter().filter(|k| ini.has("noise", k)).collect();
    if given.len() > 1 {
        return Err(ConfigError::at(
            ini.line("noise", given[1]).unwrap(),
            format!("noise is specified twice (`{}` and `{}`)", given[0], given[1]),
        ));
    }
    let seed = ini.count("noise", "seed")?.unwrap_or(0) as u64;
    match given.first().copied() {
        None => Ok(NoiseSpec::Level { percent: 0.0, seed }),
        Some("level_percent") => {
            let p = ini.float("noise", "level_percent")?.unwrap();
            if p < 0.0 {
                return Err(ConfigError::at(ini.line("noise", "level_percent").unwrap(), "noise level must be non-negative"));
            }
            Ok(NoiseSpec::Level { percent: p, seed })
        }
        Some("delta") => {
            let d = ini.float("noise", "delta")?.unwrap();
            if d < 0.0 {
                return Err(ConfigError::at(ini.line("noise", "delta").unwrap(), "delta must be non-negative"));
            }
            Ok(NoiseSpec::Delta { delta: d, seed })
        }
        _ => {
            let line = ini.line("noise", "margin").unwrap();
            let b = ini.floats("noise", "margin")?.unwrap();
            if b.len() != 4 || !(b[2] > b[0] && b[3] > b[1]) {
                return Err(ConfigError::at(line, "margin needs `x_lo y_lo x_hi y_hi` with a positive area"));
            }
            Ok(NoiseSpec::Margin(Region {
                lo: [b[0], b[1]],
                hi: [b[2], b[3]],
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_str_in(text, Path::new("/base"))
    }

    const MINIMAL: &str = "[model]\nkind = linear2d\n[force]\nkind = ring\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.model, ModelKind::Linear2d);
        assert_eq!(c.force, ForceSource::Ring(1000.0));
        assert_eq!(c.domain.half_width, 3.0);
        assert_eq!(c.domain.recon_cells, vec![24, 24]);
        assert_eq!(c.domain.data_cells, vec![36, 36]);
        assert_eq!(c.inversion.tau, 1.2);
        assert_eq!(c.output_dir, PathBuf::from("/base/out"));
        assert!(c.noise.is_noise_free());
    }

    #[test]
    fn comments_and_quotes() {
        let c = parse("# experiment\n[model]\nkind = nonlinear2d  # inline\n; other\n[force]\nkind = spots\n[output]\ndir = \"runs/a\"\n").unwrap();
        assert_eq!(c.model, ModelKind::Nonlinear2d);
        assert_eq!(c.force, ForceSource::Spots(10.0));
        assert_eq!(c.inversion.max_inner, 20);
        assert_eq!(c.output_dir, PathBuf::from("/base/runs/a"));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let e = parse("[model]\nkind = linear2d\n[force]\nkind = ring\nmagnitdue = 3\n").unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("magnitdue"));
    }

    #[test]
    fn tau_must_exceed_one() {
        let e = parse(&format!("{MINIMAL}[inversion]\ntau = 1.0\n")).unwrap_err();
        assert_eq!(e.line, Some(6));
    }

    #[test]
    fn two_noise_specs_rejected() {
        let e = parse(&format!("{MINIMAL}[noise]\nlevel_percent = 5\ndelta = 0.1\n")).unwrap_err();
        assert_eq!(e.line, Some(7));
        assert!(e.message.contains("twice"));
    }

    #[test]
    fn two_force_sources_rejected() {
        let e = parse("[model]\nkind = linear2d\n[force]\nkind = ring\npath = a.csv\n").unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn csv_force_needs_path() {
        assert!(parse("[model]\nkind = linear2d\n[force]\nkind = csv\n").is_err());
        let c = parse("[model]\nkind = linear2d\n[force]\nkind = csv\npath = m.csv\n[noise]\nmargin = 1 1 3 3\n").unwrap();
        assert_eq!(c.force, ForceSource::Csv(PathBuf::from("/base/m.csv")));
        assert!(matches!(c.noise, NoiseSpec::Margin(_)));
    }

    #[test]
    fn cell_counts_match_model_dimension() {
        let e = parse("[model]\nkind = linear25d\n[domain]\nrecon_cells = 8 8\n[force]\nkind = ring\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        let c = parse("[model]\nkind = linear25d\n[force]\nkind = ring\n").unwrap();
        assert_eq!(c.domain.recon_cells.len(), 3);
        assert_eq!(c.domain.half_width, 2.0);
    }

    #[test]
    fn material_either_pair() {
        let c = parse(&format!("{MINIMAL}[material]\nmu = 2\nlambda = 3\n")).unwrap();
        assert_eq!((c.material.mu, c.material.lambda), (2.0, 3.0));
        assert!(parse(&format!("{MINIMAL}[material]\nmu = 2\nyoung = 3\n")).is_err());
    }

    #[test]
    fn duplicate_key_and_section() {
        assert_eq!(parse("[model]\nkind = linear2d\nkind = linear2d\n").unwrap_err().line, Some(3));
        assert_eq!(parse("[model]\nkind = linear2d\n[model]\n").unwrap_err().line, Some(3));
    }

    #[test]
    fn seed_override() {
        let c = parse(&format!("{MINIMAL}[noise]\nlevel_percent = 5\nseed = 4\n")).unwrap();
        assert_eq!(c.noise.seed(), 4);
        assert_eq!(c.noise.clone().with_seed(9).seed(), 9);
    }
}
