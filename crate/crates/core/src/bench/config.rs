//! Run configuration files.
//!
//! A config is a flat INI file with three sections:
//!
//! ```ini
//! [run]
//! name = quad-marsm
//! steps = 1000
//! seed = 1
//!
//! [problem]
//! name = quadratic
//! sigma = 0.5
//!
//! [optimizer]
//! name = mars_m
//! gamma = 0.025
//! schedule = constant
//! lr = 0.01
//! ```
//!
//! Omitted keys take defaults. Which keys exist depends on earlier choices
//! (the problem name, the optimizer name, the schedule, the polar method),
//! and a key that would be ignored is rejected instead. A `[summary]`
//! section is skipped so that run summaries can be fed back in as configs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::optim::{
    AdamWConfig, ClippedEmaConfig, MarsMConfig, MarsMode, MoonlightConfig, MuonConfig, Schedule, UpdateScale,
};
use crate::polar::{NsScheme, NsVariant, PolarMethod};
use crate::problems::{MlpDims, ProblemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key `{key}` in [{section}]")]
    DuplicateKey { section: String, key: String },
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("invalid value `{value}` for `{key}` in [{section}]: {reason}")]
    InvalidValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Matrix-parameter optimizer selected by `[optimizer] name`.
#[derive(Debug, Clone)]
pub enum MatrixOptimizer {
    Muon(MuonConfig),
    Moonlight(MoonlightConfig),
    MarsM(MarsMConfig),
    ClippedEma(ClippedEmaConfig),
    /// Every parameter, matrix or not, goes through AdamW.
    AdamW,
}

impl MatrixOptimizer {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixOptimizer::Muon(_) => "muon",
            MatrixOptimizer::Moonlight(_) => "moonlight",
            MatrixOptimizer::MarsM(_) => "mars_m",
            MatrixOptimizer::ClippedEma(_) => "clipped_ema",
            MatrixOptimizer::AdamW => "adamw",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerSpec {
    pub matrix: MatrixOptimizer,
    /// Used for vector parameters, and for everything under `adamw`. Shares
    /// the schedule and weight decay of the matrix optimizer.
    pub adamw: AdamWConfig,
    pub schedule: Schedule,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub steps: u64,
    pub seed: u64,
    /// Record every `stride` steps; step 0 and the last step always are.
    pub stride: u64,
    pub out: PathBuf,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    resolved: Vec<(&'static str, Vec<(String, String)>)>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        text.parse()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.set_resolved("run", "seed", seed.to_string());
    }

    pub fn set_name(&mut self, name: &str) {
        self.name = name.to_string();
        self.set_resolved("run", "name", name.to_string());
    }

    pub fn set_out(&mut self, out: &Path) {
        self.out = out.to_path_buf();
        self.set_resolved("run", "out", out.display().to_string());
    }

    fn set_resolved(&mut self, section: &str, key: &str, value: String) {
        if let Some((_, entries)) = self.resolved.iter_mut().find(|(s, _)| *s == section) {
            if let Some(e) = entries.iter_mut().find(|(k, _)| k == key) {
                e.1 = value;
            }
        }
    }

    /// Every key with its resolved value, in canonical order. Parsing the
    /// result yields an equivalent config.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        for (i, (section, entries)) in self.resolved.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            let _ = writeln!(s, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// `<out>/<name>_seed<seed>`, without extension.
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.name, self.seed)
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let name = match name {
                Some(n) => n.to_string(),
                None if props.is_empty() => continue,
                None => {
                    let key = props.iter().next().map(|(k, _)| k.to_string()).unwrap_or_default();
                    return Err(ConfigError::UnknownKey {
                        section: "<none>".into(),
                        key,
                    });
                }
            };
            if name == "summary" {
                continue;
            }
            if !matches!(name.as_str(), "run" | "problem" | "optimizer") {
                return Err(ConfigError::UnknownSection(name));
            }
            let entry = sections.entry(name.clone()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_string(), v.trim().to_string()).is_some() {
                    return Err(ConfigError::DuplicateKey {
                        section: name.clone(),
                        key: k.to_string(),
                    });
                }
            }
        }

        let mut run = Section::new("run", sections.remove("run").unwrap_or_default());
        let name: String = run.take("name", "run")?;
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(run.invalid("name", &name, "must be non-empty and contain no path separators"));
        }
        let steps: u64 = run.required("steps")?;
        if steps == 0 {
            return Err(run.invalid("steps", "0", "must be at least 1"));
        }
        let seed: u64 = run.take("seed", "0")?;
        let stride: u64 = run.take("stride", "1")?;
        if stride == 0 {
            return Err(run.invalid("stride", "0", "must be at least 1"));
        }
        let out: String = run.take("out", "runs")?;
        let run = run.finish()?;

        let mut prob = Section::new("problem", sections.remove("problem").unwrap_or_default());
        let problem = parse_problem(&mut prob)?;
        let prob = prob.finish()?;

        let mut opt = Section::new("optimizer", sections.remove("optimizer").unwrap_or_default());
        let optimizer = parse_optimizer(&mut opt, steps)?;

        let resolved = vec![("run", run), ("problem", prob), ("optimizer", opt.finish()?)];
        Ok(RunConfig {
            name,
            steps,
            seed,
            stride,
            out: PathBuf::from(out),
            problem,
            optimizer,
            resolved,
        })
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ini())
    }
}

fn parse_problem(sec: &mut Section) -> Result<ProblemSpec> {
    let name: String = sec.required("name")?;
    let spec = match name.as_str() {
        "quadratic" => ProblemSpec::Quadratic {
            m: sec.positive("m", "8")?,
            n: sec.positive("n", "8")?,
            sigma: sec.non_negative("sigma", "1")?,
            coupling: sec.non_negative("coupling", "0.5")?,
            target_scale: sec.non_negative("target_scale", "1")?,
            data_seed: sec.take("data_seed", "0")?,
        },
        "lowrank" => ProblemSpec::LowRank {
            m: sec.positive("m", "16")?,
            n: sec.positive("n", "12")?,
            rank: sec.positive("rank", "3")?,
            sigma: sec.non_negative("sigma", "0.1")?,
            init_scale: sec.non_negative("init_scale", "0.1")?,
            data_seed: sec.take("data_seed", "0")?,
        },
        "mlp" => {
            let d = MlpDims::default();
            ProblemSpec::Mlp {
                dims: MlpDims {
                    input: sec.positive("input", &d.input.to_string())?,
                    hidden: sec.positive("hidden", &d.hidden.to_string())?,
                    classes: sec.positive("classes", &d.classes.to_string())?,
                },
                batch: sec.positive("batch", "64")?,
                dataset_size: sec.positive("dataset_size", "4096")?,
                init_scale: sec.non_negative("init_scale", "1")?,
                data_seed: sec.take("data_seed", "0")?,
            }
        }
        other => return Err(sec.invalid("name", other, "expected quadratic, lowrank or mlp")),
    };
    spec.build()
        .map_err(|e| ConfigError::Invalid(format!("problem: {e}")))?;
    Ok(spec)
}

fn parse_schedule(sec: &mut Section, steps: u64) -> Result<Schedule> {
    let kind: String = sec.take("schedule", "constant")?;
    let schedule = match kind.as_str() {
        "constant" => Schedule::Constant {
            lr: sec.non_negative("lr", "0.01")?,
        },
        "cosine" => Schedule::CosineWarmup {
            max_lr: sec.non_negative("max_lr", "0.01")?,
            min_lr: sec.non_negative("min_lr", "0")?,
            warmup_steps: sec.take("warmup_steps", &(steps / 50).to_string())?,
            total_steps: sec.take("total_steps", &steps.to_string())?,
        },
        "theory" => Schedule::Theory {
            s: sec.take("s", "4")?,
        },
        other => return Err(sec.invalid("schedule", other, "expected constant, cosine or theory")),
    };
    schedule
        .validate()
        .map_err(|e| ConfigError::Invalid(format!("optimizer: {e}")))?;
    if let Schedule::CosineWarmup { total_steps, .. } = schedule {
        if total_steps < steps {
            return Err(ConfigError::Invalid(format!(
                "cosine total_steps ({total_steps}) is below run steps ({steps})"
            )));
        }
    }
    Ok(schedule)
}

fn parse_polar(sec: &mut Section) -> Result<PolarMethod> {
    let kind: String = sec.take("polar", "quintic")?;
    if kind == "svd" {
        return Ok(PolarMethod::Svd);
    }
    let variant: NsVariant = kind
        .parse()
        .map_err(|reason| sec.invalid("polar", &kind, &format!("{reason}; expected quintic, cubic or svd")))?;
    let default_steps = match variant {
        NsVariant::Quintic => "5",
        NsVariant::Cubic => "30",
    };
    let steps = sec.positive("ns_steps", default_steps)?;
    let mut scheme = NsScheme::quintic(steps);
    scheme.variant = variant;
    scheme.eps = sec.take("ns_eps", &scheme.eps.to_string())?;
    Ok(PolarMethod::NewtonSchulz(scheme))
}

fn parse_scale(sec: &mut Section) -> Result<UpdateScale> {
    let kind: String = sec.take("scale", "rms")?;
    match kind.as_str() {
        "rms" => Ok(UpdateScale::Rms(sec.take("rms_scale", "0.2")?)),
        "unit" => Ok(UpdateScale::Unit),
        other => Err(sec.invalid("scale", other, "expected rms or unit")),
    }
}

fn parse_clip(sec: &mut Section) -> Result<Option<f64>> {
    let raw: String = sec.take("clip", "1")?;
    if raw == "off" {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(sec.invalid("clip", &raw, "expected a positive threshold or `off`")),
    }
}

fn parse_optimizer(sec: &mut Section, steps: u64) -> Result<OptimizerSpec> {
    let name: String = sec.required("name")?;
    let schedule = parse_schedule(sec, steps)?;
    let mut adamw = AdamWConfig {
        lr: schedule,
        ..AdamWConfig::default()
    };
    let matrix = match name.as_str() {
        "muon" => {
            let d = MuonConfig::default();
            MatrixOptimizer::Muon(MuonConfig {
                beta: sec.beta("beta", "0.95")?,
                lr: schedule,
                polar: parse_polar(sec)?,
                nesterov_feed: sec.take("nesterov", &d.nesterov_feed.to_string())?,
                dampened: sec.take("dampened", &d.dampened.to_string())?,
            })
        }
        "moonlight" => MatrixOptimizer::Moonlight(MoonlightConfig {
            beta: sec.beta("beta", "0.95")?,
            lambda: sec.non_negative("lambda", "0.1")?,
            lr: schedule,
            polar: parse_polar(sec)?,
            scale: parse_scale(sec)?,
        }),
        "mars_m" => {
            let cfg = MarsMConfig {
                beta: sec.beta("beta", "0.95")?,
                gamma: sec.non_negative("gamma", "0.025")?,
                gamma_schedule: None,
                lambda: sec.non_negative("lambda", "0.1")?,
                lr: schedule,
                polar: parse_polar(sec)?,
                scale: parse_scale(sec)?,
                clip: parse_clip(sec)?,
                mode: {
                    let raw: String = sec.take("mode", "approximate")?;
                    raw.parse::<MarsMode>().map_err(|r| sec.invalid("mode", &raw, &r))?
                },
            };
            cfg.validate()
                .map_err(|e| ConfigError::Invalid(format!("optimizer: {e}")))?;
            MatrixOptimizer::MarsM(cfg)
        }
        "clipped_ema" => MatrixOptimizer::ClippedEma(ClippedEmaConfig {
            beta: sec.beta("beta", "0.95")?,
            lambda: sec.non_negative("lambda", "0.1")?,
            lr: schedule,
            polar: parse_polar(sec)?,
            scale: parse_scale(sec)?,
            clip: parse_clip(sec)?,
        }),
        "adamw" => MatrixOptimizer::AdamW,
        other => {
            return Err(sec.invalid(
                "name",
                other,
                "expected muon, moonlight, mars_m, clipped_ema or adamw",
            ))
        }
    };
    adamw.lambda = match &matrix {
        MatrixOptimizer::Moonlight(c) => c.lambda,
        MatrixOptimizer::MarsM(c) => c.lambda,
        MatrixOptimizer::ClippedEma(c) => c.lambda,
        MatrixOptimizer::Muon(_) | MatrixOptimizer::AdamW => sec.non_negative("lambda", "0")?,
    };
    let prefix = if matches!(matrix, MatrixOptimizer::AdamW) { "" } else { "adamw_" };
    adamw.beta1 = sec.beta(&format!("{prefix}beta1"), "0.9")?;
    adamw.beta2 = sec.beta(&format!("{prefix}beta2"), "0.95")?;
    adamw.eps = sec.take(&format!("{prefix}eps"), "1e-8")?;
    if !(adamw.eps > 0.0) {
        return Err(ConfigError::Invalid(format!("optimizer: {prefix}eps must be positive")));
    }
    Ok(OptimizerSpec {
        matrix,
        adamw,
        schedule,
    })
}

/// Keys of one section, consumed as they are interpreted.
struct Section {
    name: &'static str,
    raw: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Section {
    fn new(name: &'static str, raw: BTreeMap<String, String>) -> Self {
        Self {
            name,
            raw,
            resolved: Vec::new(),
        }
    }

    fn invalid(&self, key: &str, value: &str, reason: &str) -> ConfigError {
        ConfigError::InvalidValue {
            section: self.name.into(),
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        }
    }

    fn parse<T: FromStr>(&mut self, key: &str, value: String) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let parsed = value.parse::<T>().map_err(|e| self.invalid(key, &value, &e.to_string()))?;
        self.resolved.push((key.to_string(), value));
        Ok(parsed)
    }

    fn take<T: FromStr>(&mut self, key: &str, default: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let value = self.raw.remove(key).unwrap_or_else(|| default.to_string());
        self.parse(key, value)
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let value = self.raw.remove(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.name.into(),
            key: key.into(),
        })?;
        self.parse(key, value)
    }

    fn real(&mut self, key: &str, default: &str, ok: impl Fn(f64) -> bool, what: &str) -> Result<f64> {
        let v: f64 = self.take(key, default)?;
        if !v.is_finite() || !ok(v) {
            return Err(self.invalid(key, &v.to_string(), what));
        }
        Ok(v)
    }

    fn non_negative(&mut self, key: &str, default: &str) -> Result<f64> {
        self.real(key, default, |v| v >= 0.0, "must be finite and non-negative")
    }

    fn beta(&mut self, key: &str, default: &str) -> Result<f64> {
        self.real(key, default, |v| (0.0..1.0).contains(&v), "must lie in [0, 1)")
    }

    fn positive(&mut self, key: &str, default: &str) -> Result<usize> {
        let v: usize = self.take(key, default)?;
        if v == 0 {
            return Err(self.invalid(key, "0", "must be positive"));
        }
        Ok(v)
    }

    fn finish(self) -> Result<Vec<(String, String)>> {
        if let Some(key) = self.raw.keys().next() {
            return Err(ConfigError::UnknownKey {
                section: self.name.into(),
                key: key.clone(),
            });
        }
        Ok(self.resolved)
    }
}
