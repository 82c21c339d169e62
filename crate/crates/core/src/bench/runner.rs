use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{MatrixOptimizer, RunConfig};
use super::BenchError;
use crate::matlin::{LinalgError, Mat};
use crate::optim::{
    adamw_step, clipped_ema_step, mars_m_step, moonlight_step, muon_step, AdamWState, ClippedEmaState, MarsMState,
    MarsMode, MoonlightState, MuonState, OptimError,
};
use crate::problems::{Evaluation, ParamKind, ParamSet, Problem, ProblemError, Sample};

pub const CSV_HEADER: [&str; 7] = [
    "step",
    "loss",
    "grad_norm_fro",
    "true_grad_norm",
    "update_rms",
    "eta",
    "elapsed_ns",
];

/// One CSV row: the state after `step` updates.
///
/// `loss` and `grad_norm_fro` are measured at that state under the sample
/// the next update consumes. `update_rms` and `eta` describe the update that
/// produced the state and are zero on row 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm_fro: f64,
    pub true_grad_norm: Option<f64>,
    pub update_rms: f64,
    pub eta: f64,
    pub elapsed_ns: u128,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<RunRecord>,
    /// Full-objective loss at the start and end, when the problem has one.
    pub initial_full_loss: Option<f64>,
    pub final_full_loss: Option<f64>,
    pub final_params: ParamSet,
}

impl RunResult {
    /// Full loss when available, else the last stochastic loss.
    pub fn final_loss(&self) -> f64 {
        self.final_full_loss
            .unwrap_or_else(|| self.records.last().map_or(f64::NAN, |r| r.loss))
    }

    pub fn best_loss(&self) -> (u64, f64) {
        self.records
            .iter()
            .fold((0, f64::INFINITY), |best, r| if r.loss < best.1 { (r.step, r.loss) } else { best })
    }

    /// Mean of `grad_norm_fro` over the last tenth of the post-initial rows.
    pub fn tail_grad_norm(&self) -> f64 {
        tail_mean(&self.records, |r| Some(r.grad_norm_fro)).unwrap_or(f64::NAN)
    }

    pub fn tail_true_grad_norm(&self) -> Option<f64> {
        tail_mean(&self.records, |r| r.true_grad_norm)
    }
}

fn tail_mean(records: &[RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> Option<f64> {
    let rows: Vec<&RunRecord> = records.iter().filter(|r| r.step > 0).collect();
    if rows.is_empty() {
        return None;
    }
    let k = (rows.len() / 10).max(1);
    let vals: Option<Vec<f64>> = rows[rows.len() - k..].iter().map(|r| f(r)).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

enum SlotState {
    Muon(MuonState),
    Moonlight(MoonlightState),
    MarsM(MarsMState),
    ClippedEma(ClippedEmaState),
    AdamW(AdamWState),
}

fn numerical(step: u64, what: impl Into<String>) -> BenchError {
    BenchError::Numerical {
        step,
        what: what.into(),
    }
}

fn from_problem(step: u64, e: ProblemError) -> BenchError {
    match e {
        ProblemError::Linalg(LinalgError::NonFinite { .. } | LinalgError::NoConvergence { .. }) => {
            numerical(step, e.to_string())
        }
        other => BenchError::Problem(other.to_string()),
    }
}

fn from_optim(step: u64, e: OptimError) -> BenchError {
    match e {
        OptimError::Linalg(LinalgError::NonFinite { .. } | LinalgError::NoConvergence { .. }) => {
            numerical(step, e.to_string())
        }
        other => BenchError::Optimizer(other.to_string()),
    }
}

fn evaluate(problem: &dyn Problem, x: &ParamSet, sample: Sample, step: u64) -> Result<Evaluation, BenchError> {
    let ev = problem.evaluate(x, sample).map_err(|e| from_problem(step, e))?;
    if !ev.loss.is_finite() || !ev.grad.is_finite() {
        return Err(numerical(step, "non-finite loss or gradient"));
    }
    Ok(ev)
}

/// Executes the training loop in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunResult, BenchError> {
    let problem = cfg.problem.build().map_err(|e| BenchError::Problem(e.to_string()))?;
    let problem = problem.as_ref();
    let start = Instant::now();
    let spec = &cfg.optimizer;

    let mut x = problem.init(cfg.seed);
    let mut slots: Vec<SlotState> = x
        .iter()
        .map(|p| {
            let (r, c) = p.value.shape();
            match (&spec.matrix, p.kind) {
                (MatrixOptimizer::AdamW, _) | (_, ParamKind::Vector) => SlotState::AdamW(AdamWState::new(r, c)),
                (MatrixOptimizer::Muon(_), _) => SlotState::Muon(MuonState::new(r, c)),
                (MatrixOptimizer::Moonlight(_), _) => SlotState::Moonlight(MoonlightState::new(r, c)),
                (MatrixOptimizer::MarsM(m), _) => SlotState::MarsM(MarsMState::new(r, c, m.mode)),
                (MatrixOptimizer::ClippedEma(_), _) => SlotState::ClippedEma(ClippedEmaState::new(r, c)),
            }
        })
        .collect();
    let exact = matches!(&spec.matrix, MatrixOptimizer::MarsM(m) if m.mode == MarsMode::Exact);

    let full_loss = |x: &ParamSet, step: u64| -> Result<Option<f64>, BenchError> {
        problem
            .full_loss(x)
            .transpose()
            .map_err(|e| from_problem(step, e))
    };
    let true_norm = |x: &ParamSet, step: u64| -> Result<Option<f64>, BenchError> {
        let g = problem.true_grad(x).transpose().map_err(|e| from_problem(step, e))?;
        Ok(g.map(|g| g.fro_norm()))
    };

    let initial_full_loss = full_loss(&x, 0)?;
    let mut records = Vec::new();
    let mut current = evaluate(problem, &x, Sample::new(cfg.seed, 1), 0)?;
    records.push(RunRecord {
        step: 0,
        loss: current.loss,
        grad_norm_fro: current.grad.fro_norm(),
        true_grad_norm: true_norm(&x, 0)?,
        update_rms: 0.0,
        eta: 0.0,
        elapsed_ns: start.elapsed().as_nanos(),
    });

    let mut prev_x: Option<ParamSet> = None;
    for t in 1..=cfg.steps {
        let sample = Sample::new(cfg.seed, t);
        let reference = match (&prev_x, exact) {
            (Some(px), true) => Some(evaluate(problem, px, sample, t)?.grad),
            _ => None,
        };
        let mut next = x.clone();
        let mut sq_sum = 0.0;
        let mut eta = 0.0;
        for (i, (slot, param)) in slots.iter_mut().zip(next.iter_mut()).enumerate() {
            let name = param.name.clone();
            let xi = &param.value;
            let g = current.grad.get(&name).map_err(|e| from_problem(t, e))?;
            let out = match (slot, &spec.matrix) {
                (SlotState::AdamW(st), _) => adamw_step(st, xi, g, &spec.adamw),
                (SlotState::Muon(st), MatrixOptimizer::Muon(c)) => muon_step(st, xi, g, c),
                (SlotState::Moonlight(st), MatrixOptimizer::Moonlight(c)) => moonlight_step(st, xi, g, c),
                (SlotState::ClippedEma(st), MatrixOptimizer::ClippedEma(c)) => clipped_ema_step(st, xi, g, c),
                (SlotState::MarsM(st), MatrixOptimizer::MarsM(c)) => {
                    let g_ref: Option<&Mat> = match c.mode {
                        MarsMode::Approximate => None,
                        MarsMode::Exact => Some(match &reference {
                            Some(r) => r.get(&name).map_err(|e| from_problem(t, e))?,
                            None => g,
                        }),
                    };
                    mars_m_step(st, xi, g, g_ref, c)
                }
                _ => unreachable!("slot {i} does not match the optimizer"),
            }
            .map_err(|e| from_optim(t, e))?;
            sq_sum += out.direction.as_slice().iter().map(|v| v * v).sum::<f64>();
            eta = out.eta;
            param.value = out.params;
        }
        if !next.is_finite() {
            return Err(numerical(t, "non-finite parameters"));
        }
        let update_rms = (sq_sum / next.num_entries() as f64).sqrt();
        prev_x = Some(std::mem::replace(&mut x, next));
        current = evaluate(problem, &x, Sample::new(cfg.seed, t + 1), t)?;
        if t % cfg.stride == 0 || t == cfg.steps {
            records.push(RunRecord {
                step: t,
                loss: current.loss,
                grad_norm_fro: current.grad.fro_norm(),
                true_grad_norm: true_norm(&x, t)?,
                update_rms,
                eta,
                elapsed_ns: start.elapsed().as_nanos(),
            });
        }
    }
    let final_full_loss = full_loss(&x, cfg.steps)?;
    if final_full_loss.is_some_and(|l| !l.is_finite()) {
        return Err(numerical(cfg.steps, "non-finite full loss"));
    }
    Ok(RunResult {
        records,
        initial_full_loss,
        final_full_loss,
        final_params: x,
    })
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<(), BenchError> {
    let io = |e: csv::Error| BenchError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            format_real(r.loss),
            format_real(r.grad_norm_fro),
            r.true_grad_norm.map(format_real).unwrap_or_default(),
            format_real(r.update_rms),
            format_real(r.eta),
            r.elapsed_ns.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Sidecar text: a `[summary]` section followed by the resolved config, so
/// the file itself is a valid config for rerunning.
pub fn summary_text(cfg: &RunConfig, result: &RunResult) -> String {
    let mut s = String::from("[summary]\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("version", crate::VERSION.to_string());
    kv("optimizer", cfg.optimizer.matrix.label().to_string());
    kv(
        "vector_params",
        "adamw with the shared schedule and weight decay".to_string(),
    );
    kv("rows", result.records.len().to_string());
    if let Some(last) = result.records.last() {
        kv("final_loss", format_real(last.loss));
    }
    let (best_step, best) = result.best_loss();
    kv("best_loss", format_real(best));
    kv("best_step", best_step.to_string());
    if let Some(l) = result.initial_full_loss {
        kv("initial_full_loss", format_real(l));
    }
    if let Some(l) = result.final_full_loss {
        kv("final_full_loss", format_real(l));
    }
    kv("tail_grad_norm_mean", format_real(result.tail_grad_norm()));
    if let Some(v) = result.tail_true_grad_norm() {
        kv("tail_true_grad_norm_mean", format_real(v));
    }
    s.push('\n');
    s.push_str(&cfg.to_ini());
    s
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub result: RunResult,
}

/// Runs `cfg` and writes `<dir>/<name>_seed<seed>.csv` plus its
/// `.summary.txt` sidecar.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutput, BenchError> {
    let result = execute(cfg)?;
    fs::create_dir_all(dir).map_err(|e| BenchError::Io {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let stem = cfg.file_stem();
    let csv = dir.join(format!("{stem}.csv"));
    let summary = dir.join(format!("{stem}.summary.txt"));
    write_csv(&result.records, &csv)?;
    fs::write(&summary, summary_text(cfg, &result)).map_err(|e| BenchError::Io {
        path: summary.clone(),
        reason: e.to_string(),
    })?;
    Ok(RunOutput { csv, summary, result })
}
