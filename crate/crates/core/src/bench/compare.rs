use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::config::RunConfig;
use super::runner::{format_real, run, RunResult};
use super::BenchError;

/// Per-config statistics over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    pub runs: usize,
    pub final_loss_mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub final_loss_std: f64,
    pub tail_grad_norm_mean: f64,
    /// 1 = lowest mean final loss.
    pub rank: usize,
    /// Mean ratio of final to initial full loss, when the problem has one.
    pub loss_ratio_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// In input order.
    pub rows: Vec<CompareRow>,
    pub seeds: Vec<u64>,
    /// Per-run CSV paths, `[config][seed]`.
    pub csvs: Vec<Vec<PathBuf>>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type JobResult = Result<(PathBuf, RunResult), BenchError>;

/// Runs every `(config, seed)` pair, using up to `threads` workers.
///
/// Results do not depend on scheduling: each pair owns its state and writes
/// its own files under `out`.
pub fn compare(configs: &[RunConfig], seeds: &[u64], out: &Path, threads: usize) -> Result<Comparison, BenchError> {
    if configs.len() < 2 {
        return Err(BenchError::Usage("compare needs at least two configs".into()));
    }
    if seeds.is_empty() {
        return Err(BenchError::Usage("compare needs at least one seed".into()));
    }
    for (i, c) in configs.iter().enumerate() {
        if configs[..i].iter().any(|d| d.name == c.name) {
            return Err(BenchError::Usage(format!("duplicate run name `{}`", c.name)));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
        .collect();
    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, s)) = jobs.get(j) else { break };
                let mut cfg = configs[c].clone();
                cfg.set_seed(seeds[s]);
                let r = run(&cfg, out)
                    .map(|o| (o.csv, o.result))
                    .map_err(|e| BenchError::Run {
                        name: cfg.name.clone(),
                        seed: seeds[s],
                        source: Box::new(e),
                    });
                results.lock().expect("no worker panics while holding the lock")[j] = Some(r);
            });
        }
    });
    let mut results = results.into_inner().expect("workers finished");

    let mut rows = Vec::new();
    let mut csvs = Vec::new();
    for (c, cfg) in configs.iter().enumerate() {
        let mut finals = Vec::new();
        let mut tails = Vec::new();
        let mut ratios = Vec::new();
        let mut paths = Vec::new();
        for s in 0..seeds.len() {
            let (path, r) = results[c * seeds.len() + s].take().expect("every job ran")?;
            finals.push(r.final_loss());
            tails.push(r.tail_grad_norm());
            if let (Some(a), Some(b)) = (r.initial_full_loss, r.final_full_loss) {
                ratios.push(b / a);
            }
            paths.push(path);
        }
        let (final_loss_mean, final_loss_std) = mean_std(&finals);
        rows.push(CompareRow {
            name: cfg.name.clone(),
            runs: seeds.len(),
            final_loss_mean,
            final_loss_std,
            tail_grad_norm_mean: mean_std(&tails).0,
            rank: 0,
            loss_ratio_mean: (ratios.len() == seeds.len()).then(|| mean_std(&ratios).0),
        });
        csvs.push(paths);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].final_loss_mean.total_cmp(&rows[b].final_loss_mean));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(Comparison {
        rows,
        seeds: seeds.to_vec(),
        csvs,
    })
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "seeds: {}", seeds.join(","));
        let _ = writeln!(
            s,
            "{:<4}  {:<width$}  {:>24}  {:>14}  {:>12}",
            "rank", "config", "final loss (mean ± std)", "tail |g|", "final/init"
        );
        let mut order: Vec<&CompareRow> = self.rows.iter().collect();
        order.sort_by_key(|r| r.rank);
        for r in order {
            let loss = format!("{:.6e} ± {:.2e}", r.final_loss_mean, r.final_loss_std);
            let ratio = r.loss_ratio_mean.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                s,
                "{:<4}  {:<width$}  {:>24}  {:>14.6e}  {:>12}",
                r.rank, r.name, loss, r.tail_grad_norm_mean, ratio
            );
        }
        s
    }

    pub fn write(&self, out: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
        let txt = out.join("compare.txt");
        let csv_path = out.join("compare.csv");
        let io = |p: &Path, e: String| BenchError::Io {
            path: p.to_path_buf(),
            reason: e,
        };
        fs::write(&txt, self.to_text()).map_err(|e| io(&txt, e.to_string()))?;
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&csv_path)
            .map_err(|e| io(&csv_path, e.to_string()))?;
        let header = [
            "config",
            "runs",
            "final_loss_mean",
            "final_loss_std",
            "tail_grad_norm_mean",
            "loss_ratio_mean",
            "rank",
        ];
        w.write_record(header).map_err(|e| io(&csv_path, e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.runs.to_string(),
                format_real(r.final_loss_mean),
                format_real(r.final_loss_std),
                format_real(r.tail_grad_norm_mean),
                r.loss_ratio_mean.map(format_real).unwrap_or_default(),
                r.rank.to_string(),
            ])
            .map_err(|e| io(&csv_path, e.to_string()))?;
        }
        w.flush().map_err(|e| io(&csv_path, e.to_string()))?;
        Ok((txt, csv_path))
    }

    pub fn row(&self, name: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
