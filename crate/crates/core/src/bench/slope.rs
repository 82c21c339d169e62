use std::path::Path;

use thiserror::Error;

pub const DEFAULT_BURN_IN: f64 = 0.1;
pub const MIN_FIT_ROWS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlopeError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("non-finite or missing value in `{column}` at step {step}")]
    NonFinite { column: String, step: u64 },
    #[error("only {got} rows after burn-in; need at least {need}")]
    InsufficientRows { got: usize, need: usize },
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BadBurnIn(f64),
}

/// Least-squares slope of `log(running mean of y)` against `log t`.
///
/// `points` are `(t, y)` with `t ≥ 1` in increasing order; the running mean
/// starts at the first point. Rows with `t ≤ burn_in·t_max` are excluded from
/// the fit but still enter the running mean.
pub fn fit_points(points: &[(u64, f64)], burn_in: f64) -> Result<f64, SlopeError> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(SlopeError::BadBurnIn(burn_in));
    }
    let t_max = points.last().map_or(0, |p| p.0) as f64;
    let cutoff = burn_in * t_max;
    let mut sum = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(t, y)) in points.iter().enumerate() {
        sum += y;
        let avg = sum / (i + 1) as f64;
        if (t as f64) > cutoff {
            xs.push((t as f64).ln());
            ys.push(avg.ln());
        }
    }
    if xs.len() < MIN_FIT_ROWS {
        return Err(SlopeError::InsufficientRows {
            got: xs.len(),
            need: MIN_FIT_ROWS,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Reads `(step, column)` pairs for `step ≥ 1` from a run CSV.
pub fn read_column(csv_path: &Path, column: &str) -> Result<Vec<(u64, f64)>, SlopeError> {
    let read_err = |e: csv::Error| SlopeError::Read {
        path: csv_path.display().to_string(),
        reason: e.to_string(),
    };
    let mut rdr = csv::Reader::from_path(csv_path).map_err(read_err)?;
    let headers = rdr.headers().map_err(read_err)?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| SlopeError::MissingColumn(column.to_string()))?;
    let step_col = headers
        .iter()
        .position(|h| h == "step")
        .ok_or_else(|| SlopeError::MissingColumn("step".into()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(read_err)?;
        let step: u64 = rec
            .get(step_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| SlopeError::Read {
                path: csv_path.display().to_string(),
                reason: format!("bad step field in {:?}", rec.position()),
            })?;
        if step == 0 {
            continue;
        }
        let v = rec.get(col).and_then(|s| s.parse::<f64>().ok());
        match v {
            Some(v) if v.is_finite() => out.push((step, v)),
            _ => {
                return Err(SlopeError::NonFinite {
                    column: column.to_string(),
                    step,
                })
            }
        }
    }
    Ok(out)
}

pub fn fit_slope(csv_path: &Path, column: &str, burn_in: f64) -> Result<f64, SlopeError> {
    let points = read_column(csv_path, column)?;
    let slope = fit_points(&points, burn_in)?;
    if !slope.is_finite() {
        return Err(SlopeError::NonFinite {
            column: column.to_string(),
            step: points.last().map_or(0, |p| p.0),
        });
    }
    Ok(slope)
}
