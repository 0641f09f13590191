use serde::Serialize;

use crate::error::{Error, Result};

use super::experiment::TableRow;

/// Which checkpoints enter the log-log fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailWindow {
    /// `t >= t_max / 10^k`.
    Decades(f64),
    /// The last fraction `f` of the `log t` range: `t >= t_min^f t_max^(1-f)`.
    Fraction(f64),
}

impl Default for TailWindow {
    fn default() -> Self {
        TailWindow::Decades(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub window: (u64, u64),
    pub n_points: usize,
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, stderr_slope)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if points.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}

/// Fits `log(mean_sq_dist) = intercept + slope log(t)` over the tail window.
pub fn fit_rate(rows: &[TableRow], window: TailWindow) -> Result<RateEstimate> {
    let (t_min, t_max) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a.t as f64, b.t as f64),
        _ => return Err(Error::contract("rate fit needs a nonempty table")),
    };
    let lo = match window {
        TailWindow::Decades(k) if k > 0.0 => t_max / 10f64.powf(k),
        TailWindow::Fraction(f) if f > 0.0 && f <= 1.0 => t_min.powf(f) * t_max.powf(1.0 - f),
        other => return Err(Error::contract(format!("invalid tail window {other:?}"))),
    };
    // Relative slack so that e.g. t = 10^4 is kept when t_max / 10 rounds low.
    let lo = lo * (1.0 - 1e-12);
    let tail: Vec<&TableRow> = rows.iter().filter(|r| r.t as f64 >= lo).collect();
    if tail.len() < 3 {
        return Err(Error::contract(format!(
            "rate fit needs >= 3 checkpoints in the window, got {}",
            tail.len()
        )));
    }
    if let Some(r) = tail.iter().find(|r| !(r.mean_sq_dist > 0.0)) {
        return Err(Error::contract(format!(
            "mean squared distance {} at t = {} is not positive; distances underflowed, rerun with a larger game scale",
            r.mean_sq_dist, r.t
        )));
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|r| ((r.t as f64).ln(), r.mean_sq_dist.ln()))
        .collect();
    let (slope, intercept, stderr_slope) = fit_loglog(&pts);
    Ok(RateEstimate {
        slope,
        intercept,
        stderr_slope,
        window: (tail[0].t, tail[tail.len() - 1].t),
        n_points: tail.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::checkpoint_times;

    fn table(f: impl Fn(f64) -> f64) -> Vec<TableRow> {
        checkpoint_times(100_000, 64)
            .into_iter()
            .map(|t| TableRow {
                t,
                mean_sq_dist: f(t as f64),
                stderr: 0.0,
                sigma: 0.0,
                rho: 0.0,
                gamma: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let r = fit_rate(&table(|t| 7.0 / t), TailWindow::default()).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12, "{r:?}");
        assert!((r.intercept - 7f64.ln()).abs() < 1e-10);
        assert!(r.window.0 >= 10_000 && r.window.0 < 12_000, "{r:?}");
        assert_eq!(r.window.1, 100_000);
        let r = fit_rate(&table(|t| 3.0 / t.sqrt()), TailWindow::default()).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        let r = fit_rate(&table(|t| 3.0 / t.sqrt()), TailWindow::Fraction(1.0)).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        assert_eq!(r.window.0, 1);
    }

    #[test]
    fn rejects_non_positive_and_short_tables() {
        let mut rows = table(|t| 1.0 / t);
        rows.last_mut().unwrap().mean_sq_dist = 0.0;
        assert!(fit_rate(&rows, TailWindow::default()).is_err());
        let rows = table(|t| 1.0 / t);
        assert!(fit_rate(&rows[..2], TailWindow::Fraction(1.0)).is_err());
        assert!(fit_rate(&[], TailWindow::default()).is_err());
    }
}
