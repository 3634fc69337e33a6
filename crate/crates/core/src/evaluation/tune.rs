//! Grid sweeps over model parameters on a tuning split.

use serde::Serialize;

use crate::baselines::UsgWeights;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalSplit, Fingerprint};
use crate::ingest::{CheckInLog, UserIx};
use crate::pipeline::{Model, ModelSet};

/// Users with at least `min_checkins` check-ins.
pub fn tuning_population(log: &CheckInLog, min_checkins: usize) -> Vec<UserIx> {
    (0..log.n_users()).filter(|&u| log.history_len(u) >= min_checkins).collect()
}

/// `lo:hi:step` (inclusive, integer-stepped) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::config("grid", format!("`{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let mut values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:step"));
        }
        let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(bad("need step > 0 and hi >= lo"));
        }
        let steps = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
            .collect::<Vec<_>>()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.is_empty() {
        return Err(bad("empty grid"));
    }
    Ok(values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub params: Vec<String>,
    /// `(point, objective)`, points in ascending lexicographic order.
    pub curve: Vec<(Vec<f64>, f64)>,
    pub best: usize,
}

impl TuneResult {
    pub fn best_point(&self) -> &[f64] {
        &self.curve[self.best].0
    }

    pub fn best_objective(&self) -> f64 {
        self.curve[self.best].1
    }

    pub fn curve_csv(&self, fingerprint: &Fingerprint) -> String {
        let mut out = format!("# {}\n{},objective\n", fingerprint.line(), self.params.join(","));
        for (p, obj) in &self.curve {
            let cells: Vec<String> = p.iter().map(f64::to_string).collect();
            out.push_str(&format!("{},{}\n", cells.join(","), obj));
        }
        out
    }
}

/// Evaluates every grid point and returns the argmax; ties go to the
/// smallest point.
pub fn tune_sweep(
    params: &[&str],
    grid: &[Vec<f64>],
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty tuning grid"));
    }
    let mut points = grid.to_vec();
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points.dedup();
    let mut curve = Vec::with_capacity(points.len());
    let mut best = 0;
    for p in points {
        let obj = objective(&p)?;
        if obj > curve.get(best).map_or(f64::NEG_INFINITY, |c: &(Vec<f64>, f64)| c.1) {
            best = curve.len();
        }
        curve.push((p, obj));
    }
    Ok(TuneResult {
        params: params.iter().map(|s| s.to_string()).collect(),
        curve,
        best,
    })
}

/// Sweeps φ for MATI with F1@`n` as the objective.
pub fn phi_sweep(set: &ModelSet, split: &EvalSplit, grid: &[f64], n: usize) -> Result<TuneResult> {
    let points: Vec<Vec<f64>> = grid.iter().map(|&g| vec![g]).collect();
    tune_sweep(&["phi_t"], &points, |p| {
        let s = set.with_phi(p[0])?;
        let r = evaluate(&s, split, &[Model::Mati], &[n], Fingerprint::default())?;
        Ok(r.f1(Model::Mati, n).unwrap_or(0.0))
    })
}

/// Sweeps USG's (α, β) over the pairs of `grid` with α + β ≤ 1.
pub fn weights_sweep(set: &ModelSet, split: &EvalSplit, grid: &[f64], n: usize) -> Result<TuneResult> {
    let points: Vec<Vec<f64>> = grid
        .iter()
        .flat_map(|&a| grid.iter().map(move |&b| vec![a, b]))
        .filter(|p| p[0] + p[1] <= 1.0 + 1e-12)
        .collect();
    tune_sweep(&["alpha", "beta"], &points, |p| {
        let mut s = set.clone();
        s.cfg.baseline.weights = UsgWeights::new(p[0], p[1].min(1.0 - p[0]))?;
        let r = evaluate(&s, split, &[Model::Usg], &[n], Fingerprint::default())?;
        Ok(r.f1(Model::Usg, n).unwrap_or(0.0))
    })
}

/// Sweeps the hybrid's Ψ interval over `lows × highs` with `lo ≤ hi`.
pub fn psi_range_sweep(set: &ModelSet, split: &EvalSplit, lows: &[f64], highs: &[f64], n: usize) -> Result<TuneResult> {
    let points: Vec<Vec<f64>> = lows
        .iter()
        .flat_map(|&lo| highs.iter().map(move |&hi| vec![lo, hi]))
        .filter(|p| p[0] <= p[1])
        .collect();
    tune_sweep(&["psi_low", "psi_high"], &points, |p| {
        let mut s = set.clone();
        s.cfg.hybrid.psi_range = (p[0], p[1]);
        let r = evaluate(&s, split, &[Model::Hybrid], &[n], Fingerprint::default())?;
        Ok(r.f1(Model::Hybrid, n).unwrap_or(0.0))
    })
}
