//! Low-rank completion of partially observed symmetric similarity maps by
//! regularized alternating least squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slabs::similarity::SlotSimilarityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompletionConfig {
    pub rank: usize,
    pub reg: f64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            rank: 3,
            reg: 0.01,
            max_sweeps: 200,
            tol: 1e-8,
        }
    }
}

/// Solves the dense `r×r` system in place by Gaussian elimination with
/// partial pivoting. Near-singular pivots get a tiny diagonal jitter.
fn solve_small(mut a: Vec<f64>, mut b: Vec<f64>, r: usize) -> Vec<f64> {
    for col in 0..r {
        let pivot = (col..r)
            .max_by(|&i, &j| a[i * r + col].abs().total_cmp(&a[j * r + col].abs()))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..r {
                a.swap(col * r + k, pivot * r + k);
            }
            b.swap(col, pivot);
        }
        if a[col * r + col].abs() < 1e-300 {
            a[col * r + col] = 1e-12;
        }
        let d = a[col * r + col];
        for row in col + 1..r {
            let f = a[row * r + col] / d;
            if f != 0.0 {
                for k in col..r {
                    a[row * r + k] -= f * a[col * r + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; r];
    for row in (0..r).rev() {
        let mut s = b[row];
        for k in row + 1..r {
            s -= a[row * r + k] * x[k];
        }
        x[row] = s / a[row * r + row];
    }
    x
}

/// Refits the rows of `target` against fixed `other` over observed cells.
fn als_half_step(
    target: &mut [f64],
    other: &[f64],
    values: &[f64],
    observed: &[bool],
    n: usize,
    r: usize,
    reg: f64,
) {
    for i in 0..n {
        let mut gram = vec![0.0; r * r];
        let mut rhs = vec![0.0; r];
        for j in 0..n {
            if !observed[i * n + j] {
                continue;
            }
            let bj = &other[j * r..(j + 1) * r];
            for p in 0..r {
                rhs[p] += values[i * n + j] * bj[p];
                for q in 0..r {
                    gram[p * r + q] += bj[p] * bj[q];
                }
            }
        }
        for p in 0..r {
            gram[p * r + p] += reg;
        }
        let sol = solve_small(gram, rhs, r);
        target[i * r..(i + 1) * r].copy_from_slice(&sol);
    }
}

fn objective(a: &[f64], b: &[f64], values: &[f64], observed: &[bool], n: usize, r: usize, reg: f64) -> f64 {
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..n {
            if observed[i * n + j] {
                let pred: f64 = (0..r).map(|p| a[i * r + p] * b[j * r + p]).sum();
                loss += (values[i * n + j] - pred).powi(2);
            }
        }
    }
    let norm: f64 = a.iter().chain(b).map(|v| v * v).sum();
    loss + reg * norm
}

/// Fits `S ≈ A·Bᵀ` to the observed cells of a symmetric `n×n` matrix and
/// returns the symmetrized reconstruction `(A·Bᵀ + B·Aᵀ)/2`. The observed
/// mask must be symmetric.
pub fn complete_symmetric(
    values: &[f64],
    observed: &[bool],
    n: usize,
    cfg: &CompletionConfig,
) -> Result<Vec<f64>> {
    let r = cfg.rank;
    if r == 0 {
        return Err(Error::invalid("completion rank must be at least 1"));
    }
    let upper_observed = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .filter(|&(i, j)| observed[i * n + j])
        .count();
    let off_diagonal = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .any(|(i, j)| observed[i * n + j]);
    let dof = n * r - r * (r.saturating_sub(1)) / 2;
    if !off_diagonal || upper_observed < dof {
        return Err(Error::invalid(format!(
            "insufficient observations for rank {r}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x51ab_c0de);
    let mut a: Vec<f64> = (0..n * r).map(|_| rng.random_range(0.1..1.0)).collect();
    let mut b = a.clone();
    let mut prev = objective(&a, &b, values, observed, n, r, cfg.reg);
    for _ in 0..cfg.max_sweeps {
        als_half_step(&mut a, &b, values, observed, n, r, cfg.reg);
        als_half_step(&mut b, &a, values, observed, n, r, cfg.reg);
        let cur = objective(&a, &b, values, observed, n, r, cfg.reg);
        let done = (prev - cur).abs() <= cfg.tol * prev.abs().max(1e-300);
        prev = cur;
        if done {
            break;
        }
    }

    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let ab: f64 = (0..r).map(|p| a[i * r + p] * b[j * r + p]).sum();
            let ba: f64 = (0..r).map(|p| b[i * r + p] * a[j * r + p]).sum();
            out[i * n + j] = 0.5 * (ab + ba);
        }
    }
    Ok(out)
}

/// Imputes every unobserved cell from a rank-`cfg.rank` fit; observed cells
/// are kept as-is and imputed values are clamped to `[0, 1]`.
pub fn complete_matrix(
    m: &SlotSimilarityMatrix,
    cfg: &CompletionConfig,
) -> Result<SlotSimilarityMatrix> {
    let mut out = m.clone();
    if m.observed.iter().all(|&o| o) {
        return Ok(out);
    }
    let fit = complete_symmetric(&m.sim, &m.observed, m.n, cfg)?;
    for k in 0..m.n * m.n {
        if !m.observed[k] {
            out.sim[k] = fit[k].clamp(0.0, 1.0);
            out.imputed[k] = true;
        }
    }
    Ok(out)
}
