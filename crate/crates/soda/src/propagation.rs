//! Neighborhood score propagation, its closed-form fixed point, and the
//! combined two-component score.
//!
//! Each iteration replaces every score with a convex blend of the sample's
//! initial score (weight alpha) and the mean of its neighbors' scores from
//! the previous iteration. Updates are synchronous: iteration t reads only
//! iteration t-1, so the result is independent of node visitation order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::score::ScoreVector;

/// Every iterate s^(0)..s^(T) plus the max absolute change per step.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace {
    iterates: Vec<ScoreVector>,
    deltas: Vec<f64>,
}

impl PropagationTrace {
    pub fn iterates(&self) -> &[ScoreVector] {
        &self.iterates
    }

    pub fn last(&self) -> &ScoreVector {
        self.iterates.last().expect("trace holds at least s^(0)")
    }

    /// Max absolute change per iteration, length T.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn iteration_count(&self) -> usize {
        self.iterates.len() - 1
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn check_graph(s0: &ScoreVector, graph: &SimilarityGraph) -> Result<()> {
    if s0.len() != graph.n() {
        return Err(Error::LengthMismatch {
            left: s0.len(),
            right: graph.n(),
        });
    }
    for i in 0..graph.n() {
        if graph.neighbors(i).is_empty() {
            return Err(Error::EmptyNeighborhood { node: i });
        }
    }
    Ok(())
}

/// Runs `iters` synchronous propagation steps from `s0`.
///
/// alpha = 1 short-circuits to exact copies of s0: the update degenerates
/// to the identity and the copy keeps even signed zeros bit-identical.
pub fn propagate(
    s0: &ScoreVector,
    graph: &SimilarityGraph,
    alpha: f64,
    iters: usize,
) -> Result<PropagationTrace> {
    check_alpha(alpha)?;
    check_graph(s0, graph)?;
    let n = s0.len();
    let init = s0.values().to_vec();
    let mut iterates = vec![ScoreVector::new(init.clone(), 0)?];
    let mut deltas = Vec::with_capacity(iters);
    if alpha == 1.0 {
        for t in 1..=iters {
            iterates.push(ScoreVector::new(init.clone(), t)?);
            deltas.push(0.0);
        }
        return Ok(PropagationTrace { iterates, deltas });
    }
    let mut prev = init.clone();
    for t in 1..=iters {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let nbrs = graph.neighbors(i);
                let sum: f64 = nbrs.iter().map(|&j| prev[j]).sum();
                alpha * init[i] + (1.0 - alpha) * (sum / nbrs.len() as f64)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        deltas.push(delta);
        iterates.push(ScoreVector::new(next.clone(), t)?);
        prev = next;
    }
    Ok(PropagationTrace { iterates, deltas })
}

/// The unique fixed point of the propagation map, solved directly:
/// (I - (1-alpha) D^-1 A) s = alpha s0 via Gaussian elimination with
/// partial pivoting. The system matrix is strictly diagonally dominant
/// (margin alpha), so the solve cannot break down. O(N^3); intended for
/// verification, not the scoring path.
pub fn solve_fixed_point(s0: &ScoreVector, graph: &SimilarityGraph, alpha: f64) -> Result<ScoreVector> {
    check_alpha(alpha)?;
    check_graph(s0, graph)?;
    let n = s0.len();
    if alpha == 1.0 {
        return ScoreVector::new(s0.values().to_vec(), 0);
    }
    let mut a = vec![0.0f64; n * n];
    let mut b: Vec<f64> = s0.values().iter().map(|v| alpha * v).collect();
    for i in 0..n {
        let nbrs = graph.neighbors(i);
        let w = (1.0 - alpha) / nbrs.len() as f64;
        a[i * n + i] = 1.0;
        for &j in nbrs {
            a[i * n + j] -= w;
        }
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs()))
            .unwrap();
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in row + 1..n {
            sum -= a[row * n + k] * x[k];
        }
        x[row] = sum / a[row * n + row];
    }
    ScoreVector::new(x, 0)
}

/// Elementwise product of the final iterates of two traces that ran on
/// the same samples for the same number of iterations.
pub fn combine(text: &PropagationTrace, src: &PropagationTrace) -> Result<ScoreVector> {
    if text.iteration_count() != src.iteration_count() {
        return Err(Error::IterationMismatch {
            left: text.iteration_count(),
            right: src.iteration_count(),
        });
    }
    let t_last = text.last();
    let s_last = src.last();
    if t_last.len() != s_last.len() {
        return Err(Error::LengthMismatch {
            left: t_last.len(),
            right: s_last.len(),
        });
    }
    let values: Vec<f64> = t_last
        .values()
        .iter()
        .zip(s_last.values())
        .map(|(a, b)| a * b)
        .collect();
    ScoreVector::new(values, text.iteration_count())
}
