//! The percentile-thresholded similarity graph over test samples.
//!
//! The threshold is the nearest-rank percentile of the strict upper
//! triangle of the similarity matrix: the diagonal is all ones and each
//! pair appears twice in the full matrix, so including either would bias
//! the threshold upward. Every node keeps a self-loop, so degrees are
//! always positive.

use rayon::prelude::*;

use crate::embedding::SimilarityMatrix;
use crate::error::{Error, Result};

/// Symmetric adjacency with mandatory self-loops and the realized
/// threshold. Neighbor lists are sorted ascending and include the node
/// itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    epsilon: f32,
}

impl SimilarityGraph {
    /// Validates an externally assembled adjacency: sorted neighbor lists,
    /// self-loops present, indices in range, symmetric.
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>, epsilon: f32) -> Result<Self> {
        let n = neighbors.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (i, list) in neighbors.iter().enumerate() {
            if !list.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidFormat {
                    detail: format!("neighbor list of node {i} is not strictly sorted"),
                });
            }
            if list.last().is_some_and(|&j| j >= n) {
                return Err(Error::InvalidFormat {
                    detail: format!("node {i} has a neighbor out of range"),
                });
            }
            if list.binary_search(&i).is_err() {
                return Err(Error::InvalidFormat {
                    detail: format!("node {i} is missing its self-loop"),
                });
            }
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidFormat {
                        detail: format!("edge ({i}, {j}) has no mirror"),
                    });
                }
            }
        }
        Ok(SimilarityGraph {
            n,
            neighbors,
            epsilon,
        })
    }

    /// The degenerate graph used when only one sample exists and no
    /// percentile is defined; epsilon is +inf since no pair qualified.
    pub fn self_loops_only(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(SimilarityGraph {
            n,
            neighbors: (0..n).map(|i| vec![i]).collect(),
            epsilon: f32::INFINITY,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f32 {
        self.epsilon
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn edge_count(&self) -> usize {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, list)| list.iter().filter(|&&j| j > i).count())
            .sum()
    }

    /// Undirected edges (i, j) with i < j, self-loops excluded, in
    /// lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }
}

/// Nearest-rank percentile over the strict upper triangle: the element at
/// 1-based rank ceil((1-eta) * M) of the M = N(N-1)/2 sorted pair
/// similarities, with the rank clamped to [1, M]. A 1e-9 slack absorbs
/// floating-point noise when (1-eta) * M lands exactly on an integer.
pub fn percentile_threshold(sims: &SimilarityMatrix, eta: f64) -> Result<f32> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    let n = sims.n();
    if n < 2 {
        return Err(Error::TooFewSamples { n });
    }
    let mut values = sims.upper_triangle();
    let m = values.len();
    let rank = ((1.0 - eta) * m as f64 - 1e-9).ceil().max(1.0).min(m as f64) as usize;
    let (_, pivot, _) = values.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*pivot)
}

/// Connects pairs whose similarity reaches the percentile threshold
/// (ties included) and adds all self-loops. Symmetry is inherited from
/// the similarity matrix, which is exactly symmetric by construction.
pub fn build_graph(sims: &SimilarityMatrix, eta: f64) -> Result<SimilarityGraph> {
    let epsilon = percentile_threshold(sims, eta)?;
    let n = sims.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = sims.row(i);
            let mut list = Vec::new();
            for (j, &s) in row.iter().enumerate() {
                if j == i || s >= epsilon {
                    list.push(j);
                }
            }
            list
        })
        .collect();
    Ok(SimilarityGraph {
        n,
        neighbors,
        epsilon,
    })
}
