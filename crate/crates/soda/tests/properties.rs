//! Randomized invariants for the scoring pipeline: similarity geometry,
//! graph construction against a brute-force reference, propagation bounds,
//! and metric identities.

use proptest::prelude::*;

use soda::graph::{build_graph, SimilarityGraph};
use soda::metrics::{auc, fpr_at_recall};
use soda::propagation::{propagate, solve_fixed_point};
use soda::scoring::{build_prototypes, mls_score, msp_score, text_score, PromptEmbeddingGroups};
use soda::{cosine_sim, pairwise_similarity, EmbeddingMatrix, ScoreVector};

fn row(d: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, d..=d).prop_filter("row norm above threshold", |r| {
        r.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt() > 1e-3
    })
}

fn matrix(n_range: std::ops::RangeInclusive<usize>, max_d: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    (n_range, 2..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(row(d), n..=n)
            .prop_map(|rows| EmbeddingMatrix::from_rows(&rows).unwrap())
    })
}

fn scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n..=n)
}

/// Test matrix plus one-row-per-class prompt matrix sharing a dimension.
fn test_with_prompts() -> impl Strategy<Value = (EmbeddingMatrix, EmbeddingMatrix)> {
    (2..=6usize)
        .prop_flat_map(|d| {
            (
                (1..=10usize).prop_flat_map(move |n| prop::collection::vec(row(d), n..=n)),
                (2..=5usize).prop_flat_map(move |n| prop::collection::vec(row(d), n..=n)),
            )
        })
        .prop_map(|(a, b)| {
            (
                EmbeddingMatrix::from_rows(&a).unwrap(),
                EmbeddingMatrix::from_rows(&b).unwrap(),
            )
        })
}

/// Quarter-integer score grid: values far enough apart that strictly
/// increasing f64 transforms cannot collapse distinct entries.
fn lattice_scores_with_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=60usize)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..=64, n..=n),
                prop::collection::vec(any::<bool>(), n..=n),
            )
        })
        .prop_filter("both label kinds present", |(_, l)| {
            l.iter().any(|&b| b) && l.iter().any(|&b| !b)
        })
        .prop_map(|(ks, labels)| {
            let vals = ks.iter().map(|&k| f64::from(k) * 0.25 - 8.0).collect();
            (vals, labels)
        })
}

fn brute_force_graph(sims: &soda::SimilarityMatrix, eta: f64) -> (f32, Vec<Vec<usize>>) {
    let n = sims.n();
    let mut upper: Vec<f32> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            upper.push(sims.get(i, j));
        }
    }
    upper.sort_by(f32::total_cmp);
    let m = upper.len();
    let rank = (((1.0 - eta) * m as f64 - 1e-9).ceil().max(1.0)).min(m as f64) as usize;
    let eps = upper[rank - 1];
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j || sims.get(i, j) >= eps {
                neighbors[i].push(j);
            }
        }
    }
    (eps, neighbors)
}

proptest! {
    #[test]
    fn cosine_is_symmetric_and_bounded(a in row(8), b in row(8)) {
        let ab = cosine_sim(&a, &b).unwrap();
        let ba = cosine_sim(&b, &a).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn cosine_ignores_positive_scale(a in row(8), b in row(8), c in 0.1f32..10.0) {
        let scaled: Vec<f32> = b.iter().map(|v| v * c).collect();
        let want = cosine_sim(&a, &b).unwrap();
        let got = cosine_sim(&a, &scaled).unwrap();
        prop_assert!((want - got).abs() < 1e-6, "{want} vs {got}");
    }

    #[test]
    fn normalization_is_bitwise_idempotent(m in matrix(1..=12, 10)) {
        let once = m.normalize_rows().unwrap();
        let twice = once.normalize_rows().unwrap();
        prop_assert_eq!(once.data().len(), twice.data().len());
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn similarity_matrix_is_symmetric_with_unit_diagonal(m in matrix(2..=12, 10)) {
        let sims = pairwise_similarity(&m).unwrap();
        let n = sims.n();
        for i in 0..n {
            prop_assert_eq!(sims.get(i, i), 1.0f32);
            for j in 0..n {
                prop_assert_eq!(sims.get(i, j).to_bits(), sims.get(j, i).to_bits());
                prop_assert!((-1.0..=1.0).contains(&sims.get(i, j)));
            }
        }
    }

    #[test]
    fn graph_matches_brute_force_reference(m in matrix(2..=16, 8), eta in 0.01f64..0.6) {
        let sims = pairwise_similarity(&m).unwrap();
        let graph = build_graph(&sims, eta).unwrap();
        let (eps, neighbors) = brute_force_graph(&sims, eta);
        prop_assert_eq!(graph.epsilon().to_bits(), eps.to_bits());
        for i in 0..sims.n() {
            prop_assert_eq!(graph.neighbors(i), &neighbors[i][..]);
        }
    }

    #[test]
    fn graph_grows_with_eta(m in matrix(3..=14, 8), lo in 0.01f64..0.3, hi in 0.3f64..0.9) {
        let sims = pairwise_similarity(&m).unwrap();
        let sparse = build_graph(&sims, lo).unwrap();
        let dense = build_graph(&sims, hi).unwrap();
        prop_assert!(sparse.edge_count() <= dense.edge_count());
        for (i, j) in sparse.edges() {
            prop_assert!(dense.contains_edge(i, j), "edge ({i},{j}) lost at larger eta");
        }
    }

    #[test]
    fn propagation_stays_in_initial_range(
        m in matrix(2..=14, 8),
        alpha in 0.05f64..1.0,
        iters in 0usize..12,
    ) {
        let n = m.n();
        let s0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let sims = pairwise_similarity(&m).unwrap();
        let graph = build_graph(&sims, 0.2).unwrap();
        let init = ScoreVector::new(s0.clone(), 0).unwrap();
        let trace = propagate(&init, &graph, alpha, iters).unwrap();
        let lo = s0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for it in trace.iterates() {
            for &v in it.values() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn propagation_commutes_with_affine_maps(
        m in matrix(2..=10, 6),
        a in -2.0f64..2.0,
        c in -1.0f64..1.0,
        alpha in 0.1f64..1.0,
    ) {
        let n = m.n();
        let sims = pairwise_similarity(&m).unwrap();
        let graph = build_graph(&sims, 0.25).unwrap();
        let s0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos()).collect();
        let mapped: Vec<f64> = s0.iter().map(|v| a * v + c).collect();
        let base = propagate(&ScoreVector::new(s0, 0).unwrap(), &graph, alpha, 6).unwrap();
        let shifted = propagate(&ScoreVector::new(mapped, 0).unwrap(), &graph, alpha, 6).unwrap();
        for (x, y) in base.last().values().iter().zip(shifted.last().values()) {
            prop_assert!((a * x + c - y).abs() < 1e-9, "affine mismatch {x} {y}");
        }
    }

    #[test]
    fn propagation_is_permutation_equivariant(
        m in matrix(3..=10, 6),
        alpha in 0.1f64..1.0,
        rot in 1usize..7,
    ) {
        let n = m.n();
        let sims = pairwise_similarity(&m).unwrap();
        let graph = build_graph(&sims, 0.3).unwrap();
        // Cyclic relabeling i -> (i + rot) mod n.
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let mut permuted_neighbors = vec![Vec::new(); n];
        for i in 0..n {
            let mut nb: Vec<usize> = graph.neighbors(i).iter().map(|&j| perm[j]).collect();
            nb.sort_unstable();
            permuted_neighbors[perm[i]] = nb;
        }
        let permuted_graph = SimilarityGraph::from_neighbors(permuted_neighbors, graph.epsilon()).unwrap();

        let s0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.29).sin()).collect();
        let mut s0_perm = vec![0.0; n];
        for i in 0..n {
            s0_perm[perm[i]] = s0[i];
        }
        let base = propagate(&ScoreVector::new(s0, 0).unwrap(), &graph, alpha, 5).unwrap();
        let moved = propagate(&ScoreVector::new(s0_perm, 0).unwrap(), &permuted_graph, alpha, 5).unwrap();
        for i in 0..n {
            let x = base.last().values()[i];
            let y = moved.last().values()[perm[i]];
            prop_assert!((x - y).abs() < 1e-12, "node {i}: {x} vs {y}");
        }
    }

    #[test]
    fn propagation_contracts_toward_the_fixed_point(
        m in matrix(2..=12, 6),
        alpha in 0.1f64..0.95,
        s0 in scores(12),
    ) {
        let n = m.n();
        let sims = pairwise_similarity(&m).unwrap();
        let graph = build_graph(&sims, 0.2).unwrap();
        let init = ScoreVector::new(s0[..n].to_vec(), 0).unwrap();
        let star = solve_fixed_point(&init, &graph, alpha).unwrap();
        let trace = propagate(&init, &graph, alpha, 8).unwrap();
        let mut bound = init.max_abs_diff(&star).unwrap();
        for it in trace.iterates().iter().skip(1) {
            bound *= 1.0 - alpha;
            let gap = it.max_abs_diff(&star).unwrap();
            prop_assert!(gap <= bound + 1e-9, "gap {gap} above bound {bound}");
        }
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms((vals, labels) in lattice_scores_with_labels()) {
        let base = auc(&vals, &labels).unwrap();
        let exp: Vec<f64> = vals.iter().map(|v| v.exp()).collect();
        let affine: Vec<f64> = vals.iter().map(|v| 2.0 * v + 3.0).collect();
        prop_assert_eq!(base.to_bits(), auc(&exp, &labels).unwrap().to_bits());
        prop_assert_eq!(base.to_bits(), auc(&affine, &labels).unwrap().to_bits());
    }

    #[test]
    fn auc_of_negated_scores_complements((_vals, labels) in lattice_scores_with_labels()) {
        // A strictly increasing ramp: tie-free by construction.
        let distinct: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        let forward = auc(&distinct, &labels).unwrap();
        let neg: Vec<f64> = distinct.iter().map(|v| -v).collect();
        let backward = auc(&neg, &labels).unwrap();
        prop_assert_eq!((forward + backward).to_bits(), 1.0f64.to_bits());
    }

    #[test]
    fn fpr_grows_with_recall((vals, labels) in lattice_scores_with_labels(), r1 in 0.05f64..1.0, r2 in 0.05f64..1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let f_lo = fpr_at_recall(&vals, &labels, lo).unwrap();
        let f_hi = fpr_at_recall(&vals, &labels, hi).unwrap();
        prop_assert!(f_lo <= f_hi, "fpr({lo})={f_lo} > fpr({hi})={f_hi}");
    }

    #[test]
    fn max_logit_is_exactly_the_text_score((test, protos_src) in test_with_prompts()) {
        let names: Vec<String> = (0..protos_src.n()).map(|c| format!("c{c}")).collect();
        let class_index: Vec<usize> = (0..protos_src.n()).collect();
        let groups = PromptEmbeddingGroups::new(protos_src, class_index, names).unwrap();
        let protos = build_prototypes(&groups).unwrap();
        let a = text_score(&test, &protos).unwrap();
        let b = mls_score(&test, &protos).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn softmax_flattens_at_high_temperature((test, protos_src) in test_with_prompts()) {
        let names: Vec<String> = (0..protos_src.n()).map(|c| format!("c{c}")).collect();
        let class_index: Vec<usize> = (0..protos_src.n()).collect();
        let n_classes = names.len() as f64;
        let groups = PromptEmbeddingGroups::new(protos_src, class_index, names).unwrap();
        let protos = build_prototypes(&groups).unwrap();
        let msp = msp_score(&test, &protos, 1e9).unwrap();
        for &v in msp.values() {
            prop_assert!((v - 1.0 / n_classes).abs() < 1e-6, "{v} far from uniform");
        }
    }

    #[test]
    fn embedding_files_round_trip_bitwise(m in matrix(1..=10, 10)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb");
        soda::io::save_embeddings(&path, &m).unwrap();
        let back = soda::io::load_embeddings(&path).unwrap();
        prop_assert_eq!(back.n(), m.n());
        prop_assert_eq!(back.d(), m.d());
        for (a, b) in back.data().iter().zip(m.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn score_files_are_stable_after_one_round_trip(s in scores(6), d in scores(6)) {
        let table = soda::io::ScoreTable {
            s_text: s.clone(),
            d_src: Some(d),
            score_initial: s.iter().map(|v| v * 0.5).collect(),
            score_final: s,
        };
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.csv");
        let second = dir.path().join("b.csv");
        soda::io::save_scores(&first, &table).unwrap();
        let loaded = soda::io::load_scores(&first).unwrap();
        soda::io::save_scores(&second, &loaded).unwrap();
        let a = std::fs::read(&first).unwrap();
        let b = std::fs::read(&second).unwrap();
        prop_assert_eq!(a, b);
    }
}
