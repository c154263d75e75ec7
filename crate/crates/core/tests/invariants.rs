// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use circuitscope_core::graph::{CircuitGraph, Condition};
use circuitscope_core::knowledge::{build_known_graph, AnnotationCatalog, Ontology};
use circuitscope_core::model::{build_toy_transformer, forward_clean, forward_from, generate_cells, CellKind, PlantedSpec};
use circuitscope_core::sae::{synthesize_sae, SynthMode};
use circuitscope_core::stats::{fisher_exact, mann_whitney, spearman, EdgeAccumulator, EdgeStats, Table2x2};
use circuitscope_core::tracer::{CausalEdge, EdgeSign, TraceConfig};
use circuitscope_core::validate::{
    extract_gene_pairs, filter_predictions, sign_accuracy, PerturbationRow, PerturbationTable, FILTER_MAX_ABS_D,
    FILTER_MIN_EDGES,
};
use circuitscope_core::FeatureId;
use proptest::prelude::*;

fn edge(s: (usize, usize), t: (usize, usize), d: f64) -> CausalEdge {
    CausalEdge {
        source: FeatureId::new(s.0, s.1),
        target: FeatureId::new(t.0, t.1),
        d,
        consistency: 0.9,
        n: 10,
        sign: if d < 0.0 { EdgeSign::Inhibitory } else { EdgeSign::Excitatory },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accumulator_counts_and_m2(xs in prop::collection::vec(prop_oneof![Just(0.0), -1e6..1e6f64], 0..200)) {
        let acc = EdgeAccumulator::from_slice(&xs);
        prop_assert_eq!(acc.n, acc.pos + acc.neg + acc.zero);
        prop_assert!(acc.m2 >= 0.0 && acc.m2.is_finite() && acc.mean.is_finite());
    }

    #[test]
    fn p_values_lie_in_unit_interval(
        t in (0u64..60, 0u64..60, 0u64..60, 0u64..60),
        xs in prop::collection::vec(-10.0..10.0f64, 1..30),
        ys in prop::collection::vec(-10.0..10.0f64, 1..30),
    ) {
        let f = fisher_exact(&Table2x2 { a: t.0, b: t.1, c: t.2, d: t.3 });
        prop_assert!((0.0..=1.0).contains(&f.p_value));
        let m = mann_whitney(&xs, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.p_value));
        let n = xs.len().min(ys.len());
        if let Ok(s) = spearman(&xs[..n], &ys[..n]) {
            prop_assert!((0.0..=1.0).contains(&s.p_value));
            prop_assert!((-1.0..=1.0).contains(&s.statistic));
        }
    }

    #[test]
    fn significance_is_strict(d in -3.0..3.0f64, c in 0.0..1.0f64) {
        let cfg = TraceConfig::default();
        let got = cfg.classify(&EdgeStats { d, consistency: c, n: 10 });
        prop_assert_eq!(got.is_some(), d.abs() > cfg.d_threshold && c > cfg.consistency_threshold);
        let at_d = EdgeStats { d: cfg.d_threshold.copysign(d), consistency: 0.99, n: 10 };
        let at_c = EdgeStats { d: 2.0, consistency: cfg.consistency_threshold, n: 10 };
        prop_assert!(cfg.classify(&at_d).is_none());
        prop_assert!(cfg.classify(&at_c).is_none());
    }

    #[test]
    fn sparse_codes_are_well_formed(seed in 0u64..1000, k in 1usize..16, h in prop::collection::vec(-3.0..3.0f32, 16)) {
        let sae = synthesize_sae(seed, 0, 16, 48, k, SynthMode::Random).unwrap();
        let code = sae.encode(&h);
        prop_assert!(sae.check_code(&code).is_ok());
        prop_assert!(code.nnz() <= k);
        prop_assert!(code.values.iter().all(|v| *v > 0.0));
        prop_assert!(sae.decoder_norm_error() < 1e-5);
    }

    #[test]
    fn planted_spec_shape(seed in 0u64..500, n_edges in 1usize..40) {
        let spec = PlantedSpec::random_adjacent(seed, 5, 24, n_edges, (0.5, 2.0), 25, None).unwrap();
        for e in &spec.edges {
            prop_assert!(e.source.layer < e.target.layer);
            prop_assert!(e.weight.abs() > 0.0);
        }
        for b in &spec.bases {
            for i in 0..b.cols {
                for j in 0..b.cols {
                    let dot: f32 = b.column(i).iter().zip(b.column(j)).map(|(x, y)| x * y).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn replay_reproduces_clean_trajectory(seed in 0u64..1000) {
        let model = build_toy_transformer(seed, 4, 16, 4, 20, 10).unwrap();
        let batch = generate_cells(seed, 2, 10, 20, CellKind::K562Like).unwrap();
        for cell in &batch.cells {
            let clean = forward_clean(&model, cell).unwrap();
            for l in 0..clean.len() {
                let replay = forward_from(&model, &clean[l], &cell.padding).unwrap();
                prop_assert_eq!(&replay[..], &clean[l + 1..]);
            }
        }
    }

    #[test]
    fn union_keeps_one_edge_per_pair_with_largest_effect(
        ds in prop::collection::vec((0usize..3, 0usize..3, -4.0..4.0f64), 1..60),
    ) {
        let edges: Vec<_> = ds.iter().map(|&(s, t, d)| edge((0, s), (1, t), d)).collect();
        let g = CircuitGraph::from_edges(Condition::new("m", "s", "c"), edges.iter().copied());
        let mut best: BTreeMap<(FeatureId, FeatureId), f64> = BTreeMap::new();
        for e in &edges {
            let b = best.entry((e.source, e.target)).or_insert(0.0);
            *b = b.max(e.d.abs());
        }
        prop_assert_eq!(g.len(), best.len());
        for e in g.edges() {
            prop_assert_eq!(e.d.abs(), best[&(e.source, e.target)]);
            prop_assert!(g.nodes().contains(&e.source) && g.nodes().contains(&e.target));
        }
    }

    #[test]
    fn known_graph_is_symmetric(sets in prop::collection::vec(prop::collection::btree_set(0u8..20, 0..10), 1..8)) {
        let domain_genes: BTreeMap<String, Vec<String>> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("D{i}"), s.iter().map(|g| format!("G{g}")).collect()))
            .collect();
        let known = build_known_graph(&domain_genes);
        for (a, ga) in &domain_genes {
            for (b, gb) in &domain_genes {
                let shared = ga.iter().filter(|g| gb.contains(g)).count();
                prop_assert_eq!(known.linked(a, b), known.linked(b, a));
                prop_assert_eq!(known.linked(a, b), shared >= 3);
            }
        }
    }

    #[test]
    fn gene_pair_filter_and_sign_accuracy(
        ds in prop::collection::vec((0usize..4, 0usize..4, prop_oneof![-3.0..-0.5f64, 0.5..3.0f64]), 1..30),
        lfcs in prop::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], 36),
    ) {
        let mut catalog = AnnotationCatalog::new();
        for l in 0..2 {
            for i in 0..4 {
                let f = FeatureId::new(l, i);
                catalog.add_annotation(f, Ontology::GoBp, "x", 1e-3).unwrap();
                let genes = (0..3).map(|r| (r + 1, format!("G{}", (i + r + 3 * l) % 6))).collect();
                catalog.set_genes(f, genes).unwrap();
            }
        }
        let mut g = CircuitGraph::new(Condition::new("m", "s", "c"));
        ds.iter().for_each(|&(s, t, d)| g.insert(edge((0, s), (1, t), d)));
        let raw = extract_gene_pairs(g.edges(), &catalog, 10);
        let preds = filter_predictions(&raw);
        prop_assert!(preds.len() <= raw.len());
        for p in &preds {
            let r = &raw[&(p.source_gene.clone(), p.target_gene.clone())];
            prop_assert!(r.supporting_edges >= FILTER_MIN_EDGES || r.max_abs_d > FILTER_MAX_ABS_D);
            prop_assert!(p.weight > 0.0);
            if p.mean_d != 0.0 {
                prop_assert_eq!(p.predicted_sign, if p.mean_d > 0.0 { 1 } else { -1 });
            }
        }
        for ((s, t), r) in &raw {
            let kept = r.supporting_edges >= FILTER_MIN_EDGES || r.max_abs_d > FILTER_MAX_ABS_D;
            prop_assert_eq!(kept, preds.iter().any(|p| &p.source_gene == s && &p.target_gene == t));
        }

        let rows = (0..36).map(|i| PerturbationRow {
            perturbed_gene: format!("G{}", i / 6),
            response_gene: format!("G{}", i % 6),
            lfc: lfcs[i],
        });
        let table = PerturbationTable::new(rows).unwrap();
        if let Ok(acc) = sign_accuracy(&preds, &table) {
            prop_assert_eq!(acc.evaluated + acc.excluded_zero, acc.overlapping);
            prop_assert!(acc.concordant <= acc.evaluated);
            if let Some(a) = acc.accuracy {
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
