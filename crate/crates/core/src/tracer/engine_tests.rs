// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use super::*;
use crate::fixture::{planted_fixture, PlantedFixture, PlantedFixtureConfig};
use crate::knowledge::AnnotationCatalog;
use crate::linalg::Matrix;
use crate::model::{
    build_planted_model, forward_clean, CellBatch, PlantedEdge, PlantedSpec,
};
use crate::sae::SaeDictionary;

fn small_fixture(n_cells: usize) -> PlantedFixture {
    planted_fixture(&PlantedFixtureConfig { n_cells, ..PlantedFixtureConfig::default() }).unwrap()
}

fn config(layers: Vec<usize>, n_cells: usize, sources: usize) -> TraceConfig {
    TraceConfig { source_layers: layers, n_cells, sources_per_layer: sources, ..TraceConfig::default() }
}

fn completed(run: TraceRun) -> TraceOutput {
    match run {
        TraceRun::Completed(out) => out,
        TraceRun::Interrupted(_) => panic!("run was interrupted"),
    }
}

fn identity_sae(layer: usize, d: usize, k: usize) -> SaeDictionary {
    let mut sae = SaeDictionary::from_parts(0, k, Matrix::identity(d), vec![0.0; d], &Matrix::identity(d), vec![0.0; d])
        .unwrap();
    sae.layer = layer;
    sae
}

/// Single planted edge L0_F3 -> L1_F5 (w = 0.8), identity SAEs.
fn one_edge() -> (crate::model::LayeredModel, SaeSet, CellBatch) {
    let d = 8;
    let spec = PlantedSpec {
        bases: vec![Matrix::identity(d); 3],
        edges: vec![PlantedEdge { source: FeatureId::new(0, 3), target: FeatureId::new(1, 5), weight: 0.8 }],
        relay_directions: vec![],
        vocab: d + 1,
    };
    let model = build_planted_model(&spec, 3, d, 11).unwrap();
    let saes: SaeSet = (0..3).map(|l| identity_sae(l, d, 3)).collect();
    let batch = crate::model::generate_cells(4, 40, 6, d + 1, crate::model::CellKind::K562Like).unwrap();
    (model, saes, batch)
}

#[test]
fn single_edge_delta_matches_direct_recomputation() {
    let (model, saes, batch) = one_edge();
    let cfg = config(vec![0], 40, 1);
    let targets = trace_source_feature(&model, &saes, FeatureId::new(0, 3), &batch, &cfg).unwrap();
    assert_eq!(targets.iter().map(|t| t.layer).collect::<Vec<_>>(), [1, 2]);

    // Oracle: recompute each cell's delta from the clean states alone.
    let mut expected = Vec::new();
    for cell in &batch.cells {
        let clean = forward_clean(&model, cell).unwrap();
        let mut sum = 0.0f64;
        for p in (0..cell.tokens.len()).filter(|&p| !cell.padding[p]) {
            let h0 = clean[0].position(p);
            let h1 = clean[1].position(p);
            let z_src = saes.get(0).unwrap().encode(h0).get(3);
            let before = saes.get(1).unwrap().encode(h1).get(5);
            let mut ablated = h1.to_vec();
            ablated[3] -= z_src;
            ablated[5] -= 0.8 * z_src;
            let after = saes.get(1).unwrap().encode(&ablated).get(5);
            sum += (after - before) as f64;
        }
        expected.push(sum / cell.n_real() as f64);
    }
    let oracle = crate::stats::EdgeAccumulator::from_slice(&expected);
    let got = targets[0].accumulators[5];
    assert_eq!(got.n, oracle.n);
    assert!((got.mean - oracle.mean).abs() < 1e-6);
    assert!(got.mean < 0.0);
    assert!((got.m2 - oracle.m2).abs() < 1e-6 * (1.0 + oracle.m2));
}

#[test]
fn inactive_source_gives_zero_accumulators() {
    let (model, saes, mut batch) = one_edge();
    // No cell contains the token mapped to direction 3.
    let crate::model::ModelBody::Planted(p) = &model.body else { unreachable!() };
    let banned = p.token_directions.iter().position(|d| *d == Some(3)).unwrap() as u32;
    for cell in &mut batch.cells {
        for t in cell.tokens.iter_mut() {
            if *t == banned {
                *t = if banned == 1 { 2 } else { 1 };
            }
        }
    }
    let targets = trace_source_feature(&model, &saes, FeatureId::new(0, 3), &batch, &config(vec![0], 40, 1)).unwrap();
    for tb in &targets {
        for acc in &tb.accumulators {
            assert_eq!(acc.n, 40);
            assert_eq!((acc.mean, acc.m2), (0.0, 0.0));
        }
    }
}

#[test]
fn pass_counts_follow_sources_plus_one() {
    let fx = small_fixture(200);
    let cfg = config(vec![2], 200, 30);
    let out = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut ()).unwrap());
    let layer = &out.report.layers[0];
    assert_eq!(layer.n_sources, 30);
    assert_eq!(layer.passes_planned, 6_200);
    assert_eq!(layer.passes_completed, 6_200);
    assert_eq!(layer.skipped_cells, 0);
}

#[test]
fn zero_sources_gives_empty_table() {
    let fx = small_fixture(20);
    let cfg = config(vec![1], 20, 0);
    let out = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut ()).unwrap());
    assert!(out.edges.is_empty());
    assert_eq!(out.report.total_edges, 0);
    assert_eq!(out.report.layers[0].passes_planned, 20);
    assert_eq!(out.report.layers[0].passes_completed, 20);

    let none = config(vec![], 20, 30);
    let out = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &none, None, &mut ()).unwrap());
    assert!(out.edges.is_empty() && out.report.layers.is_empty());

    let empty = AnnotationCatalog::new();
    let out = completed(run_trace(&fx.model, &fx.saes, &empty, &fx.batch, &config(vec![0], 20, 5), None, &mut ()).unwrap());
    assert_eq!(out.report.layers[0].requested_sources, 5);
    assert_eq!(out.report.layers[0].n_sources, 0);
}

struct StopAfterFirst {
    saved: Option<TraceCheckpoint>,
}

impl TraceHooks for StopAfterFirst {
    fn on_checkpoint(&mut self, checkpoint: &TraceCheckpoint) -> ControlFlow<()> {
        self.saved = Some(checkpoint.clone());
        ControlFlow::Break(())
    }
}

#[test]
fn resume_matches_uninterrupted_run() {
    let fx = small_fixture(120);
    let cfg = TraceConfig { checkpoint_every: 50, ..config(vec![0, 3], 120, 4) };
    let full = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut ()).unwrap());

    let mut hooks = StopAfterFirst { saved: None };
    let run = run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut hooks).unwrap();
    let TraceRun::Interrupted(ckpt) = run else { panic!("expected an interruption") };
    assert_eq!(ckpt.state.cells_done, 50);
    let resumed = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, Some(ckpt), &mut ()).unwrap());
    assert_eq!(resumed.edges, full.edges);
    assert_eq!(resumed.state, full.state);
    assert!(!full.edges.is_empty());
}

#[test]
fn resume_rejects_foreign_checkpoint() {
    let fx = small_fixture(60);
    let cfg = config(vec![0], 60, 4);
    let mut hooks = StopAfterFirst { saved: None };
    let TraceRun::Interrupted(ckpt) =
        run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut hooks).unwrap()
    else {
        panic!("expected an interruption")
    };
    let other = TraceConfig { d_threshold: 0.6, ..cfg.clone() };
    let err = run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &other, Some(ckpt.clone()), &mut ());
    assert!(matches!(err, Err(crate::Error::CheckpointMismatch(_))));

    let mut tampered = ckpt;
    tampered.state.blocks.pop();
    let err = run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, Some(tampered), &mut ());
    assert!(matches!(err, Err(crate::Error::CheckpointMismatch(_))));
}

#[test]
fn chunked_merge_is_close_to_sequential() {
    let fx = small_fixture(90);
    let cfg = config(vec![1], 90, 5);
    let tracer = Tracer::new(&fx.model, &fx.saes, &fx.catalog, &fx.batch, cfg).unwrap();
    let mut seq = tracer.empty_state();
    tracer.process_until(&mut seq, 90, &|| None).unwrap();

    // Three workers over interleaved cells, merged in worker order.
    let mut merged = tracer.empty_state();
    for w in 0..3 {
        let mut part = tracer.empty_state();
        for i in (w..90).step_by(3) {
            tracer.process_cell(i, &mut part, &|| None).unwrap();
        }
        merged.merge_from(&part).unwrap();
    }
    assert_eq!(merged.cells_done, 90);
    for (a, b) in seq.blocks.iter().zip(&merged.blocks) {
        for (ta, tb) in a.targets.iter().zip(&b.targets) {
            for (x, y) in ta.accumulators.iter().zip(&tb.accumulators) {
                let (Ok(sx), Ok(sy)) = (x.finalize(), y.finalize()) else { panic!() };
                if sx.d.is_finite() {
                    assert!((sx.d - sy.d).abs() <= 1e-6 * sx.d.abs().max(1e-12), "{} vs {}", sx.d, sy.d);
                } else {
                    assert_eq!(sx.d, sy.d);
                }
                assert_eq!(sx.consistency, sy.consistency);
            }
        }
    }
}

#[test]
fn config_errors() {
    let fx = small_fixture(10);
    let last = config(vec![5], 10, 3);
    assert!(matches!(
        run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &last, None, &mut ()),
        Err(crate::Error::Config(_))
    ));
    let too_many_cells = config(vec![0], 11, 3);
    assert!(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &too_many_cells, None, &mut ()).is_err());
}

#[test]
fn planted_recovery() {
    let fx = small_fixture(200);
    let cfg = config((0..5).collect(), 200, 30);
    let out = completed(run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut ()).unwrap());
    let found = |e: &crate::model::PlantedEdge| out.edges.iter().find(|x| x.source == e.source && x.target == e.target);
    let recovered: Vec<_> = fx.spec.edges.iter().filter_map(found).collect();
    let recall = recovered.len() as f64 / fx.spec.edges.len() as f64;
    assert!(recall >= 0.9, "recall {recall}");
    assert!(recovered.iter().all(|e| e.d < 0.0));

    let (mut null, mut false_pos) = (0usize, 0usize);
    for block in &out.state.blocks {
        for tb in &block.targets {
            for j in 0..tb.accumulators.len() {
                let target = FeatureId::new(tb.layer, j);
                if fx.coupling(block.source, target).abs() < 1e-6 {
                    null += 1;
                    if out.edges.iter().any(|e| e.source == block.source && e.target == target) {
                        false_pos += 1;
                    }
                }
            }
        }
    }
    let rate = false_pos as f64 / null as f64;
    std::println!("recall {recall:.3} null pairs {null} false {false_pos} rate {rate:.4} edges {}", out.edges.len());
    assert!(null > 1000);
    assert!(rate < 0.01, "false-positive rate {rate}");
}


