// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ops::ControlFlow;
use std::path::Path;

use circuitscope::checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
use circuitscope::config::RunConfig;
use circuitscope::edges::EdgeTable;
use circuitscope::error::{Error, EXIT_CONFIG};
use circuitscope::tables::{read_catalog, read_cells, write_catalog, write_json};
use circuitscope::tensor::{read_model, read_sae, write_model, write_sae};
use circuitscope_core::fixture::{planted_fixture, PlantedFixtureConfig};
use circuitscope_core::model::{build_toy_transformer, forward_clean};
use circuitscope_core::tracer::{hash_batch, hash_model, hash_sae, run_trace, CausalEdge, EdgeSign, TraceCheckpoint, TraceConfig, TraceHooks, TraceRun};
use circuitscope_core::FeatureId;
use proptest::prelude::*;

fn small() -> PlantedFixtureConfig {
    PlantedFixtureConfig { n_cells: 60, ..PlantedFixtureConfig::default() }
}

#[test]
fn planted_model_sae_and_cells_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = planted_fixture(&small()).unwrap();
    let mp = dir.path().join("model.json");
    write_model(&mp, &fx.model).unwrap();
    let model = read_model(&mp).unwrap();
    assert_eq!(hash_model(&model), hash_model(&fx.model));

    for sae in fx.saes.iter() {
        let p = dir.path().join(format!("sae_L{}.json", sae.layer));
        write_sae(&p, sae).unwrap();
        let back = read_sae(&p).unwrap();
        assert_eq!(hash_sae(&back), hash_sae(sae));
        assert_eq!(&back, sae);
    }

    let cp = dir.path().join("cells.json");
    write_json(&cp, &fx.batch).unwrap();
    let cells = read_cells(&cp).unwrap();
    assert_eq!(hash_batch(&cells, cells.len()), hash_batch(&fx.batch, fx.batch.len()));

    let (a, g) = (dir.path().join("a.tsv"), dir.path().join("g.tsv"));
    write_catalog(&a, &g, &fx.catalog, 7).unwrap();
    assert_eq!(read_catalog(&a, Some(&g)).unwrap(), fx.catalog);
}

#[test]
fn toy_transformer_round_trip_preserves_forward_pass() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_toy_transformer(7, 6, 32, 4, 65, 48).unwrap();
    let p = dir.path().join("toy.json");
    write_model(&p, &model).unwrap();
    let back = read_model(&p).unwrap();
    assert_eq!(hash_model(&back), hash_model(&model));
    let fx = planted_fixture(&small()).unwrap();
    let cell = &fx.batch.cells[0];
    assert_eq!(forward_clean(&back, cell).unwrap(), forward_clean(&model, cell).unwrap());
}

#[test]
fn corrupt_model_blob_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let fx = planted_fixture(&small()).unwrap();
    let mp = dir.path().join("model.json");
    write_model(&mp, &fx.model).unwrap();
    let bin = mp.with_extension("bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(read_model(&mp), Err(Error::Format { .. })));
}

fn arb_edge() -> impl Strategy<Value = CausalEdge> {
    (0usize..5, 0usize..64, 1usize..6, 0usize..64, prop_oneof![-1e3..-1e-9f64, 1e-9..1e3f64, Just(f64::NEG_INFINITY)], 0.0..=1.0f64, 1u64..500)
        .prop_map(|(sl, si, dl, ti, d, consistency, n)| CausalEdge {
            source: FeatureId::new(sl, si),
            target: FeatureId::new(sl + dl, ti),
            d,
            consistency,
            n,
            sign: if d < 0.0 { EdgeSign::Inhibitory } else { EdgeSign::Excitatory },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_csv_round_trips_byte_identically(edges in prop::collection::vec(arb_edge(), 0..40), seed in any::<u64>()) {
        let mut t = EdgeTable { meta: Vec::new(), edges };
        t.set_meta("seed", seed);
        t.set_meta("config_hash", "00ff00ff00ff00ff");
        let text = t.to_csv();
        let back = EdgeTable::parse(&text, Path::new("edges.csv")).unwrap();
        prop_assert_eq!(&back.edges, &t.edges);
        let seed = seed.to_string();
        prop_assert_eq!(back.meta("seed"), Some(seed.as_str()));
        prop_assert_eq!(back.to_csv(), text);
    }
}

#[test]
fn edge_csv_rejects_sign_mismatch() {
    let mut t = EdgeTable { meta: Vec::new(), edges: Vec::new() };
    t.edges.push(CausalEdge {
        source: FeatureId::new(0, 1),
        target: FeatureId::new(1, 2),
        d: -1.0,
        consistency: 0.9,
        n: 10,
        sign: EdgeSign::Inhibitory,
    });
    let text = t.to_csv().replace("inhibitory", "excitatory");
    assert!(EdgeTable::parse(&text, Path::new("e.csv")).is_err());
}

struct Stop(Option<TraceCheckpoint>);

impl TraceHooks for Stop {
    fn on_checkpoint(&mut self, c: &TraceCheckpoint) -> ControlFlow<()> {
        self.0 = Some(c.clone());
        ControlFlow::Break(())
    }
}

#[test]
fn checkpoint_encode_decode_is_lossless() {
    let fx = planted_fixture(&small()).unwrap();
    let cfg = TraceConfig { source_layers: vec![1, 3], n_cells: 60, sources_per_layer: 3, checkpoint_every: 25, ..TraceConfig::default() };
    let mut stop = Stop(None);
    let run = run_trace(&fx.model, &fx.saes, &fx.catalog, &fx.batch, &cfg, None, &mut stop).unwrap();
    assert!(matches!(run, TraceRun::Interrupted(_)));
    let ckpt = stop.0.unwrap();
    let bytes = encode_checkpoint(&ckpt);
    let back = decode_checkpoint(&bytes, Path::new("c.ckpt")).unwrap();
    assert_eq!(back, ckpt);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.ckpt");
    write_checkpoint(&p, &ckpt).unwrap();
    assert_eq!(read_checkpoint(&p).unwrap(), ckpt);

    assert!(decode_checkpoint(&bytes[..bytes.len() - 7], Path::new("c.ckpt")).is_err());
    assert!(decode_checkpoint(b"not a checkpoint\n", Path::new("c.ckpt")).is_err());
}

const CONFIG: &str = "\
# comment
condition = gf/gf/k562
model = m.json
sae.1 = s1.json
sae.2 = s2.json
annotations = a.tsv
cells = c.json
seed = 11
source_layers = 1
sources_per_layer = 12 features
n_cells = 40 cells
d_threshold = 0.6 sd
consistency_threshold = 0.75
checkpoint_every = 10 cells
";

#[test]
fn config_parses_units_and_paths() {
    let cfg = RunConfig::parse(CONFIG, Path::new("/x/run.conf")).unwrap();
    assert_eq!(cfg.condition.to_string(), "gf/gf/k562");
    assert_eq!(cfg.model, Path::new("/x/m.json"));
    assert_eq!(cfg.saes.len(), 2);
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.trace.source_layers, [1]);
    assert_eq!(cfg.trace.sources_per_layer, 12);
    assert_eq!(cfg.trace.n_cells, 40);
    assert_eq!(cfg.trace.d_threshold, 0.6);
    assert_eq!(cfg.trace.consistency_threshold, 0.75);
    assert_eq!(cfg.trace.checkpoint_every, 10);
    assert!(!cfg.trace.deterministic);
    assert_eq!(cfg.stem(), "run");
}

#[test]
fn config_errors() {
    let p = Path::new("/x/run.conf");
    let bad = |text: String| RunConfig::parse(&text, p).is_err_and(|e| e.exit_code() == EXIT_CONFIG);
    assert!(bad(CONFIG.replace("12 features", "12 cells")));
    assert!(bad(format!("{CONFIG}colour = red\n")));
    assert!(bad(CONFIG.replace("d_threshold = 0.6 sd", "d_threshold = -1 sd")));
    assert!(bad(CONFIG.replace("checkpoint_every = 10 cells", "checkpoint_every = 0 cells")));
    assert!(bad(CONFIG.replace("model = m.json\n", "")));
    assert!(bad(CONFIG.replace("seed = 11", "seed = eleven")));
    assert!(bad(format!("{CONFIG}seed = 12\n")));
}

#[test]
fn config_load_requires_existing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.conf");
    std::fs::write(&p, CONFIG).unwrap();
    let e = RunConfig::load(&p).unwrap_err();
    assert_eq!(e.exit_code(), EXIT_CONFIG);
    assert!(e.to_string().contains("m.json"), "{e}");
}
