// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `circuitscope` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use circuitscope_core::graph::{
    attenuation_curve, degree_stats, edge_summary, pmi_graph, target_overlap, CircuitGraph, PmiConfig,
};
use circuitscope_core::knowledge::{
    build_known_graph, coherence_fraction, consensus_pairs, domain_pairs, feedback_loops, novel_pairs,
    process_hierarchy, split_specific, tissue_enrichment, AnnotationCatalog, DomainKey, DomainPairTable,
};
use circuitscope_core::tracer::{TraceReport, TraceRun, Tracer};
use circuitscope_core::validate::{
    apply_consensus, disease_map, extract_gene_pairs, filter_predictions, magnitude_correlation,
    merge_gene_pairs, per_source_enrichment, sign_accuracy, DiseaseGeneSets, GenePairPrediction, RawGenePairs,
};
use serde_json::json;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{RunConfig, OUTPUT_DIR_ENV};
use crate::edges::EdgeTable;
use crate::error::{Error, Result, EXIT_CONFIG};
use crate::parallel::{effective_threads, trace_with_threads};
use crate::report::{build_run_report, table1, RunReport};
use crate::synth::{synth, SynthOptions};
use crate::tables::{read_cells, read_domain_genes, read_json, read_keywords, read_perturbations, write_csv, write_json, Table};
use crate::tensor::read_model;

#[derive(Debug, Parser)]
#[command(name = "circuitscope", version, about = "Causal feature circuit tracing and analysis")]
pub struct Cli {
    /// Run config; repeat for multi-condition analyses.
    #[arg(long = "config", global = true, value_name = "FILE")]
    pub configs: Vec<PathBuf>,
    /// Seed for synthetic fixtures and permutation tests.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for tracing (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Single-threaded, bit-reproducible tracing.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Output directory for multi-condition results.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic models, dictionaries, catalogs, cells and configs.
    Synth {
        #[arg(long, default_value_t = 200)]
        n_cells: usize,
        #[arg(long, default_value_t = 30)]
        sources_per_layer: usize,
        #[arg(long, default_value_t = 50)]
        checkpoint_every: usize,
    },
    /// Trace causal edges for each config.
    Trace {
        /// Continue from a checkpoint file.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
        /// Stop after writing this many checkpoints.
        #[arg(long, hide = true)]
        stop_after_checkpoints: Option<usize>,
    },
    /// Co-activation PMI graph and its overlap with the causal targets.
    Pmi {
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        min_support: u64,
    },
    /// Degree distribution, hubs, attenuation curves and edge summary.
    GraphStats {
        #[arg(long, default_value_t = 10)]
        hubs: usize,
    },
    /// Fraction of annotated edges whose endpoints share an annotation.
    Coherence,
    /// Domain pairs found in every model, with a permutation test.
    Consensus {
        #[arg(long, default_value_t = 1000)]
        n_perms: usize,
    },
    /// Domain pairs absent from the known-biology graph.
    Novel {
        #[arg(long, value_name = "TSV")]
        domain_genes: PathBuf,
    },
    /// Domain layer ordering and feedback loops.
    Hierarchy,
    /// Tissue keyword enrichment of pairs specific to the first config.
    Tissue {
        #[arg(long, value_name = "JSON")]
        keywords: PathBuf,
    },
    /// Gene-pair predictions from edges and feature gene lists.
    Genepairs {
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        /// consensus.csv marking consensus domain pairs.
        #[arg(long, value_name = "CSV")]
        consensus: Option<PathBuf>,
    },
    /// Sign, magnitude and enrichment checks against a perturbation screen.
    ValidatePerturb {
        #[arg(long, value_name = "CSV")]
        predictions: PathBuf,
        #[arg(long, value_name = "TSV")]
        perturbation: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lfc_threshold: f64,
    },
    /// Disease-category footprint of the circuit.
    Disease {
        #[arg(long, value_name = "JSON")]
        disease_keywords: PathBuf,
        #[arg(long, value_name = "CSV")]
        consensus: Option<PathBuf>,
    },
    /// Recompute run reports from edge tables and write the summary table.
    Report,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Command::Synth { n_cells, sources_per_layer, checkpoint_every } = &cli.command {
        let out = cli.out.clone().ok_or_else(|| Error::Config("synth needs --out DIR".into()))?;
        let opts = SynthOptions {
            seed: cli.seed.unwrap_or(SynthOptions::default().seed),
            n_cells: *n_cells,
            sources_per_layer: *sources_per_layer,
            checkpoint_every: *checkpoint_every,
        };
        let o = synth(&out, &opts)?;
        for c in &o.configs {
            println!("wrote {}", c.display());
        }
        return Ok(());
    }
    if cli.configs.is_empty() {
        return Err(Error::Config("this command needs at least one --config FILE".into()));
    }
    let configs = cli.configs.iter().map(|p| RunConfig::load(p)).collect::<Result<Vec<_>>>()?;
    match &cli.command {
        Command::Synth { .. } => unreachable!("handled above"),
        Command::Trace { resume, stop_after_checkpoints } => {
            if resume.is_some() && configs.len() > 1 {
                return Err(Error::Config("--resume takes exactly one --config".into()));
            }
            configs.iter().try_for_each(|c| cmd_trace(cli, c, resume.as_deref(), *stop_after_checkpoints))
        }
        Command::Pmi { threshold, min_support } => configs.iter().try_for_each(|c| cmd_pmi(c, *threshold, *min_support)),
        Command::GraphStats { hubs } => configs.iter().try_for_each(|c| cmd_graph_stats(c, *hubs)),
        Command::Coherence => configs.iter().try_for_each(cmd_coherence),
        Command::Consensus { n_perms } => cmd_consensus(cli, &configs, *n_perms),
        Command::Novel { domain_genes } => cmd_novel(cli, &configs, domain_genes),
        Command::Hierarchy => cmd_hierarchy(cli, &configs),
        Command::Tissue { keywords } => cmd_tissue(cli, &configs, keywords),
        Command::Genepairs { top_n, consensus } => cmd_genepairs(cli, &configs, *top_n, consensus.as_deref()),
        Command::ValidatePerturb { predictions, perturbation, lfc_threshold } => {
            cmd_validate(cli, &configs, predictions, perturbation, *lfc_threshold)
        }
        Command::Disease { disease_keywords, consensus } => cmd_disease(cli, &configs, disease_keywords, consensus.as_deref()),
        Command::Report => cmd_report(cli, &configs),
    }
}

/// Directory for results that span several configs.
fn shared_out(cli: &Cli, configs: &[RunConfig]) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    if let Some(base) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(base);
    }
    configs[0].output_dir().parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn seed_of(cli: &Cli, configs: &[RunConfig]) -> u64 {
    cli.seed.unwrap_or(configs[0].seed)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

struct Loaded {
    catalog: AnnotationCatalog,
    edges: EdgeTable,
    graph: CircuitGraph,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let catalog = cfg.load_catalog()?;
    let edges = EdgeTable::read(&cfg.edges_path())?;
    let graph = CircuitGraph::from_edges(cfg.condition.clone(), edges.edges.iter().copied());
    Ok(Loaded { catalog, edges, graph })
}

fn domain_tables(configs: &[RunConfig]) -> Result<Vec<DomainPairTable>> {
    configs.iter().map(|c| load(c).map(|l| domain_pairs(&l.graph, &l.catalog))).collect()
}

fn table_for(cfg: &RunConfig, edges: &EdgeTable, header: &[&str]) -> Table {
    let mut t = Table::new(header).with_meta("seed", cfg.seed).with_meta("condition", &cfg.condition);
    if let Some(h) = edges.meta("config_hash") {
        t = t.with_meta("config_hash", h);
    }
    t
}

fn cmd_trace(cli: &Cli, cfg: &RunConfig, resume: Option<&Path>, stop_after: Option<usize>) -> Result<()> {
    let model = read_model(&cfg.model)?;
    let saes = cfg.load_saes()?;
    let catalog = cfg.load_catalog()?;
    let batch = read_cells(&cfg.cells)?;
    let mut tc = cfg.trace.clone();
    tc.deterministic |= cli.deterministic;
    let threads = effective_threads(cli.threads.or(cfg.threads), tc.deterministic);
    let tracer = Tracer::new(&model, &saes, &catalog, &batch, tc)?;
    let state = match resume {
        Some(p) => tracer.resume(read_checkpoint(p)?)?,
        None => tracer.empty_state(),
    };
    let out = cfg.output_dir();
    let ckpt_path = out.join("checkpoint.ckpt");
    let mut written = 0;
    let run = trace_with_threads(&tracer, state, threads, |ckpt| {
        write_checkpoint(&ckpt_path, ckpt)?;
        written += 1;
        Ok(if stop_after == Some(written) { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
    })?;
    let output = match run {
        TraceRun::Interrupted(ckpt) => {
            println!("{}: stopped after {} cells; checkpoint {}", cfg.condition, ckpt.state.cells_done, ckpt_path.display());
            return Ok(());
        }
        TraceRun::Completed(o) => o,
    };
    let mut table = EdgeTable { meta: Vec::new(), edges: output.edges };
    table.set_meta("seed", cfg.seed);
    table.set_meta("config_hash", format!("{:016x}", tracer.config_hash()));
    table.set_meta("condition", &cfg.condition);
    table.write(&cfg.edges_path())?;
    write_json(&out.join("trace_report.json"), &output.report)?;
    let n_features = saes.iter().map(|s| s.n_features).max().unwrap_or(0);
    let report = build_run_report(&cfg.condition, cfg.seed, &output.report, &table.edges, &catalog, n_features);
    write_json(&out.join("run_report.json"), &report)?;
    if ckpt_path.exists() {
        std::fs::remove_file(&ckpt_path).map_err(|source| Error::Io { path: ckpt_path.clone(), source })?;
    }
    println!("{}: {} edges from {} cells ({} threads)", cfg.condition, table.edges.len(), output.report.cells_done, threads);
    Ok(())
}

fn cmd_pmi(cfg: &RunConfig, threshold: f64, min_support: u64) -> Result<()> {
    let l = load(cfg)?;
    let model = read_model(&cfg.model)?;
    let saes = cfg.load_saes()?;
    let batch = read_cells(&cfg.cells)?;
    let batch = batch.slice(0, cfg.trace.n_cells.min(batch.len()));
    let mut pairs = Vec::new();
    for &s in &cfg.trace.source_layers {
        for t in s + 1..model.n_layers {
            if saes.get(t).is_some() {
                pairs.push((s, t));
            }
        }
    }
    let pcfg = PmiConfig { layer_pairs: pairs.clone(), threshold, min_support, sources: None };
    let pmi = pmi_graph(&model, &saes, &batch, &pcfg)?;
    let out = cfg.output_dir();
    let mut t = table_for(cfg, &l.edges, &["source", "target", "pmi", "joint_count"]);
    for e in &pmi {
        t.push(vec![e.source.to_string(), e.target.to_string(), e.pmi.to_string(), e.joint_count.to_string()]);
    }
    write_csv(&out.join("pmi.csv"), &t)?;
    let mut o = table_for(cfg, &l.edges, &["source_layer", "target_layer", "causal_targets", "target_overlap"]);
    for &(s, tl) in &pairs {
        let n = l.graph.edges_between(s, tl).map(|e| e.target).collect::<BTreeSet<_>>().len();
        o.push(vec![s.to_string(), tl.to_string(), n.to_string(), fmt_opt(target_overlap(&l.graph, &pmi, (s, tl)))]);
    }
    write_csv(&out.join("pmi_overlap.csv"), &o)?;
    println!("{}: {} PMI edges over {} layer pairs", cfg.condition, pmi.len(), pairs.len());
    Ok(())
}

fn cmd_graph_stats(cfg: &RunConfig, hubs: usize) -> Result<()> {
    let l = load(cfg)?;
    let out = cfg.output_dir();
    let trace: TraceReport = read_json(&out.join("trace_report.json"))?;
    let stats = degree_stats(&l.graph);
    let mut t = table_for(cfg, &l.edges, &["kind", "rank", "feature", "degree"]);
    for (kind, list) in [("out", &stats.out_hubs), ("in", &stats.in_hubs)] {
        for (i, (f, d)) in list.iter().take(hubs).enumerate() {
            t.push(vec![kind.into(), (i + 1).to_string(), f.to_string(), d.to_string()]);
        }
    }
    write_csv(&out.join("hubs.csv"), &t)?;
    let mut d = table_for(cfg, &l.edges, &["feature", "in_degree", "out_degree"]);
    for (f, deg) in &stats.degrees {
        d.push(vec![f.to_string(), deg.in_degree.to_string(), deg.out_degree.to_string()]);
    }
    write_csv(&out.join("degrees.csv"), &d)?;
    let mut a = table_for(cfg, &l.edges, &["source_layer", "target_layer", "offset", "edges_per_source"]);
    for lr in &trace.layers {
        if lr.n_sources == 0 || lr.target_layers.is_empty() {
            continue;
        }
        for p in attenuation_curve(&l.graph, lr.source_layer, lr.n_sources, &lr.target_layers)? {
            a.push(vec![lr.source_layer.to_string(), p.target_layer.to_string(), p.offset.to_string(), p.value.to_string()]);
        }
    }
    write_csv(&out.join("attenuation.csv"), &a)?;
    write_json(&out.join("edge_summary.json"), &edge_summary(&l.edges.edges))?;
    println!("{}: {} nodes, {} edges", cfg.condition, stats.degrees.len(), l.graph.len());
    Ok(())
}

fn cmd_coherence(cfg: &RunConfig) -> Result<()> {
    let l = load(cfg)?;
    let c = coherence_fraction(&l.edges.edges, &l.catalog);
    write_json(
        &cfg.output_dir().join("coherence.json"),
        &json!({ "condition": cfg.condition.to_string(), "seed": cfg.seed, "config_hash": l.edges.meta("config_hash"), "coherence": c }),
    )?;
    println!("{}: coherence {} over {} annotated edges", cfg.condition, fmt_opt(c.fraction), c.annotated_edges);
    Ok(())
}

fn shared_table(cli: &Cli, configs: &[RunConfig], header: &[&str]) -> Table {
    let conds: Vec<String> = configs.iter().map(|c| c.condition.to_string()).collect();
    Table::new(header).with_meta("seed", seed_of(cli, configs)).with_meta("conditions", conds.join(";"))
}

fn cmd_consensus(cli: &Cli, configs: &[RunConfig], n_perms: usize) -> Result<()> {
    let tables = domain_tables(configs)?;
    let r = consensus_pairs(&tables, n_perms, seed_of(cli, configs))?;
    let out = shared_out(cli, configs);
    let mut header = vec!["source_domain".to_string(), "target_domain".to_string()];
    for m in &r.models {
        header.push(format!("{m}_support"));
        header.push(format!("{m}_mean_abs_d"));
    }
    header.push("high_confidence".into());
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = shared_table(cli, configs, &hdr);
    for p in &r.pairs {
        let mut row = vec![p.source.clone(), p.target.clone()];
        for s in &p.per_model {
            row.push(s.support.to_string());
            row.push(s.mean_abs_d.to_string());
        }
        row.push(p.high_confidence.to_string());
        t.push(row);
    }
    write_csv(&out.join("consensus.csv"), &t)?;
    let e = &r.enrichment;
    write_json(
        &out.join("consensus.json"),
        &json!({
            "seed": seed_of(cli, configs),
            "models": r.models,
            "consensus_pairs": r.pairs.len(),
            "high_confidence": r.n_high_confidence,
            "expected": e.expected,
            "fold": e.fold,
            "p_value": e.p_value,
            "n_perms": e.n_perms,
        }),
    )?;
    println!("consensus: {} pairs ({} high-confidence), fold {:.2}, p {:.4}", r.pairs.len(), r.n_high_confidence, e.fold, e.p_value);
    Ok(())
}

fn cmd_novel(cli: &Cli, configs: &[RunConfig], domain_genes: &Path) -> Result<()> {
    let tables = domain_tables(configs)?;
    let known = build_known_graph(&read_domain_genes(domain_genes)?);
    let r = novel_pairs(&tables, &known);
    let merged = DomainPairTable::merged(&tables);
    let all: BTreeSet<&DomainKey> = r.all_conditions.iter().collect();
    let out = shared_out(cli, configs);
    let mut t = shared_table(cli, configs, &["source_domain", "target_domain", "support", "mean_abs_d", "all_conditions"]);
    for k in &r.novel {
        let p = &merged.pairs[k];
        t.push(vec![k.0.clone(), k.1.clone(), p.support.to_string(), p.mean_abs_d().to_string(), all.contains(k).to_string()]);
    }
    write_csv(&out.join("novel.csv"), &t)?;
    write_json(
        &out.join("novel.json"),
        &json!({
            "seed": seed_of(cli, configs),
            "known_links": known.len(),
            "pairs": merged.len(),
            "novel_pairs": r.novel.len(),
            "novel_pair_fraction": r.pair_fraction,
            "novel_edge_fraction": r.edge_fraction,
            "novel_in_all_conditions": r.all_conditions.len(),
        }),
    )?;
    println!("novel: {} of {} domain pairs", r.novel.len(), merged.len());
    Ok(())
}

fn cmd_hierarchy(cli: &Cli, configs: &[RunConfig]) -> Result<()> {
    let merged = DomainPairTable::merged(&domain_tables(configs)?);
    let h = process_hierarchy(&merged);
    let out = shared_out(cli, configs);
    let mut d = shared_table(cli, configs, &["domain", "mean_source_layer", "out_edges"]);
    for l in &h.domains {
        d.push(vec![l.domain.clone(), l.mean_source_layer.to_string(), l.out_edges.to_string()]);
    }
    write_csv(&out.join("hierarchy.csv"), &d)?;
    let mut p = shared_table(cli, configs, &["source_domain", "target_domain", "mean_layer_delta", "support"]);
    for x in &h.pairs {
        p.push(vec![x.source.clone(), x.target.clone(), x.mean_layer_delta.to_string(), x.support.to_string()]);
    }
    write_csv(&out.join("hierarchy_pairs.csv"), &p)?;
    let loops = feedback_loops(&merged);
    let mut l = shared_table(cli, configs, &["domain_a", "domain_b"]);
    for (a, b) in &loops {
        l.push(vec![a.clone(), b.clone()]);
    }
    write_csv(&out.join("loops.csv"), &l)?;
    println!("hierarchy: {} domains, {} pairs, {} loops", h.domains.len(), h.pairs.len(), loops.len());
    Ok(())
}

fn cmd_tissue(cli: &Cli, configs: &[RunConfig], keywords: &Path) -> Result<()> {
    if configs.len() < 2 {
        return Err(Error::Config("tissue needs a focal --config followed by at least one reference".into()));
    }
    let tables = domain_tables(configs)?;
    let focal: BTreeSet<DomainKey> = tables[0].keys();
    let reference: BTreeSet<DomainKey> = tables[1..].iter().flat_map(|t| t.keys()).collect();
    let (specific, shared) = split_specific(&focal, &reference);
    let rows = tissue_enrichment(&specific, &shared, &read_keywords(keywords)?);
    let mut t = shared_table(
        cli,
        configs,
        &["tissue", "specific_related", "specific_unrelated", "shared_related", "shared_unrelated", "odds_ratio", "p_value"],
    );
    for r in &rows {
        t.push(vec![
            r.tissue.clone(),
            r.specific_related.to_string(),
            r.specific_unrelated.to_string(),
            r.shared_related.to_string(),
            r.shared_unrelated.to_string(),
            r.odds_ratio.to_string(),
            r.p_value.to_string(),
        ]);
    }
    write_csv(&shared_out(cli, configs).join("tissue.csv"), &t)?;
    println!("tissue: {} specific, {} shared pairs", specific.len(), shared.len());
    Ok(())
}

fn read_consensus_keys(path: &Path) -> Result<BTreeSet<DomainKey>> {
    let t = Table::read(path, b',')?;
    let cols = t.require(path, &["source_domain", "target_domain"])?;
    Ok(t.rows.iter().map(|r| (r[cols[0]].clone(), r[cols[1]].clone())).collect())
}

pub const PREDICTION_HEADER: [&str; 8] =
    ["source_gene", "target_gene", "weight", "supporting_edges", "max_abs_d", "mean_d", "predicted_sign", "consensus"];

fn cmd_genepairs(cli: &Cli, configs: &[RunConfig], top_n: usize, consensus: Option<&Path>) -> Result<()> {
    let mut raw = RawGenePairs::new();
    for c in configs {
        let l = load(c)?;
        merge_gene_pairs(&mut raw, extract_gene_pairs(&l.edges.edges, &l.catalog, top_n));
    }
    let mut preds = filter_predictions(&raw);
    if let Some(p) = consensus {
        apply_consensus(&mut preds, &read_consensus_keys(p)?);
    }
    let mut t = shared_table(cli, configs, &PREDICTION_HEADER).with_meta("raw_pairs", raw.len());
    for p in &preds {
        t.push(vec![
            p.source_gene.clone(),
            p.target_gene.clone(),
            p.weight.to_string(),
            p.supporting_edges.to_string(),
            p.max_abs_d.to_string(),
            p.mean_d.to_string(),
            p.predicted_sign.to_string(),
            p.consensus.to_string(),
        ]);
    }
    write_csv(&shared_out(cli, configs).join("predictions.csv"), &t)?;
    println!("genepairs: {} raw pairs, {} predictions", raw.len(), preds.len());
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<GenePairPrediction>> {
    let t = Table::read(path, b',')?;
    let c = t.require(path, &PREDICTION_HEADER)?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let bad = |col: &str| Error::format(path, format!("row {}: bad {col}", i + 1));
            Ok(GenePairPrediction {
                source_gene: r[c[0]].clone(),
                target_gene: r[c[1]].clone(),
                weight: r[c[2]].parse().map_err(|_| bad("weight"))?,
                supporting_edges: r[c[3]].parse().map_err(|_| bad("supporting_edges"))?,
                max_abs_d: r[c[4]].parse().map_err(|_| bad("max_abs_d"))?,
                mean_d: r[c[5]].parse().map_err(|_| bad("mean_d"))?,
                predicted_sign: r[c[6]].parse().ok().filter(|s: &i8| s.abs() == 1).ok_or_else(|| bad("predicted_sign"))?,
                consensus: r[c[7]].parse().map_err(|_| bad("consensus"))?,
                domains: BTreeSet::new(),
            })
        })
        .collect()
}

fn cmd_validate(cli: &Cli, configs: &[RunConfig], predictions: &Path, perturbation: &Path, lfc_threshold: f64) -> Result<()> {
    let preds = read_predictions(predictions)?;
    let table = read_perturbations(perturbation)?;
    let acc = sign_accuracy(&preds, &table)?;
    let rho = magnitude_correlation(&preds, &table).ok();
    let enr = per_source_enrichment(&preds, &table, lfc_threshold)?;
    let sources: Vec<_> = enr
        .sources
        .iter()
        .map(|s| json!({ "source_gene": s.source_gene, "table": [[s.table.a, s.table.b], [s.table.c, s.table.d]], "odds_ratio": finite_or_null(s.odds_ratio), "p_value": s.p_value }))
        .collect();
    write_json(
        &shared_out(cli, configs).join("validation_report.json"),
        &json!({
            "seed": seed_of(cli, configs),
            "sign_accuracy": acc,
            "magnitude_correlation": rho.map(|r| json!({ "rho": r.statistic, "p_value": r.p_value })),
            "lfc_threshold": lfc_threshold,
            "enrichment": {
                "tested_sources": enr.sources.len(),
                "skipped_sources": enr.skipped,
                "significant": enr.n_significant,
                "fraction_significant": enr.fraction_significant,
                "alpha": enr.alpha,
                "sources": sources,
            },
        }),
    )?;
    println!(
        "validate-perturb: sign accuracy {} over {} pairs; {} of {} sources enriched",
        fmt_opt(acc.accuracy),
        acc.evaluated,
        enr.n_significant,
        enr.sources.len()
    );
    Ok(())
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() { json!(v) } else if v.is_nan() { serde_json::Value::Null } else { json!(if v > 0.0 { "inf" } else { "-inf" }) }
}

fn cmd_disease(cli: &Cli, configs: &[RunConfig], keywords: &Path, consensus: Option<&Path>) -> Result<()> {
    let merged = DomainPairTable::merged(&domain_tables(configs)?);
    let domains: BTreeSet<&str> = merged.iter().flat_map(|p| [p.source.as_str(), p.target.as_str()]).collect();
    let sets = DiseaseGeneSets::build(&read_keywords(keywords)?, domains);
    let consensus = match consensus {
        Some(p) => read_consensus_keys(p)?,
        None => BTreeSet::new(),
    };
    let m = disease_map(&merged, &sets, &consensus);
    let out = shared_out(cli, configs);
    let mut t = shared_table(cli, configs, &["category", "domains", "edges", "consensus", "mean_abs_d"]);
    for r in &m.rows {
        t.push(vec![r.category.clone(), r.domains.to_string(), r.edges.to_string(), r.consensus.to_string(), fmt_opt(r.mean_abs_d)]);
    }
    write_csv(&out.join("disease_table.csv"), &t)?;
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        match v.len() {
            0 => None,
            n if n % 2 == 1 => Some(v[n / 2]),
            n => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
        }
    };
    let ct = m.consensus_table;
    write_json(
        &out.join("disease.json"),
        &json!({
            "seed": seed_of(cli, configs),
            "disease_domains": m.disease_centrality.len(),
            "other_domains": m.other_centrality.len(),
            "median_centrality_disease": median(&m.disease_centrality),
            "median_centrality_other": median(&m.other_centrality),
            "centrality_test": m.centrality_test.map(|r| json!({ "u": r.statistic, "p_value": r.p_value })),
            "consensus_table": [[ct.a, ct.b], [ct.c, ct.d]],
            "consensus_enrichment": m.consensus_enrichment,
            "consensus_p": m.consensus_p,
        }),
    )?;
    println!("disease: {} categories", m.rows.len());
    Ok(())
}

/// Rebuilds a condition's report from its edge table and trace report.
pub fn recompute_report(cfg: &RunConfig) -> Result<RunReport> {
    let l = load(cfg)?;
    let trace: TraceReport = read_json(&cfg.output_dir().join("trace_report.json"))?;
    let n_features = cfg.load_saes()?.iter().map(|s| s.n_features).max().unwrap_or(0);
    Ok(build_run_report(&cfg.condition, cfg.seed, &trace, &l.edges.edges, &l.catalog, n_features))
}

fn cmd_report(cli: &Cli, configs: &[RunConfig]) -> Result<()> {
    let mut reports = Vec::new();
    for c in configs {
        let r = recompute_report(c)?;
        write_json(&c.output_dir().join("report.json"), &r)?;
        reports.push(r);
    }
    let out = shared_out(cli, configs);
    write_csv(&out.join("table1.csv"), &table1(&reports))?;
    let by_condition: BTreeMap<String, &RunReport> = reports.iter().map(|r| (r.condition.to_string(), r)).collect();
    write_json(&out.join("report.json"), &json!({ "seed": seed_of(cli, configs), "conditions": by_condition }))?;
    for r in &reports {
        println!(
            "{}: {} edges, mean |d| {}, inhibitory {}%, shared ontology {}%",
            r.condition,
            r.summary.n_edges,
            fmt_opt(r.summary.mean_abs_d),
            fmt_opt(r.summary.pct_inhibitory),
            fmt_opt(r.shared_ontology_pct)
        );
    }
    Ok(())
}
