// SPDX-License-Identifier: MIT OR Apache-2.0

//! Writes a complete synthetic workspace: two planted models that share
//! their circuit and domain vocabulary, their dictionaries, catalogs and
//! cells, run configs for three conditions, plus knowledge-base and
//! perturbation inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use circuitscope_core::fixture::{planted_fixture, PlantedFixture, PlantedFixtureConfig};
use circuitscope_core::graph::Condition;
use circuitscope_core::rng::{normal_f64, seeded};
use circuitscope_core::tracer::TraceConfig;
use circuitscope_core::validate::{PerturbationRow, PerturbationTable};

use crate::config::render_config;
use crate::error::Result;
use crate::tables::{write_catalog, write_domain_genes, write_json, write_perturbations};
use crate::tensor::{write_model, write_sae};

/// Variant-seed offset of the second model.
pub const SECOND_MODEL_OFFSET: u64 = 1000;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub seed: u64,
    pub n_cells: usize,
    pub sources_per_layer: usize,
    pub checkpoint_every: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { seed: 7, n_cells: 200, sources_per_layer: 30, checkpoint_every: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Run configs, in condition order.
    pub configs: Vec<PathBuf>,
    pub domain_genes: PathBuf,
    pub tissue_keywords: PathBuf,
    pub disease_keywords: PathBuf,
    pub perturbation: PathBuf,
}

pub fn tissue_keywords() -> BTreeMap<String, Vec<String>> {
    [
        ("immune", &["immune", "T cell", "antigen", "inflammatory"][..]),
        ("erythroid", &["heme", "erythrocyte"]),
        ("neural", &["neuron"]),
        ("muscle", &["muscle", "angiogenesis"]),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
    .collect()
}

pub fn disease_keywords() -> BTreeMap<String, Vec<String>> {
    [
        ("cancer", &["DNA repair", "cell cycle", "apoptotic"][..]),
        ("immunodeficiency", &["immune", "antigen", "T cell"]),
        ("anemia", &["heme", "erythrocyte"]),
        ("metabolic", &["lipid", "cholesterol", "insulin"]),
        ("neurodegeneration", &["neuron", "autophagy", "protein folding"]),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
    .collect()
}

fn write_fixture_files(dir: &Path, fx: &PlantedFixture, seed: u64) -> Result<()> {
    write_model(&dir.join("model.json"), &fx.model)?;
    for sae in fx.saes.iter() {
        write_sae(&dir.join("saes").join(format!("sae_L{}.json", sae.layer)), sae)?;
    }
    write_catalog(&dir.join("annotations.tsv"), &dir.join("gene_lists.tsv"), &fx.catalog, seed)
}

/// Perturbing a planted source gene lowers the genes of its planted targets
/// in proportion to the edge weight; every other measured response is noise.
pub fn planted_perturbations(fx: &PlantedFixture, seed: u64) -> Result<PerturbationTable> {
    let mut rng = seeded(seed, 0x9e27);
    let universe: Vec<String> = {
        let mut g: Vec<String> = fx.domain_genes.values().flatten().cloned().collect();
        g.sort();
        g.dedup();
        g
    };
    let mut lfc: BTreeMap<(String, String), f64> = BTreeMap::new();
    for e in &fx.spec.edges {
        for s in fx.catalog.genes(&e.source) {
            for t in fx.catalog.genes(&e.target) {
                let v = -(0.8 + 0.5 * e.weight.abs() as f64) + 0.2 * normal_f64(&mut rng);
                lfc.entry((s.clone(), t.clone())).or_insert(v.min(-0.05));
            }
        }
    }
    let perturbed: Vec<String> = {
        let mut p: Vec<String> = lfc.keys().map(|k| k.0.clone()).collect();
        p.dedup();
        p
    };
    for p in &perturbed {
        for r in &universe {
            if r != p {
                let noise = 0.3 * normal_f64(&mut rng);
                lfc.entry((p.clone(), r.clone())).or_insert(noise);
            }
        }
    }
    Ok(PerturbationTable::new(lfc.into_iter().map(|((p, r), v)| PerturbationRow {
        perturbed_gene: p,
        response_gene: r,
        lfc: v,
    }))?)
}

pub fn synth(out: &Path, opts: &SynthOptions) -> Result<SynthOutput> {
    let base = PlantedFixtureConfig { seed: opts.seed, n_cells: opts.n_cells, ..PlantedFixtureConfig::default() };
    let variants = [
        ("gf", base.clone()),
        ("sc", PlantedFixtureConfig { variant_seed: Some(opts.seed + SECOND_MODEL_OFFSET), ..base.clone() }),
    ];
    let trace = TraceConfig {
        source_layers: (0..base.n_layers - 1).collect(),
        sources_per_layer: opts.sources_per_layer,
        n_cells: opts.n_cells,
        checkpoint_every: opts.checkpoint_every,
        ..TraceConfig::default()
    };
    let mut configs = Vec::new();
    let mut model_a = None;
    for (name, cfg) in variants {
        let dir = out.join(name);
        let fx = planted_fixture(&cfg)?;
        write_fixture_files(&dir, &fx, opts.seed)?;
        write_json(&dir.join("cells_k562.json"), &fx.batch)?;
        let mut cell_sets = vec!["k562"];
        if name == "gf" {
            let tissue = planted_fixture(&PlantedFixtureConfig { multi_tissue: true, ..cfg.clone() })?;
            write_json(&dir.join("cells_tissue.json"), &tissue.batch)?;
            cell_sets.push("tissue");
        }
        for cells in cell_sets {
            let stem = format!("{name}_{cells}");
            let cells_file = format!("{name}/cells_{cells}.json");
            let files = [
                ("model", format!("{name}/model.json")),
                ("sae_dir", format!("{name}/saes")),
                ("annotations", format!("{name}/annotations.tsv")),
                ("gene_lists", format!("{name}/gene_lists.tsv")),
                ("cells", cells_file),
                ("output_dir", format!("out/{stem}")),
            ];
            let files: Vec<(&str, &str)> = files.iter().map(|(k, v)| (*k, v.as_str())).collect();
            let text = render_config(&Condition::new(name, name, cells), opts.seed, &trace, &files);
            let path = out.join(format!("{stem}.conf"));
            crate::write_text(&path, &text)?;
            configs.push(path);
        }
        if model_a.is_none() {
            model_a = Some(fx);
        }
    }
    let fx = model_a.expect("first model built");
    let output = SynthOutput {
        configs,
        domain_genes: out.join("domain_genes.tsv"),
        tissue_keywords: out.join("keywords.json"),
        disease_keywords: out.join("disease_keywords.json"),
        perturbation: out.join("perturbation.tsv"),
    };
    write_domain_genes(&output.domain_genes, &fx.domain_genes, opts.seed)?;
    write_json(&output.tissue_keywords, &tissue_keywords())?;
    write_json(&output.disease_keywords, &disease_keywords())?;
    write_perturbations(&output.perturbation, &planted_perturbations(&fx, opts.seed)?, opts.seed)?;
    Ok(output)
}
