// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic planted-circuit fixtures with matching annotation catalogs.
//!
//! The catalog names are drawn from a fixed vocabulary of biological
//! processes so analyses over two fixtures (two "models") can meet on shared
//! domain labels.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, Result};
use crate::feature::FeatureId;
use crate::knowledge::{AnnotationCatalog, Ontology};
use crate::linalg::{dot, Matrix};
use crate::model::{
    build_planted_model, chained_map, generate_cells, CellBatch, CellKind, LayeredModel, ModelBody,
    PlantedSpec,
};
use crate::rng::{seeded, shuffle};
use crate::sae::synthesize_sae_with_basis;
use crate::tracer::SaeSet;

/// Process vocabulary shared by every fixture.
pub const DOMAINS: [&str; 24] = [
    "DNA repair",
    "immune response",
    "T cell activation",
    "MAPK cascade",
    "cell cycle",
    "apoptotic process",
    "translation",
    "RNA splicing",
    "oxidative phosphorylation",
    "heme biosynthetic process",
    "erythrocyte differentiation",
    "inflammatory response",
    "lipid metabolic process",
    "angiogenesis",
    "neuron development",
    "muscle contraction",
    "chromatin remodeling",
    "protein folding",
    "autophagy",
    "Wnt signaling pathway",
    "insulin receptor signaling",
    "keratinocyte differentiation",
    "cholesterol biosynthetic process",
    "antigen processing and presentation",
];

/// Genes per domain; neighbouring domains (cyclically) share `GENE_OVERLAP`.
pub const GENES_PER_DOMAIN: usize = 15;
pub const GENE_OVERLAP: usize = 3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantedFixtureConfig {
    pub seed: u64,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_features: usize,
    pub k: usize,
    pub n_edges: usize,
    pub weight_range: (f32, f32),
    pub n_cells: usize,
    pub seq_len: usize,
    pub vocab: usize,
    /// Seed of the embedding, SAE padding columns and cells; defaults to
    /// `seed`. Two fixtures with equal `seed` but different `variant_seed`
    /// share their planted circuit.
    pub variant_seed: Option<u64>,
    pub multi_tissue: bool,
    /// Encoder bias of the random dictionary columns beyond the planted
    /// basis; negative values keep them from firing on weak projections.
    pub extra_feature_bias: f32,
    /// Upper bound on planted directions present at one position.
    pub max_active: Option<usize>,
}

impl Default for PlantedFixtureConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_layers: 6,
            d_model: 32,
            n_features: 64,
            k: 4,
            n_edges: 50,
            weight_range: (0.5, 2.0),
            n_cells: 200,
            seq_len: 48,
            vocab: 65,
            variant_seed: None,
            multi_tissue: false,
            extra_feature_bias: -0.4,
            max_active: Some(3),
        }
    }
}

pub struct PlantedFixture {
    pub config: PlantedFixtureConfig,
    pub spec: PlantedSpec,
    pub model: LayeredModel,
    pub saes: SaeSet,
    pub catalog: AnnotationCatalog,
    pub batch: CellBatch,
    /// Gene set of every domain label.
    pub domain_genes: BTreeMap<String, Vec<String>>,
}

pub fn gene_name(i: usize) -> String {
    format!("GENE{i:04}")
}

/// Gene sets of [`DOMAINS`]: domain `i` owns a run of `GENES_PER_DOMAIN`
/// genes starting at `i·(GENES_PER_DOMAIN − GENE_OVERLAP)`, wrapping around.
pub fn domain_gene_sets() -> BTreeMap<String, Vec<String>> {
    let stride = GENES_PER_DOMAIN - GENE_OVERLAP;
    let universe = DOMAINS.len() * stride;
    DOMAINS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let genes = (0..GENES_PER_DOMAIN).map(|j| gene_name((i * stride + j) % universe)).collect();
            (name.to_string(), genes)
        })
        .collect()
}

/// Domain of basis direction `i` (the same at every layer).
pub fn basis_domain(i: usize) -> usize {
    (i * 7 + 3) % DOMAINS.len()
}

pub fn planted_fixture(cfg: &PlantedFixtureConfig) -> Result<PlantedFixture> {
    if cfg.n_features < cfg.d_model {
        return Err(config_err!("fixture needs F ≥ d to hold the planted basis"));
    }
    let variant = cfg.variant_seed.unwrap_or(cfg.seed);
    let spec = PlantedSpec::random_adjacent(cfg.seed, cfg.n_layers, cfg.d_model, cfg.n_edges, cfg.weight_range, cfg.vocab, cfg.max_active)?;
    let model = build_planted_model(&spec, cfg.n_layers, cfg.d_model, variant)?;
    let saes = (0..cfg.n_layers)
        .map(|l| {
            let mut sae = synthesize_sae_with_basis(variant, l, &spec.bases[l], cfg.n_features, cfg.k)?;
            sae.b_enc[spec.bases[l].cols..].fill(cfg.extra_feature_bias);
            Ok(sae)
        })
        .collect::<Result<SaeSet>>()?;
    let kind = if cfg.multi_tissue { CellKind::MultiTissueLike } else { CellKind::K562Like };
    let batch = generate_cells(variant, cfg.n_cells, cfg.seq_len, cfg.vocab, kind)?;
    let domain_genes = domain_gene_sets();
    let catalog = planted_catalog(cfg, &spec, &domain_genes, variant)?;
    Ok(PlantedFixture { config: cfg.clone(), spec, model, saes, catalog, batch, domain_genes })
}

fn planted_catalog(
    cfg: &PlantedFixtureConfig,
    spec: &PlantedSpec,
    domain_genes: &BTreeMap<String, Vec<String>>,
    variant: u64,
) -> Result<AnnotationCatalog> {
    let mut rng = seeded(variant, 0xca7a);
    let mut catalog = AnnotationCatalog::new();
    let planted_sources: Vec<FeatureId> = spec.edges.iter().map(|e| e.source).collect();
    for layer in 0..cfg.n_layers {
        for i in 0..cfg.n_features {
            let f = FeatureId::new(layer, i);
            let (domain, p) = if i < cfg.d_model {
                let p = if planted_sources.contains(&f) { 1e-12 } else { 1e-4 };
                (basis_domain(i), p)
            } else if rng.random_bool(0.5) {
                (rng.random_range(0..DOMAINS.len()), 1e-2)
            } else {
                continue;
            };
            let name = DOMAINS[domain];
            catalog.add_annotation(f, Ontology::GoBp, name, p)?;
            catalog.add_annotation(f, Ontology::Kegg, format!("hsa{:05}", 4000 + domain * 10), p * 100.0)?;
            if rng.random_bool(0.5) {
                catalog.add_annotation(f, Ontology::Reactome, format!("R-HSA-{}", 100_000 + domain), 0.01)?;
            }
            if rng.random_bool(0.3) {
                let other = rng.random_range(0..DOMAINS.len());
                catalog.add_annotation(f, Ontology::String, format!("CL:{}", other), 0.02)?;
            }
            if rng.random_bool(0.2) {
                catalog.add_annotation(f, Ontology::Trrust, format!("TF{}", domain % 8), 0.03)?;
            }
            let mut genes = domain_genes[name].clone();
            shuffle(&mut rng, &mut genes);
            genes.truncate(10);
            catalog.set_genes(f, genes.into_iter().enumerate().map(|(r, g)| (r + 1, g)).collect())?;
        }
    }
    Ok(catalog)
}

impl PlantedFixture {
    /// `⟨dec_target, M · dec_source⟩`: how strongly a state change along the
    /// source's decoder direction reaches the target's direction, where `M`
    /// chains every transition in between.
    pub fn coupling(&self, source: FeatureId, target: FeatureId) -> f32 {
        let ModelBody::Planted(layers) = &self.model.body else { unreachable!("planted fixture") };
        let d = self.model.d_model;
        let m: Matrix = chained_map(layers, source.layer, target.layer, d);
        let s = self.saes.get(source.layer).expect("fixture SAE").decoder_column(source.index);
        let t = self.saes.get(target.layer).expect("fixture SAE").decoder_column(target.index);
        dot(t, &m.matvec(s))
    }

    /// Planted source features at `layer`.
    pub fn planted_sources(&self, layer: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.spec.edges.iter().filter(|e| e.source.layer == layer).map(|e| e.source.index).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
