// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tab- and comma-separated tables and small JSON inputs.
//!
//! Every table starts with optional `# key=value` metadata lines and a
//! mandatory header row.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use circuitscope_core::knowledge::{AnnotationCatalog, Ontology};
use circuitscope_core::model::CellBatch;
use circuitscope_core::validate::{PerturbationRow, PerturbationTable};
use circuitscope_core::FeatureId;

use crate::error::{Error, IoContext, Result};

/// Rows of one table with their metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { meta: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, delimiter: u8) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"));
        out
    }

    pub fn parse(text: &str, delimiter: u8, path: &Path) -> Result<Self> {
        let mut meta = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let (k, v) = rest
                .trim_end_matches(['\n', '\r'])
                .split_once('=')
                .ok_or_else(|| Error::format(path, "metadata line is not key=value"))?;
            meta.push((k.to_string(), v.to_string()));
            body_start += line.len();
        }
        let mut r = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).from_reader(text[body_start..].as_bytes());
        let header: Vec<String> = r.headers().at(path)?.iter().map(String::from).collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(Error::format(path, "missing header row"));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<csv::Result<Vec<Vec<String>>>>()
            .at(path)?;
        Ok(Self { meta, header, rows })
    }

    pub fn read(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).at(path)?, delimiter, path)
    }

    pub fn write(&self, path: &Path, delimiter: u8) -> Result<()> {
        crate::write_text(path, &self.render(delimiter))
    }

    /// Checks the header and returns column positions in `expected` order.
    pub fn require(&self, path: &Path, expected: &[&str]) -> Result<Vec<usize>> {
        expected
            .iter()
            .map(|name| {
                self.header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::format(path, format!("missing column {name}")))
            })
            .collect()
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    table.write(path, b',')
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, col: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::format(path, format!("row {}: bad {col} {s:?}", row + 1)))
}

/// Reads `annotations.tsv` and, when given, `gene_lists.tsv` into one catalog.
pub fn read_catalog(annotations: &Path, gene_lists: Option<&Path>) -> Result<AnnotationCatalog> {
    let mut catalog = AnnotationCatalog::new();
    let t = Table::read(annotations, b'\t')?;
    let cols = t.require(annotations, &["feature_id", "ontology", "term", "p_value"])?;
    for (i, r) in t.rows.iter().enumerate() {
        let f: FeatureId = parse_field(annotations, i, "feature_id", &r[cols[0]])?;
        let o: Ontology = parse_field(annotations, i, "ontology", &r[cols[1]])?;
        let p: f64 = parse_field(annotations, i, "p_value", &r[cols[3]])?;
        catalog.add_annotation(f, o, r[cols[2]].clone(), p)?;
    }
    if let Some(path) = gene_lists {
        let t = Table::read(path, b'\t')?;
        let cols = t.require(path, &["feature_id", "rank", "gene"])?;
        let mut lists: BTreeMap<FeatureId, Vec<(usize, String)>> = BTreeMap::new();
        for (i, r) in t.rows.iter().enumerate() {
            let f: FeatureId = parse_field(path, i, "feature_id", &r[cols[0]])?;
            let rank: usize = parse_field(path, i, "rank", &r[cols[1]])?;
            lists.entry(f).or_default().push((rank, r[cols[2]].clone()));
        }
        for (f, ranked) in lists {
            catalog.set_genes(f, ranked)?;
        }
    }
    Ok(catalog)
}

pub fn write_catalog(annotations: &Path, gene_lists: &Path, catalog: &AnnotationCatalog, seed: u64) -> Result<()> {
    let mut a = Table::new(&["feature_id", "ontology", "term", "p_value"]).with_meta("seed", seed);
    let mut g = Table::new(&["feature_id", "rank", "gene"]).with_meta("seed", seed);
    for (f, fa) in catalog.iter() {
        for ann in &fa.annotations {
            a.push(vec![f.to_string(), ann.ontology.as_str().into(), ann.term.clone(), ann.p_value.to_string()]);
        }
        for (r, gene) in fa.genes.iter().enumerate() {
            g.push(vec![f.to_string(), (r + 1).to_string(), gene.clone()]);
        }
    }
    a.write(annotations, b'\t')?;
    g.write(gene_lists, b'\t')
}

/// `domain_genes.tsv`: one `term, gene` row per membership.
pub fn read_domain_genes(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let t = Table::read(path, b'\t')?;
    let cols = t.require(path, &["term", "gene"])?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &t.rows {
        out.entry(r[cols[0]].clone()).or_default().push(r[cols[1]].clone());
    }
    Ok(out)
}

pub fn write_domain_genes(path: &Path, sets: &BTreeMap<String, Vec<String>>, seed: u64) -> Result<()> {
    let mut t = Table::new(&["term", "gene"]).with_meta("seed", seed);
    for (term, genes) in sets {
        for g in genes {
            t.push(vec![term.clone(), g.clone()]);
        }
    }
    t.write(path, b'\t')
}

/// `keywords.json` and `disease_keywords.json`: an object of keyword lists.
pub fn read_keywords(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    serde_json::from_str(&fs::read_to_string(path).at(path)?).at(path)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).at(path)?;
    crate::write_text(path, &(text + "\n"))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(path).at(path)?).at(path)
}

pub fn read_perturbations(path: &Path) -> Result<PerturbationTable> {
    let t = Table::read(path, b'\t')?;
    let cols = t.require(path, &["perturbed_gene", "response_gene", "lfc"])?;
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(PerturbationRow {
                perturbed_gene: r[cols[0]].clone(),
                response_gene: r[cols[1]].clone(),
                lfc: parse_field(path, i, "lfc", &r[cols[2]])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationTable::new(rows)?)
}

pub fn write_perturbations(path: &Path, table: &PerturbationTable, seed: u64) -> Result<()> {
    let mut t = Table::new(&["perturbed_gene", "response_gene", "lfc"]).with_meta("seed", seed);
    for r in table.rows() {
        t.push(vec![r.perturbed_gene, r.response_gene, r.lfc.to_string()]);
    }
    t.write(path, b'\t')
}

pub fn read_cells(path: &Path) -> Result<CellBatch> {
    let batch: CellBatch = read_json(path)?;
    batch.validate()?;
    Ok(batch)
}
