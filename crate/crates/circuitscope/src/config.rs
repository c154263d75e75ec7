// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: a flat `key = value [unit]` text file.
//!
//! ```text
//! # K562-like cells through model A
//! condition = gf/k562/k562
//! model = model.json
//! sae_dir = saes
//! annotations = annotations.tsv
//! gene_lists = gene_lists.tsv
//! cells = cells.json
//! seed = 7
//! source_layers = 0, 1, 2, 3, 4
//! sources_per_layer = 30 features
//! n_cells = 200 cells
//! d_threshold = 0.5 sd
//! consistency_threshold = 0.7 fraction
//! checkpoint_every = 50 cells
//! ```
//!
//! Paths are relative to the config file. Units are optional, but when
//! present must match the key. The only environment input is
//! [`OUTPUT_DIR_ENV`], which relocates outputs to `$OUTPUT_DIR_ENV/<stem>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use circuitscope_core::graph::Condition;
use circuitscope_core::sae::SaeDictionary;
use circuitscope_core::tracer::{SaeSet, TraceConfig};

use crate::error::{Error, IoContext, Result};

pub const OUTPUT_DIR_ENV: &str = "CIRCUITSCOPE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The config file itself.
    pub path: PathBuf,
    pub condition: Condition,
    pub model: PathBuf,
    /// Per-layer SAE manifests.
    pub saes: BTreeMap<usize, PathBuf>,
    pub annotations: PathBuf,
    pub gene_lists: Option<PathBuf>,
    pub cells: PathBuf,
    pub seed: u64,
    pub trace: TraceConfig,
    pub threads: Option<usize>,
    output_dir: Option<PathBuf>,
}

fn units(key: &str) -> Option<&'static str> {
    match key {
        "n_cells" | "checkpoint_every" => Some("cells"),
        "sources_per_layer" => Some("features"),
        "d_threshold" => Some("sd"),
        "consistency_threshold" => Some("fraction"),
        "threads" => Some("threads"),
        _ => None,
    }
}

fn err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}:{line}: {msg}", path.display()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let cfg = Self::parse(&text, path)?;
        let inputs = [&cfg.model, &cfg.annotations, &cfg.cells].into_iter().chain(&cfg.gene_lists).chain(cfg.saes.values());
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("{}: missing input file {}", path.display(), p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(path, i + 1, "expected key = value"))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if kv.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(err(path, i + 1, format!("duplicate key {k}")));
            }
        }

        let mut take = |key: &str| kv.remove(key);
        let value = |key: &str, entry: (usize, String)| -> Result<String> {
            let (line, v) = entry;
            match (units(key), v.split_whitespace().collect::<Vec<_>>().as_slice()) {
                (Some(unit), [num, u]) if *u == unit => Ok(num.to_string()),
                (Some(unit), [_, u]) => Err(err(path, line, format!("{key} takes unit {unit:?}, got {u:?}"))),
                (_, [num]) => Ok(num.to_string()),
                _ if units(key).is_none() => Ok(v),
                _ => Err(err(path, line, format!("malformed value for {key}"))),
            }
        };
        fn num<T: std::str::FromStr>(path: &Path, key: &str, line: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| err(path, line, format!("{key}: cannot parse {s:?}")))
        }
        let required = |key: &str, e: Option<(usize, String)>| {
            e.ok_or_else(|| Error::Config(format!("{}: missing key {key}", path.display())))
        };

        let (line, cond) = required("condition", take("condition"))?;
        let condition: Condition = cond.parse().map_err(|e| err(path, line, e))?;
        let model = base.join(required("model", take("model"))?.1);
        let annotations = base.join(required("annotations", take("annotations"))?.1);
        let cells = base.join(required("cells", take("cells"))?.1);
        let gene_lists = take("gene_lists").map(|(_, v)| base.join(v));
        let output_dir = take("output_dir").map(|(_, v)| base.join(v));

        // Multi-threaded unless the file or the command line asks otherwise.
        let mut trace = TraceConfig { deterministic: false, ..TraceConfig::default() };
        if let Some(e) = take("source_layers") {
            let line = e.0;
            trace.source_layers = e
                .1
                .split(',')
                .map(|s| num(path, "source_layers", line, s.trim()))
                .collect::<Result<_>>()?;
        }
        let mut seed = 0;
        let mut threads = None;
        for key in ["seed", "sources_per_layer", "n_cells", "d_threshold", "consistency_threshold", "checkpoint_every", "deterministic", "threads"] {
            let Some(e) = take(key) else { continue };
            let line = e.0;
            let v = value(key, e)?;
            match key {
                "seed" => seed = num(path, key, line, &v)?,
                "sources_per_layer" => trace.sources_per_layer = num(path, key, line, &v)?,
                "n_cells" => trace.n_cells = num(path, key, line, &v)?,
                "d_threshold" => trace.d_threshold = num(path, key, line, &v)?,
                "consistency_threshold" => trace.consistency_threshold = num(path, key, line, &v)?,
                "checkpoint_every" => trace.checkpoint_every = num(path, key, line, &v)?,
                "deterministic" => trace.deterministic = num(path, key, line, &v)?,
                "threads" => threads = Some(num::<usize>(path, key, line, &v)?).filter(|&t| t > 0),
                _ => unreachable!(),
            }
        }

        let mut saes = BTreeMap::new();
        let sae_dir = take("sae_dir").map(|(_, v)| base.join(v));
        let sae_keys: Vec<String> = kv.keys().filter(|k| k.starts_with("sae.")).cloned().collect();
        for k in sae_keys {
            let (line, v) = kv.remove(&k).expect("listed key");
            let layer: usize = num(path, &k, line, &k["sae.".len()..])?;
            saes.insert(layer, base.join(v));
        }
        if let Some(dir) = sae_dir {
            let entries = fs::read_dir(&dir).at(&dir)?;
            for entry in entries {
                let p = entry.at(&dir)?.path();
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if let Some(layer) = name.strip_prefix("sae_L").and_then(|n| n.strip_suffix(".json")).and_then(|n| n.parse().ok()) {
                    saes.entry(layer).or_insert(p);
                }
            }
        }
        if let Some((k, (line, _))) = kv.into_iter().next() {
            return Err(err(path, line, format!("unknown key {k}")));
        }
        if saes.is_empty() {
            return Err(Error::Config(format!("{}: no SAE files (set sae_dir or sae.<layer>)", path.display())));
        }
        trace.validate()?;
        Ok(Self {
            path: path.to_path_buf(),
            condition,
            model,
            saes,
            annotations,
            gene_lists,
            cells,
            seed,
            trace,
            threads,
            output_dir,
        })
    }

    pub fn stem(&self) -> String {
        self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
    }

    /// Output directory, honouring [`OUTPUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        if let Some(base) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(base).join(self.stem());
        }
        self.output_dir.clone().unwrap_or_else(|| self.path.parent().unwrap_or(Path::new(".")).join(self.stem()))
    }

    pub fn edges_path(&self) -> PathBuf {
        self.output_dir().join("edges.csv")
    }

    pub fn load_saes(&self) -> Result<SaeSet> {
        self.saes
            .iter()
            .map(|(&layer, p)| {
                let sae: SaeDictionary = crate::tensor::read_sae(p)?;
                if sae.layer != layer {
                    return Err(Error::Config(format!("{} holds layer {}, configured as {layer}", p.display(), sae.layer)));
                }
                Ok(sae)
            })
            .collect()
    }

    pub fn load_catalog(&self) -> Result<circuitscope_core::knowledge::AnnotationCatalog> {
        crate::tables::read_catalog(&self.annotations, self.gene_lists.as_deref())
    }
}

/// Renders a config that [`RunConfig::parse`] reads back.
pub fn render_config(
    condition: &Condition,
    seed: u64,
    trace: &TraceConfig,
    files: &[(&str, &str)],
) -> String {
    let mut s = format!("# generated by circuitscope synth\ncondition = {condition}\nseed = {seed}\n");
    for (k, v) in files {
        s.push_str(&format!("{k} = {v}\n"));
    }
    let layers: Vec<String> = trace.source_layers.iter().map(|l| l.to_string()).collect();
    s.push_str(&format!("source_layers = {}\n", layers.join(", ")));
    s.push_str(&format!("sources_per_layer = {} features\n", trace.sources_per_layer));
    s.push_str(&format!("n_cells = {} cells\n", trace.n_cells));
    s.push_str(&format!("d_threshold = {} sd\n", trace.d_threshold));
    s.push_str(&format!("consistency_threshold = {} fraction\n", trace.consistency_threshold));
    s.push_str(&format!("checkpoint_every = {} cells\n", trace.checkpoint_every));
    s
}
