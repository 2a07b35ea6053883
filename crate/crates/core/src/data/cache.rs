//! Preprocessed splits on disk: `<split>.jsonl` of datapoints plus a
//! `manifest.json` recording how they were produced.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    build_corpus, build_vocabularies, load_with, Corpus, Datapoint, PreprocessConfig, RecordAdapter, Tokenizer,
    Vocabularies, SORT_ORDER,
};
use crate::error::{Error, Result};
use crate::graph::ConversionRules;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub name: String,
    pub examples: usize,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub sort_order: String,
    pub config: PreprocessConfig,
    pub rules: ConversionRules,
    pub vocab: Vocabularies,
    pub splits: Vec<Split>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Invalid(format!(
                "{}: manifest version {} (expected {MANIFEST_VERSION})",
                path.display(),
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn split_path(dir: impl AsRef<Path>, split: &str) -> PathBuf {
        dir.as_ref().join(format!("{split}.jsonl"))
    }
}

pub fn write_split(path: impl AsRef<Path>, datapoints: &[Arc<Datapoint>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for dp in datapoints {
        serde_json::to_writer(&mut out, dp.as_ref())?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_split(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut datapoints = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let dp: Datapoint = serde_json::from_str(line).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        datapoints.push(dp);
    }
    Ok(Corpus::from_datapoints(datapoints))
}

/// Preprocesses every `*.jsonl` split in `input` into `output`.
///
/// Conversion rules and vocabularies come from the `train` split when there
/// is one, otherwise from all splits together. Records are read through
/// `adapter`.
pub fn preprocess_dir(
    input: &Path,
    output: &Path,
    config: &PreprocessConfig,
    seed: u64,
    tokenizer: &dyn Tokenizer,
    adapter: &dyn RecordAdapter,
) -> Result<Manifest> {
    let mut names = Vec::new();
    for entry in fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let path = entry.map_err(|e| Error::io(input, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::Invalid(format!("no .jsonl splits in {}", input.display())));
    }
    let mut raw = Vec::new();
    for name in &names {
        raw.push(load_with(Manifest::split_path(input, name), adapter)?);
    }
    let reference: Vec<_> = match names.iter().position(|n| n == "train") {
        Some(i) => raw[i].clone(),
        None => raw.concat(),
    };
    let rules = config.rules(&reference);
    let mut corpora = Vec::new();
    for examples in &raw {
        corpora.push(build_corpus(examples, &rules, config.apply_mode(), tokenizer)?);
    }
    let vocab = match names.iter().position(|n| n == "train") {
        Some(i) => build_vocabularies(corpora[i].datapoints.iter().map(Arc::as_ref), tokenizer),
        None => build_vocabularies(
            corpora.iter().flat_map(|c| c.datapoints.iter().map(Arc::as_ref)),
            tokenizer,
        ),
    };
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let mut splits = Vec::new();
    for (name, corpus) in names.iter().zip(&corpora) {
        write_split(Manifest::split_path(output, name), &corpus.datapoints)?;
        splits.push(Split {
            name: name.clone(),
            examples: corpus.datapoints.len(),
            trajectories: corpus.trajectories.len(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed,
        sort_order: SORT_ORDER.to_string(),
        config: config.clone(),
        rules,
        vocab,
        splits,
    };
    let path = output.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
