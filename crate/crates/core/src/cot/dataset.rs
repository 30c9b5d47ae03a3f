//! JSONL dataset writing with a content-addressed manifest.
//!
//! Layout under the output root:
//!
//! ```text
//! manifest.json
//! data/<task>/<split>_<format>.jsonl
//! images/<task>/<split>/<id>/input_<k>.png
//! images/<task>/<split>/<id>/<format>_<k>.png
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::render::{decode, render, StateView};
use super::trace::{build_cot, input_states, prompt, CotSegment, WmFormat, IMAGE_TOKEN};
use super::{CotError, RasterImage, Result};
use crate::envs::{self, Answer, Params, Split, Task, World};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub task: Task,
    pub split: Split,
    pub wm_format: WmFormat,
    pub params: Params,
    pub question: String,
    pub answer: Answer,
    /// Input images first, then chain-of-thought images, relative to the root.
    pub images: Vec<String>,
    pub cot: Vec<CotSegment>,
    pub cot_text: String,
    pub seed: u64,
    pub world: World,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task: Task,
    pub split: Split,
    pub wm_format: WmFormat,
    pub count: usize,
    pub master_seed: u64,
    pub resolution: u32,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub split_rule: String,
    /// Keyed by `<task>/<split>/<format>`.
    pub entries: BTreeMap<String, ManifestEntry>,
    pub files: usize,
    /// SHA-256 over the sorted data and image files.
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub out_dir: PathBuf,
    pub tasks: Vec<Task>,
    pub split: Split,
    pub count: usize,
    pub formats: Vec<WmFormat>,
    pub master_seed: u64,
    pub resolution: u32,
    pub params: Params,
}

/// Seed of instance `index` of `(task, split)`.
pub fn instance_seed(master: u64, task: Task, split: Split, index: usize) -> u64 {
    let split_bit = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    seed::derive(master, 16 + 2 * task.stream() + split_bit, index as u32)
}

/// Formats that exist for `task` among `requested`.
pub fn formats_for(task: Task, requested: &[WmFormat]) -> Vec<WmFormat> {
    requested
        .iter()
        .copied()
        .filter(|&f| f != WmFormat::Verbal || task.supports_verbal())
        .collect()
}

pub struct Rendered {
    pub records: Vec<Record>,
    /// `(relative path, png bytes)`.
    pub images: Vec<(String, Vec<u8>)>,
}

fn png_of(state: &StateView, resolution: u32) -> Result<Vec<u8>> {
    render(state, resolution)?.to_png()
}

/// All records (one per format) and images for one instance.
pub fn render_instance(inst: &envs::TaskInstance, formats: &[WmFormat], resolution: u32) -> Result<Rendered> {
    let dir = format!("images/{}/{}/{}", inst.task, inst.split, inst.id);
    let mut images = Vec::new();
    let mut inputs = Vec::new();
    for (k, s) in input_states(&inst.world)?.iter().enumerate() {
        let path = format!("{dir}/input_{k}.png");
        images.push((path.clone(), png_of(s, resolution)?));
        inputs.push(path);
    }
    let question = prompt(inst, inputs.len());
    let mut records = Vec::new();
    for &format in formats {
        let mut built = build_cot(inst, format)?;
        let mut paths = Vec::new();
        for (k, s) in built.images.iter().enumerate() {
            let path = format!("{dir}/{format}_{k}.png");
            images.push((path.clone(), png_of(s, resolution)?));
            paths.push(path);
        }
        built.trace.bind_images(&paths)?;
        records.push(Record {
            id: inst.id.clone(),
            task: inst.task,
            split: inst.split,
            wm_format: format,
            params: inst.params.clone(),
            question: question.clone(),
            answer: inst.answer.clone(),
            images: inputs.iter().chain(&paths).cloned().collect(),
            cot_text: built.trace.text(),
            cot: built.trace.segments,
            seed: inst.seed,
            world: inst.world.clone(),
        });
    }
    Ok(Rendered { records, images })
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Generates, renders and writes `cfg.count` instances of every task, then
/// merges the result into `manifest.json`.
pub fn write_dataset(cfg: &DatasetConfig) -> Result<Manifest> {
    if cfg.formats.is_empty() || cfg.tasks.is_empty() {
        return Err(CotError::Config("nothing to generate: no tasks or formats".into()));
    }
    let root = &cfg.out_dir;
    fs::create_dir_all(root)?;
    let mut manifest = load_manifest(root)?.unwrap_or_else(|| Manifest {
        split_rule: seed::SPLIT_RULE.into(),
        entries: BTreeMap::new(),
        files: 0,
        digest: String::new(),
    });
    for &task in &cfg.tasks {
        let formats = formats_for(task, &cfg.formats);
        if formats.is_empty() {
            return Err(CotError::Config(format!("{task} supports none of the requested formats")));
        }
        let rendered: Vec<Result<Rendered>> = (0..cfg.count)
            .into_par_iter()
            .map(|i| {
                let s = instance_seed(cfg.master_seed, task, cfg.split, i);
                let inst = envs::generate(task, cfg.split, s, &cfg.params)?;
                render_instance(&inst, &formats, cfg.resolution)
            })
            .collect();
        let mut per_format: BTreeMap<WmFormat, Vec<Record>> = BTreeMap::new();
        for r in rendered {
            let r = r?;
            for (rel, bytes) in &r.images {
                write_file(root, rel, bytes)?;
            }
            for rec in r.records {
                per_format.entry(rec.wm_format).or_default().push(rec);
            }
        }
        for f in formats {
            let recs = per_format.remove(&f).unwrap_or_default();
            let rel = format!("data/{task}/{}_{f}.jsonl", cfg.split);
            let path = root.join(&rel);
            fs::create_dir_all(path.parent().expect("has parent"))?;
            let mut w = BufWriter::new(fs::File::create(&path)?);
            for rec in &recs {
                serde_json::to_writer(&mut w, rec)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            manifest.entries.insert(
                format!("{task}/{}/{f}", cfg.split),
                ManifestEntry {
                    task,
                    split: cfg.split,
                    wm_format: f,
                    count: recs.len(),
                    master_seed: cfg.master_seed,
                    resolution: cfg.resolution,
                    path: rel,
                },
            );
        }
    }
    let (files, digest) = dataset_digest(root)?;
    manifest.files = files;
    manifest.digest = digest;
    fs::write(root.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_manifest(root: &Path) -> Result<Option<Manifest>> {
    let path = root.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// File count and digest over everything under `data/` and `images/`.
pub fn dataset_digest(root: &Path) -> Result<(usize, String)> {
    let mut files = Vec::new();
    walk(&root.join("data"), &mut files)?;
    walk(&root.join("images"), &mut files)?;
    let mut rel: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| {
            let r = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            (r, p)
        })
        .collect();
    rel.sort();
    let mut h = Sha256::new();
    for (r, p) in &rel {
        h.update(r.as_bytes());
        h.update([0]);
        h.update(Sha256::digest(fs::read(p)?));
    }
    Ok((rel.len(), hex::encode(h.finalize())))
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Structural checks of one record against the files under `root`: image
/// placeholders match the image list, every image decodes to the state its
/// metadata names, and the stored answer is what the world solves to.
pub fn check_record(rec: &Record, root: &Path) -> Result<()> {
    let placeholders = rec.question.matches(IMAGE_TOKEN).count() + rec.cot_text.matches(IMAGE_TOKEN).count();
    if placeholders != rec.images.len() {
        return Err(CotError::Config(format!(
            "{}: {placeholders} image placeholders for {} images",
            rec.id,
            rec.images.len()
        )));
    }
    for rel in &rec.images {
        let img = RasterImage::from_png(&fs::read(root.join(rel))?)?;
        let state = decode(&img)?;
        if state.task() != rec.task || state.digest() != img.meta.digest {
            return Err(CotError::Decode(format!("{rel} does not decode to the state it was rendered from")));
        }
    }
    if rec.world.solve()? != rec.answer {
        return Err(CotError::Config(format!("{}: stored answer disagrees with the solver", rec.id)));
    }
    Ok(())
}
