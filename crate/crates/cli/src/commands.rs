//! Command implementations.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use tablestruct::formats::{
    encode_bundle, load_bundle, read_json, read_map, BoxList, BoxRecord, FormatError, PredictionBundle,
};
use tablestruct::mask_targets::{gpma_targets, lpma_targets};
use tablestruct::metrics::{relation_counts, teds_struct, RelationCounts, RelationSet};
use tablestruct::recovery::{recover as recover_grid, BoxInput, RecoveryConfig};
use tablestruct::refine::{refine_proposal, GlobalContext, RefineConfig, SideStatus};
use tablestruct::synth::{corrupt_predictions, generate_table, NoiseConfig, SynthConfig};
use tablestruct::table_model::derive_aligned_boxes;
use tablestruct::{CellId, Rect, ScalarMap, TableAnnotation, TableGrid};

use crate::corpus::{
    annotation_path, bundle_path, combine, is_corpus, read_manifest, remove_stale, report_path, write_atomic,
    write_json, Manifest, Member, MemberReport, RunReport, StageError, MANIFEST, RNG_NAME,
};
use crate::{EvalArgs, EvalOpts, GridFormat, PipelineArgs, RecoverArgs, RecoverOpts, RefineArgs, RefineOpts};
use crate::{SynthArgs, TargetsArgs};

type Outcome = Result<Value, StageError>;

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building the worker pool")
}

/// Runs `f` on every member in parallel; results keep manifest order.
fn for_members<F>(jobs: usize, names: &[String], f: F) -> Result<Vec<(MemberReport, u8)>>
where
    F: Fn(&str) -> Outcome + Sync,
{
    let results = pool(jobs)?.install(|| names.par_iter().map(|n| MemberReport::new(n, f(n))).collect());
    Ok(results)
}

fn finish<C: Serialize>(command: &'static str, config: &C, report: &Path, members: Vec<(MemberReport, u8)>) -> Result<u8> {
    let exit_code = combine(members.iter().map(|m| m.1));
    for (m, _) in &members {
        if let Some(e) = &m.error {
            eprintln!("{command}: {}: {e}", m.name);
        }
    }
    let report_body = RunReport {
        command,
        config,
        exit_code,
        members: members.into_iter().map(|m| m.0).collect(),
    };
    write_json(report, &report_body)?;
    Ok(exit_code)
}

fn member_names(corpus: &Path) -> Result<Vec<String>> {
    let manifest = read_manifest(corpus)?;
    Ok(manifest.members.into_iter().map(|m| m.name).collect())
}

fn read_annotation(path: &Path) -> Result<TableAnnotation<f64>, StageError> {
    let ann: TableAnnotation<f64> = read_json(path)?;
    ann.validate().map_err(|e| StageError::structure(format!("{}: {e}", path.display())))?;
    Ok(ann)
}

// ---------------------------------------------------------------- synth

impl SynthArgs {
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            rows: (self.min_rows, self.max_rows),
            cols: (self.min_cols, self.max_cols),
            span_prob: self.span_prob,
            empty_prob: self.empty_prob,
            noise: NoiseConfig {
                jitter: self.jitter,
                pyr_noise: self.pyr_noise,
                flip_rate: self.flip_rate,
            },
            ..SynthConfig::default()
        }
    }
}

fn synth_member(corpus: &Path, config: &SynthConfig, m: &Member) -> Outcome {
    let ann: TableAnnotation<f64> = generate_table(config, m.table_seed).map_err(StageError::structure)?;
    let aligned = derive_aligned_boxes(&ann).map_err(StageError::structure)?;
    let (proposals, global) =
        corrupt_predictions(&ann, &aligned, &config.noise, m.noise_seed).map_err(StageError::structure)?;
    write_atomic(&annotation_path(corpus, &m.name), ann.to_json().as_bytes())?;
    let bundle = bundle_path(corpus, &m.name);
    let dir = bundle.parent().expect("bundle lives in a directory");
    let (index, files) = encode_bundle(ann.image_width, ann.image_height, &proposals, Some(&global));
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
    }
    write_json(&bundle, &index)?;
    Ok(json!({
        "rows": ann.n_rows(),
        "cols": ann.n_cols(),
        "cells": ann.cells.len(),
        "empty_cells": ann.cells.iter().filter(|c| c.is_empty()).count(),
    }))
}

pub fn synth(a: &SynthArgs) -> Result<u8> {
    let config = a.synth_config();
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(a.seed);
    let members: Vec<Member> = (0..a.n)
        .map(|i| Member {
            name: format!("table_{i:05}"),
            table_seed: master.gen(),
            noise_seed: master.gen(),
        })
        .collect();
    let names: Vec<String> = members.iter().map(|m| m.name.clone()).collect();
    let reports = for_members(a.jobs, &names, |name| {
        let m = members.iter().find(|m| m.name == name).expect("known member");
        synth_member(&a.output, &config, m)
    })?;
    let manifest = Manifest {
        rng: RNG_NAME.to_string(),
        seed: a.seed,
        config,
        members,
    };
    write_json(&a.output.join(MANIFEST), &manifest)?;
    finish("synth", &json!({ "args": a, "synth_config": config }), &report_path(&a.output, "synth", true), reports)
}

// ---------------------------------------------------------------- targets

#[derive(Serialize)]
struct LocalEntry {
    id: CellId,
    proposal: Rect<f64>,
    text_rect: Rect<f64>,
    /// Pixel window `[x0, y0, x1, y1)` the maps cover.
    window: [i64; 4],
    mask: String,
    pyr_h: String,
    pyr_v: String,
}

#[derive(Serialize)]
struct TargetIndex {
    image_width: u32,
    image_height: u32,
    local: Vec<LocalEntry>,
    global: Value,
}

fn write_map(dir: &Path, name: &str, map: &ScalarMap<f64>, pgm: bool) -> Result<String, StageError> {
    let file = format!("{name}.map");
    write_atomic(&dir.join(&file), &map.to_bytes())?;
    if pgm {
        write_atomic(&dir.join(format!("{name}.pgm")), &map.to_pgm())?;
    }
    Ok(file)
}

fn targets_for(annotation: &Path, dir: &Path, pgm: bool) -> Outcome {
    let ann = read_annotation(annotation)?;
    let aligned = derive_aligned_boxes(&ann).map_err(StageError::structure)?;
    let mut local = Vec::new();
    for cell in &ann.cells {
        let Some(text) = cell.text_rect else { continue };
        let t = lpma_targets(aligned[&cell.id], text).map_err(|e| StageError::structure(format!("cell {}: {e}", cell.id)))?;
        let stem = format!("local_{}", cell.id);
        local.push(LocalEntry {
            id: cell.id,
            proposal: t.proposal,
            text_rect: t.text_rect,
            window: [t.window.x0, t.window.y0, t.window.x1, t.window.y1],
            mask: write_map(dir, &format!("{stem}_mask"), &t.mask, pgm)?,
            pyr_h: write_map(dir, &format!("{stem}_h"), &t.pyr_h, pgm)?,
            pyr_v: write_map(dir, &format!("{stem}_v"), &t.pyr_v, pgm)?,
        });
    }
    let g = gpma_targets(&ann, &aligned).map_err(StageError::structure)?;
    let global = json!({
        "seg": write_map(dir, "global_seg", &g.seg, pgm)?,
        "pyr_h": write_map(dir, "global_h", &g.pyr_h, pgm)?,
        "pyr_v": write_map(dir, "global_v", &g.pyr_v, pgm)?,
    });
    let n_local = local.len();
    let index = TargetIndex {
        image_width: ann.image_width,
        image_height: ann.image_height,
        local,
        global,
    };
    write_json(&dir.join("index.json"), &index)?;
    Ok(json!({ "local_targets": n_local }))
}

pub fn targets(a: &TargetsArgs) -> Result<u8> {
    if is_corpus(&a.input) {
        let names = member_names(&a.input)?;
        let reports = for_members(a.jobs, &names, |name| {
            targets_for(&annotation_path(&a.input, name), &a.output.join(name).join("targets"), a.pgm)
        })?;
        finish("targets", a, &report_path(&a.output, "targets", true), reports)
    } else {
        let result = targets_for(&a.input, &a.output, a.pgm);
        finish("targets", a, &report_path(&a.output, "targets", true), vec![MemberReport::new(&input_name(&a.input), result)])
    }
}

fn input_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

// ---------------------------------------------------------------- refine

impl RefineOpts {
    fn config(&self) -> Result<RefineConfig<f64>> {
        ensure!(
            self.seg_threshold > 0.0 && self.seg_threshold <= 1.0,
            "--seg-threshold must lie in (0, 1]"
        );
        ensure!(self.iterations >= 1, "--iterations must be at least 1");
        Ok(RefineConfig {
            seg_threshold: self.seg_threshold,
            iterations: self.iterations,
        })
    }
}

fn refine_file(bundle: &Path, output: &Path, config: &RefineConfig<f64>) -> Outcome {
    let loaded = load_bundle::<f64>(bundle)?;
    let ctx = loaded.global.as_ref().map(|g| GlobalContext::new(g, config.seg_threshold));
    let (w, h) = (loaded.image_width as usize, loaded.image_height as usize);
    let mut boxes = Vec::new();
    let mut failures = Vec::new();
    let mut sides = [0usize; 3];
    let (mut global_matches, mut fell_back) = (0, 0);
    for p in &loaded.proposals {
        match refine_proposal(p, ctx.as_ref(), w, h, config) {
            Ok(r) => {
                for s in r.sides {
                    sides[s as usize] += 1;
                }
                global_matches += usize::from(r.global_match);
                fell_back += usize::from(r.fell_back);
                boxes.push(BoxRecord::from(&r));
            }
            Err(e) => {
                failures.push(format!("proposal {}: {e}", p.id));
                boxes.push(BoxRecord {
                    id: p.id,
                    rect: p.bbox,
                    text_rect: Some(p.text_rect),
                    refinement: None,
                });
            }
        }
    }
    let list = BoxList {
        image_width: loaded.image_width,
        image_height: loaded.image_height,
        boxes,
    };
    write_json(output, &list)?;
    if !failures.is_empty() {
        return Err(StageError::Structure(format!(
            "kept unrefined boxes after errors: {}",
            failures.join("; ")
        )));
    }
    Ok(json!({
        "boxes": list.boxes.len(),
        "global_matches": global_matches,
        "fell_back": fell_back,
        "sides_refined": sides[SideStatus::Refined as usize],
        "sides_degenerate": sides[SideStatus::DegenerateFit as usize],
        "sides_wrong_slope": sides[SideStatus::WrongSlope as usize],
    }))
}

pub fn refine(a: &RefineArgs) -> Result<u8> {
    let config = a.opts.config()?;
    if is_corpus(&a.input) {
        let names = member_names(&a.input)?;
        let reports = for_members(a.jobs, &names, |name| {
            refine_file(&bundle_path(&a.input, name), &a.output.join(name).join("refined.json"), &config)
        })?;
        finish("refine", a, &report_path(&a.output, "refine", true), reports)
    } else {
        let result = refine_file(&a.input, &a.output, &config);
        finish("refine", a, &report_path(&a.output, "refine", false), vec![MemberReport::new(&input_name(&a.input), result)])
    }
}

// ---------------------------------------------------------------- recover

impl RecoverOpts {
    fn config(&self) -> Result<RecoveryConfig<f64>> {
        ensure!((0.0..=1.0).contains(&self.merge_ratio), "--merge-ratio must lie in [0, 1]");
        Ok(RecoveryConfig {
            merge_ratio: self.merge_ratio,
        })
    }
}

struct RecoverInput {
    image_width: u32,
    image_height: u32,
    boxes: Vec<BoxInput<f64>>,
    seg: Option<ScalarMap<f64>>,
}

fn from_box_list(list: BoxList<f64>) -> RecoverInput {
    RecoverInput {
        image_width: list.image_width,
        image_height: list.image_height,
        boxes: list
            .boxes
            .into_iter()
            .map(|b| BoxInput {
                id: b.id,
                rect: b.rect,
                text_rect: b.text_rect,
            })
            .collect(),
        seg: None,
    }
}

/// A box list or a prediction bundle, told apart by their top-level keys.
fn read_recover_input(path: &Path) -> Result<RecoverInput, StageError> {
    let value: Value = read_json(path)?;
    if value.get("proposals").is_some() {
        let b = load_bundle::<f64>(path)?;
        Ok(RecoverInput {
            image_width: b.image_width,
            image_height: b.image_height,
            boxes: b
                .proposals
                .iter()
                .map(|p| BoxInput {
                    id: p.id,
                    rect: p.bbox,
                    text_rect: Some(p.text_rect),
                })
                .collect(),
            seg: b.global.map(|g| g.seg),
        })
    } else {
        let list: BoxList<f64> = serde_json::from_value(value).map_err(|source| FormatError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(from_box_list(list))
    }
}

fn bundle_seg(bundle: &Path) -> Result<Option<ScalarMap<f64>>, StageError> {
    let b: PredictionBundle<f64> = read_json(bundle)?;
    let Some(g) = b.global else { return Ok(None) };
    let dir = bundle.parent().unwrap_or(Path::new("."));
    Ok(Some(read_map(&dir.join(g.seg))?))
}

fn recover_and_write(input: RecoverInput, outputs: &[(&Path, GridFormat)], config: &RecoveryConfig<f64>) -> Outcome {
    for (path, _) in outputs {
        remove_stale(path);
    }
    if let Some(seg) = &input.seg {
        if (seg.width(), seg.height()) != (input.image_width as usize, input.image_height as usize) {
            return Err(StageError::Structure("segmentation map does not match the image size".into()));
        }
    }
    let rec = recover_grid(&input.boxes, input.seg.as_ref(), input.image_width, input.image_height, config)
        .map_err(StageError::structure)?;
    for (path, format) in outputs {
        let text = match format {
            GridFormat::Json => {
                let mut s = rec.grid.to_json();
                s.push('\n');
                s
            }
            GridFormat::Html => rec.grid.to_html(),
        };
        write_atomic(path, text.as_bytes())?;
    }
    Ok(json!({
        "rows": rec.grid.n_rows(),
        "cols": rec.grid.n_cols(),
        "cells": rec.grid.cells.len(),
        "empty_cells": rec.grid.cells.iter().filter(|c| c.is_empty).count(),
        "merge": rec.merge,
    }))
}

pub fn recover(a: &RecoverArgs) -> Result<u8> {
    let config = a.opts.config()?;
    if is_corpus(&a.input) {
        let names = member_names(&a.input)?;
        let reports = for_members(a.jobs, &names, |name| {
            let dir = a.output.join(name);
            let list: BoxList<f64> = read_json(&dir.join("refined.json"))?;
            let mut input = from_box_list(list);
            input.seg = bundle_seg(&bundle_path(&a.input, name))?;
            let json_path = dir.join("grid.json");
            let html_path = dir.join("grid.html");
            let mut outputs = vec![(json_path.as_path(), GridFormat::Json)];
            if a.opts.format == GridFormat::Html {
                outputs.push((html_path.as_path(), GridFormat::Html));
            }
            recover_and_write(input, &outputs, &config)
        })?;
        finish("recover", a, &report_path(&a.output, "recover", true), reports)
    } else {
        let result = (|| {
            let mut input = read_recover_input(&a.input)?;
            if let Some(seg) = &a.seg {
                input.seg = Some(read_map(seg)?);
            }
            recover_and_write(input, &[(a.output.as_path(), a.opts.format)], &config)
        })();
        finish("recover", a, &report_path(&a.output, "recover", false), vec![MemberReport::new(&input_name(&a.input), result)])
    }
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize)]
struct DocScore {
    name: String,
    counts: RelationCounts,
    precision: f64,
    recall: f64,
    f1: f64,
    teds_struc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct CorpusScore {
    documents: usize,
    failed: usize,
    counts: RelationCounts,
    precision: f64,
    recall: f64,
    f1: f64,
    /// Mean over all documents; failed documents score 0.
    teds_struc: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EvalOutput {
    iou: f64,
    corpus: CorpusScore,
    documents: Vec<DocScore>,
}

impl EvalOpts {
    fn threshold(&self) -> Result<f64> {
        ensure!(self.iou > 0.0 && self.iou <= 1.0, "--iou must lie in (0, 1]");
        Ok(self.iou)
    }
}

/// Scores one document. A missing or invalid grid still yields a score
/// (nothing predicted, TEDS 0) alongside the error.
fn score_doc(name: &str, grid: &Path, gt: &Path, iou: f64) -> (DocScore, Result<(), StageError>) {
    let failed = |counts: RelationCounts, e: StageError| {
        let s = counts.score();
        (
            DocScore {
                name: name.to_string(),
                counts,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                teds_struc: 0.0,
                error: Some(e.to_string()),
            },
            Err(e),
        )
    };
    let ann = match read_annotation(gt) {
        Ok(a) => a,
        Err(e) => return failed(RelationCounts::default(), e),
    };
    let missing = RelationCounts {
        correct: 0,
        predicted: 0,
        ground_truth: RelationSet::from_annotation(&ann).relations.len(),
    };
    let pred: TableGrid<f64> = match read_json(grid) {
        Ok(g) => g,
        Err(e) => return failed(missing, e.into()),
    };
    let teds = match teds_struct(&pred, &ann) {
        Ok(t) => t,
        Err(e) => return failed(missing, StageError::structure(e)),
    };
    let counts = relation_counts(&pred, &ann, iou);
    let s = counts.score();
    (
        DocScore {
            name: name.to_string(),
            counts,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            teds_struc: teds,
            error: None,
        },
        Ok(()),
    )
}

fn summarize(iou: f64, documents: Vec<DocScore>) -> EvalOutput {
    let counts = documents.iter().fold(RelationCounts::default(), |acc, d| acc.add(d.counts));
    let s = counts.score();
    let n = documents.len();
    let teds = if n == 0 {
        0.0
    } else {
        documents.iter().map(|d| d.teds_struc).sum::<f64>() / n as f64
    };
    EvalOutput {
        iou,
        corpus: CorpusScore {
            documents: n,
            failed: documents.iter().filter(|d| d.error.is_some()).count(),
            counts,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            teds_struc: teds,
        },
        documents,
    }
}

fn doc_details(d: &DocScore) -> Value {
    json!({ "f1": d.f1, "teds_struc": d.teds_struc })
}

pub fn eval(a: &EvalArgs) -> Result<u8> {
    let iou = a.opts.threshold()?;
    let corpus = is_corpus(&a.input);
    let docs: Vec<(DocScore, Result<(), StageError>)> = if corpus {
        let names = member_names(&a.input)?;
        pool(a.jobs)?.install(|| {
            names
                .par_iter()
                .map(|n| score_doc(n, &a.output.join(n).join("grid.json"), &annotation_path(&a.input, n), iou))
                .collect()
        })
    } else {
        let Some(gt) = &a.gt else {
            bail!("--gt is required when --input is a single grid file");
        };
        vec![score_doc(&input_name(&a.input), &a.input, gt, iou)]
    };
    let (scores, results): (Vec<DocScore>, Vec<Result<(), StageError>>) = docs.into_iter().unzip();
    let reports = scores
        .iter()
        .zip(results)
        .map(|(d, r)| MemberReport::new(&d.name, r.map(|_| doc_details(d))))
        .collect();
    let output = summarize(iou, scores);
    let (out_path, report) = if corpus {
        (a.output.join("eval.json"), report_path(&a.output, "eval", true))
    } else {
        (a.output.clone(), report_path(&a.output, "eval", false))
    };
    write_json(&out_path, &output)?;
    finish("eval", a, &report, reports)
}

// ---------------------------------------------------------------- pipeline

pub fn pipeline(a: &PipelineArgs) -> Result<u8> {
    ensure!(is_corpus(&a.input), "{} is not a corpus directory (no {MANIFEST})", a.input.display());
    let t = targets(&TargetsArgs {
        input: a.input.clone(),
        output: a.output.clone(),
        pgm: a.pgm,
        jobs: a.jobs,
    })?;
    let r = refine(&RefineArgs {
        input: a.input.clone(),
        output: a.output.clone(),
        opts: a.refine.clone(),
        jobs: a.jobs,
    })?;
    let c = recover(&RecoverArgs {
        input: a.input.clone(),
        output: a.output.clone(),
        seg: None,
        opts: a.recover.clone(),
        jobs: a.jobs,
    })?;
    let e = eval(&EvalArgs {
        input: a.input.clone(),
        output: a.output.clone(),
        gt: None,
        opts: a.eval.clone(),
        jobs: a.jobs,
    })?;
    let exit_code = combine([t, r, c, e]);
    write_json(
        &report_path(&a.output, "pipeline", true),
        &json!({
            "command": "pipeline",
            "config": a,
            "exit_code": exit_code,
            "stages": { "targets": t, "refine": r, "recover": c, "eval": e },
        }),
    )?;
    Ok(exit_code)
}
