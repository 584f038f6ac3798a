//! Config-driven sweeps over {kind x latent size x steps x seeds},
//! persistence of run records, across-seed aggregation, ranking, and report
//! emission.
//!
//! Completed runs are keyed by a stable hash of their full configuration and
//! stored as append-only JSONL; re-running a finished sweep therefore
//! performs zero training steps, and the record set is identical for any
//! worker count.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{build_dataset, DatasetSpec, GroundTruthDataset};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_all, MetricConfig};
use crate::regularizers::{RegKind, RegularizerConfig};
use crate::training::{stream_rng, train, TrainConfig};

/// Partial regularizer hyper-parameter override applied on top of the
/// per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegOverride {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub c_max: Option<f64>,
    pub anneal_steps: Option<u64>,
    pub lambda_od: Option<f64>,
    pub lambda_d: Option<f64>,
}

impl RegOverride {
    pub fn apply(&self, cfg: &mut RegularizerConfig) {
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.c_max {
            cfg.c_max = v;
        }
        if let Some(v) = self.anneal_steps {
            cfg.anneal_steps = v;
        }
        if let Some(v) = self.lambda_od {
            cfg.lambda_od = v;
        }
        if let Some(v) = self.lambda_d {
            cfg.lambda_d = v;
        }
    }
}

/// Full description of one sweep: the grid axes, the shared training
/// template, metric protocol, and output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub dataset: DatasetSpec,
    pub kinds: Vec<RegKind>,
    pub latent_dims: Vec<usize>,
    pub step_counts: Vec<u64>,
    pub seeds: Vec<u64>,
    /// Template for everything the grid does not vary.
    pub base: TrainConfig,
    pub overrides: BTreeMap<String, RegOverride>,
    pub metrics: MetricConfig,
    pub out_dir: PathBuf,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty()
            || self.latent_dims.is_empty()
            || self.step_counts.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::Config("sweep grid axes must be non-empty".into()));
        }
        let unique: HashSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(Error::Config("sweep seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Advisory notes for grids far beyond desk scale.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(&s) = self.step_counts.iter().max() {
            if s > 100_000 {
                out.push(format!(
                    "step count {s} is far beyond desk scale; expect very long runtimes"
                ));
            }
        }
        if let Some(&d) = self.latent_dims.iter().max() {
            if d > 256 {
                out.push(format!(
                    "latent size {d} is far beyond desk scale; expect very long runtimes"
                ));
            }
        }
        out
    }
}

/// Stable hash of the canonical JSON of everything that determines a run's
/// outcome.
pub fn config_hash(dataset: &DatasetSpec, train: &TrainConfig, metrics: &MetricConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(dataset).expect("dataset serializes"));
    hasher.update(serde_json::to_vec(train).expect("train config serializes"));
    hasher.update(serde_json::to_vec(metrics).expect("metric config serializes"));
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One grid cell: a deterministic run id plus the full training config.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run_id: String,
    pub config: TrainConfig,
    pub config_hash: String,
}

/// Expands the grid in stable order: kinds, then latent dims, then step
/// counts, then seeds.
pub fn expand_sweep(spec: &SweepSpec) -> Result<Vec<PlannedRun>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &kind in &spec.kinds {
        for &latent in &spec.latent_dims {
            for &steps in &spec.step_counts {
                for &seed in &spec.seeds {
                    let mut config = spec.base.clone();
                    config.model.latent_dim = latent;
                    config.steps = steps;
                    config.seed = seed;
                    config.regularizer = RegularizerConfig::defaults_for(kind);
                    if let Some(ov) = spec.overrides.get(kind.as_str()) {
                        ov.apply(&mut config.regularizer);
                    }
                    config.validate()?;
                    let run_id = format!("{}_d{latent}_s{steps}_seed{seed}", kind.as_str());
                    let config_hash = config_hash(&spec.dataset, &config, &spec.metrics);
                    out.push(PlannedRun {
                        run_id,
                        config,
                        config_hash,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Scores of one completed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub factor_vae: f64,
    pub sap: f64,
    pub dci: f64,
    pub irs: f64,
    pub mig: f64,
    /// Final-step reconstruction loss.
    pub recon: f64,
    pub dci_completeness: f64,
    pub dci_informativeness: f64,
}

/// One row of the persisted results: either a scored run or an error row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config_hash: String,
    pub kind: String,
    pub latent_dim: usize,
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub scores: Option<RunScores>,
    #[serde(default)]
    pub error: Option<String>,
    pub wall_time: f64,
}

fn records_path(out_dir: &Path) -> PathBuf {
    out_dir.join("records.jsonl")
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

fn execute_run(
    dataset: &GroundTruthDataset,
    planned: &PlannedRun,
    metrics: &MetricConfig,
) -> RunRecord {
    let start = std::time::Instant::now();
    let outcome = (|| -> Result<RunScores> {
        let (model, trace) = train(dataset, &planned.config)?;
        let recon = trace.records.last().map_or(f64::NAN, |r| r.recon);
        let mut eval_rng: ChaCha8Rng = stream_rng(metrics.seed, planned.config.seed);
        let eval = evaluate_all(&model, dataset, metrics, &mut eval_rng)?;
        Ok(RunScores {
            factor_vae: eval.report.factor_vae,
            sap: eval.report.sap,
            dci: eval.report.dci,
            irs: eval.report.irs,
            mig: eval.report.mig,
            recon,
            dci_completeness: eval.dci_completeness,
            dci_informativeness: eval.dci_informativeness,
        })
    })();
    let wall_time = start.elapsed().as_secs_f64();
    let (scores, error) = match outcome {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RunRecord {
        run_id: planned.run_id.clone(),
        config_hash: planned.config_hash.clone(),
        kind: planned.config.regularizer.kind.as_str().to_string(),
        latent_dim: planned.config.model.latent_dim,
        steps: planned.config.steps,
        seed: planned.config.seed,
        scores,
        error,
        wall_time,
    }
}

/// Runs every grid cell that has no persisted record yet, with `workers`
/// parallel runs, then returns the complete record set sorted by run id.
/// Records append to `<out_dir>/records.jsonl` as runs finish; the appender
/// is the single writer.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<RunRecord>> {
    let planned = expand_sweep(spec)?;
    if planned.is_empty() {
        return Err(Error::Config("sweep expands to zero runs".into()));
    }
    std::fs::create_dir_all(&spec.out_dir)?;
    let path = records_path(&spec.out_dir);
    let existing = load_records(&path)?;
    let done: HashSet<String> = existing.iter().map(|r| r.config_hash.clone()).collect();
    let pending: Vec<&PlannedRun> = planned
        .iter()
        .filter(|p| !done.contains(&p.config_hash))
        .collect();

    let dataset = build_dataset(spec.dataset.clone())?;
    let mut records = existing;

    if !pending.is_empty() {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)?;
        let (tx, rx) = std::sync::mpsc::channel::<RunRecord>();
        let writer = std::thread::spawn(move || -> std::io::Result<Vec<RunRecord>> {
            let mut file = file;
            let mut new_records = Vec::new();
            for record in rx {
                let line = serde_json::to_string(&record).expect("record serializes");
                writeln!(file, "{line}")?;
                file.flush()?;
                new_records.push(record);
            }
            Ok(new_records)
        });

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            pending.par_iter().for_each_with(tx, |tx, planned| {
                let record = execute_run(&dataset, planned, &spec.metrics);
                // receiver outlives all senders; a failed send means the
                // writer already died and its error surfaces at join
                let _ = tx.send(record);
            });
        });
        let new_records = writer
            .join()
            .map_err(|_| Error::Config("sweep writer thread panicked".into()))?
            .map_err(Error::Io)?;
        records.extend(new_records);
    }

    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(records)
}

// --- aggregation and ranking -------------------------------------------------

pub const METRIC_COLUMNS: [&str; 6] = ["factor_vae", "sap", "dci", "irs", "mig", "recon"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupField {
    Kind,
    LatentDim,
    Steps,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct GroupKey {
    pub kind: Option<String>,
    pub latent_dim: Option<usize>,
    pub steps: Option<u64>,
}

impl GroupKey {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(k) = &self.kind {
            parts.push(k.clone());
        }
        if let Some(d) = self.latent_dim {
            parts.push(format!("d{d}"));
        }
        if let Some(s) = self.steps {
            parts.push(format!("s{s}"));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join("_")
        }
    }
}

/// Across-seed statistics for one grid cell: per-metric mean, and std when
/// at least two seeds contributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: GroupKey,
    pub n_seeds: usize,
    /// Means in [`METRIC_COLUMNS`] order.
    pub mean: [f64; 6],
    /// Sample std (n - 1 denominator); present only when n_seeds >= 2.
    pub std: Option<[f64; 6]>,
}

impl AggregateRow {
    /// Unweighted mean of the five metric scores (recon excluded).
    pub fn score_mean(&self) -> f64 {
        self.mean[..5].iter().sum::<f64>() / 5.0
    }
}

fn score_vector(s: &RunScores) -> [f64; 6] {
    [s.factor_vae, s.sap, s.dci, s.irs, s.mig, s.recon]
}

/// Groups scored records by the chosen fields and computes mean/std per
/// metric. Error rows are skipped. Empty input gives empty output.
pub fn aggregate(records: &[RunRecord], group_by: &[GroupField]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<GroupKey, Vec<[f64; 6]>> = BTreeMap::new();
    for r in records {
        let Some(scores) = &r.scores else { continue };
        let key = GroupKey {
            kind: group_by
                .contains(&GroupField::Kind)
                .then(|| r.kind.clone()),
            latent_dim: group_by
                .contains(&GroupField::LatentDim)
                .then_some(r.latent_dim),
            steps: group_by.contains(&GroupField::Steps).then_some(r.steps),
        };
        groups.entry(key).or_default().push(score_vector(scores));
    }
    groups
        .into_iter()
        .map(|(key, rows)| {
            let n = rows.len();
            let mut mean = [0.0f64; 6];
            for row in &rows {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v / n as f64;
                }
            }
            let std = (n >= 2).then(|| {
                let mut var = [0.0f64; 6];
                for row in &rows {
                    for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row) {
                        *v += (x - m) * (x - m) / (n - 1) as f64;
                    }
                }
                var.map(f64::sqrt)
            });
            AggregateRow {
                key,
                n_seeds: n,
                mean,
                std,
            }
        })
        .collect()
}

/// Orders rows by the unweighted mean of the five metric scores, descending;
/// ties go to the smaller configuration (latent dim, then steps, then kind).
/// Returns the ordered rows; the winner is the first.
pub fn rank_rows(rows: &[AggregateRow]) -> Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        return Err(Error::Schema("cannot rank an empty table".into()));
    }
    for row in rows {
        if row.mean[..5].iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "group '{}' is missing metric values",
                row.key.label()
            )));
        }
    }
    let mut ordered = rows.to_vec();
    ordered.sort_by(|a, b| {
        b.score_mean()
            .partial_cmp(&a.score_mean())
            .expect("finite means")
            .then_with(|| a.key.latent_dim.cmp(&b.key.latent_dim))
            .then_with(|| a.key.steps.cmp(&b.key.steps))
            .then_with(|| a.key.kind.cmp(&b.key.kind))
    });
    Ok(ordered)
}

// --- CSV emission --------------------------------------------------------------

/// One row of the results CSV; the exact column schema of the external
/// interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub kind: String,
    pub latent_dim: usize,
    pub steps: u64,
    pub seed: u64,
    pub factor_vae: f64,
    pub sap: f64,
    pub dci: f64,
    pub irs: f64,
    pub mig: f64,
    pub recon: f64,
    pub wall_time: f64,
}

impl ResultRow {
    pub fn from_record(r: &RunRecord) -> Option<Self> {
        let s = r.scores.as_ref()?;
        Some(Self {
            run_id: r.run_id.clone(),
            kind: r.kind.clone(),
            latent_dim: r.latent_dim,
            steps: r.steps,
            seed: r.seed,
            factor_vae: s.factor_vae,
            sap: s.sap,
            dci: s.dci,
            irs: s.irs,
            mig: s.mig,
            recon: s.recon,
            wall_time: r.wall_time,
        })
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes scored runs with the exact column order
/// run_id, kind, latent_dim, steps, seed, factor_vae, sap, dci, irs, mig,
/// recon, wall_time. Floats carry 17 significant digits so the round-trip is
/// lossless. On failure the partial file is removed.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    let result = (|| -> Result<()> {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record([
            "run_id",
            "kind",
            "latent_dim",
            "steps",
            "seed",
            "factor_vae",
            "sap",
            "dci",
            "irs",
            "mig",
            "recon",
            "wall_time",
        ])?;
        for r in rows {
            w.write_record(&[
                r.run_id.clone(),
                r.kind.clone(),
                r.latent_dim.to_string(),
                r.steps.to_string(),
                r.seed.to_string(),
                fmt_f64(r.factor_vae),
                fmt_f64(r.sap),
                fmt_f64(r.dci),
                fmt_f64(r.irs),
                fmt_f64(r.mig),
                fmt_f64(r.recon),
                fmt_f64(r.wall_time),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn parse_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.deserialize() {
        out.push(record?);
    }
    Ok(out)
}

/// Writes aggregate rows as CSV (group key, n_seeds, mean/std per metric).
pub fn emit_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    let result = (|| -> Result<()> {
        let mut w = csv::Writer::from_path(&tmp)?;
        let mut header = vec![
            "kind".to_string(),
            "latent_dim".to_string(),
            "steps".to_string(),
            "n_seeds".to_string(),
        ];
        for m in METRIC_COLUMNS {
            header.push(format!("mean_{m}"));
            header.push(format!("std_{m}"));
        }
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![
                r.key.kind.clone().unwrap_or_default(),
                r.key.latent_dim.map(|v| v.to_string()).unwrap_or_default(),
                r.key.steps.map(|v| v.to_string()).unwrap_or_default(),
                r.n_seeds.to_string(),
            ];
            for i in 0..6 {
                rec.push(fmt_f64(r.mean[i]));
                rec.push(r.std.map(|s| fmt_f64(s[i])).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

// --- report -----------------------------------------------------------------

/// Simple bar chart of one metric across aggregate rows.
fn draw_bar_chart(values: &[f64], path: &Path) -> Result<()> {
    let bar_w = 28u32;
    let gap = 12u32;
    let margin = 20u32;
    let height = 240u32;
    let plot_h = height - 2 * margin;
    let width = 2 * margin + values.len() as u32 * (bar_w + gap);
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));

    // horizontal gridlines at 0, 0.25, .., 1.0
    for grid in 0..=4u32 {
        let y = margin + plot_h - (plot_h * grid / 4);
        for x in margin..width - margin {
            img.put_pixel(x, y, image::Rgb([220, 220, 220]));
        }
    }
    for (i, &v) in values.iter().enumerate() {
        let clamped = v.clamp(0.0, 1.0);
        let h = (clamped * plot_h as f64).round() as u32;
        let x0 = margin + i as u32 * (bar_w + gap) + gap / 2;
        for x in x0..x0 + bar_w {
            for y in (margin + plot_h - h)..(margin + plot_h) {
                img.put_pixel(x, y, image::Rgb([70, 110, 180]));
            }
        }
    }
    img.save(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Emits `report.md` (a ranked markdown table with the winner bolded) plus
/// one bar chart PNG per metric into `out_dir`.
pub fn emit_report(rows: &[AggregateRow], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let ordered = rank_rows(rows)?;
    let winner = ordered[0].key.clone();

    let mut md = String::new();
    md.push_str("# Sweep report\n\n");
    md.push_str("Rows ranked by the unweighted mean of the five metric scores; the best row is bold.\n\n");
    md.push_str("| group | n_seeds | factor_vae | sap | dci | irs | mig | mean | recon |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|\n");
    // keep input order in the table; bold the ranked winner
    for r in rows {
        let label = if r.key == winner {
            format!("**{}**", r.key.label())
        } else {
            r.key.label()
        };
        let cell = |i: usize| match r.std {
            Some(s) => format!("{:.4} ± {:.4}", r.mean[i], s[i]),
            None => format!("{:.4}", r.mean[i]),
        };
        md.push_str(&format!(
            "| {label} | {} | {} | {} | {} | {} | {} | {:.4} | {} |\n",
            r.n_seeds,
            cell(0),
            cell(1),
            cell(2),
            cell(3),
            cell(4),
            r.score_mean(),
            cell(5),
        ));
    }
    md.push_str(&format!("\nWinner: **{}**\n", winner.label()));
    md.push_str("\nPer-metric charts: ");
    for m in &METRIC_COLUMNS[..5] {
        md.push_str(&format!("![{m}](chart_{m}.png) "));
    }
    md.push('\n');

    let tmp = out_dir.join("report.md.tmp");
    let final_path = out_dir.join("report.md");
    match std::fs::write(&tmp, &md) {
        Ok(()) => std::fs::rename(&tmp, &final_path)?,
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            return Err(Error::Io(e));
        }
    }

    for (i, m) in METRIC_COLUMNS[..5].iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r.mean[i]).collect();
        draw_bar_chart(&values, &out_dir.join(format!("chart_{m}.png")))?;
    }
    Ok(())
}

// --- free-form table ranking (paper-shaped CSVs) ------------------------------

/// A ranked row of a metric table: label, the five scores, and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub label: String,
    pub scores: [f64; 5],
    pub mean: f64,
}

fn normalize_header(h: &str) -> String {
    h.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Ranks a table-shaped CSV: the first column is the row label and the five
/// metric columns are located by fuzzy header match (factor_vae / FactorVAE,
/// sap score, dci, irs, mig). Returns rows ordered best-first.
pub fn rank_csv(path: &Path) -> Result<Vec<RankedRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let names: Vec<String> = headers.iter().map(normalize_header).collect();

    let find = |candidates: &[&str]| -> Result<usize> {
        for (i, name) in names.iter().enumerate() {
            if candidates.iter().any(|c| name == c) {
                return Ok(i);
            }
        }
        Err(Error::Schema(format!(
            "missing metric column (expected one of {candidates:?})"
        )))
    };
    let cols = [
        find(&["factorvae", "factorvaescore", "fv"])?,
        find(&["sap", "sapscore"])?,
        find(&["dci", "dciscore"])?,
        find(&["irs", "irsscore"])?,
        find(&["mig", "migscore"])?,
    ];

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let label = record
            .get(0)
            .ok_or_else(|| Error::Schema("empty row".into()))?
            .trim()
            .to_string();
        let mut scores = [0.0f64; 5];
        for (slot, &c) in cols.iter().enumerate() {
            scores[slot] = record
                .get(c)
                .ok_or_else(|| Error::Schema(format!("row '{label}' is missing column {c}")))?
                .trim()
                .parse()
                .map_err(|e| Error::Schema(format!("row '{label}': bad number: {e}")))?;
        }
        let mean = scores.iter().sum::<f64>() / 5.0;
        rows.push(RankedRow {
            label,
            scores,
            mean,
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("table has no data rows".into()));
    }
    // stable sort keeps earlier (smaller-configuration) rows first on ties
    rows.sort_by(|a, b| b.mean.partial_cmp(&a.mean).expect("finite means"));
    Ok(rows)
}
