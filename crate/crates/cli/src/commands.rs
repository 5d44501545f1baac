use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use scenewatch_core::classifier::{cross_validate, load_model, save_model, train, GbdtHyperparams};
use scenewatch_core::features::{write_features_csv, FeatureRow};
use scenewatch_core::manifest::{save_manifest, Manifest};
use scenewatch_core::pipeline::{
    analyze_pair, build_training_set, detect, match_segments, render_overlay, LabeledPair, LoadedScene, SynthConfig,
    DEFAULT_THRESHOLD,
};
use scenewatch_core::registration::FlowParams;
use scenewatch_core::scene::{load_labels, Label, LabelsFile};
use scenewatch_core::segmentation::{segment_all, BuiltinConfig, SegmentationBackend, SidecarConfig};
use scenewatch_core::workspace::{synth_workspace, Workspace};
use scenewatch_core::write_atomic;
use scenewatch_vlm::{append_record, Client, EndpointConfig, TemplateId};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "scenewatch", version, about = "Scene-change anomaly detection for monitored locations")]
pub struct Cli {
    /// Workspace root.
    #[arg(long, global = true, env = "SCENEWATCH_WORKSPACE", default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Builtin,
    Manifest,
    Sidecar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemplateArg {
    Organization,
    Floor,
}

impl From<TemplateArg> for TemplateId {
    fn from(t: TemplateArg) -> Self {
        match t {
            TemplateArg::Organization => TemplateId::Organization,
            TemplateArg::Floor => TemplateId::Floor,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
}

impl HyperArgs {
    fn hyperparams(&self) -> GbdtHyperparams {
        GbdtHyperparams {
            seed: self.seed,
            learning_rate: self.learning_rate,
            n_trees: self.trees,
            max_depth: self.max_depth,
            ..GbdtHyperparams::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a scene and write its manifest.
    Segment {
        scene: String,
        /// Defaults to the workspace backend.
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long)]
        sidecar_cmd: Option<String>,
        #[arg(long = "sidecar-arg", allow_hyphen_values = true)]
        sidecar_args: Vec<String>,
        /// Defaults to `manifests/<scene>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-segment features of a pair as CSV.
    Features {
        reference: String,
        query: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier on labeled pairs.
    Train {
        /// Labels files; defaults to every file under `labels/`.
        #[arg(long, num_args = 1..)]
        labels: Vec<PathBuf>,
        #[arg(long, default_value = "models/model.json")]
        out: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        #[arg(long, num_args = 1..)]
        labels: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Fold-assignment seed.
        #[arg(long, default_value_t = 0)]
        fold_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Score every segment of a query scene against its reference.
    Detect {
        reference: String,
        query: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Defaults to `reports/<pair id>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic benchmark workspace.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 14)]
        pairs: usize,
        #[arg(long, default_value_t = 6)]
        fixtures: usize,
        #[arg(long, default_value_t = 2)]
        min_inserted: usize,
        #[arg(long, default_value_t = 5)]
        max_inserted: usize,
    },
    /// Ask a multimodal model whether a scene is organized.
    Assess {
        scene: String,
        #[arg(long, value_enum)]
        template: TemplateArg,
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 60_000)]
        timeout_ms: u64,
        /// Defaults to `reports/assessments.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Serve the HTTP API and UI assets.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of built UI assets; a minimal page is served otherwise.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(CliError::from)
}

fn resolve(ws_root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        ws_root.join(p)
    }
}

fn backend_for(ws: &Workspace, kind: Option<BackendKind>, cmd: Option<String>, args: Vec<String>) -> Result<SegmentationBackend> {
    Ok(match kind {
        None => ws.backend(),
        Some(BackendKind::Builtin) => SegmentationBackend::Builtin(BuiltinConfig::default()),
        Some(BackendKind::Manifest) => SegmentationBackend::Manifest { dir: ws.manifests_dir() },
        Some(BackendKind::Sidecar) => {
            let command = cmd.ok_or_else(|| CliError::Usage("--backend sidecar requires --sidecar-cmd".into()))?;
            SegmentationBackend::Sidecar(SidecarConfig { command, args })
        }
    })
}

fn pair_id(ws: &Workspace, reference: &str, query: &str) -> String {
    ws.config
        .pairs
        .iter()
        .find(|p| p.reference == reference && p.query == query)
        .map(|p| p.id.clone())
        .unwrap_or_else(|| format!("{reference}__{query}"))
}

fn labels_files(ws: &Workspace, given: &[PathBuf]) -> Result<Vec<LabelsFile>> {
    let paths: Vec<PathBuf> = if given.is_empty() {
        let dir = ws.root().join("labels");
        let mut v: Vec<PathBuf> = match std::fs::read_dir(&dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect(),
            Err(_) => Vec::new(),
        };
        v.sort();
        v
    } else {
        given.iter().map(|p| resolve(ws.root(), p)).collect()
    };
    paths.iter().map(|p| load_labels(p).map_err(CliError::from)).collect()
}

fn training_set(ws: &Workspace, labels: &[LabelsFile]) -> Result<scenewatch_core::pipeline::TrainingSet> {
    let scenes: Vec<(LoadedScene, LoadedScene)> = labels
        .iter()
        .map(|l| Ok((ws.load_scene(&l.reference_id)?, ws.load_scene(&l.scene_id)?)))
        .collect::<Result<_>>()?;
    let pairs: Vec<LabeledPair> = scenes
        .iter()
        .zip(labels)
        .map(|((r, q), l)| LabeledPair { reference: r, query: q, labels: l })
        .collect();
    Ok(build_training_set(&pairs, &ws.manifests_dir(), &ws.backend(), &FlowParams::default())?)
}

/// Runs one command; the returned text goes to stdout.
pub fn run(cli: Cli) -> Result<String> {
    let root = cli.workspace;
    match cli.command {
        Command::Synth { seed, out, pairs, fixtures, min_inserted, max_inserted } => {
            let cfg = SynthConfig {
                seed,
                n_fixtures: fixtures,
                n_inserted: scenewatch_core::pipeline::Range::new(min_inserted, max_inserted),
                ..SynthConfig::default()
            };
            let ws = synth_workspace(&out, &cfg, pairs)?;
            let mut segments = 0;
            let mut anomalies = 0;
            for p in &ws.config.pairs {
                if let Some(l) = ws.labels(&p.query)? {
                    segments += l.labels.len();
                    anomalies += l.count(Label::Anomaly);
                }
            }
            Ok(json!({
                "workspace": out.display().to_string(),
                "pairs": ws.config.pairs.len(),
                "labeled_segments": segments,
                "anomalies": anomalies,
            })
            .to_string())
        }
        Command::Serve { port, host, ui_dir } => {
            let ws = Workspace::open(&root)?;
            crate::server::serve_blocking(ws, &host, port, ui_dir)?;
            Ok(String::new())
        }
        command => {
            let ws = Workspace::open(&root)?;
            run_in_workspace(&ws, command)
        }
    }
}

fn run_in_workspace(ws: &Workspace, command: Command) -> Result<String> {
    match command {
        Command::Segment { scene, backend, sidecar_cmd, sidecar_args, out } => {
            let backend = backend_for(ws, backend, sidecar_cmd, sidecar_args)?;
            let loaded = ws.load_scene(&scene)?;
            let masks = segment_all(&backend, &loaded.as_ref())?;
            let manifest = Manifest::new(&loaded.scene.image_path, loaded.gray.width(), loaded.gray.height(), masks);
            let path = out.map(|p| resolve(ws.root(), &p)).unwrap_or_else(|| ws.manifest_path(&scene));
            save_manifest(&path, &manifest)?;
            Ok(json!({"scene": scene, "segments": manifest.segments.len(), "manifest": path.display().to_string()})
                .to_string())
        }
        Command::Features { reference, query, out } => {
            let r = ws.load_scene(&reference)?;
            let q = ws.load_scene(&query)?;
            let backend = ws.backend();
            let analysis = analyze_pair(&r, &q, &backend, &FlowParams::default())?;
            let labels = ws.labels(&query)?.filter(|l| l.reference_id == reference);
            let mut row_labels: Vec<Option<Label>> = vec![None; analysis.segments.len()];
            if let (Some(labels), Ok(manifest)) = (labels, ws.manifest(&query)) {
                let (w, h) = (q.gray.width(), q.gray.height());
                let found: Vec<_> = analysis.segments.iter().map(|(m, _)| m.clone()).collect();
                for rec in &labels.labels {
                    let Some(target) = manifest.segment(&rec.segment_id).and_then(|m| m.resample(w, h)) else { continue };
                    let idx = match &backend {
                        SegmentationBackend::Manifest { .. } => found.iter().position(|m| m.id == rec.segment_id),
                        _ => match_segments(std::slice::from_ref(&target), &found)?[0].map(|(i, _)| i),
                    };
                    if let Some(i) = idx {
                        row_labels[i] = Some(rec.label);
                    }
                }
            }
            let rows: Vec<FeatureRow> = analysis
                .segments
                .into_iter()
                .zip(row_labels)
                .map(|((m, f), label)| FeatureRow { scene_id: query.clone(), segment_id: m.id, features: f, label })
                .collect();
            let mut buf = Vec::new();
            write_features_csv(&mut buf, &rows)?;
            match out {
                Some(p) => {
                    write_output(&resolve(ws.root(), &p), &buf)?;
                    Ok(String::new())
                }
                None => Ok(String::from_utf8(buf).expect("csv is utf-8")),
            }
        }
        Command::Train { labels, out, hyper } => {
            let files = labels_files(ws, &labels)?;
            let set = training_set(ws, &files)?;
            let model = train(&set.features(), &set.targets(), &hyper.hyperparams())?;
            let path = resolve(ws.root(), &out);
            save_model(&model, &path)?;
            Ok(json!({
                "model": path.display().to_string(),
                "rows": set.rows.len(),
                "anomalies": set.count(Label::Anomaly),
                "normal": set.count(Label::Normal),
                "unmatched": set.unmatched.len(),
            })
            .to_string())
        }
        Command::Cv { labels, k, fold_seed, out, hyper } => {
            let files = labels_files(ws, &labels)?;
            let set = training_set(ws, &files)?;
            let report = cross_validate(&set.features(), &set.targets(), k, &hyper.hyperparams(), fold_seed)?;
            let mut text = serde_json::to_string_pretty(&report).expect("cv report serializes");
            text.push('\n');
            if let Some(p) = out {
                write_output(&resolve(ws.root(), &p), text.as_bytes())?;
            }
            Ok(text)
        }
        Command::Detect { reference, query, model, threshold, overlay, out } => {
            let model = load_model(&resolve(ws.root(), &model))?;
            let r = ws.load_scene(&reference)?;
            let q = ws.load_scene(&query)?;
            let report = detect(&r, &q, &ws.backend(), &model, threshold, &FlowParams::default())?;
            let text = report.to_json();
            let path = out.map(|p| resolve(ws.root(), &p)).unwrap_or_else(|| ws.report_path(&pair_id(ws, &reference, &query)));
            write_output(&path, text.as_bytes())?;
            if let Some(o) = overlay {
                let img = render_overlay(&q.rgb, &report, &report.masks())?;
                let o = resolve(ws.root(), &o);
                write_output(&o, &img.encode_png()?)?;
            }
            Ok(text)
        }
        Command::Assess { scene, template, endpoint, model, timeout_ms, log } => {
            let s = ws.scene(&scene)?;
            let mut cfg = EndpointConfig { timeout_ms, ..EndpointConfig::with_url(endpoint) };
            if let Some(m) = model {
                cfg.model = m;
            }
            let client = Client::new(cfg)?;
            let record = client.assess(&scene, &ws.root().join(&s.image_path), template.into())?;
            let log = log.map(|p| resolve(ws.root(), &p)).unwrap_or_else(|| ws.root().join("reports/assessments.jsonl"));
            append_record(&log, &record)?;
            Ok(serde_json::to_string_pretty(&record).expect("record serializes"))
        }
        Command::Synth { .. } | Command::Serve { .. } => unreachable!("handled before opening the workspace"),
    }
}
