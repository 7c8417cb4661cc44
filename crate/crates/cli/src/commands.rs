use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use factlex_core::chunker::{chunk, ChunkingConfig, Technique};
use factlex_core::corpus::{
    detect_builtin_entities, load_corpus, mask_entities, parse_document, read_entity_sidecar,
    write_corpus, EntitySpan,
};
use factlex_core::encoder::{EncoderConfig, HashedNgramEncoder};
use factlex_core::explainer::explain;
use factlex_core::harness::report::{emit_report, ReportRow};
use factlex_core::harness::{evaluate_split, planted_train_config, run_grid, synthetic, GridSpec};
use factlex_core::pipeline::{resolve_input, InputSelection, PipelineConfig};
use factlex_core::predictor::{forward, train, PredictorModel, TrainConfig};
use factlex_core::roles::{attach_roles, load_role_sidecar, tag, train_tagger, write_role_sidecar, TaggerModel};
use factlex_core::summarizer::{summarize_view, SummarySpec};
use factlex_core::{DocView, Document};
use factlex_service::{ServiceConfig, ServiceError};

use crate::exit::{config_error, Classify, CliResult};
use crate::{Cli, Command, PipelineOverride, RoleSource};

/// `train` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default = "default_pipeline")]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_pipeline() -> PipelineConfig {
    PipelineConfig::new(InputSelection::FactsOnly, ChunkingConfig::default())
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            pipeline: default_pipeline(),
            train: TrainConfig::default(),
        }
    }
}

/// `grid` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub train: TrainConfig,
}

pub const SYNTHETIC_CORPUS_FILE: &str = "corpus.jsonl";
pub const SYNTHETIC_ROLES_FILE: &str = "roles.jsonl";
pub const SYNTHETIC_GRID_FILE: &str = "grid.json";

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).config(format!("opening config {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).config(format!("parsing config {}", path.display()))
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    path.map_or_else(|| Ok(T::default()), read_config)
}

fn output(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).data(format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_jsonl<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).data("writing output")?;
    out.write_all(b"\n").data("writing output")
}

fn write_json_pretty<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).data("writing output")?;
    out.write_all(b"\n").data("writing output")
}

fn finish(mut out: Box<dyn Write>) -> CliResult<()> {
    out.flush().data("writing output")
}

fn load_docs(corpus: &Path, roles: &RoleSource) -> CliResult<Vec<Document>> {
    let mut docs = load_corpus(corpus).data(format!("reading corpus {}", corpus.display()))?;
    if let Some(path) = &roles.roles {
        let seqs = load_role_sidecar(path).data(format!("reading roles {}", path.display()))?;
        attach_roles(&mut docs, &seqs).data("attaching roles")?;
    } else if let Some(path) = &roles.tagger {
        let model = TaggerModel::load(path).data(format!("loading tagger {}", path.display()))?;
        for doc in &mut docs {
            let seq = tag(doc, &model).data(format!("tagging {}", doc.id))?;
            doc.apply_roles(&seq);
        }
    }
    Ok(docs)
}

fn load_model(path: &Path) -> CliResult<(PredictorModel, HashedNgramEncoder)> {
    let model = PredictorModel::load(path).data(format!("loading model {}", path.display()))?;
    let encoder = model.builtin_encoder().config("model encoder")?;
    Ok((model, encoder))
}

fn pipeline_for(model: &PredictorModel, over: &PipelineOverride) -> CliResult<PipelineConfig> {
    let mut cfg = model.pipeline.clone();
    if let Some(selection) = over.selection {
        cfg.input_selection = selection;
    }
    if let Some(n) = over.technique {
        cfg.chunking.technique =
            Technique::from_number(n).ok_or_else(|| config_error(format!("technique {n}")))?;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest { inputs, split, label } => ingest(&inputs, split, label, out),
        Command::Mask { corpus, entities, no_builtin } => mask(&corpus, entities.as_deref(), !no_builtin, out),
        Command::Tag { corpus, tagger, train: gold, epochs } => match (tagger, gold) {
            (Some(tagger), _) => apply_tagger(&corpus, &tagger, out),
            (None, Some(gold)) => fit_tagger(&corpus, &gold, epochs, cli.seed.unwrap_or(0), out),
            (None, None) => Err(config_error("tag needs --tagger or --train")),
        },
        Command::Summarize { corpus, roles } => summarize(&corpus, &roles, config, out),
        Command::Chunk { corpus, roles, selection } => chunk_cmd(&corpus, &roles, selection, config, out),
        Command::Train { corpus, roles, report } => {
            train_cmd(&corpus, &roles, config, cli.seed, report.as_deref(), out)
        }
        Command::Predict { corpus, model, roles, pipeline } => predict(&corpus, &model, &roles, &pipeline, out),
        Command::Explain { corpus, model, roles, pipeline, k } => {
            explain_cmd(&corpus, &model, &roles, &pipeline, k, out)
        }
        Command::Eval { corpus, model, roles, pipeline, split } => {
            eval(&corpus, &model, &roles, &pipeline, split, out)
        }
        Command::Grid { corpus, roles, format, rows } => {
            grid(&corpus, &roles, config, cli.seed, format, rows.as_deref(), out)
        }
        Command::GenSynthetic { docs } => gen_synthetic(docs, cli.seed.unwrap_or(0), out),
        Command::Serve { bind } => serve(config, bind),
    }
}

fn ingest(inputs: &[PathBuf], split: factlex_core::Split, label: Option<u8>, out: Option<&Path>) -> CliResult<()> {
    let mut docs = Vec::new();
    for path in inputs {
        if path.extension().is_some_and(|e| e == "jsonl") {
            docs.extend(load_corpus(path).data(format!("reading corpus {}", path.display()))?);
            continue;
        }
        let text = std::fs::read_to_string(path).data(format!("reading {}", path.display()))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| config_error(format!("{} has no file name", path.display())))?;
        let mut doc = parse_document(&text, &id).data(format!("parsing {}", path.display()))?;
        doc.split = split;
        doc.label = label;
        docs.push(doc);
    }
    let mut seen = HashSet::new();
    if let Some(dup) = docs.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(anyhow::anyhow!("duplicate document id {:?}", dup.id)).data("ingesting");
    }
    log::info!("ingested {} documents", docs.len());
    let mut w = output(out)?;
    write_corpus(&docs, &mut w).data("writing corpus")?;
    finish(w)
}

fn overlaps(a: &EntitySpan, b: &EntitySpan) -> bool {
    a.sentence_index == b.sentence_index && a.token_start < b.token_end && b.token_start < a.token_end
}

fn mask(corpus: &Path, entities: Option<&Path>, builtin: bool, out: Option<&Path>) -> CliResult<()> {
    let docs = load_docs(corpus, &RoleSource { roles: None, tagger: None })?;
    let mut sidecar: HashMap<String, Vec<EntitySpan>> = match entities {
        Some(path) => {
            let file = File::open(path).data(format!("opening {}", path.display()))?;
            read_entity_sidecar(BufReader::new(file)).data(format!("reading {}", path.display()))?
        }
        None => HashMap::new(),
    };
    let mut masked = Vec::with_capacity(docs.len());
    for doc in &docs {
        let mut spans = sidecar.remove(&doc.id).unwrap_or_default();
        if builtin {
            let detected: Vec<EntitySpan> = detect_builtin_entities(doc)
                .into_iter()
                .filter(|d| !spans.iter().any(|s| overlaps(s, d)))
                .collect();
            spans.extend(detected);
        }
        masked.push(mask_entities(doc, &spans).data(format!("masking {}", doc.id))?);
    }
    let mut w = output(out)?;
    write_corpus(&masked, &mut w).data("writing corpus")?;
    finish(w)
}

fn apply_tagger(corpus: &Path, tagger: &Path, out: Option<&Path>) -> CliResult<()> {
    let docs = load_corpus(corpus).data(format!("reading corpus {}", corpus.display()))?;
    let model = TaggerModel::load(tagger).data(format!("loading tagger {}", tagger.display()))?;
    let seqs = docs
        .iter()
        .map(|d| tag(d, &model).data(format!("tagging {}", d.id)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut w = output(out)?;
    write_role_sidecar(&seqs, &mut w).data("writing roles")?;
    finish(w)
}

fn fit_tagger(corpus: &Path, gold: &Path, epochs: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let docs = load_corpus(corpus).data(format!("reading corpus {}", corpus.display()))?;
    let seqs = load_role_sidecar(gold).data(format!("reading roles {}", gold.display()))?;
    let by_id: HashMap<&str, _> = seqs.iter().map(|s| (s.doc_id.as_str(), s)).collect();
    let labeled = docs
        .into_iter()
        .map(|d| {
            let seq = by_id
                .get(d.id.as_str())
                .ok_or_else(|| anyhow::anyhow!("no gold roles for {}", d.id))
                .data("pairing gold roles")?;
            Ok((d, (*seq).clone()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if epochs == 0 {
        return Err(config_error("--epochs must be at least 1"));
    }
    let model = train_tagger(&labeled, epochs, seed).data("training tagger")?;
    let mut w = output(out)?;
    model.write_json(&mut w).data("writing tagger")?;
    finish(w)
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    summary: factlex_core::summarizer::Summary,
}

fn summarize(corpus: &Path, roles: &RoleSource, config: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let spec: SummarySpec = config_or_default(config)?;
    spec.validate().config("summary spec")?;
    let docs = load_docs(corpus, roles)?;
    let mut w = output(out)?;
    for doc in &docs {
        let summary = summarize_view(&DocView::full(doc), &spec).data(format!("summarizing {}", doc.id))?;
        write_jsonl(&mut w, &SummaryLine { id: &doc.id, summary })?;
    }
    finish(w)
}

#[derive(Serialize)]
struct ChunkLine<'a> {
    id: &'a str,
    used_sentences: &'a [usize],
    tokens: usize,
    chunks: Vec<factlex_core::chunker::Chunk>,
}

fn chunk_cmd(
    corpus: &Path,
    roles: &RoleSource,
    selection: InputSelection,
    config: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let chunking: ChunkingConfig = config_or_default(config)?;
    chunking.validate().config("chunking config")?;
    let cfg = PipelineConfig::new(selection, chunking);
    let docs = load_docs(corpus, roles)?;
    let mut w = output(out)?;
    for doc in &docs {
        let resolved = resolve_input(doc, &cfg).data(format!("resolving {}", doc.id))?;
        let tokens = resolved.view.tokens();
        let chunks = chunk(&tokens, &chunking).data(format!("chunking {}", doc.id))?;
        let line = ChunkLine {
            id: &doc.id,
            used_sentences: resolved.view.indices(),
            tokens: tokens.len(),
            chunks,
        };
        write_jsonl(&mut w, &line)?;
    }
    finish(w)
}

fn encoder_for(cfg: &EncoderConfig) -> CliResult<HashedNgramEncoder> {
    HashedNgramEncoder::new(*cfg).config("encoder config")
}

fn train_cmd(
    corpus: &Path,
    roles: &RoleSource,
    config: Option<&Path>,
    seed: Option<u64>,
    report: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut file: TrainFile = config_or_default(config)?;
    if let Some(seed) = seed {
        file.train.seed = seed;
    }
    file.train.validate().config("train config")?;
    file.pipeline.chunking.validate().config("chunking config")?;
    let encoder = encoder_for(&file.train.encoder)?;
    let docs = load_docs(corpus, roles)?;
    let (model, train_report) = train(&docs, &file.pipeline, &file.train, &encoder).data("training")?;
    log::info!(
        "trained {} epochs, kept epoch {}",
        train_report.epoch_loss.len(),
        train_report.best_epoch
    );
    if let Some(path) = report {
        let mut w = output(Some(path))?;
        write_json_pretty(&mut w, &train_report)?;
        finish(w)?;
    }
    let mut w = output(out)?;
    model.write_json(&mut w).data("writing model")?;
    finish(w)
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    result: factlex_core::predictor::PredictionResult,
}

fn predict(
    corpus: &Path,
    model: &Path,
    roles: &RoleSource,
    over: &PipelineOverride,
    out: Option<&Path>,
) -> CliResult<()> {
    let (model, encoder) = load_model(model)?;
    let cfg = pipeline_for(&model, over)?;
    let docs = load_docs(corpus, roles)?;
    let mut w = output(out)?;
    for doc in &docs {
        let result = forward(doc, &model, &cfg, &encoder).data(format!("predicting {}", doc.id))?;
        write_jsonl(&mut w, &PredictionLine { id: &doc.id, result })?;
    }
    finish(w)
}

#[derive(Serialize)]
struct ExplanationLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    explanation: factlex_core::explainer::Explanation,
}

fn explain_cmd(
    corpus: &Path,
    model: &Path,
    roles: &RoleSource,
    over: &PipelineOverride,
    k: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    if k == 0 {
        return Err(config_error("-k must be at least 1"));
    }
    let (model, encoder) = load_model(model)?;
    let cfg = pipeline_for(&model, over)?;
    let docs = load_docs(corpus, roles)?;
    let mut w = output(out)?;
    for doc in &docs {
        let explanation =
            explain(doc, &model, &cfg, k, &encoder).data(format!("explaining {}", doc.id))?;
        write_jsonl(&mut w, &ExplanationLine { id: &doc.id, explanation })?;
    }
    finish(w)
}

fn eval(
    corpus: &Path,
    model: &Path,
    roles: &RoleSource,
    over: &PipelineOverride,
    split: factlex_core::Split,
    out: Option<&Path>,
) -> CliResult<()> {
    let (model, encoder) = load_model(model)?;
    let cfg = pipeline_for(&model, over)?;
    let docs = load_docs(corpus, roles)?;
    let metrics = evaluate_split(&docs, split, &model, &cfg, &encoder).data("evaluating")?;
    let mut w = output(out)?;
    write_json_pretty(&mut w, &metrics)?;
    finish(w)
}

fn grid(
    corpus: &Path,
    roles: &RoleSource,
    config: Option<&Path>,
    seed: Option<u64>,
    format: factlex_core::harness::report::ReportFormat,
    rows_path: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut file: GridFile = config_or_default(config)?;
    if let Some(seed) = seed {
        file.train.seed = seed;
    }
    file.train.validate().config("train config")?;
    file.grid.chunking.validate().config("chunking config")?;
    file.grid.summary.validate().config("summary spec")?;
    let encoder = encoder_for(&file.train.encoder)?;
    let docs = load_docs(corpus, roles)?;
    let rows = run_grid(&docs, &file.grid, &file.train, &encoder).data("running grid")?;
    if let Some(path) = rows_path {
        let mut w = output(Some(path))?;
        write_json_pretty(&mut w, &rows)?;
        finish(w)?;
    }
    let report: Vec<ReportRow> = rows.iter().map(ReportRow::from).collect();
    let mut w = output(out)?;
    w.write_all(emit_report(&report, format).data("rendering report")?.as_bytes())
        .data("writing report")?;
    finish(w)
}

fn gen_synthetic(docs: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let dir = out.ok_or_else(|| config_error("gen-synthetic needs --out <directory>"))?;
    let planted = synthetic::generate_planted_corpus(docs, seed).config("synthetic corpus")?;
    std::fs::create_dir_all(dir).data(format!("creating {}", dir.display()))?;

    let mut w = output(Some(&dir.join(SYNTHETIC_CORPUS_FILE)))?;
    write_corpus(&planted.documents, &mut w).data("writing corpus")?;
    finish(w)?;
    let mut w = output(Some(&dir.join(SYNTHETIC_ROLES_FILE)))?;
    write_role_sidecar(&planted.roles, &mut w).data("writing roles")?;
    finish(w)?;
    let grid = GridFile {
        grid: GridSpec::default(),
        train: planted_train_config(0),
    };
    let mut w = output(Some(&dir.join(SYNTHETIC_GRID_FILE)))?;
    write_json_pretty(&mut w, &grid)?;
    finish(w)?;
    log::info!("wrote {docs} planted documents to {}", dir.display());
    Ok(())
}

fn serve(config: Option<&Path>, bind: Option<std::net::SocketAddr>) -> CliResult<()> {
    let path = config.ok_or_else(|| config_error("serve needs --config <service config>"))?;
    let mut cfg: ServiceConfig = read_config(path)?;
    if let Some(bind) = bind {
        cfg.bind_address = bind;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .data("starting runtime")?;
    match runtime.block_on(factlex_service::serve(cfg)) {
        Ok(()) => Ok(()),
        Err(e @ ServiceError::Config(_)) => Err(e).config("service config"),
        Err(e) => Err(e).data("serving"),
    }
}
