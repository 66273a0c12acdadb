//! Command-line surface: candidate dumps, training, fine-tuning, evaluation,
//! single-question answering and attention export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use chainrank_core::auxiliary::{
    intent_label, placement_label, ClassifierConfig, ClassifierTrainConfig, INTENT_LABELS,
    PLACEMENT_LABELS,
};
use chainrank_core::candidates::{generate_candidates, CandidateRecord};
use chainrank_core::checkpoint::{load_classifier, load_ranker, save_classifier, save_ranker};
use chainrank_core::dataset::{load_dataset, split_dataset, QAExample};
use chainrank_core::encoders::{attention_tsv, ModelConfig, ModelKind};
use chainrank_core::kg::KnowledgeGraph;
use chainrank_core::pipeline::{answer_question, evaluate_pipeline, PipelineConfig};
use chainrank_core::query_graph::{tokenize, ChainTokens, SurfaceForms, TypePlacement};
use chainrank_core::training::{
    build_rank_instances, build_vocabulary, fine_tune, train, RankInstance, TrainConfig,
    TrainSetting,
};
use chainrank_core::vocab::load_embedding_rows;
use chainrank_core::{Error, PipelineModels, RankingModel, SequenceClassifier};

/// Knowledge-graph question answering by core-chain ranking.
#[derive(Parser)]
#[command(name = "chainrank", version, disable_help_subcommand = true)]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump linearized candidate chains per question as JSON lines.
    Candidates(CandidatesArgs),
    /// Train a ranking model.
    Train(TrainArgs),
    /// Fine-tune a trained ranking model at a reduced learning rate.
    Finetune(FinetuneArgs),
    /// Train an auxiliary model (intent, placement or class ranker).
    TrainAux(TrainAuxArgs),
    /// Evaluate the full pipeline and write a report.
    Eval(EvalArgs),
    /// Answer a single question.
    Answer(AnswerArgs),
    /// Export slot-attention weights for a question as TSV.
    Attention(AttentionArgs),
}

#[derive(Args, Default)]
struct CandidatesArgs {
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strict_two_entity: bool,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
}

#[derive(Args, Default)]
struct TrainArgs {
    /// One of bilstm-dot, bilstm-dense-dot, cnn-dot, slot-dot, dam-dot, hrm-dot.
    #[arg(long)]
    model: Option<String>,
    /// pointwise or pairwise.
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Training data; comma-separate several files to coalesce them.
    #[arg(long)]
    dataset: Option<String>,
    /// Held-out validation data; defaults to a seeded 70-10-20 split.
    #[arg(long)]
    val_dataset: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    share_encoders: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
    #[arg(long)]
    strict_two_entity: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    d_emb: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    cnn_filters: Option<usize>,
}

#[derive(Args, Default)]
struct FinetuneArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    val_dataset: Option<PathBuf>,
    /// Fine-tuning learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
    #[arg(long)]
    strict_two_entity: bool,
}

#[derive(Args, Default)]
struct TrainAuxArgs {
    /// One of intent, placement, class-ranker.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
    #[arg(long)]
    d_emb: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Default)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Intent, placement and class-ranker checkpoints, comma separated.
    #[arg(long)]
    aux_ckpts: Option<String>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
    #[arg(long)]
    strict_two_entity: bool,
}

#[derive(Args, Default)]
struct AnswerArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    aux_ckpts: Option<String>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    question: Option<String>,
    /// Grounded entity IRIs, comma separated (1 or 2).
    #[arg(long)]
    entities: Option<String>,
    #[arg(long)]
    surface_forms: Option<PathBuf>,
    #[arg(long)]
    strict_two_entity: bool,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args, Default)]
struct AttentionArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    question: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional JSON config; any field may supply a missing flag.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kg: Option<PathBuf>,
    dataset: Option<String>,
    val_dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    ckpt: Option<PathBuf>,
    aux_ckpts: Option<String>,
    embeddings: Option<PathBuf>,
    surface_forms: Option<PathBuf>,
    report: Option<PathBuf>,
    question: Option<String>,
    entities: Option<String>,
    model: Option<String>,
    setting: Option<String>,
    kind: Option<String>,
    seed: Option<u64>,
    lr: Option<f64>,
    margin: Option<f64>,
    negatives: Option<usize>,
    epochs: Option<usize>,
    patience: Option<usize>,
    d_emb: Option<usize>,
    hidden: Option<usize>,
    cnn_filters: Option<usize>,
    share_encoders: Option<bool>,
    strict_two_entity: Option<bool>,
    top_k: Option<usize>,
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn need<T>(flag: Option<T>, file: Option<T>, name: &str) -> CliResult<T> {
    flag.or(file)
        .ok_or_else(|| usage(format!("missing required option --{name}")))
}

fn load_config(path: &Option<PathBuf>) -> CliResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from)?;
            serde_json::from_str(&text).map_err(|e| usage(format!("config file: {e}")))
        }
    }
}

fn load_surface(path: &Option<PathBuf>) -> CliResult<SurfaceForms> {
    match path {
        None => Ok(SurfaceForms::empty()),
        Some(p) => Ok(SurfaceForms::load(p)?),
    }
}

/// Loads one or more comma-separated dataset files and concatenates them.
fn load_datasets(spec: &str, kg: &KnowledgeGraph) -> CliResult<Vec<QAExample>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(usage("empty dataset path"));
        }
        out.extend(load_dataset(Path::new(part), kg)?);
    }
    Ok(out)
}

fn parse_setting(s: &str) -> CliResult<TrainSetting> {
    s.parse().map_err(|_| {
        usage(format!(
            "unknown setting {s:?}; expected pointwise or pairwise"
        ))
    })
}

fn load_aux(
    spec: &str,
) -> CliResult<(SequenceClassifier, SequenceClassifier, RankingModel)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(usage(
            "--aux-ckpts needs three files: intent,placement,class-ranker",
        ));
    }
    let intent = load_classifier(Path::new(parts[0]))?;
    let placement = load_classifier(Path::new(parts[1]))?;
    let class_ranker = load_ranker(Path::new(parts[2]))?;
    Ok((intent, placement, class_ranker))
}

fn cmd_candidates(args: CandidatesArgs, file: FileConfig) -> CliResult<()> {
    let kg_path = need(args.kg, file.kg, "kg")?;
    let dataset = need(
        args.dataset.map(|p| p.display().to_string()),
        file.dataset,
        "dataset",
    )?;
    let out = need(args.out, file.out, "out")?;
    let strict = args.strict_two_entity || file.strict_two_entity.unwrap_or(false);
    let surface = load_surface(&args.surface_forms.or(file.surface_forms))?;
    let kg = KnowledgeGraph::load(&kg_path)?;
    let examples = load_datasets(&dataset, &kg)?;
    let mut text = String::new();
    for ex in &examples {
        let chains = generate_candidates(&kg, &ex.entities, strict)?;
        let gold_index = chains.iter().position(|c| c.hops == ex.gold_chain.hops);
        let record = CandidateRecord {
            id: ex.id.clone(),
            candidates: chains
                .iter()
                .map(|c| c.linearize(&kg, &surface).join(" "))
                .collect(),
            gold_index,
        };
        text.push_str(&serde_json::to_string(&record).map_err(Error::from)?);
        text.push('\n');
    }
    fs::write(&out, text).map_err(Error::from)?;
    println!(
        "wrote {} candidate records to {}",
        examples.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_config_from(
    setting: TrainSetting,
    seed: u64,
    args_lr: Option<f64>,
    file: &FileConfig,
    args_margin: Option<f64>,
    args_negatives: Option<usize>,
    args_epochs: Option<usize>,
    args_patience: Option<usize>,
) -> TrainConfig {
    let mut config = TrainConfig::new(setting);
    config.seed = seed;
    if let Some(lr) = args_lr.or(file.lr) {
        config.lr = lr;
    }
    if let Some(m) = args_margin.or(file.margin) {
        config.margin = m;
    }
    if let Some(n) = args_negatives.or(file.negatives) {
        config.negatives = n;
    }
    if let Some(e) = args_epochs.or(file.epochs) {
        config.max_epochs = e;
    }
    if let Some(p) = args_patience.or(file.patience) {
        config.patience = p;
    }
    config
}

fn print_train_summary(report: &chainrank_core::training::TrainReport) {
    println!(
        "trained {} epochs; best epoch {} with validation CCA {:.4}; {} examples skipped",
        report.epochs.len(),
        report.best_epoch,
        report.best_val_cca,
        report.skipped_examples
    );
}

fn split_or_val(
    examples: Vec<QAExample>,
    val_dataset: &Option<PathBuf>,
    kg: &KnowledgeGraph,
    seed: u64,
) -> CliResult<(Vec<QAExample>, Vec<QAExample>)> {
    match val_dataset {
        Some(path) => {
            let val = load_dataset(path, kg)?;
            Ok((examples, val))
        }
        None => {
            let (train, val, _test) = split_dataset(&examples, (0.7, 0.1), seed);
            Ok((train, val))
        }
    }
}

fn cmd_train(args: TrainArgs, file: FileConfig) -> CliResult<()> {
    let kind: ModelKind = need(args.model.clone(), file.model.clone(), "model")?
        .parse()
        .map_err(|e: Error| usage(e.to_string()))?;
    let setting = parse_setting(&need(args.setting.clone(), file.setting.clone(), "setting")?)?;
    let kg_path = need(args.kg.clone(), file.kg.clone(), "kg")?;
    let dataset_spec = need(args.dataset.clone(), file.dataset.clone(), "dataset")?;
    let out = need(args.out.clone(), file.out.clone(), "out")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let share = args.share_encoders || file.share_encoders.unwrap_or(false);
    let strict = args.strict_two_entity || file.strict_two_entity.unwrap_or(false);
    let surface = load_surface(&args.surface_forms.clone().or(file.surface_forms.clone()))?;

    let kg = KnowledgeGraph::load(&kg_path)?;
    let examples = load_datasets(&dataset_spec, &kg)?;
    let val_path = args.val_dataset.clone().or(file.val_dataset.clone());
    let (train_set, val_set) = split_or_val(examples, &val_path, &kg, seed)?;

    let mut model_config = ModelConfig::new(kind);
    model_config.seed = seed;
    model_config.share_encoders = share;
    if let Some(d) = args.d_emb.or(file.d_emb) {
        model_config.d_emb = d;
    }
    if let Some(h) = args.hidden.or(file.hidden) {
        model_config.hidden = h;
    }
    if let Some(f) = args.cnn_filters.or(file.cnn_filters) {
        model_config.cnn_filters = f;
    }

    let vocab = build_vocabulary(&[&train_set, &val_set], &kg, &surface);
    let mut model = RankingModel::new(model_config, vocab, kg.n_predicates())?;
    if let Some(emb_path) = args.embeddings.clone().or(file.embeddings.clone()) {
        let rows = load_embedding_rows(&emb_path, model.vocab(), model.config().d_emb)?;
        model.set_embedding_rows(&rows)?;
        println!("loaded {} pretrained embedding rows", rows.len());
    }

    let train_instances = build_rank_instances(&train_set, &kg, &surface, strict)?;
    let val_instances = build_rank_instances(&val_set, &kg, &surface, strict)?;
    let config = train_config_from(
        setting,
        seed,
        args.lr,
        &file,
        args.margin,
        args.negatives,
        args.epochs,
        args.patience,
    );
    let mut report = train(&mut model, &train_instances, &val_instances, &config)?;
    save_ranker(&model, &out)?;
    report.checkpoint = Some(out.display().to_string());
    print_train_summary(&report);
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_finetune(args: FinetuneArgs, file: FileConfig) -> CliResult<()> {
    let ckpt = need(args.ckpt.clone(), file.ckpt.clone(), "ckpt")?;
    let kg_path = need(args.kg.clone(), file.kg.clone(), "kg")?;
    let dataset_spec = need(args.dataset.clone(), file.dataset.clone(), "dataset")?;
    let out = need(args.out.clone(), file.out.clone(), "out")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let strict = args.strict_two_entity || file.strict_two_entity.unwrap_or(false);
    let surface = load_surface(&args.surface_forms.clone().or(file.surface_forms.clone()))?;
    let setting = match args.setting.clone().or(file.setting.clone()) {
        Some(s) => parse_setting(&s)?,
        None => TrainSetting::Pointwise,
    };

    let kg = KnowledgeGraph::load(&kg_path)?;
    let mut model: RankingModel = load_ranker(&ckpt)?;
    let examples = load_datasets(&dataset_spec, &kg)?;
    let val_path = args.val_dataset.clone().or(file.val_dataset.clone());
    let (train_set, val_set) = split_or_val(examples, &val_path, &kg, seed)?;
    let train_instances = build_rank_instances(&train_set, &kg, &surface, strict)?;
    let val_instances = build_rank_instances(&val_set, &kg, &surface, strict)?;

    let mut config = TrainConfig::new(setting);
    config.seed = seed;
    if let Some(lr) = args.lr.or(file.lr) {
        config.fine_tune_lr = lr;
    }
    if let Some(e) = args.epochs.or(file.epochs) {
        config.max_epochs = e;
    }
    if let Some(p) = args.patience.or(file.patience) {
        config.patience = p;
    }
    let mut report = fine_tune(&mut model, &train_instances, &val_instances, &config)?;
    save_ranker(&model, &out)?;
    report.checkpoint = Some(out.display().to_string());
    print_train_summary(&report);
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_train_aux(args: TrainAuxArgs, file: FileConfig) -> CliResult<()> {
    let kind = need(args.kind.clone(), file.kind.clone(), "kind")?;
    let kg_path = need(args.kg.clone(), file.kg.clone(), "kg")?;
    let dataset_spec = need(args.dataset.clone(), file.dataset.clone(), "dataset")?;
    let out = need(args.out.clone(), file.out.clone(), "out")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let surface = load_surface(&args.surface_forms.clone().or(file.surface_forms.clone()))?;
    let kg = KnowledgeGraph::load(&kg_path)?;
    let examples = load_datasets(&dataset_spec, &kg)?;
    let vocab = build_vocabulary(&[&examples], &kg, &surface);

    let mut clf_train = ClassifierTrainConfig::default();
    if let Some(e) = args.epochs.or(file.epochs) {
        clf_train.max_epochs = e;
    }
    if let Some(p) = args.patience.or(file.patience) {
        clf_train.patience = p;
    }
    let mut clf_config = ClassifierConfig {
        seed,
        ..ClassifierConfig::default()
    };
    if let Some(d) = args.d_emb.or(file.d_emb) {
        clf_config.d_emb = d;
    }
    if let Some(h) = args.hidden.or(file.hidden) {
        clf_config.hidden = h;
    }

    match kind.as_str() {
        "intent" | "placement" => {
            let (labels, data): (Vec<String>, Vec<(Vec<String>, usize)>) = if kind == "intent" {
                (
                    INTENT_LABELS.map(str::to_string).to_vec(),
                    examples
                        .iter()
                        .map(|ex| (ex.tokens.clone(), intent_label(ex.intent)))
                        .collect(),
                )
            } else {
                (
                    PLACEMENT_LABELS.map(str::to_string).to_vec(),
                    examples
                        .iter()
                        .map(|ex| (ex.tokens.clone(), placement_label(ex.placement)))
                        .collect(),
                )
            };
            let mut clf = SequenceClassifier::new(clf_config, labels, vocab)?;
            let report = clf.train(&data, &data, &clf_train)?;
            save_classifier(&clf, &out)?;
            print_train_summary(&report);
        }
        "class-ranker" => {
            let mut instances = Vec::new();
            for ex in &examples {
                if ex.placement == TypePlacement::None {
                    continue;
                }
                let gold_class = ex.class.ok_or_else(|| {
                    usage(format!("example {} has a placement but no class", ex.id))
                })?;
                let candidates =
                    chainrank_core::auxiliary::candidate_classes(&kg, &ex.gold_chain, ex.placement)?;
                let ordered: Vec<_> = candidates.iter().copied().collect();
                let gold = ordered.iter().position(|&c| c == gold_class);
                instances.push(RankInstance {
                    id: ex.id.clone(),
                    question: ex.tokens.clone(),
                    candidates: ordered
                        .iter()
                        .map(|&c| ChainTokens::of_tokens(surface.tokens(kg.node_name(c))))
                        .collect(),
                    gold,
                });
            }
            let mut config = ModelConfig::new(ModelKind::BilstmDot);
            config.seed = seed;
            if let Some(d) = args.d_emb.or(file.d_emb) {
                config.d_emb = d;
                config.hidden = d / 2;
            }
            if let Some(h) = args.hidden.or(file.hidden) {
                config.hidden = h;
            }
            let mut ranker = RankingModel::new(config, vocab, kg.n_predicates())?;
            let mut tcfg = TrainConfig::new(TrainSetting::Pointwise);
            tcfg.seed = seed;
            if let Some(e) = args.epochs.or(file.epochs) {
                tcfg.max_epochs = e;
            }
            if let Some(p) = args.patience.or(file.patience) {
                tcfg.patience = p;
            }
            let report = train(&mut ranker, &instances, &instances, &tcfg)?;
            save_ranker(&ranker, &out)?;
            print_train_summary(&report);
        }
        other => {
            return Err(usage(format!(
                "unknown aux kind {other:?}; expected intent, placement or class-ranker"
            )))
        }
    }
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs, file: FileConfig) -> CliResult<()> {
    let ckpt = need(args.ckpt.clone(), file.ckpt.clone(), "ckpt")?;
    let aux = need(args.aux_ckpts.clone(), file.aux_ckpts.clone(), "aux-ckpts")?;
    let kg_path = need(args.kg.clone(), file.kg.clone(), "kg")?;
    let dataset_spec = need(args.dataset.clone(), file.dataset.clone(), "dataset")?;
    let report_path = need(args.report.clone(), file.report.clone(), "report")?;
    let strict = args.strict_two_entity || file.strict_two_entity.unwrap_or(false);
    let surface = load_surface(&args.surface_forms.clone().or(file.surface_forms.clone()))?;

    let kg = KnowledgeGraph::load(&kg_path)?;
    let examples = load_datasets(&dataset_spec, &kg)?;
    let ranker = load_ranker(&ckpt)?;
    let (intent, placement, class_ranker) = load_aux(&aux)?;
    let models = PipelineModels {
        ranker,
        intent,
        placement,
        class_ranker,
    };
    let config = PipelineConfig {
        strict_two_entity: strict,
        ..PipelineConfig::default()
    };
    let report = evaluate_pipeline(&kg, &models, &surface, &examples, &config)?;
    fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )
    .map_err(Error::from)?;
    println!(
        "evaluated {} questions: CCA {:.4} MRR {:.4} P {:.4} R {:.4} F1 {:.4}",
        report.n_questions, report.cca, report.mrr, report.precision, report.recall, report.f1
    );
    println!("report written to {}", report_path.display());
    Ok(())
}

fn cmd_answer(args: AnswerArgs, file: FileConfig) -> CliResult<()> {
    let ckpt = need(args.ckpt.clone(), file.ckpt.clone(), "ckpt")?;
    let aux = need(args.aux_ckpts.clone(), file.aux_ckpts.clone(), "aux-ckpts")?;
    let kg_path = need(args.kg.clone(), file.kg.clone(), "kg")?;
    let question = need(args.question.clone(), file.question.clone(), "question")?;
    let entities_spec = need(args.entities.clone(), file.entities.clone(), "entities")?;
    let strict = args.strict_two_entity || file.strict_two_entity.unwrap_or(false);
    let surface = load_surface(&args.surface_forms.clone().or(file.surface_forms.clone()))?;

    let kg = KnowledgeGraph::load(&kg_path)?;
    let entities: Vec<_> = entities_spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|iri| kg.node_id(iri))
        .collect::<Result<_, _>>()?;
    if entities.is_empty() || entities.len() > 2 {
        return Err(usage("--entities needs 1 or 2 comma-separated IRIs"));
    }
    let ranker = load_ranker(&ckpt)?;
    let (intent, placement, class_ranker) = load_aux(&aux)?;
    let models = PipelineModels {
        ranker,
        intent,
        placement,
        class_ranker,
    };
    let config = PipelineConfig {
        strict_two_entity: strict,
        top_k: args.top_k.or(file.top_k).unwrap_or(5),
    };
    let tokens = tokenize(&question);
    let answer = answer_question(&kg, &models, &surface, &tokens, &entities, &config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&answer).map_err(Error::from)?
    );
    Ok(())
}

fn cmd_attention(args: AttentionArgs, file: FileConfig) -> CliResult<()> {
    let ckpt = need(args.ckpt.clone(), file.ckpt.clone(), "ckpt")?;
    let question = need(args.question.clone(), file.question.clone(), "question")?;
    let out = need(args.out.clone(), file.out.clone(), "out")?;
    let model: RankingModel = load_ranker(&ckpt)?;
    let tokens = tokenize(&question);
    let rows = model.export_attention(&tokens)?;
    fs::write(&out, attention_tsv(&rows)).map_err(Error::from)?;
    println!(
        "wrote attention weights for {} tokens to {}",
        tokens.len(),
        out.display()
    );
    Ok(())
}

fn run() -> CliResult<()> {
    let cli = Cli::try_parse().map_err(|e| {
        // keep clap's rendered message, but our own exit-code discipline
        usage(e.render().to_string())
    })?;
    let file = load_config(&cli.config)?;
    match cli.command {
        Command::Candidates(args) => cmd_candidates(args, file),
        Command::Train(args) => cmd_train(args, file),
        Command::Finetune(args) => cmd_finetune(args, file),
        Command::TrainAux(args) => cmd_train_aux(args, file),
        Command::Eval(args) => cmd_eval(args, file),
        Command::Answer(args) => cmd_answer(args, file),
        Command::Attention(args) => cmd_attention(args, file),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::from(0),
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
