use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use fnc_stance::corpus::{load_bodies, load_stances, Dataset};
use fnc_stance::eval::{render_report, score_files, write_predictions, write_report, ReportFormat};
use fnc_stance::features::{
    read_feature_cache, write_feature_cache, AnnotationSidecar, CacheMeta, FeatureConfig, FeatureResources,
    LexiconSentiment, SentenceScores, Sidecars,
};
use fnc_stance::pipeline::{grid_search, refit_per_fold, train_on_features, Grid, Oversample, StagePlan, Variant};
use fnc_stance::simil::load_embeddings_filtered;
use fnc_stance::textproc::{load_word_list, preprocess, PreprocessConfig};
use fnc_stance::topics::{lda_train, LdaParams};
use fnc_stance::{Embeddings, TrainParams, TrainedPipeline};

#[derive(Parser, Serialize)]
#[command(name = "fnc", version, about = "Stance detection for FNC-1 headline/body pairs")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the available cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[allow(clippy::large_enum_variant)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Train a topic model.
    LdaTrain(LdaTrainArgs),
    /// Fit resources on a training split or reuse them, and write a feature cache.
    Features(FeaturesArgs),
    /// Train a pipeline bundle from a feature cache.
    Train(TrainArgs),
    /// Predict stances for a feature cache.
    Predict(PredictArgs),
    /// Score a prediction file.
    Score(ScoreArgs),
    /// Cross-validated hyperparameter search.
    Gridsearch(GridArgs),
}

#[derive(Args, Serialize)]
struct LdaTrainArgs {
    /// Text file with one document per line, or `fnc-bodies` to use --bodies.
    #[arg(long)]
    corpus: String,
    /// Bodies CSV used with `--corpus fnc-bodies`.
    #[arg(long)]
    bodies: Option<PathBuf>,
    /// Restrict `fnc-bodies` to the bodies referenced by this stances CSV.
    #[arg(long)]
    stances: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    topics: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Clone)]
struct FitArgs {
    /// Word vectors (word2vec text format).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Sentiment lexicon, `token<TAB>score` lines.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Refutation word list, one word per line.
    #[arg(long)]
    refute_words: Option<PathBuf>,
    /// Pretrained topic model (from `lda-train`) instead of fitting one.
    #[arg(long)]
    lda: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    topics: usize,
    #[arg(long, default_value_t = 500)]
    lda_iters: usize,
    #[arg(long, default_value_t = 50)]
    lda_infer_iters: usize,
    /// Keep surface forms instead of stemming.
    #[arg(long)]
    no_stem: bool,
}

#[derive(Args, Serialize, Clone)]
struct SidecarArgs {
    /// Dependency annotations: `pair_id<TAB>side<TAB>role<TAB>token`.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Sentence scores: `pair_id<TAB>side<TAB>sentence_index<TAB>score`.
    #[arg(long)]
    sentence_scores: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("split").required(true).args(["train", "test"])))]
struct FeaturesArgs {
    /// Fit resources on this split and save them to --resources.
    #[arg(long)]
    train: bool,
    /// Load resources from --resources.
    #[arg(long)]
    test: bool,
    #[arg(long)]
    stances: PathBuf,
    #[arg(long)]
    bodies: PathBuf,
    #[arg(long)]
    resources: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    sidecars: SidecarArgs,
}

#[derive(Args, Serialize, Clone)]
struct ParamArgs {
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    colsample: Option<f64>,
}

#[derive(Args, Serialize)]
struct PlanArgs {
    /// `1stage` or `2stage`.
    #[arg(long, default_value = "2stage")]
    plan: String,
    /// Start from a saved plan (e.g. the best plan of a grid search).
    #[arg(long)]
    plan_file: Option<PathBuf>,
    /// Duplicate disagree samples up to the agree count.
    #[arg(long)]
    oversample_disagree: bool,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Stances CSV the cache was built from (defaults to the one recorded with the cache).
    #[arg(long)]
    stances: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// text, json or tsv.
    #[arg(long, default_value = "text")]
    format: String,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GridArgs {
    /// JSON object mapping parameter names to value lists.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    stances: PathBuf,
    #[arg(long)]
    bodies: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    sidecars: SidecarArgs,
    /// Where to write the selected plan.
    #[arg(long)]
    best_plan: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    #[serde(flatten)]
    command: &'a Command,
}

/// `run.json` inside an output directory, `<file>.run.json` next to an output file.
fn write_run_record(cli: &Cli, out: &Path, is_dir: bool) -> Result<()> {
    let path = if is_dir {
        out.join("run.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".run.json");
        PathBuf::from(s)
    };
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        command: &cli.command,
    };
    fs::write(&path, serde_json::to_string_pretty(&record)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn feature_config(fit: &FitArgs, seed: u64) -> Result<FeatureConfig> {
    let mut cfg = FeatureConfig::default();
    if let Some(p) = &fit.stopwords {
        cfg.preprocess = PreprocessConfig::with_stopwords(load_word_list(p)?);
    }
    cfg.preprocess.stem = !fit.no_stem;
    if let Some(p) = &fit.refute_words {
        cfg.refute_words = load_word_list(p)?;
    }
    cfg.lda = LdaParams {
        train_iters: fit.lda_iters,
        infer_iters: fit.lda_infer_iters,
        seed,
        ..LdaParams::with_topics(fit.topics)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn lexicon(fit: &FitArgs) -> Result<LexiconSentiment> {
    Ok(match &fit.lexicon {
        Some(p) => LexiconSentiment::load(p)?,
        None => LexiconSentiment::default(),
    })
}

fn load_vectors(path: &Path, vocab: &HashSet<String>) -> Result<Arc<Embeddings>> {
    let table = load_embeddings_filtered(path, Some(vocab))
        .with_context(|| format!("loading embeddings {}", path.display()))?;
    log::info!("{} of {} needed words have vectors", table.len(), vocab.len());
    Ok(Arc::new(table))
}

struct LoadedSidecars {
    annotations: Option<AnnotationSidecar>,
    scores: Option<SentenceScores>,
}

impl LoadedSidecars {
    fn load(args: &SidecarArgs, stem: bool) -> Result<Self> {
        Ok(LoadedSidecars {
            annotations: args
                .annotations
                .as_ref()
                .map(|p| AnnotationSidecar::load(p, stem))
                .transpose()?,
            scores: args.sentence_scores.as_ref().map(SentenceScores::load).transpose()?,
        })
    }

    fn view(&self) -> Sidecars<'_> {
        Sidecars {
            annotations: self.annotations.as_ref().map(|a| a as _),
            sentence_scores: self.scores.as_ref(),
        }
    }

    fn log_coverage(&self) {
        if let Some(a) = &self.annotations {
            let (hits, misses) = a.coverage();
            log::info!("annotation coverage: {hits} pairs found, {misses} missing");
            if misses > 0 {
                log::warn!("{misses} pairs have no dependency annotations; their overlaps are 0");
            }
        }
    }
}

fn cmd_lda_train(cli: &Cli, a: &LdaTrainArgs) -> Result<()> {
    let mut pre = PreprocessConfig::default();
    if let Some(p) = &a.stopwords {
        pre = PreprocessConfig::with_stopwords(load_word_list(p)?);
    }
    let docs: Vec<String> = if a.corpus == "fnc-bodies" {
        let path = a
            .bodies
            .as_ref()
            .ok_or_else(|| anyhow!("--corpus fnc-bodies needs --bodies"))?;
        let bodies = load_bodies(path)?;
        match &a.stances {
            Some(s) => {
                let used: HashSet<u32> = load_stances(s, false)?.iter().map(|i| i.body_id).collect();
                bodies
                    .into_values()
                    .filter(|b| used.contains(&b.body_id))
                    .map(|b| b.text)
                    .collect()
            }
            None => bodies.into_values().map(|b| b.text).collect(),
        }
    } else {
        fs::read_to_string(&a.corpus)
            .with_context(|| format!("reading corpus {}", a.corpus))?
            .lines()
            .map(str::to_string)
            .collect()
    };
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| preprocess(d, &pre).tokens).collect();
    let params = LdaParams {
        train_iters: a.iters,
        seed: cli.seed,
        ..LdaParams::with_topics(a.topics)
    };
    let model = lda_train(&tokens, &params)?;
    model.save(&a.out)?;
    write_run_record(cli, &a.out, false)
}

fn cmd_features(cli: &Cli, a: &FeaturesArgs) -> Result<()> {
    let stances = load_stances(&a.stances, a.train)?;
    let ds = Dataset::new(stances, load_bodies(&a.bodies)?)?;
    let resources = if a.train {
        let cfg = feature_config(&a.fit, cli.seed)?;
        let lda = a.fit.lda.as_ref().map(fnc_stance::topics::LdaModel::load).transpose()?;
        let mut r = FeatureResources::fit(&ds, cfg, lda)?.with_lexicon(lexicon(&a.fit)?)?;
        if let Some(p) = &a.fit.embeddings {
            let vocab = r.embedding_vocabulary(split_texts(&ds));
            r = r.with_embeddings(load_vectors(p, &vocab)?, Some(p.clone()))?;
        }
        r.save(&a.resources)?;
        r
    } else {
        let mut r = FeatureResources::load(&a.resources)
            .with_context(|| format!("loading resources from {}", a.resources.display()))?;
        if let Some(recorded) = r.embedding_source() {
            let path = a
                .fit
                .embeddings
                .clone()
                .or_else(|| recorded.map(Path::to_path_buf))
                .ok_or_else(|| anyhow!("resources need embeddings; pass --embeddings"))?;
            let vocab = r.embedding_vocabulary(split_texts(&ds));
            r.attach_embeddings(load_vectors(&path, &vocab)?)?;
        }
        r
    };
    let stem = resources.config().preprocess.stem;
    let side = LoadedSidecars::load(&a.sidecars, stem)?;
    let rows = resources.extract_dataset(&ds, &side.view())?;
    side.log_coverage();
    write_feature_cache(&rows, &a.out)?;
    let inactive = resources.inactive_features(&side.view());
    if !inactive.is_empty() {
        log::warn!("inactive features (constant): {}", inactive.join(", "));
    }
    CacheMeta {
        fingerprint: resources.fingerprint().to_string(),
        rows: rows.len(),
        stances: Some(a.stances.display().to_string()),
        resources: Some(a.resources.display().to_string()),
        inactive_features: inactive.into_iter().map(String::from).collect(),
    }
    .save(&a.out)?;
    write_run_record(cli, &a.out, false)
}

fn split_texts(ds: &Dataset) -> impl Iterator<Item = &str> {
    let bodies: HashSet<u32> = ds.instances().iter().map(|i| i.body_id).collect();
    let mut ids: Vec<u32> = bodies.into_iter().collect();
    ids.sort_unstable();
    ds.instances()
        .iter()
        .map(|i| i.headline.as_str())
        .chain(ids.into_iter().map(move |id| ds.body(id).text.as_str()))
}

fn apply_params(p: &mut TrainParams, o: &ParamArgs, seed: u64) {
    if let Some(v) = o.rounds {
        p.n_rounds = v;
    }
    if let Some(v) = o.learning_rate {
        p.learning_rate = v;
    }
    if let Some(v) = o.max_depth {
        p.max_depth = v;
    }
    if let Some(v) = o.lambda {
        p.lambda_l2 = v;
    }
    if let Some(v) = o.gamma {
        p.gamma_min_gain = v;
    }
    if let Some(v) = o.min_child_weight {
        p.min_child_weight = v;
    }
    if let Some(v) = o.subsample {
        p.subsample = v;
    }
    if let Some(v) = o.colsample {
        p.colsample = v;
    }
    p.seed = seed;
}

fn build_plan(a: &PlanArgs, seed: u64) -> Result<StagePlan> {
    let mut plan = match &a.plan_file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing plan {}", p.display()))?
        }
        None => {
            let variant: Variant = a.plan.parse().map_err(|e: String| anyhow!(e))?;
            StagePlan::new(variant, TrainParams::default())
        }
    };
    apply_params(&mut plan.stage1_params, &a.params, seed);
    apply_params(&mut plan.stage2_params, &a.params, seed.wrapping_add(1));
    if a.oversample_disagree {
        plan.oversample = Some(Oversample::disagree_to_agree(seed));
    }
    plan.validate()?;
    Ok(plan)
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let rows = read_feature_cache(&a.features)?;
    let meta = CacheMeta::load(&a.features).context("reading the feature cache metadata")?;
    let plan = build_plan(&a.plan, cli.seed)?;
    let mut pipeline = train_on_features(&plan, &rows, &meta.fingerprint)?;
    if let Some(dir) = &meta.resources {
        pipeline.resources = Some(FeatureResources::load(dir).with_context(|| format!("loading resources {dir}"))?);
    }
    pipeline.save(&a.out)?;
    write_run_record(cli, &a.out, true)
}

fn cmd_predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let pipeline = TrainedPipeline::load(&a.bundle)?;
    let rows = read_feature_cache(&a.features)?;
    let meta = CacheMeta::load(&a.features).context("reading the feature cache metadata")?;
    let pred = pipeline.predict(&rows, &meta.fingerprint)?;
    let stances_path = match (&a.stances, &meta.stances) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => bail!("the cache does not record its stances file; pass --stances"),
    };
    let instances = load_stances(&stances_path, false)?;
    let by_pair: Vec<_> = rows
        .iter()
        .map(|r| {
            instances
                .get(r.pair_id)
                .cloned()
                .ok_or_else(|| anyhow!("pair {} is not in {}", r.pair_id, stances_path.display()))
        })
        .collect::<Result<_>>()?;
    write_predictions(&a.out, &by_pair, &pred)?;
    write_run_record(cli, &a.out, false)
}

fn cmd_score(cli: &Cli, a: &ScoreArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse().map_err(|e: String| anyhow!(e))?;
    let report = score_files(&a.truth, &a.pred)?;
    let text = render_report(&report, format);
    print!("{text}");
    if let Some(out) = &a.out {
        write_report(out, &text)?;
        write_run_record(cli, out, false)?;
    }
    Ok(())
}

fn cmd_gridsearch(cli: &Cli, a: &GridArgs) -> Result<()> {
    let text = fs::read_to_string(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?;
    let grid: Grid = serde_json::from_str(&text).with_context(|| format!("parsing grid {}", a.grid.display()))?;
    grid.validate()?;
    let template = build_plan(&a.plan, cli.seed)?;
    let ds = Dataset::load(&a.stances, &a.bodies, true)?;
    let cfg = feature_config(&a.fit, cli.seed)?;
    if a.fit.lda.is_some() {
        bail!("--lda cannot be used with gridsearch: topic models are refit on every fold");
    }
    let lex = lexicon(&a.fit)?;
    if lex != LexiconSentiment::default() {
        bail!("custom lexicons are not supported by gridsearch");
    }
    let embeddings = match &a.fit.embeddings {
        Some(p) => {
            let unstemmed = PreprocessConfig {
                stem: false,
                ..cfg.preprocess.clone()
            };
            let vocab: HashSet<String> = split_texts(&ds)
                .flat_map(|t| preprocess(t, &unstemmed).tokens)
                .collect();
            Some(load_vectors(p, &vocab)?)
        }
        None => None,
    };
    let side = LoadedSidecars::load(&a.sidecars, cfg.preprocess.stem)?;
    let report = grid_search(
        &template,
        &grid,
        &ds,
        a.folds,
        cli.seed,
        refit_per_fold(&cfg, embeddings, side.view()),
    )?;
    write_report(&a.out, &report.to_tsv())?;
    if let Some(p) = &a.best_plan {
        fs::write(p, serde_json::to_string_pretty(&report.best_plan)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let best = &report.rows[report.best];
    println!("best mean relative score {:.6} at {:?}", best.mean_relative, best.point);
    write_run_record(cli, &a.out, false)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::LdaTrain(a) => cmd_lda_train(cli, a),
        Command::Features(a) => cmd_features(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Predict(a) => cmd_predict(cli, a),
        Command::Score(a) => cmd_score(cli, a),
        Command::Gridsearch(a) => cmd_gridsearch(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
