//! Command-line surface for prototype learning under DTW: classification
//! training/evaluation, 1-NN baselines, rank reports, weakly supervised
//! segmentation, summarization, and synthetic corpus generation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpdtw_core::data::{atomic_write, load_seg_corpus, load_ucr_pair, save_seg_corpus, save_ucr_tsv};
use dpdtw_core::dtw::BandConstraint;
use dpdtw_core::model::{Model, ModelMode};
use dpdtw_core::synth::{gen_synthetic, gen_tsc_pair, SynthConfig, SynthTscConfig};
use dpdtw_core::tsc::{
    comparison_report, dba_prototypes, knn1_predict, prototype_accuracy, select_window_loo,
    train_tsc, Knn1Metric, TscConfig, TscDataset,
};
use dpdtw_core::weak_seg::{
    evaluate_corpus, infer_num_classes, label_frames, retrieve_transcript, summarize,
    summary_accuracy, train_seg, uniform_key_frames, EncoderSpec, SegConfig, SegSample,
};
use dpdtw_core::DpDtwError;

#[derive(Parser)]
#[command(name = "dpdtw", version, about = "Discriminative prototypes under dynamic time warping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train classification prototypes on a UCR-format dataset directory.
    TrainTsc(TrainTscArgs),
    /// Evaluate a trained classification model; prints test accuracy.
    EvalTsc(EvalTscArgs),
    /// 1-NN and DBA nearest-centroid baselines; prints test accuracy.
    Baseline(BaselineArgs),
    /// Ranks and pairwise no-worse rates from an accuracy table CSV.
    Report(ReportArgs),
    /// Train a weakly supervised segmentation model from transcripts.
    TrainSeg(TrainSegArgs),
    /// Evaluate segmentation; prints F-acc/IoU/IoD, optionally writes labels.
    EvalSeg(EvalSegArgs),
    /// Action-based key frames; prints indices and the matching rate.
    Summarize(SummarizeArgs),
    /// Generate a synthetic corpus with ground truth.
    SynthGen(SynthGenArgs),
}

#[derive(Args)]
struct TrainTscArgs {
    /// Directory holding one *_TRAIN.tsv / *_TEST.tsv pair.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_fraction: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Sakoe-Chiba band width (full warping when omitted).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with a full training configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalTscArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Ed,
    Dtw,
    Dtww,
    Dba,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    /// Band width for dtww; selected by leave-one-out search when omitted.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV with header `dataset,<method>...` and one accuracy row per dataset.
    #[arg(long)]
    table: PathBuf,
}

#[derive(Args)]
struct TrainSegArgs {
    /// Line-delimited segmentation corpus.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Negatives sampled per step.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    tau_p: Option<usize>,
    /// identity, affine, or window:<w>.
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalSetting {
    /// Transcript given at test time.
    Alignment,
    /// Transcript retrieved from the reference set.
    Segmentation,
}

#[derive(Args)]
struct EvalSegArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    setting: EvalSetting,
    /// Directory for per-video predicted label files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFormat {
    /// Segmentation corpus (JSON lines).
    Seg,
    /// Classification pair (<out>_TRAIN.tsv / <out>_TEST.tsv).
    Ucr,
}

#[derive(Args)]
struct SynthGenArgs {
    /// Number of classes.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "seg")]
    format: SynthFormat,
    /// Feature dimension (seg format).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    template_len: Option<usize>,
    #[arg(long)]
    min_segments: Option<usize>,
    #[arg(long)]
    max_segments: Option<usize>,
    #[arg(long)]
    min_duration: Option<usize>,
    #[arg(long)]
    max_duration: Option<usize>,
    #[arg(long)]
    warp: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Distinct segment orderings to draw from (0 = unconstrained).
    #[arg(long)]
    orderings: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Errors at the CLI boundary, mapped onto exit codes.
enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<DpDtwError> for CliError {
    fn from(e: DpDtwError) -> Self {
        match e {
            DpDtwError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::TrainTsc(args) => cmd_train_tsc(args),
        Command::EvalTsc(args) => cmd_eval_tsc(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Report(args) => cmd_report(args),
        Command::TrainSeg(args) => cmd_train_seg(args),
        Command::EvalSeg(args) => cmd_eval_seg(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::SynthGen(args) => cmd_synth_gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_config_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Locate the single *_TRAIN.tsv / *_TEST.tsv pair in a dataset directory.
fn find_ucr_pair(dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    let mut trains = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?
            .path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with("_TRAIN.tsv") || name.ends_with("_TRAIN.csv") {
            trains.push(path);
        }
    }
    match trains.as_slice() {
        [train] => {
            let name = train.file_name().unwrap().to_str().unwrap();
            let test = train.with_file_name(name.replace("_TRAIN.", "_TEST."));
            if !test.exists() {
                return Err(CliError::Data(format!(
                    "missing test split {}",
                    test.display()
                )));
            }
            Ok((train.clone(), test))
        }
        [] => Err(CliError::Data(format!(
            "no *_TRAIN.tsv found in {}",
            dir.display()
        ))),
        _ => Err(CliError::Usage(format!(
            "multiple *_TRAIN.tsv files in {}, point --data at one dataset",
            dir.display()
        ))),
    }
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

fn cmd_train_tsc(args: TrainTscArgs) -> CliResult {
    let mut config: TscConfig = match &args.config {
        Some(path) => load_config_file(path)?,
        None => TscConfig::default(),
    };
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_fraction {
        config.batch_fraction = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(w) = args.window {
        config.band = BandConstraint::SakoeChiba { width: w };
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (train_path, _) = find_ucr_pair(&args.data)?;
    let train = dpdtw_core::data::load_ucr_tsv(&train_path).map_err(CliError::from)?;
    let model = train_tsc(&train, &config).map_err(CliError::from)?;
    model.save(&args.out).map_err(CliError::from)?;
    if let Some(last) = model.loss_history.last() {
        println!("final_loss\t{}", last.total);
    }
    println!("model\t{}", args.out.display());
    Ok(())
}

fn eval_tsc_accuracy(model: &Model, test: &TscDataset) -> Result<f64, CliError> {
    let band = model
        .tsc_config
        .as_ref()
        .map(|c| c.band)
        .unwrap_or(BandConstraint::None);
    prototype_accuracy(test, &model.protoset, band).map_err(CliError::from)
}

fn cmd_eval_tsc(args: EvalTscArgs) -> CliResult {
    let model = Model::load(&args.model).map_err(CliError::from)?;
    if model.mode != ModelMode::Tsc {
        return Err(CliError::Usage("model was not trained for classification".into()));
    }
    let (train_path, test_path) = find_ucr_pair(&args.data)?;
    let (_, test) = load_ucr_pair(&train_path, &test_path).map_err(CliError::from)?;
    if test.vocab != model.vocab {
        return Err(CliError::Data(
            "dataset vocabulary differs from the model's".into(),
        ));
    }
    println!("accuracy\t{}", eval_tsc_accuracy(&model, &test)?);
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> CliResult {
    let (train_path, test_path) = find_ucr_pair(&args.data)?;
    let (train, test) = load_ucr_pair(&train_path, &test_path).map_err(CliError::from)?;
    let acc = match args.method {
        BaselineMethod::Ed => {
            let pred = knn1_predict(&test.sequences, &train.sequences, &train.labels, Knn1Metric::Euclidean)
                .map_err(CliError::from)?;
            accuracy(&pred, &test.labels)
        }
        BaselineMethod::Dtw => {
            let pred = knn1_predict(&test.sequences, &train.sequences, &train.labels, Knn1Metric::Dtw)
                .map_err(CliError::from)?;
            accuracy(&pred, &test.labels)
        }
        BaselineMethod::Dtww => {
            let width = match args.window {
                Some(w) => w,
                None => {
                    let w = select_window_loo(&train.sequences, &train.labels)
                        .map_err(CliError::from)?;
                    println!("window\t{w}");
                    w
                }
            };
            let pred = knn1_predict(
                &test.sequences,
                &train.sequences,
                &train.labels,
                Knn1Metric::DtwWindowed { width },
            )
            .map_err(CliError::from)?;
            accuracy(&pred, &test.labels)
        }
        BaselineMethod::Dba => dba_accuracy(&train, &test).map_err(CliError::from)?,
    };
    println!("accuracy\t{acc}");
    Ok(())
}

/// Nearest-centroid classification with per-class DBA averages.
fn dba_accuracy(train: &TscDataset, test: &TscDataset) -> Result<f64, DpDtwError> {
    let protoset = dba_prototypes(train)?;
    prototype_accuracy(test, &protoset, BandConstraint::None)
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let text = fs::read_to_string(&args.table)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.table.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data("empty table".into()))?;
    let methods: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut names = Vec::new();
    let mut accuracies = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        names.push(fields.next().unwrap_or("").trim().to_string());
        let row: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    CliError::Data(format!("bad accuracy {f:?} on data row {}", i + 1))
                })
            })
            .collect::<Result<_, _>>()?;
        accuracies.push(row);
    }
    let report = comparison_report(&methods, &accuracies).map_err(CliError::from)?;
    println!("method\tavg_rank");
    for (m, r) in report.methods.iter().zip(&report.average_ranks) {
        println!("{m}\t{r}");
    }
    println!("no_worse\t{}", report.methods.join("\t"));
    for (a, row) in report.methods.iter().zip(&report.no_worse) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        println!("{a}\t{}", cells.join("\t"));
    }
    Ok(())
}

fn parse_encoder(text: &str) -> Result<EncoderSpec, CliError> {
    match text {
        "identity" => Ok(EncoderSpec::Identity),
        "affine" => Ok(EncoderSpec::Affine),
        other => match other.strip_prefix("window:") {
            Some(w) => w
                .parse::<usize>()
                .ok()
                .filter(|w| *w >= 1)
                .map(|size| EncoderSpec::Window { size })
                .ok_or_else(|| CliError::Usage(format!("bad window size in {other:?}"))),
            None => Err(CliError::Usage(format!(
                "unknown encoder {other:?}; expected identity, affine, or window:<w>"
            ))),
        },
    }
}

fn cmd_train_seg(args: TrainSegArgs) -> CliResult {
    let mut config: SegConfig = match &args.config {
        Some(path) => load_config_file(path)?,
        None => SegConfig::default(),
    };
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.delta {
        config.delta = v;
    }
    if let Some(v) = args.q {
        config.num_negatives = v;
    }
    if let Some(v) = args.tau_p {
        config.tau_p = v;
    }
    if let Some(text) = &args.encoder {
        config.encoder = parse_encoder(text)?;
    }
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.batch {
        config.batch_size = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let samples = load_seg_corpus(&args.data).map_err(CliError::from)?;
    let k = infer_num_classes(&samples);
    let vocab: Vec<String> = (1..=k).map(|c| c.to_string()).collect();
    let model = train_seg(&samples, &config, vocab).map_err(CliError::from)?;
    model.save(&args.out).map_err(CliError::from)?;
    if let Some(last) = model.loss_history.last() {
        println!("final_loss\t{}", last.total);
    }
    println!("model\t{}", args.out.display());
    Ok(())
}

fn seg_predictions(
    model: &Model,
    samples: &[SegSample],
    setting: EvalSetting,
) -> Result<Vec<Vec<usize>>, CliError> {
    let reference = model
        .reference_set
        .as_ref()
        .ok_or_else(|| CliError::Data("model has no reference set".into()))?;
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        let encoded =
            dpdtw_core::weak_seg::encode(&sample.frames, &model.encoder).map_err(CliError::from)?;
        let transcript = match setting {
            EvalSetting::Alignment => sample.transcript.clone(),
            EvalSetting::Segmentation => {
                retrieve_transcript(&encoded, reference, &model.protoset)
                    .map_err(CliError::from)?
                    .0
            }
        };
        out.push(label_frames(&encoded, &transcript, &model.protoset).map_err(CliError::from)?);
    }
    Ok(out)
}

fn cmd_eval_seg(args: EvalSegArgs) -> CliResult {
    let model = Model::load(&args.model).map_err(CliError::from)?;
    if model.mode != ModelMode::Segmentation {
        return Err(CliError::Usage("model was not trained for segmentation".into()));
    }
    let samples = load_seg_corpus(&args.data).map_err(CliError::from)?;
    let preds = seg_predictions(&model, &samples, args.setting)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        for (sample, pred) in samples.iter().zip(&preds) {
            let lines: Vec<String> = pred.iter().map(|l| l.to_string()).collect();
            let path = dir.join(format!("{}.labels.txt", sample.id));
            atomic_write(&path, (lines.join("\n") + "\n").as_bytes()).map_err(CliError::from)?;
        }
    }
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = samples
        .iter()
        .zip(&preds)
        .filter_map(|(s, p)| s.gt_labels.as_ref().map(|gt| (p.clone(), gt.clone())))
        .collect();
    if pairs.is_empty() {
        println!("metrics\tunavailable (no ground-truth labels in corpus)");
        return Ok(());
    }
    let metrics = evaluate_corpus(&pairs, None).map_err(CliError::from)?;
    println!("f_acc\t{}", metrics.f_acc);
    println!("iou\t{}", metrics.iou);
    println!("iod\t{}", metrics.iod);
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> CliResult {
    let model = Model::load(&args.model).map_err(CliError::from)?;
    if model.mode != ModelMode::Segmentation {
        return Err(CliError::Usage("model was not trained for segmentation".into()));
    }
    let samples = load_seg_corpus(&args.data).map_err(CliError::from)?;
    let tau_p = model.protoset.tau_p();
    let mut rate_sum = 0.0;
    let mut uniform_sum = 0.0;
    let mut rated = 0usize;
    for sample in &samples {
        let encoded =
            dpdtw_core::weak_seg::encode(&sample.frames, &model.encoder).map_err(CliError::from)?;
        let keys = summarize(&encoded, &sample.transcript, &model.protoset)
            .map_err(CliError::from)?;
        let cells: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        println!("{}\t{}", sample.id, cells.join(","));
        if let Some(gt) = &sample.gt_labels {
            rate_sum +=
                summary_accuracy(&keys, gt, &sample.transcript, tau_p).map_err(CliError::from)?;
            let uniform = uniform_key_frames(sample.frames.len(), keys.len());
            uniform_sum += summary_accuracy(&uniform, gt, &sample.transcript, tau_p)
                .map_err(CliError::from)?;
            rated += 1;
        }
    }
    if rated > 0 {
        println!("matching_rate\t{}", rate_sum / rated as f64);
        println!("uniform_matching_rate\t{}", uniform_sum / rated as f64);
    }
    Ok(())
}

fn cmd_synth_gen(args: SynthGenArgs) -> CliResult {
    match args.format {
        SynthFormat::Seg => {
            let mut config: SynthConfig = match &args.config {
                Some(path) => load_config_file(path)?,
                None => SynthConfig::default(),
            };
            if let Some(v) = args.k {
                config.num_classes = v;
            }
            if let Some(v) = args.m {
                config.dim = v;
            }
            if let Some(v) = args.template_len {
                config.template_len = v;
            }
            if let Some(v) = args.min_segments {
                config.segments.0 = v;
            }
            if let Some(v) = args.max_segments {
                config.segments.1 = v;
            }
            if let Some(v) = args.min_duration {
                config.duration.0 = v;
            }
            if let Some(v) = args.max_duration {
                config.duration.1 = v;
            }
            if let Some(v) = args.warp {
                config.warp_jitter = v;
            }
            if let Some(v) = args.noise {
                config.noise_sigma = v;
            }
            if let Some(v) = args.samples {
                config.samples = v;
            }
            if let Some(v) = args.orderings {
                config.num_orderings = v;
            }
            if let Some(v) = args.seed {
                config.seed = v;
            }
            config
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let samples = gen_synthetic(&config).map_err(CliError::from)?;
            save_seg_corpus(&args.out, &samples).map_err(CliError::from)?;
            println!("corpus\t{}\t{} samples", args.out.display(), samples.len());
        }
        SynthFormat::Ucr => {
            let mut config: SynthTscConfig = match &args.config {
                Some(path) => load_config_file(path)?,
                None => SynthTscConfig::default(),
            };
            if let Some(v) = args.k {
                config.num_classes = v;
            }
            if let Some(v) = args.template_len {
                config.template_len = v;
            }
            if let Some(v) = args.warp {
                config.warp_jitter = v;
            }
            if let Some(v) = args.noise {
                config.noise_sigma = v;
            }
            if let Some(v) = args.seed {
                config.seed = v;
            }
            let (train, test) = gen_tsc_pair(&config).map_err(CliError::from)?;
            let stem = args.out.display();
            let train_path = PathBuf::from(format!("{stem}_TRAIN.tsv"));
            let test_path = PathBuf::from(format!("{stem}_TEST.tsv"));
            save_ucr_tsv(&train_path, &train).map_err(CliError::from)?;
            save_ucr_tsv(&test_path, &test).map_err(CliError::from)?;
            println!("train\t{}", train_path.display());
            println!("test\t{}", test_path.display());
        }
    }
    Ok(())
}
