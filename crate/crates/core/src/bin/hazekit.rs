use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use hazekit::classifier::{
    accuracy, load_weights, save_weights, train_reference, Classifier, ReferenceClassifier, TrainConfig,
};
use hazekit::harness::{
    correlation_report, desk_corpus, haze_contact_sheet, run_attack_batch, transfer_report, write_corpus,
    Corpus, DeskCorpusConfig, ModelSpec, RunConfig,
};
use hazekit::imagecore::{load_depth, load_image, save_image, synthetic_depth, DepthMap, SyntheticDepth};

#[derive(Parser)]
#[command(name = "hazekit", version, about = "Adversarial haze attacks and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Attack every image of a corpus and write results.jsonl, summary.json and adv/.
    Attack(AttackArgs),
    /// Render a grid of homogeneous haze over atmospheric light and density values.
    Grid(GridArgs),
    /// Evaluate saved adversarial images on other models.
    Transfer(TransferArgs),
    /// IoU of the success sets of several runs.
    Correlate(CorrelateArgs),
    /// Train the reference CNN on a labelled corpus.
    TrainRef(TrainArgs),
    /// Clean accuracy of a model on a labelled corpus.
    Eval(EvalArgs),
    /// Print the logits of one PNG as a JSON array (external-classifier protocol).
    Classify(ClassifyArgs),
    /// Generate the bundled 10-class desk corpus as train/ and test/ directories.
    DeskCorpus(DeskArgs),
}

#[derive(Args)]
struct AttackArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    depth_dir: Option<PathBuf>,
    /// h-ramp, v-ramp, radial or constant:<c>
    #[arg(long)]
    synthetic_depth: Option<String>,
    /// hadvhaze, iadvhaze, fgsm, ifgsm or mifgsm
    #[arg(long)]
    attack: Option<String>,
    /// Reference CNN weight file.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value = "reference")]
    model_name: String,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    eps_a: Option<f64>,
    #[arg(long)]
    eps_b: Option<f64>,
    /// Step size for both haze parameters.
    #[arg(long)]
    alpha: Option<f64>,
    /// Filter width for both haze fields.
    #[arg(long)]
    sigma: Option<f64>,
    /// Pixel-space radius for the baselines.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    no_images: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    image: PathBuf,
    /// PFM depth map; a synthetic ramp is used when absent.
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long, default_value = "v-ramp")]
    synthetic_depth: SyntheticDepth,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.9,1.0")]
    a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.10,0.15,0.20")]
    b: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    /// Run directories produced by `attack`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// JSON array of model specs: {"name": .., "model": {"reference": {"weights": ..}}}
    /// or {"name": .., "model": {"external": {"command": [..], "num_classes": N}}}.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().input_side)]
    side: usize,
    #[arg(long, default_value_t = TrainConfig::default().num_classes)]
    classes: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clean accuracy on this corpus is added to the report.
    #[arg(long)]
    test_corpus: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, conflicts_with = "model_spec", required_unless_present = "model_spec")]
    weights: Option<PathBuf>,
    /// JSON model spec, as in `transfer --models`.
    #[arg(long)]
    model_spec: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    weights: PathBuf,
    image: PathBuf,
}

#[derive(Args)]
struct DeskArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DeskCorpusConfig::default().side)]
    side: usize,
    #[arg(long, default_value_t = DeskCorpusConfig::default().train_size)]
    train_size: usize,
    #[arg(long, default_value_t = DeskCorpusConfig::default().test_size)]
    test_size: usize,
    #[arg(long, default_value_t = DeskCorpusConfig::default().crop_min)]
    crop_min: f64,
    #[arg(long, default_value_t = DeskCorpusConfig::default().crop_max)]
    crop_max: f64,
    #[arg(long)]
    no_jitter: bool,
    /// Keep colour instead of converting crops to grey.
    #[arg(long)]
    color: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn set(obj: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        obj.insert(key.into(), v);
    }
}

fn run_config(args: &AttackArgs) -> Result<RunConfig> {
    let mut root = match &args.config {
        Some(p) => serde_json::from_str::<Value>(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => json!({}),
    };
    let obj = root.as_object_mut().context("config must be a JSON object")?;
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| json!(p));
    set(obj, "corpus_dir", path(&args.corpus_dir));
    set(obj, "depth_dir", path(&args.depth_dir));
    set(obj, "output_dir", path(&args.output_dir));
    set(
        obj,
        "synthetic_depth",
        args.synthetic_depth.as_ref().map(|s| json!(s)),
    );
    set(
        obj,
        "attack",
        args.attack.as_ref().map(|s| json!(s.to_ascii_lowercase())),
    );
    set(obj, "seed", args.seed.map(|v| json!(v)));
    set(obj, "parallelism", args.parallelism.map(|v| json!(v)));
    set(obj, "limit", args.limit.map(|v| json!(v)));
    if args.no_images {
        obj.insert("save_images".into(), json!(false));
    }
    if let Some(w) = &args.weights {
        obj.insert(
            "classifier".into(),
            json!({"name": args.model_name, "model": {"reference": {"weights": w}}}),
        );
    }
    let haze = obj
        .entry("attack_params")
        .or_insert_with(|| json!({}))
        .as_object_mut()
        .context("attack_params must be an object")?;
    set(haze, "n", args.n.map(|v| json!(v)));
    set(haze, "mu", args.mu.map(|v| json!(v)));
    set(haze, "a0", args.a0.map(|v| json!(v)));
    set(haze, "b0", args.b0.map(|v| json!(v)));
    set(haze, "eps_a", args.eps_a.map(|v| json!(v)));
    set(haze, "eps_b", args.eps_b.map(|v| json!(v)));
    set(haze, "alpha_a", args.alpha.map(|v| json!(v)));
    set(haze, "alpha_b", args.alpha.map(|v| json!(v)));
    set(haze, "sigma_a", args.sigma.map(|v| json!(v)));
    set(haze, "sigma_b", args.sigma.map(|v| json!(v)));
    let pixel = obj
        .entry("pixel_params")
        .or_insert_with(|| json!({}))
        .as_object_mut()
        .context("pixel_params must be an object")?;
    set(pixel, "eps", args.eps.map(|v| json!(v)));
    set(pixel, "n", args.n.map(|v| json!(v)));
    set(pixel, "mu", args.mu.map(|v| json!(v)));
    Ok(RunConfig::from_json(&root.to_string())?)
}

fn load_depth_or_synthetic(
    path: Option<&Path>,
    kind: SyntheticDepth,
    dims: (usize, usize),
) -> Result<DepthMap> {
    match path {
        Some(p) => {
            let field = load_depth(p)?;
            if field.dims() != dims {
                bail!(
                    "depth {} is {}x{}, image is {}x{}",
                    p.display(),
                    field.height(),
                    field.width(),
                    dims.0,
                    dims.1
                );
            }
            Ok(DepthMap::new(field)?)
        }
        None => Ok(synthetic_depth(kind, dims.0, dims.1)?),
    }
}

fn read_models(path: &Path) -> Result<Vec<ModelSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Attack(args) => {
            let cfg = run_config(&args)?;
            let summary = run_attack_batch(&cfg)?;
            print_json(&json!({
                "attack": summary.attack,
                "records": summary.records,
                "failures": summary.failures.len(),
                "clean_accuracy": summary.clean_accuracy,
                "success_rate_overall": summary.success_rate_overall,
                "success_rate_initially_correct": summary.success_rate_initially_correct,
                "output_dir": cfg.output_dir,
            }))?;
        }
        Command::Grid(args) => {
            let img = load_image(&args.image)?;
            let d = load_depth_or_synthetic(args.depth.as_deref(), args.synthetic_depth, img.dims())?;
            let sheet = haze_contact_sheet(&img, &d, &args.a, &args.b)?;
            save_image(&sheet, &args.out)?;
        }
        Command::Transfer(args) => {
            let models = read_models(&args.models)?;
            let table = transfer_report(&args.runs, &models, &args.out)?;
            print!("{}", table.to_csv());
        }
        Command::Correlate(args) => {
            let m = correlation_report(&args.runs, &args.out)?;
            print_json(&m)?;
        }
        Command::TrainRef(args) => {
            let corpus = Corpus::open(&args.corpus)?;
            let data = corpus.load_all()?;
            let cfg = TrainConfig {
                input_side: args.side,
                num_classes: args.classes,
                seed: args.seed,
                epochs: args.epochs,
                lr: args.lr,
            };
            let (weights, report) = train_reference(&data, &cfg)?;
            save_weights(&weights, &args.out)?;
            let test_accuracy = match &args.test_corpus {
                Some(dir) => {
                    let test = Corpus::open(dir)?.load_all()?;
                    Some(accuracy(&ReferenceClassifier::new(weights)?, &test)?)
                }
                None => None,
            };
            print_json(&json!({
                "train_accuracy": report.train_accuracy,
                "test_accuracy": test_accuracy,
                "epoch_loss": report.epoch_loss,
                "weights": args.out,
            }))?;
        }
        Command::Eval(args) => {
            let clf: Box<dyn Classifier> = match (&args.weights, &args.model_spec) {
                (Some(w), _) => Box::new(ReferenceClassifier::new(load_weights(w)?)?),
                (None, Some(spec)) => {
                    let text = std::fs::read_to_string(spec)?;
                    serde_json::from_str::<ModelSpec>(&text)?.load()?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let data = Corpus::open(&args.corpus)?.load_all()?;
            print_json(&json!({
                "images": data.len(),
                "accuracy": accuracy(clf.as_ref(), &data)?,
            }))?;
        }
        Command::Classify(args) => {
            let clf = ReferenceClassifier::new(load_weights(&args.weights)?)?;
            let logits = clf.logits(&load_image(&args.image)?)?;
            println!("{}", serde_json::to_string(logits.values())?);
        }
        Command::DeskCorpus(args) => {
            let cfg = DeskCorpusConfig {
                side: args.side,
                crop_min: args.crop_min,
                crop_max: args.crop_max,
                jitter: !args.no_jitter,
                grayscale: !args.color,
                train_size: args.train_size,
                test_size: args.test_size,
                seed: args.seed,
            };
            let (train, test) = desk_corpus(&cfg)?;
            write_corpus(args.out.join("train"), "train", &train)?;
            write_corpus(args.out.join("test"), "test", &test)?;
        }
    }
    Ok(())
}
