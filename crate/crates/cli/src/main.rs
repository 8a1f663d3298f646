use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use labelgcn::config::{manifest, parse_key_values, Command, KeyValues, RunConfig};
use labelgcn::data::{build_input, features_only, sample_split, visibility_for_phase, GraphDataset, Phase};
use labelgcn::metrics::{class_histogram, neighbor_label_average, write_histogram_csv};
use labelgcn::model::gradcheck::{random_case, GradCheckOptions};
use labelgcn::model::{checkpoint, embeddings, AdjointKind, GraphInput};
use labelgcn::sparse::normalize_adjacency;
use labelgcn::train::{
    derive_seed, evaluate, run_inductive_elliptic, run_transductive_sweep, train, Seeds, TrialInputs, Variant,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "labelgcn", version, about = "GCN and Label-GCN node classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one model and write its checkpoint, metrics and loss curve.
    Train(TrainArgs),
    /// Transductive support-fraction sweep over splits and initializations.
    Sweep(SweepArgs),
    /// Time-stepped inductive evaluation on Elliptic.
    Inductive(RunArgs),
    /// Finite-difference gradient check on a random graph.
    Gradcheck(GradcheckArgs),
    /// Histogram of the one-hop averaged label per class.
    AnalyzeLabels(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file (a run manifest works too).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 is the bit-exact reference mode, 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Extra config overrides, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// gcn or label-gcn.
    #[arg(long)]
    model: Option<String>,
    /// Also write last-hidden-layer embeddings of every node.
    #[arg(long)]
    embeddings: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Include the GCN baseline row.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Test hook: use a deliberately wrong adjoint.
    #[arg(long, hide = true)]
    corrupt_adjoint: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

/// A run that completed but missed its bar (diverged, too many aborts, failed check).
#[derive(Debug)]
struct ThresholdFailure(String);

impl std::fmt::Display for ThresholdFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ThresholdFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ThresholdFailure>().is_some() {
        return EXIT_FAILURE;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<labelgcn::Error>() {
            return match e {
                labelgcn::Error::Divergence { .. } | labelgcn::Error::TooManyAborts { .. } => EXIT_FAILURE,
                e if e.is_data_error() => EXIT_DATA,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Cmd::Train(a) => cmd_train(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Inductive(a) => cmd_inductive(a),
        Cmd::Gradcheck(a) => cmd_gradcheck(a),
        Cmd::AnalyzeLabels(a) => cmd_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Resolved config for a run, with the dataset loaded and the output
/// directory created.
struct Prepared {
    config: RunConfig,
    map: KeyValues,
    dataset: GraphDataset,
    out: PathBuf,
}

fn prepare(command: Command, args: &RunArgs, mut extra: KeyValues) -> anyhow::Result<Prepared> {
    let file = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_key_values(&text, p)?
        }
        None => KeyValues::new(),
    };
    let mut overrides = KeyValues::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got {kv:?}"))?;
        overrides.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(d) = &args.dataset {
        overrides.insert("dataset".into(), d.clone());
    }
    if let Some(d) = &args.data_dir {
        overrides.insert("data_dir".into(), d.display().to_string());
    }
    if let Some(s) = args.seed {
        overrides.insert("seed".into(), s.to_string());
    }
    if let Some(j) = args.jobs {
        overrides.insert("jobs".into(), j.to_string());
    }
    overrides.append(&mut extra);
    let (config, map) = RunConfig::resolve(command, &file, &overrides)?;
    if config.dataset != "synthetic" {
        match &config.data_dir {
            None => bail!("dataset {} needs --data-dir", config.dataset),
            Some(d) if !d.is_dir() => bail!("data directory {} does not exist", d.display()),
            Some(_) => {}
        }
    }
    let dataset = config.load_dataset()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    Ok(Prepared {
        config,
        map,
        dataset,
        out: args.out.clone(),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(p: &Prepared, command: &str) -> anyhow::Result<()> {
    write_file(&p.out.join("manifest.txt"), manifest(command, &p.map))
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut extra = KeyValues::new();
    if let Some(m) = &args.model {
        extra.insert("model".into(), m.clone());
    }
    let p = prepare(Command::Train, &args.run, extra)?;
    write_manifest(&p, "train")?;
    let (cfg, ds) = (&p.config, &p.dataset);
    let split = sample_split(ds, cfg.sizes, derive_seed(cfg.seed, 1, 0))?;
    let support_seed = derive_seed(cfg.seed, 2, 0);
    let ahat = normalize_adjacency(&ds.adjacency()?)?;
    let model = cfg.variant.model_config(ds, cfg.hidden_dim, cfg.dropout);
    let input = match cfg.variant {
        Variant::Gcn => features_only(ds),
        Variant::LabelGcn => build_input(ds, &visibility_for_phase(&split, Phase::Training, 0.0, support_seed)?),
    };
    let inputs = TrialInputs {
        dataset: ds,
        ahat: &ahat,
        input: &input,
        model,
    };
    let seeds = Seeds {
        init: derive_seed(cfg.seed, 3, 0),
        dropout: derive_seed(cfg.seed, 4, 0),
    };
    let (params, result) = train(&inputs, &split, &cfg.train, seeds)?;

    let inference_input = match cfg.variant {
        Variant::Gcn => input.clone(),
        Variant::LabelGcn => build_input(
            ds,
            &visibility_for_phase(&split, Phase::Inference, cfg.support_fraction, support_seed)?,
        ),
    };
    let graph = GraphInput::new(&model, &ahat, &inference_input)?;
    let inference_test = evaluate(&params, &model, &graph, ds, &split.test)?;

    checkpoint::save(&p.out.join("checkpoint.txt"), &model, &params)?;
    let metrics = serde_json::json!({
        "dataset": ds.name,
        "model": cfg.variant.name(),
        "seeds": seeds,
        "trial": result,
        "support_fraction": cfg.support_fraction,
        "inference_test": inference_test,
    });
    write_file(&p.out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    let mut curve = String::from("epoch,train_loss,validation_loss\n");
    for (e, l) in result.train_loss.iter().enumerate() {
        let v = result.validation_loss.get(e).map_or(String::new(), |v| v.to_string());
        curve.push_str(&format!("{},{l},{v}\n", e + 1));
    }
    write_file(&p.out.join("loss_curve.csv"), curve)?;
    if args.embeddings {
        let all: Vec<usize> = (0..ds.n()).collect();
        let emb = embeddings(&params, &model, &graph, &all)?;
        let mut f = std::io::BufWriter::new(create(&p.out.join("embeddings.csv"))?);
        write!(f, "node_id")?;
        for j in 0..emb.n_cols() {
            write!(f, ",h{j}")?;
        }
        writeln!(f)?;
        for (i, row) in emb.rows().enumerate() {
            write!(f, "{}", ds.node_ids[i])?;
            for v in row {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
    }
    let acc = |m: &Option<labelgcn::train::EvalMetrics>| m.as_ref().map_or("-".into(), |m| format!("{:.4}", m.accuracy));
    println!(
        "{} {}: best epoch {} of {}, test accuracy {} (training visibility), {} (support fraction {})",
        ds.name,
        cfg.variant.name(),
        result.best_epoch,
        result.epochs_run,
        acc(&result.test),
        acc(&inference_test),
        cfg.support_fraction
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let mut extra = KeyValues::new();
    if args.baseline {
        extra.insert("baseline".into(), "true".into());
    }
    let p = prepare(Command::Sweep, &args.run, extra)?;
    write_manifest(&p, "sweep")?;
    let report = run_transductive_sweep(&p.dataset, &p.config.sweep_config())?;
    report.write_csv(create(&p.out.join("sweep.csv"))?)?;
    write_file(&p.out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    println!("{} trials ({} aborted)", report.total_trials, report.aborted_trials);
    for row in &report.rows {
        let acc = &row.metrics.get("accuracy");
        let frac = row.support_fraction.map_or("-".into(), |f| f.to_string());
        let mut line = format!("{:<10} support {:<5} labels {:>5.1}%", row.variant.name(), frac, row.label_pct_total);
        if let Some(a) = acc {
            line += &format!("  accuracy {:.2} ± {:.2}", 100.0 * a.mean, 100.0 * a.std);
        }
        if let Some(f1) = row.metrics.get("f1") {
            line += &format!("  f1 {:.2} ± {:.2}", 100.0 * f1.mean, 100.0 * f1.std);
        }
        println!("{line}");
    }
    Ok(())
}

fn cmd_inductive(args: RunArgs) -> anyhow::Result<()> {
    let p = prepare(Command::Inductive, &args, KeyValues::new())?;
    write_manifest(&p, "inductive")?;
    let report = run_inductive_elliptic(&p.dataset, &p.config.inductive_config())?;
    report.write_summary_csv(create(&p.out.join("inductive_summary.csv"))?)?;
    report.write_steps_csv(create(&p.out.join("inductive_steps.csv"))?)?;
    write_file(&p.out.join("inductive.json"), serde_json::to_string_pretty(&report)?)?;
    let pct = |s: Option<labelgcn::metrics::Summary>| s.map_or("-".into(), |s| format!("{:.1} ± {:.1}", 100.0 * s.mean, 100.0 * s.std));
    for s in &report.summaries {
        println!(
            "{:<10} precision {}  recall {}  f1 {}  f1 t>={} {}",
            s.variant.name(),
            pct(s.precision),
            pct(s.recall),
            pct(s.f1),
            report.config.shutdown_step,
            pct(s.f1_post_shutdown)
        );
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    if args.nodes == 0 {
        bail!("--nodes must be >= 1");
    }
    let mut options = GradCheckOptions {
        seed: args.seed,
        ..Default::default()
    };
    if args.corrupt_adjoint {
        options.gradient.adjoint = AdjointKind::Corrupted;
    }
    let mut worst: f64 = 0.0;
    for masked in [false, true] {
        let report = random_case(args.nodes, masked, args.seed)?.check(options)?;
        let name = if masked { "label-gcn" } else { "gcn" };
        for t in &report.tensors {
            println!(
                "{name:<10} {:<3} coords {:>3}  kinks skipped {}  max rel error {:.3e}",
                t.name, t.coordinates, t.kinks_skipped, t.max_rel_error
            );
        }
        worst = worst.max(report.max_rel_error);
    }
    let pass = worst <= args.tolerance;
    println!("max relative error {worst:.3e} (tolerance {:.0e}): {}", args.tolerance, if pass { "PASS" } else { "FAIL" });
    if !pass {
        return Err(ThresholdFailure(format!("gradient check failed: {worst:.3e} > {:.0e}", args.tolerance)).into());
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let p = prepare(Command::Train, &args.run, KeyValues::new())?;
    write_manifest(&p, "analyze-labels")?;
    let ds = &p.dataset;
    let avg = neighbor_label_average(ds, &ds.adjacency()?)?;
    let bins = class_histogram(&avg, &ds.labels, ds.n_classes(), args.bins, (-1.0, 1.0))?;
    let path = p.out.join("label_histogram.csv");
    let mut f = create(&path)?;
    write_histogram_csv(&mut f, &bins, &ds.class_names)?;
    println!("wrote {}", path.display());
    Ok(())
}
