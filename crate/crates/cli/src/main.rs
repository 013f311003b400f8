//! Command-line interface to the pescan pipeline: extract features from
//! directories of executables, train and evaluate classifiers, scan
//! directories with a trained model, and render reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 when a
//! scan classified at least one file as malicious.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pescan_core::behavior::BehaviorCategoryMap;
use pescan_core::classify::ClassifierKind;
use pescan_core::eval::{run_experiment_matrix, ExperimentResult, Protocol};
use pescan_core::features::{
    content_hash, extract_raw, read_corpus, write_corpus, AppendOutcome, ClassLabel, Corpus, Label,
};
use pescan_core::pca::PcaTarget;
use pescan_core::pe::{detect_packer, is_pe, parse_pe};
use pescan_core::pipeline::{
    build_pipeline, load_model, save_model, scan_directory, FamilySet, PipelineConfig, ScanEntry,
    ScanOptions,
};
use pescan_core::report;
use pescan_core::select::{DEFAULT_K_API, DEFAULT_K_DLL, DEFAULT_K_HEADER};
use pescan_core::synth::{gen_corpus, profiles, CorpusProfile};

/// Environment variable naming a behavior-map file that overrides the
/// built-in category patterns.
const BEHAVIOR_MAP_ENV: &str = "PESCAN_BEHAVIOR_MAP";

#[derive(Parser)]
#[command(
    name = "pescan",
    version,
    about = "Static PE malware detection: feature mining, selection, PCA, and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse PE files under a directory and append their features to a corpus file
    Extract(ExtractArgs),
    /// Train a pipeline model on a labeled corpus
    Train(TrainArgs),
    /// Cross-validate the feature-family × classifier experiment matrix
    Evaluate(EvaluateArgs),
    /// Classify every PE file under a directory with a trained model
    Scan(ScanArgs),
    /// Render a results or scan records file
    Report(ReportArgs),
    /// Generate a synthetic PE corpus
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory to walk (recursively) for PE files
    dir: PathBuf,
    /// Label recorded on every extracted file
    #[arg(long, value_parser = parse_class_label)]
    label: Label,
    /// Corpus file to create or append to
    #[arg(short, long)]
    output: PathBuf,
    /// Also extract files that look packed (skipped by default)
    #[arg(long)]
    include_packed: bool,
}

fn parse_class_label(s: &str) -> Result<Label, String> {
    match s {
        "malicious" => Ok(Label::Malicious),
        "benign" => Ok(Label::Benign),
        other => Err(format!("label must be malicious or benign, got {other:?}")),
    }
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse()
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file produced by `extract`
    #[arg(short, long)]
    corpus: PathBuf,
    /// Classifier to train: nb, tree, or svm
    #[arg(long, value_parser = parse_classifier)]
    classifier: ClassifierKind,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    pca: PcaFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the full header/DLL/API rankings as text tables
    #[arg(long)]
    rankings_out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectionFlags {
    /// Header features to keep (top-k by information gain)
    #[arg(long, default_value_t = DEFAULT_K_HEADER)]
    k_header: usize,
    /// DLL features to keep (top-k by calling frequency)
    #[arg(long, default_value_t = DEFAULT_K_DLL)]
    k_dll: usize,
    /// API features to keep (top-k by calling frequency)
    #[arg(long, default_value_t = DEFAULT_K_API)]
    k_api: usize,
}

#[derive(Args)]
struct PcaFlags {
    /// Reduce to a fixed number of principal components
    #[arg(long, conflicts_with = "pca_variance")]
    pca_components: Option<usize>,
    /// Reduce to the smallest component count explaining this variance fraction
    #[arg(long)]
    pca_variance: Option<f64>,
}

impl PcaFlags {
    fn target(&self) -> PcaTarget {
        match (self.pca_components, self.pca_variance) {
            (Some(k), _) => PcaTarget::Components(k),
            (None, Some(f)) => PcaTarget::VarianceFraction(f),
            (None, None) => PcaTarget::default(),
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corpus file produced by `extract`
    #[arg(short, long)]
    corpus: PathBuf,
    /// Fit selection and PCA once on the full corpus instead of per fold
    /// (leaks held-out information; for comparison only)
    #[arg(long)]
    paper_protocol: bool,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    pca: PcaFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results file to write (one JSON record per experiment)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Table,
    Records,
}

#[derive(Args)]
struct ScanArgs {
    /// Directory to scan
    dir: PathBuf,
    /// Trained model file
    #[arg(short, long)]
    model: PathBuf,
    /// Classify likely-packed files instead of skipping them
    #[arg(long)]
    no_skip_packed: bool,
    /// Do not descend into subdirectories
    #[arg(long)]
    no_recursive: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
struct ReportArgs {
    /// Records file written by `evaluate -o` or `scan --format records`
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Disjoint API vocabularies and header ranges per class
    Separable,
    /// Identical distributions for both classes (no signal)
    NullSignal,
    /// Class signal in header fields only; shared DLL/API pools
    HeaderSignal,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Output directory (receives malicious/, benign/, manifest.tsv)
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    malicious: usize,
    #[arg(long, default_value_t = 100)]
    benign: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "separable",
          conflicts_with_all = ["profile_malicious", "profile_benign"])]
    preset: Preset,
    /// JSON CorpusProfile file for the malicious class
    #[arg(long, requires = "profile_benign")]
    profile_malicious: Option<PathBuf>,
    /// JSON CorpusProfile file for the benign class
    #[arg(long, requires = "profile_malicious")]
    profile_benign: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Report(args) => cmd_report(args),
        Command::GenCorpus(args) => cmd_gen_corpus(args),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<ExitCode> {
    let mut corpus = if args.output.exists() {
        read_corpus(&args.output).context("reading existing corpus")?
    } else {
        Corpus::new()
    };

    let mut paths = walk_files(&args.dir)?;
    paths.sort();

    let (mut added, mut duplicates, mut not_pe, mut packed, mut errors) = (0, 0, 0, 0, 0);
    for path in paths {
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("warning: {}: {e}", path.display());
                errors += 1;
                continue;
            }
        };
        if !is_pe(&bytes) {
            not_pe += 1;
            continue;
        }
        let pe = match parse_pe(&bytes) {
            Ok(pe) => pe,
            Err(e) => {
                eprintln!("warning: {}: {e}", path.display());
                errors += 1;
                continue;
            }
        };
        if !args.include_packed && detect_packer(&pe).likely_packed {
            packed += 1;
            continue;
        }
        let record = extract_raw(
            &pe,
            args.label,
            &path.to_string_lossy(),
            content_hash(&bytes),
        );
        match corpus.append(record) {
            AppendOutcome::Added => added += 1,
            AppendOutcome::Duplicate => duplicates += 1,
        }
    }

    write_corpus(&corpus, &args.output).context("writing corpus")?;
    println!(
        "{added} extracted, {duplicates} duplicates, {not_pe} not PE, {packed} packed skipped, {errors} errors"
    );
    println!(
        "corpus now holds {} records ({} malicious, {} benign) at {}",
        corpus.len(),
        corpus.count(Label::Malicious),
        corpus.count(Label::Benign),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn walk_files(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.exists() {
        bail!("{} does not exist", root.display());
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry?;
        if entry.file_type().is_file() {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus).context("reading corpus")?;
    let config = PipelineConfig {
        k_header: args.selection.k_header,
        k_dll: args.selection.k_dll,
        k_api: args.selection.k_api,
        pca_target: args.pca.target(),
        classifier: args.classifier,
        seed: args.seed,
        ..Default::default()
    };
    let model = build_pipeline(&corpus, &config).context("training pipeline")?;
    save_model(&model, &args.output).context("writing model")?;

    if let Some(path) = &args.rankings_out {
        use pescan_core::select::{rank_call_frequency, rank_header_features, FeatureFamily};
        let mut text = String::new();
        let header = rank_header_features(&corpus, config.n_bins).context("ranking headers")?;
        text.push_str("PE header features by information gain\n\n");
        text.push_str(&report::ranking_table(&header.features)?);
        for (title, family) in [
            ("DLL names by calling frequency", FeatureFamily::Dll),
            ("API functions by calling frequency", FeatureFamily::Api),
        ] {
            let ranked = rank_call_frequency(&corpus, family);
            if !ranked.is_empty() {
                text.push_str(&format!("\n{title}\n\n"));
                text.push_str(&report::ranking_table(&ranked)?);
            }
        }
        fs::write(path, text).context("writing rankings")?;
        println!("rankings written to {}", path.display());
    }

    println!(
        "trained {} on {} records: schema {} -> {} components, training OA {:.1}%",
        args.classifier,
        corpus.len(),
        model.stages.schema.dimension(),
        model.stages.pca.dim_out,
        model.metadata.training_oa
    );
    println!("model written to {}", args.output.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus).context("reading corpus")?;
    let config = PipelineConfig {
        k_header: args.selection.k_header,
        k_dll: args.selection.k_dll,
        k_api: args.selection.k_api,
        pca_target: args.pca.target(),
        seed: args.seed,
        ..Default::default()
    };
    let protocol = if args.paper_protocol {
        Protocol::GlobalFit
    } else {
        Protocol::LeakFree
    };
    let kinds = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::LinearSvm,
        ClassifierKind::DecisionTree,
    ];
    let results = run_experiment_matrix(
        &corpus,
        &FamilySet::experiment_rows(),
        &kinds,
        &config,
        args.folds,
        args.seed,
        protocol,
    )
    .context("cross-validating")?;

    print!("{}", report::experiment_table(&results)?);
    if let Some(path) = &args.output {
        fs::write(path, report::experiment_records(&results)).context("writing results")?;
        println!("results written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn behavior_map() -> Result<BehaviorCategoryMap> {
    match std::env::var_os(BEHAVIOR_MAP_ENV) {
        Some(path) => BehaviorCategoryMap::load(Path::new(&path))
            .with_context(|| format!("loading behavior map from {}", Path::new(&path).display())),
        None => Ok(BehaviorCategoryMap::default()),
    }
}

fn cmd_scan(args: ScanArgs) -> Result<ExitCode> {
    let model = load_model(&args.model).context("loading model")?;
    let map = behavior_map()?;
    let entries = scan_directory(
        &args.dir,
        &model,
        &map,
        ScanOptions {
            recursive: !args.no_recursive,
            skip_packed: !args.no_skip_packed,
        },
    )
    .context("scanning")?;

    match args.format {
        OutputFormat::Table => {
            if entries.is_empty() {
                println!("no files under {}", args.dir.display());
            } else {
                print!("{}", report::scan_table(&entries)?);
            }
            println!("{}", report::scan_summary(&entries));
        }
        OutputFormat::Records => print!("{}", report::scan_records(&entries)),
    }

    let any_malicious = entries.iter().any(|e| {
        e.prediction
            .map(|p| p.label == ClassLabel::Malicious)
            .unwrap_or(false)
    });
    Ok(if any_malicious {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.input).context("reading records file")?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        bail!("{} contains no records", args.input.display());
    }

    // The file holds either experiment results or scan entries.
    if let Ok(results) = lines
        .iter()
        .map(|l| serde_json::from_str::<ExperimentResult>(l))
        .collect::<Result<Vec<_>, _>>()
    {
        match args.format {
            OutputFormat::Table => print!("{}", report::experiment_table(&results)?),
            OutputFormat::Records => print!("{}", report::experiment_records(&results)),
        }
        return Ok(ExitCode::SUCCESS);
    }
    let entries = lines
        .iter()
        .map(|l| serde_json::from_str::<ScanEntry>(l))
        .collect::<Result<Vec<_>, _>>()
        .context("records are neither experiment results nor scan entries")?;
    match args.format {
        OutputFormat::Table => print!("{}", report::scan_table(&entries)?),
        OutputFormat::Records => print!("{}", report::scan_records(&entries)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> Result<ExitCode> {
    let (malicious, benign) = match (&args.profile_malicious, &args.profile_benign) {
        (Some(mal_path), Some(ben_path)) => {
            let mal: CorpusProfile = serde_json::from_str(
                &fs::read_to_string(mal_path).context("reading malicious profile")?,
            )
            .context("parsing malicious profile")?;
            let ben: CorpusProfile = serde_json::from_str(
                &fs::read_to_string(ben_path).context("reading benign profile")?,
            )
            .context("parsing benign profile")?;
            (mal, ben)
        }
        _ => match args.preset {
            Preset::Separable => profiles::separable(args.malicious, args.benign, args.seed),
            Preset::NullSignal => profiles::null_signal(args.malicious, args.benign, args.seed),
            Preset::HeaderSignal => profiles::header_signal(args.malicious, args.benign, args.seed),
        },
    };

    let manifest = gen_corpus(&malicious, &benign, &args.out).context("generating corpus")?;
    let malicious_count = manifest
        .iter()
        .filter(|(_, l)| *l == Label::Malicious)
        .count();
    println!(
        "wrote {} files ({} malicious, {} benign) under {}",
        manifest.len(),
        malicious_count,
        manifest.len() - malicious_count,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
