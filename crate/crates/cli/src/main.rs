use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use emogait::classify::{build_prototypes, LabeledDescriptor, Metric, PreparedPrototypes};
use emogait::evaluate::{run_crossval, ClassifierConfig, CrossvalOptions, Mode};
use emogait::io::{
    self, load_descriptors, load_manifest, load_model, save_descriptors, save_model, save_report,
    DatasetManifest, DescriptorSet, ManifestEntry, PrototypeModel, ReportMeta,
};
use emogait::motion::{DescriptorConfig, SkeletonSequence};
use emogait::spd::Epsilon;
use emogait::synth::{self, GaitParams};
use emogait::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

const EPSILON_ENV: &str = "EMOGAIT_EPSILON";

#[derive(Parser)]
#[command(name = "emogait", version, about = "Emotion recognition from skeleton gait with SPD covariance descriptors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic gait dataset
    Synth(SynthArgs),
    /// Compute covariance descriptors for every sequence of a manifest
    Extract(ExtractArgs),
    /// Build per-label prototypes and save them as a model
    Train(TrainArgs),
    /// Classify sequences with a trained model
    Classify(ClassifyArgs),
    /// Leave-one-subject-out cross-validation
    Crossval(CrossvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives manifest.json and sequences/
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    subjects: usize,
    /// Repetitions per subject and label
    #[arg(long, default_value_t = 4)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-coordinate noise, metres, for every label
    #[arg(long)]
    noise: Option<f64>,
    /// Seconds per sequence
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    n_joints: Option<usize>,
    /// Spread of per-subject body and gait factors (0 = identical subjects)
    #[arg(long)]
    subject_variability: Option<f64>,
}

/// Descriptor extraction settings, for inputs that are raw sequences.
#[derive(Args, Default)]
struct DescriptorArgs {
    /// Absolute regularization shift ε [default: $EMOGAIT_EPSILON, else 1e-6 · trace/dim]
    #[arg(long)]
    epsilon: Option<f64>,
    /// First frame of the observation window
    #[arg(long)]
    window_start: Option<usize>,
    /// Window length in frames [default: to the end of the sequence]
    #[arg(long)]
    window_len: Option<usize>,
}

impl DescriptorArgs {
    fn given(&self) -> bool {
        self.epsilon.is_some() || self.window_start.is_some() || self.window_len.is_some()
    }

    fn config(&self, torso_joints: Vec<usize>) -> Result<DescriptorConfig, CliError> {
        let mut c = DescriptorConfig::new(torso_joints);
        if let Some(e) = self.epsilon.map_or_else(epsilon_from_env, |e| Ok(Some(e)))? {
            c.epsilon = Epsilon::Absolute(e)
                .validate()
                .map_err(|e| CliError::Usage(format!("--epsilon: {e}")))?;
        }
        c.window_start = self.window_start.unwrap_or(0);
        c.window_len = self.window_len;
        if c.window_len == Some(0) {
            return Err(CliError::Usage("--window-len must be positive".into()));
        }
        Ok(c)
    }
}

/// Absolute ε from the environment, used when `--epsilon` is absent.
fn epsilon_from_env() -> Result<Option<f64>, CliError> {
    match std::env::var(EPSILON_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{EPSILON_ENV}={v:?} is not a number"))),
        Err(_) => Ok(None),
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DatasetSource {
    /// Dataset manifest (JSON)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Descriptor set written by `extract`
    #[arg(long)]
    descriptors: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Worker threads
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: DatasetSource,
    #[arg(long)]
    out: PathBuf,
    /// Distance the model is meant for: lerm or frobenius
    #[arg(long, default_value = "lerm")]
    metric: Metric,
    #[command(flatten)]
    descriptor: DescriptorArgs,
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// A single frame file; needs --fps and --n-joints
    #[arg(long, conflicts_with = "manifest", requires_all = ["fps", "n_joints"])]
    sequence: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    n_joints: Option<usize>,
    /// Classify every entry of a manifest
    #[arg(long, required_unless_present = "sequence")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    source: DatasetSource,
    /// prototype or knn
    #[arg(long, default_value = "prototype")]
    mode: Mode,
    /// lerm or frobenius
    #[arg(long, default_value = "lerm")]
    metric: Metric,
    /// Neighbours for --mode knn [default: 1]
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Worker threads; results are identical for any value
    #[arg(long)]
    parallel: Option<usize>,
    /// Also write the full report as JSON
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail when a fold's training data lacks a label it is tested on
    #[arg(long)]
    strict: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Run(_) => EXIT_DATA,
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or inline when `None`. The flag
/// passed to `f` says whether to use parallel iterators.
fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce(bool) -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(false),
        Some(0) => Err(CliError::Usage("--parallel needs at least 1 thread".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("--parallel: {e}")))?
            .install(|| f(true)),
    }
}

fn map_maybe_par<T: Sync, U: Send, E: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> Result<U, E> + Sync + Send,
) -> Result<Vec<U>, E> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn load_all(manifest: &DatasetManifest, parallel: bool) -> Result<Vec<SkeletonSequence>, CliError> {
    let seqs = map_maybe_par(&manifest.entries, parallel, |e| manifest.load_entry(e))?;
    info!("loaded {} sequences", seqs.len());
    Ok(seqs)
}

fn describe_all(
    seqs: &[SkeletonSequence],
    config: &DescriptorConfig,
    parallel: bool,
) -> Result<Vec<LabeledDescriptor>, CliError> {
    map_maybe_par(seqs, parallel, |s| {
        let descriptor = config.describe(s).map_err(|e| {
            warn!("{}: {e}", s.id());
            e
        })?;
        Ok::<_, CliError>(LabeledDescriptor {
            descriptor,
            label: s.label().expect("manifest sequences are labeled").clone(),
            subject_id: s.subject_id().to_string(),
        })
    })
}

/// Descriptors from a manifest (extracted now) or a descriptor set.
fn dataset(
    source: &DatasetSource,
    args: &DescriptorArgs,
    parallel: bool,
) -> Result<DescriptorSet, CliError> {
    if let Some(path) = &source.manifest {
        let manifest = load_manifest(path)?;
        let config = args.config(manifest.torso_joints.clone())?;
        let seqs = load_all(&manifest, parallel)?;
        let items = describe_all(&seqs, &config, parallel)?;
        return Ok(DescriptorSet {
            descriptor: config,
            label_set: manifest.label_set,
            items,
        });
    }
    let path = source.descriptors.as_ref().expect("clap requires one source");
    if args.given() {
        return Err(CliError::Usage(
            "--epsilon, --window-start and --window-len apply only with --manifest".into(),
        ));
    }
    Ok(load_descriptors(path)?)
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let defaults = GaitParams::default();
    let mut params = GaitParams {
        n_joints: a.n_joints.unwrap_or(defaults.n_joints),
        fps: a.fps.unwrap_or(defaults.fps),
        duration: a.duration.unwrap_or(defaults.duration),
        seed: a.seed,
        subject_variability: a.subject_variability.unwrap_or(defaults.subject_variability),
        ..defaults
    };
    if let Some(n) = a.noise {
        params = params.with_noise(n);
    }
    let seqs = synth::generate_dataset(&params, a.subjects, a.reps)?;
    let seq_dir = a.out.join("sequences");
    std::fs::create_dir_all(&seq_dir).map_err(|source| {
        CliError::Run(Error::Io(io::IoError::Io {
            origin: seq_dir.display().to_string(),
            source,
        }))
    })?;
    let mut entries = Vec::with_capacity(seqs.len());
    for s in &seqs {
        let rel = format!("sequences/{}.csv", s.id());
        io::save_sequence(&a.out.join(&rel), s)?;
        entries.push(ManifestEntry {
            path: rel,
            subject_id: s.subject_id().to_string(),
            label: s.label().expect("synthetic sequences are labeled").clone(),
            fps: s.fps(),
            n_joints: s.n_joints(),
        });
    }
    let manifest = DatasetManifest {
        label_set: params.label_set(),
        torso_joints: synth::TORSO_JOINTS.to_vec(),
        entries,
        base_dir: a.out.clone(),
    };
    let path = a.out.join("manifest.json");
    manifest.save(&path)?;
    info!("wrote {} sequences and {}", seqs.len(), path.display());
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<(), CliError> {
    let set = with_pool(a.parallel, |par| {
        let source = DatasetSource {
            manifest: Some(a.manifest.clone()),
            descriptors: None,
        };
        dataset(&source, &a.descriptor, par)
    })?;
    save_descriptors(&set, &a.out)?;
    info!("wrote {} descriptors to {}", set.items.len(), a.out.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let set = with_pool(a.parallel, |par| dataset(&a.source, &a.descriptor, par))?;
    let prototypes = build_prototypes(&set.items, a.metric)?;
    let model = PrototypeModel {
        descriptor: set.descriptor,
        label_set: set.label_set,
        prototypes,
    };
    save_model(&model, &a.out)?;
    info!(
        "trained {} prototypes from {} descriptors; wrote {}",
        model.prototypes.len(),
        set.items.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let metric = model.prototypes.metric;
    let prepared = PreparedPrototypes::new(&model.prototypes, metric)?;
    let (seqs, truth): (Vec<SkeletonSequence>, bool) = match (&a.sequence, &a.manifest) {
        (Some(path), _) => {
            let (fps, n_joints) = (a.fps.expect("clap"), a.n_joints.expect("clap"));
            (vec![io::load_sequence(path, fps, n_joints)?], false)
        }
        (None, Some(path)) => {
            let manifest = load_manifest(path)?;
            (with_pool(a.parallel, |par| load_all(&manifest, par))?, true)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let predictions = with_pool(a.parallel, |par| {
        map_maybe_par(&seqs, par, |s| {
            let d = model.descriptor.describe(s)?;
            Ok::<_, CliError>(prepared.classify(&d.covariance)?)
        })
    })?;
    let mut out = String::new();
    for (s, p) in seqs.iter().zip(&predictions) {
        out.push_str(s.id());
        out.push('\t');
        out.push_str(p.label.as_str());
        if truth {
            out.push('\t');
            out.push_str(s.label().map_or("", |l| l.as_str()));
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn cmd_crossval(a: CrossvalArgs) -> Result<(), CliError> {
    if a.mode == Mode::Prototype && a.k.is_some() {
        return Err(CliError::Usage("--k applies only to --mode knn".into()));
    }
    let config = ClassifierConfig {
        mode: a.mode,
        metric: a.metric,
        k: a.k.unwrap_or(1),
    };
    if config.k == 0 {
        return Err(CliError::Usage("--k must be positive".into()));
    }
    let options = CrossvalOptions {
        parallel: a.parallel.is_some(),
        strict: a.strict,
    };
    let (set, report) = with_pool(a.parallel, |par| {
        let set = dataset(&a.source, &a.descriptor, par)?;
        let report = run_crossval(&set.items, &set.label_set, &config, options)?;
        Ok((set, report))
    })?;
    for f in report.flagged_folds() {
        warn!(
            "fold {}: training data has no samples of {:?}",
            f.held_out_subject, f.missing_labels
        );
    }
    if let Some(out) = &a.out {
        let meta = ReportMeta {
            descriptor: Some(set.descriptor.clone()),
        };
        save_report(&report, &meta, out)?;
    }
    print!("{}", io::render_table(&report));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Crossval(a) => cmd_crossval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Run(err) => eprintln!("error: {err}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn k_with_prototype_mode_is_a_usage_error() {
        let cli = Cli::try_parse_from(["emogait", "crossval", "--manifest", "m.json", "--k", "3"]).unwrap();
        let Command::Crossval(a) = cli.command else { panic!() };
        assert!(matches!(cmd_crossval(a), Err(CliError::Usage(_))));
    }

    #[test]
    fn one_dataset_source_is_required() {
        assert!(Cli::try_parse_from(["emogait", "crossval"]).is_err());
        assert!(Cli::try_parse_from([
            "emogait", "crossval", "--manifest", "a", "--descriptors", "b"
        ])
        .is_err());
    }

    #[test]
    fn exit_codes() {
        let numeric = CliError::Run(Error::Spd(emogait::spd::SpdError::IterationFailure { iterations: 1 }));
        let data = CliError::Run(Error::Spd(emogait::spd::SpdError::EmptyInput));
        assert_eq!(numeric.exit_code(), EXIT_NUMERIC);
        assert_eq!(data.exit_code(), EXIT_DATA);
        assert_eq!(CliError::Usage(String::new()).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn descriptor_flags_map_to_config() {
        let args = DescriptorArgs {
            epsilon: Some(1e-4),
            window_start: Some(10),
            window_len: Some(50),
        };
        let c = args.config(vec![0, 1]).unwrap();
        assert_eq!(c.epsilon, Epsilon::Absolute(1e-4));
        assert_eq!((c.window_start, c.window_len), (10, Some(50)));
        assert_eq!(DescriptorArgs::default().config(vec![0]).unwrap(), DescriptorConfig::new(vec![0]));
        let bad = DescriptorArgs { epsilon: Some(-1.0), ..Default::default() };
        assert!(matches!(bad.config(vec![0]), Err(CliError::Usage(_))));
    }
}
