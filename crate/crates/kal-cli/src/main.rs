//! Command-line front end for the active-learning workbench.
//!
//! Four subcommands cover the working loop: `run` executes a
//! cross-validated annotation-budget experiment and writes reports,
//! `compile` lowers a rule file and prints the violation terms,
//! `audit` scores a saved model snapshot against a rule set, and
//! `ablate` sweeps how much of the rule set selection may use.
//!
//! Exit codes: 1 for configuration problems, 2 for unreadable or
//! invalid input files, 3 for failures while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::Digest;

use kal::data::{self, Dataset};
use kal::harness::{
    self, Budget, DiversityCap, ExperimentConfig, ExperimentReport, HarnessError, Preset,
};
use kal::knowledge::{Schema, TaskKind, add_uncertainty_rule, parse_knowledge};
use kal::lowering::compile;
use kal::model::Model;
use kal::strategies::Strategy;
use kal::{Generator, TNorm};

#[derive(Parser)]
#[command(
    name = "kal",
    version,
    about = "Knowledge-driven active learning: rules pick the next batch to annotate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a cross-validated annotation-budget experiment.
    Run(RunArgs),
    /// Lower a rule file and print its violation terms.
    Compile(CompileArgs),
    /// Score a saved model snapshot against a rule set.
    Audit(AuditArgs),
    /// Sweep the fraction of rules available to selection.
    Ablate(AblateArgs),
}

/// A failed command, sorted by exit code.
enum Failure {
    /// The flags do not describe a runnable experiment (exit 1).
    Config(String),
    /// An input file is missing or invalid (exit 2).
    Data(String),
    /// The run itself failed (exit 3).
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(msg) | Failure::Data(msg) | Failure::Runtime(msg) => msg,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(err: HarnessError) -> Failure {
        match err {
            HarnessError::Config(msg) => Failure::Config(msg),
            HarnessError::Data(e) => Failure::Data(e.to_string()),
            HarnessError::Knowledge(e) => Failure::Data(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compile(args) => cmd_compile(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Ablate(args) => cmd_ablate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

// ---- shared flag groups ----

#[derive(Args)]
struct DatasetArgs {
    /// Dataset: xor, iris, or insurance.
    #[arg(long)]
    dataset: String,
    /// Replace the bundled rules with this rule file.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Sample count for the synthetic exclusive-or dataset.
    #[arg(long, default_value_t = 2000)]
    xor_samples: usize,
    /// Generation seed for the synthetic exclusive-or dataset.
    #[arg(long, default_value_t = 11)]
    xor_seed: u64,
}

impl DatasetArgs {
    fn load(&self) -> Result<Dataset, Failure> {
        let mut dataset = load_bundled(&self.dataset, self.xor_samples, self.xor_seed)?;
        if let Some(path) = &self.rules {
            dataset.rules_source = read_rules(path, &dataset.schema)?;
        }
        Ok(dataset)
    }
}

fn load_bundled(name: &str, xor_samples: usize, xor_seed: u64) -> Result<Dataset, Failure> {
    match name {
        "xor" => Ok(data::make_xor(xor_samples, xor_seed)),
        "iris" => Ok(data::iris()),
        "insurance" => Ok(data::insurance()),
        other => Err(Failure::Config(format!(
            "unknown dataset `{other}`; bundled datasets are xor, iris, and insurance"
        ))),
    }
}

/// Reads a rule file and checks it parses against `schema`.
fn read_rules(path: &Path, schema: &Schema) -> Result<String, Failure> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("failed to read {}: {e}", path.display())))?;
    parse_knowledge(&source, schema)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(source)
}

#[derive(Args)]
struct ExperimentArgs {
    /// Selection strategy id; see the library's strategy roster.
    #[arg(long)]
    strategy: Strategy,
    /// Budget preset the explicit budget flags override.
    #[arg(long, default_value = "table1")]
    preset: Preset,
    /// Initial labeled pool size.
    #[arg(long)]
    n: Option<usize>,
    /// Samples annotated per round.
    #[arg(long)]
    p: Option<usize>,
    /// Selection rounds.
    #[arg(long)]
    q: Option<usize>,
    /// Training epochs per round.
    #[arg(long)]
    epochs: Option<usize>,
    /// Optimizer step size.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Conjunction family the rules are lowered with.
    #[arg(long, default_value = "product")]
    tnorm: TNorm,
    /// Additive generator mapping truth to violation.
    #[arg(long, default_value = "one_minus")]
    generator: Generator,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Run only the first this-many folds.
    #[arg(long)]
    fold_limit: Option<usize>,
    /// Comma-separated model seeds; trials = folds x seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Monte-Carlo dropout passes for the disagreement strategies.
    #[arg(long, default_value_t = harness::DEFAULT_MC_PASSES)]
    mc_passes: usize,
    /// Fixed per-rule batch cap (default: half the batch).
    #[arg(long, conflicts_with = "no_diversity")]
    diversity_cap: Option<usize>,
    /// Disable per-rule batch balancing.
    #[arg(long)]
    no_diversity: bool,
    /// Do not append the confident-prediction rule.
    #[arg(long)]
    no_uncertainty_rule: bool,
    /// Fraction of the authored rules available to selection.
    #[arg(long, default_value_t = 1.0)]
    knowledge_fraction: f64,
    /// Hidden layer width.
    #[arg(long, default_value_t = kal::model::DEFAULT_HIDDEN)]
    hidden: usize,
    /// Dropout probability while training.
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Decoupled weight decay.
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    /// Surrogate tree depth for the rule-extraction strategy.
    #[arg(long, default_value_t = kal::xai::DEFAULT_SURROGATE_DEPTH)]
    xai_depth: usize,
    /// Knowledge share of each rule-extraction batch.
    #[arg(long, default_value_t = kal::xai::DEFAULT_KAL_FRACTION)]
    xai_fraction: f64,
    /// Worker threads for trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl ExperimentArgs {
    fn config(&self, dataset: &Dataset) -> ExperimentConfig {
        let mut budget = harness::preset_budget(&dataset.name, self.preset).unwrap_or(Budget {
            n: 10,
            p: 5,
            q: 10,
            epochs: 200,
            learning_rate: 1e-3,
        });
        if let Some(n) = self.n {
            budget.n = n;
        }
        if let Some(p) = self.p {
            budget.p = p;
        }
        if let Some(q) = self.q {
            budget.q = q;
        }
        if let Some(epochs) = self.epochs {
            budget.epochs = epochs;
        }
        if let Some(learning_rate) = self.learning_rate {
            budget.learning_rate = learning_rate;
        }

        let mut cfg = ExperimentConfig::new(self.strategy, budget);
        cfg.tnorm = self.tnorm;
        cfg.generator = self.generator;
        cfg.folds = self.folds;
        cfg.fold_limit = self.fold_limit;
        cfg.seeds = self.seeds.clone();
        cfg.mc_passes = self.mc_passes;
        cfg.diversity = if self.no_diversity {
            DiversityCap::Off
        } else {
            match self.diversity_cap {
                Some(cap) => DiversityCap::Fixed(cap),
                None => DiversityCap::Auto,
            }
        };
        cfg.uncertainty_rule = !self.no_uncertainty_rule;
        cfg.knowledge_fraction = self.knowledge_fraction;
        cfg.hidden = self.hidden;
        cfg.dropout = self.dropout;
        cfg.weight_decay = self.weight_decay;
        cfg.xai.max_depth = self.xai_depth;
        cfg.xai.kal_fraction = self.xai_fraction;
        cfg.xai.tnorm = self.tnorm;
        cfg.xai.generator = self.generator;
        cfg.jobs = self.jobs;
        cfg
    }
}

// ---- run ----

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Directory the reports are written to.
    #[arg(long)]
    out: PathBuf,
    /// Save each trial's final model under OUT/snapshots/.
    #[arg(long)]
    save_snapshots: bool,
    /// Write each trial's last extracted rule set under OUT/.
    #[arg(long)]
    dump_xai_rules: bool,
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let dataset = args.data.load()?;
    let mut cfg = args.experiment.config(&dataset);
    create_dir(&args.out)?;
    if args.save_snapshots {
        let dir = args.out.join("snapshots");
        create_dir(&dir)?;
        cfg.snapshot_dir = Some(dir);
    }

    let report = harness::run_experiment(&dataset, &cfg)?;

    let mut files = Vec::new();
    write_output(&args.out, "summary.json", &to_json(&report)?, &mut files)?;
    write_output(&args.out, "curves.csv", &curves_csv(&report), &mut files)?;
    write_output(&args.out, "mean_curve.csv", &mean_curve_csv(&report), &mut files)?;
    if args.dump_xai_rules {
        for trial in &report.trials {
            if let Some(source) = &trial.extracted_rules {
                let name = format!("xai_rules_fold{}_seed{}.kal", trial.fold, trial.seed);
                write_output(&args.out, &name, source, &mut files)?;
            }
        }
    }
    if args.save_snapshots {
        for trial in &report.trials {
            let name = format!("snapshots/model_fold{}_seed{}.bin", trial.fold, trial.seed);
            record_output(&args.out, &name, &mut files)?;
        }
    }
    write_manifest(&args.out, "run", files)?;

    println!(
        "{} / {}: {} trials over {} folds x {} seeds",
        report.dataset,
        report.strategy,
        report.trials.len(),
        report.folds_run,
        report.seeds.len()
    );
    println!("mean AUBC {:.4} +/- {:.4}", report.mean_aubc, report.std_aubc);
    if let Some(aux) = report.mean_aubc_aux {
        println!("mean accuracy AUBC {:.4}", aux);
    }
    if let Some(total) = report.mean_audit_total {
        println!("mean audited violation {:.4}", total);
    }
    println!("selection cost x{:.2} the uniform baseline", report.time_ratio);
    println!("reports under {}", args.out.display());
    Ok(())
}

// ---- compile ----

#[derive(Args)]
struct CompileArgs {
    /// Rule file (defaults to the dataset's bundled rules).
    #[arg(long, required_unless_present = "dataset")]
    rules: Option<PathBuf>,
    /// Borrow the schema and default rules from a bundled dataset.
    #[arg(long)]
    dataset: Option<String>,
    /// Feature count, when no dataset provides the schema.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    input_dim: Option<usize>,
    /// Output head count, when no dataset provides the schema.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    output_dim: Option<usize>,
    /// binary, multiclass, multilabel, or regression.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    task: Option<TaskKind>,
    /// Conjunction family the rules are lowered with.
    #[arg(long, default_value = "product")]
    tnorm: TNorm,
    /// Additive generator mapping truth to violation.
    #[arg(long, default_value = "one_minus")]
    generator: Generator,
    /// Also append the generated confident-prediction rule.
    #[arg(long)]
    with_uncertainty_rule: bool,
}

fn cmd_compile(args: CompileArgs) -> Result<(), Failure> {
    let (schema, source) = match &args.dataset {
        Some(name) => {
            let dataset = load_bundled(name, 8, 0)?;
            let source = match &args.rules {
                Some(path) => read_rules(path, &dataset.schema)?,
                None => dataset.rules_source.clone(),
            };
            (dataset.schema, source)
        }
        None => {
            // Clap enforces presence of the schema flags and the rule
            // file when no dataset is named.
            let schema = Schema::new(
                args.input_dim.unwrap(),
                args.output_dim.unwrap(),
                args.task.unwrap(),
            )
            .map_err(|e| Failure::Config(e.to_string()))?;
            let path = args.rules.as_ref().unwrap();
            let source = read_rules(path, &schema)?;
            (schema, source)
        }
    };

    let mut kb = parse_knowledge(&source, &schema).map_err(|e| Failure::Data(e.to_string()))?;
    if args.with_uncertainty_rule {
        add_uncertainty_rule(&mut kb).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let compiled =
        compile(&kb, args.tnorm, args.generator).map_err(|e| Failure::Runtime(e.to_string()))?;

    println!(
        "# {} rules, {} bindings, {} t-norm, {} generator",
        kb.rules().len(),
        kb.bindings().len(),
        args.tnorm.id(),
        args.generator.id()
    );
    print!("{}", kb.to_dsl());
    println!();
    print!("{}", compiled.describe());
    Ok(())
}

// ---- audit ----

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Model snapshot, e.g. from `kal run --save-snapshots`.
    #[arg(long)]
    snapshot: PathBuf,
    /// Conjunction family the rules are lowered with.
    #[arg(long, default_value = "product")]
    tnorm: TNorm,
    /// Additive generator mapping truth to violation.
    #[arg(long, default_value = "one_minus")]
    generator: Generator,
    /// Emit the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn cmd_audit(args: AuditArgs) -> Result<(), Failure> {
    let dataset = args.data.load()?;
    let kb = dataset.knowledge().map_err(|e| Failure::Data(e.to_string()))?;
    let compiled =
        compile(&kb, args.tnorm, args.generator).map_err(|e| Failure::Runtime(e.to_string()))?;

    let mut model = Model::load(&args.snapshot, dataset.schema.task)
        .map_err(|e| Failure::Data(format!("snapshot {}: {e}", args.snapshot.display())))?;
    if model.input_dim() != dataset.schema.input_dim
        || model.output_dim() != dataset.schema.output_dim
    {
        return Err(Failure::Data(format!(
            "snapshot shape {}x{} does not match the {} schema {}x{}",
            model.input_dim(),
            model.output_dim(),
            dataset.name,
            dataset.schema.input_dim,
            dataset.schema.output_dim
        )));
    }
    if let Some((mean, std)) = dataset.target_stats {
        model.set_target_stats(mean, std);
    }

    let preds = model.predict(dataset.x_model.view());
    let report = harness::knowledge_audit(&compiled, dataset.x_pred.view(), preds.view());
    if args.json {
        println!("{}", to_json(&report)?);
    } else {
        println!("rule violations over all {} samples of {}:", dataset.len(), dataset.name);
        for rule in &report.per_rule {
            println!("  {:<28} {:>12.4}", rule.rule, rule.violation);
        }
        println!("  {:<28} {:>12.4}", "total", report.total);
        println!("  {:<28} {:>12.6}", "mean per sample", report.total / dataset.len() as f64);
    }
    Ok(())
}

// ---- ablate ----

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated knowledge fractions to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.25,0.5,0.75,1.0")]
    fractions: Vec<f64>,
    /// Directory the reports are written to.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct AblationRow {
    fraction: f64,
    mean_aubc: f64,
    std_aubc: f64,
    mean_audit_total: Option<f64>,
}

fn cmd_ablate(args: AblateArgs) -> Result<(), Failure> {
    let dataset = args.data.load()?;
    let cfg = args.experiment.config(&dataset);
    create_dir(&args.out)?;

    let points = harness::knowledge_fraction_ablation(&dataset, &cfg, &args.fractions)?;
    let rows: Vec<AblationRow> = points
        .iter()
        .map(|point| AblationRow {
            fraction: point.fraction,
            mean_aubc: point.report.mean_aubc,
            std_aubc: point.report.std_aubc,
            mean_audit_total: point.report.mean_audit_total,
        })
        .collect();

    let mut csv = String::from("fraction,mean_aubc,std_aubc,mean_audit_total\n");
    for row in &rows {
        let audit = row.mean_audit_total.map_or(String::new(), |t| format!("{t}"));
        csv.push_str(&format!(
            "{},{},{},{audit}\n",
            row.fraction, row.mean_aubc, row.std_aubc
        ));
    }

    let mut files = Vec::new();
    write_output(&args.out, "ablation.json", &to_json(&rows)?, &mut files)?;
    write_output(&args.out, "ablation.csv", &csv, &mut files)?;
    write_manifest(&args.out, "ablate", files)?;

    println!("{} / {}: knowledge fraction sweep", dataset.name, cfg.strategy.id());
    for row in &rows {
        println!("  {:>5.2}: mean AUBC {:.4} +/- {:.4}", row.fraction, row.mean_aubc, row.std_aubc);
    }
    println!("reports under {}", args.out.display());
    Ok(())
}

// ---- report files ----

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Runtime(format!("serializing report: {e}")))
}

/// One learning-curve row per trial and checkpoint.
fn curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("fold,seed,labeled,primary,aux\n");
    for trial in &report.trials {
        for point in &trial.curve {
            let aux = point.aux.map_or(String::new(), |a| format!("{a}"));
            out.push_str(&format!(
                "{},{},{},{},{aux}\n",
                trial.fold, trial.seed, point.labeled, point.primary
            ));
        }
    }
    out
}

fn mean_curve_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("labeled,primary,aux\n");
    for point in &report.mean_curve {
        let aux = point.aux.map_or(String::new(), |a| format!("{a}"));
        out.push_str(&format!("{},{},{aux}\n", point.labeled, point.primary));
    }
    out
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    files: Vec<ManifestEntry>,
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", path.display())))
}

/// Writes one report file and records its digest.
fn write_output(
    root: &Path,
    name: &str,
    content: &str,
    files: &mut Vec<ManifestEntry>,
) -> Result<(), Failure> {
    let path = root.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
    files.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(content.as_bytes()) });
    Ok(())
}

/// Records the digest of a file some other step already wrote.
fn record_output(root: &Path, name: &str, files: &mut Vec<ManifestEntry>) -> Result<(), Failure> {
    let path = root.join(name);
    let bytes = std::fs::read(&path)
        .map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))?;
    files.push(ManifestEntry { path: name.to_string(), sha256: sha256_hex(&bytes) });
    Ok(())
}

fn write_manifest(root: &Path, command: &str, files: Vec<ManifestEntry>) -> Result<(), Failure> {
    let manifest = Manifest { command: command.to_string(), files };
    let path = root.join("manifest.json");
    std::fs::write(&path, to_json(&manifest)?)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = sha2::Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
