//! Command-line front end and run-directory layout.
//!
//! A run directory written by `train` holds everything `eval`, `plot-data`
//! and later inspection need:
//!
//! | file             | contents                                        |
//! |------------------|-------------------------------------------------|
//! | `config.txt`     | `key=value` run settings                        |
//! | `train.txt`      | training samples                                |
//! | `test.txt`       | balanced test samples                           |
//! | `hierarchy.txt`  | class hierarchy                                 |
//! | `encoder.txt`    | encoder checkpoint                              |
//! | `log.csv`        | per-epoch loss, assignment cost, snapshots      |
//! | `targets.txt`    | target set (targeted methods only)              |
//! | `assignment.txt` | final class → target assignment (targeted only) |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assignment::Assignment;
use crate::datagen::{self, HierarchyTree, LongTailDataset};
use crate::encoder::{ClassifierConfig, Mlp};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::targets::{certify_simplex, generate_targets, TargetGenConfig, TargetSet};
use crate::trainer::{self, evaluate, Experiment, Method};

#[derive(Debug, Parser)]
#[command(name = "tsc", about = "Targeted supervised contrastive learning on synthetic long-tailed data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a uniform target set on the sphere and write it to a file.
    GenTargets {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0.07)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        /// Largest per-point step at the start of the cosine schedule.
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate data, train an encoder and write a run directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit the linear classifier on a trained run and write `metrics.csv`.
    Eval {
        #[arg(long)]
        run: PathBuf,
        /// Neighborhood size for U_k and R (default min(10, C − 1)).
        #[arg(long)]
        metrics_k: Option<usize>,
    },
    /// Train and evaluate one run per value of a parameter; writes `ablation.csv`.
    Ablate {
        #[arg(long, value_enum)]
        param: AblateParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        metrics_k: Option<usize>,
        #[arg(long, default_value = "ablation")]
        out_dir: PathBuf,
    },
    /// Write `scatter.txt` (`x y label`) and `centers.txt` (`class target_x target_y`) for a 2-d run.
    PlotData {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblateParam {
    Lambda,
    Dim,
    Warmup,
}

/// Settings shared by `train` and `ablate`.
#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunArgs {
    /// kcl, tsc or tsc-random.
    #[arg(long, default_value = "tsc")]
    pub method: String,
    #[arg(long, default_value_t = 100.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub warmup_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training samples of the most frequent class.
    #[arg(long, default_value_t = 500)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
}

impl RunArgs {
    pub fn experiment(&self) -> Result<Experiment> {
        if self.classes < 2 {
            return Err(Error::validation("at least 2 classes are needed"));
        }
        let method = Method::parse(&self.method)?;
        let mut exp = Experiment::default_protocol(self.rho, self.dim, self.seed)?;
        exp.counts = datagen::longtail_counts(self.n_max, self.rho, self.classes)?;
        exp.noise = self.noise;
        exp.train.augment_noise = 0.1 * self.noise;
        exp.train.method = method;
        exp.train.loss.lambda = self.lambda;
        exp.train.loss.k = self.k;
        exp.train.epochs = self.epochs;
        exp.train.warmup_fraction = self.warmup_frac;
        exp.train.batch_size = self.batch_size;
        exp.train.learning_rate = self.lr;
        exp.train.validate()?;
        Ok(exp)
    }

    fn to_config(&self) -> String {
        format!(
            "method={}\nrho={}\nclasses={}\ndim={}\nlambda={}\nk={}\nepochs={}\nwarmup_frac={}\nseed={}\nn_max={}\nnoise={}\nbatch_size={}\nlr={}\n",
            self.method,
            self.rho,
            self.classes,
            self.dim,
            self.lambda,
            self.k,
            self.epochs,
            self.warmup_frac,
            self.seed,
            self.n_max,
            self.noise,
            self.batch_size,
            self.lr
        )
    }

    fn from_config(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(n + 1, format!("expected key=value, got `{line}`")))?;
            map.insert(k.to_owned(), v.to_owned());
        }
        fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let v = map
                .get(key)
                .ok_or_else(|| Error::parse(0, format!("config is missing `{key}`")))?;
            v.parse()
                .map_err(|_| Error::parse(0, format!("bad value `{v}` for `{key}`")))
        }
        Ok(Self {
            method: get(&map, "method")?,
            rho: get(&map, "rho")?,
            classes: get(&map, "classes")?,
            dim: get(&map, "dim")?,
            lambda: get(&map, "lambda")?,
            k: get(&map, "k")?,
            epochs: get(&map, "epochs")?,
            warmup_frac: get(&map, "warmup_frac")?,
            seed: get(&map, "seed")?,
            n_max: get(&map, "n_max")?,
            noise: get(&map, "noise")?,
            batch_size: get(&map, "batch_size")?,
            lr: get(&map, "lr")?,
        })
    }
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub args: RunArgs,
    pub dataset: LongTailDataset,
    pub encoder: Mlp,
    pub targets: Option<TargetSet>,
    pub assignment: Option<Assignment>,
}

impl StoredRun {
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.join("config.txt").is_file() {
            return Err(Error::validation(format!(
                "{} is not a run directory (no config.txt)",
                dir.display()
            )));
        }
        let args = RunArgs::from_config(&fs::read_to_string(dir.join("config.txt"))?)?;
        let (header, train) = datagen::load_samples(dir.join("train.txt"))?;
        let (_, test) = datagen::load_samples(dir.join("test.txt"))?;
        let hierarchy = HierarchyTree::load(dir.join("hierarchy.txt"))?;
        let encoder = Mlp::load(dir.join("encoder.txt"))?;
        let targets_path = dir.join("targets.txt");
        let targets = if targets_path.exists() {
            Some(TargetSet::load(targets_path)?)
        } else {
            None
        };
        let assignment_path = dir.join("assignment.txt");
        let assignment = if assignment_path.exists() {
            Some(Assignment::parse(&fs::read_to_string(assignment_path)?)?)
        } else {
            None
        };
        let counts = train.class_counts(header.num_classes);
        let dataset = LongTailDataset {
            train,
            test,
            counts,
            rho: header.rho,
            // Prototypes are not persisted; evaluation does not need them.
            prototypes: Vec::new(),
            hierarchy,
            seed: header.seed,
        };
        Ok(Self {
            args,
            dataset,
            encoder,
            targets,
            assignment,
        })
    }
}

/// Trains one run and writes its directory. Returns the run output for callers that evaluate it.
pub fn train_to_dir(args: &RunArgs, dir: &Path) -> Result<trainer::RunOutput> {
    let exp = args.experiment()?;
    let dataset = exp.dataset()?;
    let targets = exp.targets()?;
    let (encoder, record) = trainer::train_representation(&dataset, &exp.train, targets.as_ref())?;

    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), args.to_config())?;
    let header = dataset.header();
    datagen::save_samples(dir.join("train.txt"), &header, &dataset.train)?;
    datagen::save_samples(dir.join("test.txt"), &header, &dataset.test)?;
    dataset.hierarchy.save(dir.join("hierarchy.txt"))?;
    encoder.save(dir.join("encoder.txt"))?;
    fs::write(dir.join("log.csv"), record.log_csv())?;
    if let Some(ts) = &targets {
        ts.save(dir.join("targets.txt"))?;
    }
    if let Some(a) = record.final_assignment() {
        fs::write(dir.join("assignment.txt"), a.dump())?;
    }
    Ok(trainer::RunOutput {
        dataset,
        targets,
        encoder,
        record,
    })
}

/// Evaluates a stored run and writes `metrics.csv` and `metrics.txt`.
pub fn eval_dir(dir: &Path, metrics_k: Option<usize>) -> Result<MetricsReport> {
    let run = StoredRun::load(dir)?;
    let k = metrics_k.unwrap_or_else(|| metrics::default_k(run.dataset.num_classes()));
    let classifier = ClassifierConfig {
        seed: run.args.seed,
        ..ClassifierConfig::default()
    };
    let ev = evaluate(&run.encoder, &run.dataset, k, &classifier)?;
    fs::write(dir.join("metrics.csv"), ev.report.to_csv())?;
    fs::write(dir.join("metrics.txt"), ev.report.to_key_values())?;
    Ok(ev.report)
}

/// Writes scatter and center files for a stored 2-d run.
pub fn plot_dir(dir: &Path) -> Result<()> {
    let run = StoredRun::load(dir)?;
    if run.encoder.output_dim() != 2 {
        return Err(Error::validation(format!(
            "plot data needs a 2-d run, this one is {}-d",
            run.encoder.output_dim()
        )));
    }
    let features = run.encoder.forward(&run.dataset.test.inputs)?;
    fs::write(
        dir.join("scatter.txt"),
        trainer::scatter_lines(&features, &run.dataset.test.labels)?,
    )?;
    // Assigned targets for targeted runs; learned class centers otherwise.
    let points: Vec<Vec<f64>> = match (&run.targets, &run.assignment) {
        (Some(ts), Some(a)) => a.sigma.iter().map(|&t| ts.get(t).to_vec()).collect(),
        _ => metrics::class_centers(&features, &run.dataset.test.labels, run.dataset.num_classes())?,
    };
    let mut out = String::new();
    for (class, p) in points.iter().enumerate() {
        out.push_str(&format!("{class} {:.10} {:.10}\n", p[0], p[1]));
    }
    fs::write(dir.join("centers.txt"), out)?;
    Ok(())
}

/// Runs one training + evaluation per value and writes `ablation.csv` in `dir`.
pub fn ablate(
    param: AblateParam,
    values: &[f64],
    base: &RunArgs,
    metrics_k: Option<usize>,
    dir: &Path,
) -> Result<String> {
    if values.is_empty() {
        return Err(Error::validation("no ablation values given"));
    }
    let name = match param {
        AblateParam::Lambda => "lambda",
        AblateParam::Dim => "dim",
        AblateParam::Warmup => "warmup",
    };
    let mut csv = format!("{name},{}\n", MetricsReport::CSV_HEADER);
    for &v in values {
        let mut args = base.clone();
        match param {
            AblateParam::Lambda => args.lambda = v,
            AblateParam::Warmup => args.warmup_frac = v,
            AblateParam::Dim => {
                if v.fract() != 0.0 || v < 2.0 {
                    return Err(Error::validation(format!("dimension must be an integer ≥ 2, got {v}")));
                }
                args.dim = v as usize;
            }
        }
        let run_dir = dir.join(format!("{name}-{v}"));
        train_to_dir(&args, &run_dir)?;
        let report = eval_dir(&run_dir, metrics_k)?;
        for row in report.csv_rows() {
            csv.push_str(&format!("{v},{row}\n"));
        }
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("ablation.csv"), &csv)?;
    Ok(csv)
}

/// Executes a parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTargets {
            classes,
            dim,
            tau,
            seed,
            iterations,
            lr,
            out,
        } => {
            let ts = generate_targets(
                classes,
                dim,
                &TargetGenConfig {
                    learning_rate: lr,
                    iterations,
                    seed,
                    temperature: tau,
                },
            )?;
            ts.save(&out)?;
            let cert = certify_simplex(&ts, 1e-3);
            println!(
                "energy={:.10} simplex_applicable={} simplex_certified={} max_deviation={:.3e}",
                ts.final_energy(),
                cert.applicable,
                cert.certified,
                cert.max_deviation
            );
        }
        Command::Train { run, out_dir } => {
            let out = train_to_dir(&run, &out_dir)?;
            let last = out.record.epochs.last().expect("at least one epoch");
            println!(
                "method={} epochs={} final_loss={:.6} out={}",
                out.record.method.name(),
                out.record.epochs.len(),
                last.mean_loss,
                out_dir.display()
            );
        }
        Command::Eval { run, metrics_k } => {
            let report = eval_dir(&run, metrics_k)?;
            print!("{}", report.to_csv());
        }
        Command::Ablate {
            param,
            values,
            run,
            metrics_k,
            out_dir,
        } => {
            print!("{}", ablate(param, &values, &run, metrics_k, &out_dir)?);
        }
        Command::PlotData { run } => {
            plot_dir(&run)?;
            println!("wrote {} and {}", run.join("scatter.txt").display(), run.join("centers.txt").display());
        }
    }
    Ok(())
}
