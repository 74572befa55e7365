use std::path::PathBuf;
use std::process::ExitCode;

use adaptred::harness::{self, generate, summary_csv, DiskCache, ExperimentConfig, SyntheticSpec};
use adaptred::{reference_solution, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "adaptred",
    version,
    about = "Adaptive regularization/smoothing reductions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run(ConfigArgs),
    /// Run the cartesian product of `--grid` values over a base config.
    Sweep {
        #[command(flatten)]
        base: ConfigArgs,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
    },
    /// Compute (or load) the cached reference minimizer.
    Reference(ConfigArgs),
    /// Write a synthetic LibSVM dataset.
    GenSynthetic(SynthArgs),
}

/// Every field of the experiment config as a flag; flags override `--config` entries.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    data_path: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// ridge, elasticnet, lasso, logistic, svm, l1svm
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    l1_weight: Option<String>,
    #[arg(long)]
    l2_weight: Option<String>,
    /// adaptreg, adaptsmooth, joint, classical-reg, classical-smooth, direct
    #[arg(long)]
    method: Option<String>,
    /// proxgd, apg, svrg, sdca
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    sigma0: Option<String>,
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    pass_budget: Option<String>,
    #[arg(long)]
    normalize: Option<String>,
    /// practical or theory
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    reference_tol: Option<String>,
    #[arg(long)]
    wall_clock: Option<String>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    cache_dir: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("out_dir", &self.out),
            ("seed", &self.seed),
            ("data_path", &self.data_path),
            ("dim", &self.dim),
            ("task", &self.task),
            ("l1_weight", &self.l1_weight),
            ("l2_weight", &self.l2_weight),
            ("method", &self.method),
            ("oracle", &self.oracle),
            ("sigma0", &self.sigma0),
            ("lambda0", &self.lambda0),
            ("sigma", &self.sigma),
            ("lambda", &self.lambda),
            ("epochs", &self.epochs),
            ("epsilon", &self.epsilon),
            ("pass_budget", &self.pass_budget),
            ("normalize", &self.normalize),
            ("policy", &self.policy),
            ("reference_tol", &self.reference_tol),
            ("wall_clock", &self.wall_clock),
            ("name", &self.name),
            ("cache_dir", &self.cache_dir),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Regression,
    Classification,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, value_enum, default_value_t = Labels::Regression)]
    labels: Labels,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    support: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output LibSVM file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted solution, one coordinate per line.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn expand_grid(base: ExperimentConfig, grid: &[String]) -> Result<Vec<ExperimentConfig>> {
    let mut configs = vec![base];
    for axis in grid {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis '{axis}' is not key=v1,v2")))?;
        let mut next = Vec::new();
        for c in &configs {
            for v in values.split(',').filter(|v| !v.trim().is_empty()) {
                let mut c = c.clone();
                c.set(key, v)?;
                next.push(c);
            }
        }
        configs = next;
    }
    Ok(configs)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.build()?;
            let trace = harness::run_experiment(&cfg)?;
            if let Some(r) = trace.last() {
                println!(
                    "epoch {} passes {:.3} objective {:.12e} subopt {:.3e}",
                    r.epoch, r.passes, r.objective, r.subopt
                );
            }
            if let Some(p) = cfg.trace_path() {
                println!("trace {}", p.display());
            }
        }
        Command::Sweep { base, grid } => {
            let cfg = base.build()?;
            let out = cfg
                .out_dir
                .clone()
                .ok_or_else(|| Error::Config("sweep needs --out".into()))?;
            let configs = expand_grid(cfg, &grid)?;
            for c in &configs {
                c.validate()?;
            }
            let entries = harness::sweep(&configs)?;
            std::fs::create_dir_all(&out)?;
            let summary = summary_csv(&entries);
            std::fs::write(out.join("summary.csv"), &summary)?;
            print!("{summary}");
            for e in entries.iter().filter(|e| e.error.is_some()) {
                eprintln!("{}: {}", e.name, e.error.as_deref().unwrap_or_default());
            }
        }
        Command::Reference(args) => {
            let mut cfg = args.build()?;
            if cfg.data_path.is_none() {
                return Err(Error::Config("reference needs --data-path".into()));
            }
            cfg.method = match cfg.task.case(cfg.l2_weight) {
                adaptred::Case::Case1 => harness::Method::Direct,
                adaptred::Case::Case2 => harness::Method::AdaptReg,
                adaptred::Case::Case3 => harness::Method::AdaptSmooth,
                adaptred::Case::Case4 => harness::Method::Joint,
            };
            cfg.validate()?;
            let data = harness::load_dataset(cfg.data_path.as_deref().unwrap(), cfg.dim)?;
            let f = harness::build_objective(&cfg, data)?;
            let dir = cfg
                .cache_dir
                .clone()
                .or_else(|| cfg.out_dir.as_ref().map(|d| d.join(".reference")));
            let r = match &dir {
                Some(d) => {
                    let cache = DiskCache::new(d);
                    let r = cache.get_or_compute(&f, cfg.reference_tol)?;
                    println!(
                        "cache {}",
                        cache.entry_path(&f, cfg.reference_tol).display()
                    );
                    r
                }
                None => reference_solution(&f, cfg.reference_tol)?,
            };
            println!("value {:?}", r.value);
            println!("certificate {:?}", r.certificate);
        }
        Command::GenSynthetic(a) => {
            let mut spec = match a.labels {
                Labels::Regression => SyntheticSpec::regression(a.n, a.d, a.seed),
                Labels::Classification => SyntheticSpec::classification(a.n, a.d, a.seed),
            };
            if let Some(v) = a.noise {
                spec.noise = v;
            }
            if let Some(v) = a.support {
                spec.support = v;
            }
            if let Some(v) = a.density {
                spec.density = v;
            }
            let (data, truth) = generate(&spec)?;
            std::fs::write(&a.out, data.to_libsvm())?;
            if let Some(p) = a.truth {
                let text: String = truth.iter().map(|v| format!("{v:?}\n")).collect();
                std::fs::write(p, text)?;
            }
            println!(
                "wrote {} rows, {} features to {}",
                data.n(),
                data.d(),
                a.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
