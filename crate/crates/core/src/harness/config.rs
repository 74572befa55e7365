use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::objectives::Case;
use crate::regularizers::Regularizer;

/// The six example problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Ridge,
    ElasticNet,
    Lasso,
    Logistic,
    Svm,
    L1Svm,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Ridge,
        Task::ElasticNet,
        Task::Lasso,
        Task::Logistic,
        Task::Svm,
        Task::L1Svm,
    ];

    pub fn loss(self) -> LossKind {
        match self {
            Task::Ridge | Task::ElasticNet | Task::Lasso => LossKind::Squared,
            Task::Logistic => LossKind::Logistic,
            Task::Svm | Task::L1Svm => LossKind::Hinge,
        }
    }

    /// Regularizer from the configured weights; errors when a weight the task needs is missing.
    pub fn regularizer(self, l1: f64, l2: f64) -> Result<Regularizer> {
        let need = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "task {self} needs {name} > 0, got {v}"
                )))
            }
        };
        let forbid = |name: &str, v: f64| {
            if v == 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "task {self} takes no {name} (got {v})"
                )))
            }
        };
        if !(l1 >= 0.0 && l2 >= 0.0) {
            return Err(Error::Config(
                "regularizer weights must be nonnegative".into(),
            ));
        }
        match self {
            Task::Ridge => {
                need("l2_weight", l2)?;
                forbid("l1_weight", l1)?;
                Ok(Regularizer::l2(l2))
            }
            Task::ElasticNet => {
                need("l2_weight", l2)?;
                need("l1_weight", l1)?;
                Ok(Regularizer::elastic_net(l2, l1))
            }
            Task::Lasso | Task::L1Svm => {
                need("l1_weight", l1)?;
                forbid("l2_weight", l2)?;
                Ok(Regularizer::l1(l1))
            }
            Task::Logistic => {
                need("l1_weight", l1)?;
                Ok(Regularizer::elastic_net(l2, l1))
            }
            Task::Svm => {
                need("l2_weight", l2)?;
                Ok(Regularizer::elastic_net(l2, l1))
            }
        }
    }

    /// Case of the task on data with at least one nonzero row.
    pub fn case(self, l2: f64) -> Case {
        let smooth = self.loss().is_smooth();
        Case::classify(if smooth { 1.0 } else { f64::INFINITY }, l2)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ridge => "ridge",
            Task::ElasticNet => "elasticnet",
            Task::Lasso => "lasso",
            Task::Logistic => "logistic",
            Task::Svm => "svm",
            Task::L1Svm => "l1svm",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AdaptReg,
    AdaptSmooth,
    Joint,
    ClassicalReg,
    ClassicalSmooth,
    Direct,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::AdaptReg,
        Method::AdaptSmooth,
        Method::Joint,
        Method::ClassicalReg,
        Method::ClassicalSmooth,
        Method::Direct,
    ];

    /// Case of the objective the method accepts.
    pub fn input_case(self) -> Case {
        match self {
            Method::AdaptReg | Method::ClassicalReg => Case::Case2,
            Method::AdaptSmooth | Method::ClassicalSmooth => Case::Case3,
            Method::Joint => Case::Case4,
            Method::Direct => Case::Case1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AdaptReg => "adaptreg",
            Method::AdaptSmooth => "adaptsmooth",
            Method::Joint => "joint",
            Method::ClassicalReg => "classical-reg",
            Method::ClassicalSmooth => "classical-smooth",
            Method::Direct => "direct",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleKind {
    ProxGd,
    Apg,
    Svrg,
    Sdca,
}

impl OracleKind {
    pub const ALL: [OracleKind; 4] = [
        OracleKind::ProxGd,
        OracleKind::Apg,
        OracleKind::Svrg,
        OracleKind::Sdca,
    ];
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::ProxGd => "proxgd",
            OracleKind::Apg => "apg",
            OracleKind::Svrg => "svrg",
            OracleKind::Sdca => "sdca",
        })
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleKind::ALL
            .into_iter()
            .find(|o| o.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown oracle '{s}'")))
    }
}

/// Inner stopping rule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// The oracle's practical rule (gap quarter or grad-norm third).
    Practical,
    Theory,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Practical => "practical",
            PolicyKind::Theory => "theory",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "practical" => Ok(PolicyKind::Practical),
            "theory" => Ok(PolicyKind::Theory),
            _ => Err(Error::Config(format!("unknown policy '{s}'"))),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_path: Option<PathBuf>,
    /// Feature dimension override (defaults to the largest index in the file).
    pub dim: Option<usize>,
    pub task: Task,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub method: Method,
    pub oracle: OracleKind,
    pub sigma0: Option<f64>,
    pub lambda0: Option<f64>,
    /// Fixed σ of classical-reg.
    pub sigma: Option<f64>,
    /// Fixed λ of classical-smooth.
    pub lambda: Option<f64>,
    /// Epoch count `T`; unlimited when unset.
    pub epochs: Option<usize>,
    pub epsilon: Option<f64>,
    pub pass_budget: f64,
    pub seed: u64,
    pub normalize: bool,
    pub out_dir: Option<PathBuf>,
    pub policy: PolicyKind,
    pub reference_tol: f64,
    /// Record wall-clock milliseconds (makes traces non-reproducible).
    pub wall_clock: bool,
    /// Trace file stem; derived from the settings when unset.
    pub name: Option<String>,
    /// Where reference minimizers are cached; `<out_dir>/.reference` when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_path: None,
            dim: None,
            task: Task::Lasso,
            l1_weight: 0.0,
            l2_weight: 0.0,
            method: Method::AdaptReg,
            oracle: OracleKind::Apg,
            sigma0: None,
            lambda0: None,
            sigma: None,
            lambda: None,
            epochs: None,
            epsilon: None,
            pass_budget: 100.0,
            seed: 0,
            normalize: false,
            out_dir: None,
            policy: PolicyKind::Practical,
            reference_tol: 1e-12,
            wall_clock: false,
            name: None,
            cache_dir: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for {key}"))),
    }
}

impl ExperimentConfig {
    /// Sets one field from its textual key (`snake_case` or `kebab-case`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let k = key.as_str();
        match k {
            "data_path" | "data" => self.data_path = Some(PathBuf::from(v)),
            "dim" => self.dim = Some(parse_value(k, v)?),
            "task" => self.task = v.parse()?,
            "l1_weight" => self.l1_weight = parse_value(k, v)?,
            "l2_weight" => self.l2_weight = parse_value(k, v)?,
            "method" => self.method = v.parse()?,
            "oracle" => self.oracle = v.parse()?,
            "sigma0" => self.sigma0 = Some(parse_value(k, v)?),
            "lambda0" => self.lambda0 = Some(parse_value(k, v)?),
            "sigma" => self.sigma = Some(parse_value(k, v)?),
            "lambda" => self.lambda = Some(parse_value(k, v)?),
            "T" | "t" | "epochs" => self.epochs = Some(parse_value(k, v)?),
            "epsilon" | "eps" => self.epsilon = Some(parse_value(k, v)?),
            "pass_budget" => self.pass_budget = parse_value(k, v)?,
            "seed" => self.seed = parse_value(k, v)?,
            "normalize" => self.normalize = parse_bool(k, v)?,
            "out_dir" | "out" => self.out_dir = Some(PathBuf::from(v)),
            "policy" => self.policy = v.parse()?,
            "reference_tol" => self.reference_tol = parse_value(k, v)?,
            "wall_clock" => self.wall_clock = parse_bool(k, v)?,
            "name" => self.name = Some(v.to_string()),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip_config(e))))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes to the `key = value` format (round-trips through [`ExperimentConfig::parse`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        if let Some(p) = &self.data_path {
            put("data_path", p.display().to_string());
        }
        if let Some(d) = self.dim {
            put("dim", d.to_string());
        }
        put("task", self.task.to_string());
        put("l1_weight", format!("{:?}", self.l1_weight));
        put("l2_weight", format!("{:?}", self.l2_weight));
        put("method", self.method.to_string());
        put("oracle", self.oracle.to_string());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}"));
        for (k, v) in [
            ("sigma0", opt(self.sigma0)),
            ("lambda0", opt(self.lambda0)),
            ("sigma", opt(self.sigma)),
            ("lambda", opt(self.lambda)),
            ("epochs", self.epochs.map(|t| t.to_string())),
            ("epsilon", opt(self.epsilon)),
        ] {
            if let Some(v) = v {
                put(k, v);
            }
        }
        put("pass_budget", format!("{:?}", self.pass_budget));
        put("seed", self.seed.to_string());
        put("normalize", self.normalize.to_string());
        if let Some(p) = &self.out_dir {
            put("out_dir", p.display().to_string());
        }
        put("policy", self.policy.to_string());
        put("reference_tol", format!("{:?}", self.reference_tol));
        put("wall_clock", self.wall_clock.to_string());
        if let Some(n) = &self.name {
            put("name", n.clone());
        }
        if let Some(p) = &self.cache_dir {
            put("cache_dir", p.display().to_string());
        }
        out
    }

    /// Checks task/method/oracle compatibility and required parameters.
    pub fn validate(&self) -> Result<()> {
        self.task.regularizer(self.l1_weight, self.l2_weight)?;
        let case = self.task.case(self.l2_weight);
        let want = self.method.input_case();
        if case != want {
            return Err(Error::Config(format!(
                "method {} needs a {want} task, but {} with these weights is {case}",
                self.method, self.task
            )));
        }
        match self.method {
            Method::ClassicalReg if self.sigma.is_none() => {
                return Err(Error::Config("classical-reg needs sigma".into()))
            }
            Method::ClassicalSmooth if self.lambda.is_none() => {
                return Err(Error::Config("classical-smooth needs lambda".into()))
            }
            _ => {}
        }
        for (k, v) in [
            ("sigma0", self.sigma0),
            ("lambda0", self.lambda0),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{k} must be positive, got {v}")));
                }
            }
        }
        if !(self.pass_budget > 0.0) {
            return Err(Error::Config("pass_budget must be positive".into()));
        }
        if !(self.reference_tol > 0.0) {
            return Err(Error::Config("reference_tol must be positive".into()));
        }
        if self.epochs == Some(0) {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.data_path.is_none() {
            return Err(Error::Config("data_path is required".into()));
        }
        Ok(())
    }

    /// Stem of the trace file.
    pub fn trace_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut s = format!("{}_{}_{}", self.task, self.method, self.oracle);
        match self.method {
            Method::ClassicalReg => s.push_str(&format!("_sigma={:?}", self.sigma.unwrap_or(0.0))),
            Method::ClassicalSmooth => {
                s.push_str(&format!("_lambda={:?}", self.lambda.unwrap_or(0.0)))
            }
            _ => {
                if let Some(v) = self.sigma0 {
                    s.push_str(&format!("_sigma0={v:?}"));
                }
                if let Some(v) = self.lambda0 {
                    s.push_str(&format!("_lambda0={v:?}"));
                }
            }
        }
        s
    }

    /// Trace file path (`<out_dir>/<name>.csv`), when an output directory is set.
    pub fn trace_path(&self) -> Option<PathBuf> {
        self.out_dir
            .as_ref()
            .map(|d| d.join(format!("{}.csv", self.trace_name())))
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
