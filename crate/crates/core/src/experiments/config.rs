use std::path::{Path, PathBuf};

use clap::Args;

use crate::error::{Error, Result};
use crate::newton::NewtonConfig;
use crate::spacetime::QuadratureOrders;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoRule {
    Fixed(f64),
    /// `rho = h_x^2`
    MeshSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStepRule {
    /// `n_t = n_x`
    Hx,
    /// `n_t = n_x^2`
    HxSquared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n_x: usize,
    /// Explicit temporal interval count; `None` applies `time_rule`.
    pub n_t: Option<usize>,
    pub time_rule: TimeStepRule,
    pub rho: RhoRule,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub target: String,
    pub newton: NewtonConfig,
    pub quadrature: QuadratureOrders,
    pub error_order: usize,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub levels: Vec<usize>,
    pub point: Vec<f64>,
    pub input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            n_x: 4,
            n_t: None,
            time_rule: TimeStepRule::Hx,
            rho: RhoRule::MeshSquared,
            lower: Some(0.0),
            upper: Some(0.8),
            target: "sine".into(),
            newton: NewtonConfig::default(),
            quadrature: QuadratureOrders::default(),
            error_order: 5,
            threads: None,
            out_dir: PathBuf::from("out"),
            levels: vec![2, 4, 8, 16],
            point: vec![0.51; 3],
            input: None,
        }
    }
}

impl RunConfig {
    /// Temporal interval count for `n_x` cells per axis.
    pub fn temporal_intervals(&self, n_x: usize) -> usize {
        match (self.n_t, self.time_rule) {
            (Some(n_t), _) if n_x == self.n_x => n_t,
            (_, TimeStepRule::Hx) => n_x,
            (_, TimeStepRule::HxSquared) => n_x * n_x,
        }
    }

    pub fn rho_for(&self, n_x: usize) -> f64 {
        match self.rho {
            RhoRule::Fixed(r) => r,
            RhoRule::MeshSquared => (n_x as f64).powi(-2),
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match (self.lower, self.upper) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
        }
    }

    /// Applies one `key = value` setting; keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "dim" => {
                self.dim = parse_num(&key, value)?;
                if self.point.len() != self.dim {
                    self.point = vec![0.51; self.dim];
                }
            }
            "n" => {
                self.n_x = parse_num(&key, value)?;
                self.n_t = None;
            }
            "nx" => self.n_x = parse_num(&key, value)?,
            "nt" => self.n_t = Some(parse_num(&key, value)?),
            "rho" => {
                self.rho = if value == "auto" { RhoRule::MeshSquared } else { RhoRule::Fixed(parse_num(&key, value)?) }
            }
            "lower" => self.lower = parse_optional(&key, value)?,
            "upper" => self.upper = parse_optional(&key, value)?,
            "target" => self.target = value.to_string(),
            "omega" => self.newton.omega = parse_num(&key, value)?,
            "c" => self.newton.c = parse_num(&key, value)?,
            "newton-tol" => self.newton.increment_tol = parse_num(&key, value)?,
            "cg-tol" => self.newton.cg_rel_tol = parse_num(&key, value)?,
            "max-newton" => self.newton.max_newton = parse_num(&key, value)?,
            "point" => {
                self.point = value.split(',').map(|s| parse_num(&key, s.trim())).collect::<Result<_>>()?;
            }
            "threads" => self.threads = Some(parse_num(&key, value)?),
            "out" => self.out_dir = PathBuf::from(value),
            "ht-rule" => {
                self.time_rule = match value {
                    "hx" => TimeStepRule::Hx,
                    "hx2" => TimeStepRule::HxSquared,
                    _ => return Err(Error::Config(format!("ht-rule must be `hx` or `hx2`, got `{value}`"))),
                }
            }
            "levels" => {
                self.levels = value.split(',').map(|s| parse_num(&key, s.trim())).collect::<Result<_>>()?;
            }
            "input" => self.input = Some(PathBuf::from(value)),
            "quad-time" => self.quadrature.time = parse_num(&key, value)?,
            "quad-space" => self.quadrature.space = parse_num(&key, value)?,
            "error-order" => self.error_order = parse_num(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies the lines of a `key = value` file; `#` starts a comment.
    pub fn apply_file_contents(&mut self, contents: &str) -> Result<()> {
        for (lineno, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
            self.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.n_x < 2 || self.n_t == Some(0) {
            return Err(Error::Config("need n >= 2 spatial cells and nt >= 1 temporal intervals".into()));
        }
        if let RhoRule::Fixed(r) = self.rho {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("rho must be a nonnegative number, got {r}")));
            }
        }
        if let Some((lo, hi)) = self.bounds() {
            if !(lo <= 0.0 && hi >= 0.0 && lo < hi) {
                return Err(Error::Config(format!("bounds must satisfy lower <= 0 <= upper and lower < upper, got [{lo}, {hi}]")));
            }
        }
        if self.point.len() != self.dim || self.point.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config(format!("point must have {} coordinates in (0, 1), got {:?}", self.dim, self.point)));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&n| n < 2) {
            return Err(Error::Config(format!("levels must be a nonempty list of integers >= 2, got {:?}", self.levels)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        super::builtin_target(&self.target)?;
        self.newton.validate()
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

/// Run options shared by every subcommand. Every value is kept as text so
/// that flags and config file entries go through the same parser.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Spatial dimension {1|2|3}
    #[arg(long)]
    pub dim: Option<String>,
    /// Refinement parameter, n_x = n_t = n
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub nt: Option<String>,
    /// {auto|<float>}, auto means h_x^2
    #[arg(long)]
    pub rho: Option<String>,
    /// <float|none>
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    /// <float|none>
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<String>,
    #[arg(long = "cg-tol")]
    pub cg_tol: Option<String>,
    #[arg(long = "max-newton")]
    pub max_newton: Option<String>,
    /// x[,y[,z]]
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// {hx|hx2}
    #[arg(long = "ht-rule")]
    pub ht_rule: Option<String>,
    /// Comma separated refinement levels
    #[arg(long)]
    pub levels: Option<String>,
    /// Saved solution file
    #[arg(long)]
    pub input: Option<String>,
    /// `key = value` file, overridden by flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let fields: [(&'static str, &Option<String>); 19] = [
            ("dim", &self.dim),
            ("n", &self.n),
            ("nx", &self.nx),
            ("nt", &self.nt),
            ("rho", &self.rho),
            ("lower", &self.lower),
            ("upper", &self.upper),
            ("target", &self.target),
            ("omega", &self.omega),
            ("c", &self.c),
            ("newton-tol", &self.newton_tol),
            ("cg-tol", &self.cg_tol),
            ("max-newton", &self.max_newton),
            ("point", &self.point),
            ("threads", &self.threads),
            ("out", &self.out),
            ("ht-rule", &self.ht_rule),
            ("levels", &self.levels),
            ("input", &self.input),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }

    /// Defaults, then the config file, then the flags.
    pub fn to_config(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => Some(
                std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?,
            ),
            None => None,
        };
        let mut config = RunConfig::default();
        if let Some(contents) = file {
            config.apply_file_contents(&contents)?;
        }
        for (k, v) in self.pairs() {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(clap::Parser)]
#[command(no_binary_name = true)]
struct FlagsOnly {
    #[command(flatten)]
    args: RunArgs,
}

/// Parses run flags (without a program name or subcommand), reading the
/// `--config` file when given.
pub fn parse_config<I, S>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let parsed = FlagsOnly::try_parse_from(argv).map_err(|e| Error::Config(e.to_string()))?;
    parsed.args.to_config()
}

/// Reads a config file and applies it on top of the defaults.
pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    config.apply_file_contents(&std::fs::read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}
