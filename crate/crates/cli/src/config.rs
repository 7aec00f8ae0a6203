//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use reflectlab::model1::Tau;
use reflectlab::timescales::Thresholds;
use reflectlab::{PhysicalParams, PotentialSpec};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Timescales,
    Unitary,
    Model1,
    Qsd,
    Model2,
    Figures,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Timescales,
        Command::Unitary,
        Command::Model1,
        Command::Qsd,
        Command::Model2,
        Command::Figures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Timescales => "timescales",
            Command::Unitary => "unitary",
            Command::Model1 => "model1",
            Command::Qsd => "qsd",
            Command::Model2 => "model2",
            Command::Figures => "figures",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    None,
    X,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    Gaussian,
    Window,
    Step,
    ComplexStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsdMode {
    Wavefunction,
    Moments,
}

/// `tau` as configured: derived from `sigma`, explicit, or infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    Auto,
    Finite(f64),
    Infinite,
}

/// Everything a run needs. Every field maps to exactly one config key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub figure: Option<u8>,
    pub outdir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub strict: bool,

    pub m: f64,
    pub m_target: f64,
    pub hbar: f64,
    pub p_bar: f64,
    pub p_bar_target: f64,
    pub sigma: f64,
    pub sigma_target: f64,
    /// `None` places the packet at `-(pi/2)^{1/2} sigma`.
    pub x_bar: Option<f64>,
    pub x_bar_target: f64,
    pub d: f64,
    pub d_p: f64,

    pub barrier: BarrierKind,
    pub v0: f64,
    pub a: f64,
    pub l: f64,

    pub coupling: Option<CouplingKind>,
    pub sweep: Vec<f64>,
    pub tau: TauSetting,
    pub steady_target: bool,
    pub conditional_p: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: f64,
    pub n_points: usize,
    pub range_check: bool,

    pub dt: Option<f64>,
    pub steps: usize,
    pub grid_half_width: f64,
    pub grid_points: usize,
    pub trajectories: usize,
    pub record_every: usize,
    pub qsd_mode: QsdMode,

    pub much_less: f64,
    pub suppression_p: f64,
    pub ell: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            figure: None,
            outdir: PathBuf::from("out"),
            seed: 1,
            threads: None,
            strict: false,
            m: 1.0,
            m_target: 10.0,
            hbar: 1.0,
            p_bar: 1.0,
            p_bar_target: 0.0,
            sigma: 100.0,
            sigma_target: 1.0,
            x_bar: None,
            x_bar_target: 0.0,
            d: 0.0,
            d_p: 0.0,
            barrier: BarrierKind::Gaussian,
            v0: 0.01,
            a: 0.1,
            l: 1.0,
            coupling: None,
            sweep: Vec::new(),
            tau: TauSetting::Auto,
            steady_target: false,
            conditional_p: None,
            p_min: None,
            p_max: 0.0,
            n_points: 512,
            range_check: false,
            dt: None,
            steps: 1000,
            grid_half_width: 400.0,
            grid_points: 8192,
            trajectories: 64,
            record_every: 10,
            qsd_mode: QsdMode::Moments,
            much_less: 0.1,
            suppression_p: 0.1,
            ell: None,
        }
    }
}

/// Canonical keys, in serialization order.
pub const KEYS: &[(&str, &str)] = &[
    ("command", "timescales | unitary | model1 | qsd | model2 | figures"),
    ("figure", "1-5, for the figures command"),
    ("outdir", "output directory"),
    ("seed", "base seed of the noise streams"),
    ("threads", "worker threads, or auto"),
    ("strict", "turn regime warnings into failures"),
    ("m", "particle mass"),
    ("M", "target mass"),
    ("hbar", "Planck constant"),
    ("p_bar", "incoming momentum"),
    ("P_bar", "mean target momentum"),
    ("sigma", "packet width"),
    ("Sigma", "target width"),
    ("x_bar", "packet centre, or auto"),
    ("X_bar", "target centre"),
    ("D", "position diffusion constant"),
    ("D_p", "momentum diffusion constant"),
    ("potential", "gaussian | window | step | complex_step"),
    ("V0", "barrier strength"),
    ("a", "barrier length scale"),
    ("L", "window half width"),
    ("coupling", "none | x | p"),
    ("sweep", "comma list or log:lo:hi:n of coupling strengths"),
    ("tau", "interaction time, auto or inf"),
    ("steady_target", "use the steady localized target width"),
    ("conditional_P", "target momentum to condition on, or none"),
    ("p_min", "lower end of the momentum range, or auto (-8 p_bar)"),
    ("p_max", "upper end of the momentum range"),
    ("n_points", "momentum samples per density curve"),
    ("range_check", "fail when the density at p_min is not negligible"),
    ("dt", "time step, or auto"),
    ("steps", "number of time steps"),
    ("grid_half_width", "half width of the position grid"),
    ("grid_points", "points of the position grid"),
    ("trajectories", "number of QSD trajectories"),
    ("record_every", "steps between recorded moments"),
    ("qsd_mode", "wavefunction | moments"),
    ("much_less", "threshold for much-less-than verdicts"),
    ("suppression_p", "threshold on 1/(m hbar D_p)"),
    ("ell", "length in t_d, or auto (sigma)"),
];

const ALIASES: &[(&str, &str)] = &[
    ("Dp", "D_p"),
    ("out", "outdir"),
    ("tau_inf", "tau"),
    ("conditional", "conditional_P"),
];

pub fn canonical_key(key: &str) -> Option<&'static str> {
    let k = key.trim().replace('-', "_");
    if let Some((_, c)) = ALIASES.iter().find(|(a, _)| *a == k) {
        return Some(c);
    }
    KEYS.iter().find(|(c, _)| *c == k).map(|(c, _)| *c)
}

/// Keys that may be given as a bare flag meaning "true".
pub fn is_switch(key: &str) -> bool {
    matches!(
        key.trim().replace('-', "_").as_str(),
        "strict" | "steady_target" | "range_check" | "tau_inf"
    )
}

fn num(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(CliError::Config(format!("`{key}`: must be finite")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: expected a non-negative integer, got `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn auto_or<T>(v: &str, f: impl FnOnce(&str) -> Result<T, CliError>) -> Result<Option<T>, CliError> {
    if v == "auto" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

/// Comma list, or `log:lo:hi:n` for `n` log-spaced values.
pub fn parse_sweep(v: &str) -> Result<Vec<f64>, CliError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(rest) = v.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Config("`sweep`: expected log:lo:hi:n".into()));
        }
        let (lo, hi, n) = (num("sweep", parts[0])?, num("sweep", parts[1])?, count("sweep", parts[2])?);
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(CliError::Config("`sweep`: need 0 < lo < hi and n >= 2".into()));
        }
        let (a, b) = (lo.ln(), hi.ln());
        return Ok((0..n)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i + 1 == n {
                    hi
                } else {
                    (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect());
    }
    v.split(',').map(|s| num("sweep", s.trim())).collect()
}

impl RunConfig {
    /// Sets one key; `key` may be an alias.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let raw = key.trim().replace('-', "_");
        let k = canonical_key(&raw).ok_or_else(|| CliError::Config(format!("unknown key `{}`", key.trim())))?;
        let v = value.trim();
        if raw == "tau_inf" {
            if boolean(k, v)? {
                self.tau = TauSetting::Infinite;
            }
            return Ok(());
        }
        match k {
            "command" => {
                self.command = Some(Command::parse(v).ok_or_else(|| CliError::Config(format!("unknown command `{v}`")))?)
            }
            "figure" => {
                let n = count(k, v)?;
                if !(1..=5).contains(&n) {
                    return Err(CliError::Config(format!("`figure`: expected 1-5, got {n}")));
                }
                self.figure = Some(n as u8);
            }
            "outdir" => self.outdir = PathBuf::from(v),
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("`seed`: expected an unsigned integer, got `{v}`")))?
            }
            "threads" => self.threads = auto_or(v, |s| count(k, s))?,
            "strict" => self.strict = boolean(k, v)?,
            "m" => self.m = num(k, v)?,
            "M" => self.m_target = num(k, v)?,
            "hbar" => self.hbar = num(k, v)?,
            "p_bar" => self.p_bar = num(k, v)?,
            "P_bar" => self.p_bar_target = num(k, v)?,
            "sigma" => self.sigma = num(k, v)?,
            "Sigma" => self.sigma_target = num(k, v)?,
            "x_bar" => self.x_bar = auto_or(v, |s| num(k, s))?,
            "X_bar" => self.x_bar_target = num(k, v)?,
            "D" => self.d = num(k, v)?,
            "D_p" => self.d_p = num(k, v)?,
            "potential" => {
                self.barrier = match v {
                    "gaussian" => BarrierKind::Gaussian,
                    "window" => BarrierKind::Window,
                    "step" => BarrierKind::Step,
                    "complex_step" => BarrierKind::ComplexStep,
                    _ => return Err(CliError::Config(format!("unknown potential `{v}`"))),
                }
            }
            "V0" => self.v0 = num(k, v)?,
            "a" => self.a = num(k, v)?,
            "L" => self.l = num(k, v)?,
            "coupling" => {
                self.coupling = Some(match v {
                    "none" => CouplingKind::None,
                    "x" => CouplingKind::X,
                    "p" => CouplingKind::P,
                    _ => return Err(CliError::Config(format!("unknown coupling `{v}`"))),
                })
            }
            "sweep" => self.sweep = parse_sweep(v)?,
            "tau" => {
                self.tau = match v {
                    "auto" => TauSetting::Auto,
                    "inf" => TauSetting::Infinite,
                    _ => TauSetting::Finite(num(k, v)?),
                }
            }
            "steady_target" => self.steady_target = boolean(k, v)?,
            "conditional_P" => {
                self.conditional_p = if v == "none" { None } else { Some(num(k, v)?) };
            }
            "p_min" => self.p_min = auto_or(v, |s| num(k, s))?,
            "p_max" => self.p_max = num(k, v)?,
            "n_points" => self.n_points = count(k, v)?,
            "range_check" => self.range_check = boolean(k, v)?,
            "dt" => self.dt = auto_or(v, |s| num(k, s))?,
            "steps" => self.steps = count(k, v)?,
            "grid_half_width" => self.grid_half_width = num(k, v)?,
            "grid_points" => self.grid_points = count(k, v)?,
            "trajectories" => self.trajectories = count(k, v)?,
            "record_every" => self.record_every = count(k, v)?,
            "qsd_mode" => {
                self.qsd_mode = match v {
                    "wavefunction" => QsdMode::Wavefunction,
                    "moments" => QsdMode::Moments,
                    _ => return Err(CliError::Config(format!("unknown qsd_mode `{v}`"))),
                }
            }
            "much_less" => self.much_less = num(k, v)?,
            "suppression_p" => self.suppression_p = num(k, v)?,
            "ell" => self.ell = auto_or(v, |s| num(k, s))?,
            _ => unreachable!("key table and setter disagree on `{k}`"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `--key value`, `--key=value` and bare switches, in order.
    pub fn apply_flags<S: AsRef<str>>(&mut self, args: &[S]) -> Result<(), CliError> {
        let mut i = 0;
        while i < args.len() {
            let arg = args[i].as_ref();
            let body = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Config(format!("unexpected argument `{arg}`")))?;
            if let Some((k, v)) = body.split_once('=') {
                self.set(k, v)?;
                i += 1;
                continue;
            }
            let next = args.get(i + 1).map(|s| s.as_ref());
            let takes_value = match next {
                Some(n) => !(n.starts_with("--") || (is_switch(body) && !matches!(n, "true" | "false"))),
                None => false,
            };
            if takes_value {
                self.set(body, next.unwrap_or_default())?;
                i += 2;
            } else if is_switch(body) {
                self.set(body, "true")?;
                i += 1;
            } else {
                return Err(CliError::Config(format!("`--{body}` needs a value")));
            }
        }
        Ok(())
    }

    fn entry(&self, key: &str) -> String {
        let f = |x: f64| format!("{x:?}");
        let opt = |x: Option<f64>| x.map_or_else(|| "auto".to_string(), f);
        match key {
            "command" => self.command.map_or("none", |c| c.name()).to_string(),
            "figure" => self.figure.map_or_else(|| "none".to_string(), |n| n.to_string()),
            "outdir" => self.outdir.display().to_string(),
            "seed" => self.seed.to_string(),
            "threads" => self.threads.map_or_else(|| "auto".to_string(), |n| n.to_string()),
            "strict" => self.strict.to_string(),
            "m" => f(self.m),
            "M" => f(self.m_target),
            "hbar" => f(self.hbar),
            "p_bar" => f(self.p_bar),
            "P_bar" => f(self.p_bar_target),
            "sigma" => f(self.sigma),
            "Sigma" => f(self.sigma_target),
            "x_bar" => opt(self.x_bar),
            "X_bar" => f(self.x_bar_target),
            "D" => f(self.d),
            "D_p" => f(self.d_p),
            "potential" => match self.barrier {
                BarrierKind::Gaussian => "gaussian",
                BarrierKind::Window => "window",
                BarrierKind::Step => "step",
                BarrierKind::ComplexStep => "complex_step",
            }
            .to_string(),
            "V0" => f(self.v0),
            "a" => f(self.a),
            "L" => f(self.l),
            "coupling" => match self.coupling {
                None => "unset",
                Some(CouplingKind::None) => "none",
                Some(CouplingKind::X) => "x",
                Some(CouplingKind::P) => "p",
            }
            .to_string(),
            "sweep" => self.sweep.iter().map(|&x| f(x)).collect::<Vec<_>>().join(","),
            "tau" => match self.tau {
                TauSetting::Auto => "auto".to_string(),
                TauSetting::Infinite => "inf".to_string(),
                TauSetting::Finite(t) => f(t),
            },
            "steady_target" => self.steady_target.to_string(),
            "conditional_P" => self.conditional_p.map_or_else(|| "none".to_string(), f),
            "p_min" => opt(self.p_min),
            "p_max" => f(self.p_max),
            "n_points" => self.n_points.to_string(),
            "range_check" => self.range_check.to_string(),
            "dt" => opt(self.dt),
            "steps" => self.steps.to_string(),
            "grid_half_width" => f(self.grid_half_width),
            "grid_points" => self.grid_points.to_string(),
            "trajectories" => self.trajectories.to_string(),
            "record_every" => self.record_every.to_string(),
            "qsd_mode" => match self.qsd_mode {
                QsdMode::Wavefunction => "wavefunction",
                QsdMode::Moments => "moments",
            }
            .to_string(),
            "much_less" => f(self.much_less),
            "suppression_p" => f(self.suppression_p),
            "ell" => opt(self.ell),
            _ => unreachable!("unknown key `{key}`"),
        }
    }

    /// Every key, one per line, in a fixed order. Unset optional keys are
    /// written with a value the parser maps back to "unset".
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let v = self.entry(k);
            // placeholders that are not valid inputs are left commented out
            if (*k == "command" && v == "none") || (*k == "figure" && v == "none") || (*k == "coupling" && v == "unset") {
                let _ = writeln!(out, "# {k} =");
            } else {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Checks the keys the chosen command cannot default.
    pub fn require(&self) -> Result<Command, CliError> {
        let command = self.command.ok_or_else(|| CliError::Config("missing required key `command`".into()))?;
        match command {
            Command::Figures if self.figure.is_none() => {
                Err(CliError::Config("missing required key `figure` for figures".into()))
            }
            Command::Model1 | Command::Qsd if self.coupling.is_none() => Err(CliError::Config(format!(
                "missing required key `coupling` for {}",
                command.name()
            ))),
            _ => Ok(command),
        }
    }

    pub fn potential(&self) -> PotentialSpec {
        match self.barrier {
            BarrierKind::Gaussian => PotentialSpec::Gaussian { v0: self.v0, a: self.a },
            BarrierKind::Window => PotentialSpec::SmearedWindow {
                v0: self.v0,
                a: self.a,
                l: self.l,
            },
            BarrierKind::Step => PotentialSpec::Step { v0: self.v0 },
            BarrierKind::ComplexStep => PotentialSpec::ComplexStep { v0: self.v0 },
        }
    }

    pub fn params(&self) -> PhysicalParams {
        let mut p = PhysicalParams {
            m: self.m,
            m_target: self.m_target,
            hbar: self.hbar,
            p_bar: self.p_bar,
            p_bar_target: self.p_bar_target,
            sigma: self.sigma,
            sigma_target: self.sigma_target,
            x_bar: 0.0,
            x_bar_target: self.x_bar_target,
            d: self.d,
            d_p: self.d_p,
            potential: self.potential(),
        };
        p.x_bar = self.x_bar.unwrap_or_else(|| -p.approach_distance());
        p
    }

    pub fn tau(&self) -> Tau {
        match self.tau {
            TauSetting::Auto => Tau::Finite(self.params().default_tau()),
            TauSetting::Finite(t) => Tau::Finite(t),
            TauSetting::Infinite => Tau::Infinite,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            much_less: self.much_less,
            suppression_p: self.suppression_p,
        }
    }

    /// `(p_min, p_max)`, with `p_min` defaulting to `-8 p_bar`.
    pub fn p_range(&self) -> (f64, f64) {
        (self.p_min.unwrap_or(-8.0 * self.p_bar), self.p_max)
    }
}
