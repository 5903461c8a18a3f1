//! Run configuration: `key = value` lines grouped under `[section]` headers.
//! Units are fixed per key (Pa, m², m, s, °C, W/(m·°C), J/(kg·°C), 1/°C).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::nn::FourierSpec;
use crate::oracle::StratumFd;
use crate::physics::presets::{BarryMercer, Benchmark, Stratum, Terzaghi};
use crate::physics::{MaterialRecord, ScaleSet};
use crate::train::{ProblemSettings, SequentialSchedule};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Oracle,
    Forward,
    Invert,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Forward => "forward",
            Mode::Invert => "invert",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        [Mode::Oracle, Mode::Forward, Mode::Invert]
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("run.mode: unknown mode '{s}' (expected oracle, forward or invert)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Terzaghi(Terzaghi),
    BarryMercer(BarryMercer),
    Stratum(Stratum),
}

impl Preset {
    pub fn new(b: Benchmark) -> Self {
        match b {
            Benchmark::Terzaghi => Preset::Terzaghi(Terzaghi::default()),
            Benchmark::BarryMercer => Preset::BarryMercer(BarryMercer::default()),
            Benchmark::Stratum => Preset::Stratum(Stratum::default()),
        }
    }

    pub fn benchmark(&self) -> Benchmark {
        match self {
            Preset::Terzaghi(_) => Benchmark::Terzaghi,
            Preset::BarryMercer(_) => Benchmark::BarryMercer,
            Preset::Stratum(_) => Benchmark::Stratum,
        }
    }

    pub fn mat(&self) -> &MaterialRecord {
        match self {
            Preset::Terzaghi(p) => &p.mat,
            Preset::BarryMercer(p) => &p.mat,
            Preset::Stratum(p) => &p.mat,
        }
    }

    fn mat_mut(&mut self) -> &mut MaterialRecord {
        match self {
            Preset::Terzaghi(p) => &mut p.mat,
            Preset::BarryMercer(p) => &mut p.mat,
            Preset::Stratum(p) => &mut p.mat,
        }
    }

    pub fn scales(&self) -> &ScaleSet {
        match self {
            Preset::Terzaghi(p) => &p.scales,
            Preset::BarryMercer(p) => &p.scales,
            Preset::Stratum(p) => &p.scales,
        }
    }

    fn scales_mut(&mut self) -> &mut ScaleSet {
        match self {
            Preset::Terzaghi(p) => &mut p.scales,
            Preset::BarryMercer(p) => &mut p.scales,
            Preset::Stratum(p) => &mut p.scales,
        }
    }
}

/// Resolution of the reference solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    /// series terms (Terzaghi) or modes per axis (Barry–Mercer)
    pub terms: usize,
    /// spatial points per axis of the emitted field table
    pub n_space: usize,
    /// time levels of the emitted field table
    pub n_t: usize,
    pub fd: StratumFd,
}

impl OracleSettings {
    pub fn preset(b: Benchmark) -> Self {
        let (terms, n_space, n_t) = match b {
            Benchmark::Terzaghi => (200, 41, 101),
            Benchmark::BarryMercer => (64, 21, 41),
            Benchmark::Stratum => (0, 201, 101),
        };
        Self {
            terms,
            n_space,
            n_t,
            fd: StratumFd::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub noise: f64,
    pub out: PathBuf,
    /// starting value of every trainable coefficient
    pub initial: f64,
    pub preset: Preset,
    pub network: ProblemSettings,
    pub schedule: SequentialSchedule,
    pub oracle: OracleSettings,
}

impl RunConfig {
    /// Published settings of a benchmark.
    pub fn preset(b: Benchmark) -> Self {
        Self {
            mode: Mode::Invert,
            seed: 1,
            noise: 0.0,
            out: PathBuf::from("results"),
            initial: 2.0,
            preset: Preset::new(b),
            network: ProblemSettings::preset(b),
            schedule: SequentialSchedule::default(),
            oracle: OracleSettings::preset(b),
        }
    }

    pub fn benchmark(&self) -> Benchmark {
        self.preset.benchmark()
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let entries = lex(text)?;
        let bench = entries
            .iter()
            .find(|(s, k, _, _)| s == "run" && k == "benchmark")
            .ok_or_else(|| Error::Config("run.benchmark is required".into()))?;
        let mut cfg = Self::preset(bench.2.parse().map_err(|e: Error| at(bench.3, e))?);
        let mut seen = std::collections::HashSet::new();
        for (sec, key, val, line) in &entries {
            if !seen.insert((sec.clone(), key.clone())) {
                return Err(Error::Config(format!("line {line}: {sec}.{key} is set twice")));
            }
            cfg.apply(sec, key, val).map_err(|e| at(*line, e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.preset.mat().validate()?;
        self.preset.scales().validate()?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("run.noise must be non-negative, got {}", self.noise)));
        }
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err(Error::Config(format!("schedule.initial must be positive, got {}", self.initial)));
        }
        if self.network.width == 0 || self.network.depth == 0 {
            return Err(Error::Config("network.width and network.depth must be at least 1".into()));
        }
        Ok(())
    }

    fn apply(&mut self, sec: &str, key: &str, v: &str) -> Result<(), Error> {
        let name = format!("{sec}.{key}");
        let f = || num::<f64>(&name, v);
        let u = || num::<usize>(&name, v);
        match (sec, key) {
            ("run", "benchmark") => {}
            ("run", "mode") => self.mode = v.parse()?,
            ("run", "seed") => self.seed = num(&name, v)?,
            ("run", "noise") => self.noise = f()?,
            ("run", "out") => self.out = PathBuf::from(v),
            ("network", "width") => self.network.width = u()?,
            ("network", "depth") => self.network.depth = u()?,
            ("network", "seed") => self.network.seed = num(&name, v)?,
            ("network", "fourier_count") => {
                let n = u()?;
                let scale = self.network.fourier.map_or(1.0, |f| f.scale);
                self.network.fourier = (n > 0).then_some(FourierSpec { count: n, scale });
            }
            ("network", "fourier_scale") => {
                let s = f()?;
                if let Some(fs) = self.network.fourier.as_mut() {
                    fs.scale = s;
                } else {
                    self.network.fourier = Some(FourierSpec { count: 0, scale: s });
                }
            }
            ("grid", "n_space") => self.network.n_space = u()?,
            ("grid", "n_t") => self.network.n_t = u()?,
            ("grid", "refine_half_width") => {
                let h = f()?;
                let n = self.network.refine.map_or(11, |r| r.1);
                self.network.refine = (h > 0.0).then_some((h, n));
            }
            ("grid", "refine_n") => {
                let n = u()?;
                let h = self.network.refine.map_or(0.1, |r| r.0);
                self.network.refine = (n > 0).then_some((h, n));
            }
            ("schedule", "epochs") => self.schedule.epochs = u()?,
            ("schedule", "batch") => self.schedule.batch = u()?,
            ("schedule", "iterations") => self.schedule.iterations = u()?,
            ("schedule", "tol") => self.schedule.tol = f()?,
            ("schedule", "lr") => self.schedule.lr = f()?,
            ("schedule", "lr_decay") => self.schedule.lr_decay = f()?,
            ("schedule", "gradnorm_every") => self.schedule.gradnorm_every = u()?,
            ("schedule", "alpha") => self.schedule.alpha = f()?,
            ("schedule", "initial") => self.initial = f()?,
            ("oracle", "terms") => self.oracle.terms = u()?,
            ("oracle", "n_space") => self.oracle.n_space = u()?,
            ("oracle", "n_t") => self.oracle.n_t = u()?,
            ("oracle", "fd_nodes") => self.oracle.fd.nodes = u()?,
            ("oracle", "fd_steps") => self.oracle.fd.steps = u()?,
            ("material", k) => {
                let x = f()?;
                let m = self.preset.mat_mut();
                *material_field(m, k).ok_or_else(|| unknown(&name))? = x;
                if k == "e" || k == "nu" {
                    m.k_dr = MaterialRecord::bulk_from_young(m.e, m.nu);
                }
            }
            ("scales", k) => {
                let x = f()?;
                *scale_field(self.preset.scales_mut(), k).ok_or_else(|| unknown(&name))? = x;
            }
            ("preset", k) => {
                let x = f()?;
                *preset_field(&mut self.preset, k).ok_or_else(|| unknown(&name))? = x;
            }
            _ => return Err(unknown(&name)),
        }
        Ok(())
    }

    /// Every effective setting in the config format; parsing the result gives
    /// back an equal configuration.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let sec = |s: &mut String, name: &str, kv: Vec<(String, String)>| {
            let _ = writeln!(s, "[{name}]");
            for (k, v) in kv {
                let _ = writeln!(s, "{k} = {v}");
            }
            s.push('\n');
        };
        let kv = |k: &str, v: String| (k.to_string(), v);
        sec(
            &mut s,
            "run",
            vec![
                kv("benchmark", self.benchmark().to_string()),
                kv("mode", self.mode.id().into()),
                kv("seed", self.seed.to_string()),
                kv("noise", self.noise.to_string()),
                kv("out", self.out.display().to_string()),
            ],
        );
        let n = &self.network;
        let mut net = vec![
            kv("width", n.width.to_string()),
            kv("depth", n.depth.to_string()),
            kv("seed", n.seed.to_string()),
            kv("fourier_count", n.fourier.map_or(0, |f| f.count).to_string()),
        ];
        if let Some(f) = n.fourier {
            net.push(kv("fourier_scale", f.scale.to_string()));
        }
        sec(&mut s, "network", net);
        let mut grid = vec![kv("n_space", n.n_space.to_string()), kv("n_t", n.n_t.to_string())];
        match n.refine {
            Some((h, r)) => {
                grid.push(kv("refine_half_width", h.to_string()));
                grid.push(kv("refine_n", r.to_string()));
            }
            None => grid.push(kv("refine_n", "0".into())),
        }
        sec(&mut s, "grid", grid);
        let c = &self.schedule;
        sec(
            &mut s,
            "schedule",
            vec![
                kv("epochs", c.epochs.to_string()),
                kv("batch", c.batch.to_string()),
                kv("iterations", c.iterations.to_string()),
                kv("tol", c.tol.to_string()),
                kv("lr", c.lr.to_string()),
                kv("lr_decay", c.lr_decay.to_string()),
                kv("gradnorm_every", c.gradnorm_every.to_string()),
                kv("alpha", c.alpha.to_string()),
                kv("initial", self.initial.to_string()),
            ],
        );
        let o = &self.oracle;
        sec(
            &mut s,
            "oracle",
            vec![
                kv("terms", o.terms.to_string()),
                kv("n_space", o.n_space.to_string()),
                kv("n_t", o.n_t.to_string()),
                kv("fd_nodes", o.fd.nodes.to_string()),
                kv("fd_steps", o.fd.steps.to_string()),
            ],
        );
        let mut mat = self.preset.mat().clone();
        let mut m = Vec::new();
        for k in MATERIAL_KEYS {
            m.push(kv(k, material_field(&mut mat, k).map(|x| x.to_string()).unwrap_or_default()));
        }
        sec(&mut s, "material", m);
        let mut sc = *self.preset.scales();
        sec(
            &mut s,
            "scales",
            SCALE_KEYS
                .iter()
                .map(|k| kv(k, scale_field(&mut sc, k).map(|x| x.to_string()).unwrap_or_default()))
                .collect(),
        );
        let mut p = self.preset;
        sec(
            &mut s,
            "preset",
            preset_keys(self.benchmark())
                .iter()
                .map(|k| kv(k, preset_field(&mut p, k).map(|x| x.to_string()).unwrap_or_default()))
                .collect(),
        );
        s
    }
}

fn at(line: usize, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("line {line}: {m}")),
        e => e,
    }
}

fn unknown(name: &str) -> Error {
    Error::Config(format!("unknown key {name}"))
}

fn num<T: FromStr>(name: &str, v: &str) -> Result<T, Error> {
    v.parse().map_err(|_| Error::Config(format!("{name}: cannot parse '{v}'")))
}

/// `(section, key, value, line)` in file order.
fn lex(text: &str) -> Result<Vec<(String, String, String, usize)>, Error> {
    let mut out = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: malformed section header", i + 1)))?;
            section = Some(name.trim().to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let sec = section
            .clone()
            .ok_or_else(|| Error::Config(format!("line {}: key {} outside any section", i + 1, k.trim())))?;
        out.push((sec, k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

const MATERIAL_KEYS: [&str; 23] = [
    "e", "nu", "k_dr", "b", "m", "phi", "k_s", "k_w", "k_g", "k", "mu_w", "mu_g", "rho_s", "rho_w", "rho_g", "beta_s",
    "beta_w", "beta_g", "cap_s", "cap_w", "cap_g", "lambda_avg", "g",
];

fn material_field<'a>(m: &'a mut MaterialRecord, k: &str) -> Option<&'a mut f64> {
    Some(match k {
        "e" => &mut m.e,
        "nu" => &mut m.nu,
        "k_dr" => &mut m.k_dr,
        "b" => &mut m.b,
        "m" => &mut m.m,
        "phi" => &mut m.phi,
        "k_s" => &mut m.k_s,
        "k_w" => &mut m.k_w,
        "k_g" => &mut m.k_g,
        "k" => &mut m.k,
        "mu_w" => &mut m.mu_w,
        "mu_g" => &mut m.mu_g,
        "rho_s" => &mut m.rho_s,
        "rho_w" => &mut m.rho_w,
        "rho_g" => &mut m.rho_g,
        "beta_s" => &mut m.beta_s,
        "beta_w" => &mut m.beta_w,
        "beta_g" => &mut m.beta_g,
        "cap_s" => &mut m.cap_s,
        "cap_w" => &mut m.cap_w,
        "cap_g" => &mut m.cap_g,
        "lambda_avg" => &mut m.lambda_avg,
        "g" => &mut m.g,
        _ => return None,
    })
}

const SCALE_KEYS: [&str; 11] = ["t", "x", "p", "temp", "k_dr", "k", "mu", "rho", "lambda", "heat_cap", "beta"];

fn scale_field<'a>(s: &'a mut ScaleSet, k: &str) -> Option<&'a mut f64> {
    Some(match k {
        "t" => &mut s.t,
        "x" => &mut s.x,
        "p" => &mut s.p,
        "temp" => &mut s.temp,
        "k_dr" => &mut s.k_dr,
        "k" => &mut s.k,
        "mu" => &mut s.mu,
        "rho" => &mut s.rho,
        "lambda" => &mut s.lambda,
        "heat_cap" => &mut s.heat_cap,
        "beta" => &mut s.beta,
        _ => return None,
    })
}

fn preset_keys(b: Benchmark) -> &'static [&'static str] {
    match b {
        Benchmark::Terzaghi => &["height", "load"],
        Benchmark::BarryMercer => &["beta", "well_x", "well_y", "alpha"],
        Benchmark::Stratum => &[
            "height", "pc_init", "p_gas", "temp_init", "pc_top", "temp_top", "p_b", "bc_lambda", "s_rw",
        ],
    }
}

fn preset_field<'a>(p: &'a mut Preset, k: &str) -> Option<&'a mut f64> {
    Some(match (p, k) {
        (Preset::Terzaghi(t), "height") => &mut t.height,
        (Preset::Terzaghi(t), "load") => &mut t.load,
        (Preset::BarryMercer(b), "beta") => &mut b.beta,
        (Preset::BarryMercer(b), "well_x") => &mut b.well.0,
        (Preset::BarryMercer(b), "well_y") => &mut b.well.1,
        (Preset::BarryMercer(b), "alpha") => &mut b.alpha,
        (Preset::Stratum(s), "height") => &mut s.height,
        (Preset::Stratum(s), "pc_init") => &mut s.pc_init,
        (Preset::Stratum(s), "p_gas") => &mut s.p_gas,
        (Preset::Stratum(s), "temp_init") => &mut s.temp_init,
        (Preset::Stratum(s), "pc_top") => &mut s.pc_top,
        (Preset::Stratum(s), "temp_top") => &mut s.temp_top,
        (Preset::Stratum(s), "p_b") => &mut s.bc.p_b,
        (Preset::Stratum(s), "bc_lambda") => &mut s.bc.lambda,
        (Preset::Stratum(s), "s_rw") => &mut s.bc.s_rw,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_presets() {
        let c = RunConfig::parse("[run]\nbenchmark = terzaghi\n").unwrap();
        assert_eq!(c, RunConfig::preset(Benchmark::Terzaghi));
        assert_eq!(c.schedule.epochs, 5000);
        assert_eq!(c.schedule.batch, 500);
        assert_eq!(c.initial, 2.0);
    }

    #[test]
    fn dump_round_trips() {
        for b in Benchmark::ALL {
            let mut c = RunConfig::preset(b);
            c.seed = 17;
            c.noise = 0.013;
            c.schedule.lr = 3.3e-4;
            let again = RunConfig::parse(&c.dump()).unwrap();
            assert_eq!(again, c, "{b}");
        }
    }

    #[test]
    fn overrides_apply() {
        let text = "# comment\n[run]\nbenchmark = stratum\nseed = 9\n[material]\nk = 1e-14\ne = 30e6\n[preset]\npc_top = 5e5\n[schedule]\nepochs = 10\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.preset.mat().k, 1e-14);
        assert_eq!(c.preset.mat().k_dr, MaterialRecord::bulk_from_young(30e6, 0.2857));
        let Preset::Stratum(s) = c.preset else { panic!() };
        assert_eq!(s.pc_top, 5e5);
        assert_eq!(c.schedule.epochs, 10);
    }

    #[test]
    fn unknown_keys_are_named() {
        for (text, needle) in [
            ("[run]\nbenchmark = terzaghi\n[schedule]\nepoch = 3\n", "schedule.epoch"),
            ("[run]\nbenchmark = terzaghi\n[preset]\nwell_x = 3\n", "preset.well_x"),
            ("[run]\nbenchmark = terzaghi\n[nope]\nx = 1\n", "nope.x"),
            ("[run]\nbenchmark = terzaghi\n[schedule]\nbatch = many\n", "schedule.batch"),
        ] {
            let e = RunConfig::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{e}");
        }
        assert!(RunConfig::parse("[run]\nseed = 1\n").is_err());
        assert!(RunConfig::parse("benchmark = terzaghi\n").is_err());
        assert!(RunConfig::parse("[run]\nbenchmark = terzaghi\nseed = 1\nseed = 2\n").is_err());
    }
}
