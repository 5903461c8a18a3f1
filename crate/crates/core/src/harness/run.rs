//! Oracle, inversion and report workflows and their files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, Preset, RunConfig};
use crate::oracle::{
    barry_mercer_table, read_sensors_csv, sample_sensors, terzaghi_table, thm_forward_fd, write_sensors_csv,
    BarryMercerSeries, FieldTable, SensorSeries, StratumSolution, TerzaghiSeries,
};
use crate::physics::presets::Benchmark;
use crate::physics::residuals::bm_source;
use crate::physics::{CoeffKind, Coeffs, FieldDerivs, Physics, ScaledRetention};
use crate::train::{write_trajectory, EpochRecord, InversionResult, Model, Problem, Trainer};
use crate::{fmt17, Error};

pub const FIELDS_CSV: &str = "fields.csv";
pub const SENSORS_CSV: &str = "sensors.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const PRED_CSV: &str = "fields_pred.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const ERRORS_CSV: &str = "field_errors.csv";
pub const RUN_TXT: &str = "run.txt";
pub const CONFIG_TXT: &str = "config.txt";

/// A solved reference problem.
#[derive(Debug, Clone)]
pub enum Oracle {
    Terzaghi(TerzaghiSeries),
    BarryMercer(Box<BarryMercerSeries>),
    Stratum(Box<StratumSolution>),
}

impl Oracle {
    pub fn solve(cfg: &RunConfig) -> Result<Self, Error> {
        Ok(match &cfg.preset {
            Preset::Terzaghi(p) => Oracle::Terzaghi(TerzaghiSeries::new(p, cfg.oracle.terms)?),
            Preset::BarryMercer(p) => Oracle::BarryMercer(Box::new(BarryMercerSeries::new(p, cfg.oracle.terms)?)),
            Preset::Stratum(p) => Oracle::Stratum(Box::new(thm_forward_fd(p, &cfg.oracle.fd)?)),
        })
    }

    /// Field derivatives at `(x…, t)` in the field order of the benchmark's
    /// problem.
    pub fn derivs(&self, x: &[f64]) -> Result<Vec<FieldDerivs<f64>>, Error> {
        Ok(match self {
            Oracle::Terzaghi(s) => {
                let (p, u) = s.derivs(x[0], x[1]);
                vec![p, u]
            }
            Oracle::BarryMercer(s) => s.derivs(x[0], x[1], x[2]).to_vec(),
            Oracle::Stratum(s) => {
                let [u, pc, t] = s.derivs(x[0], x[1])?;
                vec![t, pc, u]
            }
        })
    }
}

/// Field table of the reference solution.
pub fn oracle_table(cfg: &RunConfig, oracle: &Oracle) -> Result<FieldTable, Error> {
    let o = &cfg.oracle;
    match (&cfg.preset, oracle) {
        (Preset::Terzaghi(p), _) => terzaghi_table(p, o.n_space, o.n_t, o.terms),
        (Preset::BarryMercer(p), _) => barry_mercer_table(p, o.n_space, o.n_t, o.terms),
        (Preset::Stratum(_), Oracle::Stratum(s)) => s.to_table(o.n_t),
        _ => Err(Error::Config("oracle does not match the benchmark".into())),
    }
}

/// Largest balance-equation residual of the reference fields at random
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCheck {
    pub equation: String,
    pub max: f64,
    pub tol: f64,
}

impl ResidualCheck {
    pub fn passed(&self) -> bool {
        self.max < self.tol
    }
}

pub fn oracle_checks(cfg: &RunConfig, oracle: &Oracle, points: usize, seed: u64) -> Result<Vec<ResidualCheck>, Error> {
    let ph = Physics::new(cfg.preset.scales(), cfg.preset.mat())?;
    let c = Coeffs::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (names, tol, t0): (&[&str], f64, f64) = match cfg.benchmark() {
        Benchmark::Terzaghi => (&["flow", "mechanics"], 1e-3, 0.01),
        Benchmark::BarryMercer => (&["flow", "mechanics-x", "mechanics-y"], 1e-2, 0.0),
        Benchmark::Stratum => (&["mechanics", "flow", "heat"], 5e-2, 0.1),
    };
    let mut worst = vec![0.0f64; names.len()];
    for _ in 0..points {
        let mut x: Vec<f64> = (0..cfg.benchmark().dim()).map(|_| rng.gen_range(0.0..1.0)).collect();
        x.push(rng.gen_range(t0..1.0));
        let f = oracle.derivs(&x)?;
        let r: Vec<f64> = match &cfg.preset {
            Preset::Terzaghi(_) => {
                let (a, b) = ph.terzaghi_residuals(&f[0], &f[1], &c);
                vec![a, b]
            }
            Preset::BarryMercer(p) => {
                let sv = ph.bm_sigma_v_rate(&f[1], &f[2], &f[0].t, &c);
                let src = bm_source(p, x[0], x[1], 2.0 * std::f64::consts::PI * x[2]);
                let (a, b, d) = ph.bm_residuals(&f[0], &f[1], &f[2], &sv, &src, &c);
                vec![a, b, d]
            }
            Preset::Stratum(p) => {
                let ret = ScaledRetention {
                    bc: p.bc,
                    p_scale: p.scales.p,
                };
                let sv = ph.thm_sigma_v_rate(&ret, &f[2], &f[1], &f[0], &c);
                let (a, b, d) = ph.thm_residuals(&ret, &f[2], &f[1], &f[0], &sv, &c);
                vec![a, b, d]
            }
        };
        for (w, v) in worst.iter_mut().zip(r) {
            *w = w.max(v.abs());
        }
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, max)| ResidualCheck {
            equation: n.to_string(),
            max,
            tol,
        })
        .collect())
}

fn axis_names(b: Benchmark) -> &'static [&'static str] {
    match b {
        Benchmark::BarryMercer => &["x", "y"],
        _ => &["y"],
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub table: FieldTable,
    pub sensors: Vec<SensorSeries>,
    pub checks: Vec<ResidualCheck>,
}

/// Solves the reference problem and writes `fields.csv`, `sensors.csv` and
/// the effective config to `cfg.out`.
pub fn run_oracle(cfg: &RunConfig) -> Result<OracleOutput, Error> {
    let oracle = Oracle::solve(cfg)?;
    let table = oracle_table(cfg, &oracle)?;
    let sensors = sample_sensors(&table, cfg.noise, cfg.seed)?;
    let checks = oracle_checks(cfg, &oracle, 200, cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, FIELDS_CSV)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&cfg.out, SENSORS_CSV)?;
    write_sensors_csv(&mut w, axis_names(cfg.benchmark()), &sensors)?;
    w.flush()?;
    // read back what was written so a schema slip fails here
    FieldTable::read_csv(File::open(cfg.out.join(FIELDS_CSV))?)?;
    read_sensors_csv(File::open(cfg.out.join(SENSORS_CSV))?)?;
    fs::write(cfg.out.join(CONFIG_TXT), cfg.dump())?;
    Ok(OracleOutput { table, sensors, checks })
}

pub fn build_problem(cfg: &RunConfig, sensors: &[SensorSeries]) -> Result<Problem, Error> {
    match &cfg.preset {
        Preset::Terzaghi(p) => Problem::terzaghi(p, &cfg.network, sensors),
        Preset::BarryMercer(p) => Problem::barry_mercer(p, &cfg.network, sensors),
        Preset::Stratum(p) => Problem::stratum(p, &cfg.network, sensors),
    }
}

/// Dimensionless value each coefficient should reach: the material value over
/// its scale.
pub fn targets(cfg: &RunConfig) -> [f64; 3] {
    let m = cfg.preset.mat();
    let s = cfg.preset.scales();
    [m.k / s.k, m.k_dr / s.k_dr, m.lambda_avg / s.lambda]
}

/// Relative L2 error of each model field against the table over all of its
/// points.
pub fn field_errors(model: &Model, table: &FieldTable) -> Result<Vec<(String, f64)>, Error> {
    let pred = model.predict_table(table.axes.clone(), table.times.clone());
    let mut out = Vec::new();
    for (fi, f) in pred.fields.iter().enumerate() {
        let ti = table.field_index(f)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in pred.values[fi].iter().zip(&table.values[ti]) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        out.push((f.clone(), (num / den.max(f64::MIN_POSITIVE)).sqrt()));
    }
    Ok(out)
}

#[derive(Debug)]
pub struct InvertOutput {
    pub model: Model,
    pub result: InversionResult,
    pub field_errors: Option<Vec<(String, f64)>>,
    pub seconds: f64,
}

/// Inversion against `sensors.csv` in `cfg.out` (generated first when
/// `generate` is set). Writes the trajectory, predicted fields and summary.
/// In forward mode the coefficients stay at their targets and the sensors
/// only set the output scales.
pub fn run_invert(cfg: &RunConfig, generate: bool) -> Result<InvertOutput, Error> {
    let sensors_path = cfg.out.join(SENSORS_CSV);
    let (sensors, table) = if generate {
        let o = run_oracle(cfg)?;
        (o.sensors, Some(o.table))
    } else {
        if !sensors_path.exists() {
            return Err(Error::Missing(vec![format!(
                "{} (run `oracle` first or pass --generate)",
                sensors_path.display()
            )]));
        }
        let (_, s) = read_sensors_csv(File::open(&sensors_path)?)?;
        let fields = cfg.out.join(FIELDS_CSV);
        let table = if fields.exists() {
            Some(FieldTable::read_csv(File::open(fields)?)?)
        } else {
            None
        };
        (s, table)
    };
    let mut model = Model::new(build_problem(cfg, &sensors)?, cfg.initial)?;
    if cfg.mode == Mode::Forward {
        model = model.into_forward();
    }
    let mut trainer = Trainer::new(model, cfg.schedule.clone(), cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(CONFIG_TXT), cfg.dump())?;
    let start = Instant::now();
    let result = match trainer.run() {
        Ok(r) => r,
        Err(e) => {
            // keep what was trained so far for diagnosis
            let mut w = create(&cfg.out, TRAJECTORY_CSV)?;
            write_trajectory(&mut w, &trainer.model, trainer.records())?;
            w.flush()?;
            return Err(e);
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let model = trainer.model;

    let mut w = create(&cfg.out, TRAJECTORY_CSV)?;
    write_trajectory(&mut w, &model, &result.records)?;
    w.flush()?;
    let g = &model.problem.grid;
    let axes = axis_names(cfg.benchmark())
        .iter()
        .zip(&g.axes)
        .map(|(n, a)| crate::oracle::Axis::new(n, a.clone()))
        .collect();
    let mut w = create(&cfg.out, PRED_CSV)?;
    model.predict_table(axes, g.times.clone()).write_csv(&mut w)?;
    w.flush()?;
    let field_errors = table.as_ref().map(|t| field_errors(&model, t)).transpose()?;
    if let Some(errs) = &field_errors {
        let mut s = String::from("field,rel_l2\n");
        for (f, e) in errs {
            let _ = writeln!(s, "{f},{}", fmt17(*e));
        }
        fs::write(cfg.out.join(ERRORS_CSV), s)?;
    }
    fs::write(cfg.out.join(SUMMARY_CSV), summary_csv(cfg, &model))?;
    fs::write(cfg.out.join(RUN_TXT), run_txt(cfg, &model, &result, seconds)?)?;
    Ok(InvertOutput {
        model,
        result,
        field_errors,
        seconds,
    })
}

fn summary_csv(cfg: &RunConfig, model: &Model) -> String {
    let tg = targets(cfg);
    let s = cfg.preset.scales();
    let mut out = String::from("coefficient,value,target,rel_error,dimensional,unit\n");
    for &k in &model.coeffs.kinds {
        let v = model.coeffs.get(k);
        let t = tg[k as usize];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            k.name(),
            fmt17(v),
            fmt17(t),
            fmt17((v - t) / t),
            fmt17(v * k.scale(s)),
            k.unit()
        );
    }
    out
}

fn run_txt(cfg: &RunConfig, model: &Model, result: &InversionResult, seconds: f64) -> Result<String, Error> {
    let mut s = String::new();
    let _ = writeln!(s, "benchmark: {}", cfg.benchmark());
    let _ = writeln!(s, "mode: {}", cfg.mode.id());
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "sequential iterations: {}", result.iterations);
    let _ = writeln!(s, "epochs: {}", result.records.len());
    let _ = writeln!(s, "wall-clock seconds: {seconds:.1}");
    for (si, st) in model.problem.stages.iter().enumerate() {
        let l = model.stage_loss(si, None)?;
        for t in &l.terms {
            let _ = writeln!(s, "final loss {}:{}: {}", st.stage, t.name, fmt17(t.value));
        }
    }
    Ok(s)
}

/// Human-readable summary of a result directory.
pub fn run_report(dir: &Path) -> Result<String, Error> {
    let missing: Vec<String> = [TRAJECTORY_CSV, SUMMARY_CSV, RUN_TXT]
        .iter()
        .filter(|f| !dir.join(f).exists())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Missing(missing));
    }
    let run = fs::read_to_string(dir.join(RUN_TXT))?;
    let mut out = String::new();
    for line in run.lines().filter(|l| !l.starts_with("final loss")) {
        let _ = writeln!(out, "{line}");
    }

    let _ = writeln!(out, "\n{:<8} {:>14} {:>10} {:>11} {:>14} unit", "coeff", "value", "target", "rel.error", "dimensional");
    let mut rd = csv::Reader::from_path(dir.join(SUMMARY_CSV)).map_err(|e| Error::Format(format!("{SUMMARY_CSV}: {e}")))?;
    for rec in rd.records() {
        let r = rec.map_err(|e| Error::Format(format!("{SUMMARY_CSV}: {e}")))?;
        if r.len() != 6 {
            return Err(Error::Format(format!("{SUMMARY_CSV}: expected 6 columns")));
        }
        let n = |i: usize| -> Result<f64, Error> {
            r[i].parse().map_err(|_| Error::Format(format!("{SUMMARY_CSV}: bad number '{}'", &r[i])))
        };
        let _ = writeln!(
            out,
            "{:<8} {:>14.6} {:>10.4} {:>10.2}% {:>14.6e} {}",
            &r[0],
            n(1)?,
            n(2)?,
            100.0 * n(3)?,
            n(4)?,
            &r[5]
        );
    }

    // last epoch of each stage from the trajectory
    let mut rd = csv::Reader::from_path(dir.join(TRAJECTORY_CSV)).map_err(|e| Error::Format(format!("{TRAJECTORY_CSV}: {e}")))?;
    let head: Vec<String> = rd
        .headers()
        .map_err(|e| Error::Format(format!("{TRAJECTORY_CSV}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut last: Vec<(String, csv::StringRecord)> = Vec::new();
    for rec in rd.records() {
        let r = rec.map_err(|e| Error::Format(format!("{TRAJECTORY_CSV}: {e}")))?;
        let st = r.get(2).unwrap_or("").to_string();
        match last.iter_mut().find(|(s, _)| *s == st) {
            Some(e) => e.1 = r,
            None => last.push((st, r)),
        }
    }
    let _ = writeln!(out, "\n{:<6} {:<12} {:>14} {:>10}", "stage", "term", "loss", "weight");
    for (st, r) in &last {
        let prefix = format!("{st}:");
        for (i, h) in head.iter().enumerate() {
            let Some(term) = h.strip_prefix(&prefix) else { continue };
            let w = head
                .iter()
                .position(|x| *x == format!("w:{h}"))
                .and_then(|j| r.get(j))
                .unwrap_or("");
            let num = |s: &str| s.parse::<f64>().map(|v| format!("{v:.4e}")).unwrap_or_default();
            let _ = writeln!(out, "{:<6} {:<12} {:>14} {:>10}", st, term, num(r.get(i).unwrap_or("")), num(w));
        }
    }
    if dir.join(ERRORS_CSV).exists() {
        let _ = writeln!(out, "\nrelative L2 field errors against the reference:");
        for line in fs::read_to_string(dir.join(ERRORS_CSV))?.lines().skip(1) {
            if let Some((f, e)) = line.split_once(',') {
                let e: f64 = e.parse().map_err(|_| Error::Format(format!("{ERRORS_CSV}: bad number '{e}'")))?;
                let _ = writeln!(out, "  {f:<4} {:.3}%", 100.0 * e);
            }
        }
    }
    Ok(out)
}

/// Relative coefficient errors of a record against the targets, for the
/// trained kinds.
pub fn coeff_errors(cfg: &RunConfig, kinds: &[CoeffKind], rec: &EpochRecord) -> Vec<(CoeffKind, f64)> {
    let t = targets(cfg);
    kinds
        .iter()
        .map(|&k| (k, (rec.coeffs[k as usize] - t[k as usize]) / t[k as usize]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::RunConfig;

    fn quick(b: Benchmark, dir: &Path) -> RunConfig {
        let mut c = RunConfig::preset(b);
        c.out = dir.to_path_buf();
        c.network.width = 6;
        c.network.depth = 2;
        c.network.n_space = 6;
        c.network.n_t = 5;
        c.network.refine = None;
        c.schedule.epochs = 3;
        c.schedule.iterations = 1;
        c.schedule.batch = 20;
        c.oracle.n_space = 6;
        c.oracle.n_t = 5;
        c.oracle.terms = 20;
        c.oracle.fd.nodes = 21;
        c.oracle.fd.steps = 40;
        c
    }

    #[test]
    fn invert_needs_sensors() {
        let d = tempfile::tempdir().unwrap();
        let e = run_invert(&quick(Benchmark::Terzaghi, d.path()), false).unwrap_err();
        assert!(matches!(e, Error::Missing(_)));
        assert!(e.to_string().contains("oracle"));
    }

    #[test]
    fn report_names_missing_files() {
        let d = tempfile::tempdir().unwrap();
        let e = run_report(d.path()).unwrap_err();
        assert!(e.to_string().contains("trajectory.csv"));
    }

    #[test]
    fn terzaghi_round_trip_writes_every_file() {
        let d = tempfile::tempdir().unwrap();
        let cfg = quick(Benchmark::Terzaghi, d.path());
        let o = run_oracle(&cfg).unwrap();
        assert_eq!(o.sensors.len(), 2);
        assert!(o.checks.iter().all(ResidualCheck::passed), "{:?}", o.checks);
        let r = run_invert(&cfg, false).unwrap();
        assert_eq!(r.result.records.len(), 2 * 3);
        for f in [FIELDS_CSV, SENSORS_CSV, TRAJECTORY_CSV, PRED_CSV, SUMMARY_CSV, ERRORS_CSV, RUN_TXT, CONFIG_TXT] {
            assert!(d.path().join(f).exists(), "{f}");
        }
        let rep = run_report(d.path()).unwrap();
        assert!(rep.contains("sequential iterations: 1"), "{rep}");
        assert_eq!(rep, run_report(d.path()).unwrap());
        let summary = fs::read_to_string(d.path().join(SUMMARY_CSV)).unwrap();
        assert!(summary.lines().nth(1).unwrap().starts_with("k,"));
        FieldTable::read_csv(File::open(d.path().join(PRED_CSV)).unwrap()).unwrap();
    }
}
