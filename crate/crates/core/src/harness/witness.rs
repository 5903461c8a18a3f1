//! Local identifiability check: with networks fit to the reference fields,
//! the true coefficients should give a lower total loss than nearby ones.

use super::config::RunConfig;
use super::run::{build_problem, oracle_table, targets, Oracle};
use crate::oracle::sample_sensors;
use crate::physics::{CoeffKind, FieldDerivs};
use crate::train::{FieldFn, FitSchedule, Model};
use crate::Error;

/// One field of a solved oracle. Points the oracle cannot evaluate give NaN,
/// which the loss then reports. The finite-difference oracle starts from a
/// discrete step at the heated boundary, so at t = 0 only its values are
/// given and its derivatives are NaN.
pub struct OracleField<'a> {
    pub oracle: &'a Oracle,
    pub index: usize,
    pub dim: usize,
}

impl FieldFn for OracleField<'_> {
    fn derivs(&self, x: &[f64]) -> FieldDerivs<f64> {
        match self.oracle.derivs(x) {
            Ok(mut d) => {
                let mut f = d.swap_remove(self.index);
                if matches!(self.oracle, Oracle::Stratum(_)) && x[self.dim] <= 0.0 {
                    let n = f64::NAN;
                    f = FieldDerivs {
                        v: f.v,
                        t: n,
                        grad: vec![n; self.dim],
                        hess: vec![n; self.dim * self.dim],
                        grad_t: vec![n; self.dim],
                    };
                }
                f
            }
            Err(_) => FieldDerivs::constant(f64::NAN, self.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kind: CoeffKind,
    pub factor: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identifiability {
    /// fit misfit per field
    pub misfit: Vec<f64>,
    pub base: f64,
    pub perturbed: Vec<Perturbation>,
}

impl Identifiability {
    pub fn passed(&self) -> bool {
        self.perturbed.iter().all(|p| p.loss > self.base)
    }
}

/// Total loss over every stage at coefficients `c`.
pub fn total_loss(model: &Model, c: [f64; 3]) -> Result<f64, Error> {
    let src = model.sources();
    let mut s = 0.0;
    for si in 0..model.problem.stages.len() {
        s += model.stage_loss_with(si, &src, c, None)?.total;
    }
    Ok(s)
}

/// Fits the networks of `cfg` to its oracle on noise-free sensors, then
/// compares the total loss at the true coefficients with each trainable
/// coefficient scaled by `factors`.
pub fn identifiability(cfg: &RunConfig, fit: &FitSchedule, factors: &[f64]) -> Result<Identifiability, Error> {
    let oracle = Oracle::solve(cfg)?;
    let table = oracle_table(cfg, &oracle)?;
    let sensors = sample_sensors(&table, 0.0, cfg.seed)?;
    let mut model = Model::new(build_problem(cfg, &sensors)?, 1.0)?;
    let dim = model.problem.dim;
    let fields: Vec<OracleField> = (0..model.nets.len())
        .map(|index| OracleField {
            oracle: &oracle,
            index,
            dim,
        })
        .collect();
    let truth: Vec<&dyn FieldFn> = fields.iter().map(|f| f as &dyn FieldFn).collect();
    let misfit = model.fit_to(&truth, fit)?;
    let c0 = targets(cfg);
    let base = total_loss(&model, c0)?;
    let mut perturbed = Vec::new();
    for &kind in &model.problem.coeff_kinds {
        let i = CoeffKind::ALL.iter().position(|k| *k == kind).expect("known kind");
        for &factor in factors {
            let mut c = c0;
            c[i] *= factor;
            perturbed.push(Perturbation {
                kind,
                factor,
                loss: total_loss(&model, c)?,
            });
        }
    }
    Ok(Identifiability { misfit, base, perturbed })
}
