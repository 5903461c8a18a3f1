//! Regression of field networks onto known fields, matching values and
//! derivatives together. Used to start from networks that already represent
//! a reference solution.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::collocation::concat;
use super::fields::{function_comps, network_comps, DirPlan, FieldFn, Need};
use super::model::Model;
use crate::nn::Network;
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSchedule {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// at most this many points per field, drawn from the loss terms
    pub points: usize,
    pub seed: u64,
}

impl Default for FitSchedule {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch: 512,
            lr: 3e-3,
            points: 4000,
            seed: 0,
        }
    }
}

/// Per-component weights: each component row counts relative to its own
/// mean square, so derivatives of very different size all matter.
fn row_weights(plan: &DirPlan, target: ArrayView2<'_, f64>) -> Vec<f64> {
    let ms: Vec<f64> = target
        .outer_iter()
        .map(|r| {
            let known: Vec<f64> = r.iter().filter(|v| v.is_finite()).map(|v| v * v).collect();
            known.iter().sum::<f64>() / known.len().max(1) as f64
        })
        .collect();
    let top = ms.iter().cloned().fold(0.0, f64::max);
    let mut w = vec![0.0; target.nrows()];
    for (c, _) in &plan.map {
        w[*c] = 1.0 / (ms[*c] + 1e-8 * top + f64::MIN_POSITIVE);
    }
    w
}

fn misfit(c: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>, w: &[f64]) -> f64 {
    let n = c.ncols() as f64;
    let mut s = 0.0;
    for ((cr, tr), wr) in c.outer_iter().zip(t.outer_iter()).zip(w) {
        if *wr == 0.0 {
            continue;
        }
        s += wr * cr.iter().zip(tr).filter(|(_, b)| b.is_finite()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    s / n
}

/// Fits `offset + scale·N` to the component rows of `target` at the columns
/// of `x`. Non-finite target entries are left out. Returns the weighted
/// misfit over all points.
#[allow(clippy::too_many_arguments)]
pub fn fit_network(
    net: &Network,
    params: &mut [f64],
    scale: f64,
    offset: f64,
    x: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    need: Need,
    sched: &FitSchedule,
) -> Result<f64, Error> {
    let n = x.ncols();
    if n == 0 || target.ncols() != n {
        return Err(Error::Config(format!("fit needs matching points, got {n} and {}", target.ncols())));
    }
    let plan = DirPlan::new(x.nrows() - 1, need);
    let w = row_weights(&plan, target);
    let mut adam = AdamState::new(params.len(), sched.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let b = sched.batch.clamp(1, n);
    let mut pos = n;
    let mut grad = vec![0.0; params.len()];
    for epoch in 0..sched.epochs {
        // step the rate down over the last half
        adam.lr = match 4 * epoch / sched.epochs.max(1) {
            0 | 1 => sched.lr,
            2 => sched.lr * 0.3,
            _ => sched.lr * 0.1,
        };
        if pos + b > n {
            order.shuffle(&mut rng);
            pos = 0;
        }
        let sel = &order[pos..pos + b];
        pos += b;
        let xb = x.select(Axis(1), sel);
        let tb = target.select(Axis(1), sel);
        let (jb, cache) = net.forward_batch(params, xb.view(), &plan.dirs);
        let c = plan.comps(&jb, scale, offset);
        let mut adj = &c - &tb;
        for (mut r, wr) in adj.outer_iter_mut().zip(&w) {
            r.mapv_inplace(|v| if v.is_finite() { 2.0 * wr * v / b as f64 } else { 0.0 });
        }
        let ch = plan.channel_adjoint(adj.view(), jb.channels(), scale);
        grad.iter_mut().for_each(|g| *g = 0.0);
        net.backward_batch(params, &cache, ch.view(), &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                stage: '-',
                term: "fit".into(),
                epoch,
            });
        }
        adam.update(params, &grad);
    }
    let c = network_comps(net, params, x, need, scale, offset);
    Ok(misfit(c.view(), target, &w))
}

/// Smallest need covering both.
fn join(a: Need, b: Need) -> Need {
    match (a.min(b), a.max(b)) {
        (Need::Grad, Need::Space) => Need::Hess,
        (_, m) => m,
    }
}

impl Model {
    /// Fits every network to the matching entry of `truth` on points drawn
    /// from the terms that read the field, matching the derivatives those
    /// terms read. Non-finite reference entries are skipped. Returns the
    /// misfit per field.
    pub fn fit_to(&mut self, truth: &[&dyn FieldFn], sched: &FitSchedule) -> Result<Vec<f64>, Error> {
        if truth.len() != self.nets.len() {
            return Err(Error::Config(format!("{} fields but {} references", self.nets.len(), truth.len())));
        }
        let mut out = Vec::new();
        for f in 0..self.nets.len() {
            let sets: Vec<Array2<f64>> = self
                .problem
                .stages
                .iter()
                .flat_map(|s| &s.terms)
                .filter(|t| t.uses.iter().any(|u| u.field == f))
                .map(|t| t.points.clone())
                .collect();
            let need = self
                .problem
                .stages
                .iter()
                .flat_map(|s| &s.terms)
                .flat_map(|t| &t.uses)
                .filter(|u| u.field == f)
                .fold(Need::Value, |a, u| join(a, u.need));
            let all = concat(&sets);
            let mut idx: Vec<usize> = (0..all.ncols()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(sched.seed ^ (f as u64 + 1));
            idx.shuffle(&mut rng);
            idx.truncate(sched.points);
            idx.sort_unstable();
            let x = all.select(Axis(1), &idx);
            let target = function_comps(truth[f], x.view());
            let spec = &self.problem.fields[f];
            let m = fit_network(
                &self.nets[f],
                &mut self.params[f].values,
                spec.scale,
                spec.offset,
                x.view(),
                target.view(),
                need,
                &FitSchedule {
                    seed: sched.seed + f as u64,
                    ..sched.clone()
                },
            )?;
            log::info!("fit {}: misfit {m:.3e}", spec.name);
            out.push(m);
        }
        Ok(out)
    }
}
