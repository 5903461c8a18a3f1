//! Sequential (staggered) training: each stage trains its own networks and
//! the coefficients against its own loss while every other network is held
//! fixed. Stages run in order T, F, S and the cycle repeats.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::gradnorm::GradNormState;
use super::loss::{eval_term, frozen_comps, FieldSource, TermEval, TermInputs};
use super::model::{coeff_array, Model};
use super::problem::Stage;
use crate::nn::ParameterVector;
use crate::physics::CoeffKind;
use crate::{fmt17, Error};

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialSchedule {
    /// epochs per stage run
    pub epochs: usize,
    pub batch: usize,
    /// maximum number of T→F→S cycles
    pub iterations: usize,
    /// stop once no coefficient moves by more than this relative amount in
    /// a cycle; 0 runs every cycle
    pub tol: f64,
    pub lr: f64,
    /// learning-rate factor applied per cycle
    pub lr_decay: f64,
    pub gradnorm_every: usize,
    pub alpha: f64,
}

impl Default for SequentialSchedule {
    fn default() -> Self {
        Self {
            epochs: 5000,
            batch: 500,
            iterations: 5,
            tol: 0.0,
            lr: 1e-3,
            lr_decay: 0.5,
            gradnorm_every: 100,
            alpha: 0.5,
        }
    }
}

impl SequentialSchedule {
    pub fn validate(&self, collocation: usize) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.iterations == 0 || self.gradnorm_every == 0 {
            return bad("epochs, iterations and the balancing interval must be at least 1".into());
        }
        if self.batch == 0 || self.batch > collocation {
            return bad(format!("batch size {} must be between 1 and the collocation count {collocation}", self.batch));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("invalid learning rate {} or decay {}", self.lr, self.lr_decay));
        }
        if !(self.alpha >= 0.0) || !(self.tol >= 0.0) {
            return bad("alpha and tolerance must be non-negative".into());
        }
        Ok(())
    }
}

/// One epoch of one stage: batch losses, the weights they were combined
/// with, and `k, K_dr, λ` after the update.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub iteration: usize,
    pub stage: Stage,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub total: f64,
    pub coeffs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub records: Vec<EpochRecord>,
    pub iterations: usize,
    /// largest relative coefficient change of each cycle
    pub drift: Vec<f64>,
}

impl InversionResult {
    pub fn final_coeffs(&self) -> Option<[f64; 3]> {
        self.records.last().map(|r| r.coeffs)
    }
}

struct Cursor {
    perm: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Cursor {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Self { perm, pos: 0, rng }
    }

    /// Next batch of a reshuffled cyclic partition, or `None` when the whole
    /// set fits in one batch.
    fn next(&mut self, batch: usize) -> Option<Vec<usize>> {
        if self.perm.len() <= batch {
            return None;
        }
        if self.pos + batch > self.perm.len() {
            self.perm.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let b = self.perm[self.pos..self.pos + batch].to_vec();
        self.pos += batch;
        Some(b)
    }
}

struct StageState {
    nets: Vec<AdamState>,
    coeffs: AdamState,
    gradnorm: GradNormState,
    cursors: Vec<Cursor>,
}

pub struct Trainer {
    pub model: Model,
    pub schedule: SequentialSchedule,
    states: Vec<StageState>,
    records: Vec<EpochRecord>,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: Model, schedule: SequentialSchedule, seed: u64) -> Result<Self, Error> {
        schedule.validate(model.problem.grid.len())?;
        let states = model
            .problem
            .stages
            .iter()
            .map(|st| StageState {
                nets: st
                    .trainable
                    .iter()
                    .map(|&f| AdamState::new(model.params[f].len(), schedule.lr))
                    .collect(),
                coeffs: AdamState::new(model.coeffs.kinds.len(), schedule.lr),
                gradnorm: GradNormState::new(st.terms.len(), schedule.alpha),
                cursors: st
                    .terms
                    .iter()
                    .enumerate()
                    // keyed by the physics, not the stage position, so skipped
                    // stages leave the sampling of the others alone
                    .map(|(ti, t)| Cursor::new(t.len(), seed ^ ((st.stage as u64) << 32 | ti as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
                    .collect(),
            })
            .collect();
        Ok(Self {
            model,
            schedule,
            states,
            records: Vec::new(),
            epoch: 0,
        })
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn gradnorm_weights(&self, si: usize) -> &[f64] {
        &self.states[si].gradnorm.weights
    }

    /// One run of stage `si` for `schedule.epochs` epochs.
    pub fn run_stage(&mut self, iteration: usize, si: usize) -> Result<(), Error> {
        let st = &self.model.problem.stages[si];
        if st.terms.is_empty() {
            return Ok(());
        }
        let stage = st.stage;
        let nf = self.model.problem.fields.len();
        let mut live = vec![false; nf];
        for &f in &st.trainable {
            live[f] = true;
        }
        let snapshot: Vec<ParameterVector> = self.model.params.clone();
        let snap_src: Vec<FieldSource<'_>> = self
            .model
            .nets
            .iter()
            .zip(&snapshot)
            .zip(&self.model.problem.fields)
            .map(|((net, p), f)| FieldSource::Net {
                net,
                params: &p.values,
                scale: f.scale,
                offset: f.offset,
            })
            .collect();
        let frozen: Vec<_> = {
            let cur = self.model.sources();
            let inp = TermInputs {
                current: &cur,
                snapshot: &snap_src,
                live: &live,
                coeffs: self.model.coeff_values(),
                grad: true,
            };
            st.terms.iter().map(|t| frozen_comps(t, &inp)).collect()
        };

        let lr = self.schedule.lr * self.schedule.lr_decay.powi(iteration as i32);
        let state = &mut self.states[si];
        for a in state.nets.iter_mut() {
            a.lr = lr;
        }
        state.coeffs.lr = lr;
        let kinds = self.model.coeffs.kinds.clone();
        let layouts: Vec<_> = st.trainable.iter().map(|&f| self.model.params[f].layout.last_hidden()).collect();
        let mut start_total = None;
        log::info!("iteration {iteration} stage {stage}: {} terms, lr {lr:e}", st.terms.len());

        for e in 0..self.schedule.epochs {
            let evals: Vec<TermEval> = {
                let cur = self.model.sources();
                let inp = TermInputs {
                    current: &cur,
                    snapshot: &snap_src,
                    live: &live,
                    coeffs: coeff_array(&self.model.coeffs),
                    grad: true,
                };
                st.terms
                    .iter()
                    .zip(&self.model.compiled[si])
                    .zip(state.cursors.iter_mut())
                    .zip(&frozen)
                    .map(|(((t, ct), cur), fz)| {
                        let idx = cur.next(self.schedule.batch);
                        eval_term(ct, t, &inp, Some(fz), idx.as_deref())
                    })
                    .collect::<Result<_, _>>()?
            };
            let losses: Vec<f64> = evals.iter().map(|e| e.loss).collect();
            for (t, ev) in st.terms.iter().zip(&evals) {
                let finite = ev.loss.is_finite()
                    && ev.coeff_grad.iter().all(|g| g.is_finite())
                    && ev.grads.iter().flatten().all(|g| g.iter().all(|x| x.is_finite()));
                if !finite {
                    return Err(Error::NonFinite {
                        stage: stage.letter(),
                        term: t.name.clone(),
                        epoch: self.epoch,
                    });
                }
            }
            if e == 0 {
                state.gradnorm.start(&losses);
            }
            let weights = state.gradnorm.weights.clone();
            let total: f64 = losses.iter().zip(&weights).map(|(l, w)| l * w).sum();
            let start = *start_total.get_or_insert(total);
            if total > 1e3 * start {
                return Err(Error::Divergence {
                    stage: stage.letter(),
                    iteration,
                    epoch: self.epoch,
                    loss: total,
                    start,
                });
            }

            if (e + 1) % self.schedule.gradnorm_every == 0 {
                let norms: Vec<f64> = evals
                    .iter()
                    .map(|ev| {
                        st.trainable
                            .iter()
                            .zip(&layouts)
                            .filter_map(|(&f, r)| ev.grads[f].as_ref().map(|g| g[r.clone()].iter().map(|x| x * x).sum::<f64>()))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                state.gradnorm.update(&losses, &norms);
            }

            for (k, &f) in st.trainable.iter().enumerate() {
                let mut g = vec![0.0; self.model.params[f].len()];
                for (ev, w) in evals.iter().zip(&weights) {
                    if let Some(gi) = &ev.grads[f] {
                        for (a, b) in g.iter_mut().zip(gi) {
                            *a += w * b;
                        }
                    }
                }
                state.nets[k].update(&mut self.model.params[f].values, &g);
            }
            if !kinds.is_empty() {
                let values = coeff_array(&self.model.coeffs);
                let g: Vec<f64> = kinds
                    .iter()
                    .map(|&kind| {
                        let j = kind as usize;
                        evals.iter().zip(&weights).map(|(ev, w)| w * ev.coeff_grad[j]).sum::<f64>() * values[j]
                    })
                    .collect();
                state.coeffs.update(&mut self.model.coeffs.log, &g);
            }

            let rec = EpochRecord {
                epoch: self.epoch,
                iteration,
                stage,
                losses,
                weights,
                total,
                coeffs: coeff_array(&self.model.coeffs),
            };
            if e % 500 == 0 || e + 1 == self.schedule.epochs {
                log::info!(
                    "epoch {} [{stage}] loss {:.4e} k {:.4} K_dr {:.4} lambda {:.4}",
                    self.epoch,
                    rec.total,
                    rec.coeffs[0],
                    rec.coeffs[1],
                    rec.coeffs[2]
                );
            }
            self.records.push(rec);
            self.epoch += 1;
        }
        Ok(())
    }

    /// Up to `schedule.iterations` cycles over the stages.
    pub fn run(&mut self) -> Result<InversionResult, Error> {
        let mut drift = Vec::new();
        let mut done = 0;
        for it in 0..self.schedule.iterations {
            let before = self.model.coeffs.values();
            for si in 0..self.model.problem.stages.len() {
                self.run_stage(it, si)?;
            }
            let after = self.model.coeffs.values();
            let d = before
                .iter()
                .zip(&after)
                .map(|(a, b)| (b / a - 1.0).abs())
                .fold(0.0, f64::max);
            drift.push(d);
            done = it + 1;
            if self.schedule.tol > 0.0 && d < self.schedule.tol {
                break;
            }
        }
        Ok(InversionResult {
            records: self.records.clone(),
            iterations: done,
            drift,
        })
    }
}

/// Writes the per-epoch trajectory: dimensionless then dimensional
/// coefficients, the weighted total, then the loss and weight of every term
/// of every stage. Terms of inactive stages are blank.
pub fn write_trajectory<W: Write>(mut w: W, model: &Model, records: &[EpochRecord]) -> Result<(), Error> {
    let stages = &model.problem.stages;
    let mut head = vec!["epoch".to_string(), "iteration".into(), "stage".into()];
    head.extend(CoeffKind::ALL.iter().map(|k| k.name().to_string()));
    head.extend(CoeffKind::ALL.iter().map(|k| format!("{}[{}]", k.name(), k.unit())));
    head.push("total".into());
    for st in stages {
        head.extend(st.terms.iter().map(|t| format!("{}:{}", st.stage, t.name)));
    }
    for st in stages {
        head.extend(st.terms.iter().map(|t| format!("w:{}:{}", st.stage, t.name)));
    }
    writeln!(w, "{}", head.join(","))?;
    for r in records {
        let mut row = vec![r.epoch.to_string(), r.iteration.to_string(), r.stage.to_string()];
        row.extend(r.coeffs.iter().map(|&c| fmt17(c)));
        row.extend(CoeffKind::ALL.iter().map(|k| fmt17(r.coeffs[*k as usize] * k.scale(&model.problem.scales))));
        row.push(fmt17(r.total));
        for part in [&r.losses, &r.weights] {
            for st in stages {
                if st.stage == r.stage {
                    row.extend(part.iter().map(|&v| fmt17(v)));
                } else {
                    row.extend(std::iter::repeat(String::new()).take(st.terms.len()));
                }
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::presets::Benchmark;
    use crate::train::problem::{Problem, ProblemSettings};

    fn tiny(b: Benchmark) -> Model {
        let mut set = ProblemSettings::preset(b);
        set.width = 6;
        set.depth = 2;
        set.n_space = 6;
        set.n_t = 5;
        set.refine = None;
        Model::new(Problem::preset(b, &set, &[]).unwrap(), 1.0).unwrap()
    }

    fn schedule() -> SequentialSchedule {
        SequentialSchedule {
            epochs: 6,
            batch: 10,
            iterations: 2,
            gradnorm_every: 3,
            ..Default::default()
        }
    }

    #[test]
    fn frozen_networks_are_untouched() {
        let m = tiny(Benchmark::Terzaghi);
        let u0 = m.params[1].to_bytes();
        let p0 = m.params[0].to_bytes();
        let mut t = Trainer::new(m, schedule(), 3).unwrap();
        t.run_stage(0, 0).unwrap();
        assert_eq!(t.model.params[1].to_bytes(), u0);
        assert_ne!(t.model.params[0].to_bytes(), p0);
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let mut t = Trainer::new(tiny(Benchmark::Stratum), schedule(), 5).unwrap();
            t.run().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn records_cover_every_stage_and_cycle() {
        let mut t = Trainer::new(tiny(Benchmark::Stratum), schedule(), 5).unwrap();
        let r = t.run().unwrap();
        assert_eq!(r.records.len(), 2 * 3 * 6);
        assert_eq!(r.iterations, 2);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t.model, &r.records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 36);
        let first = text.lines().nth(1).unwrap();
        assert!(first.starts_with("0,0,T,"));
        assert!(first.contains(",,"));
    }

    #[test]
    fn batch_must_fit_the_grid() {
        let s = SequentialSchedule {
            batch: 10_000,
            ..schedule()
        };
        assert!(matches!(Trainer::new(tiny(Benchmark::Terzaghi), s, 1), Err(Error::Config(_))));
    }

    #[test]
    fn cursor_visits_every_point_once_per_pass() {
        let mut c = Cursor::new(12, 4);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| c.next(4).unwrap()).collect();
        seen.sort();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        assert!(Cursor::new(3, 1).next(4).is_none());
    }
}
