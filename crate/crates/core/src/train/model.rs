//! Networks, coefficients and compiled terms of one inversion.

use ndarray::{Array2, ArrayView2};

use super::fields::Need;
use super::loss::{eval_term, CompiledTerm, FieldSource, LossBreakdown, TermInputs};
use super::problem::{Problem, TermKind};
use crate::nn::{Network, ParameterVector};
use crate::oracle::{Axis, FieldTable};
use crate::physics::{CoeffKind, TrainableCoeffs};
use crate::Error;

#[derive(Debug, Clone)]
pub struct Model {
    pub problem: Problem,
    pub nets: Vec<Network>,
    pub params: Vec<ParameterVector>,
    pub coeffs: TrainableCoeffs,
    /// one compiled program per term, parallel to `problem.stages`
    pub compiled: Vec<Vec<CompiledTerm>>,
}

impl Model {
    /// Fresh networks from their configured seeds; trainable coefficients
    /// start at `initial`.
    pub fn new(problem: Problem, initial: f64) -> Result<Self, Error> {
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::Config(format!("initial coefficient guess must be positive, got {initial}")));
        }
        let nets = problem
            .fields
            .iter()
            .map(|f| Network::new(f.config.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let params = nets.iter().map(Network::init).collect();
        let coeffs = TrainableCoeffs::new(&problem.coeff_kinds, initial);
        let compiled = problem
            .stages
            .iter()
            .map(|s| s.terms.iter().map(|t| CompiledTerm::new(t, problem.dim)).collect())
            .collect();
        Ok(Self {
            problem,
            nets,
            params,
            coeffs,
            compiled,
        })
    }

    /// Turns the inversion into a forward solve: every coefficient is held at
    /// its target value 1 and sensor-data terms are dropped.
    pub fn into_forward(mut self) -> Self {
        self.coeffs = TrainableCoeffs::new(&[], 1.0);
        for (st, ct) in self.problem.stages.iter_mut().zip(&mut self.compiled) {
            let keep: Vec<bool> = st.terms.iter().map(|t| t.kind != TermKind::Data).collect();
            let mut k = keep.iter();
            st.terms.retain(|_| *k.next().unwrap());
            let mut k = keep.iter();
            ct.retain(|_| *k.next().unwrap());
        }
        self
    }

    pub fn sources(&self) -> Vec<FieldSource<'_>> {
        self.nets
            .iter()
            .zip(&self.params)
            .zip(&self.problem.fields)
            .map(|((net, p), f)| FieldSource::Net {
                net,
                params: &p.values,
                scale: f.scale,
                offset: f.offset,
            })
            .collect()
    }

    /// Values of `k, K_dr, λ`.
    pub fn coeff_values(&self) -> [f64; 3] {
        coeff_array(&self.coeffs)
    }

    /// Full-set losses of stage `si` with the model's own fields.
    pub fn stage_loss(&self, si: usize, weights: Option<&[f64]>) -> Result<LossBreakdown, Error> {
        let src = self.sources();
        self.stage_loss_with(si, &src, self.coeff_values(), weights)
    }

    /// Full-set losses of stage `si` with arbitrary field sources and
    /// coefficients.
    pub fn stage_loss_with(
        &self,
        si: usize,
        sources: &[FieldSource<'_>],
        coeffs: [f64; 3],
        weights: Option<&[f64]>,
    ) -> Result<LossBreakdown, Error> {
        let st = &self.problem.stages[si];
        let live = vec![false; sources.len()];
        let inp = TermInputs {
            current: sources,
            snapshot: sources,
            live: &live,
            coeffs,
            grad: false,
        };
        let values = st
            .terms
            .iter()
            .zip(&self.compiled[si])
            .map(|(t, ct)| eval_term(ct, t, &inp, None, None).map(|e| e.loss))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LossBreakdown::new(st.stage, &st.terms, values, weights))
    }

    /// Field values at the columns of `x`.
    pub fn predict(&self, field: usize, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let src = self.sources();
        src[field].comps(x, Need::Value).row(0).to_vec()
    }

    /// Every field on a tensor grid.
    pub fn predict_table(&self, axes: Vec<Axis>, times: Vec<f64>) -> FieldTable {
        let names: Vec<&str> = self.problem.fields.iter().map(|f| f.name.as_str()).collect();
        let mut table = FieldTable::new(self.problem.benchmark, axes, times, &names);
        let ns = table.space_len();
        let dim = table.axes.len();
        let x = Array2::from_shape_fn((dim + 1, ns * table.times.len()), |(r, k)| {
            if r == dim {
                table.times[k / ns]
            } else {
                table.coords(k % ns)[r]
            }
        });
        for f in 0..names.len() {
            table.values[f] = self.predict(f, x.view());
        }
        table
    }
}

pub fn coeff_array(c: &TrainableCoeffs) -> [f64; 3] {
    CoeffKind::ALL.map(|k| c.get(k))
}
