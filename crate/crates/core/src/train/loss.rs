//! Compiled loss terms and their evaluation on point batches.

use ndarray::{Array2, ArrayView2, Axis};

use super::fields::{comp_count, derivs_from, function_comps, network_comps, DirPlan, FieldFn, Need};
use super::problem::{Ctx, Source, Stage, TermKind, TermSpec};
use crate::autodiff::{Expr, GraphBuilder, NodeId, Program, Slot};
use crate::nn::Network;
use crate::physics::Coeffs;
use crate::Error;

/// Points evaluated per network pass.
pub const CHUNK: usize = 1024;

/// A term residual compiled to a dense program. Slots hold the components of
/// each field use, then `k, K_dr, λ`, then the extra inputs.
#[derive(Debug, Clone)]
pub struct CompiledTerm {
    pub program: Program,
    offsets: Vec<usize>,
    coeff: usize,
    extra: usize,
    slots: usize,
    ncomp: usize,
}

impl CompiledTerm {
    pub fn new(term: &TermSpec, dim: usize) -> Self {
        let b = GraphBuilder::new();
        let ncomp = comp_count(dim);
        let mut next = 0;
        let mut offsets = Vec::new();
        let mut fields = Vec::new();
        for _ in &term.uses {
            let vars: Vec<Expr> = (0..ncomp).map(|i| b.var(Slot(next + i))).collect();
            offsets.push(next);
            next += ncomp;
            fields.push(derivs_from(dim, &vars));
        }
        let coeff = next;
        let coeffs = Coeffs {
            k: b.var(Slot(coeff)),
            k_dr: b.var(Slot(coeff + 1)),
            lambda: b.var(Slot(coeff + 2)),
        };
        next += 3;
        let extra = next;
        let ex: Vec<Expr> = (0..term.extra.nrows()).map(|i| b.var(Slot(extra + i))).collect();
        next += ex.len();
        let roots = (term.residual)(&Ctx {
            fields: &fields,
            coeffs: &coeffs,
            extra: &ex,
        });
        let ids: Vec<NodeId> = roots.iter().map(Expr::id).collect();
        let program = b.finish().program(&ids);
        Self {
            program,
            offsets,
            coeff,
            extra,
            slots: next,
            ncomp,
        }
    }

    pub fn residual_count(&self) -> usize {
        self.program.root_count()
    }
}

/// Where the values of a field come from.
#[derive(Clone, Copy)]
pub enum FieldSource<'a> {
    Net {
        net: &'a Network,
        params: &'a [f64],
        scale: f64,
        offset: f64,
    },
    Func(&'a dyn FieldFn),
}

impl FieldSource<'_> {
    pub fn comps(&self, x: ArrayView2<'_, f64>, need: Need) -> Array2<f64> {
        match *self {
            FieldSource::Net {
                net,
                params,
                scale,
                offset,
            } => {
                let mut out = Array2::zeros((comp_count(x.nrows() - 1), x.ncols()));
                for (lo, hi) in chunks(x.ncols()) {
                    let c = network_comps(net, params, x.slice(ndarray::s![.., lo..hi]), need, scale, offset);
                    out.slice_mut(ndarray::s![.., lo..hi]).assign(&c);
                }
                out
            }
            FieldSource::Func(f) => function_comps(f, x),
        }
    }
}

fn chunks(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).step_by(CHUNK).map(move |lo| (lo, (lo + CHUNK).min(n)))
}

/// Everything a term evaluation reads besides the term itself.
#[derive(Clone, Copy)]
pub struct TermInputs<'a> {
    pub current: &'a [FieldSource<'a>],
    /// parameters frozen at the start of the stage
    pub snapshot: &'a [FieldSource<'a>],
    /// fields whose network gradients are wanted
    pub live: &'a [bool],
    /// values of `k, K_dr, λ`
    pub coeffs: [f64; 3],
    pub grad: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermEval {
    pub loss: f64,
    /// network gradient per field, `Some` for live fields
    pub grads: Vec<Option<Vec<f64>>>,
    /// gradient with respect to `k, K_dr, λ`
    pub coeff_grad: [f64; 3],
    /// point evaluations where a value clamp was active
    pub clamped: usize,
}

fn is_live(inp: &TermInputs<'_>, u: &super::problem::FieldUse) -> bool {
    u.source == Source::Current && inp.grad && inp.live[u.field]
}

/// Components of every non-live use over all points of a term, for reuse
/// across epochs while those fields stay fixed.
pub fn frozen_comps(term: &TermSpec, inp: &TermInputs<'_>) -> Vec<Option<Array2<f64>>> {
    term.uses
        .iter()
        .map(|u| {
            if is_live(inp, u) {
                return None;
            }
            let src = match u.source {
                Source::Current => &inp.current[u.field],
                Source::Snapshot => &inp.snapshot[u.field],
            };
            Some(src.comps(term.points.view(), u.need))
        })
        .collect()
}

struct LiveUse {
    plan: DirPlan,
    cache: crate::nn::BatchCache,
    channels: usize,
}

/// Mean squared residual of a term over the points `idx` (all points when
/// `None`) and, if requested, its gradients.
pub fn eval_term(
    ct: &CompiledTerm,
    term: &TermSpec,
    inp: &TermInputs<'_>,
    frozen: Option<&[Option<Array2<f64>>]>,
    idx: Option<&[usize]>,
) -> Result<TermEval, Error> {
    let all: Vec<usize>;
    let idx = match idx {
        Some(i) => i,
        None => {
            all = (0..term.len()).collect();
            &all
        }
    };
    let n = idx.len();
    let nf = inp.current.len();
    let mut out = TermEval {
        loss: 0.0,
        grads: (0..nf)
            .map(|f| {
                let live = term.uses.iter().any(|u| u.field == f && is_live(inp, u));
                match (&inp.current[f], live) {
                    (FieldSource::Net { params, .. }, true) => Some(vec![0.0; params.len()]),
                    _ => None,
                }
            })
            .collect(),
        coeff_grad: [0.0; 3],
        clamped: 0,
    };
    if n == 0 {
        return Ok(out);
    }
    let nr = ct.residual_count();
    let mut slots = vec![0.0; ct.slots];
    slots[ct.coeff..ct.coeff + 3].copy_from_slice(&inp.coeffs);
    let mut vals = Vec::new();
    let mut adj = Vec::new();
    let mut slot_adj = vec![0.0; ct.slots];
    let mut seeds = vec![0.0; nr];

    for (lo, hi) in chunks(n) {
        let sel = &idx[lo..hi];
        let m = sel.len();
        let x = term.points.select(Axis(1), sel);
        let mut comps = Vec::with_capacity(term.uses.len());
        let mut live = Vec::with_capacity(term.uses.len());
        for (ui, u) in term.uses.iter().enumerate() {
            if is_live(inp, u) {
                let FieldSource::Net {
                    net,
                    params,
                    scale,
                    offset,
                } = inp.current[u.field]
                else {
                    return Err(Error::Config(format!("field {} is trained but has no network", u.field)));
                };
                let plan = DirPlan::new(x.nrows() - 1, u.need);
                let (jb, cache) = net.forward_batch(params, x.view(), &plan.dirs);
                comps.push(plan.comps(&jb, scale, offset));
                live.push(Some(LiveUse {
                    plan,
                    cache,
                    channels: jb.channels(),
                }));
            } else {
                let c = match frozen.and_then(|f| f[ui].as_ref()) {
                    Some(all) => all.select(Axis(1), sel),
                    None => {
                        let src = match u.source {
                            Source::Current => &inp.current[u.field],
                            Source::Snapshot => &inp.snapshot[u.field],
                        };
                        src.comps(x.view(), u.need)
                    }
                };
                comps.push(c);
                live.push(None);
            }
        }
        // clamp values, remembering where the clamp cut the gradient
        let mut cut = vec![vec![false; m]; term.uses.len()];
        for (ui, u) in term.uses.iter().enumerate() {
            if let Some((a, b)) = u.clamp {
                for k in 0..m {
                    let v = comps[ui][(0, k)];
                    let c = v.clamp(a, b);
                    if c != v || v.is_nan() {
                        comps[ui][(0, k)] = if v.is_nan() { a } else { c };
                        cut[ui][k] = true;
                        out.clamped += 1;
                    }
                }
            }
        }
        let mut comp_adj: Vec<Array2<f64>> = term.uses.iter().map(|_| Array2::zeros((ct.ncomp, m))).collect();
        for k in 0..m {
            for (ui, c) in comps.iter().enumerate() {
                let o = ct.offsets[ui];
                for r in 0..ct.ncomp {
                    slots[o + r] = c[(r, k)];
                }
            }
            for e in 0..term.extra.nrows() {
                slots[ct.extra + e] = term.extra[(e, sel[k])];
            }
            ct.program.forward_dense(&slots, &mut vals)?;
            for (j, s) in seeds.iter_mut().enumerate() {
                let r = ct.program.root_value(&vals, j);
                out.loss += r * r;
                *s = 2.0 * r / n as f64;
            }
            if !inp.grad {
                continue;
            }
            slot_adj.iter_mut().for_each(|a| *a = 0.0);
            ct.program.reverse_dense(&vals, &seeds, &mut adj, &mut slot_adj);
            for (ui, a) in comp_adj.iter_mut().enumerate() {
                let o = ct.offsets[ui];
                for r in 0..ct.ncomp {
                    a[(r, k)] = slot_adj[o + r];
                }
                if cut[ui][k] {
                    a[(0, k)] = 0.0;
                }
            }
            for (g, a) in out.coeff_grad.iter_mut().zip(&slot_adj[ct.coeff..ct.coeff + 3]) {
                *g += a;
            }
        }
        for (ui, l) in live.into_iter().enumerate() {
            let Some(l) = l else { continue };
            let u = &term.uses[ui];
            let FieldSource::Net { net, params, scale, .. } = inp.current[u.field] else {
                unreachable!()
            };
            let ch = l.plan.channel_adjoint(comp_adj[ui].view(), l.channels, scale);
            let g = out.grads[u.field].as_mut().expect("live field has a gradient buffer");
            net.backward_batch(params, &l.cache, ch.view(), g);
        }
    }
    out.loss /= n as f64;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermLoss {
    pub name: String,
    pub kind: TermKind,
    pub value: f64,
}

/// Per-term losses of one stage and their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub stage: Stage,
    pub terms: Vec<TermLoss>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(stage: Stage, terms: &[TermSpec], values: Vec<f64>, weights: Option<&[f64]>) -> Self {
        let weights = weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; values.len()]);
        let total = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
        Self {
            stage,
            terms: terms
                .iter()
                .zip(values)
                .map(|(t, value)| TermLoss {
                    name: t.name.clone(),
                    kind: t.kind,
                    value,
                })
                .collect(),
            weights,
            total,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkConfig;
    use crate::physics::FieldDerivs;
    use crate::train::problem::FieldUse;
    use ndarray::array;
    use std::rc::Rc;

    fn toy_term() -> TermSpec {
        // r = k·u_yy − λ u_t − 0.3·u + extra
        TermSpec {
            name: "toy".into(),
            kind: TermKind::Pde,
            points: array![[0.1, 0.4, 0.8, 0.5], [0.2, 0.9, 0.3, 0.6]],
            extra: array![[0.5, -0.2, 0.1, 0.0]],
            uses: vec![FieldUse::current(0, Need::Hess)],
            residual: Rc::new(|c| {
                let u = &c.fields[0];
                vec![c.coeffs.k.clone() * u.h(0, 0) - c.coeffs.lambda.clone() * u.t.clone() - u.v.clone() * 0.3
                    + c.extra[0].clone()]
            }),
        }
    }

    fn loss_at(net: &Network, w: &[f64], coeffs: [f64; 3], term: &TermSpec, ct: &CompiledTerm, grad: bool) -> TermEval {
        let cur = [FieldSource::Net {
            net,
            params: w,
            scale: 1.7,
            offset: 0.2,
        }];
        let inp = TermInputs {
            current: &cur,
            snapshot: &cur,
            live: &[true],
            coeffs,
            grad,
        };
        eval_term(ct, term, &inp, None, None).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = Network::new(NetworkConfig::new(2, 6, 2, 3)).unwrap();
        let w = net.init().values;
        let term = toy_term();
        let ct = CompiledTerm::new(&term, 1);
        let c = [1.3, 1.0, 0.7];
        let e = loss_at(&net, &w, c, &term, &ct, true);
        let g = e.grads[0].as_ref().unwrap();
        let h = 1e-6;
        for i in (0..w.len()).step_by(7) {
            let mut wp = w.clone();
            wp[i] += h;
            let mut wm = w.clone();
            wm[i] -= h;
            let fd = (loss_at(&net, &wp, c, &term, &ct, false).loss - loss_at(&net, &wm, c, &term, &ct, false).loss) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
        for j in [0, 2] {
            let mut cp = c;
            cp[j] += h;
            let mut cm = c;
            cm[j] -= h;
            let fd = (loss_at(&net, &w, cp, &term, &ct, false).loss - loss_at(&net, &w, cm, &term, &ct, false).loss) / (2.0 * h);
            assert!((fd - e.coeff_grad[j]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
        assert_eq!(e.coeff_grad[1], 0.0);
    }

    #[test]
    fn function_source_matches_direct_evaluation() {
        let term = toy_term();
        let ct = CompiledTerm::new(&term, 1);
        let f = |x: &[f64]| FieldDerivs::line(x[0] * x[0] * x[1], x[0] * x[0], 2.0 * x[0] * x[1], 2.0 * x[1], 2.0 * x[0]);
        let cur = [FieldSource::Func(&f)];
        let inp = TermInputs {
            current: &cur,
            snapshot: &cur,
            live: &[false],
            coeffs: [2.0, 1.0, 0.5],
            grad: false,
        };
        let e = eval_term(&ct, &term, &inp, None, None).unwrap();
        let mut expect = 0.0;
        for k in 0..4 {
            let (y, t) = (term.points[(0, k)], term.points[(1, k)]);
            let r = 2.0 * 2.0 * t - 0.5 * y * y - 0.3 * y * y * t + term.extra[(0, k)];
            expect += r * r / 4.0;
        }
        assert!((e.loss - expect).abs() < 1e-12);
        assert!(e.grads[0].is_none());
    }

    #[test]
    fn batches_average_over_their_points() {
        let net = Network::new(NetworkConfig::new(2, 4, 1, 5)).unwrap();
        let w = net.init().values;
        let term = toy_term();
        let ct = CompiledTerm::new(&term, 1);
        let cur = [FieldSource::Net {
            net: &net,
            params: &w,
            scale: 1.0,
            offset: 0.0,
        }];
        let inp = TermInputs {
            current: &cur,
            snapshot: &cur,
            live: &[false],
            coeffs: [1.0; 3],
            grad: false,
        };
        let a = eval_term(&ct, &term, &inp, None, Some(&[0, 1])).unwrap().loss;
        let b = eval_term(&ct, &term, &inp, None, Some(&[2, 3])).unwrap().loss;
        let all = eval_term(&ct, &term, &inp, None, None).unwrap().loss;
        assert!((0.5 * (a + b) - all).abs() < 1e-14);
        let frozen = frozen_comps(&term, &inp);
        let f = eval_term(&ct, &term, &inp, Some(&frozen), None).unwrap().loss;
        assert!((f - all).abs() < 1e-14);
    }
}
