//! Conversion between network jet channels and field derivative components.
//!
//! A field at a point is described by the component vector
//! `[v, ∂_t, ∂_i…, ∂_ij…, ∂_it…]` (`2 + 2d + d²` entries). Networks deliver
//! second derivatives only along seeded directions, so mixed derivatives are
//! recovered by polarization, e.g. `∂_xy = ((∂_x+∂_y)² − ∂_xx − ∂_yy)/2`. The
//! map from channels to components is linear, which makes its adjoint a
//! transpose.

use ndarray::{Array2, ArrayView2};

use crate::nn::{Direction, JetBatch, Network};
use crate::physics::FieldDerivs;

/// Which derivatives a loss term reads from a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Need {
    Value,
    /// value, gradient and time rate
    Grad,
    /// value, gradient and spatial second derivatives
    Space,
    /// `Grad` plus spatial second derivatives
    Hess,
    /// `Hess` plus mixed space-time derivatives
    Full,
}

pub fn comp_count(dim: usize) -> usize {
    2 + 2 * dim + dim * dim
}

fn c_grad(i: usize) -> usize {
    2 + i
}

fn c_hess(dim: usize, i: usize, j: usize) -> usize {
    2 + dim + i * dim + j
}

fn c_grad_t(dim: usize, i: usize) -> usize {
    2 + dim + dim * dim + i
}

/// Field derivatives from a component slice.
pub fn derivs_from<S: Clone>(dim: usize, c: &[S]) -> FieldDerivs<S> {
    FieldDerivs {
        v: c[0].clone(),
        t: c[1].clone(),
        grad: (0..dim).map(|i| c[c_grad(i)].clone()).collect(),
        hess: (0..dim * dim).map(|k| c[2 + dim + k].clone()).collect(),
        grad_t: (0..dim).map(|i| c[c_grad_t(dim, i)].clone()).collect(),
    }
}

/// Component vector of field derivatives.
pub fn comps_of(d: &FieldDerivs<f64>) -> Vec<f64> {
    let mut c = vec![d.v, d.t];
    c.extend(&d.grad);
    c.extend(&d.hess);
    c.extend(&d.grad_t);
    c
}

/// Directions to seed and the linear map from channels to components.
#[derive(Debug, Clone, PartialEq)]
pub struct DirPlan {
    pub dim: usize,
    pub dirs: Vec<Direction>,
    /// `(component, [(channel, coefficient)])`
    pub map: Vec<(usize, Vec<(usize, f64)>)>,
}

impl DirPlan {
    pub fn new(dim: usize, need: Need) -> Self {
        let inputs = dim + 1;
        let t = dim;
        let mut dirs = Vec::new();
        let mut map: Vec<(usize, Vec<(usize, f64)>)> = vec![(0, vec![(0, 1.0)])];
        if need == Need::Value {
            return Self { dim, dirs, map };
        }
        let second = matches!(need, Need::Space | Need::Hess | Need::Full);
        for i in 0..dim {
            dirs.push(Direction::axis(inputs, i, second));
        }
        let with_t = need != Need::Space;
        if with_t {
            dirs.push(Direction::axis(inputs, t, need == Need::Full));
        }
        let mixed = if second && dim == 2 {
            dirs.push(Direction::sum_of(inputs, 0, 1));
            Some(dirs.len() - 1)
        } else {
            None
        };
        let first_t = dirs.len();
        if need == Need::Full {
            for i in 0..dim {
                dirs.push(Direction::sum_of(inputs, i, t));
            }
        }
        let probe = JetBatch {
            n: 0,
            dirs: dirs.clone(),
            out: Array2::zeros((0, 0)),
        };
        for i in 0..dim {
            map.push((c_grad(i), vec![(probe.d_channel(i), 1.0)]));
        }
        if with_t {
            map.push((1, vec![(probe.d_channel(dim), 1.0)]));
        }
        if second {
            for i in 0..dim {
                map.push((c_hess(dim, i, i), vec![(probe.dd_channel(i), 1.0)]));
            }
            if let Some(m) = mixed {
                let terms = vec![(probe.dd_channel(m), 0.5), (probe.dd_channel(0), -0.5), (probe.dd_channel(1), -0.5)];
                map.push((c_hess(dim, 0, 1), terms.clone()));
                map.push((c_hess(dim, 1, 0), terms));
            }
        }
        if need == Need::Full {
            for i in 0..dim {
                map.push((
                    c_grad_t(dim, i),
                    vec![
                        (probe.dd_channel(first_t + i), 0.5),
                        (probe.dd_channel(i), -0.5),
                        (probe.dd_channel(dim), -0.5),
                    ],
                ));
            }
        }
        Self { dim, dirs, map }
    }

    /// Components (`comp_count × n`) of `offset + scale·N` from channels.
    pub fn comps(&self, jb: &JetBatch, scale: f64, offset: f64) -> Array2<f64> {
        let n = jb.n;
        let mut out = Array2::zeros((comp_count(self.dim), n));
        for (c, terms) in &self.map {
            let mut row = out.row_mut(*c);
            for &(ch, w) in terms {
                row.scaled_add(w * scale, &jb.out.row(ch));
            }
        }
        out.row_mut(0).mapv_inplace(|v| v + offset);
        out
    }

    /// Channel adjoints from component adjoints.
    pub fn channel_adjoint(&self, comp_adj: ArrayView2<'_, f64>, channels: usize, scale: f64) -> Array2<f64> {
        let n = comp_adj.ncols();
        let mut out = Array2::zeros((channels, n));
        for (c, terms) in &self.map {
            for &(ch, w) in terms {
                out.row_mut(ch).scaled_add(w * scale, &comp_adj.row(*c));
            }
        }
        out
    }
}

/// Components of a network field at the columns of `x`, without keeping a
/// cache.
pub fn network_comps(net: &Network, params: &[f64], x: ArrayView2<'_, f64>, need: Need, scale: f64, offset: f64) -> Array2<f64> {
    let plan = DirPlan::new(x.nrows() - 1, need);
    let jb = net.evaluate(params, x, &plan.dirs);
    plan.comps(&jb, scale, offset)
}

/// A field known in closed form (or by interpolation), used in place of a
/// network.
pub trait FieldFn {
    fn derivs(&self, x: &[f64]) -> FieldDerivs<f64>;
}

impl<F: Fn(&[f64]) -> FieldDerivs<f64>> FieldFn for F {
    fn derivs(&self, x: &[f64]) -> FieldDerivs<f64> {
        self(x)
    }
}

pub fn function_comps(f: &dyn FieldFn, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let dim = x.nrows() - 1;
    let mut out = Array2::zeros((comp_count(dim), x.ncols()));
    for (k, col) in x.columns().into_iter().enumerate() {
        let p: Vec<f64> = col.to_vec();
        let c = comps_of(&f.derivs(&p));
        for (r, v) in c.into_iter().enumerate() {
            out[(r, k)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkConfig;
    use ndarray::array;

    fn fd_comps(net: &Network, w: &[f64], p: &[f64]) -> Vec<f64> {
        let dim = p.len() - 1;
        let f = |q: &[f64]| net.forward(w, q).unwrap();
        let h = 1e-4;
        let shift = |i: usize, a: f64, j: usize, b: f64| {
            let mut q = p.to_vec();
            q[i] += a;
            q[j] += b;
            f(&q)
        };
        let d1 = |i: usize| (shift(i, h, i, 0.0) - shift(i, -h, i, 0.0)) / (2.0 * h);
        let d2 = |i: usize, j: usize| {
            (shift(i, h, j, h) - shift(i, h, j, -h) - shift(i, -h, j, h) + shift(i, -h, j, -h)) / (4.0 * h * h)
        };
        let t = dim;
        let mut c = vec![f(p), d1(t)];
        c.extend((0..dim).map(d1));
        for i in 0..dim {
            for j in 0..dim {
                c.push(d2(i, j));
            }
        }
        c.extend((0..dim).map(|i| d2(i, t)));
        c
    }

    #[test]
    fn components_match_finite_differences() {
        for dim in [1, 2] {
            let net = Network::new(NetworkConfig::new(dim + 1, 6, 2, 4)).unwrap();
            let w = net.init().values;
            let x = if dim == 1 { array![[0.3, 0.7], [0.2, 0.9]] } else { array![[0.3, 0.7], [0.2, 0.9], [0.5, 0.1]] };
            let c = network_comps(&net, &w, x.view(), Need::Full, 1.0, 0.0);
            for k in 0..2 {
                let p: Vec<f64> = x.column(k).to_vec();
                let e = fd_comps(&net, &w, &p);
                for (r, ev) in e.iter().enumerate() {
                    assert!((c[(r, k)] - ev).abs() < 1e-6, "dim {dim} comp {r}: {} vs {ev}", c[(r, k)]);
                }
            }
        }
    }

    #[test]
    fn reduced_needs_agree_with_full() {
        let net = Network::new(NetworkConfig::new(3, 5, 2, 9)).unwrap();
        let w = net.init().values;
        let x = array![[0.3], [0.6], [0.25]];
        let full = network_comps(&net, &w, x.view(), Need::Full, 2.0, 0.5);
        for need in [Need::Value, Need::Grad, Need::Space, Need::Hess] {
            let c = network_comps(&net, &w, x.view(), need, 2.0, 0.5);
            let plan = DirPlan::new(2, need);
            for (r, _) in &plan.map {
                assert!((c[(*r, 0)] - full[(*r, 0)]).abs() < 1e-12, "{need:?} {r}");
            }
        }
    }

    #[test]
    fn channel_adjoint_is_the_transpose() {
        let plan = DirPlan::new(2, Need::Full);
        let nch = 1 + plan.dirs.len() + plan.dirs.iter().filter(|d| d.second).count();
        let jb = JetBatch {
            n: 1,
            dirs: plan.dirs.clone(),
            out: Array2::from_shape_fn((nch, 1), |(i, _)| 0.3 * i as f64 - 1.0),
        };
        let comps = plan.comps(&jb, 1.5, 0.0);
        let adj = Array2::from_shape_fn((comp_count(2), 1), |(i, _)| (i as f64).sin());
        let ch = plan.channel_adjoint(adj.view(), nch, 1.5);
        let lhs: f64 = comps.iter().zip(adj.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = ch.iter().zip(jb.out.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
