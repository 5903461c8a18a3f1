//! Batched second-order input jets through a network, with the matching
//! reverse pass to the weights.
//!
//! All derivative channels of a batch are laid out side by side so that each
//! layer is a single matrix product: columns `[value | d_0 | … | d_{k-1} |
//! dd_0 | …]`, each block `n` points wide, with one `dd` block per direction
//! that requests second order.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use std::f64::consts::PI;

use super::Network;

/// Seeded input direction; `second` requests the second derivative too.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub v: Vec<f64>,
    pub second: bool,
}

impl Direction {
    pub fn axis(inputs: usize, k: usize, second: bool) -> Self {
        let mut v = vec![0.0; inputs];
        v[k] = 1.0;
        Self { v, second }
    }

    pub fn sum_of(inputs: usize, a: usize, b: usize) -> Self {
        let mut v = vec![0.0; inputs];
        v[a] += 1.0;
        v[b] += 1.0;
        Self { v, second: true }
    }
}

/// Channel outputs of one batch: row `c` holds channel `c` for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetBatch {
    pub n: usize,
    pub dirs: Vec<Direction>,
    pub out: Array2<f64>,
}

fn channel_count(dirs: &[Direction]) -> usize {
    1 + dirs.len() + dirs.iter().filter(|d| d.second).count()
}

/// Channel index of the second derivative along direction `j`.
fn dd_channel(dirs: &[Direction], j: usize) -> Option<usize> {
    if !dirs[j].second {
        return None;
    }
    Some(1 + dirs.len() + dirs[..j].iter().filter(|d| d.second).count())
}

impl JetBatch {
    pub fn channels(&self) -> usize {
        self.out.nrows()
    }

    pub fn value(&self) -> ArrayView1<'_, f64> {
        self.out.row(0)
    }

    pub fn d(&self, j: usize) -> ArrayView1<'_, f64> {
        self.out.row(1 + j)
    }

    pub fn dd(&self, j: usize) -> ArrayView1<'_, f64> {
        self.out.row(dd_channel(&self.dirs, j).expect("direction has no second order"))
    }

    pub fn d_channel(&self, j: usize) -> usize {
        1 + j
    }

    pub fn dd_channel(&self, j: usize) -> usize {
        dd_channel(&self.dirs, j).expect("direction has no second order")
    }
}

/// Intermediate activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct BatchCache {
    n: usize,
    dirs: Vec<Direction>,
    /// `acts[l]` is the input of layer `l`, all channels.
    acts: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers, all channels.
    pre: Vec<Array2<f64>>,
}

impl Network {
    fn features(&self, x: ArrayView2<'_, f64>, dirs: &[Direction]) -> Array2<f64> {
        let n = x.ncols();
        let c = channel_count(dirs);
        let nd = dirs.len();
        match &self.fourier {
            None => {
                let mut a = Array2::zeros((self.config.inputs, n * c));
                a.slice_mut(s![.., 0..n]).assign(&x);
                for (j, d) in dirs.iter().enumerate() {
                    for (i, &vi) in d.v.iter().enumerate() {
                        a.slice_mut(s![i, (1 + j) * n..(2 + j) * n]).fill(vi);
                    }
                }
                a
            }
            Some(b) => {
                let m = b.nrows();
                let phase = b.dot(&x) * (2.0 * PI);
                let mut a = Array2::zeros((2 * m, n * c));
                let sd: Vec<Vec<f64>> = dirs
                    .iter()
                    .map(|d| {
                        (0..m)
                            .map(|r| 2.0 * PI * b.row(r).iter().zip(&d.v).map(|(p, q)| p * q).sum::<f64>())
                            .collect()
                    })
                    .collect();
                for r in 0..m {
                    for k in 0..n {
                        let (sn, cs) = phase[(r, k)].sin_cos();
                        a[(r, k)] = sn;
                        a[(m + r, k)] = cs;
                        for j in 0..nd {
                            let w = sd[j][r];
                            a[(r, (1 + j) * n + k)] = cs * w;
                            a[(m + r, (1 + j) * n + k)] = -sn * w;
                            if let Some(q) = dd_channel(dirs, j) {
                                a[(r, q * n + k)] = -sn * w * w;
                                a[(m + r, q * n + k)] = -cs * w * w;
                            }
                        }
                    }
                }
                a
            }
        }
    }

    /// Forward pass of all requested channels at the columns of `x`
    /// (`inputs × n`).
    pub fn forward_batch(
        &self,
        params: &[f64],
        x: ArrayView2<'_, f64>,
        dirs: &[Direction],
    ) -> (JetBatch, BatchCache) {
        assert_eq!(x.nrows(), self.config.inputs, "input dimension");
        assert_eq!(params.len(), self.layout.len, "parameter count");
        let n = x.ncols();
        let c = channel_count(dirs);
        let nd = dirs.len();
        let mut acts = vec![self.features(x, dirs)];
        let mut pre = Vec::new();
        let last = self.layout.layers.len() - 1;
        let mut out = None;
        for (li, l) in self.layout.layers.iter().enumerate() {
            let w = ArrayView2::from_shape((l.rows, l.cols), &params[l.weights()]).unwrap();
            let bias = &params[l.bias()];
            let mut z = w.dot(acts.last().unwrap());
            for r in 0..l.rows {
                z.slice_mut(s![r, 0..n]).mapv_inplace(|v| v + bias[r]);
            }
            if li == last {
                out = Some(z);
                break;
            }
            let mut a = Array2::zeros(z.raw_dim());
            for (zr, mut ar) in z.outer_iter().zip(a.outer_iter_mut()) {
                let zr = zr.as_slice().unwrap();
                let ar = ar.as_slice_mut().unwrap();
                for k in 0..n {
                    let t = zr[k].tanh();
                    let s1 = 1.0 - t * t;
                    let s2 = -2.0 * t * s1;
                    ar[k] = t;
                    for j in 0..nd {
                        let zd = zr[(1 + j) * n + k];
                        ar[(1 + j) * n + k] = s1 * zd;
                        if let Some(q) = dd_channel(dirs, j) {
                            ar[q * n + k] = s2 * zd * zd + s1 * zr[q * n + k];
                        }
                    }
                }
            }
            pre.push(z);
            acts.push(a);
        }
        let z = out.unwrap();
        let flat = z.into_shape_with_order((c, n)).expect("single output row");
        (
            JetBatch {
                n,
                dirs: dirs.to_vec(),
                out: flat,
            },
            BatchCache {
                n,
                dirs: dirs.to_vec(),
                acts,
                pre,
            },
        )
    }

    /// Accumulates into `grad` the weight gradient of `Σ adj[c, k]·out[c, k]`.
    pub fn backward_batch(&self, params: &[f64], cache: &BatchCache, adj: ArrayView2<'_, f64>, grad: &mut [f64]) {
        let n = cache.n;
        let dirs = &cache.dirs;
        let nd = dirs.len();
        let c = channel_count(dirs);
        assert_eq!(adj.dim(), (c, n));
        let mut zbar: Array2<f64> = adj
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((1, c * n))
            .unwrap();
        for (li, l) in self.layout.layers.iter().enumerate().rev() {
            let a_in = &cache.acts[li];
            {
                let mut gw = ArrayViewMut2::from_shape((l.rows, l.cols), &mut grad[l.weights()]).unwrap();
                general_mat_mul(1.0, &zbar, &a_in.t(), 1.0, &mut gw);
            }
            let gb = &mut grad[l.bias()];
            for (r, row) in zbar.axis_iter(Axis(0)).enumerate() {
                gb[r] += row.slice(s![0..n]).sum();
            }
            if li == 0 {
                break;
            }
            let w = ArrayView2::from_shape((l.rows, l.cols), &params[l.weights()]).unwrap();
            let abar = w.t().dot(&zbar);
            let act = &cache.acts[li];
            let z = &cache.pre[li - 1];
            let mut zb = Array2::zeros(abar.raw_dim());
            for ((abr, (ar, zr)), mut zbr) in abar
                .outer_iter()
                .zip(act.outer_iter().zip(z.outer_iter()))
                .zip(zb.outer_iter_mut())
            {
                let abr = abr.as_slice().unwrap();
                let ar = ar.as_slice().unwrap();
                let zr = zr.as_slice().unwrap();
                let zbr = zbr.as_slice_mut().unwrap();
                for k in 0..n {
                    let t = ar[k];
                    let s1 = 1.0 - t * t;
                    let s2 = -2.0 * t * s1;
                    let s3 = -2.0 * s1 * s1 + 4.0 * t * t * s1;
                    let mut zv = abr[k] * s1;
                    for j in 0..nd {
                        let id = (1 + j) * n + k;
                        let zd = zr[id];
                        let ad = abr[id];
                        match dd_channel(dirs, j) {
                            Some(q) => {
                                let idd = q * n + k;
                                let add = abr[idd];
                                zbr[idd] = add * s1;
                                zbr[id] = ad * s1 + 2.0 * add * s2 * zd;
                                zv += ad * s2 * zd + add * (s3 * zd * zd + s2 * zr[idd]);
                            }
                            None => {
                                zbr[id] = ad * s1;
                                zv += ad * s2 * zd;
                            }
                        }
                    }
                    zbr[k] = zv;
                }
            }
            zbar = zb;
        }
    }

    /// Channel outputs for many points, evaluated in chunks without keeping
    /// a cache.
    pub fn evaluate(&self, params: &[f64], x: ArrayView2<'_, f64>, dirs: &[Direction]) -> JetBatch {
        const CHUNK: usize = 2048;
        let n = x.ncols();
        let c = channel_count(dirs);
        let mut out = Array2::zeros((c, n));
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let (jb, _) = self.forward_batch(params, x.slice(s![.., start..end]), dirs);
            out.slice_mut(s![.., start..end]).assign(&jb.out);
            start = end;
        }
        JetBatch {
            n,
            dirs: dirs.to_vec(),
            out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{BindingFrame, GraphBuilder, Jet2, Scalar, Slot};
    use crate::nn::NetworkConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nets() -> Vec<Network> {
        vec![
            Network::new(NetworkConfig::new(2, 6, 3, 1)).unwrap(),
            Network::new(NetworkConfig::new(3, 5, 2, 2).with_fourier(4, 1.0)).unwrap(),
        ]
    }

    fn points(inputs: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((inputs, n), |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn batch_channels_match_scalar_jets() {
        for net in nets() {
            let p = net.init();
            let ni = net.config.inputs;
            let x = points(ni, 7, 3);
            let dirs = vec![
                Direction::axis(ni, 0, true),
                Direction::axis(ni, 1, false),
                Direction::sum_of(ni, 0, 1),
            ];
            let (jb, _) = net.forward_batch(&p.values, x.view(), &dirs);
            for k in 0..x.ncols() {
                for (j, d) in dirs.iter().enumerate() {
                    let xs: Vec<Jet2> = (0..ni).map(|i| Jet2::new(x[(i, k)], d.v[i], 0.0)).collect();
                    let w: Vec<Jet2> = p.values.iter().map(|&v| Jet2::constant(v)).collect();
                    let y = net.forward(&w, &xs).unwrap();
                    assert!((jb.value()[k] - y.v).abs() < 1e-13);
                    assert!((jb.d(j)[k] - y.d).abs() < 1e-12);
                    if d.second {
                        assert!((jb.dd(j)[k] - y.dd).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn batch_backward_matches_graph_reverse_over_jets() {
        for net in nets() {
            let p = net.init();
            let ni = net.config.inputs;
            let x = points(ni, 4, 8);
            let dirs = vec![Direction::axis(ni, 0, true), Direction::axis(ni, 1, false)];
            let (jb, cache) = net.forward_batch(&p.values, x.view(), &dirs);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let adj = Array2::from_shape_fn(jb.out.raw_dim(), |_| rng.gen_range(-1.0..1.0));
            let mut g = vec![0.0; p.len()];
            net.backward_batch(&p.values, &cache, adj.view(), &mut g);

            // same contraction through the graph engine
            let mut want = vec![0.0; p.len()];
            for k in 0..x.ncols() {
                for (j, d) in dirs.iter().enumerate() {
                    let b = GraphBuilder::new();
                    let w: Vec<_> = (0..p.len()).map(|i| b.var(Slot(i))).collect();
                    let xs: Vec<_> = (0..ni).map(|i| b.var(Slot(p.len() + i))).collect();
                    let y = net.forward(&w, &xs).unwrap();
                    let gr = b.finish();
                    let mut fr = BindingFrame::with_reals(&p.values);
                    for i in 0..ni {
                        fr.set(Slot(p.len() + i), x[(i, k)]);
                    }
                    let seeded = fr
                        .seeded(&(0..ni).map(|i| (Slot(p.len() + i), d.v[i])).collect::<Vec<_>>())
                        .unwrap();
                    let prog = gr.program(&[y.id()]);
                    let jets = prog.forward_jets(&seeded).unwrap();
                    let value_adj = if j == 0 { adj[(0, k)] } else { 0.0 };
                    let dd_adj = if d.second { adj[(jb.dd_channel(j), k)] } else { 0.0 };
                    let seed = Jet2::new(value_adj, adj[(1 + j, k)], dd_adj);
                    let sa = prog.reverse_jets(&jets, 0, seed);
                    for i in 0..p.len() {
                        want[i] += sa.get(&Slot(i)).map_or(0.0, |a| a.v);
                    }
                }
            }
            for i in 0..p.len() {
                assert!((g[i] - want[i]).abs() < 1e-11 * (1.0 + want[i].abs()), "{i}: {} {}", g[i], want[i]);
            }
        }
    }

    #[test]
    fn chunked_evaluation_matches_single_batch() {
        let net = Network::new(NetworkConfig::new(2, 4, 2, 7)).unwrap();
        let p = net.init();
        let x = points(2, 5000, 1);
        let dirs = vec![Direction::axis(2, 1, true)];
        let a = net.evaluate(&p.values, x.view(), &dirs);
        let (b, _) = net.forward_batch(&p.values, x.view(), &dirs);
        assert_eq!(a.out, b.out);
        let v = net.eval(&p, &[x[(0, 17)], x[(1, 17)]]);
        assert!((a.value()[17] - v).abs() < 1e-14);
        let _ = Scalar::lift(&0.0, 1.0);
    }
}
