//! Fully connected tanh networks, one per solution field.
//!
//! Parameters are stored flat, layer by layer, each layer as its weight matrix
//! (row-major, `out × in`) followed by its bias vector. The optional Fourier
//! embedding matrix is not trainable and is regenerated from the seed.

mod batch;
mod checkpoint;

pub use batch::{BatchCache, Direction, JetBatch};
pub use checkpoint::{read_checkpoint, write_checkpoint};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::autodiff::Scalar;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSpec {
    /// Number of frequency rows; the embedding has twice as many features.
    pub count: usize,
    /// Standard deviation of the Gaussian frequency entries.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub inputs: usize,
    pub width: usize,
    pub depth: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub fourier: Option<FourierSpec>,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(inputs: usize, width: usize, depth: usize, seed: u64) -> Self {
        Self {
            inputs,
            width,
            depth,
            outputs: 1,
            activation: Activation::Tanh,
            fourier: None,
            seed,
        }
    }

    pub fn with_fourier(mut self, count: usize, scale: f64) -> Self {
        self.fourier = Some(FourierSpec { count, scale });
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.inputs == 0 || self.width == 0 || self.depth == 0 || self.outputs == 0 {
            return Err(Error::Config(format!(
                "network dimensions must be positive (inputs {}, width {}, depth {}, outputs {})",
                self.inputs, self.width, self.depth, self.outputs
            )));
        }
        if let Some(f) = self.fourier {
            if f.count == 0 || !(f.scale > 0.0) {
                return Err(Error::Config("fourier count and scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// Width of the first layer's input (raw inputs or Fourier features).
    pub fn feature_dim(&self) -> usize {
        match self.fourier {
            Some(f) => 2 * f.count,
            None => self.inputs,
        }
    }

    pub fn layout(&self) -> Layout {
        let mut dims = vec![self.feature_dim()];
        dims.extend(std::iter::repeat(self.width).take(self.depth));
        dims.push(self.outputs);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut off = 0;
        for w in dims.windows(2) {
            layers.push(LayerShape {
                rows: w[1],
                cols: w[0],
                offset: off,
            });
            off += w[1] * w[0] + w[1];
        }
        Layout { layers, len: off }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    /// Offset of the weight block; the bias follows it.
    pub offset: usize,
}

impl LayerShape {
    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    pub fn bias(&self) -> std::ops::Range<usize> {
        let b = self.offset + self.rows * self.cols;
        b..b + self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerShape>,
    pub len: usize,
}

impl Layout {
    /// Weights of the last hidden layer (the layer feeding the output).
    pub fn last_hidden(&self) -> std::ops::Range<usize> {
        self.layers[self.layers.len() - 2].weights()
    }
}

/// Flat weights and biases with their layer index.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParameterVector {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let layout = config.layout();
        Self {
            values: vec![0.0; layout.len],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unflatten(&self) -> Vec<(Array2<f64>, Array1<f64>)> {
        self.layout
            .layers
            .iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.rows, l.cols), self.values[l.weights()].to_vec())
                    .expect("layout shape");
                let b = Array1::from_vec(self.values[l.bias()].to_vec());
                (w, b)
            })
            .collect()
    }

    pub fn flatten(layers: &[(Array2<f64>, Array1<f64>)]) -> Self {
        let mut values = Vec::new();
        let mut shapes = Vec::new();
        for (w, b) in layers {
            shapes.push(LayerShape {
                rows: w.nrows(),
                cols: w.ncols(),
                offset: values.len(),
            });
            values.extend(w.iter().copied());
            values.extend(b.iter().copied());
        }
        let len = values.len();
        Self {
            values,
            layout: Layout { layers: shapes, len },
        }
    }

    /// Little-endian byte image, used for freezing assertions.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(config: &NetworkConfig) -> ParameterVector {
    let mut p = ParameterVector::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for l in p.layout.layers.clone() {
        let lim = (6.0 / (l.rows + l.cols) as f64).sqrt();
        for v in &mut p.values[l.weights()] {
            *v = rng.gen_range(-lim..lim);
        }
    }
    p
}

/// Frequency matrix `B` (`count × inputs`) for the Fourier embedding.
pub fn fourier_matrix(config: &NetworkConfig) -> Option<Array2<f64>> {
    let f = config.fourier?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    Some(Array2::from_shape_fn((f.count, config.inputs), |_| {
        f.scale * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// `(sin(2πBx), cos(2πBx))`.
pub fn fourier_embed<S: Scalar>(x: &[S], b: &Array2<f64>) -> Vec<S> {
    let m = b.nrows();
    let mut phase = Vec::with_capacity(m);
    for r in 0..m {
        let mut s = x[0].clone() * (2.0 * PI * b[(r, 0)]);
        for (c, xc) in x.iter().enumerate().skip(1) {
            s = s + xc.clone() * (2.0 * PI * b[(r, c)]);
        }
        phase.push(s);
    }
    let mut out: Vec<S> = phase.iter().map(|s| s.sin()).collect();
    out.extend(phase.iter().map(|s| s.cos()));
    out
}

/// A network architecture together with its fixed embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layout: Layout,
    pub fourier: Option<Array2<f64>>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self, Error> {
        config.validate()?;
        Ok(Self {
            layout: config.layout(),
            fourier: fourier_matrix(&config),
            config,
        })
    }

    pub fn init(&self) -> ParameterVector {
        init_network(&self.config)
    }

    /// Output of the network in any scalar context. Weights are read through
    /// `w`, so they can be graph variables, constants or jets.
    pub fn forward<S: Scalar>(&self, w: &[S], x: &[S]) -> Result<S, Error> {
        if x.len() != self.config.inputs {
            return Err(Error::Config(format!(
                "network expects {} inputs, got {}",
                self.config.inputs,
                x.len()
            )));
        }
        if w.len() != self.layout.len {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, architecture needs {}",
                w.len(),
                self.layout.len
            )));
        }
        let mut a: Vec<S> = match &self.fourier {
            Some(b) => fourier_embed(x, b),
            None => x.to_vec(),
        };
        let last = self.layout.layers.len() - 1;
        for (li, l) in self.layout.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.rows);
            for r in 0..l.rows {
                let row = l.offset + r * l.cols;
                let mut s = w[l.bias().start + r].clone();
                for (c, ac) in a.iter().enumerate() {
                    s = s + w[row + c].clone() * ac.clone();
                }
                z.push(if li < last { s.tanh() } else { s });
            }
            a = z;
        }
        Ok(a.swap_remove(0))
    }

    /// Plain-value forward at one point.
    pub fn eval(&self, params: &ParameterVector, x: &[f64]) -> f64 {
        self.forward(&params.values, x).expect("dimension checked by caller")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet2;

    #[test]
    fn parameter_count_closed_form() {
        let c = NetworkConfig::new(2, 100, 4, 1);
        assert_eq!(c.param_count(), 2 * 100 + 100 + 3 * (100 * 100 + 100) + 100 + 1);
        assert_eq!(c.param_count(), 30701);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let c = NetworkConfig::new(3, 20, 3, 42);
        let a = init_network(&c);
        let b = init_network(&c);
        assert_eq!(a.to_bytes(), b.to_bytes());
        for l in &a.layout.layers {
            assert!(a.values[l.bias()].iter().all(|&v| v == 0.0));
            let lim = (6.0 / (l.rows + l.cols) as f64).sqrt();
            assert!(a.values[l.weights()].iter().all(|v| v.abs() < lim));
        }
        assert_ne!(init_network(&NetworkConfig::new(3, 20, 3, 43)).values, a.values);
    }

    #[test]
    fn flatten_round_trip() {
        let c = NetworkConfig::new(2, 7, 2, 3);
        let p = init_network(&c);
        let q = ParameterVector::flatten(&p.unflatten());
        assert_eq!(p, q);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let c = NetworkConfig::new(2, 5, 3, 0);
        let net = Network::new(c.clone()).unwrap();
        let p = ParameterVector::zeros(&c);
        assert_eq!(net.eval(&p, &[0.3, -1.2]), 0.0);
    }

    #[test]
    fn depth_one_without_bias_is_odd() {
        let net = Network::new(NetworkConfig::new(2, 6, 1, 9)).unwrap();
        let p = net.init();
        let x = [0.4, -0.7];
        assert_eq!(net.eval(&p, &x), -net.eval(&p, &[-0.4, 0.7]));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let net = Network::new(NetworkConfig::new(2, 4, 1, 0)).unwrap();
        let p = net.init();
        assert!(matches!(net.forward(&p.values, &[1.0]), Err(Error::Config(_))));
        assert!(matches!(
            Network::new(NetworkConfig::new(2, 0, 1, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fourier_embedding_at_origin_and_periodicity() {
        let b = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 2.0, -1.0, 0.0, 3.0]).unwrap();
        let f = fourier_embed(&[0.0, 0.0], &b);
        assert_eq!(f.len(), 6);
        assert!(f[..3].iter().all(|&v| v == 0.0));
        assert!(f[3..].iter().all(|&v| v == 1.0));
        let g = fourier_embed(&[0.3, 0.8], &b);
        let h = fourier_embed(&[1.3, 0.8], &b);
        for (a, c) in g.iter().zip(&h) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_embedding_jet_matches_finite_differences() {
        let net = Network::new(NetworkConfig::new(2, 4, 1, 5).with_fourier(8, 1.0)).unwrap();
        let b = net.fourier.clone().unwrap();
        let x0 = [0.21, 0.64];
        let h = 1e-4;
        let j = fourier_embed(&[Jet2::variable(x0[0]), Jet2::constant(x0[1])], &b);
        let fp = fourier_embed(&[x0[0] + h, x0[1]], &b);
        let fm = fourier_embed(&[x0[0] - h, x0[1]], &b);
        let f0 = fourier_embed(&x0, &b);
        for k in 0..j.len() {
            let d = (fp[k] - fm[k]) / (2.0 * h);
            let dd = (fp[k] - 2.0 * f0[k] + fm[k]) / (h * h);
            assert!((j[k].d - d).abs() <= 1e-6 * d.abs().max(1.0));
            assert!((j[k].dd - dd).abs() <= 1e-6 * dd.abs().max(1.0) * 100.0);
        }
    }

    #[test]
    fn hidden_unit_permutation_invariance() {
        let c = NetworkConfig::new(2, 5, 1, 11);
        let net = Network::new(c).unwrap();
        let p = net.init();
        let mut layers = p.unflatten();
        let perm = [3, 0, 4, 1, 2];
        let (w0, b0) = layers[0].clone();
        let (w1, b1) = layers[1].clone();
        let mut w0p = w0.clone();
        let mut b0p = b0.clone();
        let mut w1p = w1.clone();
        for (i, &j) in perm.iter().enumerate() {
            w0p.row_mut(i).assign(&w0.row(j));
            b0p[i] = b0[j];
            w1p.column_mut(i).assign(&w1.column(j));
        }
        layers[0] = (w0p, b0p);
        layers[1] = (w1p, b1);
        let q = ParameterVector::flatten(&layers);
        let x = [0.3, 0.9];
        assert!((net.eval(&p, &x) - net.eval(&q, &x)).abs() < 1e-15);
    }
}
