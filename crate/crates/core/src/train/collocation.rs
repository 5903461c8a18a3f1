//! Structured collocation grids.

use ndarray::Array2;

use crate::oracle::Axis;
use crate::Error;

/// Extra interior points on a finer grid around a source location.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub center: Vec<f64>,
    pub half_width: f64,
    /// points per spatial axis in the refined box
    pub n: usize,
}

/// Points are stored as columns `(x…, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub axes: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub interior: Array2<f64>,
    pub refinement: Option<Refinement>,
}

fn columns(points: Vec<Vec<f64>>, rows: usize) -> Array2<f64> {
    let n = points.len();
    Array2::from_shape_fn((rows, n), |(r, k)| points[k][r])
}

/// All combinations of the spatial axes and times; time varies slowest, the
/// last spatial axis fastest.
fn tensor(axes: &[Vec<f64>], times: &[f64]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut pts = Vec::with_capacity(total * times.len());
    for &t in times {
        for k in 0..total {
            let mut p = vec![0.0; axes.len() + 1];
            let mut r = k;
            for a in (0..axes.len()).rev() {
                p[a] = axes[a][r % axes[a].len()];
                r /= axes[a].len();
            }
            p[axes.len()] = t;
            pts.push(p);
        }
    }
    pts
}

impl CollocationSet {
    /// Uniform grid on the unit box with `n_space` points per spatial axis and
    /// `n_t` times.
    pub fn uniform(dim: usize, n_space: usize, n_t: usize) -> Result<Self, Error> {
        if n_space < 2 || n_t < 2 {
            return Err(Error::Config(format!("collocation grid needs at least 2 points per axis, got {n_space}x{n_t}")));
        }
        let a = Axis::uniform("s", 0.0, 1.0, n_space).points;
        let axes = vec![a; dim];
        let times = Axis::uniform("t", 0.0, 1.0, n_t).points;
        let interior = columns(tensor(&axes, &times), dim + 1);
        Ok(Self {
            axes,
            times,
            interior,
            refinement: None,
        })
    }

    /// Adds a uniform `n^dim × n_t` box of interior points around `center`.
    pub fn refine(mut self, center: &[f64], half_width: f64, n: usize) -> Result<Self, Error> {
        if n < 2 || !(half_width > 0.0) || center.len() != self.dim() {
            return Err(Error::Config("refinement needs a center per axis, a positive width and 2+ points".into()));
        }
        let axes: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| Axis::uniform("r", (c - half_width).max(0.0), (c + half_width).min(1.0), n).points)
            .collect();
        let extra = tensor(&axes, &self.times);
        let mut pts: Vec<Vec<f64>> = self.interior.columns().into_iter().map(|c| c.to_vec()).collect();
        pts.extend(extra);
        self.interior = columns(pts, self.dim() + 1);
        self.refinement = Some(Refinement {
            center: center.to_vec(),
            half_width,
            n,
        });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.interior.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points on the face `x_axis = side` (side 0 or 1), all times.
    pub fn face(&self, axis: usize, side: f64) -> Array2<f64> {
        let mut axes = self.axes.clone();
        axes[axis] = vec![side];
        columns(tensor(&axes, &self.times), self.dim() + 1)
    }

    /// Grid points at `t = 0`.
    pub fn initial(&self) -> Array2<f64> {
        columns(tensor(&self.axes, &[0.0]), self.dim() + 1)
    }

    /// Explicit points, one column per `(x…, t)`.
    pub fn points(points: &[Vec<f64>]) -> Array2<f64> {
        let rows = points.first().map(|p| p.len()).unwrap_or(0);
        columns(points.to_vec(), rows)
    }

    /// All points lie in the closed unit box.
    pub fn validate(&self) -> Result<(), Error> {
        if self.interior.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain("collocation point outside the unit box".into()));
        }
        Ok(())
    }
}

/// Joins point sets column-wise.
pub fn concat(sets: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = sets.iter().map(|a| a.view()).collect();
    ndarray::concatenate(ndarray::Axis(1), &views).expect("matching point dimension")
}
