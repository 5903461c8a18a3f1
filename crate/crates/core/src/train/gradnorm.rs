//! Loss balancing by gradient normalization.
//!
//! Each term's weighted gradient norm `G_i = w_i ‖∇_W L_i‖` at the shared
//! layer is steered toward `Ḡ r_i^α`, where `r_i` is the term's loss ratio
//! to its stage-start value relative to the mean ratio. The update is a
//! damped step in log-weight space, then the weights are rescaled to sum to
//! the term count.

#[derive(Debug, Clone, PartialEq)]
pub struct GradNormState {
    pub weights: Vec<f64>,
    /// Loss values at the start of the current stage run.
    pub initial: Option<Vec<f64>>,
    pub alpha: f64,
    /// Log-space step size.
    pub rate: f64,
}

const FLOOR: f64 = 1e-8;
const MAX_STEP: f64 = 2.0;

impl GradNormState {
    pub fn new(terms: usize, alpha: f64) -> Self {
        Self {
            weights: vec![1.0; terms],
            initial: None,
            alpha,
            rate: 0.5,
        }
    }

    /// Records the loss snapshot that training rates are measured against.
    pub fn start(&mut self, losses: &[f64]) {
        self.initial = Some(losses.to_vec());
    }

    /// Adjusts the weights given current losses and unweighted gradient
    /// norms at the shared layer.
    pub fn update(&mut self, losses: &[f64], norms: &[f64]) {
        let n = self.weights.len();
        assert!(losses.len() == n && norms.len() == n, "one loss and norm per term");
        if n < 2 || norms.iter().all(|&g| g == 0.0) {
            return;
        }
        let init = self.initial.get_or_insert_with(|| losses.to_vec());
        let ratio: Vec<f64> = losses
            .iter()
            .zip(init.iter())
            .map(|(&l, &l0)| if l0 > 0.0 { l / l0 } else { 1.0 })
            .collect();
        let mean_ratio = ratio.iter().sum::<f64>() / n as f64;
        let g: Vec<f64> = self.weights.iter().zip(norms).map(|(w, n)| w * n).collect();
        let active = g.iter().filter(|&&x| x > 0.0).count();
        let g_mean = g.iter().sum::<f64>() / active as f64;
        for i in 0..n {
            if g[i] <= 0.0 {
                continue;
            }
            let r = if mean_ratio > 0.0 { ratio[i] / mean_ratio } else { 1.0 };
            let target = g_mean * r.powf(self.alpha);
            if target > 0.0 && target.is_finite() {
                let step = (target / g[i]).ln().clamp(-MAX_STEP, MAX_STEP);
                self.weights[i] *= (self.rate * step).exp();
            }
        }
        let s: f64 = self.weights.iter().sum();
        for w in self.weights.iter_mut() {
            *w = (*w * n as f64 / s).max(FLOOR);
        }
    }
}
