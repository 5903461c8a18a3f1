//! Bias-corrected ADAM.

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Keras defaults apart from the learning rate.
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }

    /// One update. The caller checks the gradient for non-finite entries.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count");
        assert_eq!(grads.len(), self.m.len(), "gradient count");
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut a = AdamState::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        a.update(&mut p, &[0.1, -0.2, 0.3]);
        let before = p.clone();
        let (m, v) = (a.m.clone(), a.v.clone());
        a.update(&mut p, &[0.0; 3]);
        for i in 0..3 {
            assert!(a.m[i].abs() < m[i].abs() && a.v[i] < v[i]);
        }
        // the moment still moves parameters; with fresh state nothing moves
        let mut b = AdamState::new(3, 1e-3);
        let mut q = before.clone();
        b.update(&mut q, &[0.0; 3]);
        assert_eq!(q, before);
        assert_eq!(b.step, 1);
    }

    #[test]
    fn first_step_is_learning_rate_times_sign() {
        let mut a = AdamState::new(4, 1e-3);
        let g = [3.0, -1e-2, 250.0, -7.0];
        let mut p = vec![0.0; 4];
        a.update(&mut p, &g);
        for (pi, gi) in p.iter().zip(&g) {
            assert!((pi + 1e-3 * gi.signum()).abs() < 1e-8, "{pi}");
        }
    }
}
