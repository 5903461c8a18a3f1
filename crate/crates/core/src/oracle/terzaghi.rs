//! Series solution of the consolidation column.
//!
//! The base `ȳ = 0` is impermeable and fixed, the top `ȳ = 1` is drained and
//! carries the load. Pressure is the classical cosine series with the
//! diffusivity of the dimensionless flow equation,
//! `c̄ = k̄ / (μ̄ (b²/K̄_dr + 1/M̄) D*)`; displacement follows from the
//! traction condition `K̄_dr(1+2c_ν) ū_ȳ − b p̄ = −q̄` and `ū(0) = 0`.

use std::f64::consts::PI;

use super::table::{Axis, FieldTable};
use crate::physics::presets::{Benchmark, Terzaghi};
use crate::physics::{compute_groups, FieldDerivs};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerzaghiSeries {
    /// dimensionless diffusivity
    pub c: f64,
    /// initial (undrained) pressure, scaled
    pub p0: f64,
    /// load, scaled
    pub q: f64,
    pub b: f64,
    /// `K̄_dr (1 + 2c_ν)`
    pub k_nu: f64,
    pub terms: usize,
}

impl TerzaghiSeries {
    pub fn new(preset: &Terzaghi, terms: usize) -> Result<Self, Error> {
        if terms < 1 {
            return Err(Error::Config("series truncation must be at least 1".into()));
        }
        let g = compute_groups(&preset.scales, &preset.mat)?;
        let b = preset.mat.b;
        let storage = (b * b / g.k_dr_bar + 1.0 / g.m_bar) * g.d_star;
        Ok(Self {
            c: g.k_bar / (g.mu_w * storage),
            p0: preset.initial_pressure() / preset.scales.p,
            q: preset.load_bar(),
            b,
            k_nu: g.k_dr_bar * (1.0 + 2.0 * preset.mat.c_nu()),
            terms,
        })
    }

    /// `(p̄, ū)` at height `ȳ` and time `t̄`; `t̄ = 0` gives the undrained
    /// limit.
    pub fn eval(&self, y: f64, t: f64) -> (f64, f64) {
        let (p, u) = self.derivs(y, t);
        (p.v, u.v)
    }

    /// Values and derivatives of both fields. At `t̄ = 0` only values are
    /// meaningful (the pressure jumps at the drained face).
    pub fn derivs(&self, y: f64, t: f64) -> (FieldDerivs<f64>, FieldDerivs<f64>) {
        let mut p = FieldDerivs::constant(0.0, 1);
        let mut int_p = 0.0;
        let mut int_pt = 0.0;
        if t <= 0.0 {
            p.v = if y < 1.0 { self.p0 } else { 0.0 };
            int_p = self.p0 * y;
        } else {
            for k in 0..self.terms {
                let m = (2 * k + 1) as f64;
                let w = m * PI / 2.0;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let a = self.p0 * 4.0 / PI * sign / m;
                let rate = w * w * self.c;
                let e = (-rate * t).exp();
                let (s, c) = (w * y).sin_cos();
                p.v += a * c * e;
                p.t += -rate * a * c * e;
                p.grad[0] += -w * a * s * e;
                p.hess[0] += -w * w * a * c * e;
                p.grad_t[0] += rate * w * a * s * e;
                int_p += a * s / w * e;
                int_pt += -rate * a * s / w * e;
            }
        }
        let u = FieldDerivs {
            v: (self.b * int_p - self.q * y) / self.k_nu,
            t: self.b * int_pt / self.k_nu,
            grad: vec![(self.b * p.v - self.q) / self.k_nu],
            hess: vec![self.b * p.grad[0] / self.k_nu],
            grad_t: vec![self.b * p.t / self.k_nu],
        };
        (p, u)
    }
}

/// `(p̄, ū)` with the preset's material and an explicit truncation.
pub fn terzaghi_series(y: f64, t: f64, preset: &Terzaghi, terms: usize) -> Result<(f64, f64), Error> {
    Ok(TerzaghiSeries::new(preset, terms)?.eval(y, t))
}

/// Fields `p` and `u` on an `n_y × n_t` grid of `[0,1]²`.
pub fn terzaghi_table(preset: &Terzaghi, n_y: usize, n_t: usize, terms: usize) -> Result<FieldTable, Error> {
    let s = TerzaghiSeries::new(preset, terms)?;
    let mut tab = FieldTable::new(
        Benchmark::Terzaghi,
        vec![Axis::uniform("y", 0.0, 1.0, n_y)],
        Axis::uniform("t", 0.0, 1.0, n_t).points,
        &["p", "u"],
    );
    for ti in 0..n_t {
        let t = tab.times[ti];
        for k in 0..n_y {
            let (p, u) = s.eval(tab.axes[0].points[k], t);
            tab.set(0, ti, k, p);
            tab.set(1, ti, k, u);
        }
    }
    tab.meta.push(("terms".into(), terms.to_string()));
    tab.meta.push(("diffusivity".into(), crate::fmt17(s.c)));
    Ok(tab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{Coeffs, Physics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_and_long_time_limits() {
        let p = Terzaghi::default();
        let s = TerzaghiSeries::new(&p, 200).unwrap();
        for &t in &[1e-3, 0.1, 0.5, 1.0] {
            assert!(s.eval(1.0, t).0.abs() < 1e-12);
        }
        assert!(s.eval(0.3, 50.0).0.abs() < 1e-12);
        assert!(TerzaghiSeries::new(&p, 0).is_err());
        assert!((s.eval(0.5, 0.0).0 - 0.99952).abs() < 1e-5);
    }

    #[test]
    fn series_satisfies_column_equations() {
        let pre = Terzaghi::default();
        let s = TerzaghiSeries::new(&pre, 200).unwrap();
        let ph = Physics::new(&pre.scales, &pre.mat).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (y, t) = (r.gen_range(0.0..1.0), r.gen_range(0.01..1.0));
            let (p, u) = s.derivs(y, t);
            let (rf, rm) = ph.terzaghi_residuals(&p, &u, &Coeffs::unit());
            assert!(rf.abs() < 1e-3 && rm.abs() < 1e-3, "{y} {t} {rf} {rm}");
        }
        // traction at the top and fixed base
        let (p, u) = s.derivs(1.0, 0.3);
        assert!((s.k_nu * u.grad[0] - s.b * p.v + s.q).abs() < 1e-12);
        assert_eq!(s.derivs(0.0, 0.3).1.v, 0.0);
    }

    #[test]
    fn truncation_error_decays() {
        let pre = Terzaghi::default();
        let (y, t) = (0.4, 0.02);
        let mut prev = f64::INFINITY;
        let mut last = terzaghi_series(y, t, &pre, 2).unwrap().0;
        for n in [4, 8, 16, 32] {
            let v = terzaghi_series(y, t, &pre, n).unwrap().0;
            let d = (v - last).abs();
            assert!(d < prev, "{n}: {d} !< {prev}");
            prev = d;
            last = v;
        }
    }
}
