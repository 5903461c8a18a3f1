//! Double-sine modal solution of the injection/production problem.
//!
//! Pressure and volumetric strain share the modes `sin(nπx̄) sin(qπȳ)`; for
//! the incompressible medium `ε̄_v = b p̄ / (K̄_dr(1+2c_ν))` and each modal
//! amplitude obeys `a P' + (k̄/μ̄) λ_nq P = F_nq sin(2πt̄)` with
//! `a = b² D* / (K̄_dr(1+2c_ν))`. Displacement is the gradient of the
//! potential whose Laplacian is `ε̄_v`, which makes the momentum balance
//! hold exactly. Time is the network time `t̄ = t̂ / 2π`.

use std::f64::consts::PI;

use super::table::{Axis, FieldTable};
use crate::physics::presets::{BarryMercer, Benchmark};
use crate::physics::{compute_groups, FieldDerivs};
use crate::Error;

const OMEGA: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq)]
pub struct BarryMercerSeries {
    pub modes: usize,
    /// `b/(K̄_dr(1+2c_ν))`, strain per unit pressure
    strain: f64,
    /// modal decay rates `c_nq`, row-major `n × q`
    rate: Vec<f64>,
    /// modal forcing amplitudes `F_nq / a`
    amp: Vec<f64>,
    /// estimated relative truncation error
    pub truncation: f64,
}

/// Basis value and first two derivatives of `sin(wx)` or `cos(wx)`.
fn basis(w: f64, x: f64, cosine: bool) -> [f64; 3] {
    let (s, c) = (w * x).sin_cos();
    if cosine {
        [c, -w * s, -w * w * c]
    } else {
        [s, w * c, -w * w * s]
    }
}

impl BarryMercerSeries {
    pub fn new(preset: &BarryMercer, modes: usize) -> Result<Self, Error> {
        if modes < 1 {
            return Err(Error::Config("modal truncation must be at least 1".into()));
        }
        let g = compute_groups(&preset.scales, &preset.mat)?;
        let s = &preset.scales;
        let b = preset.mat.b;
        let k_nu = g.k_dr_bar * (1.0 + 2.0 * preset.mat.c_nu());
        let a = b * b * g.d_star / k_nu;
        let mob = g.k_bar / g.mu_w;
        let scale = preset.beta * s.mu * s.x * s.x / (s.k * s.p);
        let alpha = preset.alpha / s.x;
        let (x0, y0) = (preset.well.0 / s.x, preset.well.1 / s.x);
        let proj = |n: usize, x0: f64| {
            let w = n as f64 * PI;
            (w * x0).sin() * (-(w * alpha / 2.0).powi(2)).exp()
        };
        let mut rate = Vec::with_capacity(modes * modes);
        let mut amp = Vec::with_capacity(modes * modes);
        for n in 1..=modes {
            for q in 1..=modes {
                let lam = PI * PI * ((n * n + q * q) as f64);
                rate.push(mob * lam / a);
                amp.push(8.0 * scale * proj(n, x0) * proj(q, y0) / a);
            }
        }
        let tail = (-(modes as f64 * PI * alpha / 2.0).powi(2)).exp();
        if tail > 1e-6 {
            log::warn!("{modes} modes under-resolve the well width; estimated relative truncation error {tail:.1e}");
        }
        Ok(Self {
            modes,
            strain: b / k_nu,
            rate,
            amp,
            truncation: tail,
        })
    }

    /// Modal pressure amplitude and its rate at time `t̄`.
    fn amplitude(&self, m: usize, t: f64) -> (f64, f64) {
        let (c, a) = (self.rate[m], self.amp[m]);
        let d = c * c + OMEGA * OMEGA;
        let (s, co) = (OMEGA * t).sin_cos();
        let e = (-c * t).exp();
        (
            a * (c * s - OMEGA * co + OMEGA * e) / d,
            a * (c * OMEGA * co + OMEGA * OMEGA * s - c * OMEGA * e) / d,
        )
    }

    /// `(p̄, ū_x, ū_y)` at a point.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64, f64) {
        let n = self.modes;
        let sx: Vec<(f64, f64)> = (1..=n).map(|i| (i as f64 * PI * x).sin_cos()).collect();
        let sy: Vec<(f64, f64)> = (1..=n).map(|i| (i as f64 * PI * y).sin_cos()).collect();
        let (mut p, mut ux, mut uy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (mut rp, mut rx, mut ry) = (0.0, 0.0, 0.0);
            let wn = (i + 1) as f64 * PI;
            for j in 0..n {
                let m = i * n + j;
                let (a, _) = self.amplitude(m, t);
                let wq = (j + 1) as f64 * PI;
                let pot = -self.strain * a / (wn * wn + wq * wq);
                rp += a * sy[j].0;
                rx += pot * sy[j].0;
                ry += pot * wq * sy[j].1;
            }
            p += rp * sx[i].0;
            ux += rx * wn * sx[i].1;
            uy += ry * sx[i].0;
        }
        (p, ux, uy)
    }

    /// Values and derivatives of `(p̄, ū_x, ū_y)`.
    pub fn derivs(&self, x: f64, y: f64, t: f64) -> [FieldDerivs<f64>; 3] {
        let n = self.modes;
        let mut out: [FieldDerivs<f64>; 3] = std::array::from_fn(|_| FieldDerivs::constant(0.0, 2));
        for i in 0..n {
            let wn = (i + 1) as f64 * PI;
            let (xs, xc) = (basis(wn, x, false), basis(wn, x, true));
            for j in 0..n {
                let wq = (j + 1) as f64 * PI;
                let (ys, yc) = (basis(wq, y, false), basis(wq, y, true));
                let (a, da) = self.amplitude(i * n + j, t);
                let pot = -self.strain / (wn * wn + wq * wq);
                // (amplitude factor, x basis, y basis) per field
                let parts = [(1.0, &xs, &ys), (pot * wn, &xc, &ys), (pot * wq, &xs, &yc)];
                for (f, &(k, bx, by)) in out.iter_mut().zip(parts.iter()) {
                    let (v, vt) = (k * a, k * da);
                    f.v += v * bx[0] * by[0];
                    f.t += vt * bx[0] * by[0];
                    f.grad[0] += v * bx[1] * by[0];
                    f.grad[1] += v * bx[0] * by[1];
                    f.hess[0] += v * bx[2] * by[0];
                    f.hess[1] += v * bx[1] * by[1];
                    f.hess[3] += v * bx[0] * by[2];
                    f.grad_t[0] += vt * bx[1] * by[0];
                    f.grad_t[1] += vt * bx[0] * by[1];
                }
            }
        }
        for f in out.iter_mut() {
            f.hess[2] = f.hess[1];
        }
        out
    }
}

/// Fields `p`, `ux`, `uy` on an `n_x × n_y × n_t` grid.
pub fn barry_mercer_table(
    preset: &BarryMercer,
    n_xy: usize,
    n_t: usize,
    modes: usize,
) -> Result<FieldTable, Error> {
    let s = BarryMercerSeries::new(preset, modes)?;
    let mut tab = FieldTable::new(
        Benchmark::BarryMercer,
        vec![Axis::uniform("x", 0.0, 1.0, n_xy), Axis::uniform("y", 0.0, 1.0, n_xy)],
        Axis::uniform("t", 0.0, 1.0, n_t).points,
        &["p", "ux", "uy"],
    );
    for ti in 0..n_t {
        let t = tab.times[ti];
        for k in 0..tab.space_len() {
            let c = tab.coords(k);
            let (p, ux, uy) = s.eval(c[0], c[1], t);
            tab.set(0, ti, k, p);
            tab.set(1, ti, k, ux);
            tab.set(2, ti, k, uy);
        }
    }
    tab.meta.push(("modes".into(), format!("{modes}x{modes}")));
    tab.meta.push(("truncation".into(), format!("{:.3e}", s.truncation)));
    Ok(tab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::residuals::bm_source;
    use crate::physics::{Coeffs, Physics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edges_have_zero_pressure() {
        let s = BarryMercerSeries::new(&BarryMercer::default(), 32).unwrap();
        for &(x, y) in &[(0.0, 0.3), (1.0, 0.7), (0.2, 0.0), (0.9, 1.0)] {
            assert!(s.eval(x, y, 0.37).0.abs() < 1e-12);
        }
        assert!(BarryMercerSeries::new(&BarryMercer::default(), 0).is_err());
    }

    #[test]
    fn eval_matches_derivs() {
        let s = BarryMercerSeries::new(&BarryMercer::default(), 16).unwrap();
        let (p, ux, uy) = s.eval(0.3, 0.6, 0.4);
        let d = s.derivs(0.3, 0.6, 0.4);
        assert!((p - d[0].v).abs() < 1e-12 && (ux - d[1].v).abs() < 1e-12 && (uy - d[2].v).abs() < 1e-12);
        // time derivative against a central difference
        let h = 1e-6;
        let fd = (s.eval(0.3, 0.6, 0.4 + h).0 - s.eval(0.3, 0.6, 0.4 - h).0) / (2.0 * h);
        assert!((fd - d[0].t).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn periodic_after_transients() {
        let s = BarryMercerSeries::new(&BarryMercer::default(), 32).unwrap();
        let a = s.eval(0.25, 0.75, 6.3).0;
        let b = s.eval(0.25, 0.75, 7.3).0;
        assert!((a - b).abs() < 1e-9 * a.abs().max(1e-3));
    }

    #[test]
    fn modal_fields_satisfy_balance_equations() {
        let pre = BarryMercer::default();
        let s = BarryMercerSeries::new(&pre, 64).unwrap();
        let ph = Physics::new(&pre.scales, &pre.mat).unwrap();
        let c = Coeffs::unit();
        let mut r = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let (x, y, t) = (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..1.0));
            let [p, ux, uy] = s.derivs(x, y, t);
            let sv = ph.bm_sigma_v_rate(&ux, &uy, &p.t, &c);
            let f = bm_source(&pre, x, y, 2.0 * PI * t);
            let (rf, rx, ry) = ph.bm_residuals(&p, &ux, &uy, &sv, &f, &c);
            assert!(rf.abs() < 1e-2 && rx.abs() < 1e-9 && ry.abs() < 1e-9, "{rf} {rx} {ry}");
        }
    }
}
