//! Implicit finite-difference solution of the unsaturated stratum.
//!
//! Unknowns per node are `(p̄_c, T̄)`. With a traction-free top and a fixed
//! base the one-dimensional momentum balance integrates to
//! `K̄(1+2c_ν) ε̄_v = b(ΣSp̄ − ΣSp̄₀) + β̄_s K̄ N_T (T̄ − T̄₀)`, which removes the
//! displacement from the flow equation. Backward Euler in time, central
//! differences on a uniform vertex grid, Newton per step with a
//! finite-difference block-tridiagonal Jacobian.

use super::table::{cubic_deriv_weights, linear_weights, Axis, FieldTable};
use crate::physics::closures::storage_matrix;
use crate::physics::presets::{Benchmark, Stratum};
use crate::physics::{FieldDerivs, Physics, ScaledRetention};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumFd {
    pub nodes: usize,
    pub steps: usize,
    /// end of the geometric start-up phase; beyond it `Δt ∝ t̄²`
    pub graded_from: f64,
    /// Newton tolerance on the update, relative to the state
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StratumFd {
    fn default() -> Self {
        Self {
            nodes: 201,
            steps: 4000,
            graded_from: 0.1,
            tol: 1e-10,
            max_iter: 30,
        }
    }
}

impl StratumFd {
    /// Time levels on `[0, 1]`. A quarter of the steps grow geometrically from
    /// `1e-4 t̄_g` to `t̄_g`, the rest keep `1/t̄` evenly spaced, so the step
    /// shrinks where the top boundary layer is young.
    pub fn time_levels(&self) -> Vec<f64> {
        let tg = self.graded_from;
        let n1 = (self.steps / 4).max(2);
        let n2 = self.steps - n1;
        let mut t = Vec::with_capacity(self.steps + 1);
        t.push(0.0);
        let r = 1e4f64.powf(1.0 / (n1 - 1) as f64);
        for k in 1..=n1 {
            t.push(tg * r.powi(k as i32 - n1 as i32));
        }
        for k in 1..=n2 {
            let s = k as f64 / n2 as f64;
            t.push(1.0 / ((1.0 - s) / tg + s));
        }
        *t.last_mut().unwrap() = 1.0;
        t
    }
}

/// Solution at every time step; `y` runs from the base (0) to the top (1).
#[derive(Debug, Clone, PartialEq)]
pub struct StratumSolution {
    pub y: Vec<f64>,
    pub times: Vec<f64>,
    pub pc: Vec<Vec<f64>>,
    pub temp: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

struct Model {
    ph: Physics,
    ret: ScaledRetention,
    pc0: f64,
    t0: f64,
    sp0: f64,
    k_star: f64,
    h: f64,
}

impl Model {
    fn new(p: &Stratum, nodes: usize) -> Result<Self, Error> {
        let ph = Physics::new(&p.scales, &p.mat)?;
        let ret = ScaledRetention {
            bc: p.bc,
            p_scale: p.scales.p,
        };
        let pc0 = p.pc_init / p.scales.p;
        Ok(Self {
            ph,
            ret,
            pc0,
            t0: p.temp_init / p.scales.temp,
            sp0: ret.s_w(&pc0) * pc0,
            k_star: p.scales.k_dr,
            h: 1.0 / (nodes - 1) as f64,
        })
    }

    fn eps(&self, pc: f64, t: f64) -> f64 {
        let g = &self.ph.groups;
        let kd = g.k_dr_bar;
        let b = self.ph.mat.b;
        (-b * (self.ret.s_w(&pc) * pc - self.sp0) + g.beta_s * kd * g.n_t * (t - self.t0))
            / (kd * (1.0 + 2.0 * self.ph.c_nu()))
    }

    /// Residuals at node `i` given new and old states (interleaved
    /// `p̄_c, T̄`) and the Dirichlet top values.
    fn node(&self, z: &[f64], zo: &[f64], i: usize, dt: f64, top: (f64, f64)) -> [f64; 2] {
        let n = z.len() / 2;
        let (p, t) = (z[2 * i], z[2 * i + 1]);
        if i + 1 == n {
            return [p - top.0, t - top.1];
        }
        let g = &self.ph.groups;
        let m = &self.ph.mat;
        let b = m.b;
        let (kb, kd, lam) = (g.k_bar, g.k_dr_bar, g.lambda_bar);
        let (po, to) = (zo[2 * i], zo[2 * i + 1]);
        let (pl, tl) = if i == 0 { (z[2], z[3]) } else { (z[2 * i - 2], z[2 * i - 1]) };
        let (pr, tr) = (z[2 * i + 2], z[2 * i + 3]);
        let h = self.h;

        let s = self.ret.s_w(&p);
        let ds = self.ret.ds_w(&p);
        let krw = |q: f64| self.ret.k_rw(&q);
        let (k_c, k_l, k_r) = (krw(p), krw(pl), krw(pr));
        let dp = (p - po) / dt;
        let dtemp = (t - to) / dt;
        let deps = (self.eps(p, t) - self.eps(po, to)) / dt;
        let sv = kd * deps + b * s * dp - g.beta_s * kd * g.n_t * dtemp;
        let n_ww = storage_matrix(m, &s, &(ds / self.ret.p_scale), self.k_star).ww;
        let mob = g.mu_w / kb;
        let div = (0.5 * (k_c + k_r) * (pr - p) - 0.5 * (k_c + k_l) * (p - pl)) / (h * h);
        let r_flow = -mob * (n_ww + b * b * s * s / kd) * g.d_star * dp + mob * b * s / kd * g.d_star * sv
            - mob * m.phi * s * (g.beta_w - g.beta_s) * g.q_star * dtemp
            + div;

        let pc_y = (pr - pl) / (2.0 * h);
        let t_y = (tr - tl) / (2.0 * h);
        let t_yy = (tr - 2.0 * t + tl) / (h * h);
        let r_heat = self.ph.h_star(&s) * dtemp + g.j_star * g.rho_w * g.cap_w * k_c * kb / g.mu_w * pc_y * t_y
            - g.f_star * lam * t_yy;
        [r_flow, r_heat]
    }

    fn residual(&self, z: &[f64], zo: &[f64], dt: f64, top: (f64, f64)) -> Vec<f64> {
        let n = z.len() / 2;
        let mut r = Vec::with_capacity(2 * n);
        for i in 0..n {
            r.extend_from_slice(&self.node(z, zo, i, dt, top));
        }
        r
    }
}

type Block = [[f64; 2]; 2];

fn inv(b: &Block) -> Block {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]]
}

fn mul(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

fn mulv(a: &Block, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Solves the block-tridiagonal system `sub_i x_{i-1} + diag_i x_i + sup_i x_{i+1} = rhs_i`.
fn block_thomas(sub: &[Block], diag: &[Block], sup: &[Block], rhs: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = diag.len();
    let mut dp = Vec::with_capacity(n);
    let mut rp = Vec::with_capacity(n);
    let mut inv_d: Vec<Block> = Vec::with_capacity(n);
    for i in 0..n {
        let (d, r) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            let f = mul(&sub[i], &inv_d[i - 1]);
            let fc = mul(&f, &sup[i - 1]);
            let fr = mulv(&f, rp[i - 1]);
            (
                std::array::from_fn(|a| std::array::from_fn(|b| diag[i][a][b] - fc[a][b])),
                [rhs[i][0] - fr[0], rhs[i][1] - fr[1]],
            )
        };
        inv_d.push(inv(&d));
        dp.push(d);
        rp.push(r);
    }
    let mut x = vec![[0.0; 2]; n];
    x[n - 1] = mulv(&inv_d[n - 1], rp[n - 1]);
    for i in (0..n - 1).rev() {
        let c = mulv(&sup[i], x[i + 1]);
        x[i] = mulv(&inv_d[i], [rp[i][0] - c[0], rp[i][1] - c[1]]);
    }
    x
}

/// Solves the stratum problem over `t̄ ∈ [0, 1]`.
pub fn thm_forward_fd(preset: &Stratum, fd: &StratumFd) -> Result<StratumSolution, Error> {
    if fd.nodes < 5 || fd.steps < 8 || !(fd.graded_from > 0.0 && fd.graded_from < 1.0) {
        return Err(Error::Config(
            "finite-difference grid needs at least 5 nodes, 8 steps and a grading point inside (0, 1)".into(),
        ));
    }
    let model = Model::new(preset, fd.nodes)?;
    let n = fd.nodes;
    let levels = fd.time_levels();
    let top = (preset.pc_top / preset.scales.p, preset.temp_top / preset.scales.temp);
    let mut z: Vec<f64> = (0..n).flat_map(|_| [model.pc0, model.t0]).collect();
    let y = Axis::uniform("y", 0.0, 1.0, n).points;
    let mut sol = StratumSolution {
        y,
        times: Vec::with_capacity(fd.steps + 1),
        pc: Vec::new(),
        temp: Vec::new(),
        eps: Vec::new(),
        u: Vec::new(),
    };
    let record = |sol: &mut StratumSolution, z: &[f64], t: f64| {
        let pc: Vec<f64> = (0..n).map(|i| z[2 * i]).collect();
        let temp: Vec<f64> = (0..n).map(|i| z[2 * i + 1]).collect();
        let eps: Vec<f64> = (0..n).map(|i| model.eps(pc[i], temp[i])).collect();
        let mut u = vec![0.0; n];
        for i in 1..n {
            u[i] = u[i - 1] + 0.5 * model.h * (eps[i] + eps[i - 1]);
        }
        sol.times.push(t);
        sol.pc.push(pc);
        sol.temp.push(temp);
        sol.eps.push(eps);
        sol.u.push(u);
    };
    record(&mut sol, &z, 0.0);

    for step in 1..=fd.steps {
        let t = levels[step];
        let dt = t - levels[step - 1];
        let zo = z.clone();
        z[2 * (n - 1)] = top.0;
        z[2 * (n - 1) + 1] = top.1;
        let mut converged = false;
        let mut last = f64::INFINITY;
        for it in 0..fd.max_iter {
            let r = model.residual(&z, &zo, dt, top);
            let mut sub = vec![[[0.0; 2]; 2]; n];
            let mut diag = vec![[[0.0; 2]; 2]; n];
            let mut sup = vec![[[0.0; 2]; 2]; n];
            for color in 0..3 {
                for v in 0..2 {
                    let mut zp = z.clone();
                    let mut hs = vec![0.0; n];
                    for j in (color..n).step_by(3) {
                        let k = 2 * j + v;
                        hs[j] = 1e-7 * z[k].abs().max(1.0);
                        zp[k] += hs[j];
                    }
                    let rp = model.residual(&zp, &zo, dt, top);
                    for j in (color..n).step_by(3) {
                        for i in j.saturating_sub(1)..(j + 2).min(n) {
                            for e in 0..2 {
                                let d = (rp[2 * i + e] - r[2 * i + e]) / hs[j];
                                match i as isize - j as isize {
                                    0 => diag[i][e][v] = d,
                                    1 => sub[i][e][v] = d,
                                    _ => sup[i][e][v] = d,
                                }
                            }
                        }
                    }
                }
            }
            let rhs: Vec<[f64; 2]> = (0..n).map(|i| [-r[2 * i], -r[2 * i + 1]]).collect();
            let dx = block_thomas(&sub, &diag, &sup, &rhs);
            let mut upd: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for i in 0..n {
                for e in 0..2 {
                    z[2 * i + e] += dx[i][e];
                    upd = upd.max(dx[i][e].abs());
                    scale = scale.max(z[2 * i + e].abs());
                }
            }
            last = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if !upd.is_finite() {
                break;
            }
            if upd <= fd.tol * scale {
                converged = true;
                log::trace!("step {step}: newton converged in {} iterations", it + 1);
                break;
            }
        }
        if !converged || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Newton {
                step,
                t,
                residual: last,
                iters: fd.max_iter,
            });
        }
        record(&mut sol, &z, t);
    }
    Ok(sol)
}

impl StratumSolution {
    /// Fields `pc`, `u`, `T` at every node and `n_t` evenly spaced times.
    pub fn to_table(&self, n_t: usize) -> Result<FieldTable, Error> {
        let mut tab = FieldTable::new(
            Benchmark::Stratum,
            vec![Axis::new("y", self.y.clone())],
            Axis::uniform("t", 0.0, 1.0, n_t).points,
            &["pc", "u", "T"],
        );
        for ti in 0..n_t {
            let (a, b, w) = linear_weights(&self.times, tab.times[ti])?;
            for k in 0..self.y.len() {
                let lerp = |f: &Vec<Vec<f64>>| (1.0 - w) * f[a][k] + w * f[b][k];
                tab.set(0, ti, k, lerp(&self.pc));
                tab.set(1, ti, k, lerp(&self.u));
                tab.set(2, ti, k, lerp(&self.temp));
            }
        }
        tab.meta.push(("nodes".into(), self.y.len().to_string()));
        tab.meta.push(("steps".into(), (self.times.len() - 1).to_string()));
        Ok(tab)
    }

    /// Values and derivatives of `(ū, p̄_c, T̄)` at `(ȳ, t̄)`: cubic in
    /// space, linear in time.
    pub fn derivs(&self, y: f64, t: f64) -> Result<[FieldDerivs<f64>; 3], Error> {
        let (mut a, mut b, mut w) = linear_weights(&self.times, t)?;
        // on a time level use the step that ends there, as the scheme does
        if a == b || w == 0.0 {
            if a == 0 {
                b = 1;
                w = 0.0;
            } else {
                b = a;
                a -= 1;
                w = 1.0;
            }
        }
        let dt = self.times[b] - self.times[a];
        let (i0, [w0, w1, w2]) = cubic_deriv_weights(&self.y, y)?;
        let fields = [&self.u, &self.pc, &self.temp];
        Ok(fields.map(|f| {
            let at = |lvl: usize, ws: &[f64]| ws.iter().enumerate().map(|(k, c)| c * f[lvl][i0 + k]).sum::<f64>();
            let v = (1.0 - w) * at(a, &w0) + w * at(b, &w0);
            let dy = (1.0 - w) * at(a, &w1) + w * at(b, &w1);
            let dyy = (1.0 - w) * at(a, &w2) + w * at(b, &w2);
            FieldDerivs::line(
                v,
                (at(b, &w0) - at(a, &w0)) / dt,
                dy,
                dyy,
                (at(b, &w1) - at(a, &w1)) / dt,
            )
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_thomas_solves_a_random_system() {
        let n = 7;
        let b = |i: usize, s: f64| -> Block { [[4.0 + s + i as f64, 0.3 * s], [-0.2, 3.0 + 0.1 * i as f64]] };
        let sub: Vec<Block> = (0..n).map(|i| if i == 0 { [[0.0; 2]; 2] } else { [[0.5, 0.1], [0.2, -0.4]] }).collect();
        let sup: Vec<Block> = (0..n).map(|i| if i + 1 == n { [[0.0; 2]; 2] } else { [[-0.3, 0.2], [0.1, 0.6]] }).collect();
        let diag: Vec<Block> = (0..n).map(|i| b(i, 1.0)).collect();
        let x: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 - 2.0, 0.5 * i as f64]).collect();
        let rhs: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let mut r = mulv(&diag[i], x[i]);
                if i > 0 {
                    let s = mulv(&sub[i], x[i - 1]);
                    r = [r[0] + s[0], r[1] + s[1]];
                }
                if i + 1 < n {
                    let s = mulv(&sup[i], x[i + 1]);
                    r = [r[0] + s[0], r[1] + s[1]];
                }
                r
            })
            .collect();
        let got = block_thomas(&sub, &diag, &sup, &rhs);
        for (g, e) in got.iter().zip(&x) {
            assert!((g[0] - e[0]).abs() < 1e-12 && (g[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_state_is_uniform() {
        let p = Stratum::default();
        let sol = thm_forward_fd(&p, &StratumFd { nodes: 21, steps: 8, ..Default::default() }).unwrap();
        assert!(sol.pc[0].iter().all(|&v| v == 2.0));
        assert!(sol.temp[0].iter().all(|&v| (v - 10.0 / 15.0).abs() < 1e-15));
        assert!(sol.u[0].iter().all(|&v| v == 0.0));
        assert_eq!(sol.times.len(), 9);
    }

    fn reference() -> &'static StratumSolution {
        static SOL: std::sync::OnceLock<StratumSolution> = std::sync::OnceLock::new();
        SOL.get_or_init(|| thm_forward_fd(&Stratum::default(), &StratumFd::default()).unwrap())
    }

    #[test]
    fn insulated_base_reaches_top_temperature() {
        let mut p = Stratum::default();
        p.scales.t *= 100.0;
        let sol = thm_forward_fd(&p, &StratumFd { nodes: 41, steps: 400, ..Default::default() }).unwrap();
        let last = sol.temp.len() - 1;
        for (&v, &pc) in sol.temp[last].iter().zip(&sol.pc[last]) {
            assert!((v * 15.0 - 25.0).abs() < 1e-3, "{}", v * 15.0);
            assert!((pc - 3.0).abs() < 1e-3, "{pc}");
        }
    }

    #[test]
    fn newton_failure_is_reported() {
        let fd = StratumFd { nodes: 21, steps: 8, max_iter: 1, ..Default::default() };
        match thm_forward_fd(&Stratum::default(), &fd) {
            Err(Error::Newton { step: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(thm_forward_fd(&Stratum::default(), &StratumFd { nodes: 3, ..fd }).is_err());
    }

    #[test]
    fn refinement_changes_sensor_values_by_under_one_percent() {
        let coarse = thm_forward_fd(&Stratum::default(), &StratumFd { nodes: 101, steps: 2000, ..Default::default() })
            .unwrap()
            .to_table(101)
            .unwrap();
        let fine = reference().to_table(101).unwrap();
        for f in 0..3 {
            for y in [0.25, 0.5, 0.75] {
                let a: Vec<f64> = fine.times.iter().map(|&t| fine.sample(f, &[y], t).unwrap()).collect();
                let b: Vec<f64> = fine.times.iter().map(|&t| coarse.sample(f, &[y], t).unwrap()).collect();
                let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let d = a.iter().zip(&b).fold(0.0f64, |m, (x, z)| m.max((x - z).abs()));
                assert!(d < 0.01 * scale, "field {f} at {y}: {d} vs {scale}");
            }
        }
    }

    #[test]
    fn fields_satisfy_balance_equations() {
        let p = Stratum::default();
        let sol = reference();
        let ph = Physics::new(&p.scales, &p.mat).unwrap();
        let ret = ScaledRetention { bc: p.bc, p_scale: p.scales.p };
        let c = crate::physics::Coeffs::unit();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst = [0.0f64; 3];
        for _ in 0..500 {
            let (y, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.1..1.0));
            let [u, pc, temp] = sol.derivs(y, t).unwrap();
            let sv = ph.thm_sigma_v_rate(&ret, &u, &pc, &temp, &c);
            let (a, b, h) = ph.thm_residuals(&ret, &u, &pc, &temp, &sv, &c);
            for (w, r) in worst.iter_mut().zip([a, b, h]) {
                *w = w.max(r.abs());
            }
        }
        assert!(worst.iter().all(|&w| w < 5e-2), "{worst:?}");
    }
}
