//! Dimensionless PDE residuals: the general momentum, mass and energy
//! balances, and their specializations for the three benchmarks.
//!
//! Every function is generic over [`Scalar`], so the same formula is used
//! with plain reals (oracle checks), jets and graph nodes (training).

use std::f64::consts::PI;

use super::closures::{storage_matrix, ScaledRetention, StorageMatrix};
use super::{compute_groups, DimensionlessGroups, MaterialRecord, ScaleSet, TrainableCoeffs};
use crate::autodiff::Scalar;
use crate::Error;

/// Value and derivatives of one scalar field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDerivs<S> {
    pub v: S,
    pub t: S,
    pub grad: Vec<S>,
    /// second spatial derivatives, row-major `dim × dim`
    pub hess: Vec<S>,
    /// mixed space-time derivatives `∂²/∂x_i∂t`
    pub grad_t: Vec<S>,
}

impl<S: Scalar> FieldDerivs<S> {
    /// A field constant in space and time.
    pub fn constant(v: S, dim: usize) -> Self {
        let z = v.lift(0.0);
        Self {
            t: z.clone(),
            grad: vec![z.clone(); dim],
            hess: vec![z.clone(); dim * dim],
            grad_t: vec![z; dim],
            v,
        }
    }

    /// One-dimensional field along `ȳ`.
    pub fn line(v: S, t: S, y: S, yy: S, yt: S) -> Self {
        Self {
            v,
            t,
            grad: vec![y],
            hess: vec![yy],
            grad_t: vec![yt],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn h(&self, i: usize, j: usize) -> S {
        self.hess[i * self.dim() + j].clone()
    }

    pub fn laplacian(&self) -> S {
        let mut s = self.h(0, 0);
        for i in 1..self.dim() {
            s = s + self.h(i, i);
        }
        s
    }
}

/// Trainable coefficients in whatever scalar context the residual is built.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs<S> {
    pub k: S,
    pub k_dr: S,
    pub lambda: S,
}

impl Coeffs<f64> {
    pub fn unit() -> Self {
        Self {
            k: 1.0,
            k_dr: 1.0,
            lambda: 1.0,
        }
    }

    pub fn from_trainable(c: &TrainableCoeffs) -> Self {
        Self {
            k: c.k(),
            k_dr: c.k_dr(),
            lambda: c.lambda(),
        }
    }
}

/// State of one fluid phase at a point. Saturation and relative permeability
/// are passed with their spatial gradients; fluid properties are normalized.
#[derive(Debug, Clone)]
pub struct Phase<S> {
    pub s: S,
    pub s_grad: Vec<S>,
    pub kr: S,
    pub kr_grad: Vec<S>,
    pub p: FieldDerivs<S>,
    pub mu: f64,
    pub rho: f64,
    pub cap: f64,
    pub beta: f64,
}

/// Material record together with its dimensionless groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub mat: MaterialRecord,
    pub groups: DimensionlessGroups,
}

impl Physics {
    pub fn new(scales: &ScaleSet, mat: &MaterialRecord) -> Result<Self, Error> {
        Ok(Self {
            mat: *mat,
            groups: compute_groups(scales, mat)?,
        })
    }

    pub fn c_nu(&self) -> f64 {
        self.mat.c_nu()
    }

    /// Unit gravity direction: downward along the last axis.
    fn gravity(&self, dim: usize, i: usize) -> f64 {
        if i + 1 == dim {
            -1.0
        } else {
            0.0
        }
    }

    /// Single-phase storage `N̄ = K*_dr / M`.
    pub fn single_phase_storage<S: Scalar>(&self, like: &S) -> StorageMatrix<S> {
        let n = like.lift(1.0 / self.groups.m_bar);
        let z = like.lift(0.0);
        StorageMatrix {
            nn: z.clone(),
            nw: z.clone(),
            ww: n,
            beta_sw: z.clone(),
            beta_sn: z,
        }
    }

    /// Linear momentum balance, one component per spatial axis. `u` holds
    /// the displacement components.
    pub fn momentum_residual_general<S: Scalar>(
        &self,
        u: &[FieldDerivs<S>],
        phases: &[Phase<S>],
        temp: &FieldDerivs<S>,
        c: &Coeffs<S>,
    ) -> Vec<S> {
        let dim = u.len();
        let g = &self.groups;
        let cn = self.c_nu();
        let b = self.mat.b;
        let phi = self.mat.phi;
        let mut rho_b = c.k_dr.lift((1.0 - phi) * g.rho_s);
        for ph in phases {
            rho_b = rho_b + ph.s.clone() * (phi * ph.rho);
        }
        (0..dim)
            .map(|i| {
                let mut d_div = u[0].h(i, 0);
                let mut lap = u[i].h(0, 0);
                for j in 1..dim {
                    d_div = d_div + u[j].h(i, j);
                    lap = lap + u[i].h(j, j);
                }
                // ∇ε_v and ∇(∇·u) coincide for small strains
                let mut r = c.k_dr.clone() * d_div * (1.0 + 0.5 * cn) + c.k_dr.clone() * lap * (1.5 * cn);
                for ph in phases {
                    let d_sp = ph.s_grad[i].clone() * ph.p.v.clone() + ph.s.clone() * ph.p.grad[i].clone();
                    r = r - d_sp * b;
                }
                r = r - c.k_dr.clone() * temp.grad[i].clone() * (g.beta_s * g.n_t);
                r + rho_b.clone() * (g.n_d * self.gravity(dim, i))
            })
            .collect()
    }

    /// Stress increment for a strain increment `d_eps` (`dim × dim`,
    /// row-major), phase pressure increments and a temperature increment.
    /// Returns the full 3×3 tensor and the volumetric part.
    pub fn stress_update<S: Scalar>(
        &self,
        d_eps: &[S],
        saturations: &[S],
        d_p: &[S],
        d_temp: &S,
        c: &Coeffs<S>,
    ) -> ([S; 9], S) {
        let dim = (d_eps.len() as f64).sqrt().round() as usize;
        let zero = d_temp.lift(0.0);
        let mut e3: [S; 9] = std::array::from_fn(|_| zero.clone());
        for i in 0..dim {
            for j in 0..dim {
                e3[i * 3 + j] = d_eps[i * dim + j].clone();
            }
        }
        let eps_v = e3[0].clone() + e3[4].clone() + e3[8].clone();
        let mut p_term = zero.clone();
        for (s, p) in saturations.iter().zip(d_p) {
            p_term = p_term + s.clone() * p.clone();
        }
        let g = &self.groups;
        let iso = c.k_dr.clone() * eps_v.clone() - p_term * self.mat.b
            - c.k_dr.clone() * d_temp.clone() * (g.beta_s * g.n_t);
        let shear = c.k_dr.clone() * (3.0 * self.c_nu());
        let sigma = std::array::from_fn(|k| {
            let (i, j) = (k / 3, k % 3);
            let mut dev = e3[k].clone();
            if i == j {
                dev = dev - eps_v.clone() / 3.0;
            }
            let s = shear.clone() * dev;
            if i == j {
                s + iso.clone()
            } else {
                s
            }
        });
        (sigma, iso)
    }

    /// Normalized Darcy flux of a phase, with the sign convention of the
    /// dimensionless mass balance (along the pressure gradient).
    pub fn darcy_flux<S: Scalar>(&self, ph: &Phase<S>, c: &Coeffs<S>) -> Vec<S> {
        let dim = ph.p.dim();
        let m = c.k.clone() * ph.kr.clone() / ph.mu;
        (0..dim)
            .map(|i| m.clone() * (ph.p.grad[i].clone() - ph.p.v.lift(ph.rho * self.groups.n_d * self.gravity(dim, i))))
            .collect()
    }

    /// `∇·v̄` of a phase.
    fn flux_divergence<S: Scalar>(&self, ph: &Phase<S>, c: &Coeffs<S>) -> S {
        let dim = ph.p.dim();
        let mut s = ph.kr.clone() * ph.p.laplacian();
        for i in 0..dim {
            let drive = ph.p.grad[i].clone() - ph.p.v.lift(ph.rho * self.groups.n_d * self.gravity(dim, i));
            s = s + ph.kr_grad[i].clone() * drive;
        }
        c.k.clone() / ph.mu * s
    }

    /// Mass balance of phase `alpha` (0 = water, 1 = non-wetting). `sigma_v_t`
    /// is the volumetric stress rate and `source` the normalized source `f*`.
    #[allow(clippy::too_many_arguments)]
    pub fn mass_residual_general<S: Scalar>(
        &self,
        alpha: usize,
        phases: &[Phase<S>],
        storage: &StorageMatrix<S>,
        sigma_v_t: &S,
        temp: &FieldDerivs<S>,
        c: &Coeffs<S>,
        source: &S,
    ) -> S {
        let g = &self.groups;
        let b = self.mat.b;
        let pa = &phases[alpha];
        let mut r = sigma_v_t.clone() * pa.s.clone() / c.k_dr.clone() * (b * g.d_star);
        for (k, pk) in phases.iter().enumerate() {
            let coup = pa.s.clone() * pk.s.clone() * (b * b) / c.k_dr.clone();
            r = r + (storage.entry(alpha, k) + coup) * pk.p.t.clone() * g.d_star;
        }
        r = r - pa.s.clone() * temp.t.clone() * (self.mat.phi * (pa.beta - g.beta_s) * g.q_star);
        r - self.flux_divergence(pa, c) - source.clone()
    }

    /// Energy balance; `h_star` is `H*` at the local saturation and
    /// `advecting` the phases whose enthalpy flux is retained.
    pub fn energy_residual_general<S: Scalar>(
        &self,
        temp: &FieldDerivs<S>,
        h_star: &S,
        advecting: &[Phase<S>],
        c: &Coeffs<S>,
        heat_source: &S,
    ) -> S {
        let g = &self.groups;
        let mut r = h_star.clone() * temp.t.clone();
        for ph in advecting {
            let v = self.darcy_flux(ph, c);
            for (vi, ti) in v.into_iter().zip(&temp.grad) {
                // the normalized flux points along +∇p, the physical one along −∇p
                r = r - vi * ti.clone() * (g.j_star * ph.rho * ph.cap);
            }
        }
        r - c.lambda.clone() * temp.laplacian() * g.f_star - heat_source.clone()
    }

    /// `H*` as a function of the local water saturation.
    pub fn h_star<S: Scalar>(&self, s_w: &S) -> S {
        let m = &self.mat;
        let solid = (1.0 - m.phi) * m.rho_s * m.cap_s;
        let w = m.phi * m.rho_w * m.cap_w;
        let n = m.phi * m.rho_g * m.cap_g;
        (s_w.clone() * (w - n) + solid + n) / self.groups.rho_c_ref
    }

    /// Consolidation column: `(r_flow, r_mech)` from pressure and
    /// displacement fields along `ȳ`.
    pub fn terzaghi_residuals<S: Scalar>(&self, p: &FieldDerivs<S>, u: &FieldDerivs<S>, c: &Coeffs<S>) -> (S, S) {
        let g = &self.groups;
        let b = self.mat.b;
        let storage = (c.k_dr.lift(b * b) / c.k_dr.clone() + 1.0 / g.m_bar) * g.d_star;
        let r_flow = storage * p.t.clone() - c.k.clone() / g.mu_w * p.h(0, 0);
        let r_mech = c.k_dr.clone() * u.h(0, 0) * (1.0 + 2.0 * self.c_nu()) - p.grad[0].clone() * b;
        (r_flow, r_mech)
    }

    /// Volumetric stress rate of a single-phase isothermal medium,
    /// `K̄ ε̄_v,t − b p̄_t`.
    pub fn bm_sigma_v_rate<S: Scalar>(&self, ux: &FieldDerivs<S>, uy: &FieldDerivs<S>, p_t: &S, c: &Coeffs<S>) -> S {
        c.k_dr.clone() * (ux.grad_t[0].clone() + uy.grad_t[1].clone()) - p_t.clone() * self.mat.b
    }

    /// Injection/production problem: `(r_flow, r_mech_x, r_mech_y)`.
    pub fn bm_residuals<S: Scalar>(
        &self,
        p: &FieldDerivs<S>,
        ux: &FieldDerivs<S>,
        uy: &FieldDerivs<S>,
        sigma_v_t: &S,
        source: &S,
        c: &Coeffs<S>,
    ) -> (S, S, S) {
        let g = &self.groups;
        let b = self.mat.b;
        let cn = self.c_nu();
        let r_flow = (p.t.clone() * (b * b) + sigma_v_t.clone() * b) / c.k_dr.clone() * g.d_star
            - c.k.clone() / g.mu_w * p.laplacian()
            - source.clone();
        let d_div_x = ux.h(0, 0) + uy.h(0, 1);
        let d_div_y = ux.h(1, 0) + uy.h(1, 1);
        let r_x = c.k_dr.clone() * d_div_x * (1.0 + 0.5 * cn) + c.k_dr.clone() * ux.laplacian() * (1.5 * cn)
            - p.grad[0].clone() * b;
        let r_y = c.k_dr.clone() * d_div_y * (1.0 + 0.5 * cn) + c.k_dr.clone() * uy.laplacian() * (1.5 * cn)
            - p.grad[1].clone() * b;
        (r_flow, r_x, r_y)
    }

    /// Volumetric stress rate of the stratum with constant gas pressure,
    /// `K̄ ε̄_v,t + b S_w p̄_c,t − β̄_s K̄ N_T T̄_t`.
    pub fn thm_sigma_v_rate<S: Scalar>(
        &self,
        ret: &ScaledRetention,
        u: &FieldDerivs<S>,
        pc: &FieldDerivs<S>,
        temp: &FieldDerivs<S>,
        c: &Coeffs<S>,
    ) -> S {
        let g = &self.groups;
        c.k_dr.clone() * u.grad_t[0].clone() + ret.s_w(&pc.v) * pc.t.clone() * self.mat.b
            - c.k_dr.clone() * temp.t.clone() * (g.beta_s * g.n_t)
    }

    /// Unsaturated stratum: `(r_mech, r_flow, r_heat)`. The flow residual is
    /// premultiplied by `μ̄_w/k̄` and only the water flux advects heat.
    pub fn thm_residuals<S: Scalar>(
        &self,
        ret: &ScaledRetention,
        u: &FieldDerivs<S>,
        pc: &FieldDerivs<S>,
        temp: &FieldDerivs<S>,
        sigma_v_t: &S,
        c: &Coeffs<S>,
    ) -> (S, S, S) {
        let g = &self.groups;
        let m = &self.mat;
        let b = m.b;
        let s_w = ret.s_w(&pc.v);
        let ds = ret.ds_w(&pc.v);
        let k_rw = ret.k_rw(&pc.v);
        let dk = ret.dk_rw(&pc.v);
        let pc_y = pc.grad[0].clone();

        let r_mech = c.k_dr.clone() * u.h(0, 0) * (1.0 + 2.0 * self.c_nu())
            + (ds.clone() * pc.v.clone() + s_w.clone()) * pc_y.clone() * b
            - c.k_dr.clone() * temp.grad[0].clone() * (g.beta_s * g.n_t);

        let storage = storage_matrix(m, &s_w, &(ds / ret.p_scale), self.k_star());
        let mob = c.k.lift(g.mu_w) / c.k.clone();
        let n_ww = storage.ww + s_w.square() * (b * b) / c.k_dr.clone();
        let r_flow = -(mob.clone() * n_ww * pc.t.clone() * g.d_star)
            + mob.clone() * s_w.clone() * sigma_v_t.clone() / c.k_dr.clone() * (b * g.d_star)
            - mob * s_w.clone() * temp.t.clone() * (m.phi * (g.beta_w - g.beta_s) * g.q_star)
            + dk * pc_y.square()
            + k_rw.clone() * pc.h(0, 0);

        let r_heat = self.h_star(&s_w) * temp.t.clone()
            + k_rw * c.k.clone() / g.mu_w * pc_y * temp.grad[0].clone() * (g.j_star * g.rho_w * g.cap_w)
            - c.lambda.clone() * temp.h(0, 0) * g.f_star;
        (r_mech, r_flow, r_heat)
    }

    /// `K*_dr` recovered from the groups.
    fn k_star(&self) -> f64 {
        self.mat.k_dr / self.groups.k_dr_bar
    }
}

/// Gaussian approximation of a unit point mass in one coordinate, already
/// multiplied by `x*` so it is dimensionless.
pub fn gaussian_delta(x: f64, alpha: f64) -> f64 {
    (-(x / alpha).powi(2)).exp() / (alpha * PI.sqrt())
}

/// Dimensionless injection/production shape `2 δ(x̄−x̄₀) δ(ȳ−ȳ₀) sin(t̂)`.
pub fn bm_source_shape(x: f64, y: f64, t_hat: f64, well: (f64, f64), alpha: f64) -> f64 {
    2.0 * gaussian_delta(x - well.0, alpha) * gaussian_delta(y - well.1, alpha) * t_hat.sin()
}

/// Normalized source term `f*` at `(x̄, ȳ, t̂)` for the injection problem:
/// the shape scaled by `β μ* x*² / (k* p*)` (with `x* = 1` m here).
pub fn bm_source(preset: &super::presets::BarryMercer, x: f64, y: f64, t_hat: f64) -> f64 {
    let s = &preset.scales;
    let scale = preset.beta * s.mu * s.x * s.x / (s.k * s.p);
    let a = preset.alpha / s.x;
    scale * bm_source_shape(x, y, t_hat, (preset.well.0 / s.x, preset.well.1 / s.x), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_field(r: &mut ChaCha8Rng, dim: usize) -> FieldDerivs<f64> {
        let mut v = || r.gen_range(-1.0..1.0);
        let mut hess = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let h = v();
                hess[i * dim + j] = h;
                hess[j * dim + i] = h;
            }
        }
        FieldDerivs {
            v: v(),
            t: v(),
            grad: (0..dim).map(|_| v()).collect(),
            hess,
            grad_t: (0..dim).map(|_| v()).collect(),
        }
    }

    fn single_phase(p: FieldDerivs<f64>, phys: &Physics) -> Phase<f64> {
        let dim = p.dim();
        Phase {
            s: 1.0,
            s_grad: vec![0.0; dim],
            kr: 1.0,
            kr_grad: vec![0.0; dim],
            p,
            mu: phys.groups.mu_w,
            rho: phys.groups.rho_w,
            cap: phys.groups.cap_w,
            beta: phys.groups.beta_w,
        }
    }

    fn terzaghi() -> Physics {
        let t = presets::Terzaghi::default();
        Physics::new(&t.scales, &t.mat).unwrap()
    }

    fn stratum() -> (Physics, ScaledRetention, presets::Stratum) {
        let s = presets::Stratum::default();
        (
            Physics::new(&s.scales, &s.mat).unwrap(),
            ScaledRetention {
                bc: s.bc,
                p_scale: s.scales.p,
            },
            s,
        )
    }

    #[test]
    fn momentum_manufactured_quadratic() {
        let ph = terzaghi();
        let kd = 1.7;
        let c = Coeffs { k_dr: kd, ..Coeffs::unit() };
        // ū_x = x̄², 1-D
        let u = FieldDerivs::line(0.25, 0.0, 1.0, 2.0, 0.0);
        let r = ph.momentum_residual_general(&[u], &[], &FieldDerivs::constant(0.0, 1), &c);
        let cn = (1.0 - 2.0 * 0.25) / 1.25;
        let expect = kd * 2.0 + 0.5 * cn * kd * 2.0 + 1.5 * cn * kd * 2.0;
        assert!((r[0] - expect).abs() < 1e-14);
        let z = ph.momentum_residual_general(&[FieldDerivs::constant(0.0, 1)], &[], &FieldDerivs::constant(0.0, 1), &c);
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn mass_manufactured_decaying_mode() {
        let mut ph = terzaghi();
        ph.mat.b = 0.0;
        let c = Coeffs { k: 1.3, ..Coeffs::unit() };
        let st = ph.single_phase_storage(&0.0);
        let (x, t) = (0.3, 0.4);
        // p̄ = sin(πx̄) e^(−t̄)
        let v = (PI * x).sin() * (-t).exp();
        let p = FieldDerivs {
            v,
            t: -v,
            grad: vec![PI * (PI * x).cos() * (-t).exp()],
            hess: vec![-PI * PI * v],
            grad_t: vec![0.0],
        };
        let r = ph.mass_residual_general(0, &[single_phase(p, &ph)], &st, &0.0, &FieldDerivs::constant(0.0, 1), &c, &0.0);
        let g = ph.groups;
        let expect = -v * g.d_star / g.m_bar + 1.3 / g.mu_w * PI * PI * v;
        assert!((r - expect).abs() < 1e-12 * expect.abs());
        // the rate that zeroes the residual is a decay
        let rate = 1.3 * PI * PI / g.mu_w / (g.d_star / g.m_bar);
        assert!(rate > 0.0);
        let uniform = FieldDerivs::constant(0.7, 1);
        let r0 = ph.mass_residual_general(0, &[single_phase(uniform, &ph)], &st, &0.0, &FieldDerivs::constant(0.0, 1), &c, &0.0);
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn heat_eigenmode_has_zero_residual() {
        let (ph, _, _) = stratum();
        let g = ph.groups;
        let h = 2.5;
        let (y, t) = (0.35, 0.2);
        let rate = PI * PI * g.f_star / h;
        let v = (PI * y).sin() * (-rate * t).exp();
        let temp = FieldDerivs {
            v,
            t: -rate * v,
            grad: vec![PI * (PI * y).cos() * (-rate * t).exp()],
            hess: vec![-PI * PI * v],
            grad_t: vec![0.0],
        };
        let r = ph.energy_residual_general(&temp, &h, &[], &Coeffs::unit(), &0.0);
        assert!(r.abs() < 1e-12 * (rate * v).abs().max(1.0), "{r}");
        let r0 = ph.energy_residual_general(&FieldDerivs::constant(0.4, 1), &h, &[], &Coeffs::unit(), &0.0);
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn stress_update_cases() {
        let (ph, _, s) = stratum();
        let c = Coeffs { k_dr: 1.4, ..Coeffs::unit() };
        // pure volumetric strain
        let eps = [0.01, 0.0, 0.0, 0.02];
        let (_, sv) = ph.stress_update(&eps, &[1.0], &[0.0], &0.0, &c);
        assert!((sv - 1.4 * 0.03).abs() < 1e-15);
        // pure pressure increase, single phase, b = 1
        let (sig, sv) = ph.stress_update(&[0.0], &[1.0], &[0.5], &0.0, &c);
        assert_eq!(sv, -0.5);
        assert_eq!((sig[0], sig[4], sig[8], sig[1]), (-0.5, -0.5, -0.5, 0.0));
        // combined, straight-line re-evaluation
        let eps = [0.002, 0.0007, 0.0007, -0.001];
        let (sw, dpw, dpg, dt) = (0.62, -0.3, 0.01, 0.4);
        let (sig, sv) = ph.stress_update(&eps, &[sw, 1.0 - sw], &[dpw, dpg], &dt, &c);
        let n_t = s.scales.beta * s.scales.k_dr * s.scales.temp / s.scales.p;
        let beta_bar = s.mat.beta_s / s.scales.beta;
        let ev = 0.002 - 0.001;
        let expect_v = 1.4 * ev - (sw * dpw + (1.0 - sw) * dpg) - beta_bar * 1.4 * n_t * dt;
        assert!((sv - expect_v).abs() < 1e-14);
        let cn = (1.0 - 2.0 * 0.2857) / 1.2857;
        assert!((sig[1] - 3.0 * cn * 1.4 * 0.0007).abs() < 1e-15);
        assert!((sig[8] - (expect_v + 3.0 * cn * 1.4 * (-ev / 3.0))).abs() < 1e-14);
        let tr = (sig[0] + sig[4] + sig[8]) / 3.0;
        assert!((tr - sv).abs() < 1e-14);
    }

    #[test]
    fn general_reduces_to_terzaghi() {
        let ph = terzaghi();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = rand_field(&mut r, 1);
            let u = rand_field(&mut r, 1);
            let c = Coeffs {
                k: r.gen_range(0.5..2.0),
                k_dr: r.gen_range(0.5..2.0),
                lambda: 1.0,
            };
            let (rf, rm) = ph.terzaghi_residuals(&p, &u, &c);
            let phase = single_phase(p.clone(), &ph);
            let mg = ph.momentum_residual_general(&[u.clone()], &[phase.clone()], &FieldDerivs::constant(0.0, 1), &c);
            assert!((mg[0] - rm).abs() < 1e-13);
            // the column equation is the general balance without the stress-rate term
            let st = ph.single_phase_storage(&0.0);
            let mf = ph.mass_residual_general(0, &[phase], &st, &0.0, &FieldDerivs::constant(0.0, 1), &c, &0.0);
            assert!((mf - rf).abs() < 1e-13);
        }
    }

    #[test]
    fn general_reduces_to_barry_mercer() {
        let b = presets::BarryMercer::default();
        let ph = Physics::new(&b.scales, &b.mat).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = rand_field(&mut r, 2);
            let ux = rand_field(&mut r, 2);
            let uy = rand_field(&mut r, 2);
            let c = Coeffs {
                k: r.gen_range(0.5..2.0),
                k_dr: r.gen_range(0.5..2.0),
                lambda: 1.0,
            };
            let f = r.gen_range(-3.0..3.0);
            let sv = ph.bm_sigma_v_rate(&ux, &uy, &p.t, &c);
            let (rf, rx, ry) = ph.bm_residuals(&p, &ux, &uy, &sv, &f, &c);
            let phase = single_phase(p.clone(), &ph);
            let mg = ph.momentum_residual_general(&[ux.clone(), uy.clone()], &[phase.clone()], &FieldDerivs::constant(0.0, 2), &c);
            assert!((mg[0] - rx).abs() < 1e-12 && (mg[1] - ry).abs() < 1e-12);
            // incompressible constituents: no storage
            let st = ph.single_phase_storage(&0.0);
            assert_eq!(st.ww, 0.0);
            let mf = ph.mass_residual_general(0, &[phase], &st, &sv, &FieldDerivs::constant(0.0, 2), &c, &f);
            assert!((mf - rf).abs() < 1e-12 * rf.abs().max(1.0));
        }
    }

    #[test]
    fn general_reduces_to_stratum() {
        let (ph, ret, s) = stratum();
        let g = ph.groups;
        let pg = s.p_gas / s.scales.p;
        let mut r = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut pc = rand_field(&mut r, 1);
            pc.v = r.gen_range(1.5..3.5);
            let u = rand_field(&mut r, 1);
            let temp = rand_field(&mut r, 1);
            let c = Coeffs {
                k: r.gen_range(0.5..2.0),
                k_dr: r.gen_range(0.5..2.0),
                lambda: r.gen_range(0.5..2.0),
            };
            let sv = ph.thm_sigma_v_rate(&ret, &u, &pc, &temp, &c);
            let (rm, rf, rh) = ph.thm_residuals(&ret, &u, &pc, &temp, &sv, &c);

            let sw = ret.s_w(&pc.v);
            let dsw = ret.ds_w(&pc.v);
            let water = Phase {
                s: sw,
                s_grad: vec![dsw * pc.grad[0]],
                kr: ret.k_rw(&pc.v),
                kr_grad: vec![ret.dk_rw(&pc.v) * pc.grad[0]],
                p: FieldDerivs::line(pg - pc.v, -pc.t, -pc.grad[0], -pc.hess[0], -pc.grad_t[0]),
                mu: g.mu_w,
                rho: g.rho_w,
                cap: g.cap_w,
                beta: g.beta_w,
            };
            let gas = Phase {
                s: 1.0 - sw,
                s_grad: vec![-dsw * pc.grad[0]],
                kr: ret.k_rg(&pc.v),
                kr_grad: vec![0.0],
                p: FieldDerivs::constant(pg, 1),
                mu: g.mu_g,
                rho: g.rho_g,
                cap: g.cap_g,
                beta: g.beta_g,
            };
            let phases = [water.clone(), gas];
            let mg = ph.momentum_residual_general(&[u.clone()], &phases, &temp, &c);
            assert!((mg[0] - rm).abs() < 1e-10 * rm.abs().max(1.0), "{} {rm}", mg[0]);

            // stress rate from the general update
            let (_, sv2) = ph.stress_update(&[u.grad_t[0]], &[sw, 1.0 - sw], &[-pc.t, 0.0], &temp.t, &c);
            assert!((sv - sv2).abs() < 1e-12 * sv.abs().max(1.0));

            let st = storage_matrix(&ph.mat, &sw, &(dsw / s.scales.p), s.scales.k_dr);
            let mf = ph.mass_residual_general(0, &phases, &st, &sv, &temp, &c, &0.0);
            let scaled = rf * c.k / g.mu_w;
            assert!((mf - scaled).abs() < 1e-9 * scaled.abs().max(1.0), "{mf} {scaled}");

            let mh = ph.energy_residual_general(&temp, &ph.h_star(&sw), &[water], &c, &0.0);
            assert!((mh - rh).abs() < 1e-10 * rh.abs().max(1.0), "{mh} {rh}");
        }
    }

    #[test]
    fn linear_in_permeability_and_conductivity() {
        let ph = terzaghi();
        let p = FieldDerivs::line(0.3, 0.0, 0.2, -1.7, 0.0);
        let u = FieldDerivs::constant(0.0, 1);
        let one = ph.terzaghi_residuals(&p, &u, &Coeffs::unit()).0;
        let two = ph.terzaghi_residuals(&p, &u, &Coeffs { k: 2.0, ..Coeffs::unit() }).0;
        assert_eq!(two, 2.0 * one);

        let (ph, ret, _) = stratum();
        let temp = FieldDerivs::line(1.0, 0.0, 0.4, -2.2, 0.0);
        let pc = FieldDerivs::constant(2.0, 1);
        let z = FieldDerivs::constant(0.0, 1);
        let h1 = ph.thm_residuals(&ret, &z, &pc, &temp, &0.0, &Coeffs::unit()).2;
        let h2 = ph.thm_residuals(&ret, &z, &pc, &temp, &0.0, &Coeffs { lambda: 2.0, ..Coeffs::unit() }).2;
        assert_eq!(h2, 2.0 * h1);
    }

    #[test]
    fn stratum_uniform_initial_state_is_steady() {
        let (ph, ret, s) = stratum();
        let pc = FieldDerivs::constant(s.pc_init / s.scales.p, 1);
        let temp = FieldDerivs::constant(s.temp_init / s.scales.temp, 1);
        let u = FieldDerivs::constant(0.0, 1);
        let c = Coeffs::unit();
        let sv = ph.thm_sigma_v_rate(&ret, &u, &pc, &temp, &c);
        let (a, b, h) = ph.thm_residuals(&ret, &u, &pc, &temp, &sv, &c);
        assert_eq!((a, b, h), (0.0, 0.0, 0.0));
    }

    #[test]
    fn injection_source_values() {
        let b = presets::BarryMercer::default();
        let a = 0.04;
        let peak = bm_source_shape(0.25, 0.25, PI / 2.0, b.well, a);
        assert!((peak - 2.0 / (a * a * PI)).abs() < 1e-9);
        for &(x, y) in &[(0.1, 0.9), (0.25, 0.25), (0.6, 0.3)] {
            assert_eq!(bm_source_shape(x, y, 0.0, b.well, a), 0.0);
            assert!(bm_source_shape(x, y, PI, b.well, a).abs() < 1e-12 * peak);
        }
        // midpoint quadrature over the unit square
        let n = 2000;
        let h = 1.0 / n as f64;
        let t = 1.1;
        let mut q = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) * h;
            let mut row = 0.0;
            for j in 0..n {
                row += bm_source_shape(x, (j as f64 + 0.5) * h, t, b.well, a);
            }
            q += row;
        }
        q *= h * h;
        assert!((q - 2.0 * t.sin()).abs() < 1e-6, "{q}");
        let f = bm_source(&b, 0.25, 0.25, PI / 2.0);
        let scale = 0.5 * 1e-3 / (1e-10 * b.mat.k_dr);
        assert!((f / (scale * peak) - 1.0).abs() < 1e-12);
    }
}
