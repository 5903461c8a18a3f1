//! Constitutive closures: Brooks–Corey retention and relative permeability,
//! the multiphase storage matrix, and the equivalent pore pressure.

use crate::autodiff::Scalar;
use crate::physics::MaterialRecord;
use crate::Error;

/// Bounds applied to the effective saturation before power laws are taken.
pub const SE_MIN: f64 = 1e-6;
pub const SE_MAX: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrooksCoreyParams {
    /// entry pressure, Pa
    pub p_b: f64,
    /// pore-size distribution index
    pub lambda: f64,
    /// residual water saturation
    pub s_rw: f64,
}

impl Default for BrooksCoreyParams {
    fn default() -> Self {
        Self {
            p_b: 133.813e3,
            lambda: 2.308,
            s_rw: 0.3216,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrooksCoreyState {
    pub s_e: f64,
    /// Pa
    pub p_c: f64,
    pub k_rw: f64,
    pub k_rg: f64,
    /// 1/Pa
    pub ds_dpc: f64,
}

impl BrooksCoreyParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.p_b > 0.0 && self.lambda > 0.0 && (0.0..1.0).contains(&self.s_rw)) {
            return Err(Error::Config(format!("invalid Brooks-Corey parameters {self:?}")));
        }
        Ok(())
    }

    /// Exponent of the water relative permeability, `(2 + 3λ)/λ`.
    pub fn water_exponent(&self) -> f64 {
        (2.0 + 3.0 * self.lambda) / self.lambda
    }

    pub fn gas_exponent(&self) -> f64 {
        (2.0 + self.lambda) / self.lambda
    }

    pub fn s_e(&self, s_w: f64) -> f64 {
        (s_w - self.s_rw) / (1.0 - self.s_rw)
    }

    pub fn saturation(&self, s_e: f64) -> f64 {
        self.s_rw + (1.0 - self.s_rw) * s_e
    }

    pub fn capillary_pressure(&self, s_e: f64) -> f64 {
        self.p_b * s_e.powf(-1.0 / self.lambda)
    }

    /// Capillary pressure range `[p_c(SE_MAX), p_c(SE_MIN)]` kept during training.
    pub fn pc_bounds(&self) -> (f64, f64) {
        (self.capillary_pressure(SE_MAX), self.capillary_pressure(SE_MIN))
    }

    /// Effective saturation from capillary pressure, clamped to
    /// `[SE_MIN, SE_MAX]`; the flag reports whether the clamp was active.
    pub fn s_e_from_pc(&self, p_c: f64) -> (f64, bool) {
        let s = if p_c > 0.0 {
            (p_c / self.p_b).powf(-self.lambda)
        } else {
            f64::INFINITY
        };
        if s < SE_MIN {
            (SE_MIN, true)
        } else if s > SE_MAX {
            (SE_MAX, true)
        } else {
            (s, false)
        }
    }
}

pub fn brooks_corey(s_w: f64, bc: &BrooksCoreyParams) -> Result<BrooksCoreyState, Error> {
    if !(s_w >= bc.s_rw && s_w <= 1.0) {
        return Err(Error::Domain(format!(
            "water saturation {s_w} outside [{}, 1]",
            bc.s_rw
        )));
    }
    let s_e = bc.s_e(s_w).clamp(0.0, 1.0);
    let s_c = s_e.max(SE_MIN);
    let p_c = bc.capillary_pressure(s_c);
    Ok(BrooksCoreyState {
        s_e,
        p_c,
        k_rw: s_e.powf(bc.water_exponent()),
        k_rg: (1.0 - s_e).powi(2) * (1.0 - s_e.powf(bc.gas_exponent())),
        ds_dpc: -(1.0 - bc.s_rw) * bc.lambda * s_c / p_c,
    })
}

/// Brooks–Corey closure expressed in a scaled capillary pressure
/// `p̄_c = p_c / p_scale`, usable in any scalar context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRetention {
    pub bc: BrooksCoreyParams,
    pub p_scale: f64,
}

impl ScaledRetention {
    pub fn s_e<S: Scalar>(&self, pc: &S) -> S {
        (pc.clone() * (self.p_scale / self.bc.p_b)).powf(-self.bc.lambda)
    }

    pub fn s_w<S: Scalar>(&self, pc: &S) -> S {
        self.s_e(pc) * (1.0 - self.bc.s_rw) + self.bc.s_rw
    }

    /// `dS_w/dp̄_c`.
    pub fn ds_w<S: Scalar>(&self, pc: &S) -> S {
        self.s_e(pc) * (-(1.0 - self.bc.s_rw) * self.bc.lambda) / pc.clone()
    }

    pub fn k_rw<S: Scalar>(&self, pc: &S) -> S {
        self.s_e(pc).powf(self.bc.water_exponent())
    }

    /// `dk_rw/dp̄_c = −(2 + 3λ)·k_rw/p̄_c`.
    pub fn dk_rw<S: Scalar>(&self, pc: &S) -> S {
        self.k_rw(pc) * (-(2.0 + 3.0 * self.bc.lambda)) / pc.clone()
    }

    pub fn k_rg<S: Scalar>(&self, pc: &S) -> S {
        let se = self.s_e(pc);
        se.rsub(1.0).square() * se.powf(self.bc.gas_exponent()).rsub(1.0)
    }
}

/// Storage coefficients `N̄_αk = N_αk·K*_dr` and thermal coefficients `β_{s,α}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageMatrix<S> {
    pub nn: S,
    pub nw: S,
    pub ww: S,
    /// 1/°C
    pub beta_sw: S,
    pub beta_sn: S,
}

impl<S: Clone> StorageMatrix<S> {
    /// Entry `N̄_ak` with phase 0 = water (wetting), 1 = non-wetting.
    pub fn entry(&self, a: usize, k: usize) -> S {
        match (a, k) {
            (0, 0) => self.ww.clone(),
            (1, 1) => self.nn.clone(),
            _ => self.nw.clone(),
        }
    }
}

/// `s_w` is the water saturation and `ds_dpc` is `dS_w/dp_c` in 1/Pa.
pub fn storage_matrix<S: Scalar>(mat: &MaterialRecord, s_w: &S, ds_dpc: &S, k_star: f64) -> StorageMatrix<S> {
    let phi = mat.phi;
    let n = (mat.b - phi) / mat.k_s;
    let s_n = s_w.rsub(1.0);
    let cap = ds_dpc.clone() * phi;
    StorageMatrix {
        nn: (-cap.clone() + s_n.clone() * (phi * mat.comp_g()) + s_n.square() * n) * k_star,
        nw: (cap.clone() + s_n.clone() * s_w.clone() * n) * k_star,
        ww: (-cap + s_w.clone() * (phi * mat.comp_w()) + s_w.square() * n) * k_star,
        beta_sw: s_w.clone() * ((mat.b - phi) * mat.beta_s + phi * mat.beta_w),
        beta_sn: s_n * ((mat.b - phi) * mat.beta_s + phi * mat.beta_g),
    }
}

/// `p_E = Σ S_α p_α − U`.
pub fn equivalent_pressure(saturations: &[f64], pressures: &[f64], u: f64) -> f64 {
    saturations.iter().zip(pressures).map(|(s, p)| s * p).sum::<f64>() - u
}

/// Interfacial energy `U` accumulated along a sampled saturation path by the
/// trapezoid rule on `δU = Σ p_α δS_α`; each sample holds the saturations
/// and pressures of every phase.
pub fn interfacial_energy(path: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut u = 0.0;
    for w in path.windows(2) {
        let (s0, p0) = &w[0];
        let (s1, p1) = &w[1];
        for a in 0..s0.len() {
            u += 0.5 * (p0[a] + p1[a]) * (s1[a] - s0[a]);
        }
    }
    u
}
