//! Characteristic scales, material records and the dimensionless groups
//! derived from them.

use crate::Error;

/// Characteristic factors used to make every field and coefficient O(1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSet {
    /// s
    pub t: f64,
    /// m
    pub x: f64,
    /// Pa
    pub p: f64,
    /// °C
    pub temp: f64,
    /// Pa
    pub k_dr: f64,
    /// m²
    pub k: f64,
    /// Pa·s
    pub mu: f64,
    /// kg/m³
    pub rho: f64,
    /// J/(s·m·°C)
    pub lambda: f64,
    /// J/(kg·°C)
    pub heat_cap: f64,
    /// 1/°C
    pub beta: f64,
}

impl ScaleSet {
    /// Displacement scale `u* = (p*/K*_dr)·x*` in m.
    pub fn u(&self) -> f64 {
        self.p / self.k_dr * self.x
    }

    /// Strain scale `ε* = u*/x*`.
    pub fn eps(&self) -> f64 {
        self.u() / self.x
    }

    pub fn validate(&self) -> Result<(), Error> {
        let named = [
            ("t", self.t),
            ("x", self.x),
            ("p", self.p),
            ("temp", self.temp),
            ("k_dr", self.k_dr),
            ("k", self.k),
            ("mu", self.mu),
            ("rho", self.rho),
            ("lambda", self.lambda),
            ("heat_cap", self.heat_cap),
            ("beta", self.beta),
        ];
        for (n, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("scale {n} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Dimensional material properties (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialRecord {
    /// Young's modulus, Pa
    pub e: f64,
    pub nu: f64,
    /// drained bulk modulus, Pa
    pub k_dr: f64,
    /// Biot coefficient
    pub b: f64,
    /// Biot modulus, Pa (infinite for incompressible constituents)
    pub m: f64,
    pub phi: f64,
    /// bulk moduli of solid grains, water and gas, Pa
    pub k_s: f64,
    pub k_w: f64,
    pub k_g: f64,
    /// intrinsic permeability, m²
    pub k: f64,
    pub mu_w: f64,
    pub mu_g: f64,
    pub rho_s: f64,
    pub rho_w: f64,
    pub rho_g: f64,
    /// thermal expansion, 1/°C
    pub beta_s: f64,
    pub beta_w: f64,
    pub beta_g: f64,
    /// heat capacities, J/(kg·°C)
    pub cap_s: f64,
    pub cap_w: f64,
    pub cap_g: f64,
    /// J/(s·m·°C)
    pub lambda_avg: f64,
    /// m/s²
    pub g: f64,
}

impl MaterialRecord {
    /// Water compressibility `1/K_w`.
    pub fn comp_w(&self) -> f64 {
        1.0 / self.k_w
    }

    pub fn comp_g(&self) -> f64 {
        1.0 / self.k_g
    }

    /// `(1 − 2ν)/(1 + ν)`.
    pub fn c_nu(&self) -> f64 {
        (1.0 - 2.0 * self.nu) / (1.0 + self.nu)
    }

    pub fn shear_modulus(&self) -> f64 {
        1.5 * self.c_nu() * self.k_dr
    }

    /// Constrained (oedometric) modulus `K_dr + 4G/3`.
    pub fn constrained_modulus(&self) -> f64 {
        self.k_dr * (1.0 + 2.0 * self.c_nu())
    }

    pub fn bulk_from_young(e: f64, nu: f64) -> f64 {
        e / (3.0 * (1.0 - 2.0 * nu))
    }

    /// Biot modulus from `1/M = φ c_f + (b − φ)/K_s`.
    pub fn biot_modulus(phi: f64, c_f: f64, b: f64, k_s: f64) -> f64 {
        1.0 / (phi * c_f + (b - phi) / k_s)
    }

    /// `(ρC)_avg` at water saturation `s_w`.
    pub fn rho_c_avg(&self, s_w: f64) -> f64 {
        (1.0 - self.phi) * self.rho_s * self.cap_s
            + self.phi * (s_w * self.rho_w * self.cap_w + (1.0 - s_w) * self.rho_g * self.cap_g)
    }

    /// Bulk density at water saturation `s_w`.
    pub fn rho_b(&self, s_w: f64) -> f64 {
        (1.0 - self.phi) * self.rho_s + self.phi * (s_w * self.rho_w + (1.0 - s_w) * self.rho_g)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(Error::Config(format!("poisson ratio must lie in (0, 0.5), got {}", self.nu)));
        }
        if self.e > 0.0 {
            let k = Self::bulk_from_young(self.e, self.nu);
            if ((k - self.k_dr) / k).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "drained bulk modulus {} inconsistent with E/(3(1-2nu)) = {k}",
                    self.k_dr
                )));
            }
        }
        if !(self.k_dr > 0.0 && self.k > 0.0 && self.mu_w > 0.0) {
            return Err(Error::Config("k_dr, k and mu_w must be positive".into()));
        }
        Ok(())
    }
}

/// Coefficients of the dimensionless equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessGroups {
    pub n_t: f64,
    pub n_d: f64,
    pub d_star: f64,
    pub q_star: f64,
    /// `H*` at full water saturation; see [`DimensionlessGroups::h_star_at`].
    pub h_star: f64,
    pub j_star: f64,
    pub f_star: f64,
    /// Multiplier turning a volumetric source (1/s) into `f*_α`.
    pub f_source: f64,
    /// Multiplier turning a heat source (W/m³) into `G*_θ`.
    pub g_theta: f64,
    /// `ρ* C*`, kept so `H*` can follow the saturation.
    pub rho_c_ref: f64,
    pub m_bar: f64,
    pub mu_w: f64,
    pub mu_g: f64,
    pub rho_s: f64,
    pub rho_w: f64,
    pub rho_g: f64,
    pub cap_w: f64,
    pub cap_g: f64,
    pub beta_s: f64,
    pub beta_w: f64,
    pub beta_g: f64,
    /// True values of the trainable coefficients in scaled units.
    pub k_bar: f64,
    pub k_dr_bar: f64,
    pub lambda_bar: f64,
}

impl DimensionlessGroups {
    pub fn h_star_at(&self, mat: &MaterialRecord, s_w: f64) -> f64 {
        mat.rho_c_avg(s_w) / self.rho_c_ref
    }

    /// Dimensionless bulk density.
    pub fn rho_b(&self, mat: &MaterialRecord, s_w: f64) -> f64 {
        (1.0 - mat.phi) * self.rho_s + mat.phi * (s_w * self.rho_w + (1.0 - s_w) * self.rho_g)
    }
}

pub fn compute_groups(s: &ScaleSet, mat: &MaterialRecord) -> Result<DimensionlessGroups, Error> {
    s.validate()?;
    let rc = s.rho * s.heat_cap;
    Ok(DimensionlessGroups {
        n_t: s.beta * s.k_dr * s.temp / s.p,
        n_d: s.x * s.rho / s.p * mat.g,
        d_star: s.mu * s.x * s.x / (s.k_dr * s.k * s.t),
        q_star: s.beta * s.temp * s.mu * s.x * s.x / (s.t * s.k * s.p),
        h_star: mat.rho_c_avg(1.0) / rc,
        j_star: s.k * s.p * s.t / (s.mu * s.x * s.x),
        f_star: s.t * s.lambda / (rc * s.x * s.x),
        f_source: s.mu * s.x * s.x / (s.k * s.p),
        g_theta: s.t / (s.temp * rc),
        rho_c_ref: rc,
        m_bar: mat.m / s.k_dr,
        mu_w: mat.mu_w / s.mu,
        mu_g: mat.mu_g / s.mu,
        rho_s: mat.rho_s / s.rho,
        rho_w: mat.rho_w / s.rho,
        rho_g: mat.rho_g / s.rho,
        cap_w: mat.cap_w / s.heat_cap,
        cap_g: mat.cap_g / s.heat_cap,
        beta_s: mat.beta_s / s.beta,
        beta_w: mat.beta_w / s.beta,
        beta_g: mat.beta_g / s.beta,
        k_bar: mat.k / s.k,
        k_dr_bar: mat.k_dr / s.k_dr,
        lambda_bar: mat.lambda_avg / s.lambda,
    })
}

/// Inversion unknowns, in the order permeability, drained bulk modulus,
/// thermal conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoeffKind {
    Permeability,
    BulkModulus,
    Conductivity,
}

impl CoeffKind {
    pub const ALL: [CoeffKind; 3] = [CoeffKind::Permeability, CoeffKind::BulkModulus, CoeffKind::Conductivity];

    pub fn name(self) -> &'static str {
        match self {
            CoeffKind::Permeability => "k",
            CoeffKind::BulkModulus => "K_dr",
            CoeffKind::Conductivity => "lambda",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            CoeffKind::Permeability => "m2",
            CoeffKind::BulkModulus => "Pa",
            CoeffKind::Conductivity => "W/(m.C)",
        }
    }

    pub fn scale(self, s: &ScaleSet) -> f64 {
        match self {
            CoeffKind::Permeability => s.k,
            CoeffKind::BulkModulus => s.k_dr,
            CoeffKind::Conductivity => s.lambda,
        }
    }
}

/// Dimensionless coefficient values; untrained entries stay at their fixed
/// values. Trainable entries are held as logarithms so they stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableCoeffs {
    pub kinds: Vec<CoeffKind>,
    pub log: Vec<f64>,
    /// Values used for kinds that are not trained.
    pub fixed: [f64; 3],
}

impl TrainableCoeffs {
    pub fn new(kinds: &[CoeffKind], initial: f64) -> Self {
        let mut kinds = kinds.to_vec();
        kinds.sort();
        kinds.dedup();
        Self {
            log: vec![initial.ln(); kinds.len()],
            kinds,
            fixed: [1.0; 3],
        }
    }

    pub fn get(&self, kind: CoeffKind) -> f64 {
        match self.kinds.iter().position(|&k| k == kind) {
            Some(i) => self.log[i].exp(),
            None => self.fixed[kind as usize],
        }
    }

    pub fn set(&mut self, kind: CoeffKind, v: f64) {
        assert!(v > 0.0, "coefficients must stay positive");
        match self.kinds.iter().position(|&k| k == kind) {
            Some(i) => self.log[i] = v.ln(),
            None => self.fixed[kind as usize] = v,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.kinds.iter().map(|&k| self.get(k)).collect()
    }

    pub fn k(&self) -> f64 {
        self.get(CoeffKind::Permeability)
    }

    pub fn k_dr(&self) -> f64 {
        self.get(CoeffKind::BulkModulus)
    }

    pub fn lambda(&self) -> f64 {
        self.get(CoeffKind::Conductivity)
    }
}

/// Dimensional coefficient values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalCoeffs {
    /// m²
    pub k: f64,
    /// Pa
    pub k_dr: f64,
    /// J/(s·m·°C)
    pub lambda: f64,
}

pub fn dimensionalize(c: &TrainableCoeffs, s: &ScaleSet) -> DimensionalCoeffs {
    DimensionalCoeffs {
        k: c.k() * s.k,
        k_dr: c.k_dr() * s.k_dr,
        lambda: c.lambda() * s.lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::presets;

    #[test]
    fn self_normalization_gives_unit_coefficients() {
        let p = presets::Stratum::default();
        let g = compute_groups(&p.scales, &p.mat).unwrap();
        assert!((g.k_bar - 1.0).abs() < 1e-15);
        assert!((g.k_dr_bar - 1.0).abs() < 1e-15);
        assert!((g.lambda_bar - 1.0).abs() < 1e-15);
        assert!((g.mu_w - 1.0).abs() < 1e-15);
        let d = dimensionalize(&TrainableCoeffs::new(&CoeffKind::ALL, 1.0), &p.scales);
        assert!((d.k / p.mat.k - 1.0).abs() < 1e-14);
        assert!((d.k_dr / p.mat.k_dr - 1.0).abs() < 1e-14);
        assert!((d.lambda / p.mat.lambda_avg - 1.0).abs() < 1e-14);
    }

    #[test]
    fn terzaghi_displacement_scale() {
        let p = presets::Terzaghi::default();
        assert!((p.mat.k_dr - 80e6).abs() < 1e-6);
        assert!((p.scales.u() - 0.0625).abs() < 1e-15);
        assert!((p.scales.eps() - 0.00125).abs() < 1e-15);
        let g = compute_groups(&p.scales, &p.mat).unwrap();
        assert_eq!(g.n_d, 0.0);
        assert!((p.mat.constrained_modulus() - 144e6).abs() < 1e-3);
    }

    #[test]
    fn dimensionalize_examples() {
        let t = presets::Terzaghi::default();
        let c = TrainableCoeffs::new(&[CoeffKind::Permeability, CoeffKind::BulkModulus], 1.0);
        let d = dimensionalize(&c, &t.scales);
        assert_eq!(d.k, 1e-12);
        assert_eq!(d.k_dr, 80e6);
        let e = 3.0 * d.k_dr * (1.0 - 2.0 * t.mat.nu);
        assert!((e - 120e6).abs() < 1e-6);
        let s = presets::Stratum::default();
        let c = TrainableCoeffs::new(&CoeffKind::ALL, 1.0);
        assert_eq!(dimensionalize(&c, &s.scales).lambda, 0.458);
    }

    #[test]
    fn non_positive_scale_is_rejected() {
        let mut s = presets::Terzaghi::default().scales;
        s.t = 0.0;
        assert!(matches!(compute_groups(&s, &presets::Terzaghi::default().mat), Err(Error::Config(_))));
    }

    #[test]
    fn groups_match_their_formulas() {
        let p = presets::Stratum::default();
        let (s, m) = (p.scales, p.mat);
        let g = compute_groups(&s, &m).unwrap();
        let close = |a: f64, b: f64| assert!((a / b - 1.0).abs() < 1e-14, "{a} {b}");
        close(g.d_star, s.mu * s.x.powi(2) / (s.k_dr * s.k * s.t));
        close(g.j_star * g.d_star, s.p / s.k_dr);
        close(g.n_t, s.beta * s.k_dr * s.temp / s.p);
        close(g.q_star, g.n_t * g.d_star);
        close(g.f_star, s.t * s.lambda / (s.rho * s.heat_cap * s.x * s.x));
        close(g.h_star_at(&m, 0.5), m.rho_c_avg(0.5) / (s.rho * s.heat_cap));
    }

    #[test]
    fn coefficients_stay_positive_in_log_storage() {
        let mut c = TrainableCoeffs::new(&[CoeffKind::BulkModulus, CoeffKind::Permeability], 2.0);
        assert_eq!(c.kinds, vec![CoeffKind::Permeability, CoeffKind::BulkModulus]);
        c.log[0] -= 50.0;
        assert!(c.k() > 0.0);
        assert_eq!(c.lambda(), 1.0);
    }
}
