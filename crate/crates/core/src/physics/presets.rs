//! Material data, scales and problem settings of the three benchmarks.

use super::{BrooksCoreyParams, MaterialRecord, ScaleSet};
use crate::Error;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Terzaghi,
    BarryMercer,
    Stratum,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Terzaghi, Benchmark::BarryMercer, Benchmark::Stratum];

    pub fn id(self) -> &'static str {
        match self {
            Benchmark::Terzaghi => "terzaghi",
            Benchmark::BarryMercer => "barry-mercer",
            Benchmark::Stratum => "stratum",
        }
    }

    /// Number of spatial dimensions.
    pub fn dim(self) -> usize {
        match self {
            Benchmark::BarryMercer => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark '{s}' (expected terzaghi, barry-mercer or stratum)")))
    }
}

fn blank_material() -> MaterialRecord {
    MaterialRecord {
        e: 0.0,
        nu: 0.25,
        k_dr: 1.0,
        b: 1.0,
        m: f64::INFINITY,
        phi: 0.0,
        k_s: f64::INFINITY,
        k_w: f64::INFINITY,
        k_g: f64::INFINITY,
        k: 1.0,
        mu_w: 1e-3,
        mu_g: 1e-3,
        rho_s: 0.0,
        rho_w: 0.0,
        rho_g: 0.0,
        beta_s: 0.0,
        beta_w: 0.0,
        beta_g: 0.0,
        cap_s: 0.0,
        cap_w: 0.0,
        cap_g: 0.0,
        lambda_avg: 0.0,
        g: 0.0,
    }
}

/// Unit placeholders for the thermal scales of isothermal problems.
fn isothermal_scales(t: f64, x: f64, p: f64, k_dr: f64, k: f64, mu: f64) -> ScaleSet {
    ScaleSet {
        t,
        x,
        p,
        temp: 1.0,
        k_dr,
        k,
        mu,
        rho: 1.0,
        lambda: 1.0,
        heat_cap: 1.0,
        beta: 1.0,
    }
}

/// Soil column under a sudden surface load, drained at the top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terzaghi {
    pub mat: MaterialRecord,
    pub scales: ScaleSet,
    /// column height, m
    pub height: f64,
    /// surface load, Pa
    pub load: f64,
}

impl Default for Terzaghi {
    fn default() -> Self {
        let (e, nu) = (120e6, 0.25);
        let mut mat = blank_material();
        mat.e = e;
        mat.nu = nu;
        mat.k_dr = MaterialRecord::bulk_from_young(e, nu);
        mat.m = 3e11;
        mat.k = 1e-12;
        mat.mu_w = 1e-3;
        let height = 50.0;
        let k_nu = mat.constrained_modulus();
        let t = height * height * mat.mu_w / (mat.k * k_nu);
        Self {
            mat,
            scales: isothermal_scales(t, height, 0.1e6, mat.k_dr, mat.k, mat.mu_w),
            height,
            load: 0.1e6,
        }
    }
}

impl Terzaghi {
    pub fn load_bar(&self) -> f64 {
        self.load / self.scales.p
    }

    /// Classical consolidation coefficient `c_v = (k/μ)·M·K_ν/(K_ν + b²M)`, m²/s.
    pub fn classical_cv(&self) -> f64 {
        let m = &self.mat;
        let kv = m.constrained_modulus();
        m.k / m.mu_w * m.m * kv / (kv + m.b * m.b * m.m)
    }

    /// Undrained pressure after loading, `q·bM/(K_ν + b²M)`, Pa.
    pub fn initial_pressure(&self) -> f64 {
        let m = &self.mat;
        self.load * m.b * m.m / (m.constrained_modulus() + m.b * m.b * m.m)
    }
}

/// Square domain with a sinusoidal point injection/production well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarryMercer {
    pub mat: MaterialRecord,
    pub scales: ScaleSet,
    /// forcing frequency, 1/s
    pub beta: f64,
    pub well: (f64, f64),
    /// width of the Gaussian approximating the point source, m
    pub alpha: f64,
}

impl Default for BarryMercer {
    fn default() -> Self {
        let (e, nu) = (4.67e6, 0.167);
        let mut mat = blank_material();
        mat.e = e;
        mat.nu = nu;
        mat.k_dr = MaterialRecord::bulk_from_young(e, nu);
        mat.k = 1e-10;
        mat.mu_w = 1e-3;
        let beta = 0.5;
        Self {
            scales: isothermal_scales(2.0 * PI / beta, 1.0, mat.k_dr, mat.k_dr, mat.k, mat.mu_w),
            mat,
            beta,
            well: (0.25, 0.25),
            alpha: 0.04,
        }
    }
}

/// Unsaturated stratum heated and dried from the top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stratum {
    pub mat: MaterialRecord,
    pub scales: ScaleSet,
    pub bc: BrooksCoreyParams,
    /// m
    pub height: f64,
    /// initial capillary pressure, Pa
    pub pc_init: f64,
    /// constant gas pressure, Pa
    pub p_gas: f64,
    /// initial temperature, °C
    pub temp_init: f64,
    /// top boundary capillary pressure, Pa
    pub pc_top: f64,
    /// top boundary temperature, °C
    pub temp_top: f64,
}

impl Default for Stratum {
    fn default() -> Self {
        let (e, nu) = (60e6, 0.2857);
        let mat = MaterialRecord {
            e,
            nu,
            k_dr: MaterialRecord::bulk_from_young(e, nu),
            b: 1.0,
            m: MaterialRecord::biot_modulus(0.5, 1.0 / 0.43e13, 1.0, 0.14e10),
            phi: 0.5,
            k_s: 0.14e10,
            k_w: 0.43e13,
            k_g: 0.1e6,
            k: 6e-15,
            mu_w: 1e-3,
            mu_g: 1e-3,
            rho_s: 1800.0,
            rho_w: 1000.0,
            rho_g: 1.22,
            beta_s: 9e-7,
            beta_w: 6.3e-6,
            beta_g: 3.3e-3,
            cap_s: 125460.0,
            cap_w: 4182.0,
            cap_g: 1000.0,
            lambda_avg: 0.458,
            g: 0.0,
        };
        let scales = ScaleSet {
            t: 1e6,
            x: 0.1,
            p: 140e3,
            temp: 15.0,
            k_dr: mat.k_dr,
            k: mat.k,
            mu: mat.mu_w,
            rho: mat.rho_w,
            lambda: mat.lambda_avg,
            heat_cap: mat.cap_w,
            beta: mat.beta_s,
        };
        Self {
            mat,
            scales,
            bc: BrooksCoreyParams::default(),
            height: 0.1,
            pc_init: 280e3,
            p_gas: 102e3,
            temp_init: 10.0,
            pc_top: 420e3,
            temp_top: 25.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terzaghi_derived_values() {
        let t = Terzaghi::default();
        t.mat.validate().unwrap();
        assert!((t.mat.constrained_modulus() - 144e6).abs() < 1e-3);
        assert!((t.classical_cv() / 0.1439 - 1.0).abs() < 1e-3);
        assert!((t.initial_pressure() / t.load - 0.99952).abs() < 1e-5);
        assert!((t.scales.t - 17361.11).abs() < 0.01);
    }

    #[test]
    fn presets_validate() {
        BarryMercer::default().mat.validate().unwrap();
        Stratum::default().mat.validate().unwrap();
        assert!((BarryMercer::default().mat.k_dr - 2.3373e6).abs() < 1e3);
        assert!((Stratum::default().mat.k_dr - 46.66e6).abs() < 0.01e6);
    }
}
