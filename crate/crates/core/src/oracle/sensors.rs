//! Sensor placement and sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::table::{FieldTable, SensorSeries};
use crate::physics::presets::Benchmark;
use crate::Error;

/// A sensor: id, field name and dimensionless location.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: String,
    pub field: String,
    pub location: Vec<f64>,
}

fn spec(id: String, field: &str, location: Vec<f64>) -> SensorSpec {
    SensorSpec {
        id,
        field: field.into(),
        location,
    }
}

/// Preset sensor layout of each benchmark.
pub fn sensor_layout(benchmark: Benchmark) -> Vec<SensorSpec> {
    match benchmark {
        Benchmark::Terzaghi => vec![
            spec("p_mid".into(), "p", vec![0.5]),
            spec("u_top".into(), "u", vec![1.0]),
        ],
        Benchmark::BarryMercer => {
            let mut pts: Vec<(String, [f64; 2])> = Vec::new();
            for (tag, c) in [("ab", 0.1), ("ab", 0.4), ("ab", 0.8)] {
                pts.push((format!("{tag}{}", (c * 10.0) as u32), [c, 0.5]));
            }
            for (tag, c) in [("cd", 0.1), ("cd", 0.4), ("cd", 0.8)] {
                pts.push((format!("{tag}{}", (c * 10.0) as u32), [0.5, c]));
            }
            let mut out = Vec::new();
            for (name, xy) in pts {
                for f in ["ux", "uy", "p"] {
                    out.push(spec(format!("{f}_{name}"), f, xy.to_vec()));
                }
            }
            out
        }
        Benchmark::Stratum => {
            let mut out = Vec::new();
            for (q, y) in [(1, 0.25), (2, 0.5), (3, 0.75)] {
                for f in ["pc", "u", "T"] {
                    out.push(spec(format!("{f}_q{q}"), f, vec![y]));
                }
            }
            out
        }
    }
}

/// Samples the preset sensors at every time level of the table. A positive
/// `noise` adds Gaussian noise with standard deviation `noise × range` of
/// each series, drawn from `seed`.
pub fn sample_sensors(table: &FieldTable, noise: f64, seed: u64) -> Result<Vec<SensorSeries>, Error> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Config(format!("noise level must be non-negative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in sensor_layout(table.benchmark) {
        let f = table.field_index(&s.field)?;
        let mut values = table
            .times
            .iter()
            .map(|&t| table.sample(f, &s.location, t))
            .collect::<Result<Vec<_>, _>>()?;
        let mut sd = 0.0;
        if noise > 0.0 {
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            sd = noise * (hi - lo);
            if sd > 0.0 {
                let dist = Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?;
                for v in values.iter_mut() {
                    *v += dist.sample(&mut rng);
                }
            }
        }
        out.push(SensorSeries {
            id: s.id,
            field: s.field,
            location: s.location,
            times: table.times.clone(),
            values,
            noise: sd,
        });
    }
    Ok(out)
}
