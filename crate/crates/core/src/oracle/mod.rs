//! Reference solutions for the three benchmarks, gridded field tables and
//! sensor sampling.

mod barry_mercer;
mod sensors;
mod stratum;
mod table;
mod terzaghi;

pub use barry_mercer::{barry_mercer_table, BarryMercerSeries};
pub use sensors::{sample_sensors, sensor_layout, SensorSpec};
pub use stratum::{thm_forward_fd, StratumFd, StratumSolution};
pub use table::{
    cubic_deriv_weights, cubic_weights, linear_weights, read_sensors_csv, write_sensors_csv, Axis, FieldTable,
    SensorSeries,
};
pub use terzaghi::{terzaghi_series, terzaghi_table, TerzaghiSeries};
