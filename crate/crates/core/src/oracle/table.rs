//! Gridded reference fields, sensor time series, their CSV forms and
//! interpolation (cubic in space, linear in time).
//!
//! `fields.csv` is long-format: `t,<axes...>,field,value`, preceded by one
//! `# key=value ...` metadata line. `sensors.csv` has the columns
//! `sensor,field,<axes...>,t,value,noise`.

use std::io::{Read, Write};

use crate::physics::presets::Benchmark;
use crate::{fmt17, Error};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub points: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, points: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            points,
        }
    }

    /// `n` evenly spaced points on `[a, b]`.
    pub fn uniform(name: &str, a: f64, b: f64, n: usize) -> Self {
        let pts = (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect();
        Self::new(name, pts)
    }
}

/// Field values on a tensor grid of spatial axes × time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub benchmark: Benchmark,
    pub axes: Vec<Axis>,
    pub times: Vec<f64>,
    pub fields: Vec<String>,
    /// Per field, time-major, then row-major over `axes`.
    pub values: Vec<Vec<f64>>,
    /// Free-form `key=value` notes (truncation, tolerances).
    pub meta: Vec<(String, String)>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl FieldTable {
    pub fn new(benchmark: Benchmark, axes: Vec<Axis>, times: Vec<f64>, fields: &[&str]) -> Self {
        let n = times.len() * axes.iter().map(|a| a.points.len()).product::<usize>();
        Self {
            benchmark,
            axes,
            times,
            fields: fields.iter().map(|s| s.to_string()).collect(),
            values: vec![vec![0.0; n]; fields.len()],
            meta: Vec::new(),
        }
    }

    pub fn space_len(&self) -> usize {
        self.axes.iter().map(|a| a.points.len()).product()
    }

    pub fn field_index(&self, name: &str) -> Result<usize, Error> {
        self.fields
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Config(format!("field table has no field '{name}'")))
    }

    /// Flat spatial index of a multi-index.
    pub fn space_index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for (a, &i) in self.axes.iter().zip(idx) {
            k = k * a.points.len() + i;
        }
        k
    }

    /// Multi-index of a flat spatial index.
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, a) in self.axes.iter().enumerate().rev() {
            idx[d] = k % a.points.len();
            k /= a.points.len();
        }
        idx
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.points[i])
            .collect()
    }

    pub fn get(&self, field: usize, time: usize, space: usize) -> f64 {
        self.values[field][time * self.space_len() + space]
    }

    pub fn set(&mut self, field: usize, time: usize, space: usize, v: f64) {
        let n = self.space_len();
        self.values[field][time * n + space] = v;
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !strictly_increasing(&self.times) || self.axes.iter().any(|a| !strictly_increasing(&a.points)) {
            return Err(Error::Format("field table grid must be strictly increasing".into()));
        }
        let n = self.times.len() * self.space_len();
        for (f, v) in self.fields.iter().zip(&self.values) {
            if v.len() != n {
                return Err(Error::Format(format!("field {f} has {} values, expected {n}", v.len())));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Format(format!("field {f} has a non-finite value at {i}")));
            }
        }
        Ok(())
    }

    /// Interpolated value at a spatial point and time.
    pub fn sample(&self, field: usize, point: &[f64], t: f64) -> Result<f64, Error> {
        let (t0, t1, wt) = linear_weights(&self.times, t)?;
        let mut stencils = Vec::with_capacity(self.axes.len());
        for (a, &x) in self.axes.iter().zip(point) {
            stencils.push(cubic_weights(&a.points, x)?);
        }
        let at = |ti: usize| -> f64 {
            let mut acc = 0.0;
            let mut idx = vec![0; self.axes.len()];
            tensor_sum(&stencils, 0, 1.0, &mut idx, &mut |idx, w| {
                acc += w * self.get(field, ti, self.space_index(idx));
            });
            acc
        };
        if wt == 0.0 {
            return Ok(at(t0));
        }
        Ok((1.0 - wt) * at(t0) + wt * at(t1))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), Error> {
        self.validate()?;
        let meta: Vec<String> = std::iter::once(format!("benchmark={}", self.benchmark))
            .chain(self.meta.iter().map(|(k, v)| format!("{k}={v}")))
            .collect();
        writeln!(w, "# {}", meta.join(" "))?;
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.axes.iter().map(|a| a.name.clone()));
        header.extend(["field".to_string(), "value".to_string()]);
        wr.write_record(&header).map_err(csv_err)?;
        let ns = self.space_len();
        for (ti, &t) in self.times.iter().enumerate() {
            for k in 0..ns {
                let c = self.coords(k);
                for (fi, f) in self.fields.iter().enumerate() {
                    let mut rec = vec![fmt17(t)];
                    rec.extend(c.iter().map(|&x| fmt17(x)));
                    rec.push(f.clone());
                    rec.push(fmt17(self.get(fi, ti, k)));
                    wr.write_record(&rec).map_err(csv_err)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, Error> {
        let mut text = String::new();
        std::io::BufReader::new(r).read_to_string(&mut text)?;
        let first = text.lines().next().unwrap_or("");
        let meta_line = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("fields.csv: missing metadata line".into()))?;
        let mut benchmark = None;
        let mut meta = Vec::new();
        for kv in meta_line.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("fields.csv: bad metadata entry '{kv}'")))?;
            if k == "benchmark" {
                benchmark = Some(v.parse::<Benchmark>()?);
            } else {
                meta.push((k.to_string(), v.to_string()));
            }
        }
        let benchmark = benchmark.ok_or_else(|| Error::Format("fields.csv: no benchmark in metadata".into()))?;
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let nh = header.len();
        if nh < 4 || header[0] != "t" || header[nh - 2] != "field" || header[nh - 1] != "value" {
            return Err(Error::Format(format!("fields.csv: unexpected header {header:?}")));
        }
        let axis_names = &header[1..nh - 2];
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64, Error> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("fields.csv: bad number '{}'", &rec[i])))
            };
            let coords: Vec<f64> = (1..nh - 2).map(num).collect::<Result<_, _>>()?;
            rows.push((num(0)?, coords, rec[nh - 2].to_string(), num(nh - 1)?));
        }
        let uniq = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let times = uniq(rows.iter().map(|r| r.0).collect());
        let axes: Vec<Axis> = axis_names
            .iter()
            .enumerate()
            .map(|(d, n)| Axis::new(n, uniq(rows.iter().map(|r| r.1[d]).collect())))
            .collect();
        let mut fields: Vec<String> = Vec::new();
        for r in &rows {
            if !fields.contains(&r.2) {
                fields.push(r.2.clone());
            }
        }
        let names: Vec<&str> = fields.iter().map(String::as_str).collect();
        let mut table = FieldTable::new(benchmark, axes, times, &names);
        table.meta = meta;
        if rows.len() != table.values.len() * table.values[0].len() {
            return Err(Error::Format("fields.csv: grid is not complete".into()));
        }
        for (t, c, f, v) in rows {
            let ti = table.times.binary_search_by(|x| x.total_cmp(&t)).unwrap();
            let idx: Vec<usize> = c
                .iter()
                .zip(&table.axes)
                .map(|(x, a)| a.points.binary_search_by(|p| p.total_cmp(x)).unwrap())
                .collect();
            let k = table.space_index(&idx);
            let fi = table.field_index(&f)?;
            table.set(fi, ti, k, v);
        }
        table.validate()?;
        Ok(table)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn tensor_sum(
    st: &[(usize, Vec<f64>)],
    d: usize,
    w: f64,
    idx: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize], f64),
) {
    if d == st.len() {
        f(idx, w);
        return;
    }
    let (i0, ws) = &st[d];
    for (a, &wa) in ws.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        idx[d] = i0 + a;
        tensor_sum(st, d + 1, w * wa, idx, f);
    }
}

fn out_of_range(x: f64, pts: &[f64]) -> Error {
    Error::Domain(format!(
        "extrapolation: {x} outside [{}, {}]",
        pts[0],
        pts[pts.len() - 1]
    ))
}

/// Bracketing interval index and weight for linear interpolation.
pub fn linear_weights(pts: &[f64], x: f64) -> Result<(usize, usize, f64), Error> {
    let n = pts.len();
    if !(x >= pts[0] && x <= pts[n - 1]) {
        return Err(out_of_range(x, pts));
    }
    if n == 1 {
        return Ok((0, 0, 0.0));
    }
    let j = pts.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
    if x == pts[j] {
        return Ok((j, j, 0.0));
    }
    Ok((j, j + 1, (x - pts[j]) / (pts[j + 1] - pts[j])))
}

/// Four-point Lagrange weights (fewer on short axes); returns the first
/// stencil index and the weights.
pub fn cubic_weights(pts: &[f64], x: f64) -> Result<(usize, Vec<f64>), Error> {
    let n = pts.len();
    if !(x >= pts[0] && x <= pts[n - 1]) {
        return Err(out_of_range(x, pts));
    }
    let m = n.min(4);
    let j = pts.partition_point(|&p| p <= x).clamp(1, n) - 1;
    let i0 = j.saturating_sub(1).min(n - m);
    let st = &pts[i0..i0 + m];
    let w = (0..m)
        .map(|k| {
            let mut l = 1.0;
            for (q, &xq) in st.iter().enumerate() {
                if q != k {
                    l *= (x - xq) / (st[k] - xq);
                }
            }
            l
        })
        .collect();
    Ok((i0, w))
}

/// Four-point Lagrange weights with their first and second derivatives.
pub fn cubic_deriv_weights(pts: &[f64], x: f64) -> Result<(usize, [Vec<f64>; 3]), Error> {
    let (i0, w) = cubic_weights(pts, x)?;
    let m = w.len();
    let st = &pts[i0..i0 + m];
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for k in 0..m {
        for a in (0..m).filter(|&a| a != k) {
            let mut prod = 1.0 / (st[k] - st[a]);
            for q in (0..m).filter(|&q| q != k && q != a) {
                prod *= (x - st[q]) / (st[k] - st[q]);
            }
            d1[k] += prod;
            for b in (0..m).filter(|&b| b != k && b != a) {
                let mut p2 = 1.0 / ((st[k] - st[a]) * (st[k] - st[b]));
                for q in (0..m).filter(|&q| q != k && q != a && q != b) {
                    p2 *= (x - st[q]) / (st[k] - st[q]);
                }
                d2[k] += p2;
            }
        }
    }
    Ok((i0, [w, d1, d2]))
}

/// Observations of one field at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    pub id: String,
    pub field: String,
    pub location: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// standard deviation of the additive noise applied (0 for clean data)
    pub noise: f64,
}

impl SensorSeries {
    pub fn validate(&self) -> Result<(), Error> {
        if !strictly_increasing(&self.times) || self.times.len() != self.values.len() {
            return Err(Error::Format(format!("sensor {}: times must be strictly increasing", self.id)));
        }
        Ok(())
    }
}

pub fn write_sensors_csv<W: Write>(w: W, axes: &[&str], series: &[SensorSeries]) -> Result<(), Error> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["sensor", "field"];
    header.extend_from_slice(axes);
    header.extend(["t", "value", "noise"]);
    wr.write_record(&header).map_err(csv_err)?;
    for s in series {
        s.validate()?;
        for (t, v) in s.times.iter().zip(&s.values) {
            let mut rec = vec![s.id.clone(), s.field.clone()];
            rec.extend(s.location.iter().map(|&x| fmt17(x)));
            rec.extend([fmt17(*t), fmt17(*v), fmt17(s.noise)]);
            wr.write_record(&rec).map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads sensors back, returning the axis names and the series in file order.
pub fn read_sensors_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<SensorSeries>), Error> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let nh = header.len();
    if nh < 6 || header[0] != "sensor" || header[1] != "field" || header[nh - 3..] != ["t", "value", "noise"] {
        return Err(Error::Format(format!("sensors.csv: unexpected header {header:?}")));
    }
    let axes = header[2..nh - 3].to_vec();
    let mut out: Vec<SensorSeries> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64, Error> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("sensors.csv: bad number '{}'", &rec[i])))
        };
        let id = &rec[0];
        if out.last().map(|s| s.id != id).unwrap_or(true) {
            if out.iter().any(|s| s.id == id) {
                return Err(Error::Format(format!("sensors.csv: rows of sensor {id} are not contiguous")));
            }
            out.push(SensorSeries {
                id: id.to_string(),
                field: rec[1].to_string(),
                location: (2..nh - 3).map(num).collect::<Result<_, _>>()?,
                times: Vec::new(),
                values: Vec::new(),
                noise: num(nh - 1)?,
            });
        }
        let s = out.last_mut().unwrap();
        s.times.push(num(nh - 3)?);
        s.values.push(num(nh - 2)?);
    }
    for s in &out {
        s.validate()?;
    }
    Ok((axes, out))
}
