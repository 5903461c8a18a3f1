//! Benchmark problems as sets of fields, stages and loss terms.

use std::fmt;
use std::rc::Rc;

use ndarray::Array2;

use super::collocation::{concat, CollocationSet};
use super::fields::Need;
use crate::autodiff::{Expr, Scalar};
use crate::nn::{FourierSpec, NetworkConfig};
use crate::oracle::SensorSeries;
use crate::physics::presets::{BarryMercer, Benchmark, Stratum, Terzaghi};
use crate::physics::residuals::bm_source;
use crate::physics::{Coeffs, CoeffKind, FieldDerivs, Physics, ScaleSet, ScaledRetention};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Thermal,
    Flow,
    Solid,
}

impl Stage {
    pub const ORDER: [Stage; 3] = [Stage::Thermal, Stage::Flow, Stage::Solid];

    pub fn letter(self) -> char {
        match self {
            Stage::Thermal => 'T',
            Stage::Flow => 'F',
            Stage::Solid => 'S',
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Pde,
    Dbc,
    Nbc,
    Ic,
    Data,
}

impl TermKind {
    pub fn name(self) -> &'static str {
        match self {
            TermKind::Pde => "PDE",
            TermKind::Dbc => "DBC",
            TermKind::Nbc => "NBC",
            TermKind::Ic => "IC",
            TermKind::Data => "Data",
        }
    }
}

/// Whether a term reads a field's current parameters or the copy taken when
/// the stage started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Current,
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldUse {
    pub field: usize,
    pub need: Need,
    pub source: Source,
    /// Bounds applied to the value before it enters the residual; clamped
    /// points pass no gradient through the value.
    pub clamp: Option<(f64, f64)>,
}

impl FieldUse {
    pub fn current(field: usize, need: Need) -> Self {
        Self {
            field,
            need,
            source: Source::Current,
            clamp: None,
        }
    }

    fn snapshot(field: usize, need: Need) -> Self {
        Self {
            source: Source::Snapshot,
            ..Self::current(field, need)
        }
    }

    fn clamped(mut self, range: (f64, f64)) -> Self {
        self.clamp = Some(range);
        self
    }
}

/// Inputs of a residual in graph form.
pub struct Ctx<'a> {
    pub fields: &'a [FieldDerivs<Expr>],
    pub coeffs: &'a Coeffs<Expr>,
    pub extra: &'a [Expr],
}

pub type ResidualFn = Rc<dyn Fn(&Ctx<'_>) -> Vec<Expr>>;

/// One loss term: the mean over its points of the squared residual
/// components.
#[derive(Clone)]
pub struct TermSpec {
    pub name: String,
    pub kind: TermKind,
    /// `(x…, t)` columns
    pub points: Array2<f64>,
    /// per-point extra inputs (targets, source values, face flags), one row each
    pub extra: Array2<f64>,
    pub uses: Vec<FieldUse>,
    pub residual: ResidualFn,
}

impl fmt::Debug for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("points", &self.points.ncols())
            .field("uses", &self.uses)
            .finish()
    }
}

impl TermSpec {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct StageSpec {
    pub stage: Stage,
    /// fields whose networks this stage trains
    pub trainable: Vec<usize>,
    pub terms: Vec<TermSpec>,
}

/// A network field `offset + scale·N(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub stage: Stage,
    pub config: NetworkConfig,
    pub scale: f64,
    pub offset: f64,
}

/// Network and grid sizes of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSettings {
    pub width: usize,
    pub depth: usize,
    pub fourier: Option<FourierSpec>,
    pub seed: u64,
    pub n_space: usize,
    pub n_t: usize,
    /// half width and points per axis of the refined box around a well
    pub refine: Option<(f64, usize)>,
}

impl ProblemSettings {
    /// Network sizes and grids of the published runs.
    pub fn preset(b: Benchmark) -> Self {
        match b {
            Benchmark::Terzaghi => Self {
                width: 100,
                depth: 4,
                fourier: None,
                seed: 1,
                n_space: 41,
                n_t: 101,
                refine: None,
            },
            Benchmark::BarryMercer => Self {
                width: 100,
                depth: 4,
                fourier: Some(FourierSpec { count: 32, scale: 1.0 }),
                seed: 1,
                n_space: 21,
                n_t: 41,
                refine: Some((0.1, 11)),
            },
            Benchmark::Stratum => Self {
                width: 40,
                depth: 8,
                fourier: None,
                seed: 1,
                n_space: 41,
                n_t: 100,
                refine: None,
            },
        }
    }

    fn network(&self, inputs: usize, field: usize) -> NetworkConfig {
        let mut c = NetworkConfig::new(inputs, self.width, self.depth, self.seed.wrapping_mul(1000).wrapping_add(field as u64));
        c.fourier = self.fourier;
        c
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub benchmark: Benchmark,
    pub dim: usize,
    pub scales: ScaleSet,
    pub physics: Physics,
    pub fields: Vec<FieldSpec>,
    pub stages: Vec<StageSpec>,
    pub coeff_kinds: Vec<CoeffKind>,
    pub grid: CollocationSet,
}

impl Problem {
    pub fn field_index(&self, name: &str) -> Result<usize, Error> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::Config(format!("no field named {name}")))
    }

    pub fn stage(&self, s: Stage) -> Option<&StageSpec> {
        self.stages.iter().find(|st| st.stage == s)
    }

    pub fn term_count(&self) -> usize {
        self.stages.iter().map(|s| s.terms.len()).sum()
    }
}

fn rc(f: impl Fn(&Ctx<'_>) -> Vec<Expr> + 'static) -> ResidualFn {
    Rc::new(f)
}

fn no_extra(points: &Array2<f64>) -> Array2<f64> {
    Array2::zeros((0, points.ncols()))
}

fn term(name: &str, kind: TermKind, points: Array2<f64>, uses: Vec<FieldUse>, residual: ResidualFn) -> TermSpec {
    TermSpec {
        name: name.into(),
        kind,
        extra: no_extra(&points),
        points,
        uses,
        residual,
    }
}

/// `field = target` on a point set.
fn value_term(name: &str, kind: TermKind, points: Array2<f64>, field: usize, target: f64) -> TermSpec {
    term(
        name,
        kind,
        points,
        vec![FieldUse::current(field, Need::Value)],
        rc(move |c| vec![c.fields[0].v.clone() - target]),
    )
}

/// `∂field/∂x_axis = 0` on a point set.
fn flux_term(name: &str, points: Array2<f64>, field: usize, axis: usize) -> TermSpec {
    term(
        name,
        TermKind::Nbc,
        points,
        vec![FieldUse::current(field, Need::Grad)],
        rc(move |c| vec![c.fields[0].grad[axis].clone()]),
    )
}

/// One data term per field owned by `stage`, pooling all sensors of that
/// field.
fn data_terms(fields: &[FieldSpec], stage: Stage, sensors: &[SensorSeries]) -> Vec<TermSpec> {
    let mut out = Vec::new();
    for (fi, f) in fields.iter().enumerate().filter(|(_, f)| f.stage == stage) {
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for s in sensors.iter().filter(|s| s.field == f.name) {
            for (&t, &v) in s.times.iter().zip(&s.values) {
                let mut p = s.location.clone();
                p.push(t);
                pts.push(p);
                vals.push(v);
            }
        }
        if pts.is_empty() {
            continue;
        }
        let points = CollocationSet::points(&pts);
        out.push(TermSpec {
            name: format!("data_{}", f.name),
            kind: TermKind::Data,
            extra: Array2::from_shape_vec((1, vals.len()), vals).expect("one target per point"),
            points,
            uses: vec![FieldUse::current(fi, Need::Value)],
            residual: rc(|c| vec![c.fields[0].v.clone() - c.extra[0].clone()]),
        });
    }
    out
}

/// Output scale of a field: the largest observed magnitude, or `fallback`
/// when no sensor measures it.
fn data_scale(sensors: &[SensorSeries], field: &str, fallback: f64) -> f64 {
    let m = sensors
        .iter()
        .filter(|s| s.field == field)
        .flat_map(|s| s.values.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        m
    } else {
        fallback
    }
}

fn field(name: &str, stage: Stage, config: NetworkConfig, scale: f64) -> FieldSpec {
    FieldSpec {
        name: name.into(),
        stage,
        config,
        scale,
        offset: 0.0,
    }
}

fn grid(dim: usize, s: &ProblemSettings) -> Result<CollocationSet, Error> {
    CollocationSet::uniform(dim, s.n_space, s.n_t)
}

impl Problem {
    /// Consolidation column: pressure `p` (flow stage) and settlement `u`
    /// (solid stage), base `ȳ = 0` fixed and impermeable, top drained and
    /// loaded.
    pub fn terzaghi(pre: &Terzaghi, set: &ProblemSettings, sensors: &[SensorSeries]) -> Result<Self, Error> {
        let ph = Physics::new(&pre.scales, &pre.mat)?;
        let g = grid(1, set)?;
        let fields = vec![
            field("p", Stage::Flow, set.network(2, 0), data_scale(sensors, "p", 1.0)),
            field("u", Stage::Solid, set.network(2, 1), data_scale(sensors, "u", 1.0)),
        ];
        let (p, u) = (0, 1);
        let b = pre.mat.b;
        let q = pre.load_bar();
        let k_nu = 1.0 + 2.0 * pre.mat.c_nu();
        let p0 = pre.initial_pressure() / pre.scales.p;

        let mut flow = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![FieldUse::current(p, Need::Hess)],
                rc(move |c| vec![ph.terzaghi_residuals(&c.fields[0], &c.fields[0], c.coeffs).0]),
            ),
            value_term("dbc_top", TermKind::Dbc, g.face(0, 1.0), p, 0.0),
            flux_term("nbc_base", g.face(0, 0.0), p, 0),
            value_term("ic", TermKind::Ic, g.initial(), p, p0),
        ];
        let mut solid = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![FieldUse::current(u, Need::Space), FieldUse::current(p, Need::Grad)],
                rc(move |c| vec![ph.terzaghi_residuals(&c.fields[1], &c.fields[0], c.coeffs).1]),
            ),
            value_term("dbc_base", TermKind::Dbc, g.face(0, 0.0), u, 0.0),
            term(
                "nbc_top",
                TermKind::Nbc,
                g.face(0, 1.0),
                vec![FieldUse::current(u, Need::Grad), FieldUse::current(p, Need::Value)],
                rc(move |c| {
                    let (u, p) = (&c.fields[0], &c.fields[1]);
                    vec![c.coeffs.k_dr.clone() * u.grad[0].clone() * k_nu - p.v.clone() * b + q]
                }),
            ),
        ];
        flow.extend(data_terms(&fields, Stage::Flow, sensors));
        solid.extend(data_terms(&fields, Stage::Solid, sensors));
        Ok(Self {
            benchmark: Benchmark::Terzaghi,
            dim: 1,
            scales: pre.scales,
            physics: ph,
            stages: vec![
                StageSpec {
                    stage: Stage::Flow,
                    trainable: vec![p],
                    terms: flow,
                },
                StageSpec {
                    stage: Stage::Solid,
                    trainable: vec![u],
                    terms: solid,
                },
            ],
            fields,
            coeff_kinds: vec![CoeffKind::Permeability, CoeffKind::BulkModulus],
            grid: g,
        })
    }

    /// Injection/production square: pressure `p` (flow) and displacements
    /// `ux`, `uy` (solid). Every edge is drained, tangentially fixed and free
    /// of normal total stress.
    pub fn barry_mercer(pre: &BarryMercer, set: &ProblemSettings, sensors: &[SensorSeries]) -> Result<Self, Error> {
        let ph = Physics::new(&pre.scales, &pre.mat)?;
        let mut g = grid(2, set)?;
        let well = [pre.well.0 / pre.scales.x, pre.well.1 / pre.scales.x];
        if let Some((h, n)) = set.refine {
            g = g.refine(&well, h, n)?;
        }
        let fields = vec![
            field("p", Stage::Flow, set.network(3, 0), data_scale(sensors, "p", 1.0)),
            field("ux", Stage::Solid, set.network(3, 1), data_scale(sensors, "ux", 1.0)),
            field("uy", Stage::Solid, set.network(3, 2), data_scale(sensors, "uy", 1.0)),
        ];
        let (p, ux, uy) = (0, 1, 2);
        let b = pre.mat.b;
        let cn = pre.mat.c_nu();

        let source: Vec<f64> = g
            .interior
            .columns()
            .into_iter()
            .map(|c| bm_source(pre, c[0], c[1], 2.0 * std::f64::consts::PI * c[2]))
            .collect();
        let faces = [g.face(0, 0.0), g.face(0, 1.0), g.face(1, 0.0), g.face(1, 1.0)];
        let edges = concat(&faces);
        // 1 on faces normal to x, 0 on faces normal to y
        let flag: Vec<f64> = faces
            .iter()
            .enumerate()
            .flat_map(|(i, f)| std::iter::repeat(if i < 2 { 1.0 } else { 0.0 }).take(f.ncols()))
            .collect();
        let flag = Array2::from_shape_vec((1, flag.len()), flag).expect("one flag per point");

        let mut flow = vec![
            TermSpec {
                name: "pde".into(),
                kind: TermKind::Pde,
                extra: Array2::from_shape_vec((1, source.len()), source).expect("one source per point"),
                points: g.interior.clone(),
                uses: vec![
                    FieldUse::current(p, Need::Hess),
                    FieldUse::snapshot(p, Need::Grad),
                    FieldUse::current(ux, Need::Full),
                    FieldUse::current(uy, Need::Full),
                ],
                residual: rc(move |c| {
                    let [p, p_old, ux, uy] = [&c.fields[0], &c.fields[1], &c.fields[2], &c.fields[3]];
                    let sv = ph.bm_sigma_v_rate(ux, uy, &p_old.t, c.coeffs);
                    vec![ph.bm_residuals(p, ux, uy, &sv, &c.extra[0], c.coeffs).0]
                }),
            },
            value_term("dbc", TermKind::Dbc, edges.clone(), p, 0.0),
            value_term("ic", TermKind::Ic, g.initial(), p, 0.0),
        ];
        let mut solid = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![
                    FieldUse::current(ux, Need::Space),
                    FieldUse::current(uy, Need::Space),
                    FieldUse::current(p, Need::Grad),
                ],
                rc(move |c| {
                    let z = c.coeffs.k.lift(0.0);
                    let (_, rx, ry) = ph.bm_residuals(&c.fields[2], &c.fields[0], &c.fields[1], &z, &z, c.coeffs);
                    vec![rx, ry]
                }),
            ),
            TermSpec {
                name: "dbc".into(),
                kind: TermKind::Dbc,
                extra: flag.clone(),
                points: edges.clone(),
                uses: vec![FieldUse::current(ux, Need::Value), FieldUse::current(uy, Need::Value)],
                residual: rc(|c| {
                    let f = &c.extra[0];
                    vec![f.clone() * c.fields[1].v.clone() + f.rsub(1.0) * c.fields[0].v.clone()]
                }),
            },
            TermSpec {
                name: "nbc".into(),
                kind: TermKind::Nbc,
                extra: flag,
                points: edges,
                uses: vec![
                    FieldUse::current(ux, Need::Grad),
                    FieldUse::current(uy, Need::Grad),
                    FieldUse::current(p, Need::Value),
                ],
                residual: rc(move |c| {
                    let (ux, uy, p) = (&c.fields[0], &c.fields[1], &c.fields[2]);
                    let f = &c.extra[0];
                    let div = ux.grad[0].clone() + uy.grad[1].clone();
                    let k = &c.coeffs.k_dr;
                    let sxx = k.clone() * (div.clone() * (1.0 - cn) + ux.grad[0].clone() * (3.0 * cn)) - p.v.clone() * b;
                    let syy = k.clone() * (div * (1.0 - cn) + uy.grad[1].clone() * (3.0 * cn)) - p.v.clone() * b;
                    vec![f.clone() * sxx + f.rsub(1.0) * syy]
                }),
            },
        ];
        flow.extend(data_terms(&fields, Stage::Flow, sensors));
        solid.extend(data_terms(&fields, Stage::Solid, sensors));
        Ok(Self {
            benchmark: Benchmark::BarryMercer,
            dim: 2,
            scales: pre.scales,
            physics: ph,
            stages: vec![
                StageSpec {
                    stage: Stage::Flow,
                    trainable: vec![p],
                    terms: flow,
                },
                StageSpec {
                    stage: Stage::Solid,
                    trainable: vec![ux, uy],
                    terms: solid,
                },
            ],
            fields,
            coeff_kinds: vec![CoeffKind::Permeability, CoeffKind::BulkModulus],
            grid: g,
        })
    }

    /// Unsaturated stratum: temperature `T`, capillary pressure `pc` and
    /// settlement `u`. The top is drained at fixed suction and temperature
    /// and free of traction; the base is fixed, impermeable and insulated.
    pub fn stratum(pre: &Stratum, set: &ProblemSettings, sensors: &[SensorSeries]) -> Result<Self, Error> {
        let ph = Physics::new(&pre.scales, &pre.mat)?;
        let g = grid(1, set)?;
        let s = &pre.scales;
        let fields = vec![
            field("T", Stage::Thermal, set.network(2, 0), data_scale(sensors, "T", pre.temp_top / s.temp)),
            field("pc", Stage::Flow, set.network(2, 1), data_scale(sensors, "pc", pre.pc_top / s.p)),
            field("u", Stage::Solid, set.network(2, 2), data_scale(sensors, "u", 0.1)),
        ];
        let (tf, pc, u) = (0, 1, 2);
        let ret = ScaledRetention {
            bc: pre.bc,
            p_scale: s.p,
        };
        let (lo, hi) = pre.bc.pc_bounds();
        let clamp = (lo / s.p, hi / s.p);
        let pc0 = pre.pc_init / s.p;
        let t0 = pre.temp_init / s.temp;
        let sp0 = ret.s_w(&pc0) * pc0;
        let b = pre.mat.b;
        let k_nu = 1.0 + 2.0 * pre.mat.c_nu();
        let thermal_strain = ph.groups.beta_s * ph.groups.n_t;

        let mut thermal = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![FieldUse::current(tf, Need::Hess), FieldUse::current(pc, Need::Grad).clamped(clamp)],
                rc(move |c| {
                    let z = c.coeffs.k.lift(0.0);
                    let u = FieldDerivs::constant(z.clone(), 1);
                    vec![ph.thm_residuals(&ret, &u, &c.fields[1], &c.fields[0], &z, c.coeffs).2]
                }),
            ),
            value_term("dbc_top", TermKind::Dbc, g.face(0, 1.0), tf, pre.temp_top / s.temp),
            flux_term("nbc_base", g.face(0, 0.0), tf, 0),
            value_term("ic", TermKind::Ic, g.initial(), tf, t0),
        ];
        let mut flow = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![
                    FieldUse::current(pc, Need::Hess).clamped(clamp),
                    FieldUse::snapshot(pc, Need::Grad).clamped(clamp),
                    FieldUse::current(u, Need::Full),
                    FieldUse::current(tf, Need::Grad),
                ],
                rc(move |c| {
                    let [pc, pc_old, u, t] = [&c.fields[0], &c.fields[1], &c.fields[2], &c.fields[3]];
                    let sv = ph.thm_sigma_v_rate(&ret, u, pc_old, t, c.coeffs);
                    vec![ph.thm_residuals(&ret, u, pc, t, &sv, c.coeffs).1]
                }),
            ),
            value_term("dbc_top", TermKind::Dbc, g.face(0, 1.0), pc, pre.pc_top / s.p),
            flux_term("nbc_base", g.face(0, 0.0), pc, 0),
            value_term("ic", TermKind::Ic, g.initial(), pc, pc0),
        ];
        let mut solid = vec![
            term(
                "pde",
                TermKind::Pde,
                g.interior.clone(),
                vec![
                    FieldUse::current(u, Need::Space),
                    FieldUse::current(pc, Need::Grad).clamped(clamp),
                    FieldUse::current(tf, Need::Grad),
                ],
                rc(move |c| {
                    let z = c.coeffs.k.lift(0.0);
                    vec![ph.thm_residuals(&ret, &c.fields[0], &c.fields[1], &c.fields[2], &z, c.coeffs).0]
                }),
            ),
            value_term("dbc_base", TermKind::Dbc, g.face(0, 0.0), u, 0.0),
            term(
                "nbc_top",
                TermKind::Nbc,
                g.face(0, 1.0),
                vec![
                    FieldUse::current(u, Need::Grad),
                    FieldUse::current(pc, Need::Value).clamped(clamp),
                    FieldUse::current(tf, Need::Value),
                ],
                rc(move |c| {
                    let (u, pc, t) = (&c.fields[0], &c.fields[1], &c.fields[2]);
                    let k = &c.coeffs.k_dr;
                    vec![
                        k.clone() * u.grad[0].clone() * k_nu + (ret.s_w(&pc.v) * pc.v.clone() - sp0) * b
                            - k.clone() * (t.v.clone() - t0) * thermal_strain,
                    ]
                }),
            ),
            value_term("ic", TermKind::Ic, g.initial(), u, 0.0),
        ];
        thermal.extend(data_terms(&fields, Stage::Thermal, sensors));
        flow.extend(data_terms(&fields, Stage::Flow, sensors));
        solid.extend(data_terms(&fields, Stage::Solid, sensors));
        Ok(Self {
            benchmark: Benchmark::Stratum,
            dim: 1,
            scales: pre.scales,
            physics: ph,
            stages: vec![
                StageSpec {
                    stage: Stage::Thermal,
                    trainable: vec![tf],
                    terms: thermal,
                },
                StageSpec {
                    stage: Stage::Flow,
                    trainable: vec![pc],
                    terms: flow,
                },
                StageSpec {
                    stage: Stage::Solid,
                    trainable: vec![u],
                    terms: solid,
                },
            ],
            fields,
            coeff_kinds: CoeffKind::ALL.to_vec(),
            grid: g,
        })
    }

    /// Problem of a benchmark with its default preset.
    pub fn preset(b: Benchmark, set: &ProblemSettings, sensors: &[SensorSeries]) -> Result<Self, Error> {
        match b {
            Benchmark::Terzaghi => Self::terzaghi(&Terzaghi::default(), set, sensors),
            Benchmark::BarryMercer => Self::barry_mercer(&BarryMercer::default(), set, sensors),
            Benchmark::Stratum => Self::stratum(&Stratum::default(), set, sensors),
        }
    }
}
