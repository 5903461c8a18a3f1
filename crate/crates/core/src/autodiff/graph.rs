//! Scalar expression graph with reverse-mode sweeps over plain values and over
//! second-order input jets.
//!
//! Nodes are appended in construction order, so node index order is a valid
//! topological order. A [`Program`] is the compacted list of nodes reachable
//! from a set of roots; all sweeps run over programs in ascending node order,
//! which keeps accumulation order fixed and results bit-reproducible.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use super::jet::{pow_derivs, Jet2};
use super::AdError;

/// Binding slot of a variable leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot(pub usize);

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

/// Index of a node inside its [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Const(f64),
    Var(Slot),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    /// `x^e` for a fixed real exponent.
    PowReal(NodeId, f64),
    Exp(NodeId),
    Log(NodeId),
    Tanh(NodeId),
    Sin(NodeId),
    Cos(NodeId),
}

impl Op {
    fn operands(&self) -> (Option<NodeId>, Option<NodeId>) {
        use Op::*;
        match *self {
            Const(_) | Var(_) => (None, None),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => (Some(a), Some(b)),
            Neg(a) | PowReal(a, _) | Exp(a) | Log(a) | Tanh(a) | Sin(a) | Cos(a) => (Some(a), None),
        }
    }

    fn remap(&self, map: &[u32]) -> Op {
        use Op::*;
        let m = |n: NodeId| NodeId(map[n.index()]);
        match *self {
            Const(c) => Const(c),
            Var(s) => Var(s),
            Add(a, b) => Add(m(a), m(b)),
            Sub(a, b) => Sub(m(a), m(b)),
            Mul(a, b) => Mul(m(a), m(b)),
            Div(a, b) => Div(m(a), m(b)),
            Neg(a) => Neg(m(a)),
            PowReal(a, e) => PowReal(m(a), e),
            Exp(a) => Exp(m(a)),
            Log(a) => Log(m(a)),
            Tanh(a) => Tanh(m(a)),
            Sin(a) => Sin(m(a)),
            Cos(a) => Cos(m(a)),
        }
    }
}

/// Value bound to a variable slot for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binding {
    Real(f64),
    /// Jet seed; `d` is this slot's component of the seeded input direction.
    Jet(Jet2),
}

impl Binding {
    pub fn value(&self) -> f64 {
        match *self {
            Binding::Real(v) => v,
            Binding::Jet(j) => j.v,
        }
    }

    fn jet(&self) -> Jet2 {
        match *self {
            Binding::Real(v) => Jet2::constant(v),
            Binding::Jet(j) => j,
        }
    }
}

/// Slot bindings for one evaluation pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BindingFrame {
    slots: Vec<Option<Binding>>,
}

impl BindingFrame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reals(values: &[f64]) -> Self {
        Self {
            slots: values.iter().map(|&v| Some(Binding::Real(v))).collect(),
        }
    }

    pub fn bind(&mut self, slot: Slot, b: Binding) -> &mut Self {
        if self.slots.len() <= slot.0 {
            self.slots.resize(slot.0 + 1, None);
        }
        self.slots[slot.0] = Some(b);
        self
    }

    pub fn set(&mut self, slot: Slot, v: f64) -> &mut Self {
        self.bind(slot, Binding::Real(v))
    }

    pub fn get(&self, slot: Slot) -> Option<Binding> {
        self.slots.get(slot.0).copied().flatten()
    }

    /// Copy of this frame with `direction` seeded as a jet (all other
    /// bindings demoted to plain reals).
    pub fn seeded(&self, direction: &[(Slot, f64)]) -> Result<Self, AdError> {
        let mut out = BindingFrame {
            slots: self
                .slots
                .iter()
                .map(|b| b.map(|b| Binding::Real(b.value())))
                .collect(),
        };
        for &(slot, w) in direction {
            let v = self.get(slot).ok_or(AdError::Unbound(slot))?.value();
            out.bind(slot, Binding::Jet(Jet2::new(v, w, 0.0)));
        }
        Ok(out)
    }
}

/// Immutable expression graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Graph {
    ops: Vec<Op>,
}

/// Shared arena used while building a graph with operator overloading.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    ops: Rc<RefCell<Vec<Op>>>,
}

/// Handle to a node under construction.
#[derive(Clone)]
pub struct Expr {
    ops: Rc<RefCell<Vec<Op>>>,
    id: NodeId,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.id)
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, op: Op) -> Expr {
        let mut ops = self.ops.borrow_mut();
        ops.push(op);
        Expr {
            ops: Rc::clone(&self.ops),
            id: NodeId((ops.len() - 1) as u32),
        }
    }

    pub fn var(&self, slot: Slot) -> Expr {
        self.push(Op::Var(slot))
    }

    pub fn constant(&self, c: f64) -> Expr {
        self.push(Op::Const(c))
    }

    pub fn len(&self) -> usize {
        self.ops.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Freezes the arena built so far.
    pub fn finish(&self) -> Graph {
        Graph {
            ops: self.ops.borrow().clone(),
        }
    }
}

impl Expr {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub(crate) fn push(&self, op: Op) -> Expr {
        let mut ops = self.ops.borrow_mut();
        ops.push(op);
        Expr {
            ops: Rc::clone(&self.ops),
            id: NodeId((ops.len() - 1) as u32),
        }
    }

    pub(crate) fn binary(&self, other: &Expr, f: fn(NodeId, NodeId) -> Op) -> Expr {
        debug_assert!(Rc::ptr_eq(&self.ops, &other.ops), "operands from different graphs");
        self.push(f(self.id, other.id))
    }

    pub fn builder(&self) -> GraphBuilder {
        GraphBuilder {
            ops: Rc::clone(&self.ops),
        }
    }
}

impl Graph {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn op(&self, id: NodeId) -> Op {
        self.ops[id.index()]
    }

    /// Compiles the sub-graph reachable from `roots`.
    pub fn program(&self, roots: &[NodeId]) -> Program {
        let mut reach = vec![false; self.ops.len()];
        for r in roots {
            reach[r.index()] = true;
        }
        for i in (0..self.ops.len()).rev() {
            if !reach[i] {
                continue;
            }
            let (a, b) = self.ops[i].operands();
            for n in [a, b].into_iter().flatten() {
                reach[n.index()] = true;
            }
        }
        let mut map = vec![u32::MAX; self.ops.len()];
        let mut ops = Vec::new();
        let mut origin = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            if reach[i] {
                map[i] = ops.len() as u32;
                ops.push(op.remap(&map));
                origin.push(NodeId(i as u32));
            }
        }
        let mut slots: Vec<Slot> = ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(s) => Some(*s),
                _ => None,
            })
            .collect();
        slots.sort();
        slots.dedup();
        Program {
            ops,
            origin,
            roots: roots.iter().map(|r| map[r.index()] as usize).collect(),
            slots,
        }
    }

    pub fn eval(&self, root: NodeId, frame: &BindingFrame) -> Result<f64, AdError> {
        let p = self.program(&[root]);
        let vals = p.forward(frame)?;
        Ok(vals[p.roots[0]])
    }

    /// Reverse-mode gradient of `root` w.r.t. `wrt`; untouched slots map to 0.
    pub fn grad(
        &self,
        root: NodeId,
        wrt: &[Slot],
        frame: &BindingFrame,
    ) -> Result<BTreeMap<Slot, f64>, AdError> {
        let p = self.program(&[root]);
        let vals = p.forward(frame)?;
        let adj = p.reverse(&vals, 0, 1.0);
        Ok(wrt.iter().map(|s| (*s, adj.get(s).copied().unwrap_or(0.0))).collect())
    }

    /// `(f, ∂f/∂axis, ∂²f/∂axis²)` by forward jet propagation.
    pub fn input_jet(&self, root: NodeId, frame: &BindingFrame, axis: Slot) -> Result<Jet2, AdError> {
        self.directional_jet(root, frame, &[(axis, 1.0)])
    }

    /// Jet of `root` along an arbitrary input direction.
    pub fn directional_jet(
        &self,
        root: NodeId,
        frame: &BindingFrame,
        direction: &[(Slot, f64)],
    ) -> Result<Jet2, AdError> {
        let p = self.program(&[root]);
        let seeded = frame.seeded(direction)?;
        let jets = p.forward_jets(&seeded)?;
        Ok(jets[p.roots[0]])
    }

    /// Gradient of a residual that embeds input-derivative components of
    /// sub-expressions, with respect to `params`.
    ///
    /// Each `(placeholder, jet)` pair binds the placeholder slot to one jet
    /// component of `jet.root`; the residual reads it like any other
    /// variable. Parameters may occur both inside the embedded sub-graphs and
    /// directly in the residual. Returns the residual value and gradient.
    pub fn residual_param_grad(
        &self,
        residual: NodeId,
        embeds: &[(Slot, EmbeddedJet)],
        params: &[Slot],
        frame: &BindingFrame,
    ) -> Result<(f64, BTreeMap<Slot, f64>), AdError> {
        // one forward jet pass per distinct (root, direction)
        let mut passes: Vec<(NodeId, Vec<(Slot, f64)>)> = Vec::new();
        let mut pass_of = Vec::with_capacity(embeds.len());
        for (_, e) in embeds {
            let key = (e.root, e.direction.clone());
            let idx = match passes.iter().position(|p| *p == key) {
                Some(i) => i,
                None => {
                    passes.push(key);
                    passes.len() - 1
                }
            };
            pass_of.push(idx);
        }
        let mut compiled = Vec::with_capacity(passes.len());
        for (root, dir) in &passes {
            let p = self.program(&[*root]);
            let seeded = frame.seeded(dir)?;
            let jets = p.forward_jets(&seeded)?;
            compiled.push((p, jets));
        }

        let mut outer = frame.clone();
        for ((slot, e), &pi) in embeds.iter().zip(&pass_of) {
            let (p, jets) = &compiled[pi];
            outer.set(*slot, e.order.pick(jets[p.roots[0]]));
        }
        let prog = self.program(&[residual]);
        let vals = prog.forward(&outer)?;
        let value = vals[prog.roots[0]];
        let adj = prog.reverse(&vals, 0, 1.0);

        let mut grad: BTreeMap<Slot, f64> = params.iter().map(|s| (*s, 0.0)).collect();
        for (s, g) in grad.iter_mut() {
            if let Some(a) = adj.get(s) {
                *g += a;
            }
        }
        for (pi, (p, jets)) in compiled.iter().enumerate() {
            let mut seed = Jet2::default();
            for ((slot, e), _) in embeds.iter().zip(&pass_of).filter(|(_, &q)| q == pi) {
                let a = adj.get(slot).copied().unwrap_or(0.0);
                e.order.accumulate(&mut seed, a);
            }
            let slot_adj = p.reverse_jets(jets, 0, seed);
            for (s, g) in grad.iter_mut() {
                if let Some(a) = slot_adj.get(s) {
                    *g += a.v;
                }
            }
        }
        Ok((value, grad))
    }
}

/// Which component of a jet an embedding reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

impl JetOrder {
    fn pick(self, j: Jet2) -> f64 {
        match self {
            JetOrder::Value => j.v,
            JetOrder::First => j.d,
            JetOrder::Second => j.dd,
        }
    }

    fn accumulate(self, j: &mut Jet2, a: f64) {
        match self {
            JetOrder::Value => j.v += a,
            JetOrder::First => j.d += a,
            JetOrder::Second => j.dd += a,
        }
    }
}

/// A derivative component of a sub-expression w.r.t. an input direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedJet {
    pub root: NodeId,
    pub direction: Vec<(Slot, f64)>,
    pub order: JetOrder,
}

impl EmbeddedJet {
    pub fn along(root: NodeId, axis: Slot, order: JetOrder) -> Self {
        Self {
            root,
            direction: vec![(axis, 1.0)],
            order,
        }
    }
}

/// Compacted, topologically ordered sub-graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    origin: Vec<NodeId>,
    roots: Vec<usize>,
    slots: Vec<Slot>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Variable slots read by this program, ascending.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    fn domain(&self, i: usize, what: &'static str) -> AdError {
        AdError::Domain {
            node: self.origin[i],
            what,
        }
    }

    /// Plain forward sweep; returns every node value.
    pub fn forward(&self, frame: &BindingFrame) -> Result<Vec<f64>, AdError> {
        let mut v = vec![0.0; self.ops.len()];
        self.forward_into(|s| frame.get(s).map(|b| b.value()), &mut v)?;
        Ok(v)
    }

    /// Forward sweep reading slot values from a dense slice, writing into
    /// `vals` (resized as needed). Used on the hot path.
    pub fn forward_dense(&self, slots: &[f64], vals: &mut Vec<f64>) -> Result<(), AdError> {
        vals.resize(self.ops.len(), 0.0);
        self.forward_into(|s| slots.get(s.0).copied(), vals)
    }

    fn forward_into(
        &self,
        lookup: impl Fn(Slot) -> Option<f64>,
        v: &mut [f64],
    ) -> Result<(), AdError> {
        use Op::*;
        for i in 0..self.ops.len() {
            v[i] = match self.ops[i] {
                Const(c) => c,
                Var(s) => lookup(s).ok_or(AdError::Unbound(s))?,
                Add(a, b) => v[a.index()] + v[b.index()],
                Sub(a, b) => v[a.index()] - v[b.index()],
                Mul(a, b) => v[a.index()] * v[b.index()],
                Div(a, b) => {
                    let d = v[b.index()];
                    if d == 0.0 {
                        return Err(self.domain(i, "division by zero"));
                    }
                    v[a.index()] / d
                }
                Neg(a) => -v[a.index()],
                PowReal(a, e) => {
                    pow_derivs(v[a.index()], e)
                        .ok_or_else(|| self.domain(i, "power of non-positive base"))?
                        .0
                }
                Exp(a) => v[a.index()].exp(),
                Log(a) => {
                    let x = v[a.index()];
                    if x <= 0.0 {
                        return Err(self.domain(i, "log of non-positive value"));
                    }
                    x.ln()
                }
                Tanh(a) => v[a.index()].tanh(),
                Sin(a) => v[a.index()].sin(),
                Cos(a) => v[a.index()].cos(),
            };
        }
        Ok(())
    }

    /// Value of root `k` after a forward sweep.
    pub fn root_value(&self, vals: &[f64], k: usize) -> f64 {
        vals[self.roots[k]]
    }

    /// Reverse sweep from root `k` seeded with `seed`; returns slot adjoints.
    pub fn reverse(&self, vals: &[f64], k: usize, seed: f64) -> BTreeMap<Slot, f64> {
        let mut adj = vec![0.0; self.ops.len()];
        adj[self.roots[k]] = seed;
        self.reverse_sweep(vals, &mut adj);
        let mut out = BTreeMap::new();
        for (i, op) in self.ops.iter().enumerate() {
            if let Op::Var(s) = op {
                *out.entry(*s).or_insert(0.0) += adj[i];
            }
        }
        out
    }

    /// Reverse sweep seeding every root `k` with `seeds[k]`, accumulating
    /// slot adjoints into the dense `slot_adj` (indexed by slot number).
    pub fn reverse_dense(&self, vals: &[f64], seeds: &[f64], adj: &mut Vec<f64>, slot_adj: &mut [f64]) {
        adj.clear();
        adj.resize(self.ops.len(), 0.0);
        for (k, &r) in self.roots.iter().enumerate() {
            adj[r] += seeds[k];
        }
        self.reverse_sweep(vals, adj);
        for (i, op) in self.ops.iter().enumerate() {
            if let Op::Var(s) = op {
                slot_adj[s.0] += adj[i];
            }
        }
    }

    fn reverse_sweep(&self, v: &[f64], adj: &mut [f64]) {
        use Op::*;
        for i in (0..self.ops.len()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match self.ops[i] {
                Const(_) | Var(_) => {}
                Add(a, b) => {
                    adj[a.index()] += g;
                    adj[b.index()] += g;
                }
                Sub(a, b) => {
                    adj[a.index()] += g;
                    adj[b.index()] -= g;
                }
                Mul(a, b) => {
                    adj[a.index()] += g * v[b.index()];
                    adj[b.index()] += g * v[a.index()];
                }
                Div(a, b) => {
                    let d = v[b.index()];
                    adj[a.index()] += g / d;
                    adj[b.index()] -= g * v[i] / d;
                }
                Neg(a) => adj[a.index()] -= g,
                PowReal(a, e) => {
                    let (_, d1, _, _) = pow_derivs(v[a.index()], e).unwrap_or_default();
                    adj[a.index()] += g * d1;
                }
                Exp(a) => adj[a.index()] += g * v[i],
                Log(a) => adj[a.index()] += g / v[a.index()],
                Tanh(a) => adj[a.index()] += g * (1.0 - v[i] * v[i]),
                Sin(a) => adj[a.index()] += g * v[a.index()].cos(),
                Cos(a) => adj[a.index()] -= g * v[a.index()].sin(),
            }
        }
    }

    /// Forward sweep in second-order jet arithmetic.
    pub fn forward_jets(&self, frame: &BindingFrame) -> Result<Vec<Jet2>, AdError> {
        use Op::*;
        let mut v: Vec<Jet2> = Vec::with_capacity(self.ops.len());
        for i in 0..self.ops.len() {
            let j = match self.ops[i] {
                Const(c) => Jet2::constant(c),
                Var(s) => frame.get(s).ok_or(AdError::Unbound(s))?.jet(),
                Add(a, b) => v[a.index()] + v[b.index()],
                Sub(a, b) => v[a.index()] - v[b.index()],
                Mul(a, b) => v[a.index()] * v[b.index()],
                Div(a, b) => {
                    if v[b.index()].v == 0.0 {
                        return Err(self.domain(i, "division by zero"));
                    }
                    v[a.index()] / v[b.index()]
                }
                Neg(a) => -v[a.index()],
                PowReal(a, e) => {
                    let x = v[a.index()];
                    let (f0, f1, f2, _) = pow_derivs(x.v, e)
                        .ok_or_else(|| self.domain(i, "power of non-positive base"))?;
                    x.chain(f0, f1, f2)
                }
                Exp(a) => v[a.index()].exp(),
                Log(a) => {
                    if v[a.index()].v <= 0.0 {
                        return Err(self.domain(i, "log of non-positive value"));
                    }
                    v[a.index()].ln()
                }
                Tanh(a) => v[a.index()].tanh(),
                Sin(a) => v[a.index()].sin(),
                Cos(a) => v[a.index()].cos(),
            };
            v.push(j);
        }
        Ok(v)
    }

    /// Reverse sweep through a jet forward pass: given the adjoint of the
    /// jet components of root `k`, returns the jet adjoints of every slot.
    /// The `.v` part of a slot adjoint is the derivative w.r.t. its value.
    pub fn reverse_jets(&self, jets: &[Jet2], k: usize, seed: Jet2) -> BTreeMap<Slot, Jet2> {
        use Op::*;
        let n = self.ops.len();
        let mut adj = vec![Jet2::default(); n];
        adj[self.roots[k]] = seed;
        for i in (0..n).rev() {
            let g = adj[i];
            if g == Jet2::default() {
                continue;
            }
            match self.ops[i] {
                Const(_) | Var(_) => {}
                Add(a, b) => {
                    adj[a.index()] = adj[a.index()] + g;
                    adj[b.index()] = adj[b.index()] + g;
                }
                Sub(a, b) => {
                    adj[a.index()] = adj[a.index()] + g;
                    adj[b.index()] = adj[b.index()] - g;
                }
                Mul(a, b) => {
                    let (x, y) = (jets[a.index()], jets[b.index()]);
                    let ga = mul_adjoint(g, y);
                    let gb = mul_adjoint(g, x);
                    adj[a.index()] = adj[a.index()] + ga;
                    adj[b.index()] = adj[b.index()] + gb;
                }
                Div(a, b) => {
                    // a / b = a * r, r = 1/b
                    let (x, y) = (jets[a.index()], jets[b.index()]);
                    let r = y.recip();
                    adj[a.index()] = adj[a.index()] + mul_adjoint(g, r);
                    let gr = mul_adjoint(g, x);
                    let inv = 1.0 / y.v;
                    let f1 = -inv * inv;
                    let f2 = 2.0 * inv * inv * inv;
                    let f3 = -6.0 * inv * inv * inv * inv;
                    adj[b.index()] = adj[b.index()] + unary_adjoint(gr, y, f1, f2, f3);
                }
                Neg(a) => adj[a.index()] = adj[a.index()] - g,
                PowReal(a, e) => {
                    let x = jets[a.index()];
                    let (_, f1, f2, f3) = pow_derivs(x.v, e).unwrap_or_default();
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, f1, f2, f3);
                }
                Exp(a) => {
                    let x = jets[a.index()];
                    let e = x.v.exp();
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, e, e, e);
                }
                Log(a) => {
                    let x = jets[a.index()];
                    let r = 1.0 / x.v;
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, r, -r * r, 2.0 * r * r * r);
                }
                Tanh(a) => {
                    let x = jets[a.index()];
                    let t = jets[i].v;
                    let s = 1.0 - t * t;
                    let f2 = -2.0 * t * s;
                    let f3 = -2.0 * s * s + 4.0 * t * t * s;
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, s, f2, f3);
                }
                Sin(a) => {
                    let x = jets[a.index()];
                    let (s, c) = x.v.sin_cos();
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, c, -s, -c);
                }
                Cos(a) => {
                    let x = jets[a.index()];
                    let (s, c) = x.v.sin_cos();
                    adj[a.index()] = adj[a.index()] + unary_adjoint(g, x, -s, -c, s);
                }
            }
        }
        let mut out: BTreeMap<Slot, Jet2> = BTreeMap::new();
        for (i, op) in self.ops.iter().enumerate() {
            if let Op::Var(s) = op {
                let e = out.entry(*s).or_default();
                *e = *e + adj[i];
            }
        }
        out
    }
}

/// Adjoint of `u = x ∘ y` (jet product) w.r.t. `x`, given `ū` and `y`.
#[inline]
fn mul_adjoint(g: Jet2, y: Jet2) -> Jet2 {
    Jet2::new(
        g.v * y.v + g.d * y.d + g.dd * y.dd,
        g.d * y.v + 2.0 * g.dd * y.d,
        g.dd * y.v,
    )
}

/// Adjoint of `u = f(x)` in jet arithmetic given `f', f'', f'''` at `x.v`.
#[inline]
fn unary_adjoint(g: Jet2, x: Jet2, f1: f64, f2: f64, f3: f64) -> Jet2 {
    Jet2::new(
        g.v * f1 + g.d * f2 * x.d + g.dd * (f3 * x.d * x.d + f2 * x.dd),
        g.d * f1 + 2.0 * g.dd * f2 * x.d,
        g.dd * f1,
    )
}
