//! Scalar automatic differentiation: expression graphs with reverse sweeps,
//! second-order forward jets, and reverse-over-jet parameter gradients.

mod graph;
mod jet;
mod scalar;

pub use graph::{
    Binding, BindingFrame, EmbeddedJet, Expr, Graph, GraphBuilder, JetOrder, NodeId, Op, Program, Slot,
};
pub use jet::Jet2;
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("unbound variable slot {0}")]
    Unbound(Slot),
    #[error("domain error at node {node}: {what}")]
    Domain { node: NodeId, what: &'static str },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(v: &[f64]) -> BindingFrame {
        BindingFrame::with_reals(v)
    }

    #[test]
    fn spec_examples() {
        let b = GraphBuilder::new();
        let x = b.var(Slot(0));
        let t = x.tanh();
        let sq = x.clone() * x.clone();
        let cube = sq.clone() * x.clone();
        let g = b.finish();
        assert_eq!(g.eval(t.id(), &frame(&[0.0])).unwrap(), 0.0);
        assert_eq!(g.eval(sq.id(), &frame(&[3.0])).unwrap(), 9.0);
        assert_eq!(g.grad(t.id(), &[Slot(0)], &frame(&[0.0])).unwrap()[&Slot(0)], 1.0);
        assert_eq!(g.grad(cube.id(), &[Slot(0)], &frame(&[2.0])).unwrap()[&Slot(0)], 12.0);
        assert_eq!(
            g.input_jet(cube.id(), &frame(&[2.0]), Slot(0)).unwrap(),
            Jet2::new(8.0, 12.0, 12.0)
        );

        let b = GraphBuilder::new();
        let se = b.var(Slot(0));
        let lam = 2.308;
        let k = se.powf((2.0 + 3.0 * lam) / lam);
        assert_eq!(b.finish().eval(k.id(), &frame(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_carry_node() {
        let b = GraphBuilder::new();
        let x = b.var(Slot(0));
        let l = x.ln();
        let d = b.constant(1.0) / x.clone();
        let g = b.finish();
        assert_eq!(
            g.eval(l.id(), &frame(&[-1.0])),
            Err(AdError::Domain { node: l.id(), what: "log of non-positive value" })
        );
        assert!(matches!(g.eval(d.id(), &frame(&[0.0])), Err(AdError::Domain { node, .. }) if node == d.id()));
        assert_eq!(g.eval(l.id(), &BindingFrame::new()), Err(AdError::Unbound(Slot(0))));
    }

    #[test]
    fn untouched_slot_has_zero_gradient() {
        let b = GraphBuilder::new();
        let x = b.var(Slot(0));
        let _y = b.var(Slot(1));
        let f = x.sin();
        let g = b.finish();
        let gr = g.grad(f.id(), &[Slot(0), Slot(1)], &frame(&[0.2, 5.0])).unwrap();
        assert_eq!(gr[&Slot(1)], 0.0);
    }

    #[test]
    fn residual_grad_of_scaled_second_derivative() {
        // r = c * u_xx, u = x^2
        let b = GraphBuilder::new();
        let x = b.var(Slot(0));
        let c = b.var(Slot(1));
        let u = x.clone() * x.clone();
        let uxx = b.var(Slot(2));
        let r = c.clone() * uxx;
        let g = b.finish();
        let mut fr = frame(&[0.7, 2.0]);
        fr.set(Slot(3), 0.0);
        let (val, gr) = g
            .residual_param_grad(
                r.id(),
                &[(Slot(2), EmbeddedJet::along(u.id(), Slot(0), JetOrder::Second))],
                &[Slot(1), Slot(3)],
                &fr,
            )
            .unwrap();
        assert_eq!(val, 4.0);
        assert_eq!(gr[&Slot(1)], 2.0);
        assert_eq!(gr[&Slot(3)], 0.0);
    }
}
