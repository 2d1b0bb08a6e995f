mod common;

use common::*;
use rand::Rng;
use wplzx::rewrite::{color_change, curvature_guided_normalize, potential};
use wplzx::semantics::TOL;
use wplzx::{
    equal_up_to_global_phase, equal_up_to_scalar, evaluate, replay, wzcc_normalize, DiagramBuilder, NodeKind, Pin,
    RationalAngle,
};

#[test]
fn fusion_order_does_not_matter() {
    let mut r = rng(1);
    for _ in 0..60 {
        let n = r.gen_range(3..=5);
        let d = random_region(&mut r, n);
        let reference = whole_label(&d);
        let mut finals = Vec::new();
        every_fusion_order(
            &d,
            &mut |step| {
                let l = whole_label(step);
                assert_eq!((l.grid, l.theta), (reference.grid, reference.theta));
            },
            &mut |end| finals.push(whole_label(end)),
        );
        assert!(finals.windows(2).all(|w| w[0] == w[1]));
        assert_eq!((finals[0].in_arity, finals[0].out_arity), (reference.in_arity, reference.out_arity));
    }
}

#[test]
fn normalization_is_sound_and_replayable() {
    for seed in 0..40 {
        let d = random_diagram(seed, 8, 10);
        let n = wzcc_normalize(&d).unwrap();
        assert!(
            equal_up_to_global_phase(&evaluate(&d).unwrap(), &evaluate(&n.diagram).unwrap(), TOL).unwrap(),
            "seed {seed}"
        );
        assert_eq!(replay(&d, &n.trace).unwrap(), n.diagram);
        let again = wzcc_normalize(&n.diagram).unwrap();
        assert_eq!(again.diagram, n.diagram);
        assert!(n.diagram.node_count() <= d.node_count());
    }
}

#[test]
fn curvature_guided_lowers_potential() {
    for seed in 100..130 {
        let d = random_diagram(seed, 6, 10);
        let n = curvature_guided_normalize(&d).unwrap();
        assert!(potential(&n.diagram) <= potential(&d));
        assert!(equal_up_to_global_phase(&evaluate(&d).unwrap(), &evaluate(&n.diagram).unwrap(), TOL).unwrap());
    }
}

#[test]
fn bialgebra_hopf_and_color_change() {
    let zero = RationalAngle::ZERO;
    let mut b = DiagramBuilder::new(2, 2);
    let (z0, z1) = (b.z(1, zero, 1), b.z(1, zero, 1));
    let (x0, x1) = (b.x(1, zero, 2), b.x(1, zero, 2));
    b.connect(Pin::In(0), Pin::Node(z0)).connect(Pin::In(1), Pin::Node(z1));
    b.connect(Pin::Node(z0), Pin::Node(x0)).connect(Pin::Node(z0), Pin::Node(x1));
    b.connect(Pin::Node(z1), Pin::Node(x0)).connect(Pin::Node(z1), Pin::Node(x1));
    b.connect(Pin::Node(x0), Pin::Out(0)).connect(Pin::Node(x1), Pin::Out(1));
    let lhs = b.build().unwrap();
    let mut b = DiagramBuilder::new(2, 2);
    let x = b.x(1, zero, 2);
    let z = b.z(1, zero, 1);
    b.connect(Pin::In(0), Pin::Node(x)).connect(Pin::In(1), Pin::Node(x));
    b.connect(Pin::Node(x), Pin::Node(z));
    b.connect(Pin::Node(z), Pin::Out(0)).connect(Pin::Node(z), Pin::Out(1));
    let rhs = b.build().unwrap();
    assert!(equal_up_to_scalar(&evaluate(&lhs).unwrap(), &evaluate(&rhs).unwrap(), TOL).unwrap());

    let mut b = DiagramBuilder::new(1, 1);
    let z = b.z(1, zero, 1);
    let x = b.x(1, zero, 2);
    b.connect(Pin::In(0), Pin::Node(z));
    b.connect(Pin::Node(z), Pin::Node(x)).connect(Pin::Node(z), Pin::Node(x));
    b.connect(Pin::Node(x), Pin::Out(0));
    let hopf = b.build().unwrap();
    let mut b = DiagramBuilder::new(1, 1);
    let z = b.z(1, zero, 1);
    let x = b.x(1, zero, 0);
    b.connect(Pin::In(0), Pin::Node(z)).connect(Pin::Node(x), Pin::Out(0));
    let split = b.build().unwrap();
    assert!(equal_up_to_scalar(&evaluate(&hopf).unwrap(), &evaluate(&split).unwrap(), TOL).unwrap());

    for seed in 0..20 {
        let d = random_diagram(seed + 500, 6, 8);
        for s in d.spiders().map(|s| s.id).collect::<Vec<_>>() {
            let c = color_change(&d, s).unwrap();
            assert_ne!(c.node(s).map(|n| n.kind), Some(NodeKind::Hadamard));
            assert!(equal_up_to_global_phase(&evaluate(&d).unwrap(), &evaluate(&c).unwrap(), TOL).unwrap());
        }
    }
}
