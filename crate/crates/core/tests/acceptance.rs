//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use num_rational::Rational64;
use rand::Rng;
use wplzx::datasets::{gen_hea_instance, gen_random_wplzx_instance, snapped_angles};
use wplzx::geometry::{curvature_gradient, ratio_map_gradient, DEFAULT_STEP};
use wplzx::masd::{
    drg_toy, lambda_sweep, masd_decode, min_weight_perfect_matching, DecodeOptions, DefectVertex, Exactness,
    RiskPair, SweepConfig, WeightMode, WindingModel,
};
use wplzx::metrics::diagram_counts;
use wplzx::rewrite::{color_change, fused_label};
use wplzx::semantics::{evaluate_state, fidelity, TOL};
use wplzx::{
    add_on_lcm, circuit_to_diagram, csc, edge_weight, equal_up_to_global_phase, equal_up_to_scalar, evaluate,
    orbifold_euler_characteristic, pqvr, scalar_curvature, winding_difference, wzcc_normalize, AnisotropyParams,
    DiagramBuilder, NodeKind, PhaseMode, Pin, Preset, RatioMap, RationalAngle, SpiderLabel, StateVector,
    WeightPair,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn grid_closure() -> Result<String, String> {
    let mut n = 0u64;
    for a in 1..=24u64 {
        for b in 1..=24u64 {
            let (ga, gb) = (g(a), g(b));
            let l = wplzx::lcm_order(ga, gb);
            for i in 0..a as i64 {
                for j in 0..b as i64 {
                    let (x, y) = (RationalAngle::grid_point(i, ga), RationalAngle::grid_point(j, gb));
                    let (s, grid) = add_on_lcm(x, ga, y, gb).map_err(|e| e.to_string())?;
                    ensure(grid == l && s.on_grid(l), format!("{x} on G_{a} + {y} on G_{b}"))?;
                    n += 1;
                }
            }
        }
    }
    Ok(format!("{n} sums"))
}

fn worked_phase_example() -> Result<String, String> {
    let (s, l) = add_on_lcm(t(1, 4), g(4), t(1, 6), g(6)).map_err(|e| e.to_string())?;
    ensure(l == g(12) && s == t(5, 12), format!("got {s} on G_{l}"))?;
    Ok("1/4 + 1/6 = 5/12 turn (5π/6) on G_12".into())
}

fn regions() -> impl Iterator<Item = wplzx::Diagram> {
    let mut r = rng(2024);
    (0..500).map(move |i| random_region(&mut r, 3 + i % 4))
}

fn order_independence() -> Result<String, String> {
    let mut leaves = 0;
    for (i, d) in regions().enumerate() {
        let mut finals = Vec::new();
        every_fusion_order(&d, &mut |_| {}, &mut |end| finals.push(whole_label(end)));
        ensure(finals.windows(2).all(|w| w[0] == w[1]), format!("region {i} has order-dependent labels"))?;
        leaves += finals.len();
    }
    Ok(format!("500 regions, {leaves} fusion orders"))
}

fn invariants() -> Result<String, String> {
    let mut steps = 0;
    for (i, d) in regions().enumerate() {
        let reference = whole_label(&d);
        let mut ok = true;
        every_fusion_order(
            &d,
            &mut |s| {
                let l = whole_label(s);
                ok &= l.grid == reference.grid && l.theta == reference.theta;
                steps += 1;
            },
            &mut |_| {},
        );
        ensure(ok, format!("region {i} changes LCM or total angle"))?;
    }
    Ok(format!("{steps} intermediate diagrams"))
}

fn soundness() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let d = random_diagram(seed, 10, 14);
        let n = wzcc_normalize(&d).map_err(|e| e.to_string())?;
        let (a, b) = (evaluate(&d).map_err(|e| e.to_string())?, evaluate(&n.diagram).map_err(|e| e.to_string())?);
        worst = worst.max(wplzx::semantics::global_phase_deviation(&a, &b).map_err(|e| e.to_string())?);
        ensure(equal_up_to_global_phase(&a, &b, TOL).unwrap(), format!("seed {seed} unsound"))?;
    }
    let zero = RationalAngle::ZERO;
    let mut b = DiagramBuilder::new(2, 2);
    let (z0, z1) = (b.z(1, zero, 1), b.z(1, zero, 1));
    let (x0, x1) = (b.x(1, zero, 2), b.x(1, zero, 2));
    for (u, v) in [(Pin::In(0), z0), (Pin::In(1), z1)] {
        b.connect(u, Pin::Node(v));
    }
    for (u, v) in [(z0, x0), (z0, x1), (z1, x0), (z1, x1)] {
        b.connect(Pin::Node(u), Pin::Node(v));
    }
    b.connect(Pin::Node(x0), Pin::Out(0)).connect(Pin::Node(x1), Pin::Out(1));
    let lhs = b.build().unwrap();
    let mut b = DiagramBuilder::new(2, 2);
    let (x, z) = (b.x(1, zero, 2), b.z(1, zero, 1));
    b.connect(Pin::In(0), Pin::Node(x)).connect(Pin::In(1), Pin::Node(x)).connect(Pin::Node(x), Pin::Node(z));
    b.connect(Pin::Node(z), Pin::Out(0)).connect(Pin::Node(z), Pin::Out(1));
    let rhs = b.build().unwrap();
    ensure(equal_up_to_scalar(&evaluate(&lhs).unwrap(), &evaluate(&rhs).unwrap(), TOL).unwrap(), "bialgebra")?;

    let mut b = DiagramBuilder::new(1, 1);
    let (z, x) = (b.z(1, zero, 1), b.x(1, zero, 2));
    b.connect(Pin::In(0), Pin::Node(z)).connect(Pin::Node(z), Pin::Node(x)).connect(Pin::Node(z), Pin::Node(x));
    b.connect(Pin::Node(x), Pin::Out(0));
    let hopf = b.build().unwrap();
    let mut b = DiagramBuilder::new(1, 1);
    let (z, x) = (b.z(1, zero, 1), b.x(1, zero, 0));
    b.connect(Pin::In(0), Pin::Node(z)).connect(Pin::Node(x), Pin::Out(0));
    let split = b.build().unwrap();
    ensure(equal_up_to_scalar(&evaluate(&hopf).unwrap(), &evaluate(&split).unwrap(), TOL).unwrap(), "hopf")?;

    let mut changes = 0;
    for seed in 0..20 {
        let d = random_diagram(seed + 1000, 8, 10);
        for s in d.spiders().map(|s| s.id).collect::<Vec<_>>() {
            let c = color_change(&d, s).map_err(|e| e.to_string())?;
            ensure(
                equal_up_to_global_phase(&evaluate(&d).unwrap(), &evaluate(&c).unwrap(), TOL).unwrap(),
                format!("color change on seed {seed}"),
            )?;
            changes += 1;
        }
    }
    Ok(format!("200 diagrams (max deviation {worst:.1e}), bialgebra, hopf, {changes} color changes"))
}

fn conservativity() -> Result<String, String> {
    for n1 in 0..12 {
        for n2 in 0..12 {
            let (x, y) = (t(n1, 12), t(n2, 12));
            let l = fused_label(&SpiderLabel::plain(x), &SpiderLabel::plain(y), 1 << 20).map_err(|e| e.to_string())?;
            ensure(l == SpiderLabel::plain((x + y).mod_turn()), "plain fusion is not phase addition")?;
        }
    }
    let (alpha, beta, gamma) = (t(1, 8), t(1, 3), t(1, 5));
    let chain = |order: [(NodeKind, RationalAngle); 3]| {
        let mut b = DiagramBuilder::new(1, 1);
        let ids: Vec<_> = order.iter().map(|&(k, a)| b.spider(k, SpiderLabel::plain(a), 1)).collect();
        b.connect(Pin::In(0), Pin::Node(ids[0]));
        for w in ids.windows(2) {
            b.connect(Pin::Node(w[0]), Pin::Node(w[1]));
        }
        b.connect(Pin::Node(ids[2]), Pin::Out(0));
        b.build().unwrap()
    };
    let euler = chain([(NodeKind::Z, alpha), (NodeKind::X, beta), (NodeKind::Z, gamma)]);
    let n = wzcc_normalize(&euler).map_err(|e| e.to_string())?;
    ensure(n.diagram == euler, "Euler chain has no adjacent same-colour pair but changed")?;
    let adjacent = chain([(NodeKind::Z, alpha), (NodeKind::Z, gamma), (NodeKind::X, beta)]);
    let n = wzcc_normalize(&adjacent).map_err(|e| e.to_string())?;
    let mut got: Vec<(NodeKind, RationalAngle)> = n.labels.iter().map(|l| (l.kind, l.theta)).collect();
    got.sort();
    ensure(got == vec![(NodeKind::Z, alpha + gamma), (NodeKind::X, beta)], format!("{got:?}"))?;
    let mut b = DiagramBuilder::new(1, 1);
    let (z, x) = (b.z(1, alpha + gamma, 1), b.x(1, beta, 1));
    b.connect(Pin::In(0), Pin::Node(z)).connect(Pin::Node(z), Pin::Node(x)).connect(Pin::Node(x), Pin::Out(0));
    let figure = b.build().unwrap();
    let literal = equal_up_to_global_phase(&evaluate(&euler).unwrap(), &evaluate(&figure).unwrap(), TOL).unwrap();
    Ok(format!(
        "a=1 fusion = phase addition; Z(α)Z(γ)X(β) -> Z(α+γ)X(β); Z(α)X(β)Z(γ) already normal (literal Z(α+γ)X(β) equivalent: {literal})"
    ))
}

fn noiseless_fp() -> Result<String, String> {
    let mut worst: f64 = 1.0;
    let mut snapped = Vec::new();
    let mut r = rng(77);
    for i in 0..100 {
        let preset = if i % 2 == 0 { Preset::D2Main } else { Preset::D2Appendix };
        let mut cfg = preset.config(7).unwrap();
        cfg.qubits = r.gen_range(2..=6);
        cfg.layers = r.gen_range(1..=6);
        let c = gen_hea_instance(&cfg, i).map_err(|e| e.to_string())?;
        let raw = c.simulate();
        let grids = cfg.grid_map().unwrap();
        for mode in [PhaseMode::Raw, PhaseMode::Snapped] {
            let d = circuit_to_diagram(&c, &grids, mode).map_err(|e| e.to_string())?;
            let n = wzcc_normalize(&d).map_err(|e| e.to_string())?.diagram;
            let s = StateVector::normalized(evaluate_state(&n, 0).map_err(|e| e.to_string())?);
            let f = fidelity(&raw, &s).map_err(|e| e.to_string())?;
            match mode {
                PhaseMode::Raw => worst = worst.min(f),
                PhaseMode::Snapped => snapped.push(f),
            }
        }
    }
    ensure(worst >= 1.0 - 1e-9, format!("min raw FP {worst}"))?;
    ensure(snapped.iter().all(|f| (0.0..=1.0 + 1e-12).contains(f)), "snapped FP outside [0, 1]")?;
    let mean = snapped.iter().sum::<f64>() / snapped.len() as f64;
    Ok(format!("min FP {worst:.12}; snapped mean FP {mean:.4}"))
}

fn masd_anchors() -> Result<String, String> {
    let v = |id, a, k| DefectVertex::real(id, [0, id as i64], g(a), k);
    ensure(winding_difference(&v(0, 8, 2), &v(1, 12, 5)) == Rational64::from_integer(4), "Δk = 4")?;
    ensure(winding_difference(&v(0, 8, 3), &v(1, 12, 9)) == Rational64::from_integer(9), "Δk = 9")?;
    let w = edge_weight(1.0, &v(0, 8, 3), &v(1, 12, 9), 0.5, WeightMode::Normalized).map_err(|e| e.to_string())?;
    ensure(w == 1.1875, format!("normalized weight {w}"))?;
    for lambda in [0.1, 0.5, 1.0] {
        let w = edge_weight(1.2, &v(0, 8, 2), &v(1, 12, 5), lambda, WeightMode::Raw).unwrap();
        ensure(w == 1.2 + 4.0 * lambda, format!("raw weight {w} at λ = {lambda}"))?;
    }
    Ok("Δk = 4, 9; w = 1.1875; w = 1.2 + 4λ".into())
}

fn matching_exactness() -> Result<String, String> {
    let mut r = rng(99);
    for case in 0..100 {
        let n = [4, 6, 8, 10][case % 4];
        let g = random_defect_graph(&mut r, n);
        let lambda = Rational64::new(r.gen_range(0..8), 4);
        let lam = *lambda.numer() as f64 / *lambda.denom() as f64;
        for (mode, normalized) in [(WeightMode::Raw, false), (WeightMode::Normalized, true)] {
            let w = |i: usize, j: usize| exact_weight(&g.vertices[i], &g.vertices[j], lambda, normalized);
            let best = brute_force(&w, &(0..n).collect::<Vec<_>>());
            let m = min_weight_perfect_matching(&g, lam, mode, Exactness::Exact).map_err(|e| e.to_string())?;
            let cost: Rational64 = m.pairs.iter().map(|&(a, b)| w(a, b)).sum();
            ensure(cost == best, format!("case {case} {mode:?}: {cost} vs {best}"))?;
        }
    }
    Ok("100 graphs, raw and normalized, exact rational cost".into())
}

fn drg_properties() -> Result<String, String> {
    let mut r = rng(5150);
    for case in 0..100 {
        let n = 2 * r.gen_range(1..=5);
        let g = random_defect_graph(&mut r, n);
        let opts = DecodeOptions::default();
        let mut prev = (0.0, 0.0);
        for i in 0..=20 {
            let (_, rep) = masd_decode(&g, i as f64 * 0.05, &opts).map_err(|e| e.to_string())?;
            if i == 0 {
                ensure(rep.drg_toy == 0.0 && rep.drg_pm == 0.0, format!("case {case}: nonzero at λ = 0"))?;
            }
            ensure(rep.drg_toy >= prev.0 && rep.drg_pm >= prev.1, format!("case {case}: decrease at step {i}"))?;
            prev = (rep.drg_toy, rep.drg_pm);
        }
    }
    let pairs: Vec<RiskPair> = [(1.0, 0.0), (1.2, 1.0), (1.4, 2.0), (1.1, 1.0)]
        .into_iter()
        .map(|(d, delta_k)| RiskPair { d, delta_k })
        .collect();
    let slope = drg_toy(&pairs, 1.0).map_err(|e| e.to_string())?;
    ensure((slope - 0.7927).abs() < 1e-4, format!("slope {slope}"))?;
    Ok(format!("100 graphs monotone; four-pair slope {slope:.4}"))
}

fn curvature() -> Result<String, String> {
    for k in 1..=30i64 {
        let b = k as f64 * 2.0 / 3.0;
        let exact = Rational64::new(9, 2 * k * k);
        let r = scalar_curvature(b).map_err(|e| e.to_string())?;
        let want = *exact.numer() as f64 / *exact.denom() as f64;
        ensure((r - want).abs() <= 4.0 * f64::EPSILON * want, format!("R({b}) = {r}, want {want}"))?;
    }
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let p = AnisotropyParams::new(0.1 + 0.1 * i as f64, 0.1 + 0.1 * j as f64).unwrap();
            let fd = curvature_gradient(&RatioMap, p, DEFAULT_STEP).map_err(|e| e.to_string())?;
            let exact = ratio_map_gradient(p);
            worst = worst.max((fd[0] - exact[0]).abs()).max((fd[1] - exact[1]).abs());
        }
    }
    ensure(worst < 1e-6, format!("gradient error {worst}"))?;
    let chi = orbifold_euler_characteristic(WeightPair { a: g(2), b: g(3) });
    ensure(chi == Rational64::new(5, 6), format!("χ = {chi}"))?;
    Ok(format!("R = 2/b² on 30 points; max gradient error {worst:.1e}; χ(2,3) = 5/6"))
}

fn surface_code() -> Result<String, String> {
    let cfg = |p, trials, lambdas: Vec<f64>| SweepConfig {
        distance: 3,
        p_phys: p,
        trials,
        seed: 1,
        lambdas,
        options: DecodeOptions::default(),
        winding: WindingModel::default(),
    };
    let zero = lambda_sweep(&cfg(0.0, 1000, vec![0.0, 0.5, 1.0])).map_err(|e| e.to_string())?;
    ensure(zero.iter().all(|r| r.logical_error_rate == 0.0), "logical error at p = 0")?;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let a = lambda_sweep(&cfg(0.05, 400, grid.clone())).map_err(|e| e.to_string())?;
    let b = lambda_sweep(&cfg(0.05, 400, grid)).map_err(|e| e.to_string())?;
    ensure(a == b, "sweep is not deterministic")?;
    let curve: Vec<String> = a.iter().map(|r| format!("{:.1}:{:.4}", r.lambda, r.logical_error_rate)).collect();
    Ok(format!("p=0 rate 0 over 1000 trials; deterministic; d=3 p=0.05 curve {}", curve.join(" ")))
}

fn headline_ranges() -> Result<String, String> {
    let mut cfg = Preset::D1Main.config(13).unwrap();
    cfg.density = 0.9;
    let mut cscs = Vec::new();
    for i in 0..20 {
        let d = gen_random_wplzx_instance(&cfg, i).map_err(|e| e.to_string())?;
        let n = wzcc_normalize(&d).map_err(|e| e.to_string())?.diagram;
        cscs.push(csc(diagram_counts(&d).gates, diagram_counts(&n).gates).map_err(|e| e.to_string())?);
    }
    ensure(cscs.iter().all(|&c| c > 0.0), format!("CSC {cscs:?}"))?;
    let cfg = Preset::D2Main.config(13).unwrap();
    let mut pq = Vec::new();
    for i in 0..20 {
        let c = gen_hea_instance(&cfg, i).map_err(|e| e.to_string())?;
        let (raw, snapped) = snapped_angles(&c, &cfg.grid_map().unwrap());
        pq.push(pqvr(&raw, &snapped).map_err(|e| e.to_string())?);
    }
    ensure(pq.iter().all(|&p| p > 0.0 && p <= 1.0), format!("PQVR {pq:?}"))?;
    ensure(pqvr(&[0.1, 0.2], &[0.1, 0.2]).unwrap() == 1.0, "PQVR of exact phases")?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(format!("mean CSC {:.3} (min {:.3}); mean PQVR {:.3}", mean(&cscs), cscs.iter().cloned().fold(1.0, f64::min), mean(&pq)))
}

fn main() {
    let checks: [(&str, Check); 13] = [
        ("grid closure", grid_closure),
        ("worked phase example", worked_phase_example),
        ("canonical-form order independence", order_independence),
        ("LCM and total-angle invariants", invariants),
        ("soundness oracle", soundness),
        ("ZX conservativity", conservativity),
        ("noiseless FP", noiseless_fp),
        ("MASD numeric anchors", masd_anchors),
        ("matching exactness", matching_exactness),
        ("DRG properties", drg_properties),
        ("curvature", curvature),
        ("surface-code harness", surface_code),
        ("headline ranges", headline_ranges),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
