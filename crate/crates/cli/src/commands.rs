use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use wplzx::datasets::{gen_hea_instance, gen_random_wplzx_instance, snapped_angles};
use wplzx::geometry::{landscape, DEFAULT_STEP};
use wplzx::masd::{DecodeOptions, Exactness, SweepConfig};
use wplzx::metrics::{diagram_counts, summarize};
use wplzx::phase::DEFAULT_GRID_CAP;
use wplzx::rewrite::curvature_guided_normalize_with;
use wplzx::semantics::{evaluate_state, evaluate_with, fidelity, global_phase_deviation, ContractionOrder, EvalConfig};
use wplzx::{
    circuit_to_diagram, diagram_to_circuit, equal_up_to_global_phase, lambda_sweep, masd_decode, pqvr, replay,
    snap_to_grid, uhlmann, wzcc_normalize_with, Circuit, DatasetError, DefectGraph, Diagram, GenConfig, GridOrder,
    MasdError, MetricReport, MetricsError, NoiseConfig, NoiseKind, PhaseError, PhaseMode, Preset, RatioMap,
    RewriteConfig, RewriteError, RewriteTrace, SemanticsError, StateVector, WeightMode,
};

use crate::config::{self, emit, grid_map, load_instance, pick, write, Instance, RunConfig};
use crate::{
    CircuitArgs, Command, CurvatureArgs, DecodeArgs, DecoderArgs, EvaluateArgs, Failure, GenArgs, MetricsArgs,
    NoiseArg, NormalizeArgs, SweepArgs, VerifyArgs,
};

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<(), Failure> {
    match cmd {
        Command::Gen(a) => gen(a, cfg),
        Command::Normalize(a) => Ok(normalize(a, cfg)?),
        Command::Evaluate(a) => Ok(evaluate(a, cfg)?),
        Command::Verify(a) => Ok(verify(a, cfg)?),
        Command::Metrics(a) => metrics(a, cfg),
        Command::Decode(a) => decode(a, cfg),
        Command::Sweep(a) => sweep(a, cfg),
        Command::Curvature(a) => Ok(curvature(a, cfg)?),
    }
}

/// Errors that mean "too big" rather than "wrong".
pub fn is_resource_cap(e: &anyhow::Error) -> bool {
    let semantics = |s: &SemanticsError| matches!(s, SemanticsError::DimensionOverflow(_));
    let phase = |p: &PhaseError| matches!(p, PhaseError::GridOverflow { .. });
    e.chain().any(|c| {
        if let Some(s) = c.downcast_ref::<SemanticsError>() {
            return semantics(s);
        }
        if let Some(p) = c.downcast_ref::<PhaseError>() {
            return phase(p);
        }
        if let Some(r) = c.downcast_ref::<RewriteError>() {
            return matches!(r, RewriteError::Phase(p) if phase(p));
        }
        if let Some(d) = c.downcast_ref::<DatasetError>() {
            return matches!(d, DatasetError::Semantics(s) if semantics(s));
        }
        if let Some(m) = c.downcast_ref::<MetricsError>() {
            return matches!(m, MetricsError::Semantics(s) if semantics(s));
        }
        matches!(c.downcast_ref::<MasdError>(), Some(MasdError::TooLargeForExact(_)))
    })
}

fn usage(msg: String) -> Failure {
    Failure::Usage(anyhow!(msg))
}

fn preset(flag: Option<Preset>, cfg: &RunConfig) -> Result<Option<Preset>, Failure> {
    match (flag, &cfg.preset) {
        (Some(p), _) => Ok(Some(p)),
        (None, Some(name)) => name.parse().map(Some).map_err(|e| usage(format!("config preset: {e}"))),
        (None, None) => Ok(None),
    }
}

fn gen_config(p: Preset, seed: u64, cfg: &RunConfig) -> Result<GenConfig, Failure> {
    let mut g = p.config(seed).map_err(|e| Failure::Domain(e.into()))?;
    g.qubits = pick(None, cfg.qubits, g.qubits);
    g.layers = pick(None, cfg.layers, g.layers);
    g.density = pick(None, cfg.density, g.density);
    g.spiders = pick(None, cfg.spiders, g.spiders);
    g.grid_orders = pick(None, cfg.grid_orders.clone(), g.grid_orders);
    Ok(g)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    preset: Preset,
    seed: u64,
    config: GenConfig,
    instances: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: u64,
    file: String,
    n_qubits: usize,
    n_spiders: usize,
    gates: usize,
    cnots: usize,
}

fn gen(a: GenArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let p = preset(a.preset, cfg)?.ok_or_else(|| usage("gen needs --preset".into()))?;
    let seed = pick(a.seed, cfg.seed, 0);
    let count = pick(a.count, cfg.count, 10);
    let mut g = gen_config(p, seed, cfg)?;
    g.qubits = a.qubits.unwrap_or(g.qubits);
    g.layers = a.layers.unwrap_or(g.layers);
    g.density = a.density.unwrap_or(g.density);
    if let Some(orders) = a.grid_orders {
        g.grid_orders = orders;
    }
    let mut instances = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let entry = if p.is_diagram_family() {
            let d = gen_random_wplzx_instance(&g, i).map_err(anyhow::Error::from)?;
            let file = format!("{}-{i:04}.json", p.name());
            write(&a.out.join(&file), &d.to_json())?;
            let counts = diagram_counts(&d);
            ManifestEntry {
                index: i,
                file,
                n_qubits: d.inputs().len(),
                n_spiders: d.spider_count(),
                gates: counts.gates,
                cnots: counts.cnots,
            }
        } else {
            let c = gen_hea_instance(&g, i).map_err(anyhow::Error::from)?;
            let file = format!("{}-{i:04}.circ", p.name());
            write(&a.out.join(&file), &c.to_text())?;
            let counts = c.counts();
            ManifestEntry {
                index: i,
                file,
                n_qubits: c.n_qubits,
                n_spiders: 0,
                gates: counts.gates,
                cnots: counts.cnots,
            }
        };
        instances.push(entry);
    }
    let manifest = Manifest {
        preset: p,
        seed,
        config: g,
        instances,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::from)? + "\n";
    write(&a.out.join("manifest.json"), &text)?;
    info!("wrote {count} instances of {} to {}", p.name(), a.out.display());
    Ok(())
}

fn default_grid_orders() -> Vec<u64> {
    Preset::D2Main.config(0).expect("d2-main has a config").grid_orders
}

/// Reads a diagram, converting circuits with the configured grid map.
fn load_diagram(path: &Path, c: &CircuitArgs, cfg: &RunConfig) -> Result<Diagram> {
    match load_instance(path)? {
        Instance::Diagram(d) => Ok(d),
        Instance::Circuit(circ) => {
            let orders = pick(c.grid_orders.clone(), cfg.grid_orders.clone(), default_grid_orders());
            let mode = config::phase_mode(&pick(c.phase_mode.clone(), cfg.phase_mode.clone(), "raw".into()))?;
            Ok(circuit_to_diagram(&circ, &grid_map(&orders, circ.n_qubits)?, mode)?)
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    spiders: &'a [wplzx::CanonicalLabel],
    hadamards: usize,
    inputs: usize,
    outputs: usize,
}

fn normalize(a: NormalizeArgs, cfg: &RunConfig) -> Result<()> {
    let d = load_diagram(&a.input, &a.circuit, cfg)?;
    let rc = RewriteConfig {
        grid_cap: pick(a.grid_cap, cfg.grid_cap, DEFAULT_GRID_CAP),
        snap: a.snap,
        ..RewriteConfig::default()
    };
    let n = if a.curvature {
        curvature_guided_normalize_with(&d, &rc)?
    } else {
        wzcc_normalize_with(&d, &rc)?
    };
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("diagram");
    let summary = Summary {
        spiders: &n.labels,
        hadamards: n.diagram.hadamard_count(),
        inputs: n.diagram.inputs().len(),
        outputs: n.diagram.outputs().len(),
    };
    write(&a.out.join(format!("{stem}.norm.json")), &(n.diagram.to_json() + "\n"))?;
    write(&a.out.join(format!("{stem}.summary.json")), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    write(&a.out.join(format!("{stem}.trace.jsonl")), &n.trace.to_jsonl())?;
    info!(
        "{}: {} -> {} spiders, {} fusions in {} steps",
        a.input.display(),
        d.spider_count(),
        n.diagram.spider_count(),
        n.trace.fusions(),
        n.trace.len()
    );
    Ok(())
}

fn eval_config(flag: Option<usize>, cfg: &RunConfig) -> EvalConfig {
    let mut e = EvalConfig::default();
    e.max_open_wires = pick(flag, cfg.max_open_wires, e.max_open_wires);
    e
}

fn state_json(s: &StateVector) -> String {
    let amps: Vec<[f64; 2]> = s.amplitudes.iter().map(|z| [z.re, z.im]).collect();
    serde_json::json!({ "amplitudes": amps }).to_string() + "\n"
}

fn evaluate(a: EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    let text = match load_instance(&a.input)? {
        Instance::Circuit(c) if a.state => state_json(&c.simulate()),
        Instance::Circuit(c) => c.unitary().to_json() + "\n",
        Instance::Diagram(_) => {
            let d = load_diagram(&a.input, &a.circuit, cfg)?;
            if a.state {
                state_json(&StateVector::normalized(evaluate_state(&d, 0)?))
            } else {
                evaluate_with(&d, ContractionOrder::Greedy, &eval_config(a.max_open_wires, cfg))?.to_json() + "\n"
            }
        }
    };
    emit(a.out.as_ref(), &text)
}

fn verify(a: VerifyArgs, cfg: &RunConfig) -> Result<()> {
    let d = load_diagram(&a.input, &a.circuit, cfg)?;
    let after = match &a.trace {
        Some(p) => replay(&d, &RewriteTrace::from_jsonl(&config::read(p)?)?)?,
        None => wzcc_normalize_with(&d, &RewriteConfig::default())?.diagram,
    };
    let ec = eval_config(a.max_open_wires, cfg);
    let before_m = evaluate_with(&d, ContractionOrder::Greedy, &ec)?;
    let after_m = evaluate_with(&after, ContractionOrder::Greedy, &ec)?;
    let tol = pick(a.tolerance, cfg.tolerance, wplzx::semantics::TOL);
    let sound = equal_up_to_global_phase(&before_m, &after_m, tol)?;
    let deviation = global_phase_deviation(&before_m, &after_m)?;
    let verdict = if sound { "SOUND" } else { "UNSOUND" };
    println!(
        "{}",
        serde_json::json!({
            "verdict": verdict,
            "max_deviation": deviation,
            "tolerance": tol,
            "spiders_before": d.spider_count(),
            "spiders_after": after.spider_count(),
        })
    );
    if !sound {
        bail!("{}: rewritten diagram differs beyond tolerance {tol}", a.input.display());
    }
    Ok(())
}

struct MetricRow {
    seed: Option<u64>,
    n_qubits: usize,
    n_spiders: usize,
    pqvr: Option<f64>,
    report: MetricReport,
    fp: Option<f64>,
}

/// PQVR of a diagram's spider phases against their own grids.
fn diagram_pqvr(d: &Diagram) -> Option<f64> {
    let (raw, snapped): (Vec<f64>, Vec<f64>) = d
        .spiders()
        .filter_map(|n| n.label)
        .map(|l| {
            let t = l.total_angle().radians();
            (t, snap_to_grid(t, l.grid).radians())
        })
        .unzip();
    if raw.iter().zip(&snapped).all(|(r, s)| wplzx::metrics::wrap_angle(r - s).abs() < 1e-12) {
        return Some(1.0);
    }
    pqvr(&raw, &snapped).ok()
}

fn diagram_fp(raw: &Diagram, opt: &Diagram) -> Option<f64> {
    let state = |d: &Diagram| evaluate_state(d, 0).map(StateVector::normalized);
    match (state(raw), state(opt)) {
        (Ok(r), Ok(o)) => fidelity(&r, &o).ok(),
        (Err(e), _) | (_, Err(e)) => {
            warn!("fidelity skipped: {e}");
            None
        }
    }
}

fn noise_config(a: &MetricsArgs) -> Option<NoiseConfig> {
    let kind = match a.noise? {
        NoiseArg::Depolarizing => NoiseKind::Depolarizing,
        NoiseArg::AmplitudeDamping => NoiseKind::AmplitudeDamping,
        NoiseArg::PhaseDamping => NoiseKind::PhaseDamping,
    };
    Some(NoiseConfig {
        kind,
        strength: a.strength.unwrap_or(0.0),
    })
}

fn circuit_row(
    raw: &Circuit,
    opt: Option<Circuit>,
    grids: &[GridOrder],
    mode: PhaseMode,
    noise: Option<&NoiseConfig>,
) -> Result<MetricRow> {
    let d = circuit_to_diagram(raw, grids, mode)?;
    let (opt_circuit, opt_diagram) = match opt {
        Some(c) => (c, None),
        None => {
            let n = wzcc_normalize_with(&d, &RewriteConfig::default())?.diagram;
            (diagram_to_circuit(&n)?, Some(n))
        }
    };
    let (r, s) = snapped_angles(raw, grids);
    let fp = match (noise, &opt_diagram) {
        (Some(nc), _) => {
            let (noisy_raw, noisy_opt) = (raw.simulate_noisy(nc)?, opt_circuit.simulate_noisy(nc)?);
            let ideal = raw.simulate().density();
            info!(
                "fidelity against ideal: raw {}, optimized {}",
                uhlmann(&ideal, &noisy_raw)?,
                uhlmann(&ideal, &noisy_opt)?
            );
            uhlmann(&noisy_raw, &noisy_opt)?
        }
        (None, Some(n)) => fidelity(&raw.simulate(), &StateVector::normalized(evaluate_state(n, 0)?))?,
        (None, None) => fidelity(&raw.simulate(), &opt_circuit.simulate())?,
    };
    let p = pqvr(&r, &s).ok();
    Ok(MetricRow {
        seed: None,
        n_qubits: raw.n_qubits,
        n_spiders: d.spider_count(),
        pqvr: p,
        report: MetricReport::new(p.unwrap_or(f64::NAN), raw.counts(), opt_circuit.counts(), fp)?,
        fp: Some(fp),
    })
}

fn diagram_row(raw: &Diagram, opt: Option<Diagram>) -> Result<MetricRow> {
    let opt = match opt {
        Some(o) => o,
        None => wzcc_normalize_with(raw, &RewriteConfig::default())?.diagram,
    };
    let p = diagram_pqvr(raw);
    let fp = diagram_fp(raw, &opt);
    Ok(MetricRow {
        seed: None,
        n_qubits: raw.inputs().len(),
        n_spiders: raw.spider_count(),
        pqvr: p,
        report: MetricReport::new(p.unwrap_or(f64::NAN), diagram_counts(raw), diagram_counts(&opt), fp.unwrap_or(f64::NAN))?,
        fp,
    })
}

fn cell(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default()
}

fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("seed,n_qubits,n_spiders,pqvr,csc_total,csc_cnot,fp\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.n_qubits,
            r.n_spiders,
            cell(r.pqvr),
            r.report.csc_total,
            r.report.csc_cnot,
            cell(r.fp)
        );
    }
    let column = |f: &dyn Fn(&MetricRow) -> Option<f64>| {
        let xs: Vec<f64> = rows.iter().filter_map(f).filter(|v| v.is_finite()).collect();
        summarize(&xs)
    };
    let cols = [
        column(&|r| r.pqvr),
        column(&|r| Some(r.report.csc_total)),
        column(&|r| Some(r.report.csc_cnot)),
        column(&|r| r.fp),
    ];
    for (name, get) in [("mean", 0), ("stddev", 1)] {
        let vals: Vec<String> = cols
            .iter()
            .map(|s| cell(s.map(|s| if get == 0 { s.mean } else { s.stddev })))
            .collect();
        let _ = writeln!(out, "{name},,,{}", vals.join(","));
    }
    out
}

fn metrics(a: MetricsArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let noise = noise_config(&a);
    let mode = config::phase_mode(&pick(a.circuit.phase_mode.clone(), cfg.phase_mode.clone(), "snapped".into()))
        .map_err(Failure::Usage)?;
    let mut rows = Vec::new();
    if let Some(manifest_path) = &a.manifest {
        let m: Manifest = serde_json::from_str(&config::read(manifest_path)?)
            .with_context(|| format!("invalid manifest {}", manifest_path.display()))?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let files: Vec<PathBuf> = m.instances.iter().map(|e| dir.join(&e.file)).collect();
        rows = file_rows(&files, &[], &m.config.grid_orders, mode, noise.as_ref())?;
        for r in &mut rows {
            r.seed = Some(m.seed);
        }
    } else if let Some(p) = preset(a.preset, cfg)? {
        let seed = pick(a.seed, cfg.seed, 0);
        let mut g = gen_config(p, seed, cfg)?;
        g.qubits = a.qubits.unwrap_or(g.qubits);
        g.layers = a.layers.unwrap_or(g.layers);
        for i in 0..pick(a.count, cfg.count, 10) as u64 {
            let mut row = if p.is_diagram_family() {
                if noise.is_some() {
                    return Err(usage("--noise applies to circuit presets only".into()));
                }
                diagram_row(&gen_random_wplzx_instance(&g, i).map_err(anyhow::Error::from)?, None)?
            } else {
                let c = gen_hea_instance(&g, i).map_err(anyhow::Error::from)?;
                let grids = g.grid_map().map_err(anyhow::Error::from)?;
                circuit_row(&c, None, &grids, mode, noise.as_ref())?
            };
            row.seed = Some(seed);
            rows.push(row);
        }
    } else if !a.input.is_empty() {
        let orders = pick(a.circuit.grid_orders.clone(), cfg.grid_orders.clone(), default_grid_orders());
        rows = file_rows(&a.input, &a.opt, &orders, mode, noise.as_ref())?;
        let seed = a.seed.or(cfg.seed);
        for r in &mut rows {
            r.seed = seed;
        }
    } else {
        return Err(usage("metrics needs --preset, --manifest or --input".into()));
    }
    emit(a.out.as_ref(), &metrics_csv(&rows))?;
    Ok(())
}

fn file_rows(
    raw: &[PathBuf],
    opt: &[PathBuf],
    orders: &[u64],
    mode: PhaseMode,
    noise: Option<&NoiseConfig>,
) -> Result<Vec<MetricRow>> {
    if !opt.is_empty() && opt.len() != raw.len() {
        bail!("pairing mismatch: {} raw inputs but {} optimized", raw.len(), opt.len());
    }
    let mut rows = Vec::with_capacity(raw.len());
    for (i, path) in raw.iter().enumerate() {
        let paired = opt.get(i).map(|p| load_instance(p)).transpose()?;
        let row = match (load_instance(path)?, paired) {
            (Instance::Circuit(c), None) => circuit_row(&c, None, &grid_map(orders, c.n_qubits)?, mode, noise),
            (Instance::Circuit(c), Some(Instance::Circuit(o))) => {
                circuit_row(&c, Some(o), &grid_map(orders, c.n_qubits)?, mode, noise)
            }
            (Instance::Diagram(_), _) if noise.is_some() => bail!("--noise applies to circuits only"),
            (Instance::Diagram(d), None) => diagram_row(&d, None),
            (Instance::Diagram(d), Some(Instance::Diagram(o))) => diagram_row(&d, Some(o)),
            _ => bail!("pairing mismatch: {} and its optimized counterpart differ in kind", path.display()),
        }
        .with_context(|| format!("metrics for {}", path.display()))?;
        rows.push(row);
    }
    Ok(rows)
}

fn decode_options(a: &DecoderArgs, cfg: &RunConfig) -> Result<DecodeOptions, Failure> {
    let mode = match (a.mode, &cfg.mode) {
        (Some(m), _) => m,
        (None, Some(name)) => name.parse().map_err(|e| usage(format!("config mode: {e}")))?,
        (None, None) => WeightMode::default(),
    };
    let exactness = match (a.exact, a.greedy) {
        (true, _) => Exactness::Exact,
        (_, true) => Exactness::Greedy,
        _ => Exactness::Auto,
    };
    Ok(DecodeOptions {
        mode,
        beta: pick(a.beta, cfg.beta, 1.0),
        exactness,
    })
}

fn decode(a: DecodeArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let opts = decode_options(&a.decoder, cfg)?;
    let lambdas = pick(a.decoder.lambda.clone(), cfg.lambda.clone(), vec![0.0]);
    let g = DefectGraph::from_json(&config::read(&a.graph)?)
        .with_context(|| format!("cannot parse defect graph {}", a.graph.display()))?;
    let mut out = String::from("lambda,mode,cost,drg_toy,drg_toy_matched,drg_pm,approximate,pairs\n");
    for &l in &lambdas {
        let (m, r) = masd_decode(&g, l, &opts).map_err(anyhow::Error::from)?;
        let pairs: Vec<String> = m.pairs.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        let _ = writeln!(
            out,
            "{l},{},{},{},{},{},{},{}",
            r.mode,
            r.total_cost,
            r.drg_toy,
            r.drg_toy_matched,
            r.drg_pm,
            r.approximate,
            pairs.join(";")
        );
    }
    emit(a.out.as_ref(), &out)?;
    Ok(())
}

fn sweep(a: SweepArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let sc = SweepConfig {
        distance: pick(a.distance, cfg.distance, 3),
        p_phys: pick(a.p_phys, cfg.p_phys, 0.05),
        trials: pick(a.trials, cfg.trials, 1000),
        seed: pick(a.seed, cfg.seed, 0),
        lambdas: pick(a.decoder.lambda.clone(), cfg.lambda.clone(), (0..=10).map(|i| i as f64 / 10.0).collect()),
        options: decode_options(&a.decoder, cfg)?,
        winding: pick(a.winding, cfg.winding, Default::default()),
    };
    info!("sweep d={} p={} trials={} seed={}", sc.distance, sc.p_phys, sc.trials, sc.seed);
    let rows = lambda_sweep(&sc).map_err(anyhow::Error::from)?;
    let mut out = String::from("lambda,p_phys,distance,trials,logical_error_rate,drg_toy_mean,drg_pm_mean,mean_cost,mode\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.lambda, r.p_phys, r.distance, r.trials, r.logical_error_rate, r.drg_toy_mean, r.drg_pm_mean, r.mean_cost, r.mode
        );
    }
    emit(a.out.as_ref(), &out)?;
    Ok(())
}

fn curvature(a: CurvatureArgs, cfg: &RunConfig) -> Result<()> {
    let rows = landscape(
        &RatioMap,
        pick(a.lo, cfg.lo, 0.1),
        pick(a.hi, cfg.hi, 1.0),
        pick(a.points, cfg.points, 10),
        pick(a.step, cfg.step, DEFAULT_STEP),
    )?;
    let mut out = String::from("lambda_perp,lambda_par,b_eff,R,grad_norm\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.lambda_perp, r.lambda_par, r.b_eff, r.r, r.grad_norm);
    }
    emit(a.out.as_ref(), &out)
}
