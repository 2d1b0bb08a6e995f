use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use wplzx::masd::WindingModel;
use wplzx::{Circuit, Diagram, GridOrder, PhaseMode};

/// Values read from `--config`. Any flag given on the command line wins.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub count: Option<usize>,
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub density: Option<f64>,
    pub spiders: Option<(usize, usize)>,
    pub grid_orders: Option<Vec<u64>>,
    pub grid_cap: Option<u64>,
    pub phase_mode: Option<String>,
    pub lambda: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub mode: Option<String>,
    pub p_phys: Option<f64>,
    pub distance: Option<usize>,
    pub trials: Option<usize>,
    pub winding: Option<WindingModel>,
    pub tolerance: Option<f64>,
    pub max_open_wires: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
    pub step: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = read(p)?;
                serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A diagram in JSON or a circuit in the line format.
pub enum Instance {
    Diagram(Diagram),
    Circuit(Circuit),
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = read(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let d = Diagram::from_json(&text).with_context(|| format!("cannot parse diagram {}", path.display()))?;
        Ok(Instance::Diagram(d))
    } else {
        let c = Circuit::from_text(&text).with_context(|| format!("cannot parse circuit {}", path.display()))?;
        Ok(Instance::Circuit(c))
    }
}

pub fn grid_map(orders: &[u64], qubits: usize) -> Result<Vec<GridOrder>> {
    if orders.is_empty() {
        bail!("no grid orders given");
    }
    let grids = orders.iter().map(|&a| GridOrder::new(a)).collect::<Result<Vec<_>, _>>()?;
    Ok((0..qubits).map(|q| grids[q % grids.len()]).collect())
}

pub fn phase_mode(name: &str) -> Result<PhaseMode> {
    match name {
        "raw" => Ok(PhaseMode::Raw),
        "snapped" => Ok(PhaseMode::Snapped),
        other => bail!("unknown phase mode {other:?} (expected raw or snapped)"),
    }
}

/// `two-sector`, `uniform:A` or `constant:A:K`, or a JSON object.
pub fn parse_winding(s: &str) -> Result<WindingModel, String> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let parts: Vec<&str> = s.split(':').collect();
    let order = |x: &str| x.parse::<u64>().map_err(|e| format!("{x:?}: {e}"));
    match parts.as_slice() {
        ["two-sector"] => Ok(WindingModel::default()),
        ["uniform", a] => Ok(WindingModel::Uniform { a: order(a)? }),
        ["constant", a, k] => Ok(WindingModel::Constant {
            a: order(a)?,
            k: k.parse().map_err(|e| format!("{k:?}: {e}"))?,
        }),
        _ => Err(format!("unknown winding model {s:?}")),
    }
}
