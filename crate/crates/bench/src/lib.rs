//! Seeded workloads shared by the benchmarks.

use wplzx::datasets::{gen_hea_instance, gen_random_wplzx_instance};
use wplzx::masd::{sample_surface_code, DefectGraph, WindingModel};
use wplzx::{Circuit, Diagram, Preset};

/// A d1-main diagram with roughly `spiders` spiders.
pub fn d1_diagram(spiders: usize, seed: u64) -> Diagram {
    let mut cfg = Preset::D1Main.config(seed).expect("d1-main has a config");
    cfg.spiders = (spiders, spiders);
    gen_random_wplzx_instance(&cfg, 0).expect("d1-main config is valid")
}

pub fn hea_circuit(qubits: usize, layers: usize, seed: u64) -> Circuit {
    let mut cfg = Preset::D2Main.config(seed).expect("d2-main has a config");
    cfg.qubits = qubits;
    cfg.layers = layers;
    gen_hea_instance(&cfg, 0).expect("d2-main config is valid")
}

/// First non-empty X-error defect graph of a sampled surface code.
pub fn surface_defects(distance: usize, p_phys: f64) -> DefectGraph {
    (0..)
        .map(|seed| sample_surface_code(distance, p_phys, seed, &WindingModel::default()).expect("valid code").1)
        .find(|s| s.x_graph.len() >= 4)
        .expect("some sample has defects")
        .x_graph
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_build() {
        assert!(d1_diagram(40, 1).spider_count() >= 30);
        assert_eq!(hea_circuit(3, 2, 1).n_qubits, 3);
        assert!(surface_defects(5, 0.05).len() >= 4);
    }
}
