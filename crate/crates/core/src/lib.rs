//! Weighted ZX diagrams with quantized phase grids: exact phase arithmetic,
//! diagrams and their tensor semantics, grid-aware normalization, curvature
//! diagnostics, evaluation metrics, a winding-aware surface-code decoder and
//! seeded dataset generators.
//!
//! ```
//! use wplzx::{add_on_lcm, GridOrder, RationalAngle};
//!
//! let (sum, grid) = add_on_lcm(
//!     RationalAngle::new(1, 4).unwrap(),
//!     GridOrder::new(4).unwrap(),
//!     RationalAngle::new(1, 6).unwrap(),
//!     GridOrder::new(6).unwrap(),
//! )
//! .unwrap();
//! assert_eq!((sum, grid.get()), (RationalAngle::new(5, 12).unwrap(), 12));
//! ```

pub mod datasets;
pub mod diagram;
pub mod geometry;
pub mod masd;
pub mod metrics;
pub mod phase;
pub mod rewrite;
pub mod semantics;

pub use datasets::{
    circuit_to_diagram, diagram_to_circuit, gen_hea, gen_random_wplzx, Angle, Circuit, DatasetError, Gate, GenConfig,
    NoiseConfig, NoiseKind, PhaseMode, Preset,
};
pub use diagram::{Diagram, DiagramBuilder, DiagramError, Endpoint, Node, NodeId, NodeKind, Pin, Side, Wire};
pub use geometry::{
    curvature_gradient_norm, orbifold_euler_characteristic, scalar_curvature, AnisotropyParams, GeometryError,
    RatioMap, WeightMap, WeightPair,
};
pub use masd::{
    drg_pm, drg_toy, edge_weight, lambda_sweep, masd_decode, min_weight_perfect_matching, winding_difference,
    DecodeOptions, DefectEdge, DefectGraph, DefectVertex, Exactness, GraphMode, MasdError, Matching, RiskReport,
    SweepConfig, SweepRow, WeightMode, WindingModel,
};
pub use metrics::{csc, csc_cnot, fp, pqvr, GateCounts, MetricReport, MetricsError};
pub use phase::{
    add_on_lcm, lcm_order, snap_to_grid, GridOrder, PhaseError, RationalAngle, SpiderLabel, TotalAngle,
};
pub use rewrite::{
    canonical_label, curvature_guided_normalize, replay, wzcc_normalize, wzcc_normalize_with, CanonicalLabel,
    Normalized, RewriteConfig, RewriteError, RewriteTrace,
};
pub use semantics::{
    equal_up_to_global_phase, equal_up_to_scalar, evaluate, uhlmann, ComplexMatrix, DensityMatrix, SemanticsError,
    StateVector,
};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Masd(#[from] MasdError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
