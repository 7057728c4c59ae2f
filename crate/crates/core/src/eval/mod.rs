//! Interpretation metrics, CSV output, and the exact-MI oracle.

pub mod csv;
pub mod metrics;
pub mod world;

pub use csv::{
    metrics_csv, trajectory_csv, write_metrics_csv, write_trajectory_csv, MetricRow, TrajectoryRow,
};
pub use metrics::{
    interpretation_auc, macro_interpretation_auc, normalize_attention, precision_at_k,
    prediction_accuracy, GateMode, MetricError,
};
pub use world::{
    atom, builtin_world, exact_mi, multi_house_world, noisy_label_world, selector_family,
    theorem_check, three_motif_spurious, two_motif_spurious, FiniteWorld, MiReport, Selector,
    TheoremReport, TheoremRow, WorldError, WorldGraph, BUILTIN_NAMES, DEFAULT_RANDOM_SELECTORS,
    THEOREM_TOLERANCE,
};
