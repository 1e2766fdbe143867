//! High-fidelity space-time DG solver.

mod geometry;
mod march;
mod residual;
mod snapshots;
mod solver;

pub use geometry::{all_points, map_table, subset_points, MapGeometry, PointMap};
pub use march::{initial_guess, march, History, MarchOptions};
pub use residual::Discretization;
pub use snapshots::{generate_snapshots, solve_one, Snapshot, SnapshotSet};
pub use solver::{newton, solve_hf, NewtonOptions, Solution, SolveReport, Start};
