//! Level-set (De Giorgi) analysis of computed trajectories: truncations
//! `v_k = (|u| − C_k)₊`, dissipation densities `d_k`, remainders `r_k`, level
//! energies `U_k`, and the inequalities that chain them.

pub mod checks;
pub mod energy;
pub mod fields;
pub mod schedule;

pub use checks::*;
pub use energy::{analyze, interval_weights, level_energy, LevelAnalysis, LevelEnergy, LevelRow, LevelSetReport};
pub use fields::{dk_field, rk_field, truncate, Derivatives};
pub use schedule::{LevelSchedule, ScheduleKind, SourceExponents};
