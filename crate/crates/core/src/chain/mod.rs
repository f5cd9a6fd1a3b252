//! Nonstationary one-step contracting Markov chains.

pub mod dist;
pub mod model;
pub mod moments;

pub use dist::{Family, InitSpec, LawSpec, Metric, NoiseSpec};
pub use model::{simulate, ChainModel, Matrix, PhaseMap, Trajectory, UpdateMaps};
pub use moments::{fit_joint_moment_constants, fit_moment_constants, MomentConstants, MomentMethod};
