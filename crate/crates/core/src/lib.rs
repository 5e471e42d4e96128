//! Tolerant robust learning laboratory.
//!
//! Geometry and perturbation regions, hypotheses with exact robust loss,
//! robust ERM and its tolerant variant, covering constructions, the two
//! lower-bound constructions, and robust VC audits.

pub mod cover;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lb_linear;
pub mod model;
pub mod oracle_game;
pub mod perturbation;
pub mod rerm;
pub mod rng;
pub mod robust_vc;
pub mod stats;
pub mod tasks;

pub use error::{Error, Result};
pub use geometry::{distance, point_to_region_distance, Ball, SphereCover, Vector};
pub use model::{
    regularity_check, robust_loss_distribution, robust_loss_point, robust_loss_sample, BoundedLinearClass,
    DiscreteDistribution, FiniteClass, Hypothesis, Label, LabeledExample, RegularityCertificate,
};
pub use perturbation::{Region, RegionFamily};
pub use rerm::{opt_profile, rerm_solve, tolrerm, OptProfile, RermOracle};
pub use rng::{seed_derive, LabRng};
