//! Tabular predictive representations.
//!
//! The crate covers the successor representation (SR), successor models (SM),
//! successor features (SF) with generalized policy improvement, and the
//! learners and analyses built on top of them: eigenoption discovery,
//! landmark exploration, place/grid field analyses, replay prioritization,
//! Kalman and context-dependent learners, and the temporal context model.
//!
//! Rewards are always earned on the *arrival* state: `V(s) = E[sum_t gamma^t R(s_{t+1})]`.
//! With that convention `V = M R` holds exactly for the closed-form SR.

pub mod bayes;
pub mod csv;
pub mod error;
pub mod explore;
pub mod grid;
pub mod linalg;
pub mod mdp;
pub mod neuro;
pub mod rng;
pub mod sf;
pub mod sr;
pub mod tcm;
pub mod worlds;

pub use error::{Error, Result};
pub use mdp::{Mdp, Policy, Step, Trajectory};
pub use sf::{FeatureMap, SfTensor, TaskVector};
pub use sr::{ActionSr, SrMatrix, SuccessorModel};
