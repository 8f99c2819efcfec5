//! Protocol state fuzzing for clustered SDN controllers.
//!
//! The pipeline learns a Mealy machine of the East-West behaviour a cluster
//! shows to a single dummy node ([`learner`] over a [`proxy`]), extracts
//! feasible message sequences from it ([`fuzzer::sdfs_extract`]), mutates and
//! injects them, and flags abnormal outcomes with the [`detector`] criteria.
//! [`sulsim`] provides a deterministic simulated cluster with switchable
//! weaknesses that serves as the reference system under learning.

pub mod alphabet;
pub mod detector;
pub mod fuzzer;
pub mod learner;
pub mod mealy;
pub mod proxy;
pub mod sulsim;
pub mod testing;
