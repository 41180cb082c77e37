//! Learned dispatching for the job-shop scheduling problem.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic piece:
//!
//! * [`instance`]: static problem data and random instance generators,
//! * [`simulator`]: the event-skipping job-shop environment over the disjunctive graph,
//! * [`pdr`]: classical priority dispatching rules,
//! * [`nn`], [`gnn`], [`agent`]: the dense layers, the relation-typed graph embedding
//!   stack and the actor/critic heads,
//! * [`ppo`]: rollouts, advantage estimation and the clipped-surrogate trainer,
//! * [`oracle`]: an exact branch-and-bound solver for small instances,
//! * [`metrics`]: relative scheduling error and report aggregation.
//!
//! File formats, checkpoints and the command-line interface live in the
//! `jssp-harness` crate. Enabling the `std` feature lets the matrix kernels
//! use runtime CPU feature detection.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agent;
pub mod gnn;
pub mod instance;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod pdr;
pub mod ppo;
pub mod simulator;

mod math;

pub use instance::{JsspInstance, Job, Operation, Time};
pub use simulator::{GraphState, JobShopEnv, NextDecision};
