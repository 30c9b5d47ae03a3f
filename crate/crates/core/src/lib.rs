//! Deterministic task worlds for reasoning with world models.
//!
//! The crate is organised around five layers:
//!
//! * [`momdp`]: finite multi-observable MDPs with two-stage (slice, render)
//!   observation functions and exact trajectory enumeration.
//! * [`theory`]: exact entropies, mutual informations and KL divergences over
//!   enumerated chain-of-thought distributions, and numeric certificates for
//!   the KL chain-rule decomposition, the uncertainty-reduction bounds, the
//!   deterministic/fully-observable corollary and the transfer-learning bounds.
//! * [`envs`]: simulators, generators and exact solver oracles for paper
//!   folding, multi-hop manipulation, ball tracking, maze, Sokoban and cube
//!   three-view projection.
//! * [`cot`]: chain-of-thought traces in implicit / verbal / visual formats,
//!   a palette rasterizer with an exact decoder, and dataset serialization.
//! * [`eval`]: answer verification, world-model fidelity and reports.
//!
//! [`cli`] wires these into the `visworld` binary.

pub mod cli;
pub mod cot;
pub mod envs;
pub mod eval;
pub mod momdp;
pub mod seed;
pub mod theory;
