//! Classical fidelity thresholds for probabilistic measure-and-prepare protocols
//! on coherent-state ensembles, with numerical oracles and a certification layer.

// `!(x >= 0.0)` is how parameter checks reject NaN along with negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod certify;
pub mod ensembles;
pub mod game_sim;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod special_math;
pub mod srm;
pub mod streams;
