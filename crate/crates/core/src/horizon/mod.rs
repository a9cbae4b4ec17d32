//! Truncated-sum (shortest path) and discounted-sum percentile queries, both
//! reduced to multiple reachability on a bounded product.

mod ds;
mod sp;

pub use ds::{ds_build_rounded_unfolding, ds_eps_gap_solve, ds_horizon_bound, round_to_grid, GapReport, GapVerdict, RoundedUnfolding};
pub use sp::{sp_build_product, sp_solve, CounterProduct, SpSolution};
