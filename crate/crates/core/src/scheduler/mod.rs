//! Licensed-bandwidth minimisation under per-user rate and statistical delay
//! constraints.
//!
//! Variables per user `n` and band `m` are the selection `x`, `delta = beta
//! theta` and `a = 1 / theta`, so that bandwidth is `delta a` and effective
//! capacity is `a decay_m(delta)`. The solver alternates an exact LP in `a`
//! with a penalised difference-of-convex step in `(delta, x)`, then rounds
//! `x`, re-solves with the selection fixed and repairs users that fail the
//! exact aggregate delay constraint.

pub mod barrier;
mod bcd;
mod dc;
mod lp;
mod start;

pub use bcd::{solve_bcd, Solution, SolveOptions, SolveReport, SolveStatus};
pub use dc::{dc_step_in_delta_x, penalised_objective, DcOptions, DcOutcome, QosForm};
pub use lp::{lp_step_in_a, LpCertificate, LpOutcome};
pub use start::{find_feasible_start, Start};
