//! Walk simulation over recorded trails and over the channel model.

mod monte_carlo;
mod resolve;
mod walk;

pub use monte_carlo::{monte_carlo_evaluate, sweep, RunMetrics, SweepGrid, SweepParam, SweepRow};
pub use resolve::{resolve_policies, resolve_policy, ResolveOptions};
pub use walk::{deploy, run_virtual_walk, WalkEnd, WalkOutcome};
