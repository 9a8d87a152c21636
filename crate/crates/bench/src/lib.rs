//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use mshlab_core::grid::{build_domain, sample_function, DomainSpec, GridDomain, GridFunction};

/// Unit ball in ℂⁿ sampled at `res` nodes per axis.
pub fn unit_ball(n: usize, res: usize) -> Arc<GridDomain> {
    Arc::new(build_domain(&DomainSpec::Ball { radius: 1.0 }, n, res).expect("valid ball"))
}

/// `|z|²` on the given lattice.
pub fn norm_squared(dom: &Arc<GridDomain>) -> GridFunction {
    sample_function(|x| x.iter().map(|v| v * v).sum(), dom).expect("finite samples")
}
