//! Right-edge speed from the approximately stationary half-line start,
//! with and without boosts.

use bmcp::engine::SimOptions;
use bmcp::estimators::{estimate_edge_speed, run_trials, StopRule};
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let init = InitialCondition::StationaryApprox { burn_in: 50.0 };
    for eps in [0.0, 0.5, 1.0] {
        let params = Params::boosted(LAMBDA_C_ESTIMATE, eps, Variant::BoundaryModified)?;
        let batch = run_trials(params, &init, 17, 100, StopRule::horizon(128.0), SimOptions::default())?;
        let e = estimate_edge_speed(&batch, 128.0)?;
        println!(
            "eps={eps}: alpha = {:.4} +- {:.4}, unit increment {:.4} ({} valid, {} invalid)",
            e.alpha, e.se, e.unit_increment_mean, e.trials, e.invalid
        );
    }
    Ok(())
}
