//! Spawns an auxiliary right-edge process on the parent's clocks and
//! checks the right-edge identity at every event time.

use bmcp::coupling::{spawn_auxiliary, verify_edge_identity};
use bmcp::engine::{SimOptions, Simulator};
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let options = SimOptions::default();
    let horizon = 40.0;
    for seed in 0..5 {
        let mut parent = Simulator::new(params, &InitialCondition::interval(-5, 5), seed, 5.0 + horizon, options)?;
        parent.run_until(5.0);
        let mut aux = spawn_auxiliary(&parent, 5.0, horizon, options)?;
        let report = verify_edge_identity(&mut parent, &mut aux, horizon);
        println!(
            "seed {seed}: offset {:>3}, {:>5} checks, child extinct at {:?}, pass {}",
            report.space_offset, report.checks, report.child_extinction, report.all_pass
        );
    }
    Ok(())
}
