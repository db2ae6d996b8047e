//! Trajectories of the boundary-modified process from a single site.

use bmcp::engine::{SimOptions, Simulator};
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let horizon = 50.0;
    for seed in 0..20 {
        let mut sim = Simulator::new(params, &InitialCondition::SingleOrigin, seed, horizon, SimOptions::default())?;
        let traj = sim.run_until(horizon).clone();
        if traj.extinction_time.time().is_some() {
            println!("seed {seed}: extinct at {:.3} after {} events", traj.extinction_time.time().unwrap(), traj.event_count);
            continue;
        }
        println!("seed {seed} survives to {horizon}; samples every 5 time units:");
        println!("time,right_edge,left_edge,cardinality");
        for s in traj.samples.iter().step_by(5) {
            println!("{:.1},{:?},{:?},{:?}", s.time, s.right_edge, s.left_edge, s.cardinality);
        }
        println!("{} events; open transitions now {:?}", traj.event_count, sim.transition_counts());
        break;
    }
    Ok(())
}
