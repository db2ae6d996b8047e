//! Renewal detection: auxiliary processes are respawned at each failure
//! until one survives the monitor horizon.

use bmcp::coupling::detect_renewal;
use bmcp::engine::{SimOptions, Simulator};
use bmcp::estimators::renewal_statistics;
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let options = SimOptions { retain_edge_history: true, ..SimOptions::default() };
    let monitor = 50.0;
    let mut records = Vec::new();
    for seed in 0..200 {
        let mut parent = Simulator::new(params, &InitialCondition::HalfLine { depth: 400 }, seed, 50.0 * monitor, options)?;
        match detect_renewal(&mut parent, monitor, 40.0 * monitor, options) {
            Ok(r) => records.push(r),
            Err(e) => println!("seed {seed}: {e}"),
        }
    }
    for r in records.iter().take(5) {
        println!("T = {:8.3} after {} attempts", r.t, r.attempts);
    }
    let stats = renewal_statistics(&records, 10)?;
    println!(
        "{} renewals, mean attempts {:.3}, geometric p {:.3}, chi2 p-value {:.3}",
        stats.records, stats.mean_attempts, stats.p_hat, stats.chi2_p
    );
    Ok(())
}
