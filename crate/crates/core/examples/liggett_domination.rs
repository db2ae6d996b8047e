//! Survival from a spread-out set against the contiguous set of the
//! same size.

use bmcp::coupling::domination_check_liggett;
use bmcp::lattice::{Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let report = domination_check_liggett(params, &[0, 3, 7, 12], &[5.0, 20.0, 50.0], 2000, 11)?;
    println!("spread {:?} vs contiguous {:?}", report.spread_set, report.contiguous_set);
    for p in &report.points {
        println!(
            "t={:>4}: spread {:.4} +- {:.4}, contiguous {:.4} +- {:.4}, holds {}",
            p.t, p.spread, p.spread_se, p.contiguous, p.contiguous_se, p.holds
        );
    }
    Ok(())
}
