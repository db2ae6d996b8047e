//! Survival probability from contiguous initial sets of growing size.

use bmcp::engine::SimOptions;
use bmcp::estimators::{survival_curve, StopRule};
use bmcp::lattice::{Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let stop = StopRule { t_max: 1000.0, certify_size: Some(100) };
    let curve = survival_curve(params, &[1, 2, 4, 8], stop, 1000, 29, SimOptions::default())?;
    for p in &curve.points {
        println!("n={:>2}: theta = {:.4} ({} - {})", p.n, p.theta, p.ci.0, p.ci.1);
    }
    if let Some(f) = &curve.fit {
        println!("log(-log(1 - theta)) vs log n: slope {:.3} +- {:.3}", f.slope, f.slope_se);
    }
    println!("monotone within 3 sigma: {}", curve.monotone_within_3sigma);
    Ok(())
}
