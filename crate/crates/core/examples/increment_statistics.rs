//! Fluctuations of the right edge: variance growth, normality, mixing of
//! unit increments and large-deviation frequencies.

use bmcp::engine::SimOptions;
use bmcp::estimators::{
    clt_diagnostics, estimate_edge_speed, increments, iid_null_series, large_deviation_profile, mixing_profile,
    run_trials, StopRule,
};
use bmcp::lattice::{InitialCondition, Params, Variant, LAMBDA_C_ESTIMATE};

fn main() -> bmcp::Result<()> {
    let params = Params::boosted(LAMBDA_C_ESTIMATE, 0.5, Variant::BoundaryModified)?;
    let init = InitialCondition::StationaryApprox { burn_in: 100.0 };
    let batch = run_trials(params, &init, 31, 200, StopRule::horizon(256.0), SimOptions::default())?;
    let alpha = estimate_edge_speed(&batch, 256.0)?.alpha;

    let clt = clt_diagnostics(&batch, &[32.0, 64.0, 128.0, 256.0], alpha)?;
    for s in &clt.scales {
        println!("t={:>5}: Var/t = {:.3}, Jarque-Bera p = {:.3}", s.t, s.var_over_t, s.normality_p);
    }
    println!("sigma^2 = {:.3} +- {:.3}", clt.sigma2_hat, clt.sigma2_se);

    let series: Vec<Vec<f64>> = batch.iter().filter(|s| s.is_valid()).map(|s| increments(s, 256.0)).collect();
    let mix = mixing_profile(&series, 6);
    let null = mixing_profile(&iid_null_series(&series, 1), 6);
    println!("mixing decreasing: {}, shuffled null within floor: {}", mix.decreasing(), null.within_floor());

    let ld = large_deviation_profile(&batch, alpha, &[64.0, 128.0, 256.0], 0.25, 1.0, 2.0);
    for pt in &ld.points {
        println!("P(|R(t) - alpha t| > t^0.75) at t={:>5}: {:.4} +- {:.4}", pt.x, pt.probability, pt.se);
    }
    println!("nonincreasing within 2 sigma: {}", ld.nonincreasing);
    Ok(())
}
