//! Width at which a critical box of height n is crossed horizontally with
//! probability 1/2, and the fitted scaling exponent.

use bmcp::lattice::{Params, LAMBDA_C_ESTIMATE};
use bmcp::paths::{crossing_probability, fit_box_scaling};

fn main() -> bmcp::Result<()> {
    let params = Params::standard(LAMBDA_C_ESTIMATE)?;
    for w in [2, 4, 8, 16] {
        let p = crossing_probability(params, w, 16.0, 400, 5)?;
        println!("height 16, width {w:>2}: crossing probability {p:.3}");
    }
    let fit = fit_box_scaling(params, &[8.0, 16.0, 32.0], 0.5, 400, 9)?;
    for pt in &fit.points {
        println!("n={:>3}: w*={:.2} (p at w={} is {:.3} +- {:.3})", pt.n, pt.w_star, pt.w, pt.p_at_w, pt.p_at_w_se);
    }
    println!(
        "w* ~ n^{:.3}, CI ({:.3}, {:.3}), delta = {:.3}",
        fit.exponent, fit.exponent_ci.0, fit.exponent_ci.1, fit.delta_hat
    );
    Ok(())
}
