//! Exact extinction probabilities on a short closed segment, checked
//! against Monte Carlo on the same segment.

use bmcp::engine::{SimOptions, Simulator};
use bmcp::lattice::{Params, Variant};
use bmcp::oracle::{build_generator, extinction_csv, mask_of};
use bmcp::stats::proportion;

fn main() -> bmcp::Result<()> {
    let params = Params::new(1.0, 1.5, Variant::BoundaryModified)?;
    let n = 3;
    let model = build_generator(n, params)?;
    let full = mask_of(&[0, 1, 2]);
    print!("{}", extinction_csv(&model, &[1.0, 5.0], &[full]));

    let t = 5.0;
    let exact = model.extinction_probability_by(t)[full];
    let trials = 20_000;
    let dead = (0..trials as u64)
        .filter(|&seed| {
            let mut sim = Simulator::closed_segment(params, n, &[0, 1, 2], seed, SimOptions::default()).unwrap();
            sim.run_until(t);
            sim.is_extinct()
        })
        .count();
    let (p, se) = proportion(dead, trials);
    println!("t={t}: exact {exact:.5}, simulated {p:.5} +- {se:.5}, z = {:.2}", (p - exact) / se);
    let mean = model.expected_extinction_time()?[full];
    println!("expected extinction time from the full segment: {mean:.4}");
    Ok(())
}
