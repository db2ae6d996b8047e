//! Open paths in the graphical construction: reachability with witnesses,
//! witness verification and box crossings.

use bmcp::clock::ClockField;
use bmcp::lattice::{Params, Variant, LAMBDA_C_ESTIMATE};
use bmcp::paths::{
    box_crossed_horizontally, box_crossed_vertically, open_path_exists, reachable_from, verify_witness, PathMode,
    SpaceTimeBox, SpaceTimePoint,
};

fn main() -> bmcp::Result<()> {
    let params = Params::new(LAMBDA_C_ESTIMATE, LAMBDA_C_ESTIMATE + 0.5, Variant::BoundaryModified)?;
    let record = ClockField::new(3, &params).arrivals_in_box(0, 12, 0.0, 6.0, 1e7)?;

    let reached = reachable_from(&record, &[6], 0.0, 3.0, PathMode::LambdaI, &[], None)?;
    let sites: Vec<_> = reached.iter().map(|(x, _)| *x).collect();
    println!("from (6, 0) the interior graph reaches at t=3: {sites:?}");

    let from = SpaceTimePoint { site: 6, time: 0.0 };
    let mode = PathMode::LambdaE(Variant::BoundaryModified);
    for to in 0..=12 {
        let res = open_path_exists(&record, from, SpaceTimePoint { site: to, time: 3.0 }, mode, &[6], None)?;
        if let Some(w) = res.witness {
            let ok = verify_witness(&record, &w, 3.0, mode, &[6]);
            println!("  ({to}, 3) reachable with boosts via {} arrows, witness valid: {ok}", w.steps.len());
        }
    }

    let bx = SpaceTimeBox::new(12, 6.0);
    let v = box_crossed_vertically(&record, bx)?;
    let h = box_crossed_horizontally(&record, bx)?;
    println!("box [0,12] x [0,6]: vertical {:?}, horizontal {:?}", v.vertical, h.horizontal);
    Ok(())
}
