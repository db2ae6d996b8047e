//! Runs a named suite through the harness, then replays a trial from its
//! manifest and checks the stored digest.

use bmcp::harness::{named_suites, replay, run_experiment, suite_descriptor, verify_output_dir};

fn main() -> bmcp::Result<()> {
    for s in named_suites() {
        println!("{:<16} {}", s.name, s.description);
    }
    let dir = std::env::temp_dir().join("bmcp-example-edge-speed");
    let mut cfg = suite_descriptor("edge-speed")?.config;
    cfg.trials = 16;
    cfg.t_max = 32.0;
    cfg.output_dir = dir.clone();
    let outcome = run_experiment(&cfg)?;
    let m = &outcome.manifest;
    println!("status {:?}, {} artifacts, exit code {}", m.status, m.artifacts.len(), outcome.exit_code());
    verify_output_dir(&dir)?;
    let traj = replay(&outcome.manifest_path, 3)?;
    println!("trial 3 replayed: {} events, digest matches", traj.event_count);
    Ok(())
}
