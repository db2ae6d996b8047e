//! Auxiliary right-edge processes sharing the parent's clocks, the right
//! edge identity they satisfy, renewal detection and the spread-versus-
//! contiguous survival comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::trial_seed;
use crate::engine::{SimOptions, Simulator};
use crate::error::{Error, Result};
use crate::lattice::{Configuration, InitialCondition, Params, Site, Variant};

/// A right-edge-modified process started from `{0}` at parent time
/// `spawn_time`, reading the parent's clocks translated by the parent's
/// right edge at that time.
#[derive(Clone, Debug)]
pub struct AuxiliaryProcess {
    /// Absolute clock time of the spawn.
    pub spawn_time: f64,
    /// Parent right edge at the spawn (internal coordinates; 0 if the
    /// parent was empty).
    pub space_offset: Site,
    pub child: Simulator,
}

impl AuxiliaryProcess {
    /// Runs the child until extinction or `horizon` time units after the
    /// spawn. Returns the extinction time relative to the spawn.
    pub fn run(&mut self, horizon: f64) -> Option<f64> {
        self.child.run_until(horizon);
        self.child.trajectory().extinction_time.time()
    }
}

/// Spawns the auxiliary process at parent reported time `t`. The parent
/// must already be at or past `t`; spawning in the past needs the
/// parent's right edge history.
pub fn spawn_auxiliary(
    parent: &Simulator,
    t: f64,
    horizon: f64,
    options: SimOptions,
) -> Result<AuxiliaryProcess> {
    let abs = parent.time_origin() + t;
    let r = if abs == parent.absolute_time() || (parent.is_extinct() && abs > parent.absolute_time()) {
        parent.right_edge()
    } else {
        parent.right_edge_at(abs)?
    };
    let offset = r.unwrap_or(0);
    let params = parent.params().with_variant(Variant::RightEdgeModified);
    let view = parent
        .clock()
        .field
        .translated_view(parent.clock().space_offset + offset, abs);
    let w = options.truncation.window_halfwidth(&params, horizon) as Site;
    let cfg = Configuration::from_sites(-w, w, &[0])?;
    let child = Simulator::from_parts(params, cfg, view, crate::engine::Domain::Open, options)?;
    Ok(AuxiliaryProcess {
        spawn_time: abs,
        space_offset: offset,
        child,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingFailure {
    /// Time since the spawn.
    pub time: f64,
    pub parent_right: Option<Site>,
    pub predicted_right: Option<Site>,
    /// First site of the coupled region where parent and child disagree.
    pub region_mismatch: Option<Site>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub seed: u64,
    pub spawn_time: f64,
    pub space_offset: Site,
    /// Number of event times at which both relations were checked.
    pub checks: usize,
    /// Child extinction time relative to the spawn, if it died in time.
    pub child_extinction: Option<f64>,
    pub failures: Vec<CouplingFailure>,
    pub all_pass: bool,
    /// Parent or child left its window; the report is incomplete.
    pub invalid: Option<String>,
    /// The parent was empty at the spawn time: there is no edge to
    /// compare against and nothing was checked.
    pub parent_empty: bool,
}

/// Advances parent and child together in absolute time until `horizon`
/// after the spawn or the child's extinction, checking at every event time
/// that `R(parent) = offset + R(child)` and that parent and shifted child
/// agree on `[offset + L(child), offset + R(child)]`.
pub fn verify_edge_identity(
    parent: &mut Simulator,
    aux: &mut AuxiliaryProcess,
    horizon: f64,
) -> CouplingReport {
    let end = aux.spawn_time + horizon;
    let off = aux.space_offset;
    let mut report = CouplingReport {
        seed: parent.clock().field.master_seed,
        spawn_time: aux.spawn_time - parent.time_origin(),
        space_offset: off,
        checks: 0,
        child_extinction: None,
        failures: Vec::new(),
        all_pass: true,
        invalid: None,
        parent_empty: false,
    };
    parent.advance_to_absolute(aux.spawn_time);
    if parent.is_extinct() {
        report.parent_empty = true;
        return report;
    }
    check_pair(parent, aux, &mut report);
    loop {
        let next = match (parent.next_event_time(), aux.child.next_event_time()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => break,
        };
        if next > end || aux.child.is_extinct() {
            break;
        }
        parent.advance_to_absolute(next);
        aux.child.advance_to_absolute(next);
        if let Some(e) = parent.error().or_else(|| aux.child.error()) {
            report.invalid = Some(e.to_string());
            break;
        }
        if aux.child.is_extinct() {
            report.child_extinction = Some(next - aux.spawn_time);
            break;
        }
        check_pair(parent, aux, &mut report);
    }
    report.all_pass = report.failures.is_empty();
    report
}

fn check_pair(parent: &Simulator, aux: &AuxiliaryProcess, report: &mut CouplingReport) {
    let off = aux.space_offset;
    let child = aux.child.configuration();
    let (Some(cl), Some(cr)) = (child.leftmost_stored(), child.right_edge()) else {
        return;
    };
    report.checks += 1;
    let parent_right = parent.right_edge();
    let predicted = Some(off + cr);
    let p = parent.configuration();
    let region_mismatch = (cl..=cr)
        .find(|&y| p.is_infected(off + y) != child.is_infected(y))
        .map(|y| off + y);
    if parent_right != predicted || region_mismatch.is_some() {
        report.failures.push(CouplingFailure {
            time: parent.absolute_time() - aux.spawn_time,
            parent_right,
            predicted_right: predicted,
            region_mismatch,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalRecord {
    /// Renewal time, relative to the start of detection.
    pub t: f64,
    /// Number of attempts, the last of which survived the monitor.
    pub attempts: usize,
    /// Extinction times of the failed attempts.
    pub attempt_durations: Vec<f64>,
    /// Detection gave up at the global cap.
    pub censored: bool,
}

/// Spawns auxiliary processes at `T_0 = now`, `T_{i+1} = T_i + tau_i`
/// until one survives `monitor_horizon`; the parent is advanced to each
/// `T_i` as needed. Fails with `MonitorExhausted` once `T_i` passes `cap`.
pub fn detect_renewal(
    parent: &mut Simulator,
    monitor_horizon: f64,
    cap: f64,
    options: SimOptions,
) -> Result<RenewalRecord> {
    let start = parent.time();
    let mut t = start;
    let mut durations = Vec::new();
    loop {
        parent.run_until(t);
        if let Some(e) = parent.error() {
            return Err(e);
        }
        let mut aux = spawn_auxiliary(parent, t, monitor_horizon, options)?;
        match aux.run(monitor_horizon) {
            None => {
                if let Some(e) = aux.child.error() {
                    return Err(e);
                }
                return Ok(RenewalRecord {
                    t: t - start,
                    attempts: durations.len() + 1,
                    attempt_durations: durations,
                    censored: false,
                });
            }
            Some(tau) => {
                durations.push(tau);
                t += tau;
                if t - start > cap {
                    return Err(Error::MonitorExhausted(t - start));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationPoint {
    pub t: f64,
    pub spread: f64,
    pub spread_se: f64,
    pub contiguous: f64,
    pub contiguous_se: f64,
    /// `spread >= contiguous - 3 SE` with the combined standard error.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub spread_set: Vec<Site>,
    pub contiguous_set: Vec<Site>,
    pub trials: usize,
    pub points: Vec<DominationPoint>,
    pub all_hold: bool,
}

/// Survival probabilities on `t_grid` of the process started from the
/// spread set `a` and from the contiguous interval `[0, |a| - 1]`.
pub fn domination_check_liggett(
    params: Params,
    a: &[Site],
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<DominationReport> {
    if a.is_empty() {
        return Err(Error::InvalidInitialCondition("empty spread set".into()));
    }
    let contiguous: Vec<Site> = (0..a.len() as Site).collect();
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let survival = |sites: &[Site], stream: u64| -> Result<Vec<f64>> {
        let init = InitialCondition::FiniteSet {
            sites: sites.to_vec(),
        };
        let deaths: Vec<Option<f64>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let s = trial_seed(seed ^ stream, i as u64);
                let mut sim = Simulator::new(params, &init, s, t_max, SimOptions::default())?;
                sim.run_until_extinction(t_max);
                Ok(sim.trajectory().extinction_time.time())
            })
            .collect::<Result<_>>()?;
        Ok(t_grid
            .iter()
            .map(|&t| deaths.iter().filter(|d| d.map_or(true, |d| d > t)).count() as f64 / trials as f64)
            .collect())
    };
    let pa = survival(a, 0x5350_5245_4144)?;
    let pb = survival(&contiguous, 0x434f_4e54_4947)?;
    let n = trials as f64;
    let points: Vec<DominationPoint> = t_grid
        .iter()
        .zip(pa.iter().zip(&pb))
        .map(|(&t, (&x, &y))| {
            let sx = (x * (1.0 - x) / n).sqrt();
            let sy = (y * (1.0 - y) / n).sqrt();
            DominationPoint {
                t,
                spread: x,
                spread_se: sx,
                contiguous: y,
                contiguous_se: sy,
                holds: x >= y - 3.0 * (sx * sx + sy * sy).sqrt(),
            }
        })
        .collect();
    Ok(DominationReport {
        spread_set: a.to_vec(),
        contiguous_set: contiguous,
        trials,
        all_hold: points.iter().all(|p| p.holds),
        points,
    })
}
