//! Open paths in the graphical construction and box crossings.
//!
//! A path occupies a site until that site's next recovery mark and jumps
//! along infection arrows. In `LambdaE` mode boost arrows are added; their
//! endpoints depend on the edge of the process started from the initial
//! set, so that process is replayed alongside the search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{trial_seed, ClockEvent, ClockField, ClockObjectId, SpaceTimeRecord};
use crate::engine::{SimOptions, Simulator};
use crate::error::{Error, Result};
use crate::lattice::{Params, Site, Variant};
use crate::stats::{linear_fit, proportion, LinearFit};

/// `[lo, hi] x [t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub lo: Site,
    pub hi: Site,
    pub t0: f64,
    pub t1: f64,
}

impl SpaceTimeBox {
    /// `[0, n1] x [0, n2]`.
    pub fn new(n1: u64, n2: f64) -> Self {
        SpaceTimeBox {
            lo: 0,
            hi: n1 as Site,
            t0: 0.0,
            t1: n2,
        }
    }

    pub fn contains(&self, p: SpaceTimePoint) -> bool {
        self.lo <= p.site && p.site <= self.hi && self.t0 <= p.time && p.time <= self.t1
    }

    fn within(&self, outer: &SpaceTimeBox) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi && outer.t0 <= self.t0 && self.t1 <= outer.t1
    }

    fn of_record(r: &SpaceTimeRecord) -> Self {
        SpaceTimeBox {
            lo: r.lo,
            hi: r.hi,
            t0: r.t0,
            t1: r.t1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub site: Site,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Recovery marks and interior infection arrows only.
    LambdaI,
    /// Adds the boost arrows of the given variant.
    LambdaE(Variant),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrowKind {
    Edge,
    Boost,
}

/// One arrow of a witness: `index` points into `record.events` or
/// `record.boosts` depending on `kind`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub kind: ArrowKind,
    pub index: usize,
    pub time: f64,
    pub from: Site,
    pub to: Site,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub start: SpaceTimePoint,
    pub steps: Vec<WitnessStep>,
}

impl Witness {
    pub fn end_site(&self) -> Site {
        self.steps.last().map_or(self.start.site, |s| s.to)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub exists: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    /// `None` when not evaluated.
    pub vertical: Option<bool>,
    pub horizontal: Option<bool>,
    pub vertical_witness: Option<Witness>,
    pub horizontal_witness: Option<Witness>,
}

const NO_NODE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Trail {
    start: SpaceTimePoint,
    node: u32,
}

/// Forward reachability sweep over a record.
struct Sweep<'a> {
    record: &'a SpaceTimeRecord,
    area: SpaceTimeBox,
    mode: PathMode,
    reach: Vec<Option<Trail>>,
    arena: Vec<(WitnessStep, u32)>,
    xi: Vec<bool>,
    xi_count: usize,
    capture: Option<usize>,
    captured: Option<(Site, Site)>,
}

impl<'a> Sweep<'a> {
    fn new(record: &'a SpaceTimeRecord, area: SpaceTimeBox, mode: PathMode, initial: &[Site]) -> Self {
        let n = (area.hi - area.lo + 1) as usize;
        let mut xi = vec![false; (record.hi - record.lo + 1) as usize];
        let mut xi_count = 0;
        for &x in initial {
            if record.lo <= x && x <= record.hi && !xi[(x - record.lo) as usize] {
                xi[(x - record.lo) as usize] = true;
                xi_count += 1;
            }
        }
        Sweep {
            record,
            area,
            mode,
            reach: vec![None; n],
            arena: Vec::new(),
            xi,
            xi_count,
            capture: None,
            captured: None,
        }
    }

    fn xi_idx(&self, x: Site) -> Option<usize> {
        (self.record.lo <= x && x <= self.record.hi).then(|| (x - self.record.lo) as usize)
    }

    fn idx(&self, x: Site) -> Option<usize> {
        (self.area.lo <= x && x <= self.area.hi).then(|| (x - self.area.lo) as usize)
    }

    fn seed(&mut self, x: Site, time: f64) {
        if let Some(i) = self.idx(x) {
            if self.reach[i].is_none() {
                self.reach[i] = Some(Trail {
                    start: SpaceTimePoint { site: x, time },
                    node: NO_NODE,
                });
            }
        }
    }

    fn arrow(&mut self, step: WitnessStep) {
        let (Some(i), Some(j)) = (self.idx(step.from), self.idx(step.to)) else {
            return;
        };
        if let Some(t) = self.reach[i] {
            if self.reach[j].is_none() {
                self.arena.push((step, t.node));
                self.reach[j] = Some(Trail {
                    start: t.start,
                    node: (self.arena.len() - 1) as u32,
                });
            }
        }
    }

    fn xi_set(&mut self, x: Site, v: bool) {
        if let Some(i) = self.xi_idx(x) {
            if self.xi[i] != v {
                self.xi[i] = v;
                if v {
                    self.xi_count += 1;
                } else {
                    self.xi_count -= 1;
                }
            }
        }
    }

    fn xi_extreme(&self, right: bool) -> Option<Site> {
        if self.xi_count == 0 {
            return None;
        }
        let pos = if right {
            self.xi.iter().rposition(|&b| b)
        } else {
            self.xi.iter().position(|&b| b)
        };
        pos.map(|i| self.record.lo + i as Site)
    }

    /// Applies every arrival in `(after, until]`; `source` is re-seeded
    /// after each event when given (paths may start at any time there).
    fn run(&mut self, after: f64, until: f64, source: Option<Site>) {
        let events = &self.record.events;
        let boosts = &self.record.boosts;
        let (mut i, mut j) = (
            events.partition_point(|e| e.time <= after),
            boosts.partition_point(|e| e.time <= after),
        );
        let boosting = matches!(self.mode, PathMode::LambdaE(_));
        loop {
            let ne = events.get(i).filter(|e| e.time <= until);
            let nb = boosts.get(j).filter(|e| boosting && e.time <= until);
            // Interior arrivals precede boosts at equal times.
            let take_edge = match (ne, nb) {
                (Some(a), Some(b)) => a.time <= b.time,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_edge {
                let e = events[i];
                self.apply_event(i, e);
                i += 1;
            } else {
                let e = boosts[j];
                self.apply_boost(j, e);
                j += 1;
            }
            if let Some(s) = source {
                self.seed(s, if take_edge { events[i - 1].time } else { boosts[j - 1].time });
            }
        }
    }

    fn apply_event(&mut self, index: usize, e: ClockEvent) {
        match e.object {
            ClockObjectId::SiteRecovery(x) => {
                if let Some(k) = self.idx(x) {
                    self.reach[k] = None;
                }
                self.xi_set(x, false);
            }
            ClockObjectId::DirectedEdge(x, d) => {
                let y = x + d.step();
                if self.xi_idx(x).is_some_and(|k| self.xi[k]) {
                    self.xi_set(y, true);
                }
                self.arrow(WitnessStep {
                    kind: ArrowKind::Edge,
                    index,
                    time: e.time,
                    from: x,
                    to: y,
                });
            }
            _ => {}
        }
    }

    fn apply_boost(&mut self, index: usize, e: ClockEvent) {
        let PathMode::LambdaE(variant) = self.mode else {
            return;
        };
        let (src, to) = match e.object {
            ClockObjectId::BoostRight if variant.boosts_right() => match self.xi_extreme(true) {
                Some(r) => (r, r + 1),
                None => return,
            },
            ClockObjectId::BoostLeft if variant.boosts_left() => match self.xi_extreme(false) {
                Some(l) => (l, l - 1),
                None => return,
            },
            _ => return,
        };
        if self.capture == Some(index) {
            self.captured = Some((src, to));
        }
        self.xi_set(to, true);
        self.arrow(WitnessStep {
            kind: ArrowKind::Boost,
            index,
            time: e.time,
            from: src,
            to,
        });
    }

    fn witness(&self, x: Site) -> Option<Witness> {
        let t = self.reach[self.idx(x)?]?;
        let mut steps = Vec::new();
        let mut node = t.node;
        while node != NO_NODE {
            let (s, prev) = self.arena[node as usize];
            steps.push(s);
            node = prev;
        }
        steps.reverse();
        Some(Witness {
            start: t.start,
            steps,
        })
    }
}

fn check_area(record: &SpaceTimeRecord, confine: Option<SpaceTimeBox>) -> Result<SpaceTimeBox> {
    let full = SpaceTimeBox::of_record(record);
    let area = confine.unwrap_or(full);
    if !area.within(&full) {
        return Err(Error::RecordIncomplete {
            rec_lo: record.lo,
            rec_hi: record.hi,
            rec_t0: record.t0,
            rec_t1: record.t1,
        });
    }
    Ok(area)
}

/// Whether an open path leads from `from` to `to` inside `confine` (the
/// whole record by default). `initial_set` is the configuration at the
/// record's start that drives boost arrows in `LambdaE` mode.
pub fn open_path_exists(
    record: &SpaceTimeRecord,
    from: SpaceTimePoint,
    to: SpaceTimePoint,
    mode: PathMode,
    initial_set: &[Site],
    confine: Option<SpaceTimeBox>,
) -> Result<PathResult> {
    let area = check_area(record, confine)?;
    if from.time > to.time {
        return Err(Error::InvalidParams(format!(
            "path start time {} is after end time {}",
            from.time, to.time
        )));
    }
    if !area.contains(from) || !area.contains(to) {
        return Ok(PathResult {
            exists: false,
            witness: None,
        });
    }
    let mut sweep = Sweep::new(record, area, mode, initial_set);
    sweep.run(record.t0.min(area.t0) - 1.0, from.time, None);
    sweep.seed(from.site, from.time);
    sweep.run(from.time, to.time, None);
    let witness = sweep.witness(to.site);
    Ok(PathResult {
        exists: witness.is_some(),
        witness,
    })
}

/// Sites reachable at `until` from `sources` at `start`, each with a
/// witness.
pub fn reachable_from(
    record: &SpaceTimeRecord,
    sources: &[Site],
    start: f64,
    until: f64,
    mode: PathMode,
    initial_set: &[Site],
    confine: Option<SpaceTimeBox>,
) -> Result<Vec<(Site, Witness)>> {
    let area = check_area(record, confine)?;
    let mut sweep = Sweep::new(record, area, mode, initial_set);
    sweep.run(record.t0 - 1.0, start, None);
    for &s in sources {
        sweep.seed(s, start);
    }
    sweep.run(start, until, None);
    Ok((area.lo..=area.hi)
        .filter_map(|x| sweep.witness(x).map(|w| (x, w)))
        .collect())
}

/// Vertical crossing: an interior open path inside `bx` from its bottom to
/// its top, starting anywhere on the bottom edge.
pub fn box_crossed_vertically(record: &SpaceTimeRecord, bx: SpaceTimeBox) -> Result<CrossingReport> {
    let bottom: Vec<Site> = (bx.lo..=bx.hi).collect();
    let reached = reachable_from(record, &bottom, bx.t0, bx.t1, PathMode::LambdaI, &[], Some(bx))?;
    Ok(CrossingReport {
        vertical: Some(!reached.is_empty()),
        horizontal: None,
        vertical_witness: reached.into_iter().next().map(|(_, w)| w),
        horizontal_witness: None,
    })
}

/// Vertical crossing from an explicit set of bottom sites.
pub fn box_crossed_vertically_from(
    record: &SpaceTimeRecord,
    bx: SpaceTimeBox,
    initial_set: &[Site],
) -> Result<CrossingReport> {
    let reached = reachable_from(record, initial_set, bx.t0, bx.t1, PathMode::LambdaI, &[], Some(bx))?;
    Ok(CrossingReport {
        vertical: Some(!reached.is_empty()),
        horizontal: None,
        vertical_witness: reached.into_iter().next().map(|(_, w)| w),
        horizontal_witness: None,
    })
}

/// Horizontal crossing: an interior open path inside `bx` from its left
/// column to its right column between some pair of times.
pub fn box_crossed_horizontally(record: &SpaceTimeRecord, bx: SpaceTimeBox) -> Result<CrossingReport> {
    let area = check_area(record, Some(bx))?;
    let mut sweep = Sweep::new(record, area, PathMode::LambdaI, &[]);
    sweep.seed(bx.lo, bx.t0);
    let target = bx.hi;
    let mut witness = sweep.witness(target);
    if witness.is_none() {
        // Sweep event by event so the first arrival at the right column is
        // kept even if that site recovers later.
        let times: Vec<f64> = record
            .events
            .iter()
            .map(|e| e.time)
            .filter(|&t| t > bx.t0 && t <= bx.t1)
            .collect();
        let mut prev = bx.t0;
        for t in times {
            sweep.run(prev, t, Some(bx.lo));
            prev = t;
            if let Some(w) = sweep.witness(target) {
                witness = Some(w);
                break;
            }
        }
    }
    Ok(CrossingReport {
        vertical: None,
        horizontal: Some(witness.is_some()),
        vertical_witness: None,
        horizontal_witness: witness,
    })
}

/// Checks a witness against the record: arrows exist with the stated
/// endpoints, are time ordered inside `[start, end_time]`, and no recovery
/// mark interrupts the occupied site between consecutive arrows. Boost
/// arrows are checked against a replay from `initial_set`.
pub fn verify_witness(
    record: &SpaceTimeRecord,
    witness: &Witness,
    end_time: f64,
    mode: PathMode,
    initial_set: &[Site],
) -> bool {
    let mut site = witness.start.site;
    let mut t = witness.start.time;
    let recovered = |x: Site, a: f64, b: f64| {
        record
            .events
            .iter()
            .any(|e| e.object == ClockObjectId::SiteRecovery(x) && e.time > a && e.time <= b)
    };
    for s in &witness.steps {
        if s.from != site || s.time < t || recovered(site, t, s.time) {
            return false;
        }
        let ok = match s.kind {
            ArrowKind::Edge => record.events.get(s.index).is_some_and(|e| {
                e.time == s.time
                    && match e.object {
                        ClockObjectId::DirectedEdge(x, d) => x == s.from && x + d.step() == s.to,
                        _ => false,
                    }
            }),
            ArrowKind::Boost => {
                let PathMode::LambdaE(_) = mode else {
                    return false;
                };
                record.boosts.get(s.index).is_some_and(|e| e.time == s.time)
                    && boost_endpoints(record, mode, initial_set, s.index) == Some((s.from, s.to))
            }
        };
        if !ok {
            return false;
        }
        site = s.to;
        t = s.time;
    }
    t <= end_time && !recovered(site, t, end_time)
}

fn boost_endpoints(
    record: &SpaceTimeRecord,
    mode: PathMode,
    initial_set: &[Site],
    index: usize,
) -> Option<(Site, Site)> {
    let mut sweep = Sweep::new(record, SpaceTimeBox::of_record(record), mode, initial_set);
    sweep.capture = Some(index);
    sweep.run(record.t0 - 1.0, record.boosts[index].time, None);
    sweep.captured
}

/// Reachable end sites on `[lo, hi]` by enumerating every subset of the
/// interior edge arrivals (at most `max_edges` of them) as a candidate
/// path. Independent of the sweep; exponential cost.
pub fn exhaustive_reachable(
    record: &SpaceTimeRecord,
    sources: &[Site],
    start: f64,
    until: f64,
    max_edges: usize,
) -> Option<Vec<Site>> {
    let inside = |x: Site| record.lo <= x && x <= record.hi;
    let edges: Vec<(f64, Site, Site)> = record
        .events
        .iter()
        .filter(|e| e.time > start && e.time <= until)
        .filter_map(|e| match e.object {
            ClockObjectId::DirectedEdge(x, d) if inside(x) && inside(x + d.step()) => {
                Some((e.time, x, x + d.step()))
            }
            _ => None,
        })
        .collect();
    if edges.len() > max_edges {
        return None;
    }
    let recoveries: Vec<(f64, Site)> = record
        .events
        .iter()
        .filter_map(|e| match e.object {
            ClockObjectId::SiteRecovery(x) => Some((e.time, x)),
            _ => None,
        })
        .collect();
    let survives = |x: Site, a: f64, b: f64| !recoveries.iter().any(|&(t, y)| y == x && t > a && t <= b);
    let mut ends = vec![false; (record.hi - record.lo + 1) as usize];
    for mask in 0u32..(1 << edges.len()) {
        let chain: Vec<&(f64, Site, Site)> =
            (0..edges.len()).filter(|k| mask >> k & 1 == 1).map(|k| &edges[k]).collect();
        for &s in sources {
            if !inside(s) {
                continue;
            }
            let mut site = s;
            let mut t = start;
            let mut ok = true;
            for &&(tau, x, y) in &chain {
                if x != site || !survives(site, t, tau) {
                    ok = false;
                    break;
                }
                site = y;
                t = tau;
            }
            if ok && survives(site, t, until) {
                ends[(site - record.lo) as usize] = true;
            }
        }
    }
    Some(
        ends.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| record.lo + i as Site)
            .collect(),
    )
}

/// Vertical crossing of `[0, w] x [0, height]` decided with the engine: the
/// interior process confined to the box and started from the full bottom
/// edge is alive at the top.
pub fn crossing_trial(params: Params, w: u64, height: f64, seed: u64) -> Result<bool> {
    let p = Params::standard(params.lambda_i)?;
    let sites: Vec<Site> = (0..=w as Site).collect();
    let mut sim = Simulator::closed_segment(p, w as usize + 1, &sites, seed, SimOptions::default())?;
    sim.run_until(height);
    Ok(!sim.is_extinct())
}

/// Fraction of `trials` seeds (derived from `seed`) whose box is crossed.
pub fn crossing_probability(params: Params, w: u64, height: f64, trials: usize, seed: u64) -> Result<f64> {
    let hits = (0..trials)
        .into_par_iter()
        .map(|i| crossing_trial(params, w, height, trial_seed(seed, i as u64)))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(hits as f64 / trials as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxScalingPoint {
    /// Box height (time).
    pub n: f64,
    /// Interpolated width at which the crossing probability is `target`.
    pub w_star: f64,
    /// Integer width nearest the target.
    pub w: u64,
    pub p_at_w: f64,
    pub p_at_w_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxScalingFit {
    pub target: f64,
    pub trials: usize,
    pub points: Vec<BoxScalingPoint>,
    /// Regression of `log w*` on `log n`; the slope estimates `1 - delta`.
    pub fit: LinearFit,
    pub exponent: f64,
    pub exponent_ci: (f64, f64),
    pub delta_hat: f64,
}

/// Finds `w(n)` for each height by bisection on the integer width with
/// common random numbers, then fits `w(n) = c n^{1 - delta}`.
pub fn fit_box_scaling(
    params: Params,
    heights: &[f64],
    target: f64,
    trials: usize,
    seed: u64,
) -> Result<BoxScalingFit> {
    let mut points = Vec::new();
    for (k, &n) in heights.iter().enumerate() {
        let s = trial_seed(seed, k as u64);
        let mut cache = std::collections::BTreeMap::new();
        let mut p = |w: u64| -> Result<f64> {
            if let Some(&v) = cache.get(&w) {
                return Ok(v);
            }
            let v = crossing_probability(params, w, n, trials, s)?;
            cache.insert(w, v);
            Ok(v)
        };
        let mut hi = 1;
        while p(hi)? < target {
            hi *= 2;
            if hi > 1 << 16 {
                return Err(Error::InvalidParams(format!("no crossing width found for height {n}")));
            }
        }
        let mut lo = if hi == 1 { 0 } else { hi / 2 };
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if p(mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (p_lo, p_hi) = (if lo == 0 && hi == 1 { p(0)? } else { p(lo)? }, p(hi)?);
        let frac = if p_hi > p_lo { (target - p_lo) / (p_hi - p_lo) } else { 1.0 };
        let w_star = lo as f64 + frac.clamp(0.0, 1.0);
        let w = if (target - p_lo).abs() < (p_hi - target).abs() && lo > 0 { lo } else { hi };
        let pw = p(w)?;
        let (_, se) = proportion((pw * trials as f64).round() as usize, trials);
        points.push(BoxScalingPoint {
            n,
            w_star,
            w,
            p_at_w: pw,
            p_at_w_se: se,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.n.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.w_star.max(1e-9).ln()).collect();
    let fit = linear_fit(&x, &y);
    let ci = fit.slope_ci(0.05);
    Ok(BoxScalingFit {
        target,
        trials,
        points,
        exponent: fit.slope,
        exponent_ci: ci,
        delta_hat: 1.0 - fit.slope,
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub y: f64,
    pub probability: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub t: f64,
    pub delta_hat: f64,
    pub trials: usize,
    pub points: Vec<EnvelopePoint>,
    /// Regression of `log P` on `y` over points with at least
    /// `min_count` exceedances.
    pub fit: LinearFit,
}

/// Tail of `sup_{s <= t} |R_s| / t^{1 - delta}` across `y_grid` from the
/// supplied suprema, with a log-linear fit.
pub fn fit_edge_envelope(
    suprema: &[f64],
    t: f64,
    delta_hat: f64,
    y_grid: &[f64],
    min_trials: usize,
    min_count: usize,
) -> Result<EnvelopeFit> {
    if suprema.len() < min_trials {
        return Err(Error::InsufficientTrials {
            have: suprema.len(),
            need: min_trials,
        });
    }
    let scale = t.powf(1.0 - delta_hat);
    let points: Vec<EnvelopePoint> = y_grid
        .iter()
        .map(|&y| {
            let count = suprema.iter().filter(|&&s| s > y * scale).count();
            EnvelopePoint {
                y,
                probability: count as f64 / suprema.len() as f64,
                count,
            }
        })
        .collect();
    let used: Vec<&EnvelopePoint> = points.iter().filter(|p| p.count >= min_count).collect();
    let x: Vec<f64> = used.iter().map(|p| p.y).collect();
    let ly: Vec<f64> = used.iter().map(|p| p.probability.ln()).collect();
    let fit = linear_fit(&x, &ly);
    Ok(EnvelopeFit {
        t,
        delta_hat,
        trials: suprema.len(),
        points,
        fit,
    })
}

/// `sup_{s <= t} |R_s|` of a critical half-line run, or `None` for an
/// invalid run.
pub fn half_line_edge_supremum(params: Params, t: f64, seed: u64) -> Result<Option<f64>> {
    let depth = SimOptions::default().truncation.halfline_depth(&params, t);
    let field = ClockField::new(seed, &params);
    let mut sim = Simulator::half_line(params, field, depth, t, SimOptions::default())?;
    sim.run_until(t);
    if !sim.is_valid() {
        return Ok(None);
    }
    Ok(sim
        .trajectory()
        .right_edge_range
        .map(|(a, b)| a.unsigned_abs().max(b.unsigned_abs()) as f64))
}
