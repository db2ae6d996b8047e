//! Event-driven evolution under the sitewise construction.
//!
//! The pending queue holds one entry per relevant clock object: a recovery
//! clock for every infected (non-frozen) site, an infection clock for every
//! directed edge from an infected site into a susceptible one, and the boost
//! clocks the variant uses. Entries of objects that stop being relevant are
//! dropped lazily when popped; an object that becomes relevant again resumes
//! its own stream from the current time, so the realized dynamics depend only
//! on the clock field.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::clock::{ClockField, ClockFieldView, ClockObjectId, Cursor, Direction};
use crate::error::{Error, Result};
use crate::lattice::{
    Cardinality, Configuration, InitialCondition, LeftBoundary, LeftEdge, Params, Site,
};

const TAG_RECOVERY: u8 = 0;
const TAG_RIGHT: u8 = 1;
const TAG_LEFT: u8 = 2;
const TAG_BOOST_LEFT: u8 = 3;
const TAG_BOOST_RIGHT: u8 = 4;

/// Window sizing for finite and half-line runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Extra sites added to `ceil(4 (lambda_i + lambda_e + 1) T)`.
    pub margin: u64,
    /// Width of the overflow guard bands (finite windows) and of the frozen
    /// infected guard (half-lines).
    pub guard_width: usize,
    /// Overrides the default half-line depth.
    pub halfline_depth: Option<u64>,
    /// Move a half-line's frozen guard right as the remaining horizon
    /// shrinks, keeping only the sites that can still reach the edge.
    #[serde(default = "default_true")]
    pub moving_guard: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            margin: 64,
            guard_width: 8,
            halfline_depth: None,
            moving_guard: true,
        }
    }
}

impl TruncationPolicy {
    /// `W(T) = ceil(4 (lambda_i + lambda_e + 1) T) + margin`.
    pub fn window_halfwidth(&self, params: &Params, horizon: f64) -> u64 {
        let w = 4.0 * (params.lambda_i + params.lambda_e + 1.0) * horizon.max(0.0);
        w.ceil() as u64 + self.margin + self.guard_width as u64
    }

    /// Half-line truncation depth. Influence of the truncation travels
    /// right no faster than a rate-`lambda_i` Poisson front, so the default
    /// is that front's mean plus six standard deviations and a margin; runs
    /// are still checked against the realized front.
    pub fn halfline_depth(&self, params: &Params, horizon: f64) -> u64 {
        self.halfline_depth.unwrap_or_else(|| {
            self.cone_depth(params, horizon) + self.guard_width as u64
        })
    }

    /// Distance behind the right edge that can still influence it within
    /// `remaining` time: the front's reach plus room for the edge to
    /// retreat.
    pub fn cone_depth(&self, params: &Params, remaining: f64) -> u64 {
        let rem = remaining.max(0.0);
        let m = params.lambda_i * rem;
        (m + 6.0 * m.sqrt() + 12.0 * rem.sqrt()).ceil() as u64 + 2 * self.margin
    }
}

/// Open windows model ℤ (leaving the window invalidates the trial); closed
/// windows suppress every infection leaving the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Open,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Spacing of trajectory samples.
    pub cadence: f64,
    pub truncation: TruncationPolicy,
    /// Keep the applied-event log.
    pub record_events: bool,
    /// Keep the history of the right edge so auxiliary processes can be
    /// spawned at past times.
    pub retain_edge_history: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            cadence: 1.0,
            truncation: TruncationPolicy::default(),
            record_events: false,
            retain_edge_history: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub right_edge: Option<Site>,
    pub left_edge: Option<LeftEdge>,
    pub cardinality: Cardinality,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionTime {
    At(f64),
    Censored(f64),
}

impl ExtinctionTime {
    pub fn time(self) -> Option<f64> {
        match self {
            ExtinctionTime::At(t) => Some(t),
            ExtinctionTime::Censored(_) => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, ExtinctionTime::Censored(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub extinction_time: ExtinctionTime,
    pub event_count: u64,
    /// Reason the trial is invalid, if it is.
    pub invalid: Option<String>,
    /// Smallest and largest right edge seen at any event time.
    pub right_edge_range: Option<(Site, Site)>,
}

impl Trajectory {
    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    /// CSV with columns `time,right_edge,left_edge,cardinality`. Missing
    /// edges are empty fields; infinite values print as `-inf` / `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,right_edge,left_edge,cardinality\n");
        for s in &self.samples {
            let r = s.right_edge.map(|x| x.to_string()).unwrap_or_default();
            let l = match s.left_edge {
                None => String::new(),
                Some(LeftEdge::Site(x)) => x.to_string(),
                Some(LeftEdge::NegInfinity) => "-inf".into(),
            };
            let c = match s.cardinality {
                Cardinality::Finite(n) => n.to_string(),
                Cardinality::Infinite => "inf".into(),
            };
            out.push_str(&format!("{},{r},{l},{c}\n", s.time));
        }
        out
    }

    /// Right edge at sample `i`.
    pub fn right_at(&self, i: usize) -> Option<Site> {
        self.samples.get(i).and_then(|s| s.right_edge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    Infected(Site),
    Recovered(Site),
    /// The half-line guard was extended through this site.
    FrozenThrough(Site),
    NoChange,
}

/// One applied clock event, in the simulator's internal coordinates and
/// reported time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedEvent {
    pub time: f64,
    pub object: ClockObjectId,
    pub effect: Effect,
}

/// Queue key: time bits in the high half (nonnegative floats order like
/// their bit patterns), object slot in the low half. Slots order sites
/// left to right with tags within a site, and put boosts last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pending(u128);

const SLOT_BOOST_LEFT: u64 = u64::MAX - 1;
const SLOT_BOOST_RIGHT: u64 = u64::MAX;

impl Pending {
    #[inline]
    fn new(time: f64, slot: u64) -> Self {
        debug_assert!(time >= 0.0);
        Pending((time.to_bits() as u128) << 64 | slot as u128)
    }

    #[inline]
    fn time(self) -> f64 {
        f64::from_bits((self.0 >> 64) as u64)
    }

    #[inline]
    fn slot(self) -> u64 {
        self.0 as u64
    }
}

fn object_of(site: Site, tag: u8) -> ClockObjectId {
    match tag {
        TAG_RECOVERY => ClockObjectId::SiteRecovery(site),
        TAG_RIGHT => ClockObjectId::DirectedEdge(site, Direction::Right),
        TAG_LEFT => ClockObjectId::DirectedEdge(site, Direction::Left),
        TAG_BOOST_LEFT => ClockObjectId::BoostLeft,
        _ => ClockObjectId::BoostRight,
    }
}

#[inline]
fn site_code(site: Site, tag: u8) -> u64 {
    (((site << 1) ^ (site >> 63)) as u64) << 2 | tag as u64
}

/// Rightward Richardson front started from the last frozen guard site: the
/// set of sites the truncation can have influenced is contained in
/// `(-inf, site]`.
#[derive(Clone, Copy, Debug)]
struct InfluenceFront {
    site: Site,
    next: f64,
}

impl InfluenceFront {
    fn starting_at(site: Site, time: f64, clock: &ClockFieldView, rate: f64) -> Self {
        let next = if rate > 0.0 {
            let code = site_code(site + clock.space_offset, TAG_RIGHT);
            clock.field.advance(code, rate, &mut Cursor::default(), time)
        } else {
            f64::INFINITY
        };
        InfluenceFront { site, next }
    }
}

#[derive(Clone, Debug)]
pub struct Simulator {
    params: Params,
    cfg: Configuration,
    clock: ClockFieldView,
    domain: Domain,
    options: SimOptions,
    /// Absolute (clock-field) time.
    now: f64,
    /// Reported time is `now - time_origin`.
    time_origin: f64,
    /// Reported site is `internal - space_frame`.
    space_frame: Site,
    start_time: f64,
    heap: BinaryHeap<Reverse<Pending>>,
    cursor_time: Vec<f64>,
    cursor_index: Vec<u32>,
    scheduled: Vec<u8>,
    boost_cursor: [Cursor; 2],
    boost_scheduled: [bool; 2],
    overflow_guard: usize,
    trace: Trajectory,
    next_sample: f64,
    extinct: bool,
    invalid: Option<Invalidity>,
    right_range_internal: Option<(Site, Site)>,
    front: Option<InfluenceFront>,
    /// Absolute end of the horizon a moving guard is sized for.
    guard_horizon: Option<f64>,
    next_guard_move: f64,
    event_log: Option<Vec<AppliedEvent>>,
    edge_history: Option<Vec<(f64, Option<Site>)>>,
}

impl Simulator {
    /// Builds a simulator for `initial`, sizing the window for runs up to
    /// `horizon` (measured after any burn-in).
    pub fn new(
        params: Params,
        initial: &InitialCondition,
        seed: u64,
        horizon: f64,
        options: SimOptions,
    ) -> Result<Self> {
        params.validate()?;
        initial.validate()?;
        let field = ClockField::new(seed, &params);
        let policy = options.truncation;
        match initial {
            InitialCondition::SingleOrigin | InitialCondition::FiniteSet { .. } => {
                let sites = initial.finite_sites().expect("finite condition");
                let w = policy.window_halfwidth(&params, horizon) as Site;
                let cfg = Configuration::from_sites(
                    sites[0] - w,
                    sites[sites.len() - 1] + w,
                    &sites,
                )?;
                Self::from_parts(params, cfg, field.view(), Domain::Open, options)
            }
            InitialCondition::HalfLine { depth } => {
                Self::half_line(params, field, *depth, horizon, options)
            }
            InitialCondition::StationaryApprox { burn_in } => {
                let depth = policy.halfline_depth(&params, burn_in + horizon);
                let mut sim = Self::half_line(params, field, depth, burn_in + horizon, options)?;
                sim.run_until(*burn_in);
                if let Some(e) = sim.error() {
                    return Err(e);
                }
                sim.rebase_at_right_edge();
                Ok(sim)
            }
        }
    }

    /// `(-inf, 0]` truncated `depth` sites deep: sites `[-depth, 0]` are
    /// infected and the leftmost `guard_width` of them are frozen.
    pub fn half_line(
        params: Params,
        field: ClockField,
        depth: u64,
        horizon: f64,
        options: SimOptions,
    ) -> Result<Self> {
        let guard = options.truncation.guard_width.max(1);
        if depth < guard as u64 {
            return Err(Error::InvalidInitialCondition(format!(
                "half-line depth {depth} is smaller than the guard width {guard}"
            )));
        }
        let w = options.truncation.window_halfwidth(&params, horizon) as Site;
        let lo = -(depth as Site);
        let cfg = Configuration::half_line(lo, w, guard, 0);
        let mut sim = Self::from_parts(params, cfg, field.view(), Domain::Open, options)?;
        if options.truncation.moving_guard {
            sim.guard_horizon = Some(sim.now + horizon);
            sim.next_guard_move = sim.now + 1.0;
        }
        Ok(sim)
    }

    /// Closed segment `[0, n - 1]` with `sites` initially infected.
    pub fn closed_segment(
        params: Params,
        n: usize,
        sites: &[Site],
        seed: u64,
        options: SimOptions,
    ) -> Result<Self> {
        params.validate()?;
        let cfg = Configuration::from_sites(0, n as Site - 1, sites)?;
        let field = ClockField::new(seed, &params);
        Self::from_parts(params, cfg, field.view(), Domain::Closed, options)
    }

    /// General constructor. The simulator starts at absolute time
    /// `clock.time_offset` and reads object `x` of the field as
    /// `x + clock.space_offset`.
    pub fn from_parts(
        params: Params,
        cfg: Configuration,
        clock: ClockFieldView,
        domain: Domain,
        options: SimOptions,
    ) -> Result<Self> {
        params.validate()?;
        let n = (cfg.hi() - cfg.lo() + 1) as usize;
        let start = clock.time_offset;
        let overflow_guard = match domain {
            Domain::Open => options.truncation.guard_width,
            Domain::Closed => 0,
        };
        let front = match cfg.left_boundary() {
            LeftBoundary::TruncatedHalfLine { guard } => Some(InfluenceFront::starting_at(
                cfg.lo() + guard as Site - 1,
                start,
                &clock,
                params.lambda_i,
            )),
            LeftBoundary::Finite => None,
        };
        let mut sim = Simulator {
            params,
            clock,
            domain,
            options,
            now: start,
            time_origin: start,
            space_frame: 0,
            start_time: start,
            heap: BinaryHeap::new(),
            cursor_time: vec![0.0; 3 * n],
            cursor_index: vec![0; 3 * n],
            scheduled: vec![0; n],
            boost_cursor: [Cursor::default(); 2],
            boost_scheduled: [false; 2],
            overflow_guard,
            trace: Trajectory {
                samples: Vec::new(),
                extinction_time: ExtinctionTime::Censored(0.0),
                event_count: 0,
                invalid: None,
                right_edge_range: None,
            },
            next_sample: 0.0,
            extinct: false,
            invalid: None,
            right_range_internal: None,
            front,
            guard_horizon: None,
            next_guard_move: f64::INFINITY,
            event_log: options.record_events.then(Vec::new),
            edge_history: options.retain_edge_history.then(Vec::new),
            cfg,
        };
        if let Some(x) = sim.cfg.sites().find(|&x| sim.in_overflow_band(x)) {
            return Err(Error::InvalidInitialCondition(format!(
                "initial site {x} lies in the guard band"
            )));
        }
        sim.initialize();
        Ok(sim)
    }

    fn initialize(&mut self) {
        self.extinct = self.cfg.is_empty();
        let sites: Vec<Site> = self.cfg.sites().collect();
        for x in sites {
            self.activate_site(x);
        }
        self.schedule_boosts();
        self.note_right_edge();
        self.emit_samples(self.now, true);
        if self.extinct {
            self.trace.extinction_time = ExtinctionTime::At(self.reported(self.now));
        }
    }

    /// Moves the reporting frame so that the current time is 0 and the
    /// current right edge is site 0; resets the trace.
    pub fn rebase_at_right_edge(&mut self) {
        self.time_origin = self.now;
        self.space_frame = self.cfg.right_edge().unwrap_or(0);
        self.trace.samples.clear();
        self.trace.event_count = 0;
        self.next_sample = 0.0;
        self.right_range_internal = None;
        self.note_right_edge();
        self.emit_samples(self.now, true);
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn clock(&self) -> ClockFieldView {
        self.clock
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    /// Absolute clock-field time.
    pub fn absolute_time(&self) -> f64 {
        self.now
    }

    /// Reported time since the start (or since the last rebase).
    pub fn time(&self) -> f64 {
        self.now - self.time_origin
    }

    pub fn time_origin(&self) -> f64 {
        self.time_origin
    }

    pub fn space_frame(&self) -> Site {
        self.space_frame
    }

    pub fn is_extinct(&self) -> bool {
        self.extinct
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    pub fn error(&self) -> Option<Error> {
        self.invalid.map(Invalidity::to_error)
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trace
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trace
    }

    pub fn event_log(&self) -> Option<&[AppliedEvent]> {
        self.event_log.as_deref()
    }

    /// Right edge in internal coordinates.
    pub fn right_edge(&self) -> Option<Site> {
        self.cfg.right_edge()
    }

    /// Right edge in reported coordinates.
    pub fn reported_right_edge(&self) -> Option<Site> {
        self.cfg.right_edge().map(|x| x - self.space_frame)
    }

    /// Right edge (internal coordinates) at absolute time `t`, from the
    /// retained history.
    pub fn right_edge_at(&self, t: f64) -> Result<Option<Site>> {
        let unavailable = Error::HistoryUnavailable {
            t,
            from: self.start_time,
            to: self.now,
        };
        let hist = self.edge_history.as_ref().ok_or(unavailable)?;
        if t < self.start_time || t > self.now {
            return Err(Error::HistoryUnavailable {
                t,
                from: self.start_time,
                to: self.now,
            });
        }
        let idx = hist.partition_point(|&(s, _)| s <= t);
        Ok(if idx == 0 { hist[0].1 } else { hist[idx - 1].1 })
    }

    fn reported(&self, abs: f64) -> f64 {
        abs - self.time_origin
    }

    #[inline]
    fn idx(&self, x: Site) -> usize {
        (x - self.cfg.lo()) as usize
    }

    #[inline]
    fn in_overflow_band(&self, y: Site) -> bool {
        if self.overflow_guard == 0 {
            return false;
        }
        let g = self.overflow_guard as Site;
        let left_band = self.cfg.left_boundary() == LeftBoundary::Finite && y < self.cfg.lo() + g;
        left_band || y > self.cfg.hi() - g
    }

    #[inline]
    fn relevant(&self, x: Site, tag: u8) -> bool {
        match tag {
            TAG_RECOVERY => self.cfg.is_infected(x) && !self.cfg.is_frozen(x),
            TAG_RIGHT => {
                self.params.lambda_i > 0.0
                    && self.cfg.is_infected(x)
                    && self.cfg.contains_site(x + 1)
                    && !self.cfg.is_infected(x + 1)
            }
            TAG_LEFT => {
                self.params.lambda_i > 0.0
                    && self.cfg.is_infected(x)
                    && self.cfg.contains_site(x - 1)
                    && !self.cfg.is_infected(x - 1)
            }
            TAG_BOOST_LEFT => {
                self.params.variant.boosts_left()
                    && self.params.boost_rate() > 0.0
                    && matches!(self.cfg.left_edge(), Some(LeftEdge::Site(_)))
            }
            _ => {
                self.params.variant.boosts_right()
                    && self.params.boost_rate() > 0.0
                    && !self.cfg.is_empty()
            }
        }
    }

    #[inline]
    fn rate_of(&self, tag: u8) -> f64 {
        match tag {
            TAG_RECOVERY => self.params.recovery_rate,
            TAG_RIGHT | TAG_LEFT => self.params.lambda_i,
            _ => self.params.boost_rate(),
        }
    }

    /// Ensures a pending entry for a relevant site object.
    #[inline]
    fn schedule(&mut self, x: Site, tag: u8) {
        let i = self.idx(x);
        let bit = 1u8 << tag;
        if self.scheduled[i] & bit != 0 {
            return;
        }
        let slot = 3 * i + tag as usize;
        let mut c = Cursor {
            index: self.cursor_index[slot] as u64,
            time: self.cursor_time[slot],
        };
        let code = site_code(x + self.clock.space_offset, tag);
        let t = self.clock.field.advance(code, self.rate_of(tag), &mut c, self.now);
        self.cursor_index[slot] = c.index as u32;
        self.cursor_time[slot] = c.time;
        self.scheduled[i] |= bit;
        self.heap.push(Reverse(Pending::new(t, (i as u64) << 3 | tag as u64)));
    }

    fn schedule_boosts(&mut self) {
        for (k, tag) in [(0usize, TAG_BOOST_LEFT), (1, TAG_BOOST_RIGHT)] {
            if !self.boost_scheduled[k] && self.relevant(0, tag) {
                let obj = object_of(0, tag);
                let t = self.clock.field.advance(
                    obj.code(),
                    self.params.boost_rate(),
                    &mut self.boost_cursor[k],
                    self.now,
                );
                self.boost_scheduled[k] = true;
                let slot = if k == 0 { SLOT_BOOST_LEFT } else { SLOT_BOOST_RIGHT };
                self.heap.push(Reverse(Pending::new(t, slot)));
            }
        }
    }

    /// Schedules every object made relevant by `x` becoming infected.
    #[inline]
    fn activate_site(&mut self, x: Site) {
        if !self.cfg.is_frozen(x) {
            self.schedule(x, TAG_RECOVERY);
        }
        if self.relevant(x, TAG_RIGHT) {
            self.schedule(x, TAG_RIGHT);
        }
        if self.relevant(x, TAG_LEFT) {
            self.schedule(x, TAG_LEFT);
        }
    }

    #[inline]
    fn decode(&self, slot: u64) -> (Site, u8) {
        match slot {
            SLOT_BOOST_LEFT => (Site::MAX, TAG_BOOST_LEFT),
            SLOT_BOOST_RIGHT => (Site::MAX, TAG_BOOST_RIGHT),
            _ => (self.cfg.lo() + (slot >> 3) as Site, (slot & 7) as u8),
        }
    }

    #[inline]
    fn clear_scheduled(&mut self, slot: u64) {
        match slot {
            SLOT_BOOST_LEFT => self.boost_scheduled[0] = false,
            SLOT_BOOST_RIGHT => self.boost_scheduled[1] = false,
            _ => self.scheduled[(slot >> 3) as usize] &= !(1u8 << (slot & 7)),
        }
    }

    /// Drops stale entries and returns the earliest relevant one as
    /// `(time, site, tag)`.
    fn peek_relevant(&mut self) -> Option<(f64, Site, u8)> {
        while let Some(&Reverse(p)) = self.heap.peek() {
            let (site, tag) = self.decode(p.slot());
            if self.relevant(site, tag) {
                return Some((p.time(), site, tag));
            }
            self.heap.pop();
            self.clear_scheduled(p.slot());
        }
        None
    }

    /// Absolute time of the next relevant event.
    pub fn next_event_time(&mut self) -> Option<f64> {
        if self.extinct || self.invalid.is_some() {
            return None;
        }
        self.peek_relevant().map(|p| p.0)
    }

    fn emit_samples(&mut self, abs: f64, inclusive: bool) {
        let t = self.reported(abs);
        while self.next_sample < t || (inclusive && self.next_sample == t) {
            let s = Sample {
                time: self.next_sample,
                right_edge: self.cfg.right_edge().map(|x| x - self.space_frame),
                left_edge: self.cfg.left_edge().map(|l| match l {
                    LeftEdge::Site(x) => LeftEdge::Site(x - self.space_frame),
                    other => other,
                }),
                cardinality: self.cfg.cardinality(),
            };
            self.trace.samples.push(s);
            let k = (self.next_sample / self.options.cadence).round() + 1.0;
            self.next_sample = k * self.options.cadence;
        }
    }

    fn note_right_edge(&mut self) {
        let Some(r) = self.cfg.right_edge() else {
            return;
        };
        self.right_range_internal = Some(match self.right_range_internal {
            None => (r, r),
            Some((a, b)) => (a.min(r), b.max(r)),
        });
        self.trace.right_edge_range = self
            .right_range_internal
            .map(|(a, b)| (a - self.space_frame, b - self.space_frame));
    }

    fn infect(&mut self, y: Site) -> Result<Effect> {
        if !self.cfg.contains_site(y) || self.cfg.is_infected(y) {
            return Ok(Effect::NoChange);
        }
        if self.in_overflow_band(y) {
            let e = Invalidity::WindowOverflow {
                site: y,
                lo: self.cfg.lo(),
                hi: self.cfg.hi(),
            };
            self.mark_invalid(e);
            return Err(e.to_error());
        }
        self.cfg.infect(y);
        self.activate_site(y);
        Ok(Effect::Infected(y))
    }

    fn recover(&mut self, x: Site) -> Effect {
        self.cfg.recover(x);
        if self.cfg.is_empty() {
            self.extinct = true;
            self.heap.clear();
            return Effect::Recovered(x);
        }
        if self.relevant(x - 1, TAG_RIGHT) {
            self.schedule(x - 1, TAG_RIGHT);
        }
        if self.relevant(x + 1, TAG_LEFT) {
            self.schedule(x + 1, TAG_LEFT);
        }
        Effect::Recovered(x)
    }

    fn mark_invalid(&mut self, e: Invalidity) {
        self.trace.invalid = Some(e.to_error().to_string());
        self.invalid = Some(e);
        self.heap.clear();
    }

    /// Pops and applies the earliest pending event.
    pub fn step(&mut self) -> Result<AppliedEvent> {
        if let Some(e) = self.invalid {
            return Err(e.to_error());
        }
        if self.extinct {
            return Err(Error::EmptyProcess);
        }
        let (time, site, tag) = self.peek_relevant().ok_or(Error::EmptyProcess)?;
        while self.next_guard_move <= time {
            let at = self.next_guard_move;
            self.move_guard(at);
            self.next_guard_move = at + 1.0;
            if let Some(e) = self.invalid {
                return Err(e.to_error());
            }
        }
        let Reverse(p) = self.heap.pop().expect("peeked");
        self.clear_scheduled(p.slot());
        self.emit_samples(time, false);
        self.now = time;
        let before_right = self.cfg.right_edge();
        let effect = match tag {
            TAG_RECOVERY => self.recover(site),
            TAG_RIGHT => self.infect(site + 1)?,
            TAG_LEFT => self.infect(site - 1)?,
            TAG_BOOST_LEFT => {
                let l = self.cfg.leftmost_stored().expect("nonempty");
                let e = self.infect(l - 1)?;
                self.schedule_boosts();
                e
            }
            _ => {
                let r = self.cfg.right_edge().expect("nonempty");
                let e = self.infect(r + 1)?;
                self.schedule_boosts();
                e
            }
        };
        self.trace.event_count += 1;
        if self.cfg.right_edge() != before_right {
            self.note_right_edge();
            if let Some(h) = self.edge_history.as_mut() {
                h.push((time, self.cfg.right_edge()));
            }
            if self.front.is_some() {
                self.check_front(before_right);
                self.check_front(self.cfg.right_edge());
            }
        }
        if self.extinct {
            let t = self.reported(time);
            self.trace.extinction_time = ExtinctionTime::At(t);
            self.trace.samples.push(Sample {
                time: t,
                right_edge: None,
                left_edge: None,
                cardinality: Cardinality::Finite(0),
            });
            if self.cfg.guard_width() > 0 {
                self.mark_invalid(Invalidity::NeverDies(t));
            }
        }
        #[cfg(debug_assertions)]
        if self.trace.event_count % 10_000 == 0 {
            assert!(self.cfg.cache_consistent(), "cached extremes drifted");
        }
        let ev = AppliedEvent {
            time: self.reported(time),
            object: object_of(site, tag),
            effect,
        };
        if let Some(log) = self.event_log.as_mut() {
            log.push(ev);
        }
        Ok(ev)
    }

    /// Processes every event with absolute time `<= abs`.
    pub fn advance_to_absolute(&mut self, abs: f64) {
        while let Some(t) = self.next_event_time() {
            if t > abs {
                break;
            }
            if self.step().is_err() {
                break;
            }
        }
        if !self.extinct && self.invalid.is_none() && abs > self.now {
            self.now = abs;
            self.emit_samples(abs, true);
        }
    }

    /// Runs until reported time `t` (or extinction / invalidation).
    pub fn run_until(&mut self, t: f64) -> &Trajectory {
        let abs = self.time_origin + t;
        self.advance_to_absolute(abs);
        if !self.extinct {
            self.trace.extinction_time = ExtinctionTime::Censored(self.reported(self.now));
        }
        self.check_truncation();
        &self.trace
    }

    /// Runs until extinction or until `t_max`, whichever comes first.
    pub fn run_until_extinction(&mut self, t_max: f64) -> &Trajectory {
        self.run_until(t_max)
    }

    /// Advances the truncation influence front to the current time and
    /// invalidates the run if it has reached the right edge.
    pub fn check_truncation(&mut self) {
        if self.invalid.is_none() && self.front.is_some() {
            self.check_front(self.cfg.right_edge());
        }
    }

    fn advance_front(&mut self, to: f64) {
        let rate = self.params.lambda_i;
        let offset = self.clock.space_offset;
        let field = self.clock.field;
        let Some(f) = self.front.as_mut() else {
            return;
        };
        while f.next <= to {
            f.site += 1;
            let code = site_code(f.site + offset, TAG_RIGHT);
            f.next = field.advance(code, rate, &mut Cursor::default(), f.next);
        }
    }

    /// Front at the current time against a right edge value `r` held
    /// since the previous check.
    fn check_front(&mut self, r: Option<Site>) {
        self.advance_front(self.now);
        let (Some(f), Some(r)) = (self.front, r) else {
            return;
        };
        if f.site >= r && self.invalid.is_none() {
            self.mark_invalid(Invalidity::TruncationTouched {
                front: f.site - self.space_frame,
                edge: r - self.space_frame,
            });
        }
    }

    /// Freezes the sites that can no longer influence the right edge
    /// before the guard horizon ends.
    fn move_guard(&mut self, at: f64) {
        let (Some(end), Some(r)) = (self.guard_horizon, self.cfg.right_edge()) else {
            return;
        };
        let depth = self.options.truncation.cone_depth(&self.params, end - at) as Site;
        let top = r - depth;
        let old_top = self.cfg.lo() + self.cfg.guard_width() as Site - 1;
        if top <= old_top {
            return;
        }
        self.now = self.now.max(at);
        self.check_front(Some(r));
        self.cfg.freeze_through(top);
        self.activate_site(top);
        if let Some(f) = self.front {
            if top > f.site {
                self.front = Some(InfluenceFront::starting_at(
                    top,
                    self.now,
                    &self.clock,
                    self.params.lambda_i,
                ));
            }
        }
        if let Some(log) = self.event_log.as_mut() {
            log.push(AppliedEvent {
                time: at - self.time_origin,
                object: ClockObjectId::SiteRecovery(top),
                effect: Effect::FrozenThrough(top),
            });
        }
    }

    /// Site of the truncation influence front (internal coordinates).
    pub fn influence_front(&self) -> Option<Site> {
        self.front.map(|f| f.site)
    }

    /// Sum of the rates of every transition that changes the configuration.
    pub fn total_jump_rate(&self) -> f64 {
        let rates = self.transition_counts();
        rates.recoveries as f64 * self.params.recovery_rate
            + rates.edges as f64 * self.params.lambda_i
            + rates.boosts as f64 * self.params.boost_rate()
    }

    pub fn transition_counts(&self) -> TransitionCounts {
        let mut counts = TransitionCounts::default();
        for x in self.cfg.sites() {
            if !self.cfg.is_frozen(x) {
                counts.recoveries += 1;
            }
            for y in [x - 1, x + 1] {
                if self.cfg.contains_site(y) && !self.cfg.is_infected(y) {
                    counts.edges += 1;
                }
            }
        }
        if self.params.boost_rate() > 0.0 && !self.cfg.is_empty() {
            let closed = self.domain == Domain::Closed;
            if self.params.variant.boosts_right() {
                let r = self.cfg.right_edge().unwrap();
                if !closed || self.cfg.contains_site(r + 1) {
                    counts.boosts += 1;
                }
            }
            if self.params.variant.boosts_left() {
                if let Some(LeftEdge::Site(l)) = self.cfg.left_edge() {
                    if !closed || self.cfg.contains_site(l - 1) {
                        counts.boosts += 1;
                    }
                }
            }
        }
        counts
    }

    /// Number of queued entries, stale ones included.
    pub fn pending_len(&self) -> usize {
        self.heap.len()
    }
}

/// Numbers of effective recovery, edge-infection and boost transitions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub recoveries: usize,
    pub edges: usize,
    pub boosts: usize,
}

/// Why a run stopped being a faithful sample of the infinite process.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Invalidity {
    WindowOverflow { site: Site, lo: Site, hi: Site },
    TruncationTouched { front: Site, edge: Site },
    NeverDies(f64),
}

impl Invalidity {
    fn to_error(self) -> Error {
        match self {
            Invalidity::WindowOverflow { site, lo, hi } => Error::WindowOverflow { site, lo, hi },
            Invalidity::TruncationTouched { front, edge } => Error::TruncationTouched { front, edge },
            Invalidity::NeverDies(t) => Error::NeverDies(t),
        }
    }
}

/// Applies a logged event sequence to `initial`.
pub fn replay_event_log(initial: &Configuration, log: &[AppliedEvent]) -> Configuration {
    let mut cfg = initial.clone();
    for ev in log {
        match ev.effect {
            Effect::Infected(x) => {
                cfg.infect(x);
            }
            Effect::Recovered(x) => {
                cfg.recover(x);
            }
            Effect::FrozenThrough(x) => cfg.freeze_through(x),
            Effect::NoChange => {}
        }
    }
    cfg
}

/// Samples the half-line process seen from its right edge after `burn_in`,
/// restricted to the `report_depth` sites behind (and including) the edge.
/// `depth` is the half-line truncation depth.
pub fn sample_stationary_shifted(
    params: Params,
    burn_in: f64,
    depth: u64,
    seed: u64,
    report_depth: u64,
) -> Result<Configuration> {
    let options = SimOptions::default();
    let field = ClockField::new(seed, &params);
    let mut sim = Simulator::half_line(params, field, depth, burn_in, options)?;
    sim.run_until(burn_in);
    if let Some(e) = sim.error() {
        return Err(e);
    }
    let shifted = sim
        .configuration()
        .shift_to_right_edge()
        .ok_or(Error::NeverDies(burn_in))?;
    Ok(shifted.restricted(-(report_depth as Site), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Variant, LAMBDA_C_ESTIMATE};

    fn bm(lambda: f64, eps: f64) -> Params {
        Params::boosted(lambda, eps, Variant::BoundaryModified).unwrap()
    }

    #[test]
    fn pending_orders_by_time_then_object() {
        let mut h = BinaryHeap::new();
        for (t, slot) in [(2.0, 0), (1.0, 41), (1.0, 40), (1.0, SLOT_BOOST_LEFT), (1.0, 2)] {
            h.push(Reverse(Pending::new(t, slot)));
        }
        let order: Vec<_> = std::iter::from_fn(|| h.pop()).map(|p| (p.0.time(), p.0.slot())).collect();
        assert_eq!(
            order,
            vec![(1.0, 2), (1.0, 40), (1.0, 41), (1.0, SLOT_BOOST_LEFT), (2.0, 0)]
        );
    }

    #[test]
    fn jump_rate_examples() {
        let lam = 1.25;
        let eps = 0.5;
        let opts = SimOptions::default();
        let one = InitialCondition::SingleOrigin;
        let s = Simulator::new(bm(lam, eps), &one, 1, 10.0, opts).unwrap();
        assert_eq!(s.total_jump_rate(), 1.0 + 2.0 * (lam + eps));
        let p = Params::boosted(lam, eps, Variant::RightEdgeModified).unwrap();
        let s = Simulator::new(p, &one, 1, 10.0, opts).unwrap();
        assert_eq!(s.total_jump_rate(), 1.0 + (lam + eps) + lam);
        let p = Params::standard(lam).unwrap();
        let s = Simulator::new(p, &InitialCondition::interval(0, 1), 1, 10.0, opts).unwrap();
        assert_eq!(s.total_jump_rate(), 2.0 + 2.0 * lam);
    }

    #[test]
    fn run_until_zero_gives_single_sample() {
        let mut s = Simulator::new(
            bm(LAMBDA_C_ESTIMATE, 0.5),
            &InitialCondition::SingleOrigin,
            3,
            10.0,
            SimOptions::default(),
        )
        .unwrap();
        let tr = s.run_until(0.0);
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].right_edge, Some(0));
    }

    #[test]
    fn singleton_dies_on_its_recovery() {
        // With no infection clocks the first event must be the recovery.
        let p = Params::standard(0.0).unwrap();
        let mut s = Simulator::new(p, &InitialCondition::SingleOrigin, 8, 10.0, SimOptions::default())
            .unwrap();
        let ev = s.step().unwrap();
        assert_eq!(ev.object, ClockObjectId::SiteRecovery(0));
        assert_eq!(ev.effect, Effect::Recovered(0));
        assert!(s.configuration().is_empty());
        assert_eq!(s.trajectory().extinction_time, ExtinctionTime::At(ev.time));
        assert!(matches!(s.step(), Err(Error::EmptyProcess)));
    }

    #[test]
    fn boost_right_infects_past_the_edge() {
        // Find a seed whose first event from {0} is the right boost.
        let p = bm(1.0, 5.0);
        let found = (0..200u64).find_map(|seed| {
            let mut s =
                Simulator::new(p, &InitialCondition::SingleOrigin, seed, 10.0, SimOptions::default())
                    .unwrap();
            let ev = s.step().unwrap();
            (ev.object == ClockObjectId::BoostRight).then(|| s.configuration().sites().collect::<Vec<_>>())
        });
        assert_eq!(found, Some(vec![0, 1]));
    }

    #[test]
    fn interior_edge_fills_gap() {
        let p = Params::standard(1.0).unwrap();
        let found = (0..500u64).find_map(|seed| {
            let mut s = Simulator::new(
                p,
                &InitialCondition::FiniteSet { sites: vec![0, 2] },
                seed,
                10.0,
                SimOptions::default(),
            )
            .unwrap();
            let ev = s.step().unwrap();
            (ev.object == ClockObjectId::DirectedEdge(0, Direction::Right))
                .then(|| s.configuration().sites().collect::<Vec<_>>())
        });
        assert_eq!(found, Some(vec![0, 1, 2]));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut s = Simulator::new(
                bm(LAMBDA_C_ESTIMATE, 0.5),
                &InitialCondition::SingleOrigin,
                99,
                50.0,
                SimOptions::default(),
            )
            .unwrap();
            s.run_until(50.0).clone()
        };
        assert_eq!(serde_json::to_string(&run()).unwrap(), serde_json::to_string(&run()).unwrap());
    }

    #[test]
    fn half_line_burn_in_zero_is_full_half_line() {
        let p = bm(LAMBDA_C_ESTIMATE, 0.5);
        let c = sample_stationary_shifted(p, 0.0, 64, 1, 20).unwrap();
        assert_eq!(c.sites().collect::<Vec<_>>(), (-20..=0).collect::<Vec<_>>());
    }

    #[test]
    fn event_log_replays_to_final_configuration() {
        let opts = SimOptions {
            record_events: true,
            ..SimOptions::default()
        };
        let mut s = Simulator::new(bm(1.8, 0.4), &InitialCondition::interval(-3, 3), 12, 40.0, opts)
            .unwrap();
        let initial = s.configuration().clone();
        s.run_until(40.0);
        let replayed = replay_event_log(&initial, s.event_log().unwrap());
        assert_eq!(&replayed, s.configuration());
    }

    #[test]
    fn closed_segment_suppresses_outside_infections() {
        let p = bm(3.0, 2.0);
        let mut s = Simulator::closed_segment(p, 3, &[1], 4, SimOptions::default()).unwrap();
        for _ in 0..2000 {
            if s.step().is_err() {
                break;
            }
            assert!(s.configuration().sites().all(|x| (0..3).contains(&x)));
        }
    }

    #[test]
    fn window_overflow_invalidates() {
        let opts = SimOptions {
            truncation: TruncationPolicy {
                margin: 0,
                guard_width: 2,
                ..TruncationPolicy::default()
            },
            ..SimOptions::default()
        };
        // Horizon 0 gives a window of guard width only: the first infection overflows.
        let p = Params::standard(50.0).unwrap();
        let mut s = Simulator::new(p, &InitialCondition::SingleOrigin, 2, 0.0, opts).unwrap();
        let tr = s.run_until(10.0);
        assert!(tr.invalid.is_some());
    }
}
