//! Poisson clocks of the graphical construction.
//!
//! Every clock object (a site's recovery clock, a directed edge's infection
//! clock, or one of the two global boost clocks) owns an arrival stream that
//! is a pure function of `(master_seed, object)`. The `k`-th inter-arrival
//! time is `-ln(u_k) / rate` with `u_k` drawn from a Philox4x32-10 block keyed
//! by the seed and counting over `(k, object)`. Nothing is stored: coupled
//! replicas re-read the same clocks, and any arrival can be regenerated.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Params, Site};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// One step of SplitMix64 started from `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`: the `(index + 1)`-th output of SplitMix64 seeded
/// with `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

pub const TRIAL_SEED_RULE: &str = "splitmix(master, trial_index)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// `x -> x + 1`
    Right,
    /// `x -> x - 1`
    Left,
}

impl Direction {
    pub fn step(self) -> Site {
        match self {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClockObjectId {
    SiteRecovery(Site),
    DirectedEdge(Site, Direction),
    BoostLeft,
    BoostRight,
}

impl fmt::Debug for ClockObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockObjectId::SiteRecovery(x) => write!(f, "N[{x}]"),
            ClockObjectId::DirectedEdge(x, Direction::Right) => write!(f, "N[{x},{}]", x + 1),
            ClockObjectId::DirectedEdge(x, Direction::Left) => write!(f, "N[{x},{}]", x - 1),
            ClockObjectId::BoostLeft => write!(f, "N[e1]"),
            ClockObjectId::BoostRight => write!(f, "N[e2]"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockKind {
    Recovery,
    Edge,
    Boost,
}

impl ClockObjectId {
    pub fn kind(self) -> ClockKind {
        match self {
            ClockObjectId::SiteRecovery(_) => ClockKind::Recovery,
            ClockObjectId::DirectedEdge(..) => ClockKind::Edge,
            ClockObjectId::BoostLeft | ClockObjectId::BoostRight => ClockKind::Boost,
        }
    }

    /// Key mixed into the generator counter.
    pub fn code(self) -> u64 {
        let (site, tag) = match self {
            ClockObjectId::SiteRecovery(x) => (x, 0),
            ClockObjectId::DirectedEdge(x, Direction::Right) => (x, 1),
            ClockObjectId::DirectedEdge(x, Direction::Left) => (x, 2),
            ClockObjectId::BoostLeft => (0, 3),
            ClockObjectId::BoostRight => (1, 3),
        };
        let zigzag = ((site << 1) ^ (site >> 63)) as u64;
        (zigzag << 2) | tag
    }

    /// Tie-break key. Translating every site by the same offset preserves
    /// the induced order, so shifted replicas resolve ties identically.
    #[inline]
    pub fn order_key(self) -> (Site, u8) {
        match self {
            ClockObjectId::SiteRecovery(x) => (x, 0),
            ClockObjectId::DirectedEdge(x, Direction::Right) => (x, 1),
            ClockObjectId::DirectedEdge(x, Direction::Left) => (x, 2),
            ClockObjectId::BoostLeft => (Site::MAX, 0),
            ClockObjectId::BoostRight => (Site::MAX, 1),
        }
    }

    pub fn translated(self, by: Site) -> Self {
        match self {
            ClockObjectId::SiteRecovery(x) => ClockObjectId::SiteRecovery(x + by),
            ClockObjectId::DirectedEdge(x, d) => ClockObjectId::DirectedEdge(x + by, d),
            other => other,
        }
    }
}

impl PartialOrd for ClockObjectId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ClockObjectId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

/// Position in one object's arrival stream: `index` arrivals have been
/// generated and the last of them happened at `time` (0 before the first).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cursor {
    pub index: u64,
    pub time: f64,
}

/// Seed and rates of the graphical construction. Immutable and `Copy`, so
/// it is shared across coupled replicas for free.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockField {
    pub master_seed: u64,
    pub recovery_rate: f64,
    pub edge_rate: f64,
    pub boost_rate: f64,
}

impl ClockField {
    pub fn new(master_seed: u64, params: &Params) -> Self {
        ClockField {
            master_seed,
            recovery_rate: params.recovery_rate,
            edge_rate: params.lambda_i,
            boost_rate: params.boost_rate(),
        }
    }

    pub fn rate(&self, obj: ClockObjectId) -> f64 {
        match obj.kind() {
            ClockKind::Recovery => self.recovery_rate,
            ClockKind::Edge => self.edge_rate,
            ClockKind::Boost => self.boost_rate,
        }
    }

    /// Uniform in `(0, 1)` for arrival `index` of the object with `code`.
    #[inline]
    pub fn uniform(&self, code: u64, index: u64) -> f64 {
        let key = [self.master_seed as u32, (self.master_seed >> 32) as u32];
        let ctr = [index as u32, (index >> 32) as u32, code as u32, (code >> 32) as u32];
        let out = philox4x32_10(ctr, key);
        let bits = ((out[1] as u64) << 32 | out[0] as u64) >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Inter-arrival time number `index` (0-based) of the object.
    #[inline]
    pub fn increment(&self, code: u64, index: u64, rate: f64) -> f64 {
        -self.uniform(code, index).ln() / rate
    }

    /// Time of arrival `index` (0-based), regenerated from scratch.
    pub fn arrival(&self, obj: ClockObjectId, index: u64) -> Result<f64> {
        let rate = self.checked_rate(obj)?;
        let code = obj.code();
        let mut t = 0.0;
        for k in 0..=index {
            t += self.increment(code, k, rate);
        }
        Ok(t)
    }

    fn checked_rate(&self, obj: ClockObjectId) -> Result<f64> {
        let rate = self.rate(obj);
        if rate > 0.0 {
            Ok(rate)
        } else {
            Err(Error::ZeroRateObject(obj))
        }
    }

    /// Advances `cursor` to the first arrival strictly after `after` and
    /// returns its time. Queries on one cursor must be nondecreasing in
    /// `after`.
    #[inline]
    pub fn advance(&self, code: u64, rate: f64, cursor: &mut Cursor, after: f64) -> f64 {
        let mut t = cursor.time;
        let mut k = cursor.index;
        if k > 0 && t > after {
            return t;
        }
        loop {
            t += self.increment(code, k, rate);
            k += 1;
            if t > after {
                break;
            }
        }
        cursor.index = k;
        cursor.time = t;
        t
    }

    /// Smallest arrival of `obj` strictly after `after`, using the cursor
    /// table for sequential access.
    pub fn next_arrival(
        &self,
        cursors: &mut ClockCursors,
        obj: ClockObjectId,
        after: f64,
    ) -> Result<f64> {
        let rate = self.checked_rate(obj)?;
        let entry = cursors.table.entry(obj).or_default();
        if after < entry.1 {
            entry.0 = Cursor::default();
        }
        entry.1 = after;
        Ok(self.advance(obj.code(), rate, &mut entry.0, after))
    }

    pub fn translated_view(&self, space_offset: Site, time_offset: f64) -> ClockFieldView {
        assert!(time_offset >= 0.0, "time offset must be >= 0");
        ClockFieldView {
            field: *self,
            space_offset,
            time_offset,
        }
    }

    pub fn view(&self) -> ClockFieldView {
        self.translated_view(0, 0.0)
    }

    /// Every arrival of the recovery and edge clocks touching `[lo, hi]`
    /// within `[t0, t1]`, sorted by `(time, object)`; boost arrivals in
    /// the same span are returned separately.
    pub fn arrivals_in_box(
        &self,
        lo: Site,
        hi: Site,
        t0: f64,
        t1: f64,
        cap: f64,
    ) -> Result<SpaceTimeRecord> {
        assert!(t0 < t1, "empty time span [{t0}, {t1}]");
        let mut record = SpaceTimeRecord {
            lo,
            hi,
            t0,
            t1,
            events: Vec::new(),
            boosts: Vec::new(),
        };
        if lo > hi {
            return Ok(record);
        }
        let width = (hi - lo + 1) as f64;
        let expected = (t1 - t0)
            * (width * self.recovery_rate
                + (2.0 * width + 2.0) * self.edge_rate
                + 2.0 * self.boost_rate);
        if expected > cap {
            return Err(Error::BoxTooLarge { expected, cap });
        }
        let mut objects = Vec::new();
        for x in lo..=hi {
            objects.push(ClockObjectId::SiteRecovery(x));
        }
        for x in lo - 1..=hi {
            objects.push(ClockObjectId::DirectedEdge(x, Direction::Right));
        }
        for x in lo..=hi + 1 {
            objects.push(ClockObjectId::DirectedEdge(x, Direction::Left));
        }
        for obj in objects {
            self.collect_span(obj, t0, t1, &mut record.events);
        }
        for obj in [ClockObjectId::BoostLeft, ClockObjectId::BoostRight] {
            self.collect_span(obj, t0, t1, &mut record.boosts);
        }
        let by_time = |a: &ClockEvent, b: &ClockEvent| {
            a.time.total_cmp(&b.time).then(a.object.cmp(&b.object))
        };
        record.events.sort_by(by_time);
        record.boosts.sort_by(by_time);
        Ok(record)
    }

    fn collect_span(&self, obj: ClockObjectId, t0: f64, t1: f64, out: &mut Vec<ClockEvent>) {
        let rate = self.rate(obj);
        if rate <= 0.0 {
            return;
        }
        let code = obj.code();
        let mut cur = Cursor::default();
        // `advance` is strict; step back one ulp to include an arrival at t0.
        let from = if t0 > 0.0 { f64::from_bits(t0.to_bits() - 1) } else { t0 };
        let mut t = self.advance(code, rate, &mut cur, from);
        while t <= t1 {
            out.push(ClockEvent { time: t, object: obj });
            t = self.advance(code, rate, &mut cur, t);
        }
    }
}

/// Cursor table used by [`ClockField::next_arrival`].
#[derive(Clone, Debug, Default)]
pub struct ClockCursors {
    table: HashMap<ClockObjectId, (Cursor, f64)>,
}

impl ClockCursors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn consumed(&self, obj: ClockObjectId) -> u64 {
        self.table.get(&obj).map_or(0, |e| e.0.index)
    }
}

/// Read view of a clock field translated in space and time: object `x` at
/// view time `s` is the parent's object `x + space_offset` at time
/// `s + time_offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClockFieldView {
    pub field: ClockField,
    pub space_offset: Site,
    pub time_offset: f64,
}

impl ClockFieldView {
    pub fn parent_object(&self, obj: ClockObjectId) -> ClockObjectId {
        obj.translated(self.space_offset)
    }

    /// Next arrival of the view's object strictly after view time `after`,
    /// expressed in view time.
    pub fn next_arrival(
        &self,
        cursors: &mut ClockCursors,
        obj: ClockObjectId,
        after: f64,
    ) -> Result<f64> {
        let t = self.field.next_arrival(
            cursors,
            self.parent_object(obj),
            after + self.time_offset,
        )?;
        Ok(t - self.time_offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockEvent {
    pub time: f64,
    pub object: ClockObjectId,
}

/// Realized clock arrivals in a space-time box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeRecord {
    pub lo: Site,
    pub hi: Site,
    pub t0: f64,
    pub t1: f64,
    /// Recovery and edge arrivals, sorted by `(time, object)`.
    pub events: Vec<ClockEvent>,
    /// Boost arrivals, sorted by time.
    pub boosts: Vec<ClockEvent>,
}

impl SpaceTimeRecord {
    /// Builds a record from explicit events, sorting them.
    pub fn from_events(
        lo: Site,
        hi: Site,
        t0: f64,
        t1: f64,
        mut events: Vec<ClockEvent>,
        mut boosts: Vec<ClockEvent>,
    ) -> Self {
        let by_time = |a: &ClockEvent, b: &ClockEvent| {
            a.time.total_cmp(&b.time).then(a.object.cmp(&b.object))
        };
        events.sort_by(by_time);
        boosts.sort_by(by_time);
        SpaceTimeRecord {
            lo,
            hi,
            t0,
            t1,
            events,
            boosts,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len() + self.boosts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Little-endian binary encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 16 * self.len());
        out.extend_from_slice(&self.lo.to_le_bytes());
        out.extend_from_slice(&self.hi.to_le_bytes());
        out.extend_from_slice(&self.t0.to_le_bytes());
        out.extend_from_slice(&self.t1.to_le_bytes());
        for list in [&self.events, &self.boosts] {
            out.extend_from_slice(&(list.len() as u64).to_le_bytes());
            for e in list {
                out.extend_from_slice(&e.time.to_le_bytes());
                out.extend_from_slice(&e.object.code().to_le_bytes());
            }
        }
        out
    }
}
