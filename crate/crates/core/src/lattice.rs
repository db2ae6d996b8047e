//! Configurations on a finite window of ℤ and the elementary observables:
//! edges, cardinality, and the shift that pins the right edge at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Site = i64;

/// Numerical estimate of the critical infection rate of the standard
/// one-dimensional contact process. A config input, never ground truth.
pub const LAMBDA_C_ESTIMATE: f64 = 1.6489;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    RightEdgeModified,
    BoundaryModified,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::Standard,
        Variant::RightEdgeModified,
        Variant::BoundaryModified,
    ];

    pub fn boosts_right(self) -> bool {
        matches!(self, Variant::RightEdgeModified | Variant::BoundaryModified)
    }

    pub fn boosts_left(self) -> bool {
        matches!(self, Variant::BoundaryModified)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "right_edge_modified" | "right-edge-modified" | "right" => {
                Ok(Variant::RightEdgeModified)
            }
            "boundary_modified" | "boundary-modified" | "boundary" => {
                Ok(Variant::BoundaryModified)
            }
            other => Err(Error::ConfigInvalid {
                field: "variant".into(),
                message: format!(
                    "unknown variant `{other}` (standard | right_edge_modified | boundary_modified)"
                ),
            }),
        }
    }
}

/// Model parameters. Recovery happens at rate exactly 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda_i: f64,
    pub lambda_e: f64,
    pub recovery_rate: f64,
    pub variant: Variant,
}

impl Params {
    pub fn new(lambda_i: f64, lambda_e: f64, variant: Variant) -> Result<Self> {
        let p = Params {
            lambda_i,
            lambda_e,
            recovery_rate: 1.0,
            variant,
        };
        p.validate()?;
        Ok(p)
    }

    /// Standard contact process at rate `lambda` on every edge.
    pub fn standard(lambda: f64) -> Result<Self> {
        Self::new(lambda, lambda, Variant::Standard)
    }

    /// `(lambda_i, lambda_i + epsilon)` in the requested variant.
    pub fn boosted(lambda_i: f64, epsilon: f64, variant: Variant) -> Result<Self> {
        Self::new(lambda_i, lambda_i + epsilon, variant)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.lambda_i.is_finite() && self.lambda_i >= 0.0) {
            return bad(format!("lambda_i must be finite and >= 0, got {}", self.lambda_i));
        }
        if !(self.lambda_e.is_finite() && self.lambda_e >= 0.0) {
            return bad(format!("lambda_e must be finite and >= 0, got {}", self.lambda_e));
        }
        if self.recovery_rate != 1.0 {
            return bad(format!("recovery_rate must be 1.0, got {}", self.recovery_rate));
        }
        if self.variant != Variant::Standard && self.lambda_e < self.lambda_i {
            return bad(format!(
                "boosted variants need lambda_e >= lambda_i, got ({}, {})",
                self.lambda_i, self.lambda_e
            ));
        }
        Ok(())
    }

    /// Rate of each boost clock, `lambda_e - lambda_i`; zero for the standard process.
    pub fn boost_rate(&self) -> f64 {
        match self.variant {
            Variant::Standard => 0.0,
            _ => self.lambda_e - self.lambda_i,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftBoundary {
    Finite,
    /// Sites `[lo, lo + guard)` are frozen infected and stand in for the
    /// infinitely many infections to the left.
    TruncatedHalfLine { guard: usize },
}

/// Position of the left edge, which is `-inf` for half-line configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftEdge {
    Site(Site),
    NegInfinity,
}

impl LeftEdge {
    pub fn finite(self) -> Option<Site> {
        match self {
            LeftEdge::Site(x) => Some(x),
            LeftEdge::NegInfinity => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cardinality {
    Finite(usize),
    Infinite,
}

impl Cardinality {
    pub fn finite(self) -> Option<usize> {
        match self {
            Cardinality::Finite(n) => Some(n),
            Cardinality::Infinite => None,
        }
    }
}

/// Infected set on the window `[lo, hi]`, stored as a bitset with cached
/// extreme sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    lo: Site,
    hi: Site,
    words: Vec<u64>,
    left_boundary: LeftBoundary,
    left: Option<Site>,
    right: Option<Site>,
    count: usize,
}

impl Configuration {
    pub fn empty(lo: Site, hi: Site) -> Self {
        assert!(lo <= hi, "empty window [{lo}, {hi}]");
        let len = (hi - lo + 1) as usize;
        Configuration {
            lo,
            hi,
            words: vec![0; len.div_ceil(64)],
            left_boundary: LeftBoundary::Finite,
            left: None,
            right: None,
            count: 0,
        }
    }

    pub fn from_sites(lo: Site, hi: Site, sites: &[Site]) -> Result<Self> {
        let mut cfg = Self::empty(lo, hi);
        for &x in sites {
            if !cfg.contains_site(x) {
                return Err(Error::InvalidInitialCondition(format!(
                    "site {x} outside window [{lo}, {hi}]"
                )));
            }
            cfg.infect(x);
        }
        Ok(cfg)
    }

    /// Every site of `[lo, top]` infected, with `[lo, lo + guard)` frozen.
    pub fn half_line(lo: Site, hi: Site, guard: usize, top: Site) -> Self {
        assert!(guard >= 1, "half-line needs a guard of at least one site");
        assert!(lo + guard as Site - 1 <= top && top <= hi);
        let mut cfg = Self::empty(lo, hi);
        for x in lo..=top {
            cfg.infect(x);
        }
        cfg.left_boundary = LeftBoundary::TruncatedHalfLine { guard };
        cfg
    }

    pub fn lo(&self) -> Site {
        self.lo
    }

    pub fn hi(&self) -> Site {
        self.hi
    }

    pub fn left_boundary(&self) -> LeftBoundary {
        self.left_boundary
    }

    pub fn guard_width(&self) -> usize {
        match self.left_boundary {
            LeftBoundary::Finite => 0,
            LeftBoundary::TruncatedHalfLine { guard } => guard,
        }
    }

    /// Extends a half-line's frozen guard through `top`, infecting every
    /// site up to it. No effect on finite windows or if `top` is already
    /// frozen.
    pub fn freeze_through(&mut self, top: Site) {
        let LeftBoundary::TruncatedHalfLine { guard } = self.left_boundary else {
            return;
        };
        let old_top = self.lo + guard as Site - 1;
        if top <= old_top {
            return;
        }
        let top = top.min(self.hi);
        for x in old_top + 1..=top {
            self.infect(x);
        }
        self.left_boundary = LeftBoundary::TruncatedHalfLine {
            guard: (top - self.lo + 1) as usize,
        };
    }

    /// True for sites of a half-line's frozen guard.
    #[inline]
    pub fn is_frozen(&self, x: Site) -> bool {
        x < self.lo + self.guard_width() as Site
    }

    #[inline]
    pub fn contains_site(&self, x: Site) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn is_infected(&self, x: Site) -> bool {
        if !self.contains_site(x) {
            return false;
        }
        let i = (x - self.lo) as usize;
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of infected sites in the window, guard included.
    pub fn infected_count(&self) -> usize {
        self.count
    }

    /// Marks `x` infected; returns false if it already was.
    pub fn infect(&mut self, x: Site) -> bool {
        assert!(self.contains_site(x), "site {x} outside [{}, {}]", self.lo, self.hi);
        let i = (x - self.lo) as usize;
        let w = &mut self.words[i >> 6];
        let bit = 1u64 << (i & 63);
        if *w & bit != 0 {
            return false;
        }
        *w |= bit;
        self.count += 1;
        self.left = Some(self.left.map_or(x, |l| l.min(x)));
        self.right = Some(self.right.map_or(x, |r| r.max(x)));
        true
    }

    /// Marks `x` susceptible; returns false if it already was.
    pub fn recover(&mut self, x: Site) -> bool {
        if !self.is_infected(x) {
            return false;
        }
        let i = (x - self.lo) as usize;
        self.words[i >> 6] &= !(1u64 << (i & 63));
        self.count -= 1;
        if self.count == 0 {
            self.left = None;
            self.right = None;
        } else {
            if self.right == Some(x) {
                self.right = self.prev_infected(x);
            }
            if self.left == Some(x) {
                self.left = self.next_infected(x);
            }
        }
        true
    }

    /// Largest infected site strictly below `x`.
    pub fn prev_infected(&self, x: Site) -> Option<Site> {
        if x <= self.lo {
            return None;
        }
        let i = (x.min(self.hi + 1) - self.lo - 1) as usize;
        let mut wi = i >> 6;
        let mut w = self.words[wi] & (u64::MAX >> (63 - (i & 63)));
        loop {
            if w != 0 {
                let b = 63 - w.leading_zeros() as usize;
                return Some(self.lo + (wi * 64 + b) as Site);
            }
            if wi == 0 {
                return None;
            }
            wi -= 1;
            w = self.words[wi];
        }
    }

    /// Smallest infected site strictly above `x`.
    pub fn next_infected(&self, x: Site) -> Option<Site> {
        if x >= self.hi {
            return None;
        }
        let i = (x.max(self.lo - 1) - self.lo + 1) as usize;
        let mut wi = i >> 6;
        let mut w = self.words[wi] & (u64::MAX << (i & 63));
        loop {
            if w != 0 {
                let b = w.trailing_zeros() as usize;
                return Some(self.lo + (wi * 64 + b) as Site);
            }
            wi += 1;
            if wi == self.words.len() {
                return None;
            }
            w = self.words[wi];
        }
    }

    /// Infected sites in ascending order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let base = self.lo + (wi * 64) as Site;
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(base + b as Site)
            })
        })
    }

    pub fn right_edge(&self) -> Option<Site> {
        self.right
    }

    pub fn left_edge(&self) -> Option<LeftEdge> {
        let l = self.left?;
        if self.guard_width() > 0 && self.is_frozen(l) {
            Some(LeftEdge::NegInfinity)
        } else {
            Some(LeftEdge::Site(l))
        }
    }

    /// Leftmost infected site of the window, ignoring the `-inf` convention.
    pub fn leftmost_stored(&self) -> Option<Site> {
        self.left
    }

    pub fn cardinality(&self) -> Cardinality {
        if self.guard_width() > 0 && self.count > 0 && self.is_frozen(self.left.unwrap_or(self.hi)) {
            Cardinality::Infinite
        } else {
            Cardinality::Finite(self.count)
        }
    }

    /// Translates the configuration so the right edge sits at 0; `None` for
    /// the empty configuration.
    pub fn shift_to_right_edge(&self) -> Option<Configuration> {
        let r = self.right?;
        Some(self.translated(-r))
    }

    pub fn translated(&self, by: Site) -> Configuration {
        Configuration {
            lo: self.lo + by,
            hi: self.hi + by,
            words: self.words.clone(),
            left_boundary: self.left_boundary,
            left: self.left.map(|x| x + by),
            right: self.right.map(|x| x + by),
            count: self.count,
        }
    }

    /// Copy restricted to `[lo, hi]` with a finite left boundary.
    pub fn restricted(&self, lo: Site, hi: Site) -> Configuration {
        let mut out = Configuration::empty(lo, hi);
        for x in self.sites().filter(|&x| lo <= x && x <= hi) {
            out.infect(x);
        }
        out
    }

    /// Recomputes extremes and count by a full scan and compares them with
    /// the cached values.
    pub fn cache_consistent(&self) -> bool {
        let mut count = 0;
        let mut left = None;
        let mut right = None;
        for x in self.sites() {
            count += 1;
            left.get_or_insert(x);
            right = Some(x);
        }
        count == self.count && left == self.left && right == self.right
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            lo: self.lo,
            hi: self.hi,
            infected: self.sites().collect(),
            left_boundary: match self.left_boundary {
                LeftBoundary::Finite => SnapshotBoundary::Finite,
                LeftBoundary::TruncatedHalfLine { .. } => SnapshotBoundary::HalfLine,
            },
        }
    }

    pub fn from_snapshot(s: &ConfigSnapshot, guard: usize) -> Result<Self> {
        let mut cfg = Self::from_sites(s.lo, s.hi, &s.infected)?;
        if s.left_boundary == SnapshotBoundary::HalfLine {
            let guard = guard.max(1);
            if (0..guard as Site).any(|d| !cfg.is_infected(s.lo + d)) {
                return Err(Error::InvalidInitialCondition(
                    "half-line snapshot must have its guard infected".into(),
                ));
            }
            cfg.left_boundary = LeftBoundary::TruncatedHalfLine { guard };
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotBoundary {
    Finite,
    HalfLine,
}

/// JSON form of a configuration: `{"lo", "hi", "infected", "left_boundary"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub lo: Site,
    pub hi: Site,
    pub infected: Vec<Site>,
    pub left_boundary: SnapshotBoundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    SingleOrigin,
    FiniteSet { sites: Vec<Site> },
    /// `(-inf, 0]`, truncated `depth` sites behind the origin.
    HalfLine { depth: u64 },
    /// Half-line run for `burn_in`, then seen from its right edge.
    StationaryApprox { burn_in: f64 },
}

impl InitialCondition {
    pub fn interval(a: Site, b: Site) -> Self {
        InitialCondition::FiniteSet {
            sites: (a..=b).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInitialCondition(m.into()));
        match self {
            InitialCondition::SingleOrigin => Ok(()),
            InitialCondition::FiniteSet { sites } => {
                if sites.is_empty() {
                    return bad("finite set must be nonempty");
                }
                let mut s = sites.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != sites.len() {
                    return bad("finite set must be duplicate-free");
                }
                Ok(())
            }
            InitialCondition::HalfLine { depth } => {
                if *depth == 0 {
                    return bad("half-line depth must be > 0");
                }
                Ok(())
            }
            InitialCondition::StationaryApprox { burn_in } => {
                if !(burn_in.is_finite() && *burn_in > 0.0) {
                    return bad("burn-in must be > 0");
                }
                Ok(())
            }
        }
    }

    /// Initial infected sites for finite conditions.
    pub fn finite_sites(&self) -> Option<Vec<Site>> {
        match self {
            InitialCondition::SingleOrigin => Some(vec![0]),
            InitialCondition::FiniteSet { sites } => {
                let mut s = sites.clone();
                s.sort_unstable();
                Some(s)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sites: &[Site]) -> Configuration {
        Configuration::from_sites(-100, 100, sites).unwrap()
    }

    #[test]
    fn edges_of_small_sets() {
        assert_eq!(cfg(&[0]).right_edge(), Some(0));
        assert_eq!(cfg(&[]).right_edge(), None);
        assert_eq!(cfg(&[-5, -2, 3]).right_edge(), Some(3));
        assert_eq!(cfg(&[-5, -2, 3]).left_edge(), Some(LeftEdge::Site(-5)));
        assert_eq!(cfg(&[]).left_edge(), None);
    }

    #[test]
    fn half_line_sentinels() {
        let c = Configuration::half_line(-50, 50, 8, 0);
        assert_eq!(c.left_edge(), Some(LeftEdge::NegInfinity));
        assert_eq!(c.cardinality(), Cardinality::Infinite);
        assert_eq!(c.right_edge(), Some(0));
    }

    #[test]
    fn cardinality_counts() {
        assert_eq!(cfg(&[-5, -2, 3]).cardinality(), Cardinality::Finite(3));
        assert_eq!(cfg(&[]).cardinality(), Cardinality::Finite(0));
    }

    #[test]
    fn shift_examples() {
        let a = cfg(&[-2, 0]).shift_to_right_edge().unwrap();
        assert_eq!(a.sites().collect::<Vec<_>>(), vec![-2, 0]);
        let b = cfg(&[1, 4]).shift_to_right_edge().unwrap();
        assert_eq!(b.sites().collect::<Vec<_>>(), vec![-3, 0]);
        assert!(cfg(&[]).shift_to_right_edge().is_none());
    }

    #[test]
    fn recovery_updates_cached_edges() {
        let mut c = cfg(&[-70, -3, 0, 64, 65]);
        c.recover(65);
        assert_eq!(c.right_edge(), Some(64));
        c.recover(64);
        assert_eq!(c.right_edge(), Some(0));
        c.recover(-70);
        assert_eq!(c.left_edge(), Some(LeftEdge::Site(-3)));
        c.recover(-3);
        c.recover(0);
        assert!(c.is_empty());
        assert_eq!(c.right_edge(), None);
        assert!(c.cache_consistent());
    }

    #[test]
    fn snapshot_json_shape() {
        let s = cfg(&[3, -1]).snapshot();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(
            j,
            r#"{"lo":-100,"hi":100,"infected":[-1,3],"left_boundary":"finite"}"#
        );
        let back: ConfigSnapshot = serde_json::from_str(&j).unwrap();
        assert_eq!(Configuration::from_snapshot(&back, 8).unwrap(), cfg(&[-1, 3]));
    }

    #[test]
    fn initial_condition_validation() {
        assert!(InitialCondition::FiniteSet { sites: vec![] }.validate().is_err());
        assert!(InitialCondition::FiniteSet { sites: vec![1, 1] }.validate().is_err());
        assert!(InitialCondition::HalfLine { depth: 0 }.validate().is_err());
        assert!(InitialCondition::StationaryApprox { burn_in: 0.0 }.validate().is_err());
        assert!(InitialCondition::interval(0, 3).validate().is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(-1.0, 1.0, Variant::Standard).is_err());
        assert!(Params::new(2.0, 1.0, Variant::BoundaryModified).is_err());
        let p = Params::boosted(1.5, 0.5, Variant::RightEdgeModified).unwrap();
        assert_eq!(p.boost_rate(), 0.5);
        assert_eq!(Params::standard(1.5).unwrap().boost_rate(), 0.0);
    }
}
