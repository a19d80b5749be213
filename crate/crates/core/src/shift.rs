//! The full shift on {0,1}^Z: Bernoulli points, cylinders, the metric d_ρ and return times.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on forward steps scanned by return-time searches.
pub const DEFAULT_RETURN_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
enum Source {
    Bernoulli { seed: u64, p: f64, threshold: u64 },
    Constant(u8),
}

/// A point of {0,1}^Z whose coordinates are computed on demand.
///
/// Coordinates are a pure function of `(seed, p, index)`: a ChaCha8 stream keyed by the seed and
/// positioned at the index. Shifting only moves an offset. Pinned coordinates override the
/// stream, which is how points are conditioned on cylinders.
#[derive(Clone, Debug, PartialEq)]
pub struct LazyPoint {
    source: Source,
    offset: i64,
    // sorted by raw index
    pins: Arc<[(i64, u8)]>,
}

fn raw_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn seek(rng: &mut ChaCha8Rng, index: i64) {
    let pos = (index as i128 - i64::MIN as i128) as u128;
    rng.set_word_pos(pos * 2);
}

impl LazyPoint {
    /// A μ_p-distributed point.
    pub fn bernoulli(seed: u64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("p must lie in (0,1), got {p}")));
        }
        let threshold = (p * 18446744073709551616.0) as u64;
        Ok(Self {
            source: Source::Bernoulli { seed, p, threshold },
            offset: 0,
            pins: Arc::from(Vec::new()),
        })
    }

    /// The constant sequence with every coordinate equal to `symbol`.
    pub fn constant(symbol: u8) -> Result<Self> {
        if symbol > 1 {
            return Err(invalid(format!("symbol must be 0 or 1, got {symbol}")));
        }
        Ok(Self { source: Source::Constant(symbol), offset: 0, pins: Arc::from(Vec::new()) })
    }

    /// A μ_p-distributed point conditioned on the cylinder `c`.
    pub fn in_cylinder(seed: u64, p: f64, c: &Cylinder) -> Result<Self> {
        Ok(Self::bernoulli(seed, p)?.with_word(c.base, &c.word))
    }

    /// Overrides coordinates `base..base+word.len()` (in this point's indexing).
    pub fn with_word(&self, base: i64, word: &[u8]) -> Self {
        let mut pins: Vec<(i64, u8)> = self.pins.iter().copied().collect();
        for (r, &s) in word.iter().enumerate() {
            let raw = base + r as i64 + self.offset;
            match pins.binary_search_by_key(&raw, |&(i, _)| i) {
                Ok(pos) => pins[pos].1 = s & 1,
                Err(pos) => pins.insert(pos, (raw, s & 1)),
            }
        }
        Self { source: self.source.clone(), offset: self.offset, pins: Arc::from(pins) }
    }

    /// f^n(x): coordinate i of the result is coordinate i+n of `self`.
    pub fn shifted(&self, n: i64) -> Self {
        Self { source: self.source.clone(), offset: self.offset + n, pins: self.pins.clone() }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Bernoulli parameter, or the constant symbol as 0.0/1.0.
    pub fn p(&self) -> f64 {
        match self.source {
            Source::Bernoulli { p, .. } => p,
            Source::Constant(s) => s as f64,
        }
    }

    fn raw_unpinned(&self, raw: i64) -> u8 {
        match self.source {
            Source::Constant(s) => s,
            Source::Bernoulli { seed, p, threshold } => {
                let mut rng = raw_stream(seed);
                if p == 0.5 {
                    seek(&mut rng, raw.div_euclid(64));
                    ((rng.next_u64() >> raw.rem_euclid(64)) & 1) as u8
                } else {
                    seek(&mut rng, raw);
                    (rng.next_u64() < threshold) as u8
                }
            }
        }
    }

    fn raw(&self, raw: i64) -> u8 {
        match self.pins.binary_search_by_key(&raw, |&(i, _)| i) {
            Ok(pos) => self.pins[pos].1,
            Err(_) => self.raw_unpinned(raw),
        }
    }

    /// x_i.
    pub fn coordinate(&self, i: i64) -> u8 {
        self.raw(i + self.offset)
    }

    /// Coordinates lo..=hi.
    pub fn word(&self, lo: i64, hi: i64) -> Vec<u8> {
        if hi < lo {
            return Vec::new();
        }
        let mut orbit = Orbit::new(self);
        (lo..=hi).map(|i| orbit.bit(i)).collect()
    }
}

/// Bit-packed realization of a point's coordinates, extended on demand.
///
/// Bit r of `words[q]` is the raw coordinate `lo_raw + 64q + r`.
pub struct Orbit {
    point: LazyPoint,
    rng: Option<ChaCha8Rng>,
    lo_raw: i64,
    words: Vec<u64>,
}

const CHUNK_WORDS: i64 = 64;

impl Orbit {
    pub fn new(point: &LazyPoint) -> Self {
        let rng = match point.source {
            Source::Bernoulli { seed, .. } => Some(raw_stream(seed)),
            Source::Constant(_) => None,
        };
        Self { point: point.clone(), rng, lo_raw: point.offset.div_euclid(64) * 64, words: Vec::new() }
    }

    pub fn point(&self) -> &LazyPoint {
        &self.point
    }

    fn generate(&mut self, first_word: i64, count: i64) -> Vec<u64> {
        let mut out = Vec::with_capacity(count as usize);
        match self.point.source {
            Source::Constant(s) => out.resize(count as usize, if s == 1 { !0u64 } else { 0 }),
            Source::Bernoulli { p, threshold, .. } => {
                let rng = self.rng.as_mut().expect("bernoulli orbit has a stream");
                if p == 0.5 {
                    seek(rng, first_word);
                    for _ in 0..count {
                        out.push(rng.next_u64());
                    }
                } else {
                    seek(rng, first_word * 64);
                    for _ in 0..count {
                        let mut w = 0u64;
                        for r in 0..64 {
                            w |= ((rng.next_u64() < threshold) as u64) << r;
                        }
                        out.push(w);
                    }
                }
            }
        }
        let lo = first_word * 64;
        let hi = lo + 64 * count;
        let pins = &self.point.pins;
        let start = pins.partition_point(|&(i, _)| i < lo);
        for &(i, s) in pins[start..].iter().take_while(|&&(i, _)| i < hi) {
            let q = ((i - lo) / 64) as usize;
            let r = (i - lo) % 64;
            if s == 1 {
                out[q] |= 1 << r;
            } else {
                out[q] &= !(1 << r);
            }
        }
        out
    }

    /// Makes raw coordinates lo..hi (exclusive) available.
    fn ensure_raw(&mut self, lo: i64, hi: i64) {
        if lo < self.lo_raw {
            let first = lo.div_euclid(64) - CHUNK_WORDS;
            let count = self.lo_raw / 64 - first;
            let mut front = self.generate(first, count);
            front.extend_from_slice(&self.words);
            self.words = front;
            self.lo_raw = first * 64;
        }
        let have = self.lo_raw + 64 * self.words.len() as i64;
        if hi > have {
            let need = (hi - have + 63) / 64;
            let count = need.max(CHUNK_WORDS);
            let more = self.generate(have / 64, count);
            self.words.extend_from_slice(&more);
        }
    }

    /// Drops storage for coordinates before `i`; they are regenerated if needed again.
    pub fn release_before(&mut self, i: i64) {
        let raw = i + self.point.offset;
        let drop = ((raw - self.lo_raw) / 64 - 1).max(0) as usize;
        if drop > 4096 && drop <= self.words.len() {
            self.words.drain(..drop);
            self.lo_raw += 64 * drop as i64;
        }
    }

    /// x_i.
    pub fn bit(&mut self, i: i64) -> u8 {
        let raw = i + self.point.offset;
        self.ensure_raw(raw, raw + 1);
        let idx = raw - self.lo_raw;
        ((self.words[(idx / 64) as usize] >> (idx % 64)) & 1) as u8
    }

    /// Bits r = 0..64 hold x_{i+r}.
    #[inline]
    pub fn window64(&mut self, i: i64) -> u64 {
        let raw = i + self.point.offset;
        self.ensure_raw(raw, raw + 64);
        let idx = raw - self.lo_raw;
        let q = (idx / 64) as usize;
        let sh = idx % 64;
        if sh == 0 {
            self.words[q]
        } else {
            (self.words[q] >> sh) | (self.words[q + 1] << (64 - sh))
        }
    }

    /// Bit r set iff `word` occurs at coordinates start+r .. start+r+len.
    #[inline]
    pub fn occurrences(&mut self, word: &[u8], start: i64) -> u64 {
        let mut acc = !0u64;
        for (r, &s) in word.iter().enumerate() {
            let w = self.window64(start + r as i64);
            acc &= if s == 1 { w } else { !w };
            if acc == 0 {
                break;
            }
        }
        acc
    }

    /// Number of ones among x_a..x_{b-1}.
    pub fn ones(&mut self, a: i64, b: i64) -> u64 {
        let mut total = 0u64;
        let mut i = a;
        while i < b {
            let len = (b - i).min(64);
            let w = self.window64(i);
            let mask = if len == 64 { !0 } else { (1u64 << len) - 1 };
            total += (w & mask).count_ones() as u64;
            i += len;
        }
        total
    }

    /// Smallest m in from..=limit with f^m(x) in `c`.
    pub fn next_visit(&mut self, c: &Cylinder, from: i64, limit: i64) -> Option<i64> {
        let mut t = from;
        while t <= limit {
            let occ = self.occurrences(&c.word, t + c.base);
            if occ != 0 {
                let m = t + occ.trailing_zeros() as i64;
                return (m <= limit).then_some(m);
            }
            t += 64;
        }
        None
    }
}

/// The cylinder [base; word] = {x : x_{base+r} = word_r}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CylinderRepr", into = "CylinderRepr")]
pub struct Cylinder {
    base: i64,
    word: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct CylinderRepr {
    base: i64,
    word: String,
}

impl TryFrom<CylinderRepr> for Cylinder {
    type Error = Error;
    fn try_from(r: CylinderRepr) -> Result<Self> {
        Cylinder::parse(r.base, &r.word)
    }
}

impl From<Cylinder> for CylinderRepr {
    fn from(c: Cylinder) -> Self {
        CylinderRepr { base: c.base, word: c.word_string() }
    }
}

impl Cylinder {
    pub fn new(base: i64, word: Vec<u8>) -> Result<Self> {
        if word.is_empty() {
            return Err(invalid("cylinder word must be nonempty"));
        }
        if let Some(s) = word.iter().find(|&&s| s > 1) {
            return Err(invalid(format!("cylinder symbols must be 0 or 1, got {s}")));
        }
        Ok(Self { base, word })
    }

    /// Parses a word written as a string of '0'/'1'.
    pub fn parse(base: i64, word: &str) -> Result<Self> {
        let symbols = word
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(invalid(format!("invalid symbol {other:?} in cylinder word"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(base, symbols)
    }

    /// The whole space, written as a cylinder with an empty word. Only return-time statistics
    /// accept it.
    pub fn whole_space() -> Self {
        Self { base: 0, word: Vec::new() }
    }

    pub fn base(&self) -> i64 {
        self.base
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn word_string(&self) -> String {
        self.word.iter().map(|&s| if s == 1 { '1' } else { '0' }).collect()
    }

    /// Constrained positions base..=last; `None` for the whole space.
    pub fn span(&self) -> Option<(i64, i64)> {
        (!self.word.is_empty()).then(|| (self.base, self.base + self.word.len() as i64 - 1))
    }

    /// Required symbol at position `i`, if constrained.
    pub fn symbol_at(&self, i: i64) -> Option<u8> {
        let r = i - self.base;
        (r >= 0 && (r as usize) < self.word.len()).then(|| self.word[r as usize])
    }

    /// f^i(c) = [base − i; word].
    pub fn image(&self, i: i64) -> Self {
        Self { base: self.base - i, word: self.word.clone() }
    }

    pub fn contains(&self, x: &LazyPoint) -> bool {
        self.word.iter().enumerate().all(|(r, &s)| x.coordinate(self.base + r as i64) == s)
    }

    /// Membership of the point whose coordinates lo..lo+len are `word`; positions outside that
    /// range count as a mismatch.
    pub fn contains_word(&self, lo: i64, word: &[u8]) -> bool {
        self.word.iter().enumerate().all(|(r, &s)| {
            let idx = self.base + r as i64 - lo;
            idx >= 0 && (idx as usize) < word.len() && word[idx as usize] == s
        })
    }

    /// True iff the two cylinders have a common point.
    pub fn intersects(&self, other: &Cylinder) -> bool {
        self.word.iter().enumerate().all(|(r, &s)| {
            other.symbol_at(self.base + r as i64).is_none_or(|t| t == s)
        })
    }

    /// True iff every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Cylinder) -> bool {
        other
            .word
            .iter()
            .enumerate()
            .all(|(r, &s)| self.symbol_at(other.base + r as i64) == Some(s))
    }

    /// μ_p(c).
    pub fn measure(&self, p: f64) -> f64 {
        cylinder_measure(self, p)
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{};{}]", self.base, self.word_string())
    }
}

/// The metric parameter ρ of d_ρ(x, y) = ρ^{N(x,y)}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    rho: f64,
}

impl MetricParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(invalid(format!("rho must lie in (0,1), got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// ln(1/ρ).
    pub fn log_inv(&self) -> f64 {
        -self.rho.ln()
    }
}

/// N(x, y) when found within the search radius, or a lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstDisagreement {
    At(u64),
    /// x and y agree on every |i| ≤ radius.
    AtLeast(u64),
}

pub fn first_disagreement(x: &LazyPoint, y: &LazyPoint, radius: u64) -> FirstDisagreement {
    let mut ox = Orbit::new(x);
    let mut oy = Orbit::new(y);
    for n in 0..=radius as i64 {
        if ox.bit(n) != oy.bit(n) || ox.bit(-n) != oy.bit(-n) {
            return FirstDisagreement::At(n as u64);
        }
    }
    FirstDisagreement::AtLeast(radius)
}

/// ρ^N.
pub fn rho_distance(n: u64, m: &MetricParams) -> f64 {
    if n <= i32::MAX as u64 {
        m.rho.powi(n as i32)
    } else {
        (n as f64 * m.rho.ln()).exp()
    }
}

/// Product over the word of p (symbol 1) or 1 − p (symbol 0).
pub fn cylinder_measure(c: &Cylinder, p: f64) -> f64 {
    let ones = c.word.iter().filter(|&&s| s == 1).count() as i32;
    let zeros = c.word.len() as i32 - ones;
    p.powi(ones) * (1.0 - p).powi(zeros)
}

/// Z_k = [0; 0^k 1].
pub fn make_zk(k: usize) -> Result<Cylinder> {
    if k == 0 {
        return Err(invalid("Z_k needs k >= 1"));
    }
    let mut word = vec![0u8; k];
    word.push(1);
    Cylinder::new(0, word)
}

/// W_k = [0; 0^{k+1} 1^k].
pub fn make_wk(k: usize) -> Result<Cylinder> {
    if k == 0 {
        return Err(invalid("W_k needs k >= 1"));
    }
    let mut word = vec![0u8; k + 1];
    word.extend(std::iter::repeat_n(1u8, k));
    Cylinder::new(0, word)
}

/// True iff f^i(c) and f^j(c) are disjoint for all 0 ≤ i < j ≤ max_shift.
pub fn shifted_disjointness(c: &Cylinder, max_shift: u64) -> bool {
    (1..=max_shift as i64).all(|d| !c.intersects(&c.image(d)))
}

/// S_m(x) = x_0 + … + x_{m−1}.
pub fn symbol_count(x: &LazyPoint, m: u64) -> u64 {
    Orbit::new(x).ones(0, m as i64)
}

/// One excursion between consecutive visits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Return {
    /// Cumulative return time τ^{(j)}.
    pub tau: u64,
    /// Ones among x_{τ^{(j−1)}} .. x_{τ^{(j)}−1}.
    pub ones: u64,
}

/// The first `count` returns of x to `c`, searched up to time `cap`.
pub fn return_times(x: &LazyPoint, c: &Cylinder, count: usize, cap: u64) -> Result<Vec<Return>> {
    let mut orbit = Orbit::new(x);
    if !c.word.is_empty() && orbit.occurrences(&c.word, c.base) & 1 == 0 {
        return Err(invalid(format!("point is not in {c}")));
    }
    let mut out = Vec::with_capacity(count);
    let mut prev = 0i64;
    while out.len() < count {
        let Some(t) = orbit.next_visit(c, prev + 1, cap as i64) else {
            return Err(Error::CapExceeded { cylinder: c.to_string(), wanted: count, found: out.len(), cap });
        };
        out.push(Return { tau: t as u64, ones: orbit.ones(prev, t) });
        orbit.release_before(t + c.base.min(0));
        prev = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_pure() {
        let x = LazyPoint::bernoulli(11, 0.3).unwrap();
        let a: Vec<u8> = (-70..70).map(|i| x.coordinate(i)).collect();
        let b: Vec<u8> = (-70..70).rev().map(|i| x.coordinate(i)).collect::<Vec<_>>().into_iter().rev().collect();
        assert_eq!(a, b);
        assert_eq!(x.word(-70, 69), a);
        let mut o = Orbit::new(&x);
        let c: Vec<u8> = (-70..70).map(|i| o.bit(i)).collect();
        assert_eq!(a, c);
    }

    #[test]
    fn shift_is_offset() {
        let x = LazyPoint::bernoulli(5, 0.5).unwrap();
        let y = x.shifted(17);
        for i in -40..40 {
            assert_eq!(y.coordinate(i), x.coordinate(i + 17));
        }
        assert_eq!(y.shifted(-17), x);
    }

    #[test]
    fn pinned_words_override() {
        let z = make_zk(3).unwrap();
        for seed in 0..20 {
            assert!(z.contains(&LazyPoint::in_cylinder(seed, 0.5, &z).unwrap()));
        }
        let x = LazyPoint::constant(0).unwrap().with_word(2, &[1, 1]);
        assert_eq!(x.word(0, 4), vec![0, 0, 1, 1, 0]);
        assert_eq!(x.shifted(2).coordinate(0), 1);
    }

    #[test]
    fn first_disagreement_cases() {
        let zero = LazyPoint::constant(0).unwrap();
        assert_eq!(first_disagreement(&zero, &zero.with_word(0, &[1]), 5), FirstDisagreement::At(0));
        assert_eq!(first_disagreement(&zero, &zero.with_word(3, &[1]), 5), FirstDisagreement::At(3));
        assert_eq!(first_disagreement(&zero, &zero.with_word(-3, &[1]), 5), FirstDisagreement::At(3));
        assert_eq!(first_disagreement(&zero, &zero, 5), FirstDisagreement::AtLeast(5));
    }

    #[test]
    fn rho_distance_values() {
        let half = MetricParams::new(0.5).unwrap();
        assert_eq!(rho_distance(0, &half), 1.0);
        assert_eq!(rho_distance(3, &half), 0.125);
        let m = MetricParams::new(0.9).unwrap();
        assert!((rho_distance(10, &m) - 0.3486784401).abs() < 1e-12);
        assert!(MetricParams::new(1.0).is_err());
        assert!(MetricParams::new(0.0).is_err());
    }

    #[test]
    fn cylinders_and_measures() {
        assert_eq!(make_zk(2).unwrap(), Cylinder::parse(0, "001").unwrap());
        assert_eq!(make_wk(2).unwrap(), Cylinder::parse(0, "00011").unwrap());
        assert_eq!(make_zk(1).unwrap().word(), &[0, 1]);
        assert!(make_zk(0).is_err() && make_wk(0).is_err());
        assert_eq!(make_zk(2).unwrap().measure(0.5), 0.125);
        assert_eq!(make_wk(2).unwrap().measure(0.5), 1.0 / 32.0);
        assert_eq!(Cylinder::parse(3, "111").unwrap().measure(1.0), 1.0);
        assert!(Cylinder::parse(0, "").is_err());
        assert!(Cylinder::parse(0, "012").is_err());
    }

    #[test]
    fn disjointness_examples() {
        assert!(shifted_disjointness(&make_zk(3).unwrap(), 2));
        assert!(shifted_disjointness(&make_wk(2).unwrap(), 4));
        assert!(!shifted_disjointness(&Cylinder::parse(0, "00").unwrap(), 1));
    }

    #[test]
    fn symbol_counts() {
        let x = LazyPoint::constant(0).unwrap().with_word(0, &[0, 0, 1, 0]);
        assert_eq!(symbol_count(&x, 3), 1);
        assert_eq!(symbol_count(&x, 0), 0);
        let y = LazyPoint::bernoulli(3, 0.5).unwrap();
        let s = symbol_count(&y, 10_000) as f64;
        assert!((s - 5000.0).abs() <= 3.0 * 50.0);
    }

    #[test]
    fn first_return_on_explicit_word() {
        let z2 = make_zk(2).unwrap();
        let x = LazyPoint::constant(1).unwrap().with_word(0, &[0, 0, 1, 0, 0, 1]);
        let r = return_times(&x, &z2, 1, 100).unwrap();
        assert_eq!(r[0], Return { tau: 3, ones: 1 });
    }

    #[test]
    fn return_cap_is_reported() {
        let z2 = make_zk(2).unwrap();
        let x = LazyPoint::constant(1).unwrap().with_word(0, &[0, 0, 1]);
        match return_times(&x, &z2, 1, 1000) {
            Err(Error::CapExceeded { found: 0, .. }) => {}
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn whole_space_returns_every_step() {
        let x = LazyPoint::bernoulli(1, 0.5).unwrap();
        let r = return_times(&x, &Cylinder::whole_space(), 50, 1000).unwrap();
        assert!(r.iter().enumerate().all(|(j, ret)| ret.tau == j as u64 + 1));
    }

    #[test]
    fn biased_coordinates_have_the_right_frequency() {
        let x = LazyPoint::bernoulli(9, 0.2).unwrap();
        let s = symbol_count(&x, 20_000) as f64;
        let sd = (20_000.0f64 * 0.2 * 0.8).sqrt();
        assert!((s - 4000.0).abs() <= 4.0 * sd);
    }
}
