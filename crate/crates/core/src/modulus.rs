//! Moduli of continuity on (M, d_ρ): weights, exact seminorms of locally constant maps, and the
//! analytic bounds for ‖B_k − A_{σ1}‖ and ‖L_k − A_{σ1}‖ in the δ-log topology.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cocycle::{LkParams, LocallyConstantCocycle};
use crate::error::{invalid, Error, Result};
use crate::events::{find_pair, find_word, Budget, Event};
use crate::mat2::{op_norm, Mat2};

/// Default node budget for exact seminorm searches.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// One of the five topologies, ordered from finest to coarsest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusSpec {
    C0,
    Holder { alpha: f64 },
    Weak { alpha: f64, theta: f64 },
    LogLog { gamma: f64, kappa: f64 },
    Log { delta: f64 },
}

impl ModulusSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModulusSpec::C0 => true,
            ModulusSpec::Holder { alpha } => alpha > 0.0,
            ModulusSpec::Weak { alpha, theta } => alpha > 0.0 && theta > 0.0 && theta <= 1.0,
            ModulusSpec::LogLog { gamma, kappa } => gamma >= 1.0 && kappa >= 1.0,
            ModulusSpec::Log { delta } => delta > 0.0 && delta <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("modulus parameters out of range: {self}")))
        }
    }

    /// Weight as a function of t = N·ln(1/ρ).
    pub fn weight_at(&self, t: f64) -> f64 {
        match *self {
            ModulusSpec::C0 => 1.0,
            ModulusSpec::Holder { alpha } => (alpha * t).exp(),
            ModulusSpec::Weak { alpha, theta } => (alpha * t.powf(theta)).exp(),
            ModulusSpec::LogLog { gamma, kappa } => {
                let l = if t > 0.0 { t.ln().max(0.0) } else { 0.0 };
                (kappa * l.powf(gamma)).exp()
            }
            ModulusSpec::Log { delta } => t.powf(delta),
        }
    }
}

impl fmt::Display for ModulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusSpec::C0 => write!(f, "c0"),
            ModulusSpec::Holder { alpha } => write!(f, "holder:{alpha}"),
            ModulusSpec::Weak { alpha, theta } => write!(f, "weak:{alpha},{theta}"),
            ModulusSpec::LogLog { gamma, kappa } => write!(f, "loglog:{gamma},{kappa}"),
            ModulusSpec::Log { delta } => write!(f, "log:{delta}"),
        }
    }
}

impl FromStr for ModulusSpec {
    type Err = Error;

    /// `c0`, `holder:α`, `weak:α,θ`, `loglog:γ,κ`, `log:δ`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| a.trim().parse::<f64>().map_err(|_| invalid(format!("bad number {a:?} in modulus {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let spec = match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("c0", []) => ModulusSpec::C0,
            ("holder", [alpha]) => ModulusSpec::Holder { alpha: *alpha },
            ("weak", [alpha, theta]) => ModulusSpec::Weak { alpha: *alpha, theta: *theta },
            ("loglog", [gamma, kappa]) => ModulusSpec::LogLog { gamma: *gamma, kappa: *kappa },
            ("log", [delta]) => ModulusSpec::Log { delta: *delta },
            _ => return Err(invalid(format!("unknown modulus {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Weight at distance ρ^N.
pub fn weight(spec: &ModulusSpec, n: u64, rho: f64) -> f64 {
    spec.weight_at(n as f64 * -rho.ln())
}

/// True iff the weights of `specs` are nondecreasing in the given order at (N, ρ), up to 1e-12 relative.
///
/// Intended for the chain Log(δ), Log(1), LogLog, Weak, Holder; only meaningful for t ≥ e.
pub fn weight_chain_check(n: u64, rho: f64, specs: &[ModulusSpec]) -> Result<bool> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0,1), got {rho}")));
    }
    let t = n as f64 * -rho.ln();
    if t < E {
        return Err(Error::Unsupported(format!("weight ordering is only checked for t >= e (t = {t})")));
    }
    for s in specs {
        s.validate()?;
    }
    let w: Vec<f64> = specs.iter().map(|s| s.weight_at(t)).collect();
    Ok(w.windows(2).all(|p| p[0] <= p[1] * (1.0 + 1e-12)))
}

/// The chain Log(δ), Log(1), LogLog(γ,κ), Weak(α,θ), Holder(α).
pub fn chain(delta: f64, alpha: f64, theta: f64, gamma: f64, kappa: f64) -> [ModulusSpec; 5] {
    [
        ModulusSpec::Log { delta },
        ModulusSpec::Log { delta: 1.0 },
        ModulusSpec::LogLog { gamma, kappa },
        ModulusSpec::Weak { alpha, theta },
        ModulusSpec::Holder { alpha },
    ]
}

/// One value class of a locally constant map.
#[derive(Clone, Debug, PartialEq)]
pub struct MapClass {
    pub label: String,
    pub event: Event,
    pub value: Mat2,
}

/// A matrix-valued map determined by the window coordinates, given as a partition into classes.
#[derive(Clone, Debug, PartialEq)]
pub struct LocallyConstantMap {
    window: (i64, i64),
    classes: Vec<MapClass>,
}

impl LocallyConstantMap {
    /// The caller guarantees that the class events partition the window words.
    pub fn from_classes(window: (i64, i64), classes: Vec<MapClass>) -> Result<Self> {
        if !(window.0 <= 0 && 0 <= window.1) {
            return Err(invalid("window must contain 0"));
        }
        Ok(Self { window, classes })
    }

    pub fn constant(m: Mat2) -> Self {
        Self { window: (0, 0), classes: vec![MapClass { label: "all".into(), event: Event::everything(), value: m }] }
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    /// R_w = max(|lo|, hi).
    pub fn radius(&self) -> u64 {
        self.window.0.unsigned_abs().max(self.window.1.unsigned_abs())
    }

    pub fn classes(&self) -> &[MapClass] {
        &self.classes
    }

    /// Index of the class containing the window word.
    pub fn class_of_word(&self, word: &[u8]) -> Option<usize> {
        self.classes.iter().position(|c| c.event.matches_word(self.window.0, word))
    }

    /// Every class value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let classes = self.classes.iter().map(|k| MapClass { value: k.value.scale(c), ..k.clone() }).collect();
        Self { window: self.window, classes }
    }
}

/// x ↦ F(x) − G(x), classes from the common refinement, empty cells dropped, equal values merged.
pub fn diff_map(f: &LocallyConstantCocycle, g: &LocallyConstantCocycle) -> Result<LocallyConstantMap> {
    let window = (f.window().0.min(g.window().0), f.window().1.max(g.window().1));
    let mut budget = Budget::new(DEFAULT_BUDGET);
    let mut classes: Vec<MapClass> = Vec::new();
    for (lf, ef, mf) in f.classes() {
        for (lg, eg, mg) in g.classes() {
            let cell = ef.and(&eg);
            if cell.terms().is_empty() || find_word(&cell, window.0, window.1, &mut budget)?.is_none() {
                continue;
            }
            let value = mf - mg;
            let label = format!("F.{lf}&G.{lg}");
            match classes.iter_mut().find(|c| c.value == value) {
                Some(c) => {
                    c.event = c.event.or(&cell);
                    c.label = format!("{}|{}", c.label, label);
                }
                None => classes.push(MapClass { label, event: cell, value }),
            }
        }
    }
    LocallyConstantMap::from_classes(window, classes)
}

/// The pair realizing a seminorm value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormWitness {
    pub value: f64,
    /// N(u, v) of the witness pair; `None` when no pair contributes.
    pub n_star: Option<u64>,
    pub classes: Option<(usize, usize)>,
    pub labels: Option<(String, String)>,
    /// Window words of the witness pair, as '0'/'1' strings over lo..=hi.
    pub words: Option<(String, String)>,
    /// False when the value is only a sampled lower bound.
    pub exact: bool,
}

impl SeminormWitness {
    fn zero(exact: bool) -> Self {
        Self { value: 0.0, n_star: None, classes: None, labels: None, words: None, exact }
    }
}

fn word_string(w: &[u8]) -> String {
    w.iter().map(|&s| if s == 1 { '1' } else { '0' }).collect()
}

fn parse_word(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b - b'0').collect()
}

/// N(u, v) for window words over lo..=hi; `None` if they agree on the whole window.
pub fn window_disagreement(lo: i64, u: &[u8], v: &[u8]) -> Option<u64> {
    let hi = lo + u.len() as i64 - 1;
    let r = lo.unsigned_abs().max(hi.unsigned_abs());
    (0..=r as i64).find(|&n| {
        [n, -n].iter().any(|&j| j >= lo && j <= hi && u[(j - lo) as usize] != v[(j - lo) as usize])
    }).map(|n| n as u64)
}

/// ‖H(u) − H(v)‖·w(N(u,v)) for window words u, v.
pub fn integrand(h: &LocallyConstantMap, spec: &ModulusSpec, rho: f64, u: &[u8], v: &[u8]) -> Result<f64> {
    let cu = h.class_of_word(u).ok_or_else(|| Error::Invariant("word outside every class".into()))?;
    let cv = h.class_of_word(v).ok_or_else(|| Error::Invariant("word outside every class".into()))?;
    let Some(n) = window_disagreement(h.window.0, u, v) else {
        return Ok(0.0);
    };
    let diff = op_norm(&(h.classes[cu].value - h.classes[cv].value));
    Ok(if diff == 0.0 { 0.0 } else { diff * weight(spec, n, rho) })
}

impl SeminormWitness {
    /// Recomputes the integrand at the witness pair.
    pub fn reevaluate(&self, h: &LocallyConstantMap, spec: &ModulusSpec, rho: f64) -> Result<f64> {
        match &self.words {
            None => Ok(0.0),
            Some((u, v)) => integrand(h, spec, rho, &parse_word(u), &parse_word(v)),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0,1), got {rho}")));
    }
    Ok(())
}

/// sup over x ≠ y of ‖H(x) − H(y)‖·w(N(x, y)), computed exactly by a class-pair search.
///
/// For each pair of classes with distinct values, the largest m ≤ R_w such that the classes
/// contain words agreeing on |j| < m is found; weights are nondecreasing in N, so that m gives
/// the pair's contribution.
pub fn seminorm_exact(h: &LocallyConstantMap, spec: &ModulusSpec, rho: f64, budget: u64) -> Result<SeminormWitness> {
    spec.validate()?;
    check_rho(rho)?;
    let (lo, hi) = h.window;
    let r = h.radius();
    let mut budget = Budget::new(budget);
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..h.classes.len() {
        for b in a + 1..h.classes.len() {
            let diff = op_norm(&(h.classes[a].value - h.classes[b].value));
            if diff > 0.0 {
                pairs.push((a, b, diff));
            }
        }
    }
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2));
    let mut best = SeminormWitness::zero(true);
    for (a, b, diff) in pairs {
        if diff * weight(spec, r, rho) <= best.value {
            continue;
        }
        for m in (0..=r).rev() {
            let value = diff * weight(spec, m, rho);
            if value <= best.value {
                break;
            }
            if let Some((u, v)) = find_pair(&h.classes[a].event, &h.classes[b].event, lo, hi, m, &mut budget)? {
                best = SeminormWitness {
                    value,
                    n_star: window_disagreement(lo, &u, &v),
                    classes: Some((a, b)),
                    labels: Some((h.classes[a].label.clone(), h.classes[b].label.clone())),
                    words: Some((word_string(&u), word_string(&v))),
                    exact: true,
                };
                break;
            }
        }
    }
    Ok(best)
}

/// Max of the integrand over randomly generated word pairs; a lower bound for the seminorm.
///
/// Pairs are drawn by choosing two classes, planting a term of each and sharing coordinates
/// |j| < m for a random m.
pub fn seminorm_sampled(
    h: &LocallyConstantMap,
    spec: &ModulusSpec,
    rho: f64,
    trials: u64,
    seed: u64,
) -> Result<SeminormWitness> {
    spec.validate()?;
    check_rho(rho)?;
    let (lo, hi) = h.window;
    let w = (hi - lo + 1) as usize;
    let r = h.radius();
    let pairs: Vec<(usize, usize)> = (0..h.classes.len())
        .flat_map(|a| (0..h.classes.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && h.classes[a].value != h.classes[b].value)
        .collect();
    let mut best = SeminormWitness::zero(false);
    if pairs.is_empty() {
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = |word: &mut Vec<u8>, event: &Event, rng: &mut ChaCha8Rng| {
        let terms = event.terms();
        if terms.is_empty() {
            return;
        }
        let t = &terms[rng.random_range(0..terms.len())];
        for &(i, s) in t.fixed() {
            if i >= lo && i <= hi {
                word[(i - lo) as usize] = s;
            }
        }
    };
    for _ in 0..trials {
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        let m = rng.random_range(0..=r);
        let mut u: Vec<u8> = (0..w).map(|_| rng.random_range(0..2u8)).collect();
        plant(&mut u, &h.classes[a].event, &mut rng);
        let mut v: Vec<u8> = (lo..=hi)
            .map(|j| if j.unsigned_abs() < m { u[(j - lo) as usize] } else { rng.random_range(0..2u8) })
            .collect();
        plant(&mut v, &h.classes[b].event, &mut rng);
        let value = integrand(h, spec, rho, &u, &v)?;
        if value > best.value {
            let (cu, cv) = (h.class_of_word(&u).unwrap(), h.class_of_word(&v).unwrap());
            best = SeminormWitness {
                value,
                n_star: window_disagreement(lo, &u, &v),
                classes: Some((cu, cv)),
                labels: Some((h.classes[cu].label.clone(), h.classes[cv].label.clone())),
                words: Some((word_string(&u), word_string(&v))),
                exact: false,
            };
        }
    }
    Ok(best)
}

/// ‖F − G‖ in a modulus topology: sup term plus seminorm term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormDistance {
    pub spec: ModulusSpec,
    pub sup_term: f64,
    pub seminorm_term: f64,
    pub total: f64,
    pub witness: SeminormWitness,
}

fn sup_term(h: &LocallyConstantMap) -> f64 {
    h.classes.iter().map(|c| op_norm(&c.value)).fold(0.0, f64::max)
}

pub fn norm_distance(
    f: &LocallyConstantCocycle,
    g: &LocallyConstantCocycle,
    spec: &ModulusSpec,
    rho: f64,
) -> Result<NormDistance> {
    norm_distance_with_budget(f, g, spec, rho, DEFAULT_BUDGET)
}

pub fn norm_distance_with_budget(
    f: &LocallyConstantCocycle,
    g: &LocallyConstantCocycle,
    spec: &ModulusSpec,
    rho: f64,
    budget: u64,
) -> Result<NormDistance> {
    let h = diff_map(f, g)?;
    let witness = seminorm_exact(&h, spec, rho, budget)?;
    let sup_term = sup_term(&h);
    Ok(NormDistance { spec: *spec, sup_term, seminorm_term: witness.value, total: sup_term + witness.value, witness })
}

/// As [`norm_distance`], falling back to sampling (flagged inexact) when the search budget runs out.
pub fn norm_distance_or_sampled(
    f: &LocallyConstantCocycle,
    g: &LocallyConstantCocycle,
    spec: &ModulusSpec,
    rho: f64,
    budget: u64,
    trials: u64,
    seed: u64,
) -> Result<NormDistance> {
    let h = diff_map(f, g)?;
    let witness = match seminorm_exact(&h, spec, rho, budget) {
        Err(Error::ClassSearchTimeout { .. }) => seminorm_sampled(&h, spec, rho, trials, seed)?,
        other => other?,
    };
    let sup_term = sup_term(&h);
    Ok(NormDistance { spec: *spec, sup_term, seminorm_term: witness.value, total: sup_term + witness.value, witness })
}

fn check_common(k: usize, sigma: f64, delta: f64, rho: f64) -> Result<()> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if sigma.is_nan() || sigma <= 1.0 {
        return Err(invalid(format!("sigma must exceed 1, got {sigma}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    check_rho(rho)
}

/// (π/(2k))·k^δ·(ln 1/ρ)^δ, the seminorm part of the B_k bound; any δ in (0, 1].
pub fn bk_seminorm_bound(k: usize, delta: f64, rho: f64) -> Result<f64> {
    if k == 0 || !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("need k >= 1 and delta in (0,1]"));
    }
    check_rho(rho)?;
    let kf = k as f64;
    Ok(PI / (2.0 * kf) * kf.powf(delta) * (-rho.ln()).powf(delta))
}

/// σπ/(2k) + (π/(2k))·k^δ·(ln 1/ρ)^δ.
pub fn analytic_bk_bound(k: usize, sigma: f64, delta: f64, rho: f64) -> Result<f64> {
    check_common(k, sigma, delta, rho)?;
    Ok(sigma * PI / (2.0 * k as f64) + bk_seminorm_bound(k, delta, rho)?)
}

/// Per-configuration bounds for the seminorm of L_k − A_{σ1} and the sup-norm bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LkCaseBounds {
    /// (name, bound) for cases 1.1–1.3 and 2.1–2.3.
    pub cases: Vec<(String, f64)>,
    /// σ·max{k^{−β}, γ̃(k), θ_k}.
    pub sup_bound: f64,
    /// Largest case bound.
    pub seminorm_bound: f64,
    /// sup_bound + seminorm_bound.
    pub total: f64,
}

pub fn analytic_lk_cases(k: usize, sigma: f64, beta: f64, delta: f64, rho: f64) -> Result<LkCaseBounds> {
    check_common(k, sigma, delta, rho)?;
    if !(delta < beta && beta < 1.0) {
        return Err(invalid(format!("need delta < beta < 1, got delta={delta}, beta={beta}")));
    }
    let prm = LkParams::new(sigma, k, beta)?;
    let kf = k as f64;
    let l = (-rho.ln()).powf(delta);
    let tan_theta = prm.theta.tan();
    let ratio = ((2.0 * kf + 1.0) / kf.powf(beta / delta)).powf(delta);
    let cases = vec![
        ("case1.1".to_string(), l * ratio),
        ("case1.2".to_string(), kf.powf(delta) * (2.0 * -rho.ln()).powf(delta) / kf.powf(beta)),
        ("case1.3".to_string(), 2.0 * l * kf.powf(delta) / kf.powf(beta)),
        ("case2.1".to_string(), sigma * tan_theta * (kf + 1.0).powf(delta) * l),
        ("case2.2".to_string(), sigma * l * ratio * (2.0 * kf * (prm.u / sigma).ln()).exp()),
        ("case2.3".to_string(), sigma * l * (prm.gamma + tan_theta)),
    ];
    let sup_bound = sigma * prm.s.max(prm.gamma).max(prm.theta);
    let seminorm_bound = cases.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok(LkCaseBounds { cases, sup_bound, seminorm_bound, total: sup_bound + seminorm_bound })
}
