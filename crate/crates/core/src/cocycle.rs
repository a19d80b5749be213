//! Locally constant SL(2,R) cocycles over the shift and the model families A_{ση}, A_{σ1}, B_k, L_k.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::events::{find_word, Budget, Event};
use crate::mat2::{diagonal, op_norm, rotation, shear_lower, Mat2, ScaledProduct};
use crate::scan::{Compiled, OrbitScanner};
use crate::shift::{make_wk, make_zk, Cylinder, LazyPoint};

/// Search budget used for structural checks at construction.
const CHECK_BUDGET: u64 = 1_000_000;

/// A nonempty list of cylinders, read as their union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cylinder>", into = "Vec<Cylinder>")]
pub struct CylinderUnion(Vec<Cylinder>);

impl TryFrom<Vec<Cylinder>> for CylinderUnion {
    type Error = Error;
    fn try_from(v: Vec<Cylinder>) -> Result<Self> {
        CylinderUnion::new(v)
    }
}

impl From<CylinderUnion> for Vec<Cylinder> {
    fn from(u: CylinderUnion) -> Self {
        u.0
    }
}

impl CylinderUnion {
    pub fn new(cylinders: Vec<Cylinder>) -> Result<Self> {
        if cylinders.is_empty() {
            return Err(invalid("cylinder union must be nonempty"));
        }
        if cylinders.iter().any(Cylinder::is_empty) {
            return Err(invalid("branch cylinders must have nonempty words"));
        }
        Ok(Self(cylinders))
    }

    pub fn single(c: Cylinder) -> Self {
        Self(vec![c])
    }

    pub fn cylinders(&self) -> &[Cylinder] {
        &self.0
    }
}

/// A matrix applied on (union of cylinders) minus (excluded cylinders).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    cylinders: CylinderUnion,
    #[serde(default)]
    exclude: Vec<Cylinder>,
    matrix: Mat2,
}

impl Branch {
    pub fn new(cylinders: CylinderUnion, exclude: Vec<Cylinder>, matrix: Mat2) -> Self {
        Self { cylinders, exclude, matrix }
    }

    pub fn cylinders(&self) -> &[Cylinder] {
        self.cylinders.cylinders()
    }

    pub fn exclude(&self) -> &[Cylinder] {
        &self.exclude
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn event(&self) -> Event {
        Event::union_minus(self.cylinders(), &self.exclude)
    }

    fn matches(&self, x: &LazyPoint) -> bool {
        self.cylinders().iter().any(|c| c.contains(x)) && !self.exclude.iter().any(|c| c.contains(x))
    }

    fn matches_word(&self, lo: i64, word: &[u8]) -> bool {
        self.cylinders().iter().any(|c| c.contains_word(lo, word))
            && !self.exclude.iter().any(|c| c.contains_word(lo, word))
    }
}

#[derive(Serialize, Deserialize)]
struct CocycleRepr {
    #[serde(default)]
    name: String,
    window: [i64; 2],
    branches: Vec<Branch>,
    default: Mat2,
}

/// Which iterates of Z_k carry the rotation in B_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationRange {
    /// f^i(Z_k) for i = 0..k−1: k rotation factors, B_k^k = R_{π/2} on Z_k.
    Full,
    /// f^i(Z_k) for i = 1..k−1 only.
    Printed,
}

/// A cocycle depending only on the coordinates in its window.
#[derive(Clone, Debug)]
pub struct LocallyConstantCocycle {
    name: String,
    window: (i64, i64),
    branches: Vec<Branch>,
    default: Mat2,
    compiled: Box<Compiled>,
}

impl PartialEq for LocallyConstantCocycle {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.branches == other.branches && self.default == other.default
    }
}

impl Serialize for LocallyConstantCocycle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CocycleRepr {
            name: self.name.clone(),
            window: [self.window.0, self.window.1],
            branches: self.branches.clone(),
            default: self.default,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocallyConstantCocycle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CocycleRepr::deserialize(d)?;
        LocallyConstantCocycle::new(r.name, (r.window[0], r.window[1]), r.branches, r.default)
            .map_err(serde::de::Error::custom)
    }
}

fn check_sl2(m: &Mat2, what: &str) -> Result<()> {
    if !m.is_finite() || !m.is_sl2(1e-9) {
        return Err(invalid(format!("{what} {m:?} is not in SL(2,R) (det {})", m.det())));
    }
    Ok(())
}

impl LocallyConstantCocycle {
    /// Validates window containment, SL(2) matrices and pairwise branch disjointness.
    pub fn new(name: impl Into<String>, window: (i64, i64), branches: Vec<Branch>, default: Mat2) -> Result<Self> {
        let (lo, hi) = window;
        if !(lo <= 0 && 0 <= hi) {
            return Err(invalid(format!("window [{lo}, {hi}] must contain 0")));
        }
        check_sl2(&default, "default matrix")?;
        for (i, br) in branches.iter().enumerate() {
            check_sl2(&br.matrix, &format!("branch {i} matrix"))?;
            for c in br.cylinders().iter().chain(&br.exclude) {
                let (a, b) = c.span().ok_or_else(|| invalid("branch cylinders must be nonempty"))?;
                if a < lo || b > hi {
                    return Err(invalid(format!("branch {i} cylinder {c} leaves the window [{lo}, {hi}]")));
                }
            }
        }
        let mut budget = Budget::new(CHECK_BUDGET);
        for i in 0..branches.len() {
            for j in i + 1..branches.len() {
                let both = branches[i].event().and(&branches[j].event());
                if let Some(w) = find_word(&both, lo, hi, &mut budget)? {
                    return Err(invalid(format!(
                        "branches {i} and {j} overlap, e.g. on window word {}",
                        w.iter().map(|s| s.to_string()).collect::<String>()
                    )));
                }
            }
        }
        let compiled = Box::new(Compiled::new(&branches, &default));
        Ok(Self { name: name.into(), window, branches, default, compiled })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn default_matrix(&self) -> &Mat2 {
        &self.default
    }

    pub(crate) fn compiled(&self) -> &Compiled {
        &self.compiled
    }

    /// The event on which the default matrix applies.
    pub fn default_event(&self) -> Event {
        self.branches
            .iter()
            .fold(Event::everything(), |acc, br| acc.and(&Event::complement_of(br.cylinders(), &br.exclude)))
    }

    /// Branch events followed by the default event, with their matrices.
    pub fn classes(&self) -> Vec<(String, Event, Mat2)> {
        let mut out: Vec<(String, Event, Mat2)> = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, br)| (format!("branch{i}"), br.event(), br.matrix))
            .collect();
        out.push(("default".into(), self.default_event(), self.default));
        out
    }

    /// A(x).
    pub fn evaluate(&self, x: &LazyPoint) -> Result<Mat2> {
        let mut found: Option<usize> = None;
        for (i, br) in self.branches.iter().enumerate() {
            if br.matches(x) {
                if let Some(first) = found {
                    return Err(Error::AmbiguousBranch { time: 0, first, second: i });
                }
                found = Some(i);
            }
        }
        Ok(found.map_or(self.default, |i| self.branches[i].matrix))
    }

    /// A at any point whose window coordinates lo..=hi are `word`.
    pub fn evaluate_word(&self, word: &[u8]) -> Result<Mat2> {
        let (lo, hi) = self.window;
        if word.len() as i64 != hi - lo + 1 {
            return Err(invalid(format!("window word must have length {}", hi - lo + 1)));
        }
        let mut found: Option<usize> = None;
        for (i, br) in self.branches.iter().enumerate() {
            if br.matches_word(lo, word) {
                if let Some(first) = found {
                    return Err(Error::AmbiguousBranch { time: 0, first, second: i });
                }
                found = Some(i);
            }
        }
        Ok(found.map_or(self.default, |i| self.branches[i].matrix))
    }

    /// The value of A on `c`, which must determine it.
    pub fn value_on(&self, c: &Cylinder) -> Result<Mat2> {
        let (lo, hi) = self.window;
        let free: Vec<i64> = (lo..=hi).filter(|&i| c.symbol_at(i).is_none()).collect();
        if free.len() > 16 {
            return Err(invalid(format!("{c} leaves too many window coordinates free")));
        }
        let mut value: Option<Mat2> = None;
        for n in 0u32..1 << free.len() {
            let word: Vec<u8> = (lo..=hi)
                .map(|i| match c.symbol_at(i) {
                    Some(s) => s,
                    None => ((n >> free.iter().position(|&j| j == i).unwrap()) & 1) as u8,
                })
                .collect();
            let m = self.evaluate_word(&word)?;
            match value {
                Some(v) if v != m => return Err(invalid(format!("cocycle is not constant on {c}"))),
                _ => value = Some(m),
            }
        }
        Ok(value.expect("at least one completion"))
    }

    /// A^n(x), with A^{−m}(x) = A(f^{−m}x)^{−1} ⋯ A(f^{−1}x)^{−1}.
    pub fn iterate(&self, x: &LazyPoint, n: i64) -> Result<ScaledProduct> {
        if n >= 0 {
            return OrbitScanner::new(self, x).product(0, n);
        }
        let mut acc = ScaledProduct::identity();
        for t in (n..0).rev() {
            let m = self.evaluate(&x.shifted(t))?;
            acc.mul_left(&m.inverse().ok_or_else(|| Error::Invariant("singular cocycle value".into()))?);
        }
        Ok(acc)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must exceed 1, got {sigma}")));
    }
    Ok(())
}

/// A_{ση}: diag(σ, 1/σ) if x_0 = 1, diag(1/η, η) if x_0 = 0.
pub fn build_a_sigma_eta(sigma: f64, eta: f64) -> Result<LocallyConstantCocycle> {
    if !(sigma > 0.0 && eta > 0.0 && sigma.is_finite() && eta.is_finite()) {
        return Err(invalid(format!("sigma and eta must be positive, got sigma={sigma}, eta={eta}")));
    }
    let one = Cylinder::parse(0, "1")?;
    LocallyConstantCocycle::new(
        format!("A(sigma={sigma},eta={eta})"),
        (0, 0),
        vec![Branch::new(CylinderUnion::single(one), vec![], diagonal(sigma)?)],
        diagonal(1.0 / eta)?,
    )
}

/// A_{σ1}: diag(σ, 1/σ) if x_0 = 1, identity if x_0 = 0.
pub fn build_a_sigma_1(sigma: f64) -> Result<LocallyConstantCocycle> {
    build_a_sigma_eta(sigma, 1.0)
}

/// B_k: A_{σ1}·R_{π/(2k)} on ∪_{i=0}^{k−1} f^i(Z_k), A_{σ1} elsewhere.
pub fn build_bk(sigma: f64, k: usize) -> Result<LocallyConstantCocycle> {
    build_bk_with(sigma, k, RotationRange::Full)
}

pub fn build_bk_with(sigma: f64, k: usize, range: RotationRange) -> Result<LocallyConstantCocycle> {
    check_sigma(sigma)?;
    let z = make_zk(k)?;
    let a = build_a_sigma_1(sigma)?;
    let theta = FRAC_PI_2 / k as f64;
    let first = match range {
        RotationRange::Full => 0,
        RotationRange::Printed => 1,
    };
    let mut branches = Vec::new();
    let rotated: Vec<Cylinder> = (first..k as i64).map(|i| z.image(i)).collect();
    if !rotated.is_empty() {
        // x_0 = 0 on every f^i(Z_k), i < k
        let base = a.value_on(&rotated[0])?;
        branches.push(Branch::new(CylinderUnion::new(rotated)?, vec![], base * rotation(theta)));
    }
    let one = Cylinder::parse(0, "1")?;
    branches.push(Branch::new(CylinderUnion::single(one), vec![], diagonal(sigma)?));
    LocallyConstantCocycle::new(format!("B_{k}(sigma={sigma})"), (-(k as i64 - 1), k as i64), branches, Mat2::IDENTITY)
}

/// Parameters of L_k derived from (σ, k, β).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LkParams {
    /// k^{−β}.
    pub s: f64,
    /// 1 + k^{−β}.
    pub u: f64,
    /// θ_k with tan θ_k = 1 / (s·u^{2k}).
    pub theta: f64,
    /// γ̃(k) = s·u^{2k} / σ^{2k}.
    pub gamma: f64,
}

impl LkParams {
    pub fn new(sigma: f64, k: usize, beta: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let kf = k as f64;
        let s = kf.powf(-beta);
        let u = 1.0 + s;
        let growth = 2.0 * kf * u.ln();
        let theta = (-(s.ln() + growth)).exp().atan();
        let gamma = (s.ln() + growth - 2.0 * kf * sigma.ln()).exp();
        Ok(Self { s, u, theta, gamma })
    }
}

/// L_k on the window [−2k, 2k]:
/// shear_lower(k^{−β}) on W_k; diag(1/u, u) on f^i(W_k), 1 ≤ i ≤ k; A·R_{θ_k} on f^{k+1}(W_k);
/// shear_lower(γ̃)·A on f^{2k}(W_k); A elsewhere.
pub fn build_lk(sigma: f64, k: usize, beta: f64) -> Result<LocallyConstantCocycle> {
    let prm = LkParams::new(sigma, k, beta)?;
    if k < 2 {
        return Err(invalid("L_k needs k >= 2 (f^{k+1}(W_k) and f^{2k}(W_k) coincide at k = 1)"));
    }
    let w = make_wk(k)?;
    let a = build_a_sigma_1(sigma)?;
    let ki = k as i64;
    let rot_set = w.image(ki + 1);
    let shear_set = w.image(2 * ki);
    let a_rot = a.value_on(&rot_set)?;
    let a_shear = a.value_on(&shear_set)?;
    let branches = vec![
        Branch::new(CylinderUnion::single(w.clone()), vec![], a.value_on(&w)? * shear_lower(prm.s)),
        Branch::new(
            CylinderUnion::new((1..=ki).map(|i| w.image(i)).collect())?,
            vec![],
            Mat2::diag(1.0 / prm.u, prm.u),
        ),
        Branch::new(CylinderUnion::single(rot_set.clone()), vec![], a_rot * rotation(prm.theta)),
        Branch::new(CylinderUnion::single(shear_set.clone()), vec![], shear_lower(prm.gamma) * a_shear),
        Branch::new(CylinderUnion::single(Cylinder::parse(0, "1")?), vec![rot_set, shear_set], diagonal(sigma)?),
    ];
    LocallyConstantCocycle::new(format!("L_{k}(sigma={sigma},beta={beta})"), (-2 * ki, 2 * ki), branches, Mat2::IDENTITY)
}

/// Line angles after n steps: e1 against the vertical, e2 against the horizontal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExchangeAngles {
    /// Angle between the horizontal line and P^{−1}(vertical), i.e. how far P·H is from V,
    /// measured where it is well conditioned.
    pub e1_to_vertical: f64,
    /// Angle between P·(vertical) and the horizontal line.
    pub e2_to_horizontal: f64,
    /// Angle between P·e1 and the vertical, computed directly.
    pub e1_to_vertical_forward: f64,
}

impl ExchangeAngles {
    pub fn max(&self) -> f64 {
        self.e1_to_vertical.max(self.e2_to_horizontal)
    }
}

/// atan(e^{a − b}) for log magnitudes a, b.
fn log_ratio_angle(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    if b == f64::NEG_INFINITY {
        return FRAC_PI_2;
    }
    (a - b).exp().atan()
}

/// Line angles of A^n(x) relative to the exchanged axes.
pub fn exchange_check(f: &LocallyConstantCocycle, x: &LazyPoint, n: u64) -> Result<ExchangeAngles> {
    let p = f.iterate(x, n as i64)?;
    let l = |i, j| p.log_abs_entry(i, j);
    if p.log_abs_det() == f64::NEG_INFINITY {
        return Err(Error::Invariant("singular product in exchange_check".into()));
    }
    Ok(ExchangeAngles {
        // P^{-1} e2 ∝ (−b, a)
        e1_to_vertical: log_ratio_angle(l(0, 0), l(0, 1)),
        // P e2 = (b, d)
        e2_to_horizontal: log_ratio_angle(l(1, 1), l(0, 1)),
        // P e1 = (a, c)
        e1_to_vertical_forward: log_ratio_angle(l(0, 0), l(1, 0)),
    })
}

/// sup over reachable values of ‖M‖·‖M^{−1}‖, against ρ^{−α}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberBunching {
    pub sup: f64,
    pub threshold: f64,
    pub bunched: bool,
}

pub fn fiber_bunching_margin(f: &LocallyConstantCocycle, alpha: f64, rho: f64) -> Result<FiberBunching> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0,1), got {rho}")));
    }
    let (lo, hi) = f.window();
    let mut budget = Budget::new(CHECK_BUDGET);
    let mut sup: f64 = 0.0;
    for (_, event, m) in f.classes() {
        if find_word(&event, lo, hi, &mut budget)?.is_none() {
            continue;
        }
        let inv = m.inverse().ok_or_else(|| Error::Invariant("singular cocycle value".into()))?;
        sup = sup.max(op_norm(&m) * op_norm(&inv));
    }
    let threshold = rho.powf(-alpha);
    Ok(FiberBunching { sup, threshold, bunched: sup < threshold })
}
