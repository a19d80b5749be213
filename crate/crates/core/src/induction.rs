//! First-return cocycles over a cylinder: excursion products, the even-return diagonal
//! sequence c_j, Kac/Birkhoff return statistics and the Abramov rescaling.
//!
//! Conventions: τ^{(j)} is the j-th return time (τ^{(0)} = 0), S_j counts the ones among
//! x_{τ^{(j−1)}} .. x_{τ^{(j)}−1}, and m_j = τ^{(2j)}.

use serde::Serialize;

use crate::cocycle::LocallyConstantCocycle;
use crate::error::{invalid, Error, Result};
use crate::mat2::{Mat2, Monomial, ScaledProduct};
use crate::scan::OrbitScanner;
use crate::shift::{return_times, Cylinder, LazyPoint};
use crate::stats::{mean_stderr, run_trials, MeanStderr};

/// Off-diagonal residual allowed when snapping an excursion product.
pub const MONOMIAL_TOL: f64 = 1e-6;
/// Agreement required between the two c_j computations, relative to max(1, |c_j|).
pub const CJ_TOL: f64 = 1e-9;

/// One excursion from τ^{(j−1)} to τ^{(j)}.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnRecord {
    pub j: usize,
    pub tau: u64,
    pub s_exc: u64,
    pub induced: ScaledProduct,
}

impl ReturnRecord {
    pub fn induced_mat2(&self) -> Mat2 {
        self.induced.to_mat2()
    }

    /// log_σ|P_12| − S for an antidiagonal excursion product P; `None` if P is not antidiagonal.
    pub fn antidiagonal_offset(&self, sigma: f64) -> Option<f64> {
        let (m, _) = Monomial::from_scaled(&self.induced, MONOMIAL_TOL).ok()?;
        m.anti.then(|| m.log_abs[0] / sigma.ln() - self.s_exc as f64)
    }
}

/// Walks the returns of one orbit, multiplying the cocycle along each excursion.
struct ExcursionWalker<'a> {
    scanner: OrbitScanner<'a>,
    c: &'a Cylinder,
    reach: i64,
    prev: i64,
    cap: u64,
    count: usize,
    wanted: usize,
}

impl<'a> ExcursionWalker<'a> {
    fn new(f: &'a LocallyConstantCocycle, x: &LazyPoint, c: &'a Cylinder, wanted: usize, cap: u64) -> Result<Self> {
        if !c.contains(x) {
            return Err(invalid(format!("point is not in {c}")));
        }
        let reach = f.window().0.min(c.base()).min(0);
        Ok(Self { scanner: OrbitScanner::new(f, x), c, reach, prev: 0, cap, count: 0, wanted })
    }

    fn next(&mut self, with_product: bool) -> Result<(u64, u64, Option<ScaledProduct>)> {
        let orbit = self.scanner.orbit();
        let Some(t) = orbit.next_visit(self.c, self.prev + 1, self.cap as i64) else {
            return Err(Error::CapExceeded {
                cylinder: self.c.to_string(),
                wanted: self.wanted,
                found: self.count,
                cap: self.cap,
            });
        };
        let ones = orbit.ones(self.prev, t);
        let product = if with_product { Some(self.scanner.product(self.prev, t)?) } else { None };
        self.scanner.orbit().release_before(self.prev + self.reach - 64);
        self.prev = t;
        self.count += 1;
        Ok((t as u64, ones, product))
    }
}

/// The first `count` excursion products of F along the orbit of x ∈ c.
pub fn induced_products(
    f: &LocallyConstantCocycle,
    x: &LazyPoint,
    c: &Cylinder,
    count: usize,
    cap: u64,
) -> Result<Vec<ReturnRecord>> {
    let mut walk = ExcursionWalker::new(f, x, c, count, cap)?;
    (1..=count)
        .map(|j| {
            let (tau, s_exc, p) = walk.next(true)?;
            Ok(ReturnRecord { j, tau, s_exc, induced: p.expect("product requested") })
        })
        .collect()
}

/// c_j and m_j for j = 1..=j_max along one orbit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CjSeries {
    /// c_j = log_σ|(2j-return product)_{11}|.
    pub c: Vec<f64>,
    /// Σ_{i≤j} (S_{2i} − S_{2i−1}); present when every excursion product is antidiagonal.
    pub c_formula: Option<Vec<f64>>,
    pub m: Vec<u64>,
    /// Largest snapping residual over all excursions.
    pub max_residual: f64,
}

impl CjSeries {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// |c_j| / m_j for 1-based j.
    pub fn decay(&self, j: usize) -> f64 {
        self.c[j - 1].abs() / self.m[j - 1] as f64
    }
}

/// Even-return products of F over c, with c_j read from the diagonal entry and, for
/// exchanging excursions, recomputed from the S_j sums.
pub fn even_return_diagonal(
    f: &LocallyConstantCocycle,
    x: &LazyPoint,
    c: &Cylinder,
    sigma: f64,
    j_max: usize,
    cap: u64,
) -> Result<CjSeries> {
    if sigma.is_nan() || sigma <= 1.0 {
        return Err(invalid(format!("sigma must exceed 1, got {sigma}")));
    }
    let ln_sigma = sigma.ln();
    let mut walk = ExcursionWalker::new(f, x, c, 2 * j_max, cap)?;
    let mut acc = Monomial::identity();
    let mut all_anti = true;
    let mut formula = 0.0;
    let mut s_odd = 0u64;
    let mut out = CjSeries { c: Vec::with_capacity(j_max), c_formula: Some(Vec::new()), m: Vec::new(), max_residual: 0.0 };
    for i in 1..=2 * j_max {
        let (tau, s, p) = walk.next(true)?;
        let (m, residual) = Monomial::from_scaled(&p.expect("product requested"), MONOMIAL_TOL)
            .map_err(|residual| Error::NonDiagonal { at: i, residual })?;
        out.max_residual = out.max_residual.max(residual);
        all_anti &= m.anti;
        acc = Monomial::compose(&m, &acc);
        if i % 2 == 1 {
            s_odd = s;
            continue;
        }
        if acc.anti {
            return Err(Error::NonDiagonal { at: i, residual: 1.0 });
        }
        let cj = acc.log_abs[0] / ln_sigma;
        formula += s as f64 - s_odd as f64;
        out.c.push(cj);
        out.m.push(tau);
        if all_anti {
            if (cj - formula).abs() > CJ_TOL * formula.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "c_{} from the product is {cj}, from the return sums {formula}",
                    i / 2
                )));
            }
            if let Some(v) = out.c_formula.as_mut() {
                v.push(formula);
            }
        } else {
            out.c_formula = None;
        }
    }
    Ok(out)
}

/// Kac and Birkhoff return statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KacReport {
    /// First return time τ^{(1)} under μ restricted to c.
    pub mean_tau: MeanStderr,
    /// τ^{(2J)} / J at J = j_max.
    pub slope: MeanStderr,
    /// S_{τ} of the first excursion.
    pub mean_s: MeanStderr,
    /// 1/μ(c).
    pub kac_tau: f64,
    /// 2/μ(c).
    pub kac_slope: f64,
}

/// Monte Carlo return statistics for x drawn from μ_p conditioned on c.
pub fn kac_birkhoff(c: &Cylinder, p: f64, trials: usize, j_max: usize, seed: u64, cap: u64) -> Result<KacReport> {
    if trials == 0 || j_max == 0 {
        return Err(invalid("trials and j_max must be positive"));
    }
    let per_trial = run_trials(trials, seed, |_, s| -> Result<(f64, f64, f64)> {
        let x = LazyPoint::in_cylinder(s, p, c)?;
        let r = return_times(&x, c, 2 * j_max, cap)?;
        Ok((r[0].tau as f64, r[2 * j_max - 1].tau as f64 / j_max as f64, r[0].ones as f64))
    });
    let rows = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let mu = c.measure(p);
    Ok(KacReport {
        mean_tau: mean_stderr(&rows.iter().map(|r| r.0).collect::<Vec<_>>()),
        slope: mean_stderr(&rows.iter().map(|r| r.1).collect::<Vec<_>>()),
        mean_s: mean_stderr(&rows.iter().map(|r| r.2).collect::<Vec<_>>()),
        kac_tau: 1.0 / mu,
        kac_slope: 2.0 / mu,
    })
}

/// |c_j|/m_j statistics on a grid of j.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CjDecay {
    pub grid: Vec<usize>,
    /// Mean and stderr of |c_j|/m_j across trials, per grid point.
    pub decay: Vec<MeanStderr>,
    /// Mean of c_j across trials, per grid point.
    pub mean_c: Vec<f64>,
    /// Mean of m_j across trials, per grid point.
    pub mean_m: Vec<f64>,
    /// Per-trial signed rates c_J·ln σ / m_J at J = max(grid).
    pub signed_rates: Vec<f64>,
    pub max_residual: f64,
}

impl CjDecay {
    pub fn is_decreasing(&self) -> bool {
        self.decay.windows(2).all(|w| w[1].mean < w[0].mean)
    }
}

/// Runs [`even_return_diagonal`] for `trials` points of c and summarizes |c_j|/m_j on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn cj_decay(
    f: &LocallyConstantCocycle,
    c: &Cylinder,
    sigma: f64,
    p: f64,
    trials: usize,
    grid: &[usize],
    seed: u64,
    cap: u64,
) -> Result<CjDecay> {
    if trials == 0 || grid.is_empty() || grid.contains(&0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("need trials >= 1 and a strictly increasing grid of positive j"));
    }
    let j_max = *grid.last().expect("nonempty grid");
    let series = run_trials(trials, seed, |_, s| -> Result<CjSeries> {
        let x = LazyPoint::in_cylinder(s, p, c)?;
        even_return_diagonal(f, &x, c, sigma, j_max, cap)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut out = CjDecay {
        grid: grid.to_vec(),
        decay: Vec::new(),
        mean_c: Vec::new(),
        mean_m: Vec::new(),
        signed_rates: series.iter().map(|s| s.c[j_max - 1] * sigma.ln() / s.m[j_max - 1] as f64).collect(),
        max_residual: series.iter().map(|s| s.max_residual).fold(0.0, f64::max),
    };
    for &j in grid {
        out.decay.push(mean_stderr(&series.iter().map(|s| s.decay(j)).collect::<Vec<_>>()));
        out.mean_c.push(series.iter().map(|s| s.c[j - 1]).sum::<f64>() / trials as f64);
        out.mean_m.push(series.iter().map(|s| s.m[j - 1] as f64).sum::<f64>() / trials as f64);
    }
    Ok(out)
}

/// Induced and ambient top exponents compared through λ(induced) = λ(ambient)/μ(c).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbramovReport {
    /// (1/J)·log‖(J-return product)‖ per trial, times μ(c).
    pub induced_times_mu: MeanStderr,
    /// (1/n)·log‖A^n(x)‖ per trial, x ~ μ_p.
    pub ambient: MeanStderr,
    pub discrepancy: f64,
    pub combined_stderr: f64,
}

/// Estimates both sides independently: the induced side from `n` returns of points in c,
/// the ambient side from `n·round(1/μ(c))` steps of unconditioned points.
pub fn abramov_check(
    f: &LocallyConstantCocycle,
    c: &Cylinder,
    p: f64,
    trials: usize,
    n: usize,
    seed: u64,
    cap: u64,
) -> Result<AbramovReport> {
    if trials == 0 || n == 0 {
        return Err(invalid("trials and n must be positive"));
    }
    let mu = c.measure(p);
    let steps = (n as f64 / mu).round() as i64;
    let induced = run_trials(trials, seed, |_, s| -> Result<f64> {
        let x = LazyPoint::in_cylinder(s, p, c)?;
        let mut walk = ExcursionWalker::new(f, &x, c, n, cap)?;
        let mut acc = ScaledProduct::identity();
        for _ in 0..n {
            let (_, _, e) = walk.next(true)?;
            acc = ScaledProduct::compose(&e.expect("product requested"), &acc);
        }
        Ok(acc.log_norm() / n as f64 * mu)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ambient = run_trials(trials, seed ^ 0x5eed_ab5a_0000_0001, |_, s| -> Result<f64> {
        let x = LazyPoint::bernoulli(s, p)?;
        Ok(OrbitScanner::new(f, &x).product(0, steps)?.log_norm() / steps as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let induced_times_mu = mean_stderr(&induced);
    let ambient = mean_stderr(&ambient);
    let combined_stderr = induced_times_mu.stderr.hypot(ambient.stderr);
    Ok(AbramovReport {
        discrepancy: (induced_times_mu.mean - ambient.mean).abs(),
        induced_times_mu,
        ambient,
        combined_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{build_a_sigma_1, build_a_sigma_eta, build_bk};
    use crate::shift::make_zk;

    #[test]
    fn a_sigma_1_excursions_are_diagonal_powers() {
        let a = build_a_sigma_1(2.0).unwrap();
        let z = make_zk(2).unwrap();
        let x = LazyPoint::in_cylinder(5, 0.5, &z).unwrap();
        let recs = induced_products(&a, &x, &z, 50, 1 << 20).unwrap();
        let mut prev = 0;
        for r in &recs {
            assert!(r.tau > prev);
            prev = r.tau;
            let m = r.induced_mat2();
            let s = r.s_exc as i32;
            assert_eq!(m, Mat2::diag(2f64.powi(s), 2f64.powi(-s)));
        }
    }

    #[test]
    fn bk_first_return_is_antidiagonal() {
        let b = build_bk(2.0, 3).unwrap();
        let z = make_zk(3).unwrap();
        let x = LazyPoint::in_cylinder(9, 0.5, &z).unwrap();
        for r in induced_products(&b, &x, &z, 40, 1 << 20).unwrap() {
            assert!(r.tau >= 4);
            let off = r.antidiagonal_offset(2.0).unwrap();
            assert!(off.abs() < 1e-9, "offset {off}");
        }
    }

    #[test]
    fn cj_two_ways_and_first_value() {
        let b = build_bk(2.0, 2).unwrap();
        let z = make_zk(2).unwrap();
        let x = LazyPoint::in_cylinder(1, 0.5, &z).unwrap();
        let series = even_return_diagonal(&b, &x, &z, 2.0, 200, 1 << 24).unwrap();
        let recs = induced_products(&b, &x, &z, 2, 1 << 20).unwrap();
        assert_eq!(series.c[0], recs[1].s_exc as f64 - recs[0].s_exc as f64);
        assert_eq!(series.c_formula.as_ref().unwrap().len(), 200);
        assert!(series.m.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn identity_cocycle_has_zero_cj() {
        let id = build_a_sigma_eta(1.0, 1.0).unwrap();
        let z = make_zk(2).unwrap();
        let x = LazyPoint::in_cylinder(3, 0.5, &z).unwrap();
        let s = even_return_diagonal(&id, &x, &z, 2.0, 20, 1 << 20).unwrap();
        assert!(s.c.iter().all(|&c| c == 0.0));
        assert!(s.c_formula.is_none());
    }

    #[test]
    fn whole_space_returns_every_step() {
        let k = kac_birkhoff(&Cylinder::whole_space(), 0.5, 20, 5, 3, 100).unwrap();
        assert_eq!(k.mean_tau.mean, 1.0);
        assert_eq!(k.slope.mean, 2.0);
        assert_eq!(k.kac_tau, 1.0);
    }

    #[test]
    fn point_outside_cylinder_is_rejected() {
        let b = build_bk(2.0, 2).unwrap();
        let z = make_zk(2).unwrap();
        let x = LazyPoint::constant(1).unwrap();
        assert!(induced_products(&b, &x, &z, 1, 100).is_err());
    }
}
