//! Lyapunov exponents of cocycles over (M, f, μ_p), in nats per ambient step.

use serde::{Deserialize, Serialize};

use crate::cocycle::LocallyConstantCocycle;
use crate::error::{invalid, Result};
use crate::induction::cj_decay;
use crate::scan::OrbitScanner;
use crate::shift::{Cylinder, LazyPoint};
use crate::stats::{mean_stderr, run_trials};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    DirectMc,
    Induced,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::DirectMc => "direct_mc",
            Method::Induced => "induced",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    /// Ambient steps per trial; for the induced method, returns per trial (2J).
    pub n: u64,
    pub trials: usize,
    /// Zero for closed forms.
    pub stderr: f64,
    pub method: Method,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0,1), got {p}")));
    }
    Ok(())
}

/// λ₊(A_{ση}, μ_p) = |(1−p)·ln η − p·ln σ|; λ₋ = −λ₊.
pub fn lyap_diag_closed_form(sigma: f64, eta: f64, p: f64) -> Result<ExponentEstimate> {
    if !(sigma > 0.0 && eta > 0.0) {
        return Err(invalid(format!("sigma and eta must be positive, got {sigma}, {eta}")));
    }
    check_p(p)?;
    let (a, b) = ((1.0 - p) * eta.ln(), p * sigma.ln());
    // differences within the rounding of the two terms are reported as 0
    let value = if (a - b).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) { 0.0 } else { (a - b).abs() };
    Ok(ExponentEstimate {
        value,
        n: 0,
        trials: 0,
        stderr: 0.0,
        method: Method::ClosedForm,
    })
}

/// The p at which λ₊(A_{ση}) vanishes: ln η / ln(ση).
pub fn critical_weight(sigma: f64, eta: f64) -> Result<f64> {
    if !(sigma > 0.0 && eta > 0.0) || (sigma * eta).ln() == 0.0 {
        return Err(invalid(format!("no critical weight for sigma={sigma}, eta={eta}")));
    }
    Ok(eta.ln() / (sigma * eta).ln())
}

/// Per-trial (top, bottom) finite-n exponents.
fn mc_samples(f: &LocallyConstantCocycle, p: f64, n: u64, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_p(p)?;
    if n == 0 || trials == 0 {
        return Err(invalid("n and trials must be positive"));
    }
    run_trials(trials, seed, |_, s| -> Result<(f64, f64)> {
        let x = LazyPoint::bernoulli(s, p)?;
        let prod = OrbitScanner::new(f, &x).product(0, n as i64)?;
        Ok((prod.log_norm() / n as f64, -prod.log_inverse_norm() / n as f64))
    })
    .into_iter()
    .collect()
}

fn estimate(samples: &[f64], n: u64, method: Method) -> ExponentEstimate {
    let m = mean_stderr(samples);
    ExponentEstimate { value: m.mean, n, trials: samples.len(), stderr: m.stderr, method }
}

/// Mean over trials of (1/n)·ln‖A^n(x)‖; each trial is one batch.
pub fn lyap_top_mc(f: &LocallyConstantCocycle, p: f64, n: u64, trials: usize, seed: u64) -> Result<ExponentEstimate> {
    let s: Vec<f64> = mc_samples(f, p, n, trials, seed)?.into_iter().map(|s| s.0).collect();
    Ok(estimate(&s, n, Method::DirectMc))
}

/// Mean over trials of (1/n)·ln‖A^n(x)^{−1}‖^{−1}.
pub fn lyap_bottom_mc(f: &LocallyConstantCocycle, p: f64, n: u64, trials: usize, seed: u64) -> Result<ExponentEstimate> {
    let s: Vec<f64> = mc_samples(f, p, n, trials, seed)?.into_iter().map(|s| s.1).collect();
    Ok(estimate(&s, n, Method::DirectMc))
}

/// Top and bottom estimates from the same trajectories.
pub fn lyap_both_mc(
    f: &LocallyConstantCocycle,
    p: f64,
    n: u64,
    trials: usize,
    seed: u64,
) -> Result<(ExponentEstimate, ExponentEstimate)> {
    let s = mc_samples(f, p, n, trials, seed)?;
    let top: Vec<f64> = s.iter().map(|s| s.0).collect();
    let bottom: Vec<f64> = s.iter().map(|s| s.1).collect();
    Ok((estimate(&top, n, Method::DirectMc), estimate(&bottom, n, Method::DirectMc)))
}

/// λ₊ from even-return products over c: |mean of c_J·ln σ / m_J| across trials.
///
/// The mean is taken over the signed per-trial rates; the stderr is theirs.
#[allow(clippy::too_many_arguments)]
pub fn lyap_induced(
    f: &LocallyConstantCocycle,
    c: &Cylinder,
    sigma: f64,
    p: f64,
    trials: usize,
    j_max: usize,
    seed: u64,
    cap: u64,
) -> Result<ExponentEstimate> {
    check_p(p)?;
    let d = cj_decay(f, c, sigma, p, trials, &[j_max], seed, cap)?;
    let m = mean_stderr(&d.signed_rates);
    Ok(ExponentEstimate {
        value: m.mean.abs(),
        n: 2 * j_max as u64,
        trials,
        stderr: m.stderr,
        method: Method::Induced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{build_a_sigma_1, build_a_sigma_eta};

    #[test]
    fn closed_form_examples() {
        let e = lyap_diag_closed_form(2.0, 1.0, 0.5).unwrap();
        assert!((e.value - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(e.stderr, 0.0);
        let p = critical_weight(4.0, 2.0).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(lyap_diag_closed_form(4.0, 2.0, p).unwrap().value, 0.0);
        assert_eq!(lyap_diag_closed_form(4.0, 2.0, 1.0 / 3.0).unwrap().value, 0.0);
        assert_eq!(lyap_diag_closed_form(1.0, 1.0, 0.3).unwrap().value, 0.0);
        assert!(lyap_diag_closed_form(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn identity_has_zero_exponents() {
        let id = build_a_sigma_eta(1.0, 1.0).unwrap();
        let (t, b) = lyap_both_mc(&id, 0.5, 1000, 4, 1).unwrap();
        assert_eq!((t.value, b.value), (0.0, 0.0));
    }

    #[test]
    fn top_and_bottom_are_symmetric() {
        let a = build_a_sigma_1(2.0).unwrap();
        let (t, b) = lyap_both_mc(&a, 0.5, 20_000, 8, 2).unwrap();
        assert!((t.value + b.value).abs() < 1e-9);
        assert!((t.value - 0.5 * 2f64.ln()).abs() < 0.02);
    }
}
