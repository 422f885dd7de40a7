//! Remez-type sup-norm comparisons for polynomials that are observed only on
//! a fractal subset, plus the Jensen zero-count bound and
//! propagation-of-smallness checks for polynomials and spectral vectors.
//!
//! Disc sups use the maximum-modulus principle: the sup over a closed disc is
//! attained on the boundary circle, which is sampled on a dense grid with a
//! derivative-based slack so that the true sup is bracketed.

use crate::error::{LabError, Result};
use crate::lemniscate::Polynomial;
use crate::lognum::LogNum;
use crate::rng::trial_rng;
use crate::spectral1d::SpectralVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupEstimate {
    pub value: LogNum,
    pub grid_points: usize,
    /// True sup lies in [value, value + lipschitz_slack].
    pub lipschitz_slack: LogNum,
}

/// Sup of |P| over the disc of the given radius, via the boundary circle.
pub fn sup_disc(p: &Polynomial, radius: f64) -> SupEstimate {
    sup_disc_with(p, radius, 4096.max(64 * p.degree()))
}

pub fn sup_disc_with(p: &Polynomial, radius: f64, m: usize) -> SupEstimate {
    let mut best = LogNum::ZERO;
    for i in 0..m {
        let theta = std::f64::consts::TAU * i as f64 / m as f64;
        best = best.max(p.ln_abs(Complex64::from_polar(radius, theta)));
    }
    // |P'| on the circle is at most |A| n (radius + max|z_j|)^{n-1}.
    let n = p.degree();
    let slack = if n == 0 {
        LogNum::ZERO
    } else {
        let reach = radius + p.roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let lip = LogNum::from_f64(p.leading.norm())
            * LogNum::from_f64(n as f64)
            * LogNum::from_f64(reach).powf((n - 1) as f64);
        lip.scale(std::f64::consts::PI * radius / m as f64)
    };
    SupEstimate {
        value: best,
        grid_points: m,
        lipschitz_slack: slack,
    }
}

/// Sup of |P| over a finite real point sample.
pub fn sup_points(p: &Polynomial, points: &[f64]) -> LogNum {
    points.iter().fold(LogNum::ZERO, |acc, &x| {
        acc.max(p.ln_abs(Complex64::new(x, 0.0)))
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemezTrial {
    pub trial: usize,
    pub n: usize,
    pub ratio_ln: f64,
    pub required_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemezOutcome {
    pub max_ratio_ln: f64,
    pub fitted_c: f64,
    pub violations: usize,
    pub trials: Vec<RemezTrial>,
}

/// Ratio sup_{D_1}|P| / sup_{E-sample}|P| against the bound
/// 12^n exp{C n^2 (log(n+e))^{-2a/3} / c^2}: reports the smallest C making
/// every trial pass. Polynomials are drawn from the three root ensembles in
/// rotation.
pub fn remez_experiment(
    n: usize,
    e_points: &[f64],
    alpha: f64,
    content: f64,
    trials: usize,
    seed: u64,
) -> Result<RemezOutcome> {
    use crate::lemniscate::{sample_roots, RootEnsemble};
    if content <= 0.0 || e_points.is_empty() {
        return Err(LabError::DegenerateSet(
            "observation set needs positive content".into(),
        ));
    }
    let ensembles = [
        RootEnsemble::UniformDisc,
        RootEnsemble::Coincident,
        RootEnsemble::UnitCircle,
    ];
    let nf = n as f64;
    let shape = nf * nf * (nf + std::f64::consts::E).ln().powf(-2.0 * alpha / 3.0)
        / (content * content);
    let mut rows = Vec::with_capacity(trials);
    let mut fitted_c = 0.0f64;
    let mut max_ratio_ln = f64::NEG_INFINITY;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let p = Polynomial::monic(sample_roots(ensembles[t % 3], n, &mut rng));
        let sup_d = sup_disc(&p, 1.0);
        let sup_e = sup_points(&p, e_points);
        if sup_e.is_zero() {
            return Err(LabError::ZeroObservation);
        }
        let ratio_ln = (sup_d.value / sup_e).ln_value();
        let excess = ratio_ln - nf * 12f64.ln();
        let required_c = if n == 0 || excess <= 0.0 {
            0.0
        } else {
            excess / shape
        };
        fitted_c = fitted_c.max(required_c);
        max_ratio_ln = max_ratio_ln.max(ratio_ln);
        rows.push(RemezTrial {
            trial: t,
            n,
            ratio_ln,
            required_c,
        });
    }
    let violations = rows
        .iter()
        .filter(|r| r.required_c > fitted_c + 1e-12)
        .count();
    Ok(RemezOutcome {
        max_ratio_ln,
        fitted_c,
        violations,
        trials: rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JensenOutcome {
    /// Number of roots with |z| <= 2.
    pub m: usize,
    /// log M / log 2 with M = sup_{D_4}|p| / |p(0)|.
    pub bound: f64,
}

/// Jensen zero count: after normalizing |p(0)| = 1, the number of zeros in
/// the closed disc of radius 2 is at most log(sup_{D_4}|p|)/log 2.
pub fn jensen_zero_bound(p: &Polynomial) -> Result<JensenOutcome> {
    let at_zero = p.ln_abs(Complex64::new(0.0, 0.0));
    if at_zero.is_zero() {
        return Err(LabError::Param("p(0) = 0: cannot normalize".into()));
    }
    let m = p.roots.iter().filter(|r| r.norm() <= 2.0).count();
    let sup4 = sup_disc(p, 4.0);
    let bound = ((sup4.value + sup4.lipschitz_slack) / at_zero).ln_value()
        / std::f64::consts::LN_2;
    if (m as f64) > bound + 1e-9 {
        return Err(LabError::BoundViolation(format!(
            "jensen count {m} exceeds bound {bound}"
        )));
    }
    Ok(JensenOutcome { m, bound })
}

/// A function admissible for the propagation experiment: evaluable on the
/// plane and on real points.
pub enum Phi<'a> {
    Poly(&'a Polynomial),
    Spectral(&'a SpectralVector),
}

impl Phi<'_> {
    fn ln_abs(&self, z: Complex64) -> Result<LogNum> {
        Ok(match self {
            Phi::Poly(p) => p.ln_abs(z),
            Phi::Spectral(v) => LogNum::from_f64(v.evaluate(z, 0)?.norm()),
        })
    }

    fn sup_circle(&self, radius: f64, m: usize) -> Result<LogNum> {
        let mut best = LogNum::ZERO;
        for i in 0..m {
            let theta = std::f64::consts::TAU * i as f64 / m as f64;
            best = best.max(self.ln_abs(Complex64::from_polar(radius, theta))?);
        }
        Ok(best)
    }

    fn sup_real(&self, points: &[f64]) -> Result<LogNum> {
        let mut best = LogNum::ZERO;
        for &x in points {
            best = best.max(self.ln_abs(Complex64::new(x, 0.0))?);
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationRow {
    pub ln_eps: f64,
    pub sup_i_ln: f64,
    pub sup_d5_ln: f64,
    pub sup_e_ln: f64,
    /// Smallest C with sup_I <= eps sup_{D_5} + exp{C (log 1/eps)^2
    /// (loglog 1/eps)^{-2a/3}} sup_E (0 when eps sup_{D_5} alone dominates).
    pub required_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationOutcome {
    pub rows: Vec<PropagationRow>,
    pub fitted_c: f64,
}

/// Propagation of smallness from E through the unit interval: for each eps,
/// sup_I|phi| <= eps sup_{D_5}|phi| + exp{C (log 1/eps)^2 /
/// (loglog 1/eps)^{2a/3}} sup_E|phi|.
pub fn propagation_experiment(
    phi: &Phi,
    i_points: &[f64],
    e_points: &[f64],
    alpha: f64,
    eps_grid: &[f64],
) -> Result<PropagationOutcome> {
    if e_points.is_empty() || i_points.is_empty() {
        return Err(LabError::Param("need I and E samples".into()));
    }
    let sup_i = phi.sup_real(i_points)?;
    let sup_e = phi.sup_real(e_points)?;
    let sup_d5 = phi.sup_circle(5.0, 4096)?;
    if sup_e.is_zero() {
        return Err(LabError::ZeroObservation);
    }
    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut fitted_c = 0.0f64;
    for &eps in eps_grid {
        if !(eps > 0.0 && eps <= (-3f64).exp()) {
            return Err(LabError::Param(format!("eps {eps} outside (0, e^-3]")));
        }
        let log_inv = -eps.ln();
        let first = sup_d5.scale(eps);
        let residual = sup_i - first;
        let required_c = if residual.sign <= 0 || residual <= sup_e {
            0.0
        } else {
            (residual / sup_e).ln_value() * log_inv.ln().powf(2.0 * alpha / 3.0)
                / (log_inv * log_inv)
        };
        fitted_c = fitted_c.max(required_c);
        rows.push(PropagationRow {
            ln_eps: eps.ln(),
            sup_i_ln: sup_i.ln_mag,
            sup_d5_ln: sup_d5.ln_mag,
            sup_e_ln: sup_e.ln_mag,
            required_c,
        });
    }
    Ok(PropagationOutcome { rows, fitted_c })
}
