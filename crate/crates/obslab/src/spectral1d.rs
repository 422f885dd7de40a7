//! Dirichlet eigen-expansions on (0, L): sampling, entire extension, the
//! spectral-inequality cost experiment, and exponential-polynomial
//! (Nazarov--Turan type) sup-norm comparisons.
//!
//! The eigenpairs are lambda_k = (k pi / L)^2 with phi_k(x) = sin(k pi x / L),
//! so every finite combination extends to an entire function through the
//! complex sine; no truncation or Taylor tail is involved. Growth is checked
//! against |phi(z)| <= sqrt(L lambda^{1/2} / pi) lambda^{m/2} e^{sqrt(lambda)|z|}
//! on every evaluation.

use crate::error::{LabError, Result};
use crate::rng::{gaussian, trial_rng};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralVector {
    pub l: f64,
    /// c_k for k = 1..=K.
    pub coeffs: Vec<f64>,
}

impl SpectralVector {
    /// Top eigenvalue (K pi / L)^2 of the expansion.
    pub fn lambda(&self) -> f64 {
        let k = self.coeffs.len() as f64;
        (k * PI / self.l).powi(2)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        0.5 * self.l * self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    /// m-th derivative at a complex point via the entire extension
    /// sum c_k (k pi/L)^m sin(k pi z / L + m pi/2).
    pub fn evaluate(&self, z: Complex64, m: u32) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            let freq = k * PI / self.l;
            let arg = z * freq + 0.5 * PI * m as f64;
            acc += c * freq.powi(m as i32) * arg.sin();
        }
        let lambda = self.lambda();
        let bound = (self.l * lambda.sqrt() / PI).sqrt()
            * lambda.powf(0.5 * m as f64)
            * (lambda.sqrt() * z.norm()).exp()
            * (self.l2_norm_sq().sqrt().max(1.0));
        if acc.norm() > bound * (1.0 + 1e-9) {
            return Err(LabError::BoundViolation(format!(
                "|phi^({m})({z})| = {} exceeds growth bound {bound}",
                acc.norm()
            )));
        }
        Ok(acc)
    }

    /// Certified sup of |phi^{(m)}| on [0, L]: grid maximum plus a Lipschitz
    /// slack from the coefficient bound on the next derivative.
    pub fn sup_interval(&self, m: u32) -> Result<(f64, f64)> {
        let k = self.coeffs.len();
        let points = 4096.max(8 * k);
        let lip: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * (((i + 1) as f64) * PI / self.l).powi(m as i32 + 1))
            .sum();
        let mut best = 0.0f64;
        for i in 0..=points {
            let x = self.l * i as f64 / points as f64;
            let v = self.evaluate(Complex64::new(x, 0.0), m)?.norm();
            best = best.max(v);
        }
        let slack = lip * 0.5 * self.l / points as f64;
        Ok((best, slack))
    }

    /// Sup of |phi| over a finite point sample.
    pub fn sup_points(&self, points: &[f64]) -> Result<f64> {
        let mut best = 0.0f64;
        for &x in points {
            best = best.max(self.evaluate(Complex64::new(x, 0.0), 0)?.norm());
        }
        Ok(best)
    }
}

/// Gaussian sample from the eigenspace of eigenvalues <= lambda, normalized
/// to unit L^2 norm.
pub fn sample_spectral(l: f64, lambda: f64, rng: &mut impl Rng) -> Result<SpectralVector> {
    if l <= 0.0 {
        return Err(LabError::Param("L must be positive".into()));
    }
    let k = (lambda.max(0.0).sqrt() * l / PI).floor() as usize;
    if k == 0 {
        return Err(LabError::EmptySpace {
            lambda,
            pi_over_l: PI / l,
        });
    }
    let mut coeffs: Vec<f64> = (0..k).map(|_| gaussian(rng)).collect();
    let norm_sq = 0.5 * l * coeffs.iter().map(|c| c * c).sum::<f64>();
    if norm_sq == 0.0 {
        return Err(LabError::DegenerateSet("zero spectral sample".into()));
    }
    let s = norm_sq.sqrt().recip();
    for c in &mut coeffs {
        *c *= s;
    }
    Ok(SpectralVector { l, coeffs })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostPoint {
    pub lambda: f64,
    pub k: usize,
    pub ln_cost: f64,
    pub ln_bound_at_fit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostCurve {
    pub points: Vec<CostPoint>,
    pub fitted_c: f64,
    pub violations: usize,
}

/// Observability cost over the eigenspace ladder: cost(lambda) is the max of
/// sup_{[0,L]}|phi| / sup_E|phi| over sampled phi in all spaces up to lambda
/// (nesting makes the curve monotone by construction and keeps every value an
/// honest lower bound for the true cost). Fits the smallest C with
/// ln cost <= C (L+1)^2 (sqrt(lambda) + lambda (log(lambda+e))^{-2a/3} / c^2).
pub fn spectral_cost_experiment(
    l: f64,
    e_points: &[f64],
    alpha: f64,
    content: f64,
    lambda_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CostCurve> {
    if content <= 0.0 {
        return Err(LabError::DegenerateSet("empirical content must be positive".into()));
    }
    if e_points.is_empty() {
        return Err(LabError::DegenerateSet("empty observation sample".into()));
    }
    let mut running = 0.0f64;
    let mut raw: Vec<(f64, usize, f64)> = Vec::new();
    for (li, &lambda) in lambda_grid.iter().enumerate() {
        let mut k_used = 0;
        for t in 0..trials {
            let mut rng = trial_rng(seed, (li * trials + t) as u64);
            let v = sample_spectral(l, lambda, &mut rng)?;
            k_used = v.coeffs.len();
            let (sup_i, _) = v.sup_interval(0)?;
            let sup_e = v.sup_points(e_points)?;
            if sup_e == 0.0 {
                return Err(LabError::ZeroObservation);
            }
            running = running.max((sup_i / sup_e).ln());
        }
        raw.push((lambda, k_used, running));
    }
    let shape = |lambda: f64| {
        (l + 1.0).powi(2)
            * (lambda.sqrt() + lambda * (lambda + std::f64::consts::E).ln().powf(-2.0 * alpha / 3.0) / (content * content))
    };
    let fitted_c = raw
        .iter()
        .map(|&(lambda, _, ln_cost)| ln_cost / shape(lambda))
        .fold(0.0f64, f64::max);
    let points = raw
        .iter()
        .map(|&(lambda, k, ln_cost)| CostPoint {
            lambda,
            k,
            ln_cost,
            ln_bound_at_fit: fitted_c * shape(lambda),
        })
        .collect::<Vec<_>>();
    let violations = points
        .iter()
        .filter(|p| p.ln_cost > p.ln_bound_at_fit + 1e-12)
        .count();
    Ok(CostCurve {
        points,
        fitted_c,
        violations,
    })
}

/// Exponential polynomial sum c_k e^{mu_k x} of order n.
#[derive(Debug, Clone)]
pub struct ExpPolynomial {
    pub terms: Vec<(Complex64, Complex64)>,
}

impl ExpPolynomial {
    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(c, mu)| c * (mu * x).exp())
            .sum()
    }

    pub fn max_re_mu(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(_, mu)| mu.re.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NazarovTuranOutcome {
    pub ratio: f64,
    /// C required to make e^{|I| max|Re mu|} (C|I|/|E|)^{n-1} match the ratio
    /// (0 when the first factor alone suffices).
    pub required_c: f64,
}

/// Grid sup comparison sup_I|p| / sup_E|p| against the order-(n-1) bound.
/// `e_intervals` are disjoint subintervals of `i_interval`.
pub fn nazarov_turan_check(
    p: &ExpPolynomial,
    i_interval: (f64, f64),
    e_intervals: &[(f64, f64)],
    grid: usize,
) -> Result<NazarovTuranOutcome> {
    let (a, b) = i_interval;
    let e_len: f64 = e_intervals.iter().map(|&(x, y)| y - x).sum();
    if !(b > a) || e_len <= 0.0 {
        return Err(LabError::Param("need |I| > 0 and |E| > 0".into()));
    }
    let n = p.terms.len();
    let grid = grid.max(64);
    let mut sup_i = 0.0f64;
    for g in 0..=grid {
        let x = a + (b - a) * g as f64 / grid as f64;
        sup_i = sup_i.max(p.eval(x).norm());
    }
    let mut sup_e = 0.0f64;
    for &(x0, x1) in e_intervals {
        let m = ((grid as f64 * (x1 - x0) / (b - a)).ceil() as usize).max(32);
        for g in 0..=m {
            let x = x0 + (x1 - x0) * g as f64 / m as f64;
            sup_e = sup_e.max(p.eval(x).norm());
        }
    }
    if sup_e == 0.0 {
        return Err(LabError::ZeroObservation);
    }
    let ratio = sup_i / sup_e;
    let first = ((b - a) * p.max_re_mu()).exp();
    let required_c = if n <= 1 || ratio <= first {
        0.0
    } else {
        (ratio / first).powf(1.0 / (n as f64 - 1.0)) * e_len / (b - a)
    };
    Ok(NazarovTuranOutcome { ratio, required_c })
}
