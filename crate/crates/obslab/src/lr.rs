//! Iterative time-slicing schedule for the observability estimate: the wait
//! times tau(lambda), the geometric frequency ladder lambda_k = (5/4)^{k-1}
//! lambda_1, certified tail sums T_n, and the resulting observability cost
//! constant, including the alpha > 3/2 convergence threshold.
//!
//! All frequency arithmetic runs on ln lambda: the ladder overflows f64
//! after ~3100 steps, and small target times T push the feasible index far
//! beyond that.

use crate::error::{LabError, Result};
use crate::lognum::LogNum;
use serde::{Deserialize, Serialize};

pub const Q: f64 = 1.25;

/// psi(t) = t ln t.
fn psi(t: f64) -> f64 {
    t * t.ln()
}

/// phi(lambda) = (ln lambda)^{2 alpha / 3}, on u = ln lambda.
fn phi_ln(u: f64, alpha: f64) -> f64 {
    u.powf(2.0 * alpha / 3.0)
}

/// Inverse of psi on the increasing branch t > 1, by safeguarded Newton.
/// Requires y > 0; relative tolerance 1e-12.
pub fn psi_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(LabError::Domain(format!("psi inverse needs y > 0, got {y}")));
    }
    // psi is convex increasing on t > 1; starting above the root keeps
    // Newton monotone. For y >= e, t = y works (psi(y) >= y there).
    let mut t = if y >= std::f64::consts::E { y } else { std::f64::consts::E };
    for _ in 0..200 {
        let step = (psi(t) - y) / (t.ln() + 1.0);
        let next = (t - step).max(1.0 + 1e-15);
        if (next - t).abs() <= 1e-12 * t {
            return Ok(next);
        }
        t = next;
    }
    Err(LabError::NoConvergence("psi inverse Newton".into()))
}

/// Smallest lambda with phi(lambda)/(4C) > e, the domain threshold for tau.
pub fn lambda_threshold(alpha: f64, c: f64) -> f64 {
    ((4.0 * c * std::f64::consts::E).powf(3.0 / (2.0 * alpha))).exp()
}

/// tau on u = ln lambda: 1/tau = psi^{[-1]}(phi/(4C)).
pub fn tau_ln(u: f64, alpha: f64, c: f64) -> Result<f64> {
    let y = phi_ln(u, alpha) / (4.0 * c);
    if !(y > std::f64::consts::E) {
        return Err(LabError::Domain(format!(
            "ln lambda = {u} below tau threshold ln lambda = {}",
            lambda_threshold(alpha, c).ln()
        )));
    }
    Ok(1.0 / psi_inverse(y)?)
}

/// Wait time: 1/tau(lambda) = psi^{[-1]}(phi(lambda)/(4C)).
pub fn tau(lambda: f64, alpha: f64, c: f64) -> Result<f64> {
    tau_ln(lambda.ln(), alpha, c)
}

/// Upper bound tau <= ln(y)/y with y = phi/(4C), valid on the domain:
/// psi(y/ln y) = y (1 - lnln y / ln y) <= y for y >= e, so
/// psi^{[-1]}(y) >= y/ln y.
#[cfg(test)]
fn tau_upper_ln(u: f64, alpha: f64, c: f64) -> f64 {
    let y = phi_ln(u, alpha) / (4.0 * c);
    y.ln() / y
}

/// Lower bound tau >= ln(y)/(2y): psi(2y/ln y) >= y for y >= e.
fn tau_lower_ln(u: f64, alpha: f64, c: f64) -> f64 {
    let y = phi_ln(u, alpha) / (4.0 * c);
    y.ln() / (2.0 * y)
}

/// Certified bound for T_m = sum_{k >= m} tau(q^{k-1} lambda_1) via the
/// integral test (tau is decreasing on the domain): each term is dominated
/// by the integral over the preceding unit interval, so the sum is at most
/// int_{m-2}^infty tau_ub(q^s lambda_1) ds, evaluated with the closed form
/// int u^{-p} ln u du = u^{1-p}(ln u/(p-1) + 1/(p-1)^2), p = 2 alpha/3 > 1.
fn tail_integral(m: u64, ln_lambda1: f64, alpha: f64, c: f64) -> Result<f64> {
    let p = 2.0 * alpha / 3.0;
    if p <= 1.0 {
        return Err(LabError::Domain("tail integral needs alpha > 3/2".into()));
    }
    let u0 = (m as f64 - 2.0) * Q.ln() + ln_lambda1;
    if u0 <= 1.0 || phi_ln(u0, alpha) <= 4.0 * c * std::f64::consts::E {
        return Err(LabError::Domain("tail start below tau threshold".into()));
    }
    let pm1 = p - 1.0;
    let bracket = p * (u0.ln() / pm1 + 1.0 / (pm1 * pm1)) - (4.0 * c).ln() / pm1;
    Ok(4.0 * c / Q.ln() * u0.powf(1.0 - p) * bracket)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub k: usize,
    /// ln lambda_k (lambda itself may exceed f64 range deep in the table).
    pub ln_lambda: f64,
    pub lambda: f64,
    pub tau: f64,
    /// Certified upper bound for T_k = sum_{j >= k} tau_j.
    pub t_tail: f64,
    /// f(lambda_k) = (1/(2 sqrt L)) e^{-lambda_k tau_k / 4}, and its ln.
    pub f: f64,
    pub ln_f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LRSchedule {
    pub alpha: f64,
    pub c: f64,
    pub l: f64,
    pub lambda1: f64,
    pub rows: Vec<ScheduleRow>,
}

pub fn schedule(lambda1: f64, alpha: f64, c: f64, l: f64, n_max: usize) -> Result<LRSchedule> {
    if n_max == 0 || l <= 0.0 || lambda1 <= 1.0 {
        return Err(LabError::Param("need n_max >= 1, L > 0, lambda1 > 1".into()));
    }
    let u1 = lambda1.ln();
    let mut taus = Vec::with_capacity(n_max);
    for k in 0..n_max {
        taus.push(tau_ln(u1 + k as f64 * Q.ln(), alpha, c)?);
    }
    // T_n = tau_n + ... + tau_{n_max} + certified tail beyond the table
    // (closed form; only needed when the series converges).
    let tail_beyond = tail_integral(n_max as u64 + 1, u1, alpha, c)?;
    let mut t_tails = vec![0.0; n_max];
    let mut acc = tail_beyond;
    for k in (0..n_max).rev() {
        acc += taus[k];
        t_tails[k] = acc;
    }
    let rows = (0..n_max)
        .map(|k| {
            let u = u1 + k as f64 * Q.ln();
            // lambda tau / 4 in ln space so deep rows degrade to f = 0
            // rather than poisoning the exponent.
            let ln_lam_tau = u + taus[k].ln();
            let ln_f = if ln_lam_tau < 709.0 {
                -(2.0 * l.sqrt()).ln() - ln_lam_tau.exp() / 4.0
            } else {
                f64::NEG_INFINITY
            };
            ScheduleRow {
                k: k + 1,
                ln_lambda: u,
                lambda: u.exp(),
                tau: taus[k],
                t_tail: t_tails[k],
                f: ln_f.exp(),
                ln_f,
            }
        })
        .collect();
    Ok(LRSchedule {
        alpha,
        c,
        l,
        lambda1,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub target: f64,
    pub k_reached: usize,
    pub partial_sum: f64,
    /// Integral-test lower bound accumulated over the same range.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceOutcome {
    pub converges: bool,
    pub t1_bound: Option<f64>,
    pub witness: Option<DivergenceWitness>,
}

/// alpha > 3/2: certified T_1 upper bound. Otherwise: partial sums of
/// tau_k driven past 10x the alpha = 2 reference bound (or 100 if that
/// reference is itself out of domain).
pub fn convergence_test(alpha: f64, c: f64, l: f64, lambda1: f64) -> Result<ConvergenceOutcome> {
    let _ = l;
    if alpha > 1.5 {
        let sched = schedule(lambda1, alpha, c, 1.0, 8)?;
        return Ok(ConvergenceOutcome {
            converges: true,
            t1_bound: Some(sched.rows[0].t_tail),
            witness: None,
        });
    }
    let target = match schedule(lambda1, 2.0, c, 1.0, 8) {
        Ok(s) => 10.0 * s.rows[0].t_tail,
        Err(_) => 100.0,
    };
    let u1 = lambda1.ln();
    let mut partial = 0.0;
    let mut lower = 0.0;
    for k in 1..=100_000_000usize {
        let u = u1 + (k - 1) as f64 * Q.ln();
        partial += tau_ln(u, alpha, c)?;
        lower += tau_lower_ln(u, alpha, c);
        if partial > target {
            return Ok(ConvergenceOutcome {
                converges: false,
                t1_bound: None,
                witness: Some(DivergenceWitness {
                    target,
                    k_reached: k,
                    partial_sum: partial,
                    lower_bound: lower,
                }),
            });
        }
    }
    Err(LabError::NoConvergence(
        "divergence witness not reached within iteration budget".into(),
    ))
}

/// Largest tau such that ln(1/tau) + b <= ln(1/tau) b for every ladder
/// frequency, i.e. (a - 1)(b - 1) >= 1 with a = ln(1/tau) and
/// b = C lambda/phi(lambda): tau <= e^{-1 - 1/(b_min - 1)}. On u = ln
/// lambda, b = C e^u u^{-p} has its minimum at u = max(ln lambda_1, p).
pub fn t0_threshold(alpha: f64, c: f64, lambda1: f64) -> Result<f64> {
    let p = 2.0 * alpha / 3.0;
    let u_star = lambda1.ln().max(p);
    let b_min = c * u_star.exp() / phi_ln(u_star, alpha);
    if b_min <= 1.0 {
        return Err(LabError::Domain(format!(
            "C lambda / phi(lambda) = {b_min} <= 1: no valid T0"
        )));
    }
    Ok((-1.0 - 1.0 / (b_min - 1.0)).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub n: u64,
    pub t_n: f64,
    pub t0: f64,
    pub ln_lambda_n: f64,
    /// ln C_obs = ln(2 sqrt L) + lambda_N tau_N / 4 as a LogNum: for small
    /// T the exponent itself leaves f64 range.
    pub ln_c_obs: LogNum,
    /// C_obs as f64 where representable, +inf otherwise.
    pub c_obs: f64,
}

/// T_n certified bound without a table walk (closed form), monotone
/// decreasing in n on the domain.
fn t_bound(n: u64, ln_lambda1: f64, alpha: f64, c: f64) -> Result<f64> {
    Ok(tau_ln(ln_lambda1 + (n as f64 - 1.0) * Q.ln(), alpha, c)?
        + tail_integral(n + 1, ln_lambda1, alpha, c)?)
}

/// Smallest N with T_N <= min(T, T0); C_obs = 1/f(lambda_N).
pub fn cost_constant(t: f64, alpha: f64, c: f64, l: f64, lambda1: f64) -> Result<CostReport> {
    if !(t > 0.0) || l <= 0.0 {
        return Err(LabError::Param("need T > 0 and L > 0".into()));
    }
    if alpha <= 1.5 {
        return Err(LabError::Domain("cost constant needs alpha > 3/2".into()));
    }
    let u1 = lambda1.ln();
    // Validate the first row's domain up front.
    tau_ln(u1, alpha, c)?;
    let t0 = t0_threshold(alpha, c, lambda1)?;
    let cap = t.min(t0);
    let n_cap: u64 = 1 << 50;
    if !(t_bound(n_cap, u1, alpha, c)? <= cap) {
        return Err(LabError::NoFeasibleN(n_cap as usize));
    }
    // Binary search the smallest feasible N (t_bound decreasing in n).
    let mut lo: u64 = 1; // lo - 1 infeasible (or lo == 1)
    let mut hi: u64 = n_cap; // feasible
    if t_bound(1, u1, alpha, c)? <= cap {
        hi = 1;
    } else {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if t_bound(mid, u1, alpha, c)? <= cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let n = hi;
    let t_n = t_bound(n, u1, alpha, c)?;
    let u_n = u1 + (n as f64 - 1.0) * Q.ln();
    let tau_n = tau_ln(u_n, alpha, c)?;
    let ln_c_obs = LogNum::from_f64((2.0 * l.sqrt()).ln())
        + LogNum::from_ln(u_n + tau_n.ln()).scale(0.25);
    let c_obs = {
        let v = ln_c_obs.to_f64();
        if v < 709.0 {
            v.exp()
        } else {
            f64::INFINITY
        }
    };
    Ok(CostReport {
        n,
        t_n,
        t0,
        ln_lambda_n: u_n,
        ln_c_obs,
        c_obs,
    })
}

/// Empirical crossover for absorbing the t^{-1/4} factor: the first ladder
/// frequency where a0 (6/tau)^{1/4} e^{-lambda tau/3} + f(lambda)
/// e^{-lambda tau} <= f((5/4) lambda).
pub fn recurrence_crossover(sched: &LRSchedule, a0: f64) -> Option<usize> {
    for w in sched.rows.windows(2) {
        let (r, next) = (&w[0], &w[1]);
        let lam_tau = (r.ln_lambda + r.tau.ln()).exp();
        let lhs = a0 * (6.0 / r.tau).powf(0.25) * (-lam_tau / 3.0).exp()
            + (r.ln_f - lam_tau).exp();
        if lhs <= next.f {
            return Some(r.k);
        }
    }
    None
}
