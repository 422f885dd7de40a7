//! Gauge-function families: evaluation, inversion, and the linear extension
//! above the strict-formula cutoff.
//!
//! The families, written with u = log(1/t):
//!
//! * `HAlpha(a)`:        u^{-1/2} (log u)^{-a}
//! * `HAlphaBeta(a,b)`:  u^{-b} (log u)^{-a}
//! * `FAlphaBeta(a,b,d)`: t^{d-1} u^{-b} (log u)^{-a}
//! * `PowerDelta(d)`:    t^d
//! * `FEps(e)`:          u^{-1/(2+e)}
//!
//! The strict formulas hold on (0, cutoff] with cutoff = e^{-3} by default;
//! beyond the cutoff the gauge continues with a constant-slope linear cap so
//! that it is increasing and continuous on all of (0, oo).

use crate::error::{LabError, Result};
use crate::lognum::LogNum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GaugeFamily {
    HAlpha { alpha: f64 },
    HAlphaBeta { alpha: f64, beta: f64 },
    FAlphaBeta { alpha: f64, beta: f64, d: u32 },
    PowerDelta { delta: f64 },
    FEps { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    #[serde(flatten)]
    pub family: GaugeFamily,
    /// ln of the upper end of the strict-formula domain.
    #[serde(default = "default_ln_cutoff")]
    pub ln_cutoff: f64,
}

fn default_ln_cutoff() -> f64 {
    -3.0
}

impl Gauge {
    pub fn new(family: GaugeFamily) -> Result<Self> {
        let ok = match family {
            GaugeFamily::HAlpha { alpha } => alpha >= 0.0,
            GaugeFamily::HAlphaBeta { alpha, beta } => alpha >= 0.0 && beta >= 0.0,
            GaugeFamily::FAlphaBeta { alpha, beta, d } => alpha >= 0.0 && beta >= 0.0 && d >= 1,
            GaugeFamily::PowerDelta { delta } => delta > 0.0,
            GaugeFamily::FEps { eps } => eps >= 0.0,
        };
        if !ok {
            return Err(LabError::Param(format!("invalid gauge parameters {family:?}")));
        }
        Ok(Gauge {
            family,
            ln_cutoff: default_ln_cutoff(),
        })
    }

    pub fn h_alpha(alpha: f64) -> Self {
        Gauge::new(GaugeFamily::HAlpha { alpha }).unwrap()
    }
    pub fn h_alpha_beta(alpha: f64, beta: f64) -> Self {
        Gauge::new(GaugeFamily::HAlphaBeta { alpha, beta }).unwrap()
    }
    pub fn f_alpha_beta(alpha: f64, beta: f64, d: u32) -> Self {
        Gauge::new(GaugeFamily::FAlphaBeta { alpha, beta, d }).unwrap()
    }
    pub fn power(delta: f64) -> Self {
        Gauge::new(GaugeFamily::PowerDelta { delta }).unwrap()
    }
    pub fn f_eps(eps: f64) -> Self {
        Gauge::new(GaugeFamily::FEps { eps }).unwrap()
    }

    /// ln g at u = log(1/t); valid for u >= -ln_cutoff.
    fn ln_eval_u(&self, u: f64) -> f64 {
        debug_assert!(u >= -self.ln_cutoff - 1e-12);
        match self.family {
            GaugeFamily::HAlpha { alpha } => -0.5 * u.ln() - alpha * u.ln().ln(),
            GaugeFamily::HAlphaBeta { alpha, beta } => -beta * u.ln() - alpha * u.ln().ln(),
            GaugeFamily::FAlphaBeta { alpha, beta, d } => {
                -((d - 1) as f64) * u - beta * u.ln() - alpha * u.ln().ln()
            }
            GaugeFamily::PowerDelta { delta } => -delta * u,
            GaugeFamily::FEps { eps } => -u.ln() / (2.0 + eps),
        }
    }

    /// d(ln g)/du at u; always negative in the strict domain.
    fn dln_eval_du(&self, u: f64) -> f64 {
        match self.family {
            GaugeFamily::HAlpha { alpha } => -0.5 / u - alpha / (u * u.ln()),
            GaugeFamily::HAlphaBeta { alpha, beta } => -beta / u - alpha / (u * u.ln()),
            GaugeFamily::FAlphaBeta { alpha, beta, d } => {
                -((d - 1) as f64) - beta / u - alpha / (u * u.ln())
            }
            GaugeFamily::PowerDelta { delta } => -delta,
            GaugeFamily::FEps { eps } => -1.0 / ((2.0 + eps) * u),
        }
    }

    /// ln g and d(ln g)/du at u = log(1/t), for quadrature against dg.
    pub(crate) fn ln_eval_and_slope_u(&self, u: f64) -> (f64, f64) {
        (self.ln_eval_u(u), self.dln_eval_du(u))
    }

    /// Strict evaluation on (0, cutoff].
    pub fn eval(&self, t: LogNum) -> Result<LogNum> {
        if t.sign != 1 {
            return Err(LabError::Domain("gauge argument must be positive".into()));
        }
        if t.ln_mag > self.ln_cutoff + 1e-12 {
            return Err(LabError::Domain(format!(
                "gauge argument above cutoff: ln t = {} > {}",
                t.ln_mag, self.ln_cutoff
            )));
        }
        Ok(LogNum::from_ln(self.ln_eval_u(-t.ln_mag.min(self.ln_cutoff))))
    }

    /// Value at the cutoff point.
    pub fn at_cutoff(&self) -> LogNum {
        LogNum::from_ln(self.ln_eval_u(-self.ln_cutoff))
    }

    /// Evaluation extended to (0, oo): strict formula below the cutoff,
    /// constant-slope linear continuation above it.
    pub fn eval_extended(&self, t: LogNum) -> Result<LogNum> {
        if t.sign != 1 {
            return Err(LabError::Domain("gauge argument must be positive".into()));
        }
        if t.ln_mag <= self.ln_cutoff {
            return self.eval(t);
        }
        let u_c = -self.ln_cutoff;
        let c = self.ln_cutoff.exp();
        let g_c = self.ln_eval_u(u_c).exp();
        // dg/dt at the cutoff: g * d(ln g)/d(ln t) / t, with d(ln g)/d(ln t) = -d(ln g)/du.
        let slope = g_c * (-self.dln_eval_du(u_c)) / c;
        let g_c = LogNum::from_f64(g_c);
        let slope = LogNum::from_f64(slope);
        let c = LogNum::from_f64(c);
        Ok(g_c + slope * (t - c))
    }

    /// Inverse of the strict evaluation; result lies in (0, cutoff].
    pub fn inverse(&self, y: LogNum) -> Result<LogNum> {
        if y.sign != 1 {
            return Err(LabError::Domain("inverse argument must be positive".into()));
        }
        let ln_y_max = self.ln_eval_u(-self.ln_cutoff);
        if y.ln_mag > ln_y_max + 1e-12 {
            return Err(LabError::Domain(format!(
                "inverse argument above g(cutoff): ln y = {} > {}",
                y.ln_mag, ln_y_max
            )));
        }
        let target = y.ln_mag.min(ln_y_max);
        // Closed forms where the log-log factor is absent.
        match self.family {
            GaugeFamily::PowerDelta { delta } => {
                return Ok(LogNum::from_ln(target / delta));
            }
            GaugeFamily::FEps { eps } => {
                let u = (-(2.0 + eps) * target).exp();
                if !u.is_finite() {
                    return Err(LabError::Domain("inverse argument too small for f_eps".into()));
                }
                return Ok(LogNum::from_ln(-u));
            }
            GaugeFamily::HAlpha { alpha } if alpha == 0.0 => {
                let u = (-2.0 * target).exp();
                if !u.is_finite() {
                    return Err(LabError::Domain("inverse argument too small for h_0".into()));
                }
                return Ok(LogNum::from_ln(-u));
            }
            GaugeFamily::HAlphaBeta { alpha, beta } if alpha == 0.0 => {
                let u = (-target / beta).exp();
                if !u.is_finite() {
                    return Err(LabError::Domain("inverse argument too small".into()));
                }
                return Ok(LogNum::from_ln(-u));
            }
            _ => {}
        }
        self.inverse_bisect(target).map(|u| LogNum::from_ln(-u))
    }

    /// Solve ln_eval_u(u) = target for u by bracketing bisection plus a
    /// Newton polish. ln_eval_u is strictly decreasing.
    fn inverse_bisect(&self, target: f64) -> Result<f64> {
        let mut lo = -self.ln_cutoff;
        if self.ln_eval_u(lo) < target {
            // Root is at the cutoff end (within rounding).
            return Ok(lo);
        }
        let mut hi = lo * 2.0;
        let mut guard = 0;
        while self.ln_eval_u(hi) > target {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 70 || !hi.is_finite() {
                return Err(LabError::NoConvergence(
                    "inverse bracket expansion exhausted".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_eval_u(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-13 * hi {
                break;
            }
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..8 {
            let f = self.ln_eval_u(u) - target;
            let df = self.dln_eval_du(u);
            let step = f / df;
            let next = u - step;
            if next > lo && next < hi {
                u = next;
            } else {
                break;
            }
            if step.abs() <= 1e-14 * u {
                break;
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_close(a: LogNum, b: LogNum, tol: f64) -> bool {
        a.sign == b.sign && (a.ln_mag - b.ln_mag).abs() <= tol * b.ln_mag.abs().max(1.0)
    }

    #[test]
    fn h0_anchor_values() {
        let g = Gauge::h_alpha(0.0);
        // h_0(e^{-4}) = 1/2.
        let v = g.eval(LogNum::from_ln(-4.0)).unwrap();
        assert!((v.to_f64() - 0.5).abs() < 1e-14);
        // h_0(c_k) = 2^{-k} with c_k = e^{-2^{2k}}, k = 1..20.
        for k in 1..=20u32 {
            let t = LogNum::from_ln(-(2f64.powi(2 * k as i32)));
            let v = g.eval(t).unwrap();
            let expect = -(k as f64) * std::f64::consts::LN_2;
            assert!((v.ln_mag - expect).abs() < 1e-10 * expect.abs());
        }
    }

    #[test]
    fn h_alpha_one_anchor() {
        // h_1(e^{-e^2}) = (e^2)^{-1/2} (log e^2)^{-1} = 1/(2e).
        let g = Gauge::h_alpha(1.0);
        let t = LogNum::from_ln(-(2f64.exp()));
        let v = g.eval(t).unwrap().to_f64();
        let expect = 1.0 / (2.0 * std::f64::consts::E);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn h0_inverse_closed_form() {
        let g = Gauge::h_alpha(0.0);
        let t = g.inverse(LogNum::from_f64(0.5)).unwrap();
        assert!((t.ln_mag + 4.0).abs() < 1e-12);
    }

    #[test]
    fn round_trips_all_families() {
        let gauges = [
            Gauge::h_alpha(0.0),
            Gauge::h_alpha(1.0),
            Gauge::h_alpha(2.5),
            Gauge::h_alpha_beta(2.0, 1.5),
            Gauge::f_alpha_beta(2.0, 1.5, 2),
            Gauge::power(0.7),
            Gauge::f_eps(1.0),
        ];
        for g in gauges {
            let mut ln_t = -3.0;
            while ln_t > -1e6 {
                let t = LogNum::from_ln(ln_t);
                let back = g.inverse(g.eval(t).unwrap()).unwrap();
                assert!(
                    (back.ln_mag - ln_t).abs() <= 1e-10 * ln_t.abs(),
                    "{g:?} ln t = {ln_t}: got {}",
                    back.ln_mag
                );
                ln_t *= 3.1;
            }
        }
    }

    #[test]
    fn inverse_matches_fixed_point_oracle() {
        // h_1 inverse of h_1(H)/n solves x = n^2 X (ln X / ln x)^{2a}
        // with x = log(1/t), X = log(1/H). Iterate that form directly as an
        // independent oracle.
        let alpha = 1.0;
        let g = Gauge::h_alpha(alpha);
        let big_x: f64 = 10.0; // H = e^{-10}
        let n: f64 = 8.0;
        let mut x = n * n * big_x;
        for _ in 0..200 {
            x = n * n * big_x * (big_x.ln() / x.ln()).powf(2.0 * alpha);
        }
        let y = g.eval(LogNum::from_ln(-big_x)).unwrap().scale(1.0 / n);
        let t = g.inverse(y).unwrap();
        assert!(
            ((-t.ln_mag) - x).abs() <= 1e-6 * x,
            "solver {} vs oracle {x}",
            -t.ln_mag
        );
    }

    #[test]
    fn monotone_and_dominated() {
        let fams = [
            Gauge::h_alpha(1.0),
            Gauge::h_alpha_beta(1.0, 2.0),
            Gauge::f_alpha_beta(1.0, 2.0, 2),
            Gauge::power(1.0),
            Gauge::f_eps(0.5),
        ];
        let f0 = Gauge::f_eps(0.0);
        let h2 = Gauge::h_alpha(2.0);
        let mut prev: Vec<Option<LogNum>> = vec![None; fams.len()];
        let mut ln_t = -800.0;
        while ln_t <= -3.0 {
            for (i, g) in fams.iter().enumerate() {
                let v = g.eval(LogNum::from_ln(ln_t)).unwrap();
                if let Some(p) = prev[i] {
                    assert!(p < v, "monotonicity of {g:?}");
                }
                prev[i] = Some(v);
            }
            // h_alpha < f_0 for alpha > 0 and t <= e^{-e}.
            let t = LogNum::from_ln(ln_t);
            assert!(h2.eval(t).unwrap() < f0.eval(t).unwrap());
            ln_t += 12.34;
        }
    }

    #[test]
    fn f_alpha_beta_d1_matches_h_alpha_beta() {
        let f = Gauge::f_alpha_beta(1.5, 2.0, 1);
        let h = Gauge::h_alpha_beta(1.5, 2.0);
        for ln_t in [-3.0, -10.0, -123.4, -9999.0] {
            let t = LogNum::from_ln(ln_t);
            assert!(ln_close(f.eval(t).unwrap(), h.eval(t).unwrap(), 1e-14));
        }
    }

    #[test]
    fn extension_is_continuous_and_monotone() {
        for g in [Gauge::h_alpha(0.0), Gauge::power(1.0), Gauge::h_alpha_beta(1.0, 1.0)] {
            let at_cut = g.eval(LogNum::from_ln(g.ln_cutoff)).unwrap();
            let just_above = g.eval_extended(LogNum::from_ln(g.ln_cutoff + 1e-9)).unwrap();
            assert!((just_above.to_f64() - at_cut.to_f64()).abs() < 1e-8);
            let mut prev = at_cut;
            for t in [0.06, 0.1, 0.5, 1.0, 2.0, 10.0] {
                let v = g.eval_extended(LogNum::from_f64(t)).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn eval_vanishes_at_tiny_arguments() {
        // Values along t = e^{-10^k} decrease toward zero.
        for g in [Gauge::h_alpha(0.0), Gauge::h_alpha(3.0), Gauge::f_eps(1.0)] {
            let mut prev = f64::INFINITY;
            for k in 1..=6 {
                let v = g.eval(LogNum::from_ln(-(10f64.powi(k)))).unwrap();
                let x = v.to_f64();
                assert!(x < prev);
                prev = x;
            }
            assert!(prev < 1.1e-2);
        }
    }

    #[test]
    fn domain_errors() {
        let g = Gauge::h_alpha(1.0);
        assert!(g.eval(LogNum::from_f64(0.5)).is_err());
        assert!(g.eval(LogNum::ZERO).is_err());
        let above = g.at_cutoff() + LogNum::from_f64(0.1);
        assert!(g.inverse(above).is_err());
    }
}
