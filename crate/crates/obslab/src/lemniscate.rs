//! Cartan covers of polynomial sublevel sets and lemniscate content bounds.
//!
//! For a monic polynomial P of degree n and a gauge f, the radii
//! r_j = f^{[-1]}(j f(H)/n)/4 produce a cover of E(P; prod r_j) by at most n
//! balls with multiplicities summing to n and total gauge content exactly
//! f(H). The smallness threshold (g_n(H)/4)^n is computed by adaptive
//! quadrature of int f(s)/s ds on a log axis. Sublevel sets live at scales
//! far below f64 range (thresholds like e^{-9000}), so sampling and the
//! empirical content estimate work in log-polar coordinates anchored at the
//! zeros.

use crate::error::{LabError, Result};
use crate::gauge::Gauge;
use crate::lognum::LogNum;
use crate::rng::trial_rng;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct Polynomial {
    pub leading: Complex64,
    pub roots: Vec<Complex64>,
}

impl Polynomial {
    pub fn monic(roots: Vec<Complex64>) -> Self {
        Polynomial {
            leading: Complex64::new(1.0, 0.0),
            roots,
        }
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    /// ln |P(z)| from the root product; exact for zeros far below f64 range.
    pub fn ln_abs(&self, z: Complex64) -> LogNum {
        let mut acc = LogNum::from_f64(self.leading.norm());
        for r in &self.roots {
            acc = acc * LogNum::from_f64((z - r).norm());
        }
        acc
    }

    /// Monomial coefficients, highest degree first.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut c = vec![self.leading];
        for r in &self.roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i] += ci;
                next[i + 1] -= ci * r;
            }
            c = next;
        }
        c
    }

    /// Horner evaluation from expanded coefficients (oracle for ln_abs).
    pub fn eval_horner(&self, z: Complex64) -> Complex64 {
        self.coefficients()
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: (f64, f64),
    pub diameter: LogNum,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallCover {
    pub balls: Vec<CoverBall>,
}

impl BallCover {
    pub fn multiplicity_sum(&self) -> usize {
        self.balls.iter().map(|b| b.multiplicity).sum()
    }
}

/// r_j = f^{[-1]}(j f(H)/n)/4, strictly increasing, r_n = H/4 exactly.
pub fn cartan_radii(g: &Gauge, h: LogNum, n: usize) -> Result<Vec<LogNum>> {
    if n < 1 {
        return Err(LabError::Param("cartan_radii needs n >= 1".into()));
    }
    let fh = g.eval(h)?;
    let mut radii = Vec::with_capacity(n);
    for j in 1..=n {
        let r = if j == n {
            h.scale(0.25)
        } else {
            g.inverse(fh.scale(j as f64 / n as f64))?.scale(0.25)
        };
        if let Some(&prev) = radii.last() {
            if !(r > prev) {
                return Err(LabError::Param(format!("radii not increasing at j = {j}")));
            }
        }
        radii.push(r);
    }
    Ok(radii)
}

/// Adaptive Simpson quadrature with a relative tolerance in the result.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if diff.abs() <= 15.0 * eps {
            return Ok(left + right + diff / 15.0);
        }
        if depth == 0 {
            return Err(LabError::Quadrature(format!(
                "tolerance unreachable on [{a}, {b}]"
            )));
        }
        Ok(rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Crude magnitude estimate for the absolute tolerance.
    let scale = whole.abs().max((b - a).abs() * fm.abs()).max(1e-300);
    rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 56)
}

/// The smallness threshold (g_n(H)/4)^n
///   = 4^{-n} exp{ n (log H - (1/f(H)) int_{f^{[-1]}(f(H)/n)}^{H} f(s)/s ds) }.
pub fn lubinsky_threshold(g: &Gauge, h: LogNum, n: usize) -> Result<LogNum> {
    if n < 1 {
        return Err(LabError::Param("lubinsky_threshold needs n >= 1".into()));
    }
    let ln4 = 4f64.ln();
    if n == 1 {
        return Ok(h.scale(0.25));
    }
    let fh = g.eval(h)?;
    let t1 = g.inverse(fh.scale(1.0 / n as f64))?;
    // x = ln s; integrand f(e^x), moderate values throughout the range.
    let integrand = move |x: f64| g.eval(LogNum::from_ln(x)).expect("in domain").to_f64();
    let integral = adaptive_simpson(&integrand, t1.ln_mag, h.ln_mag, 1e-9)?;
    let exponent = n as f64 * (h.ln_mag - integral / fh.to_f64());
    Ok(LogNum::from_ln(-(n as f64) * ln4 + exponent))
}

/// Circumcenter of a triangle; None when (nearly) collinear.
fn circumcenter(a: Complex64, b: Complex64, c: Complex64) -> Option<Complex64> {
    let d = 2.0 * (a.re * (b.im - c.im) + b.re * (c.im - a.im) + c.re * (a.im - b.im));
    if d.abs() < 1e-14 * (a.norm() + b.norm() + c.norm() + 1.0).powi(2) {
        return None;
    }
    let ux = (a.norm_sqr() * (b.im - c.im) + b.norm_sqr() * (c.im - a.im)
        + c.norm_sqr() * (a.im - b.im))
        / d;
    let uy = (a.norm_sqr() * (c.re - b.re) + b.norm_sqr() * (a.re - c.re)
        + c.norm_sqr() * (b.re - a.re))
        / d;
    Some(Complex64::new(ux, uy))
}

/// Candidate disc centers: any disc containing a point set shrinks to its
/// minimal enclosing circle, whose center is a point, a midpoint, or a
/// circumcenter of three points of the set.
fn candidate_centers(points: &[Complex64]) -> Vec<Complex64> {
    let mut cands = points.to_vec();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            cands.push(0.5 * (points[i] + points[j]));
            for k in (j + 1)..points.len() {
                if let Some(c) = circumcenter(points[i], points[j], points[k]) {
                    cands.push(c);
                }
            }
        }
    }
    cands
}

/// Greedy Cartan selection: repeatedly pick the largest lambda such that some
/// disc of radius r_lambda holds >= lambda of the remaining zeros. The
/// returned cover is gated by `verify_cover` with `samples` sublevel samples.
pub fn cartan_cover_with(
    p: &Polynomial,
    radii: &[LogNum],
    samples: usize,
    seed: u64,
) -> Result<BallCover> {
    let n = p.degree();
    if radii.len() != n || n == 0 {
        return Err(LabError::Param("need one radius per root".into()));
    }
    let mut remaining = p.roots.clone();
    let mut balls = Vec::new();
    while !remaining.is_empty() {
        let m = remaining.len();
        let cands = candidate_centers(&remaining);
        let mut chosen: Option<(Complex64, Vec<usize>)> = None;
        'lambda: for lam in (1..=m).rev() {
            let r = radii[lam - 1];
            for &c in &cands {
                let inside: Vec<usize> = (0..m)
                    .filter(|&i| LogNum::from_f64((remaining[i] - c).norm()) <= r)
                    .collect();
                if inside.len() >= lam {
                    chosen = Some((c, inside));
                    break 'lambda;
                }
            }
        }
        let (center, mut inside) =
            chosen.ok_or_else(|| LabError::DegenerateSet("no covering disc found".into()))?;
        let lam = inside.len().min(n);
        balls.push(CoverBall {
            center: (center.re, center.im),
            diameter: radii[lam - 1].scale(4.0),
            multiplicity: lam,
        });
        inside.sort_unstable_by(|a, b| b.cmp(a));
        for i in inside {
            remaining.swap_remove(i);
        }
    }
    let cover = BallCover { balls };
    debug_assert_eq!(cover.multiplicity_sum(), n);
    let threshold = radii.iter().fold(LogNum::ONE, |a, &r| a * r);
    let violations = verify_cover(p, threshold, &cover, samples, seed)?;
    if !violations.is_empty() {
        return Err(LabError::CoverageFailure(violations.len()));
    }
    Ok(cover)
}

pub fn cartan_cover(p: &Polynomial, radii: &[LogNum]) -> Result<BallCover> {
    cartan_cover_with(p, radii, 4000, 0)
}

/// Sum of g(d(B)) over the cover; for Cartan radii under their generating
/// gauge this equals g(H) exactly.
pub fn content_of_cover(cover: &BallCover, g: &Gauge) -> Result<LogNum> {
    let mut total = LogNum::ZERO;
    for b in &cover.balls {
        total = total + g.eval_extended(b.diameter)?;
    }
    Ok(total)
}

/// A point of the sublevel set found outside every cover ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub re: f64,
    pub im: f64,
    /// For zero-anchored samples: ln of the offset from the anchoring zero.
    pub ln_delta: Option<f64>,
}

/// ln rho_j: crude scale of the sublevel component around root j, from
/// |P(z_j + rho)| ~ rho^m prod_{far} |z_j - z_l| with m the local root
/// multiplicity cluster.
fn component_scale(p: &Polynomial, j: usize, ln_threshold: f64) -> f64 {
    let zj = p.roots[j];
    let mut m = 0.0;
    let mut far = 0.0;
    for (l, &zl) in p.roots.iter().enumerate() {
        let d = (zj - zl).norm();
        if l == j || d <= 1e-12 {
            m += 1.0;
        } else {
            far += d.ln();
        }
    }
    (ln_threshold - p.leading.norm().ln() - far) / m
}

/// Stable |w + delta e^{i theta}| with w a plain complex number and delta in
/// log range; exact when w = 0, and within the [| |w|-delta |, |w|+delta ]
/// envelope otherwise.
fn offset_factor(w: Complex64, delta: LogNum, theta: f64) -> LogNum {
    let wn = w.norm();
    if wn == 0.0 {
        return delta;
    }
    if delta.ln_mag < wn.ln() - 40.0 {
        // Offset is invisible at f64 precision.
        return LogNum::from_f64(wn);
    }
    let d = delta.to_f64();
    LogNum::from_f64((w + Complex64::from_polar(d, theta)).norm())
}

/// Sample the sublevel set {|P| <= threshold} and report points not covered
/// by any ball. Mixes uniform box samples with zero-anchored log-radial
/// samples; anchored membership and coverage use interval bounds, so every
/// reported violation is genuine.
pub fn verify_cover(
    p: &Polynomial,
    threshold: LogNum,
    cover: &BallCover,
    samples: usize,
    seed: u64,
) -> Result<Vec<Violation>> {
    let n = p.degree();
    if n == 0 || threshold.sign != 1 {
        return Err(LabError::Param("degree >= 1 and positive threshold".into()));
    }
    let (mut re_lo, mut re_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut im_lo, mut im_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &p.roots {
        re_lo = re_lo.min(r.re);
        re_hi = re_hi.max(r.re);
        im_lo = im_lo.min(r.im);
        im_hi = im_hi.max(r.im);
    }
    // Pad by 2 r_n >= 2 threshold^{1/n}; the sublevel set lies within r_n of
    // the zero set.
    let pad = (2.0 * (threshold.ln_mag / n as f64).exp()).max(1e-9);
    re_lo -= pad;
    re_hi += pad;
    im_lo -= pad;
    im_hi += pad;
    let span = (re_hi - re_lo).max(im_hi - im_lo);

    let mut rng = trial_rng(seed, 0xCA27A);
    let mut violations = Vec::new();
    let n_uniform = samples / 4;
    for s in 0..samples {
        if s < n_uniform {
            let z = Complex64::new(
                rng.gen_range(re_lo..=re_hi),
                rng.gen_range(im_lo..=im_hi),
            );
            let v = p.ln_abs(z);
            if v > threshold {
                continue;
            }
            // Padding sanity: accepted points must not graze the box edge.
            let edge = (z.re - re_lo)
                .min(re_hi - z.re)
                .min(z.im - im_lo)
                .min(im_hi - z.im);
            if edge < 1e-3 * pad {
                return Err(LabError::BoundViolation(
                    "sublevel sample at sampling-box boundary".into(),
                ));
            }
            let covered = cover.balls.iter().any(|b| {
                let c = Complex64::new(b.center.0, b.center.1);
                LogNum::from_f64((z - c).norm()) <= b.diameter.scale(0.5)
            });
            if !covered {
                violations.push(Violation {
                    re: z.re,
                    im: z.im,
                    ln_delta: None,
                });
            }
        } else {
            // Anchored: z = z_j + delta e^{i theta}, ln delta uniform around
            // the component scale of root j.
            let j = rng.gen_range(0..n);
            let base = component_scale(p, j, threshold.ln_mag);
            let ln_delta = rng.gen_range((base - 60.0)..=(span.ln() + 1.0));
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let delta = LogNum::from_ln(ln_delta);
            let zj = p.roots[j];
            let mut upper = LogNum::from_f64(p.leading.norm()) * delta;
            for (l, &zl) in p.roots.iter().enumerate() {
                if l != j {
                    upper = upper * (LogNum::from_f64((zj - zl).norm()) + delta);
                }
            }
            if upper > threshold {
                continue;
            }
            let covered = cover.balls.iter().any(|b| {
                let c = Complex64::new(b.center.0, b.center.1);
                // Lower bound for |z - c| over all theta placements.
                let lo = (LogNum::from_f64((zj - c).norm()) - delta).abs();
                lo <= b.diameter.scale(0.5)
            });
            if !covered {
                let zf = zj + Complex64::from_polar(ln_delta.exp(), theta);
                violations.push(Violation {
                    re: zf.re,
                    im: zf.im,
                    ln_delta: Some(ln_delta),
                });
            }
        }
    }
    Ok(violations)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CartanBoundBreakdown {
    pub ln_h: f64,
    pub n: usize,
    pub a: f64,
    pub xi: f64,
    pub xi_lower: f64,
    pub threshold: LogNum,
    pub rhs_bound: LogNum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemniscateRhs {
    /// (log 1/(4 delta))^{-1/2} n^{1/2} (log(n+e))^{-alpha/3}, constant-free.
    pub rhs_shape: f64,
    pub breakdown: CartanBoundBreakdown,
}

/// Constant-free right-hand side of the lemniscate content bound, with the
/// H/A/Xi breakdown recovered by solving lubinsky_threshold(h_alpha, H, n)
/// = delta^n for H.
pub fn lemniscate_bound_rhs(alpha: f64, delta: LogNum, n: usize) -> Result<LemniscateRhs> {
    if delta.sign != 1 || delta.ln_mag >= 0.0 || n < 1 {
        return Err(LabError::Param("need delta in (0,1) and n >= 1".into()));
    }
    let log_4d_inv = -(delta.ln_mag + 4f64.ln());
    if log_4d_inv <= 0.0 {
        return Err(LabError::Param("need delta < 1/4".into()));
    }
    let nf = n as f64;
    let rhs_shape = log_4d_inv.powf(-0.5)
        * nf.sqrt()
        * (nf + std::f64::consts::E).ln().powf(-alpha / 3.0);

    let g = Gauge::h_alpha(alpha);
    let target = nf * delta.ln_mag;
    let f = |ln_h: f64| -> Result<f64> {
        Ok(lubinsky_threshold(&g, LogNum::from_ln(ln_h), n)?.ln_mag)
    };
    let hi = g.ln_cutoff;
    if f(hi)? < target {
        return Err(LabError::NoRoot(format!(
            "delta^n above threshold range (n = {n})"
        )));
    }
    let mut lo = hi * 2.0;
    let mut guard = 0;
    while f(lo)? > target {
        lo *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(LabError::NoRoot("bracket expansion exhausted".into()));
        }
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= 1e-12 * hi.abs() {
            break;
        }
    }
    let ln_h = 0.5 * (lo + hi);
    let h = LogNum::from_ln(ln_h);
    let t = g.inverse(g.eval(h)?.scale(1.0 / nf))?;
    let llh = (-ln_h).ln().ln();
    let llt = (-t.ln_mag).ln().ln();
    let xi = 2.0 * alpha * (llh.exp() / llt.exp()).ln();
    let xi_lower = -(2.0 * alpha / (2.0 * alpha + 1.0)) * (nf * nf).ln();
    let a = llh.exp() / ((nf * nf).ln() + llh.exp() + xi);
    if !(xi >= xi_lower - 1e-9 && xi <= 1e-9) {
        return Err(LabError::BoundViolation(format!(
            "Xi = {xi} outside [{xi_lower}, 0]"
        )));
    }
    let threshold = lubinsky_threshold(&g, h, n)?;
    Ok(LemniscateRhs {
        rhs_shape,
        breakdown: CartanBoundBreakdown {
            ln_h,
            n,
            a,
            xi,
            xi_lower,
            threshold,
            rhs_bound: LogNum::from_f64(rhs_shape),
        },
    })
}

/// Empirical upper estimate of the gauge content of E(P; threshold): the
/// component around each zero is bounded by a log-radial boundary solve
/// (components live below f64 scale, where a literal pixel grid cannot
/// reach), overlapping root balls are merged, and a coarse far-field grid
/// catches any sublevel cell away from the zeros.
pub fn empirical_content(p: &Polynomial, threshold: LogNum, g: &Gauge) -> Result<LogNum> {
    let n = p.degree();
    if n == 0 || threshold.sign != 1 {
        return Err(LabError::Param("degree >= 1 and positive threshold".into()));
    }
    // Per-root component radius: max over directions of the boundary crossing
    // of the upper envelope of ln |P|, with a x1.5 safety factor.
    let n_dirs = 32;
    let mut rho: Vec<LogNum> = Vec::with_capacity(n);
    for j in 0..n {
        let zj = p.roots[j];
        let base = component_scale(p, j, threshold.ln_mag);
        let mut worst = LogNum::ZERO;
        for d in 0..n_dirs {
            let theta = std::f64::consts::TAU * d as f64 / n_dirs as f64;
            // ln |P| upper envelope is increasing in ln delta; bisect the
            // crossing with |P| <= threshold guaranteed below it.
            let (mut lo, mut hi) = (base - 80.0, 5.0);
            let env = |ld: f64| -> LogNum {
                let delta = LogNum::from_ln(ld);
                let mut v = LogNum::from_f64(p.leading.norm()) * delta;
                for (l, &zl) in p.roots.iter().enumerate() {
                    if l != j {
                        v = v * offset_factor(zj - zl, delta, theta);
                    }
                }
                v
            };
            if env(lo) > threshold {
                lo = base - 400.0;
            }
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                if env(mid) > threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            worst = worst.max(LogNum::from_ln(hi));
        }
        rho.push(worst.scale(1.5));
    }
    // Merge overlapping root balls (union-find on |z_i - z_j| <= rho_i + rho_j).
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = LogNum::from_f64((p.roots[i] - p.roots[j]).norm());
            if d <= rho[i] + rho[j] {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut total = LogNum::ZERO;
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut group_balls: Vec<(Complex64, LogNum)> = Vec::new();
    for (_, members) in groups {
        let mut spread = LogNum::ZERO;
        let mut max_rho = LogNum::ZERO;
        for (ai, &i) in members.iter().enumerate() {
            max_rho = max_rho.max(rho[i]);
            for &j in &members[ai + 1..] {
                spread = spread.max(LogNum::from_f64((p.roots[i] - p.roots[j]).norm()));
            }
        }
        let diameter = spread + max_rho.scale(2.0);
        total = total + g.eval_extended(diameter)?;
        group_balls.push((p.roots[members[0]], diameter));
    }
    // Far-field check on a coarse grid; cells in the sublevel set but outside
    // every component ball contribute their own diagonal.
    let (mut re_lo, mut re_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut im_lo, mut im_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &p.roots {
        re_lo = re_lo.min(r.re - 0.1);
        re_hi = re_hi.max(r.re + 0.1);
        im_lo = im_lo.min(r.im - 0.1);
        im_hi = im_hi.max(r.im + 0.1);
    }
    let cells = 96;
    let (dx, dy) = (
        (re_hi - re_lo) / cells as f64,
        (im_hi - im_lo) / cells as f64,
    );
    let diag = LogNum::from_f64(dx.hypot(dy));
    for ix in 0..cells {
        for iy in 0..cells {
            let z = Complex64::new(
                re_lo + (ix as f64 + 0.5) * dx,
                im_lo + (iy as f64 + 0.5) * dy,
            );
            if p.ln_abs(z) > threshold {
                continue;
            }
            let inside = group_balls.iter().any(|&(c, d)| {
                LogNum::from_f64((z - c).norm()) <= d.scale(0.5) + diag.scale(0.5)
            });
            if !inside {
                total = total + g.eval_extended(diag)?;
            }
        }
    }
    Ok(total)
}

/// Root ensembles used across the polynomial experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootEnsemble {
    /// Roots i.i.d. uniform in the disc |z| <= 2.
    UniformDisc,
    /// All roots at one uniformly drawn point of the disc.
    Coincident,
    /// Roots i.i.d. uniform on the unit circle.
    UnitCircle,
}

pub fn sample_roots(ensemble: RootEnsemble, n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    fn disc_point(rng: &mut impl Rng) -> Complex64 {
        loop {
            let re: f64 = rng.gen_range(-2.0..=2.0);
            let im: f64 = rng.gen_range(-2.0..=2.0);
            if re * re + im * im <= 4.0 {
                return Complex64::new(re, im);
            }
        }
    }
    match ensemble {
        RootEnsemble::UniformDisc => (0..n).map(|_| disc_point(rng)).collect(),
        RootEnsemble::Coincident => {
            let z = disc_point(rng);
            vec![z; n]
        }
        RootEnsemble::UnitCircle => (0..n)
            .map(|_| {
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                Complex64::from_polar(1.0, t)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_ln_close(a: LogNum, b: LogNum, tol: f64) -> bool {
        a.sign == b.sign && (a.ln_mag - b.ln_mag).abs() <= tol * b.ln_mag.abs().max(1.0)
    }

    #[test]
    fn root_product_matches_horner() {
        let mut rng = trial_rng(11, 0);
        for n in [1usize, 3, 8, 17, 33, 64] {
            let roots = sample_roots(RootEnsemble::UniformDisc, n, &mut rng);
            let p = Polynomial::monic(roots);
            for _ in 0..20 {
                let z = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let direct = p.ln_abs(z).to_f64();
                let horner = p.eval_horner(z).norm();
                assert!(
                    (direct - horner).abs() <= 1e-8 * horner.max(1e-8),
                    "n = {n}: {direct} vs {horner}"
                );
            }
        }
    }

    #[test]
    fn radii_identity_gauge() {
        // f(t) = t: r_j = jH/(4n).
        let g = Gauge::power(1.0);
        let h = LogNum::from_f64(0.01);
        let radii = cartan_radii(&g, h, 5).unwrap();
        for (j, r) in radii.iter().enumerate() {
            let expect = 0.01 * (j + 1) as f64 / 20.0;
            assert!((r.to_f64() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn radii_h0_closed_form() {
        let g = Gauge::h_alpha(0.0);
        let h = LogNum::from_ln(-9.0);
        let n = 6;
        let radii = cartan_radii(&g, h, n).unwrap();
        for (idx, r) in radii.iter().enumerate() {
            let j = (idx + 1) as f64;
            let expect = -9.0 * (n as f64 / j).powi(2) - 4f64.ln();
            assert!(
                (r.ln_mag - expect).abs() < 1e-9 * expect.abs(),
                "j = {j}: {} vs {expect}",
                r.ln_mag
            );
        }
        assert!(rel_ln_close(radii[n - 1], h.scale(0.25), 1e-15));
    }

    #[test]
    fn lubinsky_identity_gauge() {
        // f(t) = t: threshold = 4^{-n} H^n e^{-(n-1)}.
        let g = Gauge::power(1.0);
        let h = LogNum::from_f64(0.02);
        for n in [2usize, 5, 16] {
            let th = lubinsky_threshold(&g, h, n).unwrap();
            let expect =
                -(n as f64) * 4f64.ln() + n as f64 * 0.02f64.ln() - (n as f64 - 1.0);
            assert!(
                (th.ln_mag - expect).abs() < 1e-7 * expect.abs(),
                "n = {n}: {} vs {expect}",
                th.ln_mag
            );
        }
    }

    #[test]
    fn lubinsky_h0_closed_form() {
        // h_0, H = e^{-9}: threshold = 4^{-n} H^{n(2n-1)}.
        let g = Gauge::h_alpha(0.0);
        let h = LogNum::from_ln(-9.0);
        for n in [2usize, 4, 8, 16] {
            let th = lubinsky_threshold(&g, h, n).unwrap();
            let nf = n as f64;
            let expect = -nf * 4f64.ln() - 9.0 * nf * (2.0 * nf - 1.0);
            assert!(
                (th.ln_mag - expect).abs() < 1e-6 * expect.abs(),
                "n = {n}: {} vs {expect}",
                th.ln_mag
            );
        }
    }

    #[test]
    fn lubinsky_n1_is_quarter_h() {
        let g = Gauge::h_alpha(2.0);
        let h = LogNum::from_ln(-7.0);
        let th = lubinsky_threshold(&g, h, 1).unwrap();
        assert!(rel_ln_close(th, h.scale(0.25), 1e-14));
    }

    #[test]
    fn cover_single_root() {
        let p = Polynomial::monic(vec![Complex64::new(0.3, -0.2)]);
        let radii = vec![LogNum::from_f64(0.05)];
        let cover = cartan_cover(&p, &radii).unwrap();
        assert_eq!(cover.balls.len(), 1);
        assert_eq!(cover.multiplicity_sum(), 1);
        assert!(rel_ln_close(cover.balls[0].diameter, LogNum::from_f64(0.2), 1e-12));
    }

    #[test]
    fn cover_coincident_roots() {
        let z = Complex64::new(-0.4, 0.9);
        let n = 7;
        let p = Polynomial::monic(vec![z; n]);
        let g = Gauge::h_alpha(0.0);
        let h = LogNum::from_ln(-9.0);
        let radii = cartan_radii(&g, h, n).unwrap();
        let cover = cartan_cover(&p, &radii).unwrap();
        assert_eq!(cover.balls.len(), 1);
        assert_eq!(cover.balls[0].multiplicity, n);
        // Diameter 4 r_n = H.
        assert!(rel_ln_close(cover.balls[0].diameter, h, 1e-12));
    }

    #[test]
    fn cover_random_roots_and_content_identity() {
        let g = Gauge::h_alpha(0.0);
        let h = LogNum::from_ln(-9.0);
        let n = 16;
        let mut rng = trial_rng(3, 1);
        let p = Polynomial::monic(sample_roots(RootEnsemble::UniformDisc, n, &mut rng));
        let radii = cartan_radii(&g, h, n).unwrap();
        let cover = cartan_cover_with(&p, &radii, 10_000, 5).unwrap();
        assert_eq!(cover.multiplicity_sum(), n);
        let content = content_of_cover(&cover, &g).unwrap();
        let gh = g.eval(h).unwrap();
        assert!(
            (content.ln_mag - gh.ln_mag).abs() <= 1e-10 * gh.ln_mag.abs().max(1.0),
            "{} vs {}",
            content.ln_mag,
            gh.ln_mag
        );
    }

    #[test]
    fn content_of_trivial_covers() {
        let g = Gauge::h_alpha(0.0);
        let one_ball = BallCover {
            balls: vec![CoverBall {
                center: (0.0, 0.0),
                diameter: LogNum::from_ln(-4.0),
                multiplicity: 1,
            }],
        };
        assert!((content_of_cover(&one_ball, &g).unwrap().to_f64() - 0.5).abs() < 1e-12);
        let empty = BallCover { balls: vec![] };
        assert!(content_of_cover(&empty, &g).unwrap().is_zero());
    }

    #[test]
    fn shrunk_cover_fails_verification() {
        let p = Polynomial::monic(vec![Complex64::new(0.1, 0.0)]);
        let r1 = LogNum::from_f64(0.05);
        let cover = cartan_cover(&p, &[r1]).unwrap();
        let shrunk = BallCover {
            balls: cover
                .balls
                .iter()
                .map(|b| CoverBall {
                    diameter: b.diameter.scale(0.1),
                    ..b.clone()
                })
                .collect(),
        };
        let v = verify_cover(&p, r1, &shrunk, 20_000, 0).unwrap();
        assert!(!v.is_empty());
    }

    #[test]
    fn rhs_shape_arithmetic() {
        // alpha = 0, n = 1, log(1/(4 delta)) = 100 -> shape 0.1.
        let delta = LogNum::from_ln(-100.0 - 4f64.ln());
        let out = lemniscate_bound_rhs(0.0, delta, 1).unwrap();
        assert!((out.rhs_shape - 0.1).abs() < 1e-12);
        // n -> 4n doubles the shape at alpha = 0.
        let out4 = lemniscate_bound_rhs(0.0, delta, 4).unwrap();
        assert!((out4.rhs_shape / out.rhs_shape - 2.0).abs() < 1e-9);
        // delta -> delta^2 scales by 1/sqrt(2) asymptotically; check exactly.
        let delta2 = LogNum::from_ln(2.0 * delta.ln_mag);
        let out2 = lemniscate_bound_rhs(0.0, delta2, 1).unwrap();
        let expect = (100.0 / (200.0 + 4f64.ln())).sqrt();
        assert!((out2.rhs_shape / out.rhs_shape - expect).abs() < 1e-9);
    }

    #[test]
    fn rhs_breakdown_brackets() {
        for alpha in [0.0, 1.0, 3.0] {
            for n in [2usize, 8, 32] {
                for ln_delta in [-500.0, -3000.0, -20000.0] {
                    let out =
                        lemniscate_bound_rhs(alpha, LogNum::from_ln(ln_delta), n).unwrap();
                    let b = &out.breakdown;
                    assert!(b.xi >= b.xi_lower - 1e-9 && b.xi <= 1e-9);
                    assert!(b.a > 0.0 && b.a <= 1.0 + 1e-12);
                    // The solved H reproduces delta^n.
                    let nf = n as f64;
                    assert!(
                        (b.threshold.ln_mag - nf * ln_delta).abs()
                            <= 1e-6 * (nf * ln_delta).abs(),
                        "alpha {alpha} n {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn empirical_content_single_root_matches_disc() {
        // P = z: E(P; delta) is the disc of radius delta; the estimate must
        // sit within the x1.5 safety factor of g(2 delta).
        let p = Polynomial::monic(vec![Complex64::new(0.0, 0.0)]);
        let g = Gauge::h_alpha(0.0);
        let delta = LogNum::from_ln(-50.0);
        let est = empirical_content(&p, delta, &g).unwrap();
        let exact = g.eval(delta.scale(2.0)).unwrap();
        let upper = g.eval(delta.scale(3.0)).unwrap();
        assert!(est >= exact && est <= upper.scale(1.001), "{:?}", est);
    }

    #[test]
    fn empirical_content_below_fitted_shape() {
        // Smoke test of the no-violation suite at small scale.
        let mut rng = trial_rng(9, 2);
        for alpha in [0.0, 1.0] {
            let g = Gauge::h_alpha(alpha);
            for n in [2usize, 8] {
                let p = Polynomial::monic(sample_roots(RootEnsemble::UniformDisc, n, &mut rng));
                let rhs = lemniscate_bound_rhs(alpha, LogNum::from_ln(-200.0), n).unwrap();
                let est = empirical_content(&p, rhs.breakdown.threshold, &g).unwrap();
                let ratio = est.to_f64() / rhs.rhs_shape;
                assert!(ratio.is_finite() && ratio < 50.0, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn sum_lambda_is_n_many_instances() {
        let g = Gauge::h_alpha(1.0);
        let h = LogNum::from_ln(-9.0);
        for (i, &ens) in [
            RootEnsemble::UniformDisc,
            RootEnsemble::Coincident,
            RootEnsemble::UnitCircle,
        ]
        .iter()
        .enumerate()
        {
            let mut rng = trial_rng(17, i as u64);
            for n in [2usize, 5, 12] {
                let p = Polynomial::monic(sample_roots(ens, n, &mut rng));
                let radii = cartan_radii(&g, h, n).unwrap();
                let cover = cartan_cover_with(&p, &radii, 2_000, 7).unwrap();
                assert_eq!(cover.multiplicity_sum(), n, "{ens:?} n = {n}");
            }
        }
    }
}
