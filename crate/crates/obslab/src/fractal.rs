//! Generalized Cantor sets with certified content bounds.
//!
//! A depth-k level keeps two end-subintervals of length c_k inside every
//! depth-(k-1) interval. Lengths shrink like exp(-2^{2k}), so positions are
//! never materialized as floats. Instead every point of interest (interval
//! endpoints, gap midpoints, ball edges) is an exact linear combination
//! `cnst + sum_j a_j c_j` with small coefficients. Differences cancel
//! coefficient-wise before anything is evaluated in log-domain arithmetic,
//! so comparisons at scale c_k stay exact even when the points also carry
//! order-one terms.
//!
//! The natural measure at depth k puts mass 2^{-k} on each depth-k interval,
//! spread uniformly inside it. Ball masses are computed exactly from the
//! interval combinatorics, which is what makes the Frostman lower bounds
//! certificates over the sampled ball family rather than Monte Carlo guesses.

use crate::error::{LabError, Result};
use crate::gauge::Gauge;
use crate::lognum::LogNum;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LengthRule {
    /// c_k solves eval(g, c_k) = 2^{-k}.
    GaugeDriven(Gauge),
    /// Explicit list of ln c_k, k = 1..
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorSpec {
    pub rule: LengthRule,
    /// Base interval [a, b].
    pub base: (f64, f64),
}

impl CantorSpec {
    pub fn unit(rule: LengthRule) -> Self {
        CantorSpec {
            rule,
            base: (0.0, 1.0),
        }
    }
}

/// Finite-depth approximation: 2^depth intervals of common length c_depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorLevel {
    pub depth: usize,
    /// ln_len[j] = ln c_j for j = 1..=depth; ln_len[0] = ln(b - a).
    pub ln_len: Vec<f64>,
    pub base: (f64, f64),
}

/// A position (or length) as `cnst + sum_j coeff[j] * c_j`, measured from the
/// base point `a`. Coefficients are small half-integers, so coordinate
/// arithmetic on them is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Pos {
    pub cnst: f64,
    pub coeff: Vec<f64>,
}

impl Pos {
    fn zero(depth: usize) -> Pos {
        Pos {
            cnst: 0.0,
            coeff: vec![0.0; depth + 1],
        }
    }

    pub fn add(&self, other: &Pos) -> Pos {
        let mut out = self.clone();
        out.cnst += other.cnst;
        for (a, b) in out.coeff.iter_mut().zip(&other.coeff) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Pos) -> Pos {
        let mut out = self.clone();
        out.cnst -= other.cnst;
        for (a, b) in out.coeff.iter_mut().zip(&other.coeff) {
            *a -= b;
        }
        out
    }
}

pub fn build_cantor(spec: &CantorSpec, depth: usize) -> Result<CantorLevel> {
    let (a, b) = spec.base;
    if !(b > a) {
        return Err(LabError::Param("base interval must have b > a".into()));
    }
    let mut ln_len = vec![(b - a).ln()];
    for k in 1..=depth {
        let lk = match &spec.rule {
            LengthRule::GaugeDriven(g) => {
                let y = LogNum::from_ln(-(k as f64) * LN_2);
                g.inverse(y)?.ln_mag
            }
            LengthRule::Explicit(lens) => *lens
                .get(k - 1)
                .ok_or_else(|| LabError::Param(format!("explicit rule too short for depth {k}")))?,
        };
        // 2 c_k < c_{k-1} (for k = 1 this is c_1 <= (b-a)/2 up to strictness).
        if lk + LN_2 >= ln_len[k - 1] {
            return Err(LabError::Separation { level: k });
        }
        ln_len.push(lk);
    }
    Ok(CantorLevel {
        depth,
        ln_len,
        base: spec.base,
    })
}

impl CantorLevel {
    pub fn len_at(&self, j: usize) -> LogNum {
        LogNum::from_ln(self.ln_len[j])
    }

    /// Evaluate a coefficient combination in log-domain arithmetic, largest
    /// scales first. Exact zero requires exact coefficient cancellation.
    pub fn eval_pos(&self, p: &Pos) -> LogNum {
        let mut acc = LogNum::from_f64(p.cnst);
        for j in 0..=self.depth {
            let a = p.coeff[j];
            if a != 0.0 {
                acc = acc + LogNum::from_f64(a) * self.len_at(j);
            }
        }
        acc
    }

    /// Left endpoint of the node at `level` reached by `path` (most
    /// significant path bit = level 1; bit 1 = right child).
    pub fn node_left(&self, level: usize, path: u64) -> Pos {
        let mut p = Pos::zero(self.depth);
        for l in 1..=level {
            if (path >> (level - l)) & 1 == 1 {
                p.coeff[l - 1] += 1.0;
                p.coeff[l] -= 1.0;
            }
        }
        p
    }

    /// `f * c_j` as a combination (used for offsets and radii).
    pub fn scaled_len(&self, j: usize, f: f64) -> Pos {
        let mut p = Pos::zero(self.depth);
        p.coeff[j] = f;
        p
    }

    /// Plain coordinate x, measured against the base point.
    pub fn plain(&self, x: f64) -> Pos {
        let mut p = Pos::zero(self.depth);
        p.cnst = x - self.base.0;
        p
    }

    pub fn const_len(&self, v: f64) -> Pos {
        let mut p = Pos::zero(self.depth);
        p.cnst = v;
        p
    }

    /// Exact mass of the natural depth-level measure in [center-r, center+r].
    pub fn ball_mass(&self, center: &Pos, r: &Pos) -> LogNum {
        let lo = center.sub(r);
        let hi = center.add(r);
        self.mass_rec(0, 0, &lo, &hi)
    }

    fn mass_rec(&self, j: usize, path: u64, lo: &Pos, hi: &Pos) -> LogNum {
        let left = self.node_left(j, path);
        let mut right = left.clone();
        right.coeff[j] += 1.0;
        // Disjoint: lo >= node right, or hi <= node left.
        if self.eval_pos(&lo.sub(&right)).sign >= 0 || self.eval_pos(&hi.sub(&left)).sign <= 0 {
            return LogNum::ZERO;
        }
        // Fully contained: lo <= left and hi >= right.
        let lo_in = self.eval_pos(&lo.sub(&left));
        let hi_in = self.eval_pos(&hi.sub(&right));
        if lo_in.sign <= 0 && hi_in.sign >= 0 {
            return LogNum::from_ln(-(j as f64) * LN_2);
        }
        if j == self.depth {
            let upper = if hi_in.sign >= 0 { &right } else { hi };
            let lower = if lo_in.sign <= 0 { &left } else { lo };
            let overlap = self.eval_pos(&upper.sub(lower));
            if overlap.sign <= 0 {
                return LogNum::ZERO;
            }
            return LogNum::from_ln(-(j as f64) * LN_2) * (overlap / self.len_at(j));
        }
        self.mass_rec(j + 1, path << 1, lo, hi) + self.mass_rec(j + 1, (path << 1) | 1, lo, hi)
    }

    /// All combinatorial ball centers: depth-interval endpoints and
    /// midpoints, plus the midpoint of every removed gap.
    pub fn grid_centers(&self) -> Vec<Pos> {
        let mut centers = Vec::new();
        let k = self.depth;
        for path in 0..(1u64 << k) {
            let left = self.node_left(k, path);
            centers.push(left.clone());
            centers.push(left.add(&self.scaled_len(k, 0.5)));
            centers.push(left.add(&self.scaled_len(k, 1.0)));
        }
        for j in 1..=k {
            for path in 0..(1u64 << (j - 1)) {
                let parent = self.node_left(j - 1, path);
                centers.push(parent.add(&self.scaled_len(j - 1, 0.5)));
            }
        }
        centers
    }

    /// Radius ladder tied to the construction scales.
    pub fn grid_radii(&self) -> Vec<Pos> {
        let mut radii = Vec::new();
        for j in 0..=self.depth {
            for f in [0.5, 1.0, 2.0, 4.0] {
                radii.push(self.scaled_len(j, f));
            }
        }
        radii
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallSample {
    pub ln_radius: f64,
    pub ln_mass: f64,
    pub ln_gauge: f64,
    /// mass / g(2r) for this ball.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrostmanCertificate {
    /// Max over sampled balls of mass(B)/g(d(B)) -- the empirical Frostman
    /// constant (a certified bound only over the sampled ball family).
    pub a2_hat: LogNum,
    /// mu(E)/A2_hat with total mass 1.
    pub lower_bound: LogNum,
    pub balls_swept: usize,
    /// Per-radius worst cases.
    pub sampled_balls: Vec<BallSample>,
}

/// Sum of g(|I_{k,j}|) over the 2^k depth-k intervals: a valid upper bound
/// for the gauge content of the limit set.
pub fn content_upper(level: &CantorLevel, g: &Gauge) -> Result<LogNum> {
    let gk = g.eval_extended(level.len_at(level.depth))?;
    Ok(LogNum::from_ln(level.depth as f64 * LN_2) * gk)
}

/// Mass-distribution certificate over the sampled ball family.
pub fn frostman_lower(
    level: &CantorLevel,
    g: &Gauge,
    centers: &[Pos],
    radii: &[Pos],
) -> Result<FrostmanCertificate> {
    let mut a2 = LogNum::ZERO;
    let mut samples: Vec<BallSample> = Vec::new();
    let mut swept = 0usize;
    for r in radii {
        let r_val = level.eval_pos(r);
        if r_val.sign <= 0 {
            continue;
        }
        let gv = g.eval_extended(r_val.scale(2.0))?;
        let mut worst: Option<(LogNum, LogNum)> = None;
        for c in centers {
            swept += 1;
            let mass = level.ball_mass(c, r);
            if mass.is_zero() {
                continue;
            }
            let ratio = mass / gv;
            if worst.map_or(true, |(w, _)| ratio > w) {
                worst = Some((ratio, mass));
            }
        }
        if let Some((ratio, mass)) = worst {
            samples.push(BallSample {
                ln_radius: r_val.ln_mag,
                ln_mass: mass.ln_mag,
                ln_gauge: gv.ln_mag,
                ratio: ratio.to_f64(),
            });
            a2 = a2.max(ratio);
        }
    }
    if a2.is_zero() {
        return Err(LabError::DegenerateSet("no ball carried mass".into()));
    }
    Ok(FrostmanCertificate {
        a2_hat: a2,
        lower_bound: a2.recip(),
        balls_swept: swept,
        sampled_balls: samples,
    })
}

/// Convenience: certificate over the default combinatorial grid.
pub fn frostman_lower_default(level: &CantorLevel, g: &Gauge) -> Result<FrostmanCertificate> {
    frostman_lower(level, g, &level.grid_centers(), &level.grid_radii())
}

/// Z-periodized union of translated copies of a Cantor level, with an
/// occupancy pattern over unit cells.
#[derive(Debug, Clone)]
pub struct PeriodicSet {
    pub cell: CantorLevel,
    /// cell i is occupied iff pattern[i mod pattern.len()].
    pub pattern: Vec<bool>,
}

impl PeriodicSet {
    pub fn full(cell: CantorLevel) -> Self {
        PeriodicSet {
            cell,
            pattern: vec![true],
        }
    }

    fn occupied(&self, i: i64) -> bool {
        let p = self.pattern.len() as i64;
        self.pattern[(i.rem_euclid(p)) as usize]
    }

    /// Total mass of the window [x, x+l] under per-copy natural measures.
    pub fn window_mass(&self, x: f64, l: f64) -> LogNum {
        let mut total = LogNum::ZERO;
        let k_lo = (x - self.cell.base.1).floor() as i64 - 1;
        let k_hi = (x + l - self.cell.base.0).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            if !self.occupied(k) {
                continue;
            }
            let center = self.cell.plain(self.cell.base.0 + x + 0.5 * l - k as f64);
            let r = self.cell.const_len(0.5 * l);
            total = total + self.cell.ball_mass(&center, &r);
        }
        total
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThicknessReport {
    pub gamma_hat: f64,
    pub worst_window: f64,
    /// Empirical Frostman constant used for all windows.
    pub a2_hat: f64,
}

/// Certified-over-samples thickness constant: min over sampled windows of
/// (window mass)/A2_hat/L. The A2 sweep covers single-copy combinatorial
/// balls and multi-copy balls up to the window length.
pub fn thickness_report(
    set: &PeriodicSet,
    g: &Gauge,
    l_window: f64,
    x_samples: &[f64],
) -> Result<ThicknessReport> {
    if l_window <= 0.0 || x_samples.is_empty() {
        return Err(LabError::Param("window length and samples required".into()));
    }
    // Single-copy combinatorial sweep.
    let single = frostman_lower_default(&set.cell, g)?;
    let mut a2 = single.a2_hat;
    // Multi-copy balls: plain centers on a unit-cell-aligned grid, radii a
    // dyadic ladder up to the window length.
    let span = l_window.ceil() as i64 + 2;
    let mut radii = Vec::new();
    let mut r = l_window;
    while r > 0.02 {
        radii.push(r);
        r *= 0.5;
    }
    for ri in radii {
        let gv = g.eval_extended(LogNum::from_f64(2.0 * ri))?;
        for ci in -span..=span {
            for frac in [0.0, 0.25, 0.5, 0.75] {
                let mut mass = LogNum::ZERO;
                for k in (ci - span)..=(ci + span) {
                    if !set.occupied(k) {
                        continue;
                    }
                    let center = set
                        .cell
                        .plain(set.cell.base.0 + ci as f64 + frac - k as f64);
                    let rp = set.cell.const_len(ri);
                    mass = mass + set.cell.ball_mass(&center, &rp);
                }
                if mass.sign > 0 {
                    a2 = a2.max(mass / gv);
                }
            }
        }
    }
    let mut gamma_hat = f64::INFINITY;
    let mut worst = x_samples[0];
    for &x in x_samples {
        let mass = set.window_mass(x, l_window);
        let bound = if mass.is_zero() {
            0.0
        } else {
            (mass / a2).to_f64() / l_window
        };
        if bound < gamma_hat {
            gamma_hat = bound;
            worst = x;
        }
    }
    Ok(ThicknessReport {
        gamma_hat,
        worst_window: worst,
        a2_hat: a2.to_f64(),
    })
}
