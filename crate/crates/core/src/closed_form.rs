//! Exact value function for piecewise-affine payoffs.
//!
//! Wherever the principal funds research, the value solves
//! `c(p) v'' = v - u` with `c(p) = p^2 (1-p)^2 / (2 r sigma^2)`. The
//! homogeneous part has basis `H1(p) = p^xi (1-p)^(1-xi)` and
//! `H2(p) = H1(1-p)` with `xi = 1/2 + sqrt(1/4 + 2 r sigma^2)`, and an
//! affine `u` is its own particular solution, so on each funding piece
//! `v = u + A H1 - B H2`.
//!
//! The solver enumerates which pieces of `u` are funded and whether the
//! value pastes smoothly or merely touches at each interior junction,
//! solves the linear system the boundary/continuity/pasting conditions
//! impose on the `(A, B)` constants, and keeps the unique configuration
//! that survives verification: `u <= v <= cav u`, continuity, strict
//! convexity on funded intervals, and no convex kinks anywhere.

use crate::envelope::concave_envelope;
use crate::piecewise::PiecewiseFn;
use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Equality tolerance for the verification checks.
pub const VERIFY_TOL: f64 = 1e-8;

const ENUMERATION_CAP: usize = 12;

/// `xi = 1/2 + sqrt(1/4 + 2 r sigma^2)`, the growth exponent of the
/// homogeneous solutions. Exceeds 1 for every positive argument.
pub fn xi(r_sigma2: f64) -> Result<f64> {
    if !(r_sigma2 > 0.0) || !r_sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "r*sigma^2 must be positive, got {r_sigma2}"
        )));
    }
    Ok(0.5 + (0.25 + 2.0 * r_sigma2).sqrt())
}

fn h1(p: f64, xi: f64) -> f64 {
    p.powf(xi) * (1.0 - p).powf(1.0 - xi)
}

fn h2(p: f64, xi: f64) -> f64 {
    h1(1.0 - p, xi)
}

// H1 H2 = p(1-p) gives the compact derivative forms below; the
// Wronskian H1' H2 - H1 H2' equals 2 xi - 1 identically.
fn dh1(p: f64, xi: f64) -> f64 {
    (xi - p) / h2(p, xi)
}

fn dh2(p: f64, xi: f64) -> f64 {
    -(xi - 1.0 + p) / h1(p, xi)
}

fn d2h1(p: f64, xi: f64) -> f64 {
    h1(p, xi) * xi * (xi - 1.0) / (p * p * (1.0 - p) * (1.0 - p))
}

fn d2h2(p: f64, xi: f64) -> f64 {
    h2(p, xi) * xi * (xi - 1.0) / (p * p * (1.0 - p) * (1.0 - p))
}

/// Values and first two derivatives of the homogeneous basis at `p`.
#[derive(Debug, Clone, Copy)]
pub struct BasisValues {
    pub h1: f64,
    pub h2: f64,
    pub dh1: f64,
    pub dh2: f64,
    pub d2h1: f64,
    pub d2h2: f64,
}

/// Both basis solutions at an interior belief. Derivatives blow up at
/// the endpoints, so `p` must lie strictly inside (0,1).
pub fn basis(p: f64, xi: f64) -> Result<BasisValues> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "basis derivatives need p strictly inside (0,1), got {p}"
        )));
    }
    Ok(BasisValues {
        h1: h1(p, xi),
        h2: h2(p, xi),
        dh1: dh1(p, xi),
        dh2: dh2(p, xi),
        d2h1: d2h1(p, xi),
        d2h2: d2h2(p, xi),
    })
}

/// Diffusion scale `c(p) = p^2 (1-p)^2 / (2 r sigma^2)`.
pub fn diffusion_scale(p: f64, r_sigma2: f64) -> f64 {
    let g = p * (1.0 - p);
    g * g / (2.0 * r_sigma2)
}

/// One funded piece: on `(lo, hi)` the value is
/// `particular(p) + a * H1(p) - b * H2(p)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolvedInterval {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
    pub particular: Polynomial,
}

/// The exact value function: funded segments with their constants, the
/// payoff it stops on, and the funding region as maximal open intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedFormValue {
    pub xi: f64,
    pub r_sigma2: f64,
    pub intervals: Vec<SolvedInterval>,
    pub stop_fn: PiecewiseFn,
    pub funding_region: Vec<(f64, f64)>,
}

impl ClosedFormValue {
    /// Value at `p`: the funded formula strictly inside a funding run,
    /// the (usc) payoff elsewhere. Continuous on [0,1].
    pub fn eval(&self, p: f64) -> f64 {
        if self.in_funding_interior(p) {
            if let Some(seg) = self.segment_at(p) {
                return seg.particular.eval(p) + seg.a * h1(p, self.xi) - seg.b * h2(p, self.xi);
            }
        }
        self.stop_fn.eval_usc(p)
    }

    fn in_funding_interior(&self, p: f64) -> bool {
        self.funding_region.iter().any(|&(lo, hi)| p > lo && p < hi)
    }

    fn segment_at(&self, p: f64) -> Option<&SolvedInterval> {
        self.intervals.iter().find(|s| p >= s.lo && p <= s.hi)
    }

    /// One-sided derivatives at `p`, taking the funded formula on funded
    /// sides and the payoff's piece slope on stopped sides.
    pub fn deriv_limits(&self, p: f64) -> (f64, f64) {
        let seg_deriv = |s: &SolvedInterval| {
            s.particular.derivative().eval(p) + s.a * dh1(p, self.xi) - s.b * dh2(p, self.xi)
        };
        let left = self
            .intervals
            .iter()
            .find(|s| p > s.lo && p <= s.hi && self.run_of(s).map(|r| p > r.0) == Some(true))
            .map(seg_deriv)
            .unwrap_or_else(|| self.stop_fn.deriv_limits(p).0);
        let right = self
            .intervals
            .iter()
            .find(|s| p >= s.lo && p < s.hi && self.run_of(s).map(|r| p < r.1) == Some(true))
            .map(seg_deriv)
            .unwrap_or_else(|| self.stop_fn.deriv_limits(p).1);
        (left, right)
    }

    fn run_of(&self, seg: &SolvedInterval) -> Option<(f64, f64)> {
        self.funding_region
            .iter()
            .copied()
            .find(|&(lo, hi)| seg.lo >= lo && seg.hi <= hi)
    }

    /// Second derivative inside a funded segment.
    fn second_deriv(&self, seg: &SolvedInterval, p: f64) -> f64 {
        let dd: f64 = match seg.particular.degree() {
            0 | 1 => 0.0,
            _ => {
                let d2 = seg.particular.derivative().derivative();
                d2.eval(p)
            }
        };
        dd + seg.a * d2h1(p, self.xi) - seg.b * d2h2(p, self.xi)
    }
}

/// Result of checking a candidate value function against the conditions
/// that characterise the true one.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// max over the grid of `u - v` (should be <= tol).
    pub lower_violation: f64,
    /// max over the grid of `v - cav u`.
    pub upper_violation: f64,
    /// worst mismatch of one-sided limits against the point value.
    pub continuity_gap: f64,
    /// worst `|v'(b-) - v'(b+)|` over junctions declared smooth.
    pub pasting_gap: f64,
    /// worst `|v - u - c(p) v''|` sampled inside funded segments.
    pub ode_residual: f64,
    /// smallest sampled `v''` inside funded segments.
    pub min_convexity: f64,
    /// smallest over funding runs of the largest gap `v - u` on the run;
    /// a run that never detaches from the payoff is not really funded.
    pub run_activity: f64,
    /// worst convex-kink violation `v'(b+) - v'(b-)` over kink points.
    pub convex_kink_violation: f64,
    /// `|v - u|` at the endpoints 0 and 1.
    pub boundary_gap: f64,
    /// kink locations with their slope drops `v'(b-) - v'(b+)`;
    /// positive drops are concave kinks, which are admissible.
    pub kinks: Vec<(f64, f64)>,
}

impl VerificationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.lower_violation <= tol
            && self.upper_violation <= tol
            && self.continuity_gap <= tol
            && self.pasting_gap <= tol
            && self.ode_residual <= tol
            && self.min_convexity >= -tol
            && self.convex_kink_violation <= tol
            && self.boundary_gap <= tol
            && (self.run_activity > tol || self.run_activity == f64::INFINITY)
    }

    pub fn max_violation(&self) -> f64 {
        self.lower_violation
            .max(self.upper_violation)
            .max(self.continuity_gap)
            .max(self.pasting_gap)
            .max(self.ode_residual)
            .max(self.convex_kink_violation)
            .max(self.boundary_gap)
            .max(-self.min_convexity)
    }
}

/// Checks a closed-form value function against its payoff: the sandwich
/// `u <= v <= cav u`, continuity, smooth pasting at junctions interior
/// to the funding region, the differential equation on funded pieces,
/// strict convexity there, and absence of convex kinks.
pub fn verify_value(v: &ClosedFormValue, u: &PiecewiseFn, r_sigma2: f64) -> VerificationReport {
    verify_against(v, u, &concave_envelope(u), r_sigma2, 10_001)
}

fn verify_against(
    v: &ClosedFormValue,
    u: &PiecewiseFn,
    cav: &PiecewiseFn,
    r_sigma2: f64,
    grid_n: usize,
) -> VerificationReport {
    let mut lower: f64 = 0.0;
    let mut upper: f64 = 0.0;
    let mut probes: Vec<f64> = (0..grid_n).map(|i| i as f64 / (grid_n - 1) as f64).collect();
    probes.extend_from_slice(u.breakpoints());
    for &p in &probes {
        let vp = v.eval(p);
        lower = lower.max(u.eval_usc(p) - vp);
        upper = upper.max(vp - cav.eval_usc(p));
    }

    // Continuity against the one-sided limits at every structural point.
    let mut continuity: f64 = 0.0;
    let mut check_points: Vec<f64> = u.interior_breakpoints().to_vec();
    for &(lo, hi) in &v.funding_region {
        if lo > 0.0 {
            check_points.push(lo);
        }
        if hi < 1.0 {
            check_points.push(hi);
        }
        for seg in &v.intervals {
            if seg.lo > lo && seg.lo < hi {
                check_points.push(seg.lo);
            }
        }
    }
    check_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    check_points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let eps = 1e-9;
    for &b in &check_points {
        let at = v.eval(b);
        let left = v.eval((b - eps).max(0.0));
        let right = v.eval((b + eps).min(1.0));
        // First-order extrapolation error over eps is negligible at the
        // verification tolerance; a genuine jump is order one.
        let (dl, dr) = v.deriv_limits(b);
        continuity = continuity
            .max((at - (left + eps * dl)).abs())
            .max((at - (right - eps * dr)).abs());
    }

    // Kinks: smooth junctions must paste; elsewhere only concave kinks
    // (slope dropping left to right) are admissible.
    let mut pasting: f64 = 0.0;
    let mut convex_kink: f64 = 0.0;
    let mut kinks = Vec::new();
    for &b in &check_points {
        let (dl, dr) = v.deriv_limits(b);
        let drop = dl - dr;
        if drop.abs() > VERIFY_TOL {
            kinks.push((b, drop));
        }
        let smooth_junction = v.funding_region.iter().any(|&(lo, hi)| b > lo && b < hi)
            && v.intervals.iter().any(|s| (s.lo - b).abs() <= 1e-12 || (s.hi - b).abs() <= 1e-12);
        if smooth_junction {
            pasting = pasting.max(drop.abs());
        } else {
            convex_kink = convex_kink.max(-drop);
        }
    }

    // Differential equation and strict convexity inside funded segments.
    let mut ode: f64 = 0.0;
    let mut min_vpp = f64::INFINITY;
    let mut activity = f64::INFINITY;
    for &(lo, hi) in &v.funding_region {
        let mut run_gap: f64 = 0.0;
        for seg in v.intervals.iter().filter(|s| s.lo >= lo && s.hi <= hi) {
            for k in 1..64 {
                let p = seg.lo + (seg.hi - seg.lo) * k as f64 / 64.0;
                if p <= lo || p >= hi {
                    continue;
                }
                let vp = v.eval(p);
                let vpp = v.second_deriv(seg, p);
                ode = ode.max((vp - u.eval_usc(p) - diffusion_scale(p, r_sigma2) * vpp).abs());
                min_vpp = min_vpp.min(vpp);
                run_gap = run_gap.max(vp - u.eval_usc(p));
            }
        }
        activity = activity.min(run_gap);
    }
    if min_vpp == f64::INFINITY {
        min_vpp = 0.0;
    }

    let boundary =
        (v.eval(0.0) - u.eval_usc(0.0)).abs().max((v.eval(1.0) - u.eval_usc(1.0)).abs());

    VerificationReport {
        lower_violation: lower,
        upper_violation: upper,
        continuity_gap: continuity,
        pasting_gap: pasting,
        ode_residual: ode,
        min_convexity: min_vpp,
        run_activity: activity,
        convex_kink_violation: convex_kink,
        boundary_gap: boundary,
        kinks,
    }
}

/// How a breakpoint interior to a funding stretch is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Junction {
    /// Interior to the funding region: continuity and smooth pasting.
    Smooth,
    /// The value touches the payoff: value matching on both sides.
    Touch,
}

/// Solves for the exact value function of a piecewise-affine payoff.
///
/// Candidate configurations label each piece funded or stopped and each
/// junction between adjacent funded pieces smooth or touching; the
/// unique candidate passing [`verify_value`] is returned. Ties (which
/// arise only at knife-edge parameters where funding and stopping give
/// the same value) resolve toward fewer funding intervals, matching a
/// best reply that funds only where the value strictly exceeds the
/// payoff.
pub fn solve_closed_form(u: &PiecewiseFn, r_sigma2: f64) -> Result<ClosedFormValue> {
    let x = xi(r_sigma2)?;
    for (k, piece) in u.pieces().iter().enumerate() {
        if piece.degree() > 1 {
            return Err(Error::NotAffine {
                lo: u.breakpoints()[k],
                hi: u.breakpoints()[k + 1],
                degree: piece.degree(),
            });
        }
    }
    let n_pieces = u.pieces().len();
    if n_pieces - 1 > ENUMERATION_CAP {
        return Err(Error::TooManyBreakpoints(n_pieces - 1));
    }

    let cav = concave_envelope(u);
    let scale = {
        let (lo, hi) = u.range();
        1.0 + hi - lo
    };

    let mut best: Option<(usize, usize, usize, ClosedFormValue)> = None;
    for label in 0..(1usize << n_pieces) {
        let stretches = funded_stretches(label, n_pieces);
        if !stop_stop_jumps_ok(u, label, n_pieces) {
            continue;
        }
        let junction_slots: usize = stretches.iter().map(|s| s.1 - s.0).sum();
        for jmask in 0..(1usize << junction_slots) {
            let runs = split_runs(&stretches, jmask);
            let Some(candidate) = assemble_candidate(u, x, r_sigma2, &runs) else {
                continue;
            };
            let quick = verify_against(&candidate, u, &cav, r_sigma2, 101);
            if !quick.passes(VERIFY_TOL.max(1e-9 * scale)) {
                continue;
            }
            let full = verify_against(&candidate, u, &cav, r_sigma2, 10_001);
            if !full.passes(VERIFY_TOL.max(1e-9 * scale)) {
                continue;
            }
            let key = (runs.len(), label, jmask);
            let replace = match &best {
                None => true,
                Some((r, l, j, _)) => key < (*r, *l, *j),
            };
            if replace {
                best = Some((key.0, key.1, key.2, candidate));
            }
        }
    }
    best.map(|(_, _, _, v)| v).ok_or(Error::NoValidConfiguration)
}

/// Maximal stretches of funded pieces, as inclusive piece-index ranges.
fn funded_stretches(label: usize, n_pieces: usize) -> Vec<(usize, usize)> {
    let mut stretches = Vec::new();
    let mut start = None;
    for k in 0..n_pieces {
        let funded = label & (1 << k) != 0;
        match (funded, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                stretches.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        stretches.push((s, n_pieces - 1));
    }
    stretches
}

/// A jump of the payoff between two stopped pieces would make the value
/// discontinuous; such labels cannot be valid.
fn stop_stop_jumps_ok(u: &PiecewiseFn, label: usize, n_pieces: usize) -> bool {
    for k in 1..n_pieces {
        let left_stopped = label & (1 << (k - 1)) == 0;
        let right_stopped = label & (1 << k) == 0;
        if left_stopped && right_stopped && u.is_discontinuous_at(k) {
            return false;
        }
    }
    true
}

/// Splits funded stretches at junctions marked Touch, producing runs of
/// consecutive pieces solved as one boundary-value problem.
fn split_runs(stretches: &[(usize, usize)], jmask: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut bit = 0;
    for &(s, e) in stretches {
        let mut run_start = s;
        for k in s..e {
            let status = if jmask & (1 << bit) != 0 {
                Junction::Touch
            } else {
                Junction::Smooth
            };
            bit += 1;
            if status == Junction::Touch {
                runs.push((run_start, k));
                run_start = k + 1;
            }
        }
        runs.push((run_start, e));
    }
    runs
}

fn assemble_candidate(
    u: &PiecewiseFn,
    x: f64,
    r_sigma2: f64,
    runs: &[(usize, usize)],
) -> Option<ClosedFormValue> {
    let bps = u.breakpoints();
    let mut intervals = Vec::new();
    let mut funding_region = Vec::new();
    for &(i, j) in runs {
        let len = j - i + 1;
        let dim = 2 * len;
        let mut mat = vec![vec![0.0f64; dim]; dim];
        let mut rhs = vec![0.0f64; dim];
        let col_a = |k: usize| 2 * (k - i);
        let col_b = |k: usize| 2 * (k - i) + 1;
        let mut row = 0;

        let beta_l = bps[i];
        if beta_l == 0.0 {
            // Boundedness at 0: H2 diverges there.
            mat[row][col_b(i)] = 1.0;
        } else {
            mat[row][col_a(i)] = h1(beta_l, x);
            mat[row][col_b(i)] = -h2(beta_l, x);
            rhs[row] = u.eval_usc(beta_l) - u.pieces()[i].eval(beta_l);
        }
        row += 1;

        for k in i..j {
            let b = bps[k + 1];
            let (pl, pr) = (&u.pieces()[k], &u.pieces()[k + 1]);
            mat[row][col_a(k)] = h1(b, x);
            mat[row][col_b(k)] = -h2(b, x);
            mat[row][col_a(k + 1)] = -h1(b, x);
            mat[row][col_b(k + 1)] = h2(b, x);
            rhs[row] = pr.eval(b) - pl.eval(b);
            row += 1;
            mat[row][col_a(k)] = dh1(b, x);
            mat[row][col_b(k)] = -dh2(b, x);
            mat[row][col_a(k + 1)] = -dh1(b, x);
            mat[row][col_b(k + 1)] = dh2(b, x);
            rhs[row] = pr.derivative().eval(b) - pl.derivative().eval(b);
            row += 1;
        }

        let beta_r = bps[j + 1];
        if beta_r == 1.0 {
            // Boundedness at 1: H1 diverges there.
            mat[row][col_a(j)] = 1.0;
        } else {
            mat[row][col_a(j)] = h1(beta_r, x);
            mat[row][col_b(j)] = -h2(beta_r, x);
            rhs[row] = u.eval_usc(beta_r) - u.pieces()[j].eval(beta_r);
        }

        let sol = gaussian_solve(mat, rhs)?;
        for k in i..=j {
            intervals.push(SolvedInterval {
                lo: bps[k],
                hi: bps[k + 1],
                a: sol[col_a(k)],
                b: sol[col_b(k)],
                particular: u.pieces()[k].clone(),
            });
        }
        funding_region.push((beta_l, beta_r));
    }
    Some(ClosedFormValue {
        xi: x,
        r_sigma2,
        intervals,
        stop_fn: u.clone(),
        funding_region,
    })
}

fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
