//! Equilibrium objects: the best-reply funding policy, long-run induced
//! beliefs, comparative-statics sweeps, the persuasion sandwich, the
//! full-information predicate for belief-based conflicts, and welfare
//! monotonicity in the agent's prior.

use crate::closed_form::{solve_closed_form, ClosedFormValue};
use crate::envelope::{concave_envelope, persuasion_beliefs, BeliefPair};
use crate::fd::{default_contact_tol, funding_region_fd, solve_fd, GridValue};
use crate::model::{induced_flow_payoff, myopic_regular_strategy, ModelSpec};
use crate::piecewise::PiecewiseFn;
use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which value-function solver to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Closed form for piecewise-affine payoffs, finite differences
    /// otherwise.
    Auto,
    Closed,
    Fd { n_points: usize },
}

impl Default for Method {
    fn default() -> Self {
        Method::Auto
    }
}

pub const DEFAULT_GRID: usize = 4001;

/// A solved value function from either route.
#[derive(Debug)]
pub enum Value {
    Closed(ClosedFormValue),
    Grid(GridValue),
}

impl Value {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Value::Closed(v) => v.eval(p),
            Value::Grid(g) => g.eval(p),
        }
    }

    /// Open intervals on which the value strictly exceeds the payoff.
    /// Grid solutions use exact detachment: policy iteration leaves
    /// `v_i = u_i` bit-exactly on stopped nodes, and a tolerance would
    /// misplace boundaries where the value detaches like a high power of
    /// the belief.
    pub fn funding_region(&self, _u: &PiecewiseFn) -> Vec<(f64, f64)> {
        match self {
            Value::Closed(v) => v.funding_region.clone(),
            Value::Grid(g) => funding_region_fd(g, 0.0),
        }
    }

    pub fn solve(u: &PiecewiseFn, r_sigma2: f64, method: Method) -> Result<Value> {
        match method {
            Method::Closed => Ok(Value::Closed(solve_closed_form(u, r_sigma2)?)),
            Method::Fd { n_points } => Ok(Value::Grid(solve_fd(u, r_sigma2, n_points)?)),
            Method::Auto => {
                if u.is_affine() {
                    Ok(Value::Closed(solve_closed_form(u, r_sigma2)?))
                } else {
                    Ok(Value::Grid(solve_fd(u, r_sigma2, DEFAULT_GRID)?))
                }
            }
        }
    }

    pub fn sup_gap_to(&self, other: &PiecewiseFn) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let p = i as f64 / 2000.0;
            worst = worst.max((other.eval_usc(p) - self.eval(p)).abs());
        }
        worst
    }
}

/// The Markov funding policy: fund at rate one on the stored open
/// intervals, stop elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct Policy {
    pub intervals: Vec<(f64, f64)>,
}

impl Policy {
    pub fn stop() -> Self {
        Policy { intervals: Vec::new() }
    }

    pub fn is_funding(&self, p: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| p > lo && p < hi)
    }

    pub fn rate(&self, p: f64) -> f64 {
        if self.is_funding(p) {
            1.0
        } else {
            0.0
        }
    }
}

/// The best reply funds at full tilt exactly where the value strictly
/// exceeds the payoff. `tol` separates "strictly exceeds" from contact
/// for grid-valued solutions; the closed form is structural.
pub fn best_reply_policy(v: &Value, _u: &PiecewiseFn, tol: f64) -> Policy {
    let intervals = match v {
        Value::Closed(cf) => cf.funding_region.clone(),
        Value::Grid(g) => funding_region_fd(g, tol),
    };
    Policy { intervals }
}

/// Long-run absorbing beliefs from prior `p0` under the best reply, and
/// the probability `gamma` of absorbing at the lower one (so that
/// `gamma p^- + (1-gamma) p^+ = p0`). A prior already in the stopping
/// region is absorbed immediately: both beliefs equal `p0`.
pub fn long_run_beliefs(v: &Value, u: &PiecewiseFn, p0: f64) -> (BeliefPair, f64) {
    beliefs_from_region(&v.funding_region(u), p0)
}

pub(crate) fn beliefs_from_region(region: &[(f64, f64)], p0: f64) -> (BeliefPair, f64) {
    match region.iter().find(|&&(lo, hi)| p0 > lo && p0 < hi) {
        Some(&(lo, hi)) => (BeliefPair::new(lo, hi), (hi - p0) / (hi - lo)),
        None => (BeliefPair::new(p0, p0), 1.0),
    }
}

/// Full equilibrium summary at the model's prior.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub r_sigma2: f64,
    pub funding_region: Vec<(f64, f64)>,
    pub long_run: BeliefPair,
    pub persuasion: BeliefPair,
    pub value_at_prior: f64,
    pub persuasion_value: f64,
    /// Probability of absorbing at the lower long-run belief.
    pub gamma: f64,
    /// Set when the value hugs the payoff (within ten contact
    /// tolerances) on a stretch adjoining a long-run belief; long-run
    /// beliefs are then sensitive to the contact tolerance.
    pub knife_edge: bool,
    /// Stopping stretches on which the payoff is locally weakly convex.
    /// The reported policy stops there, but any funding rate is also a
    /// best reply, so the policy is not unique on these intervals.
    pub indifferent_region: Vec<(f64, f64)>,
}

pub fn equilibrium_report(model: &ModelSpec, method: Method) -> Result<EquilibriumReport> {
    let u = flow_payoff(model)?;
    equilibrium_report_for(model, &u, model.r_sigma2(), method)
}

fn flow_payoff(model: &ModelSpec) -> Result<PiecewiseFn> {
    let strat = myopic_regular_strategy(model)?;
    induced_flow_payoff(model, &strat)
}

fn equilibrium_report_for(
    model: &ModelSpec,
    u: &PiecewiseFn,
    r_sigma2: f64,
    method: Method,
) -> Result<EquilibriumReport> {
    let v = Value::solve(u, r_sigma2, method)?;
    let (long_run, gamma) = long_run_beliefs(&v, u, model.p0);
    let (persuasion, persuasion_value) = persuasion_beliefs(u, model.p0);
    let funding_region = v.funding_region(u);
    Ok(EquilibriumReport {
        r_sigma2,
        knife_edge: knife_edge_flag(&v, u, &long_run),
        indifferent_region: indifferent_stopping_region(u, &funding_region),
        funding_region,
        long_run,
        persuasion,
        value_at_prior: v.eval(model.p0),
        persuasion_value,
        gamma,
    })
}

/// Interior stopping stretches on which the payoff is locally weakly
/// convex, split at jumps and concave kinks (where local convexity
/// fails). Funding at any rate is payoff-equivalent to stopping there.
fn indifferent_stopping_region(u: &PiecewiseFn, funding: &[(f64, f64)]) -> Vec<(f64, f64)> {
    // Complement of the funding region in (0,1).
    let mut stops = Vec::new();
    let mut cursor = 0.0;
    for &(lo, hi) in funding {
        if lo > cursor {
            stops.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < 1.0 {
        stops.push((cursor, 1.0));
    }

    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in stops {
        // Local convexity fails at jumps and concave kinks; those points
        // split the stretch.
        let mut edges = vec![lo];
        for (k, &b) in u.breakpoints().iter().enumerate() {
            if b <= lo + 1e-12 || b >= hi - 1e-12 {
                continue;
            }
            let (dl, dr) = u.deriv_limits(b);
            if u.is_discontinuous_at(k) || dr < dl - 1e-9 {
                edges.push(b);
            }
        }
        edges.push(hi);
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-9 {
                continue;
            }
            let convex = u
                .pieces()
                .iter()
                .enumerate()
                .filter(|(k, _)| u.breakpoints()[*k] < b && u.breakpoints()[k + 1] > a)
                .all(|(k, piece)| {
                    piece_convex_on(piece, u.breakpoints()[k].max(a), u.breakpoints()[k + 1].min(b))
                });
            if convex {
                out.push((a, b));
            }
        }
    }
    out
}

fn piece_convex_on(piece: &Polynomial, lo: f64, hi: f64) -> bool {
    let f2 = piece.derivative().derivative();
    if f2.is_zero() {
        return true;
    }
    let tol = 1e-9 * (1.0 + piece.scale());
    let mut worst = f2.eval(lo).min(f2.eval(hi));
    for r in f2.derivative().sign_change_roots(lo, hi) {
        worst = worst.min(f2.eval(r));
    }
    worst >= -tol
}

/// Checks for near-indifference: the value staying within ten contact
/// tolerances of the payoff on the funded stretch next to a long-run
/// belief. At such parameters a small perturbation flips the contact.
fn knife_edge_flag(v: &Value, u: &PiecewiseFn, long_run: &BeliefPair) -> bool {
    if long_run.is_degenerate() {
        return false;
    }
    let tol = default_contact_tol(u);
    let width = 0.02f64.min((long_run.upper - long_run.lower) / 4.0);
    for (edge, inward) in [(long_run.lower, 1.0), (long_run.upper, -1.0)] {
        if edge <= 0.0 || edge >= 1.0 {
            continue;
        }
        let mut hug = true;
        for k in 1..=16 {
            let p = edge + inward * width * k as f64 / 16.0;
            if v.eval(p) - u.eval_usc(p) >= 10.0 * tol {
                hug = false;
                break;
            }
        }
        if hug {
            return true;
        }
    }
    false
}

/// One comparative-statics row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r_sigma2: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub pers_minus: f64,
    pub pers_plus: f64,
    pub value_at_prior: f64,
    pub sup_gap: f64,
    pub knife_edge: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub p0: f64,
    pub rows: Vec<SweepRow>,
}

/// Solves the model across a strictly decreasing list of `r sigma^2`
/// values, reporting long-run and persuasion beliefs, the value at the
/// prior, and the sup-distance to the concave envelope per row.
pub fn sweep(model: &ModelSpec, r_sigma2_list: &[f64], method: Method) -> Result<SweepTable> {
    if r_sigma2_list.len() < 2 {
        return Err(Error::InvalidParameter(
            "sweep needs at least two r*sigma^2 values".into(),
        ));
    }
    if r_sigma2_list.windows(2).any(|w| w[1] >= w[0]) || r_sigma2_list.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidParameter(
            "r*sigma^2 values must be positive and strictly decreasing".into(),
        ));
    }
    let u = flow_payoff(model)?;
    let cav = concave_envelope(&u);

    let solve_row = |&rs2: &f64| -> Result<SweepRow> {
        let report = equilibrium_report_for(model, &u, rs2, method)?;
        let v = Value::solve(&u, rs2, method)?;
        Ok(SweepRow {
            r_sigma2: rs2,
            p_minus: report.long_run.lower,
            p_plus: report.long_run.upper,
            pers_minus: report.persuasion.lower,
            pers_plus: report.persuasion.upper,
            value_at_prior: report.value_at_prior,
            sup_gap: v.sup_gap_to(&cav),
            knife_edge: report.knife_edge,
        })
    };

    #[cfg(feature = "parallel")]
    let rows: Result<Vec<SweepRow>> = r_sigma2_list.par_iter().map(solve_row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<SweepRow>> = r_sigma2_list.iter().map(solve_row).collect();

    Ok(SweepTable {
        p0: model.p0,
        rows: rows?,
    })
}

/// Outcome of the full-information check on a common-payoff model.
#[derive(Debug, Clone, Serialize)]
pub struct FullInfoReport {
    pub applicable: bool,
    /// Largest `r sigma^2` at which every interior belief is funded,
    /// grid-bracketed and bisection-refined. Absent when no tested value
    /// yields full information.
    pub eta_estimate: Option<f64>,
    pub checked_grid: Vec<(f64, bool)>,
}

/// Tests whether a purely belief-based conflict leads to full
/// information for patient principals: the payoff maps must coincide,
/// every action payoff must be convex, and the payoffs must cross with
/// a unique best action near each end of the belief interval. For each
/// `r sigma^2` in the (strictly decreasing) grid, reports whether the
/// value detaches from the payoff on the whole interior.
pub fn full_info_check(
    model: &ModelSpec,
    r_sigma2_grid: &[f64],
    n_points: usize,
) -> Result<FullInfoReport> {
    model.validate()?;
    if model.f_p != model.f_a {
        return Err(Error::NotApplicable(
            "principal and agent payoffs differ, so the conflict is not purely belief-based"
                .into(),
        ));
    }
    for (name, f) in model.actions.iter().zip(&model.f_a) {
        if !is_convex_on_unit(f) {
            return Err(Error::NotApplicable(format!(
                "payoff of action `{name}` is not convex on [0,1]"
            )));
        }
    }
    if model.actions.len() < 2 || !payoffs_cross(&model.f_a) {
        return Err(Error::NotApplicable(
            "no pair of actions with crossing payoffs".into(),
        ));
    }
    if best_action_near(&model.f_a, End::Zero).is_none()
        || best_action_near(&model.f_a, End::One).is_none()
    {
        return Err(Error::NotApplicable(
            "no unique best action near a boundary belief".into(),
        ));
    }
    if r_sigma2_grid.is_empty() || r_sigma2_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "r*sigma^2 grid must be non-empty and strictly decreasing".into(),
        ));
    }

    let u = flow_payoff(model)?;
    let full_info = |rs2: f64| -> Result<bool> {
        let v = Value::solve(&u, rs2, pick_method(&u, n_points))?;
        Ok(matches!(v.funding_region(&u).as_slice(), [(lo, hi)] if *lo == 0.0 && *hi == 1.0))
    };

    let mut checked_grid = Vec::with_capacity(r_sigma2_grid.len());
    for &rs2 in r_sigma2_grid {
        checked_grid.push((rs2, full_info(rs2)?));
    }

    let eta_estimate = match checked_grid.iter().position(|&(_, yes)| yes) {
        None => None,
        Some(0) => Some(checked_grid[0].0),
        Some(k) => {
            // Bisect between the last failing and first succeeding grid
            // values.
            let (mut hi, mut lo) = (checked_grid[k - 1].0, checked_grid[k].0);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if full_info(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        }
    };

    Ok(FullInfoReport {
        applicable: true,
        eta_estimate,
        checked_grid,
    })
}

fn pick_method(u: &PiecewiseFn, n_points: usize) -> Method {
    if u.is_affine() {
        Method::Closed
    } else {
        Method::Fd { n_points }
    }
}

fn is_convex_on_unit(f: &Polynomial) -> bool {
    let f2 = f.derivative().derivative();
    if f2.is_zero() {
        return true;
    }
    let tol = 1e-12 * (1.0 + f.scale());
    let mut worst = f2.eval(0.0).min(f2.eval(1.0));
    for r in f2.derivative().sign_change_roots(0.0, 1.0) {
        worst = worst.min(f2.eval(r));
    }
    worst >= -tol
}

fn payoffs_cross(fs: &[Polynomial]) -> bool {
    for i in 0..fs.len() {
        for j in i + 1..fs.len() {
            let d = fs[i].sub(&fs[j]);
            if !d.is_zero() && !d.sign_change_roots(0.0, 1.0).is_empty() {
                return true;
            }
        }
    }
    false
}

enum End {
    Zero,
    One,
}

/// Strict argmax in a one-sided neighbourhood of an endpoint, decided by
/// the lowest-order Taylor coefficient of each pairwise difference.
fn best_action_near(fs: &[Polynomial], end: End) -> Option<usize> {
    'outer: for i in 0..fs.len() {
        for j in 0..fs.len() {
            if i == j {
                continue;
            }
            let d = fs[i].sub(&fs[j]);
            if sign_near(&d, &end) <= 0 {
                continue 'outer;
            }
        }
        return Some(i);
    }
    None
}

fn sign_near(d: &Polynomial, end: &End) -> i8 {
    let tol = 1e-12 * (1.0 + d.scale());
    match end {
        End::Zero => {
            for &c in d.coeffs() {
                if c > tol {
                    return 1;
                }
                if c < -tol {
                    return -1;
                }
            }
            0
        }
        End::One => {
            // Taylor coefficients in (p - 1): sign of d just left of 1
            // is the sign of the first nonzero of d(1), -d'(1), d''(1)/2, ...
            let mut g = d.clone();
            let mut flip = 1.0;
            loop {
                let c = flip * g.eval(1.0);
                if c > tol {
                    return 1;
                }
                if c < -tol {
                    return -1;
                }
                if g.is_zero() {
                    return 0;
                }
                g = g.derivative();
                flip = -flip;
            }
        }
    }
}

/// Values at the principal's prior as the agent's prior approaches it
/// from one side. Requires the common payoff to be strictly
/// single-crossing (each pairwise difference changes sign at most once).
pub fn welfare_prior_monotonicity(
    model: &ModelSpec,
    p_a0_list: &[f64],
    method: Method,
) -> Result<Vec<f64>> {
    model.validate()?;
    for i in 0..model.actions.len() {
        for j in i + 1..model.actions.len() {
            let d = model.f_a[i].sub(&model.f_a[j]);
            if d.sign_change_roots(0.0, 1.0).len() > 1 {
                return Err(Error::NotSingleCrossing(
                    model.actions[i].clone(),
                    model.actions[j].clone(),
                ));
            }
        }
    }
    let below = p_a0_list.iter().all(|&q| q <= model.p0);
    let above = p_a0_list.iter().all(|&q| q >= model.p0);
    if !(below || above) {
        return Err(Error::InvalidParameter(
            "agent priors must approach the principal's prior from one side".into(),
        ));
    }
    p_a0_list
        .iter()
        .map(|&p_a0| {
            let mut m = model.clone();
            m.p_a0 = p_a0;
            let u = flow_payoff(&m)?;
            let v = Value::solve(&u, m.r_sigma2(), method)?;
            Ok(v.eval(m.p0))
        })
        .collect()
}
