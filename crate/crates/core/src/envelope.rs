//! Concave envelope of a piecewise-polynomial payoff and the static
//! persuasion benchmark it defines.
//!
//! The envelope is built as the upper concave hull of a candidate point
//! set: every breakpoint with its point value, plus a dense sample of
//! each curved piece. Hull edges between adjacent samples of one piece
//! are replaced by the piece itself (the contact region), and chord
//! endpoints that fall in the interior of a curved piece are refined to
//! the exact tangency point by bisection. For piecewise-affine payoffs
//! the construction is exact.

use crate::piecewise::PiecewiseFn;
use crate::poly::Polynomial;
use serde::{Deserialize, Serialize};

/// Interior samples per curved piece before refinement.
const SAMPLES_PER_PIECE: usize = 2048;

/// Absolute tolerance, in function value, for membership in the contact
/// set `{cav u = u}`.
pub const CONTACT_TOL: f64 = 1e-9;

/// A pair of beliefs `lower <= upper`, such as the two beliefs induced
/// by an optimal persuasion split or the long-run absorbing beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefPair {
    pub lower: f64,
    pub upper: f64,
}

impl BeliefPair {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper);
        BeliefPair { lower, upper }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }
}

/// Envelope plus the closed spans on which it touches the payoff.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub cav: PiecewiseFn,
    /// Maximal closed intervals (possibly degenerate points) of
    /// `{cav u = u}`, in increasing order.
    pub contact: Vec<(f64, f64)>,
}

/// Where a candidate point sits on the payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchor {
    /// Breakpoint index into `u.breakpoints()`.
    Breakpoint(usize),
    /// Interior sample `j` (1-based) of piece `k`.
    Sample { piece: usize, index: usize },
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    y: f64,
    anchor: Anchor,
}

/// Smallest concave function on [0,1] that majorises `u`.
pub fn concave_envelope(u: &PiecewiseFn) -> PiecewiseFn {
    concave_envelope_full(u).cav
}

/// Beliefs `{P^-, P^+}` induced by an optimal static persuasion split at
/// prior `p0`, together with the persuasion value `cav u(p0)`. Both
/// beliefs equal `p0` when the envelope touches the payoff there.
pub fn persuasion_beliefs(u: &PiecewiseFn, p0: f64) -> (BeliefPair, f64) {
    let env = concave_envelope_full(u);
    let value = env.cav.eval_usc(p0);
    if value - u.eval_usc(p0) <= CONTACT_TOL {
        return (BeliefPair::new(p0, p0), value);
    }
    let mut lower = 0.0f64;
    let mut upper = 1.0f64;
    for &(lo, hi) in &env.contact {
        if hi <= p0 {
            lower = lower.max(hi);
        }
        if lo >= p0 {
            upper = upper.min(lo);
            break;
        }
    }
    (BeliefPair::new(lower, upper), value)
}

pub fn concave_envelope_full(u: &PiecewiseFn) -> Envelope {
    let points = candidate_points(u);
    let mut hull = upper_hull(points);
    refine_tangencies(u, &mut hull);
    assemble(u, &hull)
}

fn candidate_points(u: &PiecewiseFn) -> Vec<Point> {
    let bps = u.breakpoints();
    let mut points = Vec::new();
    for (k, &b) in bps.iter().enumerate() {
        points.push(Point {
            x: b,
            y: u.point_values()[k],
            anchor: Anchor::Breakpoint(k),
        });
        if k + 1 == bps.len() {
            break;
        }
        let piece = &u.pieces()[k];
        if piece.degree() >= 2 {
            let (a, b_next) = (b, bps[k + 1]);
            for j in 1..=SAMPLES_PER_PIECE {
                let x = a + (b_next - a) * j as f64 / (SAMPLES_PER_PIECE + 1) as f64;
                points.push(Point {
                    x,
                    y: piece.eval(x),
                    anchor: Anchor::Sample { piece: k, index: j },
                });
            }
        }
    }
    points
}

/// Monotone-chain upper hull over points already sorted by `x`.
/// Collinear interior points are dropped; they do not change the hull.
fn upper_hull(points: Vec<Point>) -> Vec<Point> {
    let mut hull: Vec<Point> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Two hull points bound a stretch where the envelope equals the payoff
/// itself: either the two endpoints of an affine piece, or neighbouring
/// entries of one curved piece's sample grid. Breakpoint vertices carry
/// the usc point value, which exceeds the piece limit at a jump, so both
/// vertex values must actually lie on the piece.
fn is_contact_edge(u: &PiecewiseFn, a: &Point, b: &Point) -> bool {
    let grid_index = |pt: &Point, piece: usize| -> Option<usize> {
        match pt.anchor {
            Anchor::Breakpoint(k) if k == piece => Some(0),
            Anchor::Breakpoint(k) if k == piece + 1 => Some(SAMPLES_PER_PIECE + 1),
            Anchor::Sample { piece: q, index } if q == piece => Some(index),
            _ => None,
        }
    };
    for piece in 0..u.pieces().len() {
        if let (Some(i), Some(j)) = (grid_index(a, piece), grid_index(b, piece)) {
            let poly = &u.pieces()[piece];
            let tol = 1e-12 * (1.0 + poly.scale());
            if (a.y - poly.eval(a.x)).abs() > tol || (b.y - poly.eval(b.x)).abs() > tol {
                continue;
            }
            if poly.degree() <= 1 {
                return true;
            }
            if j == i + 1 {
                return true;
            }
        }
    }
    false
}

/// Pulls chord endpoints that lie in the interior of a curved piece onto
/// the exact tangency point. Fixed endpoints (breakpoints) stay put;
/// edges with two free endpoints alternate one-sided solves.
fn refine_tangencies(u: &PiecewiseFn, hull: &mut [Point]) {
    for e in 0..hull.len() - 1 {
        if is_contact_edge(u, &hull[e], &hull[e + 1]) {
            continue;
        }
        let free_left = matches!(hull[e].anchor, Anchor::Sample { .. });
        let free_right = matches!(hull[e + 1].anchor, Anchor::Sample { .. });
        if !free_left && !free_right {
            continue;
        }
        for _ in 0..80 {
            let mut moved = 0.0f64;
            if free_right {
                let fixed = (hull[e].x, hull[e].y);
                moved = moved.max(pull_to_tangency(u, fixed, &mut hull[e + 1]));
            }
            if free_left {
                let fixed = (hull[e + 1].x, hull[e + 1].y);
                moved = moved.max(pull_to_tangency(u, fixed, &mut hull[e]));
            }
            if moved < 1e-14 {
                break;
            }
        }
    }
}

/// Moves `pt` (a sample interior to a curved piece) to the point at
/// which the line from `fixed` is tangent to that piece. Returns how far
/// the point moved.
fn pull_to_tangency(u: &PiecewiseFn, fixed: (f64, f64), pt: &mut Point) -> f64 {
    let Anchor::Sample { piece, .. } = pt.anchor else {
        return 0.0;
    };
    let poly = &u.pieces()[piece];
    let deriv = poly.derivative();
    let (lo, hi) = (u.breakpoints()[piece], u.breakpoints()[piece + 1]);
    // Tangency residual: the tangent line at y, extended to the fixed
    // abscissa, must pass through the fixed point.
    let t = |y: f64| poly.eval(y) + deriv.eval(y) * (fixed.0 - y) - fixed.1;
    let spacing = (hi - lo) / (SAMPLES_PER_PIECE + 1) as f64;
    let mut a = (pt.x - 2.0 * spacing).max(lo + 1e-15);
    let mut b = (pt.x + 2.0 * spacing).min(hi - 1e-15);
    let mut widen = 0;
    while t(a) * t(b) > 0.0 && widen < 12 {
        a = (a - 4.0 * spacing).max(lo + 1e-15);
        b = (b + 4.0 * spacing).min(hi - 1e-15);
        widen += 1;
    }
    if t(a) * t(b) > 0.0 {
        return 0.0; // no bracket; keep the sampled vertex
    }
    let (mut a, mut b) = (a, b);
    let mut fa = t(a);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let fm = t(m);
        if fm == 0.0 || b - a < 1e-15 {
            a = m;
            b = m;
            break;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let x_new = 0.5 * (a + b);
    let moved = (x_new - pt.x).abs();
    pt.x = x_new;
    pt.y = poly.eval(x_new);
    moved
}

fn assemble(u: &PiecewiseFn, hull: &[Point]) -> Envelope {
    // Walk hull edges, emitting either the underlying piece (contact) or
    // an affine chord, merging consecutive contact edges.
    let mut breakpoints: Vec<f64> = vec![0.0];
    let mut pieces: Vec<Polynomial> = Vec::new();
    let mut contact: Vec<(f64, f64)> = Vec::new();
    let push_contact = |lo: f64, hi: f64, contact: &mut Vec<(f64, f64)>| {
        if let Some(last) = contact.last_mut() {
            if lo <= last.1 + 1e-12 {
                last.1 = last.1.max(hi);
                return;
            }
        }
        contact.push((lo, hi));
    };

    for e in 0..hull.len() - 1 {
        let (a, b) = (hull[e], hull[e + 1]);
        let piece = if is_contact_edge(u, &a, &b) {
            push_contact(a.x, b.x, &mut contact);
            let k = match (a.anchor, b.anchor) {
                (Anchor::Sample { piece, .. }, _) => piece,
                (_, Anchor::Sample { piece, .. }) => piece,
                (Anchor::Breakpoint(k), _) => k,
            };
            u.pieces()[k].clone()
        } else {
            // Hull vertices always lie on the payoff, so both chord
            // endpoints are contact points.
            push_contact(a.x, a.x, &mut contact);
            push_contact(b.x, b.x, &mut contact);
            let slope = (b.y - a.y) / (b.x - a.x);
            Polynomial::affine(a.y - slope * a.x, slope)
        };
        // Merge with the previous segment when the polynomial repeats
        // (adjacent samples of one piece arrive as many tiny edges).
        if breakpoints.len() > 1 && pieces.last() == Some(&piece) {
            *breakpoints.last_mut().unwrap() = b.x;
        } else if b.x - breakpoints.last().unwrap() > 1e-11 {
            breakpoints.push(b.x);
            pieces.push(piece);
        } else {
            // Degenerate sliver; extend the previous edge instead.
            if let Some(last) = breakpoints.last_mut() {
                *last = b.x;
            }
            if pieces.is_empty() {
                pieces.push(piece);
            }
        }
    }
    *breakpoints.last_mut().unwrap() = 1.0;

    // The envelope is continuous, so point values are the piece limits.
    let mut point_values = Vec::with_capacity(breakpoints.len());
    point_values.push(pieces[0].eval(0.0));
    for k in 1..breakpoints.len() - 1 {
        let b = breakpoints[k];
        point_values.push(pieces[k - 1].eval(b).max(pieces[k].eval(b)));
    }
    point_values.push(pieces.last().unwrap().eval(1.0));

    let cav = PiecewiseFn::new(breakpoints, pieces, point_values)
        .expect("hull construction yields a valid piecewise function");
    Envelope { cav, contact }
}
