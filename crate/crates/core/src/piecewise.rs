//! Piecewise-polynomial functions on [0,1] with explicit point values at
//! breakpoints, evaluated upper semi-continuously.

use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two beliefs closer than this are treated as the same breakpoint.
/// Roots are refined well past this, so only genuine coincidences snap.
pub(crate) const BREAKPOINT_TOL: f64 = 1e-11;

/// A function on [0,1] given by one polynomial per open interval between
/// consecutive breakpoints, plus an explicit value at every breakpoint.
///
/// The point value at an interior breakpoint must weakly dominate both
/// one-sided limits, which makes the function upper semi-continuous; at 0
/// and 1 the point value must equal the one-sided limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    pieces: Vec<Polynomial>,
    point_values: Vec<f64>,
}

impl PiecewiseFn {
    pub fn new(
        breakpoints: Vec<f64>,
        pieces: Vec<Polynomial>,
        point_values: Vec<f64>,
    ) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] - w[0] <= BREAKPOINT_TOL) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if pieces.len() + 1 != breakpoints.len() || point_values.len() != breakpoints.len() {
            return Err(Error::InvalidParameter(
                "need one piece per interval and one point value per breakpoint".into(),
            ));
        }
        let scale = 1.0
            + pieces.iter().map(Polynomial::scale).fold(0.0, f64::max)
            + point_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        if (point_values[0] - pieces[0].eval(0.0)).abs() > tol
            || (point_values[point_values.len() - 1] - pieces[pieces.len() - 1].eval(1.0)).abs()
                > tol
        {
            return Err(Error::InvalidParameter(
                "point values at 0 and 1 must equal the one-sided limits".into(),
            ));
        }
        for k in 1..breakpoints.len() - 1 {
            let b = breakpoints[k];
            let left = pieces[k - 1].eval(b);
            let right = pieces[k].eval(b);
            if point_values[k] < left.max(right) - tol {
                return Err(Error::InvalidParameter(format!(
                    "point value at {b} is below a one-sided limit (not upper semi-continuous)"
                )));
            }
        }
        Ok(PiecewiseFn {
            breakpoints,
            pieces,
            point_values,
        })
    }

    /// Builds from interior breakpoints and pieces, taking the larger
    /// one-sided limit as each interior point value.
    pub fn from_pieces(interior_breakpoints: &[f64], pieces: Vec<Polynomial>) -> Result<Self> {
        let mut breakpoints = Vec::with_capacity(interior_breakpoints.len() + 2);
        breakpoints.push(0.0);
        breakpoints.extend_from_slice(interior_breakpoints);
        breakpoints.push(1.0);
        let mut point_values = Vec::with_capacity(breakpoints.len());
        point_values.push(pieces[0].eval(0.0));
        for k in 1..breakpoints.len() - 1 {
            let b = breakpoints[k];
            point_values.push(pieces[k - 1].eval(b).max(pieces[k].eval(b)));
        }
        point_values.push(pieces.last().unwrap().eval(1.0));
        PiecewiseFn::new(breakpoints, pieces, point_values)
    }

    pub fn from_polynomial(poly: Polynomial) -> Self {
        let point_values = vec![poly.eval(0.0), poly.eval(1.0)];
        PiecewiseFn {
            breakpoints: vec![0.0, 1.0],
            pieces: vec![poly],
            point_values,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_polynomial(Polynomial::constant(c))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interior_breakpoints(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn point_values(&self) -> &[f64] {
        &self.point_values
    }

    pub fn is_affine(&self) -> bool {
        self.pieces.iter().all(|p| p.degree() <= 1)
    }

    /// Index of the breakpoint within [`BREAKPOINT_TOL`] of `p`, if any.
    fn breakpoint_index(&self, p: f64) -> Option<usize> {
        let k = self.breakpoints.partition_point(|&b| b < p);
        if k < self.breakpoints.len() && (self.breakpoints[k] - p).abs() <= BREAKPOINT_TOL {
            return Some(k);
        }
        if k > 0 && (self.breakpoints[k - 1] - p).abs() <= BREAKPOINT_TOL {
            return Some(k - 1);
        }
        None
    }

    /// Index of the piece whose open interval contains `p`. For `p` at
    /// (or within tolerance of) a breakpoint this returns the piece to
    /// its right, or the last piece at 1.
    pub fn piece_index(&self, p: f64) -> usize {
        if let Some(k) = self.breakpoint_index(p) {
            return k.min(self.pieces.len() - 1);
        }
        self.breakpoints.partition_point(|&b| b <= p).clamp(1, self.pieces.len()) - 1
    }

    /// Upper semi-continuous evaluation: the point value at breakpoints,
    /// the polynomial value elsewhere.
    pub fn eval_usc(&self, p: f64) -> f64 {
        match self.breakpoint_index(p) {
            Some(k) => self.point_values[k],
            None => self.pieces[self.piece_index(p)].eval(p),
        }
    }

    /// One-sided limits `(left, right)` at `p`; equal off breakpoints.
    /// At 0 and 1 both slots carry the single one-sided limit.
    pub fn eval_limits(&self, p: f64) -> (f64, f64) {
        match self.breakpoint_index(p) {
            Some(0) => {
                let v = self.pieces[0].eval(self.breakpoints[0]);
                (v, v)
            }
            Some(k) if k == self.breakpoints.len() - 1 => {
                let v = self.pieces[k - 1].eval(self.breakpoints[k]);
                (v, v)
            }
            Some(k) => {
                let b = self.breakpoints[k];
                (self.pieces[k - 1].eval(b), self.pieces[k].eval(b))
            }
            None => {
                let v = self.pieces[self.piece_index(p)].eval(p);
                (v, v)
            }
        }
    }

    /// One-sided derivatives `(left, right)` at `p`.
    pub fn deriv_limits(&self, p: f64) -> (f64, f64) {
        match self.breakpoint_index(p) {
            Some(0) => {
                let d = self.pieces[0].derivative().eval(0.0);
                (d, d)
            }
            Some(k) if k == self.breakpoints.len() - 1 => {
                let d = self.pieces[k - 1].derivative().eval(1.0);
                (d, d)
            }
            Some(k) => {
                let b = self.breakpoints[k];
                (
                    self.pieces[k - 1].derivative().eval(b),
                    self.pieces[k].derivative().eval(b),
                )
            }
            None => {
                let d = self.pieces[self.piece_index(p)].derivative().eval(p);
                (d, d)
            }
        }
    }

    /// Whether the function jumps at interior breakpoint index `k`.
    pub fn is_discontinuous_at(&self, k: usize) -> bool {
        let b = self.breakpoints[k];
        let left = self.pieces[k - 1].eval(b);
        let right = self.pieces[k].eval(b);
        let scale = 1.0 + left.abs().max(right.abs());
        (left - right).abs() > 1e-9 * scale
            || (self.point_values[k] - left.max(right)).abs() > 1e-9 * scale
    }

    /// Range `(min, max)` over [0,1], via piece critical points and the
    /// stored point values.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.point_values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for (k, piece) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
            for x in [a, b] {
                let v = piece.eval(x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if piece.degree() >= 2 {
                for r in piece.derivative().sign_change_roots(a, b) {
                    let v = piece.eval(r);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// u from the two-action benchmark: 0 below 2/3, then 1.5p - 0.5.
    fn two_action_u() -> PiecewiseFn {
        PiecewiseFn::from_pieces(
            &[2.0 / 3.0],
            vec![Polynomial::zero(), Polynomial::affine(-0.5, 1.5)],
        )
        .unwrap()
    }

    /// u from the three-action benchmark: steps 0, 1, 3.
    fn three_action_u() -> PiecewiseFn {
        PiecewiseFn::from_pieces(
            &[0.5, 0.75],
            vec![
                Polynomial::zero(),
                Polynomial::constant(1.0),
                Polynomial::constant(3.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn usc_at_jump() {
        let u = two_action_u();
        assert_abs_diff_eq!(u.eval_usc(2.0 / 3.0), 0.5);
        let (l, r) = u.eval_limits(2.0 / 3.0);
        assert_abs_diff_eq!(l, 0.0);
        assert_abs_diff_eq!(r, 0.5);
    }

    #[test]
    fn value_equals_limits_off_breakpoints() {
        let u = two_action_u();
        for p in [0.1, 0.5, 0.66, 0.7, 0.9] {
            let (l, r) = u.eval_limits(p);
            assert_eq!(l, r);
            assert_eq!(l, u.eval_usc(p));
        }
    }

    #[test]
    fn three_action_point_values() {
        let u = three_action_u();
        assert_abs_diff_eq!(u.eval_usc(0.75), 3.0);
        let (l, r) = u.eval_limits(0.75);
        assert_abs_diff_eq!(l, 1.0);
        assert_abs_diff_eq!(r, 3.0);
        assert_abs_diff_eq!(u.eval_usc(0.5), 1.0);
    }

    #[test]
    fn endpoint_evaluation() {
        let u = two_action_u();
        assert_abs_diff_eq!(u.eval_usc(0.0), 0.0);
        assert_abs_diff_eq!(u.eval_usc(1.0), 1.0);
        let (l, r) = u.eval_limits(1.0);
        assert_eq!(l, r);
    }

    #[test]
    fn rejects_non_usc_point_values() {
        let err = PiecewiseFn::new(
            vec![0.0, 0.5, 1.0],
            vec![Polynomial::constant(1.0), Polynomial::zero()],
            vec![1.0, 0.0, 0.0], // 0 < max(1, 0) at the jump
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewiseFn::new(
            vec![0.0, 0.9],
            vec![Polynomial::zero()],
            vec![0.0, 0.0]
        )
        .is_err());
    }

    #[test]
    fn range_covers_interior_extrema() {
        // p(1-p) peaks at 1/4 in the interior.
        let u = PiecewiseFn::from_polynomial(Polynomial::new(vec![0.0, 1.0, -1.0]));
        let (lo, hi) = u.range();
        assert_abs_diff_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 0.25, epsilon = 1e-12);
    }
}
