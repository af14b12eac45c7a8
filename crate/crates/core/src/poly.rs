//! Real polynomials with constant-first coefficients, plus the root
//! finding used to locate payoff crossings.

use serde::{Deserialize, Serialize};

/// Tolerance for refined roots, in the argument.
const ROOT_TOL: f64 = 1e-13;

/// Subintervals scanned for sign changes when no closed form applies.
const SCAN_CELLS: usize = 4096;

/// A polynomial with coefficients in increasing order of degree
/// (`coeffs[0]` is the constant term). Trailing zero coefficients are
/// stripped on construction, so equal polynomials compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `intercept + slope * p`.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Polynomial::new(vec![intercept, slope])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Horner evaluation.
    pub fn eval(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * p + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs: Vec<f64> = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs: Vec<f64> = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    - other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Polynomial::new(coeffs)
    }

    /// Largest absolute coefficient; a cheap scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Roots in `(lo, hi)` at which the polynomial changes sign, in
    /// increasing order. Tangential roots (touching zero without a sign
    /// change) are excluded by construction. Degrees one and two use the
    /// closed form; higher degrees scan a uniform grid and bisect each
    /// bracketed sign change.
    pub fn sign_change_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        debug_assert!(lo < hi);
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let root = -self.coeffs[0] / self.coeffs[1];
                if root > lo && root < hi {
                    vec![root]
                } else {
                    Vec::new()
                }
            }
            2 => {
                let (a, b, c) = (self.coeffs[2], self.coeffs[1], self.coeffs[0]);
                let disc = b * b - 4.0 * a * c;
                if disc <= 0.0 {
                    // A double root is tangential: no sign change.
                    return Vec::new();
                }
                let sq = disc.sqrt();
                // Numerically stable pairing of the two roots.
                let q = -0.5 * (b + b.signum() * sq);
                let (mut r1, mut r2) = (q / a, c / q);
                if r1 > r2 {
                    std::mem::swap(&mut r1, &mut r2);
                }
                [r1, r2]
                    .into_iter()
                    .filter(|&r| r > lo && r < hi && r.is_finite())
                    .collect()
            }
            _ => self.scan_roots(lo, hi),
        }
    }

    fn scan_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut roots = Vec::new();
        let step = (hi - lo) / SCAN_CELLS as f64;
        let mut x_prev = lo;
        let mut f_prev = self.eval(lo);
        for k in 1..=SCAN_CELLS {
            let x = if k == SCAN_CELLS { hi } else { lo + step * k as f64 };
            let f = self.eval(x);
            if f_prev == 0.0 {
                // Sample landed on a root; classify by the neighbours.
                let before = self.eval((x_prev - step).max(lo));
                if before * f < 0.0 && x_prev > lo {
                    roots.push(x_prev);
                }
            } else if f_prev * f < 0.0 {
                roots.push(self.bisect(x_prev, x, f_prev, f));
            }
            x_prev = x;
            f_prev = f;
        }
        roots
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64, _fb: f64) -> f64 {
        while b - a > ROOT_TOL {
            let m = 0.5 * (a + b);
            let fm = self.eval(m);
            if fm == 0.0 {
                return m;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }
}
