//! The game primitives: payoff specification, the belief map between
//! heterogeneous priors, the agent's myopic regular strategy, and the
//! flow payoff it induces for the principal.

use crate::piecewise::{PiecewiseFn, BREAKPOINT_TOL};
use crate::poly::Polynomial;
use crate::{Error, Result};

const MAX_PAYOFF_DEGREE: usize = 8;

/// A two-player information-provision game: a finite action set with a
/// payoff polynomial per action for each player, discount rate `r`,
/// signal noise `sigma`, and the two players' priors.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub actions: Vec<String>,
    /// Principal payoffs, aligned with `actions`.
    pub f_p: Vec<Polynomial>,
    /// Agent payoffs, aligned with `actions`.
    pub f_a: Vec<Polynomial>,
    pub r: f64,
    pub sigma: f64,
    pub p0: f64,
    pub p_a0: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(Error::InvalidModel("action set is empty".into()));
        }
        if self.f_p.len() != self.actions.len() || self.f_a.len() != self.actions.len() {
            return Err(Error::InvalidModel(
                "every action needs a principal and an agent payoff".into(),
            ));
        }
        for (name, poly) in self.actions.iter().zip(self.f_p.iter().chain(self.f_a.iter())) {
            if poly.degree() > MAX_PAYOFF_DEGREE {
                return Err(Error::InvalidModel(format!(
                    "payoff of action `{name}` has degree {} > {MAX_PAYOFF_DEGREE}",
                    poly.degree()
                )));
            }
            if poly.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "payoff of action `{name}` has a non-finite coefficient"
                )));
            }
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidModel(format!("r must be positive, got {}", self.r)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidModel(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        for (name, p) in [("p0", self.p0), ("p_a0", self.p_a0)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidModel(format!(
                    "{name} must lie strictly inside (0,1), got {p}"
                )));
            }
        }
        Ok(())
    }

    /// The composite impatience parameter; the value function depends on
    /// `(r, sigma)` only through it.
    pub fn r_sigma2(&self) -> f64 {
        self.r * self.sigma * self.sigma
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }
}

/// Maps the principal's belief `p` to the agent's belief when the two
/// players hold priors `p0` and `p_a0`: both posteriors share the same
/// likelihood ratio, so
/// `phi(p) = p / (p + (1-p) D)` with `D = [p0/(1-p0)] / [p_a0/(1-p_a0)]`.
pub fn phi_map(p: f64, p0: f64, p_a0: f64) -> Result<f64> {
    for (name, q) in [("p0", p0), ("p_a0", p_a0)] {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie strictly inside (0,1), got {q}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("belief {p} outside [0,1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    let d = (p0 / (1.0 - p0)) / (p_a0 / (1.0 - p_a0));
    if d == 1.0 {
        return Ok(p);
    }
    Ok(p / (p + (1.0 - p) * d))
}

/// Inverse of [`phi_map`] in its belief argument: swap the priors.
pub fn phi_inverse(q: f64, p0: f64, p_a0: f64) -> Result<f64> {
    phi_map(q, p_a0, p0)
}

/// A pure Markov strategy of the agent, stored in the principal's belief
/// coordinate: one action per open interval between breakpoints and one
/// per breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStrategy {
    /// Interior breakpoints, strictly increasing, in (0,1).
    pub breakpoints: Vec<f64>,
    /// Chosen action index per interval; `interval_actions.len() == breakpoints.len() + 1`.
    pub interval_actions: Vec<usize>,
    /// Chosen action index at each breakpoint.
    pub breakpoint_actions: Vec<usize>,
}

/// Builds the agent's myopic strategy with principal-preferred
/// tie-breaking. Crossings of the agent payoffs are located in the
/// agent's own belief coordinate and then mapped into the principal's
/// coordinate through the inverse prior map; with a common prior the map
/// is the identity and breakpoints are kept bit-exact.
pub fn myopic_regular_strategy(spec: &ModelSpec) -> Result<AgentStrategy> {
    spec.validate()?;
    let n = spec.actions.len();
    let common_prior = spec.p0 == spec.p_a0;

    // Candidate cut points in the agent coordinate.
    let mut cuts: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let diff = spec.f_a[i].sub(&spec.f_a[j]);
            if diff.is_zero() {
                // Identical agent payoffs: the tie is broken by the
                // principal's payoff, whose own crossings (in the
                // principal coordinate) may split the interval.
                let pdiff = spec.f_p[i].sub(&spec.f_p[j]);
                for root in pdiff.sign_change_roots(0.0, 1.0) {
                    cuts.push(phi_map(root, spec.p0, spec.p_a0)?);
                }
            } else {
                cuts.extend(diff.sign_change_roots(0.0, 1.0));
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_TOL);

    // Chosen action on each candidate interval, evaluated at midpoints.
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(&cuts);
    edges.push(1.0);
    let mut interval_actions: Vec<usize> = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let q_mid = 0.5 * (w[0] + w[1]);
        let p_mid = phi_inverse(q_mid, spec.p0, spec.p_a0)?;
        interval_actions.push(choose_action(spec, q_mid, p_mid));
    }

    // Merge intervals on which the chosen action does not change;
    // tangential crossings disappear here.
    let mut breakpoints_q: Vec<f64> = Vec::new();
    let mut merged_actions: Vec<usize> = vec![interval_actions[0]];
    for (k, &cut) in cuts.iter().enumerate() {
        if interval_actions[k + 1] != *merged_actions.last().unwrap() {
            breakpoints_q.push(cut);
            merged_actions.push(interval_actions[k + 1]);
        }
    }

    // Tie-breaking at the surviving breakpoints.
    let mut breakpoints = Vec::with_capacity(breakpoints_q.len());
    let mut breakpoint_actions = Vec::with_capacity(breakpoints_q.len());
    for &q in &breakpoints_q {
        let p = if common_prior {
            q
        } else {
            phi_inverse(q, spec.p0, spec.p_a0)?
        };
        breakpoints.push(p);
        breakpoint_actions.push(choose_action(spec, q, p));
    }

    Ok(AgentStrategy {
        breakpoints,
        interval_actions: merged_actions,
        breakpoint_actions,
    })
}

/// Myopically optimal action at agent belief `q`, breaking ties by the
/// principal's payoff at her own belief `p`, then by action order.
fn choose_action(spec: &ModelSpec, q: f64, p: f64) -> usize {
    let payoffs: Vec<f64> = spec.f_a.iter().map(|f| f.eval(q)).collect();
    let best = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = 1.0 + payoffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut chosen = usize::MAX;
    let mut chosen_fp = f64::NEG_INFINITY;
    for (a, &fa) in payoffs.iter().enumerate() {
        if best - fa <= tol {
            let fp = spec.f_p[a].eval(p);
            if chosen == usize::MAX || fp > chosen_fp + 1e-15 {
                chosen = a;
                chosen_fp = fp;
            }
        }
    }
    chosen
}

/// The principal's flow payoff under `strat`: on each interval the
/// principal earns `f_P(a, p)` at her own belief `p`, where `a` is the
/// action the agent takes there. Upper semi-continuous by construction
/// of the regular strategy.
pub fn induced_flow_payoff(spec: &ModelSpec, strat: &AgentStrategy) -> Result<PiecewiseFn> {
    let pieces: Vec<Polynomial> = strat
        .interval_actions
        .iter()
        .map(|&a| spec.f_p[a].clone())
        .collect();
    let mut breakpoints = Vec::with_capacity(strat.breakpoints.len() + 2);
    breakpoints.push(0.0);
    breakpoints.extend_from_slice(&strat.breakpoints);
    breakpoints.push(1.0);
    let mut point_values = Vec::with_capacity(breakpoints.len());
    point_values.push(pieces[0].eval(0.0));
    for (k, &b) in strat.breakpoints.iter().enumerate() {
        point_values.push(spec.f_p[strat.breakpoint_actions[k]].eval(b));
    }
    point_values.push(pieces.last().unwrap().eval(1.0));
    PiecewiseFn::new(breakpoints, pieces, point_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_action() -> ModelSpec {
        ModelSpec {
            actions: vec!["0".into(), "1".into()],
            f_p: vec![Polynomial::zero(), Polynomial::affine(-0.5, 1.5)],
            f_a: vec![Polynomial::zero(), Polynomial::affine(-0.5, 0.75)],
            r: 1.0,
            sigma: 2.0,
            p0: 0.5,
            p_a0: 0.5,
        }
    }

    fn three_action() -> ModelSpec {
        ModelSpec {
            actions: vec!["0".into(), "1".into(), "3".into()],
            f_p: vec![
                Polynomial::zero(),
                Polynomial::constant(1.0),
                Polynomial::constant(3.0),
            ],
            f_a: vec![
                Polynomial::zero(),
                Polynomial::affine(-1.0, 2.0),
                Polynomial::affine(-3.0, 14.0 / 3.0),
            ],
            r: 1.0,
            sigma: 2.0,
            p0: 0.625,
            p_a0: 0.625,
        }
    }

    #[test]
    fn phi_map_paper_value() {
        // Priors 1/2 vs 1/5 give likelihood-ratio scale D = 4; the
        // principal's 2/3 corresponds to the agent's 1/3.
        let q = phi_map(2.0 / 3.0, 0.5, 0.2).unwrap();
        assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn phi_map_identity_and_fixed_points() {
        assert_eq!(phi_map(0.37, 0.4, 0.4).unwrap(), 0.37);
        assert_eq!(phi_map(0.0, 0.5, 0.2).unwrap(), 0.0);
        assert_eq!(phi_map(1.0, 0.5, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn phi_map_rejects_degenerate_priors() {
        assert!(phi_map(0.5, 0.0, 0.5).is_err());
        assert!(phi_map(0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn two_action_strategy() {
        let strat = myopic_regular_strategy(&two_action()).unwrap();
        assert_eq!(strat.breakpoints, vec![2.0 / 3.0]);
        assert_eq!(strat.interval_actions, vec![0, 1]);
        // At the threshold the agent is indifferent; the principal
        // prefers action 1.
        assert_eq!(strat.breakpoint_actions, vec![1]);
    }

    #[test]
    fn three_action_strategy() {
        let strat = myopic_regular_strategy(&three_action()).unwrap();
        assert_eq!(strat.breakpoints.len(), 2);
        assert_abs_diff_eq!(strat.breakpoints[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(strat.breakpoints[1], 0.75, epsilon = 1e-12);
        assert_eq!(strat.interval_actions, vec![0, 1, 2]);
        assert_eq!(strat.breakpoint_actions, vec![1, 2]);
    }

    #[test]
    fn single_action_strategy() {
        let spec = ModelSpec {
            actions: vec!["only".into()],
            f_p: vec![Polynomial::affine(0.0, 1.0)],
            f_a: vec![Polynomial::zero()],
            r: 1.0,
            sigma: 1.0,
            p0: 0.5,
            p_a0: 0.5,
        };
        let strat = myopic_regular_strategy(&spec).unwrap();
        assert!(strat.breakpoints.is_empty());
        let u = induced_flow_payoff(&spec, &strat).unwrap();
        assert_abs_diff_eq!(u.eval_usc(0.3), 0.3);
    }

    #[test]
    fn two_action_flow_payoff() {
        let spec = two_action();
        let strat = myopic_regular_strategy(&spec).unwrap();
        let u = induced_flow_payoff(&spec, &strat).unwrap();
        assert_abs_diff_eq!(u.eval_usc(0.5), 0.0);
        assert_abs_diff_eq!(u.eval_usc(2.0 / 3.0), 0.5);
        assert_abs_diff_eq!(u.eval_usc(0.8), 1.5 * 0.8 - 0.5);
        assert_abs_diff_eq!(u.eval_usc(1.0), 1.0);
    }

    #[test]
    fn heterogeneous_priors_shift_the_threshold() {
        // Common payoff f = f_P, agent prior 1/5: the agent's threshold
        // 1/3 sits at principal belief 2/3.
        let f = vec![Polynomial::zero(), Polynomial::affine(-0.5, 1.5)];
        let spec = ModelSpec {
            actions: vec!["0".into(), "1".into()],
            f_p: f.clone(),
            f_a: f,
            r: 1.0,
            sigma: 2.0,
            p0: 0.5,
            p_a0: 0.2,
        };
        let strat = myopic_regular_strategy(&spec).unwrap();
        assert_eq!(strat.breakpoints.len(), 1);
        assert_abs_diff_eq!(strat.breakpoints[0], 2.0 / 3.0, epsilon = 1e-12);
        let u = induced_flow_payoff(&spec, &strat).unwrap();
        assert_abs_diff_eq!(u.eval_usc(0.6), 0.0);
        assert_abs_diff_eq!(u.eval_usc(2.0 / 3.0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn induced_payoff_matches_brute_force_argmax() {
        // Off breakpoints, u(p) must equal the best principal payoff
        // over myopically optimal actions; at breakpoints it dominates.
        for spec in [two_action(), three_action()] {
            let strat = myopic_regular_strategy(&spec).unwrap();
            let u = induced_flow_payoff(&spec, &strat).unwrap();
            for i in 0..=10_000 {
                let p = i as f64 / 10_000.0;
                let best_fa = spec.f_a.iter().map(|f| f.eval(p)).fold(f64::NEG_INFINITY, f64::max);
                let best_fp = spec
                    .f_a
                    .iter()
                    .zip(&spec.f_p)
                    .filter(|(fa, _)| best_fa - fa.eval(p) <= 1e-9)
                    .map(|(_, fp)| fp.eval(p))
                    .fold(f64::NEG_INFINITY, f64::max);
                let got = u.eval_usc(p);
                if strat.breakpoints.iter().any(|b| (b - p).abs() < 1e-6) {
                    assert!(got >= best_fp - 1e-9, "usc must dominate at p={p}");
                } else {
                    assert_abs_diff_eq!(got, best_fp, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut spec = two_action();
        spec.p0 = 1.2;
        assert!(spec.validate().is_err());
        let mut spec = two_action();
        spec.r = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = two_action();
        spec.f_a.pop();
        assert!(spec.validate().is_err());
        let mut spec = two_action();
        spec.f_p[0] = Polynomial::new(vec![1.0; 10]); // degree 9
        assert!(spec.validate().is_err());
    }

    proptest! {
        #[test]
        fn phi_roundtrip_is_identity(p in 0.0f64..=1.0, p0 in 0.05f64..0.95, pa0 in 0.05f64..0.95) {
            let q = phi_map(p, p0, pa0).unwrap();
            let back = phi_inverse(q, p0, pa0).unwrap();
            prop_assert!((back - p).abs() <= 1e-12);
        }

        #[test]
        fn phi_is_increasing(p in 0.0f64..0.99, p0 in 0.05f64..0.95, pa0 in 0.05f64..0.95) {
            let a = phi_map(p, p0, pa0).unwrap();
            let b = phi_map(p + 0.01, p0, pa0).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn breakpoints_invariant_to_common_payoff_shift(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
        ) {
            // Adding the same polynomial to every agent payoff does not
            // move the argmax, so the strategy stays put.
            let spec = three_action();
            let shift = Polynomial::new(vec![c0, c1, c2]);
            let mut shifted = spec.clone();
            shifted.f_a = spec.f_a.iter().map(|f| f.add(&shift)).collect();
            let a = myopic_regular_strategy(&spec).unwrap();
            let b = myopic_regular_strategy(&shifted).unwrap();
            prop_assert_eq!(a.interval_actions, b.interval_actions);
            prop_assert_eq!(a.breakpoints.len(), b.breakpoints.len());
            for (x, y) in a.breakpoints.iter().zip(&b.breakpoints) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
