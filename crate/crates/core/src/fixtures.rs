//! Bundled benchmark models used across tests, the CLI, and the docs.

use crate::model::ModelSpec;
use crate::poly::Polynomial;

/// Two actions with a conflict of interest: the agent acts iff her
/// payoff `3/4 p - 1/2` is non-negative, while the principal earns
/// `3/2 p - 1/2` from action. The induced payoff jumps at `p = 2/3`.
pub fn two_action() -> ModelSpec {
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

/// Three actions worth 0, 1 and 3 to the principal; the agent switches
/// at `1/2` and `3/4`, so the induced payoff is a three-level staircase.
pub fn three_action() -> ModelSpec {
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

/// Single action with the symmetric double-hump payoff
/// `10(-3.5(p-1/2)^4 + (p-1/2)^2) + 1/8`. Its concave envelope bridges
/// the two humps with a horizontal chord, and the long-run beliefs stay
/// strictly inside the persuasion beliefs for every impatience level.
pub fn quartic() -> ModelSpec {
    ModelSpec {
        actions: vec!["0".into()],
        f_p: vec![Polynomial::new(vec![0.4375, 7.5, -42.5, 70.0, -35.0])],
        f_a: vec![Polynomial::zero()],
        r: 1.0,
        sigma: 1.0,
        p0: 0.5,
        p_a0: 0.5,
    }
}

/// The two-action conflict re-cast as pure belief disagreement: both
/// players share the principal's payoff, but the agent's prior is 1/5
/// against the principal's 1/2. Her action threshold (belief 1/3) then
/// sits at principal belief 2/3, reproducing the two-action payoff.
pub fn common_payoff_two_action() -> ModelSpec {
    let f = vec![Polynomial::zero(), Polynomial::affine(-0.5, 1.5)];
    ModelSpec {
        actions: vec!["0".into(), "1".into()],
        f_p: f.clone(),
        f_a: f,
        r: 1.0,
        sigma: 2.0,
        p0: 0.5,
        p_a0: 0.2,
    }
}

/// Common payoff `p(1-p)`: strictly concave, so information is never
/// valuable and the full-information check must reject the model.
pub fn concave_common_payoff() -> ModelSpec {
    let f = vec![Polynomial::new(vec![0.0, 1.0, -1.0])];
    ModelSpec {
        actions: vec!["0".into()],
        f_p: f.clone(),
        f_a: f,
        r: 1.0,
        sigma: 1.0,
        p0: 0.5,
        p_a0: 0.5,
    }
}

/// All bundled fixtures with their file-stem names.
pub fn all() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("two_action", two_action()),
        ("three_action", three_action()),
        ("quartic", quartic()),
        ("common_payoff_two_action", common_payoff_two_action()),
        ("concave_common_payoff", concave_common_payoff()),
    ]
}
