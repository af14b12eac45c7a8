//! Monte Carlo simulation of the belief martingale under a Markov
//! funding policy.
//!
//! While the policy funds, the belief follows the Euler–Maruyama step
//! `p += p (1-p) / sigma * sqrt(dt) * Z`; a path is absorbed the first
//! time it steps out of the funding interval containing its prior (or
//! hits 0 or 1). Exiting the interval is what matters, not where the
//! step lands: the continuous belief cannot jump across an isolated
//! stopping point into the next funding interval, so neither may the
//! discretisation. Every path draws from its own ChaCha stream keyed by
//! (seed, path), so results are bit-identical no matter how paths are
//! scheduled.

use crate::equilibrium::Policy;
use crate::piecewise::PiecewiseFn;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Simulation controls.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub store_paths: bool,
}

impl SimConfig {
    /// Defaults: `dt = 1e-4`, horizon `50/r`, 10000 paths, seed 0.
    pub fn defaults_for(r: f64) -> Self {
        SimConfig {
            dt: 1e-4,
            horizon: 50.0 / r,
            n_paths: 10_000,
            seed: 0,
            store_paths: false,
        }
    }

    pub fn validate(&self, sigma: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.horizon < self.dt {
            return Err(Error::InvalidParameter(
                "horizon must be at least one time step".into(),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        // Step-variance heuristic at the diffusion peak p = 1/2.
        if self.dt / (16.0 * sigma * sigma) > 0.1 {
            return Err(Error::InvalidParameter(format!(
                "dt = {} is unstable for sigma = {sigma}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Summary statistics of the absorption times of absorbed paths.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TimeStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Aggregate simulation output. Counts are exact and reproducible;
/// means reduce over paths in index order.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub n_absorbed_low: usize,
    pub n_absorbed_high: usize,
    pub n_running: usize,
    pub mean_terminal: f64,
    pub se_terminal: f64,
    pub mean_discounted_payoff: f64,
    pub se_discounted_payoff: f64,
    pub absorption_times: TimeStats,
    /// Share of steps clipped back into [0,1].
    pub clamp_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_paths: Option<Vec<Vec<(f64, f64)>>>,
}

struct PathOutcome {
    terminal: f64,
    absorbed_at: Option<f64>,
    exit_low: bool,
    payoff: f64,
    clamps: u64,
    steps: u64,
    trace: Option<Vec<(f64, f64)>>,
}

const STORED_PATHS: usize = 100;
const TRACE_POINTS: usize = 2000;

/// Runs `cfg.n_paths` independent belief paths from `p0` under `policy`,
/// accruing the discounted flow `r e^{-rt} u(p_t)` along the way and the
/// frozen tail `e^{-r tau} u(p_tau)` on absorption.
pub fn simulate_paths(
    u: &PiecewiseFn,
    r: f64,
    sigma: f64,
    policy: &Policy,
    p0: f64,
    cfg: &SimConfig,
) -> Result<SimResult> {
    if !(r > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "r and sigma must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParameter(format!("prior {p0} outside [0,1]")));
    }
    cfg.validate(sigma)?;

    // The funding interval the paths start in; they absorb on leaving it.
    let home = policy
        .intervals
        .iter()
        .copied()
        .find(|&(lo, hi)| p0 > lo && p0 < hi);

    let run_path = |j: usize| -> PathOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(j as u64 + 1);
        let max_steps = (cfg.horizon / cfg.dt).ceil() as u64;
        let trace_every = (max_steps as usize / TRACE_POINTS).max(1) as u64;
        let mut trace = (cfg.store_paths && j < STORED_PATHS).then(Vec::new);

        let mut p = p0;
        let mut payoff = 0.0;
        let mut clamps = 0u64;
        let mut step = 0u64;
        loop {
            let t = step as f64 * cfg.dt;
            if let Some(trace) = trace.as_mut() {
                if step % trace_every == 0 {
                    trace.push((t, p));
                }
            }
            let alive = match home {
                Some((lo, hi)) => p > lo && p < hi,
                None => false,
            };
            if !alive {
                // The continuous martingale is absorbed the instant it
                // hits the interval edge; land the path there rather
                // than at the overshot point, whose payoff may differ.
                let (terminal, exit_low) = match home {
                    Some((lo, hi)) => {
                        if p <= lo {
                            (lo, true)
                        } else {
                            (hi, false)
                        }
                    }
                    None => (p, true),
                };
                payoff += (-r * t).exp() * u.eval_usc(terminal);
                if let Some(trace) = trace.as_mut() {
                    trace.push((t, terminal));
                }
                return PathOutcome {
                    terminal,
                    absorbed_at: Some(t),
                    exit_low,
                    payoff,
                    clamps,
                    steps: step,
                    trace,
                };
            }
            if step >= max_steps {
                payoff += (-r * t).exp() * u.eval_usc(p);
                return PathOutcome {
                    terminal: p,
                    absorbed_at: None,
                    exit_low: false,
                    payoff,
                    clamps,
                    steps: step,
                    trace,
                };
            }
            payoff += r * (-r * t).exp() * u.eval_usc(p) * cfg.dt;
            let z: f64 = rng.sample(StandardNormal);
            let next = p + p * (1.0 - p) / sigma * cfg.dt.sqrt() * z;
            p = if next < 0.0 {
                clamps += 1;
                0.0
            } else if next > 1.0 {
                clamps += 1;
                1.0
            } else {
                next
            };
            step += 1;
        }
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths).into_par_iter().map(run_path).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths).map(run_path).collect();

    // Sequential reduction in path order keeps sums bit-stable.
    let n = cfg.n_paths as f64;
    let mut low = 0usize;
    let mut high = 0usize;
    let mut running = 0usize;
    let mut term_sum = 0.0;
    let mut term_sq = 0.0;
    let mut pay_sum = 0.0;
    let mut pay_sq = 0.0;
    let mut tau = TimeStats {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        mean: 0.0,
    };
    let mut tau_sum = 0.0;
    let mut clamps = 0u64;
    let mut steps = 0u64;
    let mut stored = cfg.store_paths.then(Vec::new);
    for o in &outcomes {
        term_sum += o.terminal;
        term_sq += o.terminal * o.terminal;
        pay_sum += o.payoff;
        pay_sq += o.payoff * o.payoff;
        clamps += o.clamps;
        steps += o.steps;
        match o.absorbed_at {
            Some(t) => {
                if o.exit_low {
                    low += 1;
                } else {
                    high += 1;
                }
                tau.min = tau.min.min(t);
                tau.max = tau.max.max(t);
                tau_sum += t;
            }
            None => running += 1,
        }
    }
    if let Some(stored) = stored.as_mut() {
        for o in outcomes {
            if let Some(trace) = o.trace {
                stored.push(trace);
            }
        }
    }
    let n_absorbed = low + high;
    if n_absorbed > 0 {
        tau.mean = tau_sum / n_absorbed as f64;
    } else {
        tau = TimeStats::default();
    }
    let mean_terminal = term_sum / n;
    let var_terminal = (term_sq / n - mean_terminal * mean_terminal).max(0.0);
    let mean_payoff = pay_sum / n;
    let var_payoff = (pay_sq / n - mean_payoff * mean_payoff).max(0.0);

    Ok(SimResult {
        n_absorbed_low: low,
        n_absorbed_high: high,
        n_running: running,
        mean_terminal,
        se_terminal: (var_terminal / n).sqrt(),
        mean_discounted_payoff: mean_payoff,
        se_discounted_payoff: (var_payoff / n).sqrt(),
        absorption_times: tau,
        clamp_fraction: if steps > 0 {
            clamps as f64 / steps as f64
        } else {
            0.0
        },
        stored_paths: stored,
    })
}

/// Z-scores of the simulation against the predicted absorption split:
/// the absorbed-at-the-upper-belief fraction against `1 - gamma`, and
/// the mean terminal belief against the martingale mean `p0`. Both are
/// zero by convention when the prediction is degenerate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZScores {
    pub z_upper_fraction: f64,
    pub z_mean_terminal: f64,
}

pub fn absorption_stats(
    result: &SimResult,
    expected: &crate::envelope::BeliefPair,
    p0: f64,
) -> ZScores {
    let z_mean = if result.se_terminal > 0.0 {
        (result.mean_terminal - p0) / result.se_terminal
    } else {
        0.0
    };
    let n_abs = result.n_absorbed_low + result.n_absorbed_high;
    let z_frac = if expected.is_degenerate() || n_abs == 0 {
        0.0
    } else {
        let gamma = (expected.upper - p0) / (expected.upper - expected.lower);
        let want_high = 1.0 - gamma;
        let se = (want_high * (1.0 - want_high) / n_abs as f64).sqrt();
        if se == 0.0 {
            0.0
        } else {
            (result.n_absorbed_high as f64 / n_abs as f64 - want_high) / se
        }
    };
    ZScores {
        z_upper_fraction: z_frac,
        z_mean_terminal: z_mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::BeliefPair;
    use crate::equilibrium::{best_reply_policy, Method, Value};
    use crate::fd::default_contact_tol;
    use crate::fixtures;
    use crate::model::{induced_flow_payoff, myopic_regular_strategy};
    use approx::assert_abs_diff_eq;

    fn u_of(spec: &crate::ModelSpec) -> PiecewiseFn {
        let strat = myopic_regular_strategy(spec).unwrap();
        induced_flow_payoff(spec, &strat).unwrap()
    }

    #[test]
    fn stopped_policy_freezes_the_prior() {
        let u = u_of(&fixtures::two_action());
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 50,
            seed: 42,
            store_paths: false,
        };
        let res = simulate_paths(&u, 1.0, 2.0, &Policy::stop(), 0.5, &cfg).unwrap();
        assert_eq!(res.mean_terminal, 0.5);
        assert_eq!(res.se_terminal, 0.0);
        assert_eq!(res.n_absorbed_low + res.n_absorbed_high, 50);
        assert_eq!(res.n_running, 0);
        // Frozen forever at the prior: the payoff is u(p0) exactly.
        assert_abs_diff_eq!(res.mean_discounted_payoff, u.eval_usc(0.5));
        let z = absorption_stats(&res, &BeliefPair::new(0.5, 0.5), 0.5);
        assert_eq!(z.z_upper_fraction, 0.0);
        assert_eq!(z.z_mean_terminal, 0.0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let spec = fixtures::three_action();
        let u = u_of(&spec);
        let v = Value::solve(&u, 4.0, Method::Closed).unwrap();
        let policy = best_reply_policy(&v, &u, default_contact_tol(&u));
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 10.0,
            n_paths: 500,
            seed: 7,
            store_paths: false,
        };
        let a = simulate_paths(&u, spec.r, spec.sigma, &policy, 0.625, &cfg).unwrap();
        let b = simulate_paths(&u, spec.r, spec.sigma, &policy, 0.625, &cfg).unwrap();
        assert_eq!(a.n_absorbed_low, b.n_absorbed_low);
        assert_eq!(a.n_absorbed_high, b.n_absorbed_high);
        assert_eq!(a.mean_terminal.to_bits(), b.mean_terminal.to_bits());
        assert_eq!(
            a.mean_discounted_payoff.to_bits(),
            b.mean_discounted_payoff.to_bits()
        );
    }

    #[test]
    fn martingale_and_split_on_the_three_action_fixture() {
        let spec = fixtures::three_action();
        let u = u_of(&spec);
        let v = Value::solve(&u, 4.0, Method::Closed).unwrap();
        let policy = best_reply_policy(&v, &u, default_contact_tol(&u));
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 20.0,
            n_paths: 4000,
            seed: 3,
            store_paths: false,
        };
        let res = simulate_paths(&u, spec.r, spec.sigma, &policy, 0.625, &cfg).unwrap();
        assert!(res.n_running < 40, "nearly all paths absorb: {res:?}");
        let z = absorption_stats(&res, &BeliefPair::new(0.5, 0.75), 0.625);
        assert!(z.z_upper_fraction.abs() <= 3.0, "{z:?}");
        assert!(z.z_mean_terminal.abs() <= 3.0, "{z:?}");
        assert!(res.clamp_fraction < 1e-3);
        assert!(res.absorption_times.min >= 0.0);
        assert!(res.absorption_times.mean > 0.0);
    }

    #[test]
    fn stored_paths_are_capped_and_within_bounds() {
        let spec = fixtures::two_action();
        let u = u_of(&spec);
        let v = Value::solve(&u, 4.0, Method::Closed).unwrap();
        let policy = best_reply_policy(&v, &u, default_contact_tol(&u));
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 5.0,
            n_paths: 150,
            seed: 9,
            store_paths: true,
        };
        let res = simulate_paths(&u, spec.r, spec.sigma, &policy, 0.5, &cfg).unwrap();
        let paths = res.stored_paths.as_ref().unwrap();
        assert_eq!(paths.len(), 100);
        for path in paths {
            assert!(path.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn patient_two_action_payoff_matches_the_value() {
        // Patient regime: paths diffuse toward 0 and 1 and the realised
        // discounted payoff reproduces the closed-form value up to Monte
        // Carlo noise and the O(dt) discretisation allowance.
        let rs2 = 0.0625;
        let (r, sigma) = (1.0, 0.25);
        let spec = fixtures::two_action();
        let u = u_of(&spec);
        let v = Value::solve(&u, rs2, Method::Closed).unwrap();
        let policy = best_reply_policy(&v, &u, default_contact_tol(&u));
        assert_eq!(policy.intervals, vec![(0.0, 1.0)]);
        let cfg = SimConfig {
            dt: 5e-4,
            horizon: 20.0,
            n_paths: 4000,
            seed: 12,
            store_paths: false,
        };
        let res = simulate_paths(&u, r, sigma, &policy, 0.5, &cfg).unwrap();

        // Terminal mass concentrates near the extreme beliefs: the
        // standard deviation of a {0,1}-valued limit from 1/2 is 1/2.
        assert!((res.mean_terminal - 0.5).abs() <= 3.0 * res.se_terminal, "{res:?}");
        let std_terminal = res.se_terminal * (cfg.n_paths as f64).sqrt();
        assert!(std_terminal > 0.45, "terminal spread {std_terminal} too small");
        let v_half = v.eval(0.5);
        assert!(
            res.mean_discounted_payoff <= v_half + 3.0 * res.se_discounted_payoff,
            "payoff {} exceeds the value {v_half}",
            res.mean_discounted_payoff
        );
        assert!(
            res.mean_discounted_payoff >= v_half - 0.02,
            "payoff {} falls short of the value {v_half}",
            res.mean_discounted_payoff
        );
    }

    #[test]
    fn synthetic_exact_split_has_zero_z_scores() {
        let res = SimResult {
            n_absorbed_low: 500,
            n_absorbed_high: 500,
            n_running: 0,
            mean_terminal: 0.625,
            se_terminal: 0.01,
            mean_discounted_payoff: 0.0,
            se_discounted_payoff: 0.0,
            absorption_times: TimeStats::default(),
            clamp_fraction: 0.0,
            stored_paths: None,
        };
        let z = absorption_stats(&res, &BeliefPair::new(0.5, 0.75), 0.625);
        assert_eq!(z.z_upper_fraction, 0.0);
        assert_eq!(z.z_mean_terminal, 0.0);
    }

    #[test]
    fn config_validation() {
        let bad_dt = SimConfig {
            dt: 0.0,
            horizon: 1.0,
            n_paths: 1,
            seed: 0,
            store_paths: false,
        };
        assert!(bad_dt.validate(1.0).is_err());
        let unstable = SimConfig {
            dt: 2.0,
            horizon: 10.0,
            n_paths: 1,
            seed: 0,
            store_paths: false,
        };
        assert!(unstable.validate(0.5).is_err());
        let defaults = SimConfig::defaults_for(2.0);
        assert!(defaults.validate(1.0).is_ok());
        assert_abs_diff_eq!(defaults.horizon, 25.0);
    }
}
