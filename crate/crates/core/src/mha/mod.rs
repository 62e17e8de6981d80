//! Random-walk Metropolis-Hastings over material and boundary parameters.

mod io;
mod reduction;
mod summary;

pub use reduction::BoundaryReduction;
pub use summary::{normalize_chain, ratio_chain, summarize, Kde, PosteriorSummary};

use crate::correlation::CorrelationError;
use crate::forward::Posterior;
use crate::Vec2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MhaError {
    #[error("initial state has zero posterior density")]
    InitialStateInfeasible,
    #[error("acceptance tuning failed after {pilots} pilot runs (last rate {rate:.3})")]
    TuningFailed { pilots: usize, rate: f64 },
    #[error("chain has {kept} post-burn-in states, need at least {needed}")]
    ChainTooShort { kept: usize, needed: usize },
    #[error("stride {stride} too large for a boundary of {nodes} nodes")]
    StrideTooLarge { stride: usize, nodes: usize },
    #[error("pivot is non-positive at step {step}")]
    PivotNonPositive { step: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("chain file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Log-density the sampler explores. `aux` carries state from the last
/// accepted evaluation (such as a converged displacement field used to warm
/// start the next solve).
pub trait Target: Sync {
    type Aux: Clone + Send;

    fn log_density(&self, x: &[f64], aux: Option<&Self::Aux>) -> (f64, Option<Self::Aux>);
}

/// Adapter for plain closures.
pub struct FnTarget<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Target for FnTarget<F> {
    type Aux = ();

    fn log_density(&self, x: &[f64], _: Option<&()>) -> (f64, Option<()>) {
        ((self.0)(x), None)
    }
}

impl Target for Posterior<'_> {
    type Aux = Vec<Vec2>;

    fn log_density(&self, x: &[f64], aux: Option<&Vec<Vec2>>) -> (f64, Option<Vec<Vec2>>) {
        match self.evaluate(x, aux.map(|v| v.as_slice())) {
            Ok((lp, field)) => (lp, field.map(|f| f.into_values())),
            Err(CorrelationError::PosteriorEvaluationFailed(_)) | Err(_) => (f64::NEG_INFINITY, None),
        }
    }
}

/// Standard deviations of the Gaussian random-walk proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSettings {
    pub sigma_q_mat: Vec<f64>,
    pub sigma_q_kin: Vec<f64>,
    pub seed: u64,
}

impl ProposalSettings {
    /// Material steps `fraction * (ref_i / sum ref) * sigma_prior` and one
    /// kinematic step `kin_fraction * sum(material steps)` for `n_kin`
    /// entries.
    pub fn from_reference(
        reference: &[f64],
        sigma_prior: f64,
        fraction: f64,
        n_kin: usize,
        kin_fraction: f64,
        seed: u64,
    ) -> Self {
        let total: f64 = reference.iter().sum();
        let sigma_q_mat: Vec<f64> = reference.iter().map(|r| fraction * r / total * sigma_prior).collect();
        let kin = kin_fraction * sigma_q_mat.iter().sum::<f64>();
        ProposalSettings {
            sigma_q_mat,
            sigma_q_kin: vec![kin; n_kin],
            seed,
        }
    }

    pub fn steps(&self) -> Vec<f64> {
        self.sigma_q_mat.iter().chain(&self.sigma_q_kin).copied().collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ProposalSettings {
            sigma_q_mat: self.sigma_q_mat.iter().map(|s| s * c).collect(),
            sigma_q_kin: self.sigma_q_kin.iter().map(|s| s * c).collect(),
            seed: self.seed,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), MhaError> {
        let steps = self.steps();
        if steps.len() != dim {
            return Err(MhaError::InvalidSettings(format!("{} step sizes for {dim} parameters", steps.len())));
        }
        if steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(MhaError::InvalidSettings("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled states. State 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub names: Vec<String>,
    /// Number of leading material entries in each state.
    pub n_mat: usize,
    pub states: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    /// `accepted[0]` is true by convention.
    pub accepted: Vec<bool>,
    pub burn_in: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Fraction of accepted proposals.
    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.len() < 2 {
            return 0.0;
        }
        self.accepted[1..].iter().filter(|&&a| a).count() as f64 / (self.accepted.len() - 1) as f64
    }

    /// States after burn-in.
    pub fn kept(&self) -> &[Vec<f64>] {
        &self.states[self.burn_in.min(self.states.len())..]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.kept().iter().map(|s| s[j]).collect()
    }
}

/// Runs `n_steps - 1` Metropolis-Hastings transitions from `start`.
pub fn run_mha<T: Target>(
    target: &T,
    start: &[f64],
    prop: &ProposalSettings,
    n_steps: usize,
    burn_in: usize,
    names: Vec<String>,
    n_mat: usize,
) -> Result<Chain, MhaError> {
    run_mha_stream(target, start, prop, n_steps, burn_in, names, n_mat, 0)
}

/// Like [`run_mha`] with an explicit chain index for the random stream.
#[allow(clippy::too_many_arguments)]
pub fn run_mha_stream<T: Target>(
    target: &T,
    start: &[f64],
    prop: &ProposalSettings,
    n_steps: usize,
    burn_in: usize,
    names: Vec<String>,
    n_mat: usize,
    chain_id: u64,
) -> Result<Chain, MhaError> {
    let dim = start.len();
    prop.validate(dim)?;
    if names.len() != dim || n_mat > dim {
        return Err(MhaError::InvalidSettings("names do not match the state dimension".into()));
    }
    if n_steps == 0 || burn_in >= n_steps {
        return Err(MhaError::InvalidSettings(format!("need 0 <= burn_in ({burn_in}) < steps ({n_steps})")));
    }
    let steps = prop.steps();
    let mut rng = crate::seed::stream(prop.seed, "mha", chain_id);
    let (mut lp, mut aux) = target.log_density(start, None);
    if !(lp > f64::NEG_INFINITY) {
        return Err(MhaError::InitialStateInfeasible);
    }
    let mut current = start.to_vec();
    let mut chain = Chain {
        names,
        n_mat,
        states: Vec::with_capacity(n_steps),
        log_post: Vec::with_capacity(n_steps),
        accepted: Vec::with_capacity(n_steps),
        burn_in,
    };
    chain.states.push(current.clone());
    chain.log_post.push(lp);
    chain.accepted.push(true);
    let mut proposal = vec![0.0; dim];
    for _ in 1..n_steps {
        for ((p, c), s) in proposal.iter_mut().zip(&current).zip(&steps) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = c + s * z;
        }
        let kappa: f64 = rng.random();
        let (lp_new, aux_new) = target.log_density(&proposal, aux.as_ref());
        // Accept when kappa < exp(lp_new - lp), compared in the log domain.
        let accept = kappa.ln() < lp_new - lp;
        if accept {
            current.copy_from_slice(&proposal);
            lp = lp_new;
            if aux_new.is_some() {
                aux = aux_new;
            }
        }
        chain.states.push(current.clone());
        chain.log_post.push(lp);
        chain.accepted.push(accept);
    }
    Ok(chain)
}

/// Rescales all step sizes by a common factor, found by bisection on the
/// acceptance rate of pilot chains, until that rate lies in `[0.2, 0.4]`.
pub fn tune_acceptance<T: Target>(
    target: &T,
    start: &[f64],
    prop: &ProposalSettings,
    pilot_n: usize,
) -> Result<ProposalSettings, MhaError> {
    const MAX_PILOTS: usize = 24;
    if pilot_n < 500 {
        return Err(MhaError::InvalidSettings("pilot runs need at least 500 steps".into()));
    }
    let dim = start.len();
    let names: Vec<String> = (0..dim).map(|i| format!("p{i}")).collect();
    let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
    let mut c = 1.0;
    let mut rate = 0.0;
    for pilot in 0..MAX_PILOTS {
        let trial = prop.scaled(c);
        let chain = run_mha_stream(target, start, &trial, pilot_n, 0, names.clone(), 0, u64::MAX - pilot as u64)?;
        rate = chain.acceptance_rate();
        if (0.2..=0.4).contains(&rate) {
            return Ok(trial);
        }
        if rate > 0.4 {
            lo = Some(c);
        } else {
            hi = Some(c);
        }
        c = match (lo, hi) {
            (Some(l), Some(h)) => (l * h).sqrt(),
            (Some(l), None) => l * 2.0,
            (None, Some(h)) => h * 0.5,
            (None, None) => unreachable!(),
        };
    }
    Err(MhaError::TuningFailed {
        pilots: MAX_PILOTS,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss1(x: &[f64]) -> f64 {
        -0.5 * x[0] * x[0]
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    fn prop(s: Vec<f64>, seed: u64) -> ProposalSettings {
        ProposalSettings {
            sigma_q_mat: s,
            sigma_q_kin: vec![],
            seed,
        }
    }

    #[test]
    fn rejected_steps_repeat_the_state() {
        let t = FnTarget(gauss1);
        let c = run_mha(&t, &[0.3], &prop(vec![3.0], 1), 2000, 100, names(1), 1).unwrap();
        assert_eq!(c.len(), 2000);
        for i in 1..c.len() {
            if !c.accepted[i] {
                assert_eq!(c.states[i], c.states[i - 1]);
                assert_eq!(c.log_post[i], c.log_post[i - 1]);
            }
        }
        let rate = c.acceptance_rate();
        assert!(rate > 0.0 && rate < 1.0);
    }

    #[test]
    fn flat_target_accepts_everything() {
        let t = FnTarget(|_: &[f64]| 0.0);
        let c = run_mha(&t, &[0.0, 1.0], &prop(vec![1.0, 1.0], 2), 500, 0, names(2), 2).unwrap();
        assert!(c.accepted.iter().all(|&a| a));
    }

    #[test]
    fn deterministic_per_seed() {
        let t = FnTarget(gauss1);
        let a = run_mha(&t, &[0.0], &prop(vec![1.0], 5), 1000, 0, names(1), 1).unwrap();
        let b = run_mha(&t, &[0.0], &prop(vec![1.0], 5), 1000, 0, names(1), 1).unwrap();
        let c = run_mha(&t, &[0.0], &prop(vec![1.0], 6), 1000, 0, names(1), 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let t = FnTarget(|x: &[f64]| if x[0] < 0.0 { f64::NEG_INFINITY } else { 0.0 });
        assert!(matches!(
            run_mha(&t, &[-1.0], &prop(vec![1.0], 1), 10, 0, names(1), 1),
            Err(MhaError::InitialStateInfeasible)
        ));
        assert!(run_mha(&t, &[1.0], &prop(vec![1.0], 1), 10, 10, names(1), 1).is_err());
    }

    #[test]
    fn tuner_shrinks_oversized_steps() {
        let t = FnTarget(gauss1);
        let p = prop(vec![60.0], 3);
        let tuned = tune_acceptance(&t, &[0.0], &p, 1000).unwrap();
        assert!(tuned.sigma_q_mat[0] < 60.0);
        let c = run_mha(&t, &[0.0], &tuned, 1000, 0, names(1), 1).unwrap();
        assert!(c.acceptance_rate() > 0.15 && c.acceptance_rate() < 0.45);
    }

    #[test]
    fn tuner_keeps_good_steps_and_ratios() {
        let t = FnTarget(|x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1] / 100.0));
        let p = prop(vec![2.0, 20.0], 4);
        let tuned = tune_acceptance(&t, &[0.0, 0.0], &p, 2000).unwrap();
        assert!((tuned.sigma_q_mat[1] / tuned.sigma_q_mat[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn reference_step_rule() {
        let p = ProposalSettings::from_reference(&[1.0, 4.0, 12.0], 1.0, 0.01, 4, 0.004, 0);
        assert!((p.sigma_q_mat[1] - 0.01 * 4.0 / 17.0).abs() < 1e-15);
        assert!((p.sigma_q_kin[0] - 0.004 * 0.01).abs() < 1e-15);
    }
}
