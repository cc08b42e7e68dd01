//! Forward corruption processes.
//!
//! The Markov process flips each token to fresh noise with probability
//! `1 - β_t` at every step. The non-Markov process draws one noise token `w`
//! and one transition time `τ` per position up front; the state at time `t`
//! is `x_0` before `τ` and `w` from `τ` on. Both have the per-token marginal
//! `α_t δ(x_0) + (1 - α_t) q_noise`.

use crate::domain::{sample_bernoulli, CategoricalDist, NoiseModel, RngStream, Sequence, Token};
use crate::error::{Error, Result};
use crate::schedule::{
    sample_transition_set, transition_distribution, AlphaSchedule, Time, TransitionSet,
};

#[derive(Debug, Clone, PartialEq)]
enum Path {
    Markov {
        states: Vec<Sequence>,
    },
    NonMarkov {
        transitions: TransitionSet,
        noise: Vec<Token>,
        steps: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrajectory {
    x0: Sequence,
    path: Path,
}

impl ForwardTrajectory {
    pub fn x0(&self) -> &Sequence {
        &self.x0
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.path, Path::Markov { .. })
    }

    /// Per-position transition times (non-Markov trajectories only).
    pub fn transition_set(&self) -> Option<&TransitionSet> {
        match &self.path {
            Path::NonMarkov { transitions, .. } => Some(transitions),
            Path::Markov { .. } => None,
        }
    }

    /// The single noise token per position (non-Markov trajectories only).
    pub fn noise_draws(&self) -> Option<&[Token]> {
        match &self.path {
            Path::NonMarkov { noise, .. } => Some(noise),
            Path::Markov { .. } => None,
        }
    }

    pub fn steps(&self) -> Option<usize> {
        match &self.path {
            Path::Markov { states } => Some(states.len() - 1),
            Path::NonMarkov { steps, .. } => *steps,
        }
    }

    /// State at a single time. Non-Markov trajectories compute it directly
    /// from `τ` in O(N).
    pub fn state_at(&self, time: Time) -> Result<Sequence> {
        match (&self.path, time) {
            (Path::Markov { states }, Time::Step(t)) => states
                .get(t)
                .cloned()
                .ok_or_else(|| Error::arg(format!("time {t} beyond T = {}", states.len() - 1))),
            (Path::Markov { .. }, Time::Continuous(_)) => Err(Error::arg(
                "Markov trajectories only have integer time steps",
            )),
            (
                Path::NonMarkov {
                    transitions,
                    noise,
                    steps,
                },
                time,
            ) => {
                let corrupted: Box<dyn Fn(usize) -> bool> = match (transitions, time, steps) {
                    (TransitionSet::Discrete { times, .. }, Time::Step(t), Some(max)) => {
                        if t > *max {
                            return Err(Error::arg(format!("time {t} beyond T = {max}")));
                        }
                        Box::new(move |n| t >= times[n])
                    }
                    (TransitionSet::Continuous { times, .. }, Time::Continuous(t), None) => {
                        if !(0.0..=1.0).contains(&t) {
                            return Err(Error::arg(format!("time {t} outside [0, 1]")));
                        }
                        Box::new(move |n| t >= times[n])
                    }
                    _ => return Err(Error::arg("time kind does not match the trajectory clock")),
                };
                let tokens = self
                    .x0
                    .tokens()
                    .iter()
                    .enumerate()
                    .map(|(n, &x)| if corrupted(n) { noise[n] } else { x })
                    .collect();
                Ok(Sequence::from_tokens_unchecked(tokens))
            }
        }
    }

    /// Every state `x_0..x_T` of a discrete trajectory.
    pub fn states(&self) -> Result<Vec<Sequence>> {
        match &self.path {
            Path::Markov { states } => Ok(states.clone()),
            Path::NonMarkov {
                steps: Some(max), ..
            } => (0..=*max).map(|t| self.state_at(Time::Step(t))).collect(),
            Path::NonMarkov { steps: None, .. } => Err(Error::arg(
                "continuous trajectories have no finite state list",
            )),
        }
    }
}

fn check_x0(x0: &Sequence, noise: &NoiseModel) -> Result<()> {
    let vocab = noise.vocab();
    if let Some(t) = x0.tokens().iter().find(|t| !vocab.is_base(**t)) {
        return Err(Error::arg(format!(
            "x0 token {t} is not one of the {} data categories",
            vocab.base_size()
        )));
    }
    Ok(())
}

/// Step-by-step corruption: at each step every token is kept with
/// probability `β_t`, otherwise replaced with a fresh noise draw.
pub fn markov_forward(
    x0: &Sequence,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    rng: &mut RngStream,
) -> Result<ForwardTrajectory> {
    check_x0(x0, noise)?;
    let steps = schedule
        .steps()
        .ok_or_else(|| Error::arg("the Markov forward process needs a discrete schedule"))?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    for t in 1..=steps {
        let beta = schedule.beta(t)?;
        let mut next = states[t - 1].clone();
        for token in next.tokens_mut() {
            if !sample_bernoulli(beta, rng)? {
                *token = noise.sample(rng);
            }
        }
        states.push(next);
    }
    Ok(ForwardTrajectory {
        x0: x0.clone(),
        path: Path::Markov { states },
    })
}

/// Transition-time corruption: draw `τ_n` from the schedule's transition law
/// and one noise token `w_n` per position.
pub fn nonmarkov_forward(
    x0: &Sequence,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    rng: &mut RngStream,
) -> Result<ForwardTrajectory> {
    check_x0(x0, noise)?;
    let dist = transition_distribution(schedule)?;
    let transitions = sample_transition_set(&dist, x0.len(), rng)?;
    let noise_tokens = (0..x0.len()).map(|_| noise.sample(rng)).collect();
    Ok(ForwardTrajectory {
        x0: x0.clone(),
        path: Path::NonMarkov {
            transitions,
            noise: noise_tokens,
            steps: schedule.steps(),
        },
    })
}

/// Builds a non-Markov trajectory from given transition times and noise.
pub fn nonmarkov_from_parts(
    x0: &Sequence,
    transitions: TransitionSet,
    noise_tokens: Vec<Token>,
    noise: &NoiseModel,
    steps: Option<usize>,
) -> Result<ForwardTrajectory> {
    check_x0(x0, noise)?;
    if transitions.len() != x0.len() || noise_tokens.len() != x0.len() {
        return Err(Error::arg(
            "transition times and noise must cover every position",
        ));
    }
    if let Some(t) = noise_tokens.iter().find(|t| noise.prob(**t) == 0.0) {
        return Err(Error::arg(format!(
            "token {t} has zero probability under the noise model"
        )));
    }
    Ok(ForwardTrajectory {
        x0: x0.clone(),
        path: Path::NonMarkov {
            transitions,
            noise: noise_tokens,
            steps,
        },
    })
}

/// `q(x_t | x_0) = α_t δ(x_0) + (1 - α_t) q_noise` over the full state space.
pub fn marginal_at(
    x0_token: Token,
    time: Time,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
) -> Result<CategoricalDist> {
    let vocab = noise.vocab();
    if !vocab.is_base(x0_token) {
        return Err(Error::arg(format!(
            "x0 token {x0_token} is not a data category"
        )));
    }
    let alpha = schedule.alpha(time)?;
    let q = noise.dist();
    let mut probs: Vec<f64> = q.probs().iter().map(|p| (1.0 - alpha) * p).collect();
    probs[x0_token.index()] += alpha;
    CategoricalDist::new(probs)
}
