//! α-schedules and the transition-time laws derived from them.
//!
//! A discrete schedule is the sequence `α_0 = 1 ≥ α_1 ≥ … ≥ α_T = 0`; the
//! probability a token first leaves its data value at step `t` is
//! `α_{t-1} - α_t`. A continuous schedule is a non-increasing `α: [0,1] → [0,1]`
//! with transition density `-α'(t)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use statrs::function::beta::beta_reg;

use crate::domain::{RngStream, PROB_TOL};
use crate::error::{Error, Result};

/// Offset used by the cosine schedules unless the caller picks another.
pub const DEFAULT_COSINE_OFFSET: f64 = 0.008;

/// Default Beta law for finite-step transition times.
pub const DEFAULT_DISCRETE_BETA: (f64, f64) = (3.0, 3.0);
/// Default Beta law for continuous-time transition times.
pub const DEFAULT_CONTINUOUS_BETA: (f64, f64) = (17.0, 4.0);

const BISECTION_TOL: f64 = 1e-12;
const MONOTONE_TOL: f64 = 1e-12;

/// A point on the diffusion clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Time {
    Step(usize),
    Continuous(f64),
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::Step(t) => write!(f, "{t}"),
            Time::Continuous(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Linear,
    Cosine,
    CosineSquared,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::CosineSquared => "cosine2",
        }
    }

    /// `steps = None` builds the continuous-time version.
    pub fn build(self, steps: Option<usize>, offset: f64) -> Result<AlphaSchedule> {
        match (self, steps) {
            (ScheduleKind::Linear, Some(t)) => build_linear(t),
            (ScheduleKind::Cosine, Some(t)) => build_cosine(t, offset),
            (ScheduleKind::CosineSquared, Some(t)) => build_cosine_squared(t, offset),
            (ScheduleKind::Linear, None) => AlphaSchedule::continuous(ContinuousAlpha::Linear),
            (ScheduleKind::Cosine, None) => {
                check_offset(offset)?;
                AlphaSchedule::continuous(ContinuousAlpha::Cosine { offset })
            }
            (ScheduleKind::CosineSquared, None) => {
                check_offset(offset)?;
                AlphaSchedule::continuous(ContinuousAlpha::CosineSquared { offset })
            }
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            "cosine2" | "cosine-squared" | "cosine_squared" => Ok(ScheduleKind::CosineSquared),
            other => Err(Error::arg(format!("unknown schedule `{other}`"))),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User supplied continuous schedule.
#[derive(Clone)]
pub struct CustomAlpha {
    pub name: String,
    pub alpha: ScalarFn,
    pub derivative: ScalarFn,
}

impl fmt::Debug for CustomAlpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomAlpha")
            .field("name", &self.name)
            .finish()
    }
}

/// Continuous-time α(t) on `[0, 1]`.
#[derive(Debug, Clone)]
pub enum ContinuousAlpha {
    /// `α(t) = 1 - t`.
    Linear,
    Cosine {
        offset: f64,
    },
    CosineSquared {
        offset: f64,
    },
    /// `α(t) = 1 - I_t(a, b)`, the survival function of a Beta(a, b) time.
    BetaSurvival {
        a: f64,
        b: f64,
    },
    Custom(CustomAlpha),
}

impl ContinuousAlpha {
    pub fn alpha(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        match self {
            ContinuousAlpha::Linear => 1.0 - t,
            ContinuousAlpha::Cosine { offset } => cosine_ratio(*offset, t),
            ContinuousAlpha::CosineSquared { offset } => cosine_ratio(*offset, t).powi(2),
            ContinuousAlpha::BetaSurvival { a, b } => 1.0 - beta_reg(*a, *b, t),
            ContinuousAlpha::Custom(c) => (c.alpha)(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            ContinuousAlpha::Linear => -1.0,
            ContinuousAlpha::Cosine { offset } => cosine_ratio_derivative(*offset, t),
            ContinuousAlpha::CosineSquared { offset } => {
                2.0 * cosine_ratio(*offset, t) * cosine_ratio_derivative(*offset, t)
            }
            ContinuousAlpha::BetaSurvival { a, b } => -beta_density(*a, *b, t),
            ContinuousAlpha::Custom(c) => (c.derivative)(t),
        }
    }

    fn label(&self) -> String {
        match self {
            ContinuousAlpha::Linear => "linear".into(),
            ContinuousAlpha::Cosine { .. } => "cosine".into(),
            ContinuousAlpha::CosineSquared { .. } => "cosine2".into(),
            ContinuousAlpha::BetaSurvival { a, b } => format!("beta({a},{b})"),
            ContinuousAlpha::Custom(c) => c.name.clone(),
        }
    }
}

/// `cos(((s + t) / (1 + s)) π/2) / cos((s / (1 + s)) π/2)` for `t ∈ [0, 1]`.
fn cosine_ratio(offset: f64, t: f64) -> f64 {
    let f = |u: f64| ((offset + u) / (1.0 + offset) * FRAC_PI_2).cos();
    if t >= 1.0 {
        return 0.0;
    }
    (f(t) / f(0.0)).clamp(0.0, 1.0)
}

fn cosine_ratio_derivative(offset: f64, t: f64) -> f64 {
    let scale = FRAC_PI_2 / (1.0 + offset);
    let f0 = (offset / (1.0 + offset) * FRAC_PI_2).cos();
    -scale * ((offset + t) * scale).sin() / f0
}

fn beta_density(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let ln =
        (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - statrs::function::beta::ln_beta(a, b);
    ln.exp()
}

fn check_offset(offset: f64) -> Result<()> {
    if !(offset >= 0.0) || !offset.is_finite() {
        return Err(Error::arg(format!(
            "cosine offset must be >= 0, got {offset}"
        )));
    }
    Ok(())
}

/// Either a finite list `α_0..α_T` or a continuous function of `t ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub enum AlphaSchedule {
    Discrete(Vec<f64>),
    Continuous(ContinuousAlpha),
}

impl AlphaSchedule {
    /// Validates `α_0 = 1`, `α_T = 0`, entries in `[0, 1]` and non-increasing.
    pub fn discrete(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidSchedule("need at least α_0 and α_1".into()));
        }
        if (alphas[0] - 1.0).abs() > MONOTONE_TOL {
            return Err(Error::InvalidSchedule(format!(
                "α_0 = {} (expected 1)",
                alphas[0]
            )));
        }
        let last = alphas[alphas.len() - 1];
        if last.abs() > MONOTONE_TOL {
            return Err(Error::InvalidSchedule(format!("α_T = {last} (expected 0)")));
        }
        for (t, w) in alphas.windows(2).enumerate() {
            if !w[1].is_finite() || !(0.0..=1.0).contains(&w[1]) {
                return Err(Error::InvalidSchedule(format!(
                    "α_{} = {} outside [0, 1]",
                    t + 1,
                    w[1]
                )));
            }
            if w[1] > w[0] + MONOTONE_TOL {
                return Err(Error::InvalidSchedule(format!(
                    "schedule increases at t = {}: {} -> {}",
                    t + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(AlphaSchedule::Discrete(alphas))
    }

    /// Validates the endpoints and monotonicity on a grid of 1001 points.
    pub fn continuous(alpha: ContinuousAlpha) -> Result<Self> {
        if (alpha.alpha(0.0) - 1.0).abs() > MONOTONE_TOL || alpha.alpha(1.0).abs() > MONOTONE_TOL {
            return Err(Error::InvalidSchedule(
                "continuous α must map 0 -> 1 and 1 -> 0".into(),
            ));
        }
        let mut prev = 1.0;
        for i in 1..=1000 {
            let a = alpha.alpha(i as f64 / 1000.0);
            if !a.is_finite() || a > prev + MONOTONE_TOL || !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidSchedule(format!(
                    "continuous α is not non-increasing in [0, 1] near t = {}",
                    i as f64 / 1000.0
                )));
            }
            prev = a;
        }
        Ok(AlphaSchedule::Continuous(alpha))
    }

    /// The schedule whose transition-time law is `dist`: `α_t = P(τ > t)`.
    pub fn from_transition(dist: &TransitionTimeDistribution) -> Result<Self> {
        if let Some(pmf) = dist.pmf() {
            let mut alphas = Vec::with_capacity(pmf.steps() + 1);
            alphas.push(1.0);
            let mut cdf = 0.0;
            for (i, p) in pmf.probs().iter().enumerate() {
                cdf += p;
                let a = if i + 1 == pmf.steps() {
                    0.0
                } else {
                    (1.0 - cdf).clamp(0.0, 1.0)
                };
                alphas.push(a);
            }
            return Self::discrete(alphas);
        }
        match dist {
            TransitionTimeDistribution::ContinuousDensity(alpha) => {
                Ok(AlphaSchedule::Continuous(alpha.clone()))
            }
            TransitionTimeDistribution::BetaApprox(b) => {
                Ok(AlphaSchedule::Continuous(ContinuousAlpha::BetaSurvival {
                    a: b.a,
                    b: b.b,
                }))
            }
            TransitionTimeDistribution::DiscretePmf(_) => unreachable!("handled above"),
        }
    }

    pub fn steps(&self) -> Option<usize> {
        match self {
            AlphaSchedule::Discrete(a) => Some(a.len() - 1),
            AlphaSchedule::Continuous(_) => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, AlphaSchedule::Continuous(_))
    }

    pub fn alphas(&self) -> Option<&[f64]> {
        match self {
            AlphaSchedule::Discrete(a) => Some(a),
            AlphaSchedule::Continuous(_) => None,
        }
    }

    pub fn alpha(&self, time: Time) -> Result<f64> {
        match (self, time) {
            (AlphaSchedule::Discrete(a), Time::Step(t)) => a
                .get(t)
                .copied()
                .ok_or_else(|| Error::arg(format!("time step {t} outside [0, {}]", a.len() - 1))),
            (AlphaSchedule::Continuous(c), Time::Continuous(t)) => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::arg(format!("continuous time {t} outside [0, 1]")));
                }
                Ok(c.alpha(t))
            }
            (AlphaSchedule::Discrete(_), Time::Continuous(_)) => {
                Err(Error::arg("continuous time given to a discrete schedule"))
            }
            (AlphaSchedule::Continuous(_), Time::Step(_)) => {
                Err(Error::arg("step index given to a continuous schedule"))
            }
        }
    }

    /// Per-step keep probability `β_t = α_t / α_{t-1}`, defined as 0 once
    /// `α_{t-1}` reaches 0.
    pub fn beta(&self, t: usize) -> Result<f64> {
        let a = self
            .alphas()
            .ok_or_else(|| Error::arg("β_t is only defined for discrete schedules"))?;
        if t == 0 || t >= a.len() {
            return Err(Error::arg(format!("β_t needs 1 <= t <= {}", a.len() - 1)));
        }
        Ok(if a[t - 1] == 0.0 {
            0.0
        } else {
            (a[t] / a[t - 1]).clamp(0.0, 1.0)
        })
    }

    pub fn label(&self) -> String {
        match self {
            AlphaSchedule::Discrete(a) => format!("discrete(T={})", a.len() - 1),
            AlphaSchedule::Continuous(c) => c.label(),
        }
    }
}

pub fn build_linear(steps: usize) -> Result<AlphaSchedule> {
    if steps == 0 {
        return Err(Error::arg("schedule needs T >= 1"));
    }
    let n = steps as f64;
    AlphaSchedule::discrete((0..=steps).map(|t| 1.0 - t as f64 / n).collect())
}

pub fn build_cosine(steps: usize, offset: f64) -> Result<AlphaSchedule> {
    build_cosine_power(steps, offset, 1)
}

pub fn build_cosine_squared(steps: usize, offset: f64) -> Result<AlphaSchedule> {
    build_cosine_power(steps, offset, 2)
}

fn build_cosine_power(steps: usize, offset: f64, power: i32) -> Result<AlphaSchedule> {
    if steps == 0 {
        return Err(Error::arg("schedule needs T >= 1"));
    }
    check_offset(offset)?;
    let n = steps as f64;
    let mut alphas: Vec<f64> = (0..=steps)
        .map(|t| cosine_ratio(offset, t as f64 / n).powi(power))
        .collect();
    alphas[0] = 1.0;
    alphas[steps] = 0.0;
    AlphaSchedule::discrete(alphas)
}

/// Probabilities `p_1..p_T` of a transition at each step, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "transition pmf needs T >= 1".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative transition probability {p}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "transition probabilities sum to {total}, expected 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative })
    }

    pub fn uniform(steps: usize) -> Result<Self> {
        Self::new(vec![1.0 / steps as f64; steps])
    }

    pub fn steps(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(τ = t)` for `t` in `1..=T`.
    pub fn prob(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.probs.get(t - 1).copied().unwrap_or(0.0)
    }

    /// Draws a step in `1..=T`.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        let mut i = i.min(self.probs.len() - 1);
        // never land on a zero-mass bin through rounding
        while self.probs[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i + 1
    }
}

/// Beta(a, b) transition times, either continuous (`steps = None`) or
/// scaled to `T` steps and rounded to the nearest integer.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaApprox {
    pub a: f64,
    pub b: f64,
    pub steps: Option<usize>,
    pmf: Option<DiscretePmf>,
}

impl BetaApprox {
    pub fn pmf(&self) -> Option<&DiscretePmf> {
        self.pmf.as_ref()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        beta_cdf(self.a, self.b, x)
    }
}

fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

/// The law `D_τ` of a single token's transition time.
#[derive(Debug, Clone)]
pub enum TransitionTimeDistribution {
    DiscretePmf(DiscretePmf),
    /// Density `-α'(t)` on `(0, 1)`.
    ContinuousDensity(ContinuousAlpha),
    BetaApprox(BetaApprox),
}

impl TransitionTimeDistribution {
    /// Number of steps for discrete laws, `None` for continuous ones.
    pub fn steps(&self) -> Option<usize> {
        self.pmf().map(DiscretePmf::steps)
    }

    pub fn is_continuous(&self) -> bool {
        self.pmf().is_none()
    }

    pub fn pmf(&self) -> Option<&DiscretePmf> {
        match self {
            TransitionTimeDistribution::DiscretePmf(p) => Some(p),
            TransitionTimeDistribution::BetaApprox(b) => b.pmf(),
            TransitionTimeDistribution::ContinuousDensity(_) => None,
        }
    }

    /// CDF of a continuous law at `x ∈ [0, 1]`.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            TransitionTimeDistribution::ContinuousDensity(alpha) => {
                Some((1.0 - alpha.alpha(x)).clamp(0.0, 1.0))
            }
            TransitionTimeDistribution::BetaApprox(b) if b.pmf.is_none() => Some(b.cdf(x)),
            _ => None,
        }
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            TransitionTimeDistribution::ContinuousDensity(alpha) => Some(-alpha.derivative(x)),
            TransitionTimeDistribution::BetaApprox(b) if b.pmf.is_none() => {
                Some(beta_density(b.a, b.b, x))
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TransitionTimeDistribution::DiscretePmf(p) => format!("pmf(T={})", p.steps()),
            TransitionTimeDistribution::ContinuousDensity(a) => format!("density({})", a.label()),
            TransitionTimeDistribution::BetaApprox(b) => format!("beta:{},{}", b.a, b.b),
        }
    }

    /// Draws a discrete step.
    pub fn sample_step(&self, rng: &mut RngStream) -> Option<usize> {
        self.pmf().map(|p| p.sample(rng))
    }

    /// Draws a continuous time by bisection on the CDF.
    pub fn sample_continuous(&self, rng: &mut RngStream) -> Option<f64> {
        let u = rng.uniform();
        self.cdf(0.5)?;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid).expect("continuous law") < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        Some(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }
}

/// `p_t = α_{t-1} - α_t` for a discrete schedule, density `-α'(t)` for a
/// continuous one.
pub fn transition_distribution(schedule: &AlphaSchedule) -> Result<TransitionTimeDistribution> {
    match schedule {
        AlphaSchedule::Discrete(alphas) => {
            let mut probs = Vec::with_capacity(alphas.len() - 1);
            for (t, w) in alphas.windows(2).enumerate() {
                let p = w[0] - w[1];
                if p < -MONOTONE_TOL {
                    return Err(Error::InvalidSchedule(format!(
                        "schedule increases at t = {}",
                        t + 1
                    )));
                }
                probs.push(p.max(0.0));
            }
            Ok(TransitionTimeDistribution::DiscretePmf(DiscretePmf::new(
                probs,
            )?))
        }
        AlphaSchedule::Continuous(alpha) => {
            Ok(TransitionTimeDistribution::ContinuousDensity(alpha.clone()))
        }
    }
}

/// Beta(a, b) transition law. With `steps = Some(T)` the time is multiplied by
/// `T` and rounded to the nearest integer; a result of 0 is folded into step
/// 1. With `steps = None` the law stays continuous on `(0, 1)`.
pub fn beta_transition_distribution(
    a: f64,
    b: f64,
    steps: Option<usize>,
) -> Result<TransitionTimeDistribution> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::arg(format!(
            "Beta parameters must be positive, got ({a}, {b})"
        )));
    }
    let pmf = match steps {
        None => None,
        Some(0) => return Err(Error::arg("Beta discretization needs T >= 1")),
        Some(t_max) => {
            let n = t_max as f64;
            let probs = (1..=t_max)
                .map(|t| {
                    let lo = if t == 1 { 0.0 } else { (t as f64 - 0.5) / n };
                    let hi = if t == t_max {
                        1.0
                    } else {
                        (t as f64 + 0.5) / n
                    };
                    (beta_cdf(a, b, hi) - beta_cdf(a, b, lo)).max(0.0)
                })
                .collect::<Vec<_>>();
            let total: f64 = probs.iter().sum();
            Some(DiscretePmf::new(
                probs.into_iter().map(|p| p / total).collect(),
            )?)
        }
    };
    Ok(TransitionTimeDistribution::BetaApprox(BetaApprox {
        a,
        b,
        steps,
        pmf,
    }))
}

/// How sampled transition times are assigned to positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransitionOrder {
    /// i.i.d. per position.
    #[default]
    Random,
    /// Earliest generated (largest τ) at position 0.
    LeftToRight,
    /// Earliest generated at the last position.
    RightToLeft,
}

/// Per-token transition times and their distinct values.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionSet {
    Discrete {
        times: Vec<usize>,
        distinct: Vec<usize>,
    },
    Continuous {
        times: Vec<f64>,
        distinct: Vec<f64>,
    },
}

impl TransitionSet {
    pub fn from_steps(times: Vec<usize>, steps: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::arg("transition set needs N >= 1"));
        }
        if let Some(t) = times.iter().find(|&&t| t == 0 || t > steps) {
            return Err(Error::arg(format!(
                "transition time {t} outside [1, {steps}]"
            )));
        }
        let mut distinct = times.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok(TransitionSet::Discrete { times, distinct })
    }

    pub fn from_continuous(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::arg("transition set needs N >= 1"));
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::arg(format!(
                "continuous transition time {t} outside (0, 1)"
            )));
        }
        let mut distinct = times.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        Ok(TransitionSet::Continuous { times, distinct })
    }

    pub fn len(&self) -> usize {
        match self {
            TransitionSet::Discrete { times, .. } => times.len(),
            TransitionSet::Continuous { times, .. } => times.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|T|`, the number of distinct transition times.
    pub fn distinct_count(&self) -> usize {
        match self {
            TransitionSet::Discrete { distinct, .. } => distinct.len(),
            TransitionSet::Continuous { distinct, .. } => distinct.len(),
        }
    }

    pub fn steps(&self) -> Option<&[usize]> {
        match self {
            TransitionSet::Discrete { times, .. } => Some(times),
            TransitionSet::Continuous { .. } => None,
        }
    }

    pub fn distinct_steps(&self) -> Option<&[usize]> {
        match self {
            TransitionSet::Discrete { distinct, .. } => Some(distinct),
            TransitionSet::Continuous { .. } => None,
        }
    }

    pub fn continuous_times(&self) -> Option<&[f64]> {
        match self {
            TransitionSet::Continuous { times, .. } => Some(times),
            TransitionSet::Discrete { .. } => None,
        }
    }

    /// Transition time of position `n` as a [`Time`].
    pub fn time_of(&self, n: usize) -> Time {
        match self {
            TransitionSet::Discrete { times, .. } => Time::Step(times[n]),
            TransitionSet::Continuous { times, .. } => Time::Continuous(times[n]),
        }
    }

    /// Reassigns the sampled times to positions according to `order`. The
    /// multiset of times, and therefore `|T|`, is unchanged.
    pub fn with_order(self, order: TransitionOrder) -> Self {
        let positions = |len: usize| -> Vec<usize> {
            match order {
                TransitionOrder::RightToLeft => (0..len).rev().collect(),
                _ => (0..len).collect(),
            }
        };
        match (order, self) {
            (TransitionOrder::Random, set) => set,
            (
                _,
                TransitionSet::Discrete {
                    mut times,
                    distinct,
                },
            ) => {
                times.sort_unstable_by(|a, b| b.cmp(a));
                let mut out = vec![0; times.len()];
                for (t, pos) in times.into_iter().zip(positions(out.len())) {
                    out[pos] = t;
                }
                TransitionSet::Discrete {
                    times: out,
                    distinct,
                }
            }
            (
                _,
                TransitionSet::Continuous {
                    mut times,
                    distinct,
                },
            ) => {
                times.sort_by(|a, b| b.total_cmp(a));
                let mut out = vec![0.0; times.len()];
                for (t, pos) in times.into_iter().zip(positions(out.len())) {
                    out[pos] = t;
                }
                TransitionSet::Continuous {
                    times: out,
                    distinct,
                }
            }
        }
    }
}

/// Draws `n` i.i.d. transition times from `dist`.
pub fn sample_transition_set(
    dist: &TransitionTimeDistribution,
    n: usize,
    rng: &mut RngStream,
) -> Result<TransitionSet> {
    if n == 0 {
        return Err(Error::arg("transition set needs N >= 1"));
    }
    match dist.pmf() {
        Some(pmf) => {
            let times = (0..n).map(|_| pmf.sample(rng)).collect();
            TransitionSet::from_steps(times, pmf.steps())
        }
        None => {
            let times = (0..n)
                .map(|_| dist.sample_continuous(rng).expect("continuous law"))
                .collect();
            TransitionSet::from_continuous(times)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn assert_valid(s: &AlphaSchedule) {
        let a = s.alphas().unwrap();
        assert_eq!(a[0], 1.0);
        assert_eq!(*a.last().unwrap(), 0.0);
        assert!(a.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn linear_values() {
        let s = build_linear(4).unwrap();
        assert_eq!(s.alphas().unwrap(), &[1.0, 0.75, 0.5, 0.25, 0.0]);
        assert_eq!(build_linear(1).unwrap().alphas().unwrap(), &[1.0, 0.0]);
        assert_eq!(
            build_linear(50).unwrap().alpha(Time::Step(25)).unwrap(),
            0.5
        );
        assert!(build_linear(0).is_err());
    }

    #[test]
    fn cosine_values() {
        let s = build_cosine(2, 0.0).unwrap();
        let a = s.alphas().unwrap();
        assert!(close(a[1], std::f64::consts::FRAC_1_SQRT_2, 1e-12));
        assert_eq!(a[2], 0.0);
        let s = build_cosine(1000, DEFAULT_COSINE_OFFSET).unwrap();
        assert_valid(&s);
        assert!(s.alphas().unwrap().windows(2).all(|w| w[1] < w[0]));
        assert!(build_cosine(10, -0.1).is_err());
    }

    #[test]
    fn cosine_squared_values() {
        let s = build_cosine_squared(2, 0.0).unwrap();
        assert!(close(s.alphas().unwrap()[1], 0.5, 1e-12));
        for t in [1, 2, 3, 7, 50, 1000] {
            assert_valid(&build_cosine_squared(t, DEFAULT_COSINE_OFFSET).unwrap());
            assert_valid(&build_cosine(t, DEFAULT_COSINE_OFFSET).unwrap());
            assert_valid(&build_linear(t).unwrap());
        }
    }

    #[test]
    fn discrete_validation_rejects_bad_schedules() {
        assert!(AlphaSchedule::discrete(vec![1.0, 0.6, 0.7, 0.0]).is_err());
        assert!(AlphaSchedule::discrete(vec![0.9, 0.5, 0.0]).is_err());
        assert!(AlphaSchedule::discrete(vec![1.0, 0.5, 0.1]).is_err());
        assert!(AlphaSchedule::discrete(vec![1.0]).is_err());
    }

    #[test]
    fn betas_follow_alpha_ratios() {
        let s = build_linear(4).unwrap();
        assert!(close(s.beta(2).unwrap(), 0.5 / 0.75, 1e-15));
        assert_eq!(s.beta(4).unwrap(), 0.0);
        let s = AlphaSchedule::discrete(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.beta(2).unwrap(), 0.0);
        assert!(s.beta(0).is_err());
    }

    #[test]
    fn transition_pmfs() {
        let p = transition_distribution(&build_linear(4).unwrap()).unwrap();
        assert!(p
            .pmf()
            .unwrap()
            .probs()
            .iter()
            .all(|&x| close(x, 0.25, 1e-15)));
        let p = transition_distribution(&build_cosine_squared(2, 0.0).unwrap()).unwrap();
        let probs = p.pmf().unwrap().probs();
        assert!(close(probs[0], 0.5, 1e-12) && close(probs[1], 0.5, 1e-12));
        for s in [
            build_cosine(50, DEFAULT_COSINE_OFFSET).unwrap(),
            build_cosine_squared(333, DEFAULT_COSINE_OFFSET).unwrap(),
        ] {
            let d = transition_distribution(&s).unwrap();
            let total: f64 = d.pmf().unwrap().probs().iter().sum();
            assert!(close(total, 1.0, 1e-9));
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        for kind in [
            ScheduleKind::Linear,
            ScheduleKind::Cosine,
            ScheduleKind::CosineSquared,
        ] {
            let s = kind.build(None, DEFAULT_COSINE_OFFSET).unwrap();
            let d = transition_distribution(&s).unwrap();
            let mass = simpson(|x| d.density(x).unwrap(), 0.0, 1.0, 20_000);
            assert!(close(mass, 1.0, 1e-6), "{} {mass}", kind.name());
            assert!((0..=100).all(|i| d.density(i as f64 / 100.0).unwrap() >= 0.0));
        }
        let d = beta_transition_distribution(17.0, 4.0, None).unwrap();
        let mass = simpson(|x| d.density(x).unwrap(), 0.0, 1.0, 20_000);
        assert!(close(mass, 1.0, 1e-6));
    }

    #[test]
    fn beta_uniform_rounding_bins() {
        let d = beta_transition_distribution(1.0, 1.0, Some(4)).unwrap();
        let p = d.pmf().unwrap().probs();
        for (got, want) in p.iter().zip([0.375, 0.25, 0.25, 0.125]) {
            assert!(close(*got, want, 1e-12), "{p:?}");
        }
        // Monte Carlo: scale uniforms by T, round, fold 0 into 1.
        let mut rng = RngStream::new(2024, 0);
        let mut counts = [0usize; 4];
        let draws = 1_000_000;
        for _ in 0..draws {
            let t = (rng.uniform() * 4.0).round().clamp(1.0, 4.0) as usize;
            counts[t - 1] += 1;
        }
        for (c, want) in counts.iter().zip(p) {
            assert!(close(*c as f64 / draws as f64, *want, 0.003), "{counts:?}");
        }
    }

    #[test]
    fn beta_pmf_shape() {
        for (a, b, t) in [
            (3.0, 3.0, 7),
            (17.0, 4.0, 50),
            (0.5, 0.5, 13),
            (100.0, 4.0, 1000),
        ] {
            let d = beta_transition_distribution(a, b, Some(t)).unwrap();
            let total: f64 = d.pmf().unwrap().probs().iter().sum();
            assert!(close(total, 1.0, 1e-9));
        }
        let d = beta_transition_distribution(3.0, 3.0, Some(1000)).unwrap();
        let probs = d.pmf().unwrap().probs();
        let mode = crate::domain::argmax(probs) + 1;
        assert!((490..=510).contains(&mode), "{mode}");
        assert!(beta_transition_distribution(0.0, 1.0, Some(4)).is_err());
        assert!(beta_transition_distribution(1.0, -2.0, None).is_err());
        let one = beta_transition_distribution(2.0, 5.0, Some(1)).unwrap();
        assert_eq!(one.pmf().unwrap().probs(), &[1.0]);
    }

    #[test]
    fn transition_sets() {
        let d = transition_distribution(&build_linear(4).unwrap()).unwrap();
        let mut rng = RngStream::new(1, 0);
        let set = sample_transition_set(&d, 1, &mut rng).unwrap();
        assert_eq!(set.distinct_count(), 1);
        for n in [1, 2, 3, 10, 40] {
            let set = sample_transition_set(&d, n, &mut rng).unwrap();
            assert!(set.distinct_count() >= 1 && set.distinct_count() <= n.min(4));
            let distinct = set.distinct_steps().unwrap();
            assert!(set.steps().unwrap().iter().all(|t| distinct.contains(t)));
        }
        let c = beta_transition_distribution(17.0, 4.0, None).unwrap();
        let set = sample_transition_set(&c, 20, &mut rng).unwrap();
        assert_eq!(set.distinct_count(), 20);
        assert!(set
            .continuous_times()
            .unwrap()
            .iter()
            .all(|&t| t > 0.0 && t < 1.0));
        assert!(sample_transition_set(&d, 0, &mut rng).is_err());
    }

    #[test]
    fn ordered_transition_sets() {
        let set = TransitionSet::from_steps(vec![2, 5, 1, 3], 5).unwrap();
        let ltr = set.clone().with_order(TransitionOrder::LeftToRight);
        assert_eq!(ltr.steps().unwrap(), &[5, 3, 2, 1]);
        let rtl = set.clone().with_order(TransitionOrder::RightToLeft);
        assert_eq!(rtl.steps().unwrap(), &[1, 2, 3, 5]);
        assert_eq!(rtl.distinct_count(), set.distinct_count());
    }

    #[test]
    fn effective_schedule_round_trips_pmf() {
        let d = beta_transition_distribution(3.0, 3.0, Some(20)).unwrap();
        let s = AlphaSchedule::from_transition(&d).unwrap();
        let back = transition_distribution(&s).unwrap();
        for (x, y) in back
            .pmf()
            .unwrap()
            .probs()
            .iter()
            .zip(d.pmf().unwrap().probs())
        {
            assert!(close(*x, *y, 1e-12));
        }
        let c = beta_transition_distribution(17.0, 4.0, None).unwrap();
        let s = AlphaSchedule::from_transition(&c).unwrap();
        assert!(close(
            s.alpha(Time::Continuous(0.8)).unwrap(),
            1.0 - c.cdf(0.8).unwrap(),
            1e-15
        ));
    }

    #[test]
    fn continuous_inverse_cdf_matches_quantiles() {
        let d = transition_distribution(&ScheduleKind::Linear.build(None, 0.0).unwrap()).unwrap();
        let mut rng = RngStream::new(9, 0);
        let n = 50_000;
        let below = (0..n)
            .filter(|_| d.sample_continuous(&mut rng).unwrap() < 0.3)
            .count();
        assert!(close(below as f64 / n as f64, 0.3, 0.01));
    }
}
