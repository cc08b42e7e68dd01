//! Reverse samplers.
//!
//! The Markov baselines call the denoiser at every step. The non-Markov
//! samplers draw transition times first and only call the denoiser at the
//! distinct transition times; every other step is a copy and costs nothing.

use std::fmt;
use std::sync::Mutex;

use serde::Serialize;

use crate::datamodel::{Denoiser, Prediction};
use crate::domain::{
    sample_bernoulli, CategoricalDist, NoiseKind, NoiseModel, RngStream, Sequence, Token,
};
use crate::error::{Error, Result};
use crate::schedule::{
    sample_transition_set, transition_distribution, AlphaSchedule, Time, TransitionOrder,
    TransitionSet, TransitionTimeDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    BaselineAbsorb,
    BaselineMulti,
    Dndm,
    DndmV2,
    DndmTopk,
    DndmC,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::BaselineAbsorb,
        SamplerKind::BaselineMulti,
        SamplerKind::Dndm,
        SamplerKind::DndmV2,
        SamplerKind::DndmTopk,
        SamplerKind::DndmC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::BaselineAbsorb => "baseline-absorb",
            SamplerKind::BaselineMulti => "baseline-multi",
            SamplerKind::Dndm => "dndm",
            SamplerKind::DndmV2 => "dndm-v2",
            SamplerKind::DndmTopk => "dndm-topk",
            SamplerKind::DndmC => "dndm-c",
        }
    }

    pub fn is_continuous(self) -> bool {
        self == SamplerKind::DndmC
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown sampler `{s}`")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SamplerConfig {
    /// Overrides the transition-time law implied by the schedule.
    pub transition: Option<TransitionTimeDistribution>,
    pub order: TransitionOrder,
    /// Keep a snapshot of the sequence after every denoiser call.
    pub record_states: bool,
}

/// One denoiser call and what it changed.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: Time,
    pub updated: Vec<usize>,
    /// The sequence right after this step, when states are recorded.
    pub state: Option<Sequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub stream_id: u64,
    pub final_seq: Sequence,
    /// Number of denoiser calls; equals `events.len()`.
    pub nfe: usize,
    pub events: Vec<TraceEvent>,
    pub transitions: Option<TransitionSet>,
}

struct Recorder<'a, D: ?Sized> {
    denoiser: &'a D,
    record_states: bool,
    events: Vec<TraceEvent>,
}

impl<'a, D: Denoiser + ?Sized> Recorder<'a, D> {
    fn new(denoiser: &'a D, config: &SamplerConfig) -> Self {
        Self {
            denoiser,
            record_states: config.record_states,
            events: Vec::new(),
        }
    }

    fn predict(&self, x: &Sequence, time: Time, rng: &mut RngStream) -> Result<Prediction> {
        let pred = self.denoiser.predict(x, time, rng)?;
        if pred.x0.len() != x.len() || pred.scores.len() != x.len() {
            return Err(Error::arg(
                "denoiser returned a prediction of the wrong length",
            ));
        }
        Ok(pred)
    }

    fn record(&mut self, time: Time, updated: Vec<usize>, x: &Sequence) {
        let state = self.record_states.then(|| x.clone());
        self.events.push(TraceEvent {
            time,
            updated,
            state,
        });
    }

    fn finish(
        self,
        sampler: SamplerKind,
        rng: &RngStream,
        x: Sequence,
        transitions: Option<TransitionSet>,
    ) -> SampleTrace {
        SampleTrace {
            sampler,
            seed: rng.seed(),
            stream_id: rng.stream_id(),
            final_seq: x,
            nfe: self.events.len(),
            events: self.events,
            transitions,
        }
    }
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("sequence length must be at least 1"));
    }
    Ok(())
}

fn check_prediction(pred: &Prediction, noise: &NoiseModel) -> Result<()> {
    if let Some(t) = pred
        .x0
        .tokens()
        .iter()
        .find(|t| !noise.vocab().is_base(**t))
    {
        return Err(Error::arg(format!("denoiser predicted non-data token {t}")));
    }
    Ok(())
}

/// Markov absorbing reverse process: a masked token is revealed with
/// probability `(α_{t-1} - α_t) / (1 - α_t)` at step `t`.
pub fn baseline_absorb_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    let mask = match (noise.kind(), noise.mask()) {
        (NoiseKind::Absorbing, Some(mask)) => mask,
        _ => return Err(Error::arg("baseline-absorb needs absorbing noise")),
    };
    let alphas = schedule
        .alphas()
        .ok_or_else(|| Error::arg("baseline-absorb needs a discrete schedule"))?;
    if let Some(t) = (1..alphas.len()).find(|&t| alphas[t] >= 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "α_{t} = 1 makes the reveal probability undefined"
        )));
    }
    let mut rec = Recorder::new(denoiser, config);
    let mut x = Sequence::filled(mask, n);
    for t in (1..alphas.len()).rev() {
        let pred = rec.predict(&x, Time::Step(t), rng)?;
        check_prediction(&pred, noise)?;
        let reveal = ((alphas[t - 1] - alphas[t]) / (1.0 - alphas[t])).clamp(0.0, 1.0);
        let mut updated = Vec::new();
        for (pos, token) in x.tokens_mut().iter_mut().enumerate() {
            if *token == mask && sample_bernoulli(reveal, rng)? {
                *token = pred.x0[pos];
                updated.push(pos);
            }
        }
        rec.record(Time::Step(t), updated, &x);
    }
    Ok(rec.finish(SamplerKind::BaselineAbsorb, rng, x, None))
}

/// Multinomial posterior `θ_post ∝ (β_t x_t + (1-β_t)/K) ⊙ (α_{t-1} x̂_0 + (1-α_{t-1})/K)`.
pub fn multinomial_posterior(
    xt: Token,
    x0: Token,
    beta_t: f64,
    alpha_prev: f64,
    k: usize,
) -> Result<CategoricalDist> {
    if xt.index() >= k || x0.index() >= k {
        return Err(Error::arg(
            "multinomial posterior tokens must be data categories",
        ));
    }
    let uniform = 1.0 / k as f64;
    let weights: Vec<f64> = (0..k)
        .map(|i| {
            let keep = beta_t * f64::from(u8::from(i == xt.index())) + (1.0 - beta_t) * uniform;
            let data =
                alpha_prev * f64::from(u8::from(i == x0.index())) + (1.0 - alpha_prev) * uniform;
            keep * data
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidDistribution(
            "multinomial posterior has zero mass".into(),
        ));
    }
    CategoricalDist::new(weights.into_iter().map(|w| w / total).collect())
}

/// Markov multinomial reverse process: every step resamples every position
/// from [`multinomial_posterior`] with `x_0 := x̂_0`.
pub fn baseline_multinomial_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    if noise.kind() != NoiseKind::UniformMultinomial {
        return Err(Error::arg("baseline-multi needs uniform noise"));
    }
    let alphas = schedule
        .alphas()
        .ok_or_else(|| Error::arg("baseline-multi needs a discrete schedule"))?;
    let k = noise.base_size();
    let mut rec = Recorder::new(denoiser, config);
    let mut x = noise.sample_sequence(n, rng);
    for t in (1..alphas.len()).rev() {
        let pred = rec.predict(&x, Time::Step(t), rng)?;
        check_prediction(&pred, noise)?;
        let beta = schedule.beta(t)?;
        for (pos, token) in x.tokens_mut().iter_mut().enumerate() {
            *token =
                multinomial_posterior(*token, pred.x0[pos], beta, alphas[t - 1], k)?.sample(rng);
        }
        rec.record(Time::Step(t), (0..n).collect(), &x);
    }
    Ok(rec.finish(SamplerKind::BaselineMulti, rng, x, None))
}

fn discrete_transitions(
    schedule: &AlphaSchedule,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<TransitionSet> {
    let owned;
    let dist = match &config.transition {
        Some(d) => d,
        None => {
            owned = transition_distribution(schedule)?;
            &owned
        }
    };
    let steps = dist
        .steps()
        .ok_or_else(|| Error::arg("this sampler needs a discrete transition-time law"))?;
    if let Some(t) = schedule.steps() {
        if t != steps {
            return Err(Error::arg(format!(
                "schedule has {t} steps but the transition law has {steps}"
            )));
        }
    }
    Ok(sample_transition_set(dist, n, rng)?.with_order(config.order))
}

/// Positions grouped by transition step, visited from `T` down to 1.
fn by_step_descending(set: &TransitionSet) -> Vec<(usize, Vec<usize>)> {
    let times = set.steps().expect("discrete set");
    set.distinct_steps()
        .expect("discrete set")
        .iter()
        .rev()
        .map(|&t| (t, (0..times.len()).filter(|&p| times[p] == t).collect()))
        .collect()
}

/// Non-Markov sampler: one denoiser call per distinct transition time; the
/// positions transitioning at that time take `x̂_0`, all others are copied.
pub fn dndm_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    let mut x = noise.sample_sequence(n, rng);
    let set = discrete_transitions(schedule, n, config, rng)?;
    let mut rec = Recorder::new(denoiser, config);
    for (t, positions) in by_step_descending(&set) {
        let pred = rec.predict(&x, Time::Step(t), rng)?;
        check_prediction(&pred, noise)?;
        for &p in &positions {
            x.tokens_mut()[p] = pred.x0[p];
        }
        rec.record(Time::Step(t), positions, &x);
    }
    Ok(rec.finish(SamplerKind::Dndm, rng, x, Some(set)))
}

/// Same calls as [`dndm_sample`], but every position with `τ_n >= t` is
/// overwritten at each call, so tokens can be revised.
pub fn dndm_v2_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    let mut x = noise.sample_sequence(n, rng);
    let set = discrete_transitions(schedule, n, config, rng)?;
    let times = set.steps().expect("discrete set").to_vec();
    let mut rec = Recorder::new(denoiser, config);
    for (t, _) in by_step_descending(&set) {
        let pred = rec.predict(&x, Time::Step(t), rng)?;
        check_prediction(&pred, noise)?;
        let updated: Vec<usize> = (0..n).filter(|&p| times[p] >= t).collect();
        for &p in &updated {
            x.tokens_mut()[p] = pred.x0[p];
        }
        rec.record(Time::Step(t), updated, &x);
    }
    Ok(rec.finish(SamplerKind::DndmV2, rng, x, Some(set)))
}

/// Top-k variant: the transition times only decide how many positions are
/// decoded by each step; which positions is decided by the denoiser scores.
///
/// With `K_t` the number of decoded positions in `x_t` (those with
/// `τ_n > t`), a step with `K_{t-1} > K_t` calls the denoiser, ranks all
/// positions by score (ties by position) and commits the top `K_{t-1}` that
/// have not been committed yet.
pub fn dndm_topk_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    let mut x = noise.sample_sequence(n, rng);
    let set = discrete_transitions(schedule, n, config, rng)?;
    let times = set.steps().expect("discrete set");
    let steps = schedule
        .steps()
        .or_else(|| config.transition.as_ref().and_then(|d| d.steps()))
        .expect("checked");
    // decoded_after[t] = #{τ_n > t}
    let mut at = vec![0usize; steps + 2];
    for &t in times {
        at[t] += 1;
    }
    let mut decoded_after = vec![0usize; steps + 2];
    for t in (0..=steps).rev() {
        decoded_after[t] = decoded_after[t + 1] + at[t + 1];
    }
    let mut committed = vec![false; n];
    let mut rec = Recorder::new(denoiser, config);
    for t in (1..=steps).rev() {
        let (k_prev, k_now) = (decoded_after[t - 1], decoded_after[t]);
        if k_prev <= k_now {
            continue;
        }
        let pred = rec.predict(&x, Time::Step(t), rng)?;
        check_prediction(&pred, noise)?;
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| pred.scores[b].total_cmp(&pred.scores[a]).then(a.cmp(&b)));
        let mut updated = Vec::new();
        for &p in ranked.iter().take(k_prev) {
            if !committed[p] {
                committed[p] = true;
                x.tokens_mut()[p] = pred.x0[p];
                updated.push(p);
            }
        }
        updated.sort_unstable();
        rec.record(Time::Step(t), updated, &x);
    }
    debug_assert!(committed.iter().all(|&c| c));
    Ok(rec.finish(SamplerKind::DndmTopk, rng, x, Some(set)))
}

/// Continuous-time sampler: real transition times are visited in decreasing
/// order with one denoiser call per distinct time.
pub fn dndm_continuous_sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    check_len(n)?;
    let owned;
    let dist = match &config.transition {
        Some(d) => d,
        None => {
            owned = transition_distribution(schedule)?;
            &owned
        }
    };
    if !dist.is_continuous() {
        return Err(Error::arg("dndm-c needs a continuous transition-time law"));
    }
    let mut x = noise.sample_sequence(n, rng);
    let set = sample_transition_set(dist, n, rng)?.with_order(config.order);
    let times = set.continuous_times().expect("continuous set");
    // decreasing time, ties by ascending position
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
    let mut rec = Recorder::new(denoiser, config);
    let mut i = 0;
    while i < order.len() {
        let tau = times[order[i]];
        let mut group = Vec::new();
        while i < order.len() && times[order[i]] == tau {
            group.push(order[i]);
            i += 1;
        }
        let pred = rec.predict(&x, Time::Continuous(tau), rng)?;
        check_prediction(&pred, noise)?;
        for &p in &group {
            x.tokens_mut()[p] = pred.x0[p];
        }
        rec.record(Time::Continuous(tau), group, &x);
    }
    Ok(rec.finish(SamplerKind::DndmC, rng, x, Some(set)))
}

/// Dispatches to the sampler named by `kind`.
pub fn run_sampler<D: Denoiser + ?Sized>(
    kind: SamplerKind,
    denoiser: &D,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
    n: usize,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    match kind {
        SamplerKind::BaselineAbsorb => {
            baseline_absorb_sample(denoiser, schedule, noise, n, config, rng)
        }
        SamplerKind::BaselineMulti => {
            baseline_multinomial_sample(denoiser, schedule, noise, n, config, rng)
        }
        SamplerKind::Dndm => dndm_sample(denoiser, schedule, noise, n, config, rng),
        SamplerKind::DndmV2 => dndm_v2_sample(denoiser, schedule, noise, n, config, rng),
        SamplerKind::DndmTopk => dndm_topk_sample(denoiser, schedule, noise, n, config, rng),
        SamplerKind::DndmC => dndm_continuous_sample(denoiser, schedule, noise, n, config, rng),
    }
}

/// Wraps a denoiser and logs the time of every call.
#[derive(Debug)]
pub struct CountingDenoiser<D> {
    inner: D,
    calls: Mutex<Vec<Time>>,
}

impl<D: Denoiser> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<Time> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn count(&self) -> usize {
        self.calls.lock().expect("call log poisoned").len()
    }

    pub fn reset(&self) {
        self.calls.lock().expect("call log poisoned").clear();
    }
}

impl<D: Denoiser> Denoiser for CountingDenoiser<D> {
    fn predict(&self, xt: &Sequence, time: Time, rng: &mut RngStream) -> Result<Prediction> {
        self.calls.lock().expect("call log poisoned").push(time);
        self.inner.predict(xt, time, rng)
    }

    fn factorized(&self) -> bool {
        self.inner.factorized()
    }
}
