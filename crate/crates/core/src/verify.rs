//! Statistical and brute-force checks of the forward processes, transition
//! laws, NFE formula and samplers.
//!
//! Each check returns a [`CheckResult`] with its measured values; failures
//! are reported, never raised.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::Serialize;

use crate::analytics::{
    chi_square_gof, empirical, expected_nfe, nfe_lower_bound_uniform, tv_distance,
};
use crate::batch::fold_trials;
use crate::datamodel::{exact_posterior, oracle_denoiser, teacher_denoiser, ToyDataModel};
use crate::domain::{NoiseKind, NoiseModel, RngStream, Sequence, Token, VocabSpec};
use crate::error::{Error, Result};
use crate::forward::{marginal_at, markov_forward, nonmarkov_forward};
use crate::sampler::{
    baseline_multinomial_sample, multinomial_posterior, run_sampler, CountingDenoiser,
    SamplerConfig, SamplerKind,
};
use crate::schedule::{
    beta_transition_distribution, build_linear, sample_transition_set, transition_distribution,
    AlphaSchedule, DiscretePmf, ScheduleKind, Time, TransitionTimeDistribution,
    DEFAULT_COSINE_OFFSET,
};

/// Trial count at which every statistical threshold is calibrated.
pub const FULL_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    /// Base trial count; some checks scale it (×10 for the bounds check,
    /// ÷10 for copy-step instrumentation).
    pub trials: u64,
    pub seed: u64,
    pub significance: f64,
    /// Worker threads, 0 for all cores.
    pub parallelism: usize,
    /// Added to `p_1` of the expected pmfs in the transition-law check.
    pub pmf_perturbation: f64,
    /// Restrict to these check ids.
    pub only: Option<Vec<usize>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: FULL_TRIALS,
            seed: 7,
            significance: 1e-4,
            parallelism: 0,
            pmf_perturbation: 0.0,
            only: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    /// The bound the value is compared against.
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: u64,
    pub significance: f64,
    /// Set when the trial count is below the calibrated [`FULL_TRIALS`].
    pub reduced_power: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "seed {} trials {}{}\n",
            self.seed,
            self.trials,
            if self.reduced_power {
                " (reduced statistical power)"
            } else {
                ""
            }
        );
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {:>2} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name
            ));
            for m in &c.measurements {
                out.push_str(&format!(
                    "         {:<48} {:>14.6e}  limit {:>12.6e}  {}\n",
                    m.name,
                    m.value,
                    m.limit,
                    if m.passed { "ok" } else { "FAIL" }
                ));
            }
            if let Some(e) = &c.error {
                out.push_str(&format!("         error: {e}\n"));
            }
        }
        out
    }
}

#[derive(Default)]
struct Checker {
    measurements: Vec<Measurement>,
}

impl Checker {
    /// Records `value <= limit`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        let passed = value <= limit;
        self.push(name, value, limit, passed);
    }

    /// Records `value >= limit`.
    fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        let passed = value >= limit;
        self.push(name, value, limit, passed);
    }

    fn below(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        let passed = value < limit;
        self.push(name, value, limit, passed);
    }

    fn push(&mut self, name: impl Into<String>, value: f64, limit: f64, passed: bool) {
        self.measurements.push(Measurement {
            name: name.into(),
            value,
            limit,
            passed,
        });
    }
}

type CheckFn = fn(&VerifyConfig, &mut Checker) -> Result<()>;

pub const CHECKS: [(usize, &str); 11] = [
    (
        1,
        "forward marginals: Markov and non-Markov match the mixture marginal",
    ),
    (2, "transition-time histograms match alpha differences"),
    (3, "expected NFE formula matches Monte Carlo"),
    (4, "transition-set size bounds"),
    (5, "copy steps make no denoiser calls"),
    (6, "continuous sampler with joint oracle is exact"),
    (7, "single-token samplers reproduce the data law"),
    (8, "exact posterior matches brute-force enumeration"),
    (9, "multinomial posterior kernel"),
    (10, "NFE reduction with Beta(3,3) at N = 25"),
    (11, "sample command output is deterministic"),
];

fn check_fn(id: usize) -> CheckFn {
    match id {
        1 => check_forward_marginals,
        2 => check_transition_histograms,
        3 => check_nfe_formula,
        4 => check_nfe_bounds,
        5 => check_copy_steps,
        6 => check_continuous_exactness,
        7 => check_single_token,
        8 => check_bayes_oracle,
        9 => check_multinomial_kernel,
        10 => check_nfe_trend,
        11 => check_determinism,
        _ => unreachable!("unknown check id"),
    }
}

/// Runs one check by id.
pub fn run_check(id: usize, config: &VerifyConfig) -> Result<CheckResult> {
    let name = CHECKS
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::arg(format!("no check with id {id}")))?;
    let start = Instant::now();
    let mut checker = Checker::default();
    let outcome = check_fn(id)(config, &mut checker);
    let error = outcome.err().map(|e| e.to_string());
    let passed = error.is_none()
        && !checker.measurements.is_empty()
        && checker.measurements.iter().all(|m| m.passed);
    Ok(CheckResult {
        id,
        name,
        passed,
        measurements: checker.measurements,
        error,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

pub fn verify_suite(config: &VerifyConfig) -> Result<VerifyReport> {
    let ids: Vec<usize> = match &config.only {
        Some(ids) => ids.clone(),
        None => CHECKS.iter().map(|(i, _)| *i).collect(),
    };
    let checks = ids
        .into_iter()
        .map(|id| run_check(id, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        seed: config.seed,
        trials: config.trials,
        significance: config.significance,
        reduced_power: config.trials < FULL_TRIALS,
        checks,
    })
}

fn seq(ix: &[u32], vocab: &VocabSpec) -> Sequence {
    Sequence::from_indices(ix, vocab).expect("fixture sequence")
}

fn add_counts(acc: &mut [u64], part: Vec<u64>) {
    acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
}

fn check_forward_marginals(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let (k, steps) = (5usize, 50usize);
    let times = [10usize, 25, 40];
    let schedule = build_linear(steps)?;
    for kind in [NoiseKind::UniformMultinomial, NoiseKind::Absorbing] {
        let noise = NoiseModel::new(kind, k)?;
        let states = noise.vocab().total_states();
        let x0 = seq(&[0, 2, 4], &noise.vocab());
        let n = x0.len();
        for markov in [true, false] {
            // counts[time][position][state]
            let width = times.len() * n * states;
            let counts = fold_trials(
                cfg.trials,
                cfg.parallelism,
                || vec![0u64; width],
                |acc, trial| {
                    let mut rng = RngStream::for_trial(cfg.seed, trial);
                    let traj = if markov {
                        markov_forward(&x0, &schedule, &noise, &mut rng)
                    } else {
                        nonmarkov_forward(&x0, &schedule, &noise, &mut rng)
                    }
                    .expect("valid inputs");
                    for (i, &t) in times.iter().enumerate() {
                        let s = traj.state_at(Time::Step(t)).expect("in range");
                        for (pos, tok) in s.tokens().iter().enumerate() {
                            acc[(i * n + pos) * states + tok.index()] += 1;
                        }
                    }
                },
                |acc, part| add_counts(acc, part),
            );
            let mut worst: f64 = 0.0;
            for (i, &t) in times.iter().enumerate() {
                for pos in 0..n {
                    let slice = &counts[(i * n + pos) * states..(i * n + pos + 1) * states];
                    let want = marginal_at(x0[pos], Time::Step(t), &schedule, &noise)?;
                    worst = worst.max(tv_distance(&empirical(slice), want.probs())?);
                }
            }
            c.below(
                format!(
                    "{} {:?} max TV",
                    if markov { "markov" } else { "non-markov" },
                    kind
                ),
                worst,
                0.01,
            );
        }
    }
    Ok(())
}

fn check_transition_histograms(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let steps = 50usize;
    for kind in [
        ScheduleKind::Linear,
        ScheduleKind::Cosine,
        ScheduleKind::CosineSquared,
    ] {
        let schedule = kind.build(Some(steps), DEFAULT_COSINE_OFFSET)?;
        let dist = transition_distribution(&schedule)?;
        let alphas = schedule.alphas().expect("discrete");
        let mut expected: Vec<f64> = (1..=steps).map(|t| alphas[t - 1] - alphas[t]).collect();
        expected[0] += cfg.pmf_perturbation;
        let total: f64 = expected.iter().sum();
        expected.iter_mut().for_each(|p| *p /= total);

        // τ drawn from the transition law
        let sampled = fold_trials(
            cfg.trials,
            cfg.parallelism,
            || vec![0u64; steps],
            |acc, trial| {
                let mut rng = RngStream::for_trial(cfg.seed, trial);
                let set = sample_transition_set(&dist, 1, &mut rng).expect("valid law");
                acc[set.steps().expect("discrete")[0] - 1] += 1;
            },
            |acc, part| add_counts(acc, part),
        );
        // τ read off the step-by-step absorbing chain as the first masked step
        let noise = NoiseModel::absorbing(2)?;
        let x0 = seq(&[0], &noise.vocab());
        let observed = fold_trials(
            cfg.trials,
            cfg.parallelism,
            || vec![0u64; steps],
            |acc, trial| {
                let mut rng = RngStream::for_trial(cfg.seed ^ 0x5eed, trial);
                let traj = markov_forward(&x0, &schedule, &noise, &mut rng).expect("valid inputs");
                let states = traj.states().expect("discrete");
                let tau = (1..=steps)
                    .find(|&t| noise.vocab().is_mask(states[t][0]))
                    .expect("α_T = 0");
                acc[tau - 1] += 1;
            },
            |acc, part| add_counts(acc, part),
        );
        for (label, counts) in [("sampled", sampled), ("markov first-mask", observed)] {
            let gof = chi_square_gof(&counts, &expected, cfg.significance)?;
            c.at_least(
                format!("{} {label} chi-square p-value", kind.name()),
                gof.p_value,
                cfg.significance,
            );
        }
    }
    Ok(())
}

/// E|T| by summing over all `T^N` assignments of transition times.
pub fn enumerate_expected_nfe(probs: &[f64], n: usize) -> f64 {
    let t = probs.len();
    let mut digits = vec![0usize; n];
    let mut total = 0.0;
    let count = t.checked_pow(n as u32).expect("enumeration too large");
    for _ in 0..count {
        let weight: f64 = digits.iter().map(|&d| probs[d]).product();
        let mut seen = vec![false; t];
        digits.iter().for_each(|&d| seen[d] = true);
        total += weight * seen.iter().filter(|&&s| s).count() as f64;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < t {
                break;
            }
            *d = 0;
        }
    }
    total
}

fn check_nfe_formula(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let enumerated = enumerate_expected_nfe(&[0.25; 4], 2);
    let formula = expected_nfe(
        &TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(4)?),
        2,
    )?;
    c.at_most(
        "enumerated E|T| - 1.75 (T=4, N=2)",
        (enumerated - 1.75).abs(),
        1e-12,
    );
    c.at_most(
        "formula E|T| - enumerated (T=4, N=2)",
        (formula.expected_nfe - enumerated).abs(),
        1e-12,
    );
    for steps in [4usize, 50, 1000] {
        for n in [2usize, 25] {
            let laws = [
                (
                    "uniform",
                    TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(steps)?),
                ),
                (
                    "beta(3,3)",
                    beta_transition_distribution(3.0, 3.0, Some(steps))?,
                ),
            ];
            for (label, dist) in laws {
                let report = expected_nfe(&dist, n)?.with_monte_carlo(
                    &dist,
                    cfg.trials,
                    cfg.seed.wrapping_add((steps * 100 + n) as u64),
                    cfg.parallelism,
                )?;
                let se = report.stderr().expect("trials > 0");
                let gap = (report.empirical_mean.expect("set") - report.expected_nfe).abs();
                c.at_most(
                    format!("|MC - E|T|| T={steps} N={n} {label} (limit 3 SE)"),
                    gap,
                    3.0 * se,
                );
            }
        }
    }
    Ok(())
}

fn check_nfe_bounds(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let configs: Vec<(usize, usize, TransitionTimeDistribution)> = vec![
        (
            4,
            4,
            TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(4)?),
        ),
        (4, 25, beta_transition_distribution(3.0, 3.0, Some(4))?),
        (
            50,
            2,
            TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(50)?),
        ),
        (50, 25, beta_transition_distribution(17.0, 4.0, Some(50))?),
        (
            1000,
            25,
            beta_transition_distribution(3.0, 3.0, Some(1000))?,
        ),
        (
            10,
            100,
            transition_distribution(&ScheduleKind::Cosine.build(Some(10), DEFAULT_COSINE_OFFSET)?)?,
        ),
        (
            3,
            1,
            TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(3)?),
        ),
        (
            7,
            7,
            transition_distribution(
                &ScheduleKind::CosineSquared.build(Some(7), DEFAULT_COSINE_OFFSET)?,
            )?,
        ),
    ];
    let draws = cfg.trials * 10;
    let per = draws.div_ceil(configs.len() as u64);
    let mut violations = 0u64;
    for (i, (steps, n, dist)) in configs.iter().enumerate() {
        let bad = fold_trials(
            per,
            cfg.parallelism,
            || 0u64,
            |acc, trial| {
                let mut rng = RngStream::for_trial(cfg.seed.wrapping_add(1000 + i as u64), trial);
                let k = sample_transition_set(dist, *n, &mut rng)
                    .expect("valid")
                    .distinct_count();
                if k < 1 || k > (*n).min(*steps) {
                    *acc += 1;
                }
            },
            |acc, part| *acc += part,
        );
        violations += bad;
        let report = expected_nfe(dist, *n)?;
        let bound = nfe_lower_bound_uniform(*steps, *n);
        c.at_least(
            format!("C - (1-1/T)^N, T={steps} N={n}"),
            report.c_constant - bound,
            -1e-12,
        );
        c.at_most(
            format!("E|T| - min(N,T), T={steps} N={n}"),
            report.expected_nfe - (*n).min(*steps) as f64,
            1e-12,
        );
        c.at_least(
            format!("E|T| - 1, T={steps} N={n}"),
            report.expected_nfe - 1.0,
            -1e-12,
        );
    }
    c.at_most(
        format!(
            "sets outside 1 <= |T| <= min(N,T) ({} draws)",
            per * configs.len() as u64
        ),
        violations as f64,
        0.0,
    );
    let uniform = expected_nfe(
        &TransitionTimeDistribution::DiscretePmf(DiscretePmf::uniform(4)?),
        4,
    )?;
    c.at_most(
        "|E|T| - 2.734375| (uniform T=N=4)",
        (uniform.expected_nfe - 2.734375).abs(),
        1e-12,
    );
    c.at_most(
        "E|T| (uniform T=N=4) vs 0.7 T",
        uniform.expected_nfe,
        0.7 * 4.0,
    );
    let skew = expected_nfe(
        &TransitionTimeDistribution::DiscretePmf(DiscretePmf::new(vec![0.7, 0.1, 0.1, 0.1])?),
        4,
    )?;
    c.below(
        "(1-1/T)^N - C for skewed pmf (strict)",
        nfe_lower_bound_uniform(4, 4) - skew.c_constant,
        0.0,
    );
    Ok(())
}

fn check_copy_steps(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let runs = (cfg.trials / 10).max(1);
    let k = 3;
    let n = 6;
    let model = ToyDataModel::factorized(k, vec![vec![0.5, 0.3, 0.2]; n])?;
    let schedule = build_linear(50)?;
    let continuous = ScheduleKind::Linear.build(None, 0.0)?;
    for kind in [NoiseKind::Absorbing, NoiseKind::UniformMultinomial] {
        let noise = NoiseModel::new(kind, k)?;
        for sampler in [
            SamplerKind::Dndm,
            SamplerKind::DndmV2,
            SamplerKind::DndmTopk,
            SamplerKind::DndmC,
        ] {
            let sched = if sampler.is_continuous() {
                &continuous
            } else {
                &schedule
            };
            let oracle = oracle_denoiser(model.clone(), sched.clone(), noise, false)?;
            let (stray, mismatched) = fold_trials(
                runs,
                cfg.parallelism,
                || (0u64, 0u64),
                |acc, trial| {
                    let counter = CountingDenoiser::new(&oracle);
                    let mut rng = RngStream::for_trial(cfg.seed, trial);
                    let trace = run_sampler(
                        sampler,
                        &counter,
                        sched,
                        &noise,
                        n,
                        &SamplerConfig::default(),
                        &mut rng,
                    )
                    .expect("sampler run");
                    let set = trace.transitions.as_ref().expect("transition set");
                    let calls = counter.calls();
                    for call in &calls {
                        let hit = match (call, set.distinct_steps(), set.continuous_times()) {
                            (Time::Step(t), Some(d), _) => d.contains(t),
                            (Time::Continuous(t), _, Some(times)) => times.contains(t),
                            _ => false,
                        };
                        acc.0 += u64::from(!hit);
                    }
                    acc.1 +=
                        u64::from(calls.len() != set.distinct_count() || trace.nfe != calls.len());
                },
                |acc, part| {
                    acc.0 += part.0;
                    acc.1 += part.1;
                },
            );
            c.at_most(
                format!("{sampler} {kind:?} calls outside transition times"),
                stray as f64,
                0.0,
            );
            c.at_most(
                format!("{sampler} {kind:?} runs with nfe != |T|"),
                mismatched as f64,
                0.0,
            );
        }
    }
    Ok(())
}

/// Final-sequence histogram over the support, with one overflow bin for
/// sequences outside it.
fn final_histogram(
    cfg: &VerifyConfig,
    seed: u64,
    model: &ToyDataModel,
    run: impl Fn(&mut RngStream) -> Sequence + Sync + Send,
) -> Vec<u64> {
    let bins = model.support().len() + 1;
    fold_trials(
        cfg.trials,
        cfg.parallelism,
        || vec![0u64; bins],
        |acc, trial| {
            let mut rng = RngStream::for_trial(seed, trial);
            let out = run(&mut rng);
            acc[model.index_of(&out).unwrap_or(bins - 1)] += 1;
        },
        |acc, part| add_counts(acc, part),
    )
}

fn with_overflow(model: &ToyDataModel) -> Vec<f64> {
    let mut v = model.weights().to_vec();
    v.push(0.0);
    v
}

fn check_continuous_exactness(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let model = ToyDataModel::chain(
        3,
        2,
        vec![0.5, 0.3, 0.2],
        vec![
            vec![0.1, 0.6, 0.3],
            vec![0.7, 0.2, 0.1],
            vec![0.25, 0.25, 0.5],
        ],
    )?;
    let noise = NoiseModel::absorbing(3)?;
    let schedule = ScheduleKind::Linear.build(None, 0.0)?;
    let oracle = oracle_denoiser(model.clone(), schedule.clone(), noise, true)?;
    let cfg_s = SamplerConfig::default();
    let counts = final_histogram(cfg, cfg.seed, &model, |rng| {
        run_sampler(
            SamplerKind::DndmC,
            &oracle,
            &schedule,
            &noise,
            2,
            &cfg_s,
            rng,
        )
        .expect("sampler run")
        .final_seq
    });
    c.below(
        "dndm-c chain K=3 N=2 TV to q_data",
        tv_distance(&empirical(&counts), &with_overflow(&model))?,
        0.02,
    );
    Ok(())
}

fn check_single_token(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let k = 4;
    let vocab = VocabSpec::new(k, false)?;
    let model = ToyDataModel::from_support(
        k,
        (0..k as u32)
            .map(|i| (seq(&[i], &vocab), [0.1, 0.2, 0.3, 0.4][i as usize]))
            .collect(),
    )?;
    let noise = NoiseModel::absorbing(k)?;
    let discrete = build_linear(50)?;
    let continuous = ScheduleKind::Linear.build(None, 0.0)?;
    let samplers = [
        SamplerKind::BaselineAbsorb,
        SamplerKind::Dndm,
        SamplerKind::DndmV2,
        SamplerKind::DndmTopk,
        SamplerKind::DndmC,
    ];
    for (i, sampler) in samplers.into_iter().enumerate() {
        let sched = if sampler.is_continuous() {
            &continuous
        } else {
            &discrete
        };
        let oracle = oracle_denoiser(model.clone(), sched.clone(), noise, true)?;
        let cfg_s = SamplerConfig::default();
        let counts = final_histogram(cfg, cfg.seed.wrapping_add(i as u64), &model, |rng| {
            run_sampler(sampler, &oracle, sched, &noise, 1, &cfg_s, rng)
                .expect("sampler run")
                .final_seq
        });
        c.below(
            format!("{sampler} N=1 TV to q_data"),
            tv_distance(&empirical(&counts), &with_overflow(&model))?,
            0.01,
        );
    }
    Ok(())
}

/// Joint law of `(x_0, x_t)` for the absorbing Markov chain, built by
/// enumerating every keep/replace path of every position.
pub fn enumerate_absorbing_joint(
    model: &ToyDataModel,
    schedule: &AlphaSchedule,
    t: usize,
) -> Result<HashMap<(Sequence, Sequence), f64>> {
    let mask = Token(model.base_size() as u32);
    let n = model.len();
    let betas = (1..=t)
        .map(|s| schedule.beta(s))
        .collect::<Result<Vec<f64>>>()?;
    // Every keep/replace path of one position; a replacement always draws the
    // mask, so only the all-keep path ends on x_0.
    let (mut survive, mut masked) = (0.0, 0.0);
    for path in 0..(1u32 << t) {
        let p: f64 = (0..t)
            .map(|s| {
                if path >> s & 1 == 1 {
                    betas[s]
                } else {
                    1.0 - betas[s]
                }
            })
            .product();
        if path == (1u32 << t) - 1 {
            survive += p;
        } else {
            masked += p;
        }
    }
    let mut joint = HashMap::new();
    for (x0, w) in model.support().iter().zip(model.weights()) {
        for hidden in 0..(1u32 << n) {
            let mut tokens = x0.tokens().to_vec();
            let mut p = *w;
            for (pos, tok) in tokens.iter_mut().enumerate() {
                if hidden >> pos & 1 == 1 {
                    *tok = mask;
                    p *= masked;
                } else {
                    p *= survive;
                }
            }
            if p > 0.0 {
                let xt = Sequence::from_indices(
                    &tokens.iter().map(|t| t.0).collect::<Vec<_>>(),
                    &VocabSpec::new(model.base_size(), true)?,
                )?;
                *joint.entry((x0.clone(), xt)).or_insert(0.0) += p;
            }
        }
    }
    Ok(joint)
}

fn check_bayes_oracle(_cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let vocab = VocabSpec::new(2, false)?;
    let model = ToyDataModel::from_support(
        2,
        vec![
            (seq(&[0, 0], &vocab), 0.1),
            (seq(&[0, 1], &vocab), 0.2),
            (seq(&[1, 0], &vocab), 0.3),
            (seq(&[1, 1], &vocab), 0.4),
        ],
    )?;
    let noise = NoiseModel::absorbing(2)?;
    let schedule = build_linear(3)?;
    let mut worst: f64 = 0.0;
    let mut observations = 0;
    for t in 0..=3 {
        let joint = enumerate_absorbing_joint(&model, &schedule, t)?;
        let mut evidence: HashMap<&Sequence, f64> = HashMap::new();
        for ((_, xt), p) in &joint {
            *evidence.entry(xt).or_insert(0.0) += p;
        }
        for (xt, z) in &evidence {
            observations += 1;
            let post = exact_posterior(xt, Time::Step(t), &model, &schedule, &noise)?;
            for (x0, p) in model.support().iter().zip(post.probs()) {
                let want = joint
                    .get(&(x0.clone(), (*xt).clone()))
                    .copied()
                    .unwrap_or(0.0)
                    / z;
                worst = worst.max((p - want).abs());
            }
        }
    }
    c.at_least("reachable x_t checked", observations as f64, 1.0);
    c.at_most("max |posterior - enumerated conditional|", worst, 1e-9);
    Ok(())
}

fn check_multinomial_kernel(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let theta = multinomial_posterior(Token(0), Token(1), 0.5, 0.5, 2)?;
    // (0.75 · 0.25, 0.25 · 0.75) normalized
    c.at_most(
        "|θ_post - [0.5, 0.5]| (K=2 example)",
        (theta.probs()[0] - 0.5)
            .abs()
            .max((theta.probs()[1] - 0.5).abs()),
        1e-12,
    );
    let last = multinomial_posterior(Token(2), Token(0), 0.3, 1.0, 4)?;
    c.at_most(
        "1 - θ_post[x̂_0] at α_{t-1} = 1",
        1.0 - last.probs()[0],
        1e-12,
    );
    let noise = NoiseModel::uniform(5)?;
    let target = seq(&[4, 0, 3, 1], &noise.vocab());
    let teacher = teacher_denoiser(target.clone());
    let schedule = build_linear(20)?;
    let runs = (cfg.trials / 100).max(1);
    let misses = fold_trials(
        runs,
        cfg.parallelism,
        || 0u64,
        |acc, trial| {
            let mut rng = RngStream::for_trial(cfg.seed, trial);
            let trace = baseline_multinomial_sample(
                &teacher,
                &schedule,
                &noise,
                4,
                &SamplerConfig::default(),
                &mut rng,
            )
            .expect("sampler run");
            *acc += u64::from(trace.final_seq != target);
        },
        |acc, part| *acc += part,
    );
    c.at_most(
        format!("baseline-multi teacher runs missing x0 ({runs} runs)"),
        misses as f64,
        0.0,
    );
    Ok(())
}

fn check_nfe_trend(_cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    let n = 25;
    for steps in [25usize, 50, 1000] {
        let dist = beta_transition_distribution(3.0, 3.0, Some(steps))?;
        let report = expected_nfe(&dist, n)?;
        c.below(
            format!("E|T| vs T, T={steps}"),
            report.expected_nfe,
            steps as f64,
        );
        if steps == 1000 {
            c.at_most("E|T| vs N at T=1000", report.expected_nfe, n as f64);
            c.below(
                "E|T| vs T/20 at T=1000",
                report.expected_nfe,
                steps as f64 / 20.0,
            );
        }
    }
    Ok(())
}

fn check_determinism(cfg: &VerifyConfig, c: &mut Checker) -> Result<()> {
    static RUN: AtomicU64 = AtomicU64::new(0);
    let run = RUN.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("dndm-verify-{}-{run}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let model_path = dir.join("model.txt");
    std::fs::write(
        &model_path,
        "vocab 3 4 chain\n0.5 0.3 0.2\n0.1 0.6 0.3\n0.7 0.2 0.1\n0.25 0.25 0.5\n",
    )?;
    let model = model_path.to_string_lossy().into_owned();
    let seed = cfg.seed.to_string();
    let cases: [&[&str]; 4] = [
        &["--sampler", "dndm", "--steps", "50", "--schedule", "linear"],
        &[
            "--sampler",
            "dndm-topk",
            "--steps",
            "50",
            "--schedule",
            "cosine",
            "--tau",
            "beta:3,3",
        ],
        &[
            "--sampler",
            "baseline-absorb",
            "--steps",
            "20",
            "--schedule",
            "cosine2",
        ],
        &[
            "--sampler",
            "dndm-c",
            "--steps",
            "inf",
            "--schedule",
            "linear",
            "--tau",
            "beta:17,4",
        ],
    ];
    let mut differing = 0u32;
    for (i, case) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for parallelism in ["1", "8", "1"] {
            let prefix = dir.join(format!("case{i}-p{parallelism}-{}", outputs.len()));
            let prefix_s = prefix.to_string_lossy().into_owned();
            let mut argv: Vec<&str> = vec!["dndm", "sample"];
            argv.extend_from_slice(case);
            argv.extend_from_slice(&[
                "--model",
                &model,
                "--runs",
                "64",
                "--seed",
                &seed,
                "--parallelism",
                parallelism,
                "--out",
                &prefix_s,
            ]);
            let mut stdout = Vec::new();
            let mut stderr = Vec::new();
            let code = crate::cli::parse_and_dispatch(argv, &mut stdout, &mut stderr);
            if code != 0 {
                return Err(Error::arg(format!(
                    "sample exited {code}: {}",
                    String::from_utf8_lossy(&stderr)
                )));
            }
            let csv = std::fs::read_to_string(format!("{prefix_s}.csv"))?;
            let jsonl = std::fs::read_to_string(format!("{prefix_s}.jsonl"))?;
            outputs
                .push(crate::cli::normalize_timings(&csv) + &crate::cli::normalize_timings(&jsonl));
        }
        differing += u32::from(outputs.windows(2).any(|w| w[0] != w[1]));
    }
    let _ = std::fs::remove_dir_all(&dir);
    c.at_most(
        "sample configurations with differing output across runs and parallelism 1/8",
        f64::from(differing),
        0.0,
    );
    Ok(())
}
