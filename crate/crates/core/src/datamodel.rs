//! Enumerable toy data distributions and exact Bayes-posterior denoisers.
//!
//! Every model is expanded into an explicit support of at most
//! [`MAX_SUPPORT`] sequences. The posterior over that support given a noisy
//! `x_t` is
//!
//! ```text
//! q(x_0 | x_t) ∝ q_data(x_0) · Π_n [α_t 1(x_t[n] = x_0[n]) + (1 - α_t) q_noise(x_t[n])]
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{
    argmax, sample_index, NoiseModel, RngStream, Sequence, Token, VocabSpec, PROB_TOL,
};
use crate::error::{Error, Result};
use crate::schedule::{AlphaSchedule, Time};

pub const MAX_SUPPORT: usize = 4096;

/// Upper bound on `K^N` for factorized and chain models before enumeration.
const MAX_ENUMERATION: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum DataForm {
    Support,
    Factorized(Vec<Vec<f64>>),
    Chain {
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
}

impl DataForm {
    pub fn name(&self) -> &'static str {
        match self {
            DataForm::Support => "support",
            DataForm::Factorized(_) => "factorized",
            DataForm::Chain { .. } => "chain",
        }
    }
}

/// A data distribution `q_data` over length-`N` sequences of `K` categories.
#[derive(Debug, Clone)]
pub struct ToyDataModel {
    vocab: VocabSpec,
    len: usize,
    form: DataForm,
    support: Vec<Sequence>,
    weights: Vec<f64>,
    index: HashMap<Sequence, usize>,
}

fn check_probs(probs: &[f64], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidModel(format!(
            "{what}: invalid probability {p}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!(
            "{what}: probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl ToyDataModel {
    /// Explicit list of sequences with positive weights summing to 1.
    pub fn from_support(k: usize, entries: Vec<(Sequence, f64)>) -> Result<Self> {
        let vocab = VocabSpec::new(k, false)?;
        let len = entries
            .first()
            .map(|(s, _)| s.len())
            .ok_or_else(|| Error::InvalidModel("support is empty".into()))?;
        if entries.len() > MAX_SUPPORT {
            return Err(Error::InvalidModel(format!(
                "support has {} sequences, more than {MAX_SUPPORT}",
                entries.len()
            )));
        }
        for (s, w) in &entries {
            if s.len() != len {
                return Err(Error::InvalidModel(
                    "support sequences differ in length".into(),
                ));
            }
            if s.tokens().iter().any(|t| !vocab.is_base(*t)) {
                return Err(Error::InvalidModel(format!(
                    "sequence `{s}` uses tokens outside 0..{k}"
                )));
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "weight {w} for `{s}` is not positive"
                )));
            }
        }
        let weights: Vec<f64> = entries.iter().map(|(_, w)| *w).collect();
        check_probs(&weights, "support weights")?;
        Self::assemble(vocab, len, DataForm::Support, entries)
    }

    /// Independent positions with the given per-position distributions.
    pub fn factorized(k: usize, positions: Vec<Vec<f64>>) -> Result<Self> {
        let vocab = VocabSpec::new(k, false)?;
        if positions.is_empty() {
            return Err(Error::InvalidModel("factorized model needs N >= 1".into()));
        }
        for (n, p) in positions.iter().enumerate() {
            if p.len() != k {
                return Err(Error::InvalidModel(format!(
                    "position {n} has {} probabilities, expected {k}",
                    p.len()
                )));
            }
            check_probs(p, &format!("position {n}"))?;
        }
        let len = positions.len();
        let entries = enumerate(k, len, |seq| {
            seq.iter()
                .enumerate()
                .map(|(n, &x)| positions[n][x])
                .product()
        })?;
        Self::assemble(vocab, len, DataForm::Factorized(positions), entries)
    }

    /// First-order Markov chain over positions.
    pub fn chain(
        k: usize,
        len: usize,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let vocab = VocabSpec::new(k, false)?;
        if len == 0 {
            return Err(Error::InvalidModel("chain model needs N >= 1".into()));
        }
        if initial.len() != k || transition.len() != k || transition.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidModel(format!(
                "chain model needs {k} initial probabilities and a {k}x{k} table"
            )));
        }
        check_probs(&initial, "initial distribution")?;
        for (i, row) in transition.iter().enumerate() {
            check_probs(row, &format!("transition row {i}"))?;
        }
        let entries = enumerate(k, len, |seq| {
            let mut p = initial[seq[0]];
            for w in seq.windows(2) {
                p *= transition[w[0]][w[1]];
            }
            p
        })?;
        Self::assemble(
            vocab,
            len,
            DataForm::Chain {
                initial,
                transition,
            },
            entries,
        )
    }

    fn assemble(
        vocab: VocabSpec,
        len: usize,
        form: DataForm,
        entries: Vec<(Sequence, f64)>,
    ) -> Result<Self> {
        if entries.len() > MAX_SUPPORT {
            return Err(Error::InvalidModel(format!(
                "support has {} sequences, more than {MAX_SUPPORT}",
                entries.len()
            )));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (s, _)) in entries.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("sequence `{s}` listed twice")));
            }
        }
        let (support, weights) = entries.into_iter().unzip();
        Ok(Self {
            vocab,
            len,
            form,
            support,
            weights,
            index,
        })
    }

    /// Every sequence has probability 1.
    pub fn point_mass(k: usize, seq: Sequence) -> Result<Self> {
        Self::from_support(k, vec![(seq, 1.0)])
    }

    pub fn vocab(&self) -> VocabSpec {
        self.vocab
    }

    pub fn base_size(&self) -> usize {
        self.vocab.base_size()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn form(&self) -> &DataForm {
        &self.form
    }

    pub fn support(&self) -> &[Sequence] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, seq: &Sequence) -> Option<usize> {
        self.index.get(seq).copied()
    }

    pub fn probability(&self, seq: &Sequence) -> f64 {
        self.index_of(seq).map_or(0.0, |i| self.weights[i])
    }

    pub fn sample(&self, rng: &mut RngStream) -> Sequence {
        self.support[sample_index(&self.weights, rng)].clone()
    }

    /// Serializes into the line-oriented model file format.
    pub fn to_text(&self) -> String {
        let k = self.base_size();
        let mut out = format!("vocab {k} {} {}\n", self.len, self.form.name());
        let row = |v: &[f64]| {
            v.iter()
                .map(|p| format!("{p}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match &self.form {
            DataForm::Support => {
                for (s, w) in self.support.iter().zip(&self.weights) {
                    let _ = writeln!(out, "{w} {s}");
                }
            }
            DataForm::Factorized(positions) => {
                for p in positions {
                    let _ = writeln!(out, "{}", row(p));
                }
            }
            DataForm::Chain {
                initial,
                transition,
            } => {
                let _ = writeln!(out, "{}", row(initial));
                for r in transition {
                    let _ = writeln!(out, "{}", row(r));
                }
            }
        }
        out
    }
}

fn enumerate(k: usize, len: usize, prob: impl Fn(&[usize]) -> f64) -> Result<Vec<(Sequence, f64)>> {
    let total = (0..len)
        .try_fold(1usize, |acc, _| acc.checked_mul(k))
        .filter(|&n| n <= MAX_ENUMERATION);
    let total = total.ok_or_else(|| {
        Error::InvalidModel(format!("{k}^{len} sequences is too many to enumerate"))
    })?;
    let mut digits = vec![0usize; len];
    let mut out = Vec::new();
    for _ in 0..total {
        let p = prob(&digits);
        if p > 0.0 {
            let tokens = digits.iter().map(|&d| Token(d as u32)).collect();
            out.push((Sequence::from_tokens_unchecked(tokens), p));
        }
        // odometer with the last position varying fastest
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < k {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}

/// Parses the model file format:
///
/// ```text
/// vocab K N kind        # kind ∈ {support, factorized, chain}
/// weight tok tok ...    # support: one line per sequence
/// p_0 ... p_{K-1}       # factorized: N lines
/// p_0 ... p_{K-1}       # chain: initial line, then K transition rows
/// ```
///
/// Blank lines and text after `#` are ignored.
pub fn parse_data_model(text: &str) -> Result<ToyDataModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty model file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        line: hline,
        message: "expected `vocab K N kind`".into(),
    };
    if fields.len() != 4 || fields[0] != "vocab" {
        return Err(bad_header());
    }
    let k: usize = fields[1].parse().map_err(|_| bad_header())?;
    let n: usize = fields[2].parse().map_err(|_| bad_header())?;
    let numbers = |line: usize, l: &str| -> Result<Vec<f64>> {
        l.split_whitespace()
            .map(|x| {
                x.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{x}` is not a number"),
                })
            })
            .collect()
    };
    let rows: Vec<(usize, Vec<f64>)> = lines
        .map(|(i, l)| numbers(i, l).map(|v| (i, v)))
        .collect::<Result<_>>()?;
    let expect_rows = |want: usize| -> Result<()> {
        if rows.len() != want {
            let line = rows.last().map_or(hline, |r| r.0);
            return Err(Error::Parse {
                line,
                message: format!("expected {want} data lines, found {}", rows.len()),
            });
        }
        Ok(())
    };
    let expect_width = |(line, row): &(usize, Vec<f64>), want: usize| -> Result<()> {
        if row.len() != want {
            return Err(Error::Parse {
                line: *line,
                message: format!("expected {want} values, found {}", row.len()),
            });
        }
        Ok(())
    };
    let vocab = VocabSpec::new(k, false)?;
    match fields[3] {
        "support" => {
            let mut entries = Vec::with_capacity(rows.len());
            for row in &rows {
                expect_width(row, n + 1)?;
                let toks = row.1[1..]
                    .iter()
                    .map(|&x| {
                        if x.fract() != 0.0 || x < 0.0 {
                            Err(Error::Parse {
                                line: row.0,
                                message: format!("token `{x}` is not an index"),
                            })
                        } else {
                            Ok(x as u32)
                        }
                    })
                    .collect::<Result<Vec<u32>>>()?;
                entries.push((Sequence::from_indices(&toks, &vocab)?, row.1[0]));
            }
            ToyDataModel::from_support(k, entries)
        }
        "factorized" => {
            expect_rows(n)?;
            for row in &rows {
                expect_width(row, k)?;
            }
            ToyDataModel::factorized(k, rows.into_iter().map(|r| r.1).collect())
        }
        "chain" => {
            expect_rows(k + 1)?;
            for row in &rows {
                expect_width(row, k)?;
            }
            let mut it = rows.into_iter().map(|r| r.1);
            let initial = it.next().expect("row count checked");
            ToyDataModel::chain(k, n, initial, it.collect())
        }
        other => Err(Error::Parse {
            line: hline,
            message: format!("unknown model kind `{other}`"),
        }),
    }
}

pub fn load_data_model(path: impl AsRef<Path>) -> Result<ToyDataModel> {
    parse_data_model(&std::fs::read_to_string(path)?)
}

/// Posterior weights over a model's support.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    /// Probabilities aligned with [`ToyDataModel::support`].
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Per-position marginals, `N` rows of `K` probabilities.
    pub fn marginals(&self, model: &ToyDataModel) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; model.base_size()]; model.len()];
        for (seq, p) in model.support().iter().zip(&self.probs) {
            for (n, t) in seq.tokens().iter().enumerate() {
                out[n][t.index()] += p;
            }
        }
        out
    }
}

/// Exact `q(x_0 | x_t)` for a noisy sequence observed at `time`.
pub fn exact_posterior(
    xt: &Sequence,
    time: Time,
    model: &ToyDataModel,
    schedule: &AlphaSchedule,
    noise: &NoiseModel,
) -> Result<Posterior> {
    let k = model.base_size();
    if noise.base_size() != k {
        return Err(Error::arg(format!(
            "noise has {} categories, model has {k}",
            noise.base_size()
        )));
    }
    if xt.len() != model.len() {
        return Err(Error::arg(format!(
            "x_t has length {}, model has {}",
            xt.len(),
            model.len()
        )));
    }
    let vocab = noise.vocab();
    if let Some(t) = xt.tokens().iter().find(|t| !vocab.contains(**t)) {
        return Err(Error::arg(format!(
            "x_t token {t} outside the noisy state space"
        )));
    }
    let alpha = schedule.alpha(time)?;
    // Per-position likelihood over x_0[n], scaled so the largest entry is 1.
    // The scale cancels in normalization and keeps α_t ≈ 1 from underflowing.
    let mut likelihood = vec![vec![0.0; k]; xt.len()];
    for (n, &obs) in xt.tokens().iter().enumerate() {
        let from_noise = (1.0 - alpha) * noise.prob(obs);
        let row = &mut likelihood[n];
        for (x, l) in row.iter_mut().enumerate() {
            *l = from_noise + if obs.index() == x { alpha } else { 0.0 };
        }
        let max = row.iter().cloned().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::ImpossibleObservation(format!(
                "token {obs} at position {n} cannot occur at time {time}"
            )));
        }
        row.iter_mut().for_each(|l| *l /= max);
    }
    let mut probs: Vec<f64> = model
        .support()
        .iter()
        .zip(model.weights())
        .map(|(seq, w)| {
            seq.tokens()
                .iter()
                .enumerate()
                .fold(*w, |acc, (n, t)| acc * likelihood[n][t.index()])
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossibleObservation(format!(
            "x_t = `{xt}` has zero probability under the model"
        )));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Posterior { probs })
}

/// Output of one denoiser call.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x0: Sequence,
    /// Confidence per position, used to rank positions in top-k decoding.
    pub scores: Vec<f64>,
}

/// An `x̂_0` predictor `p(x_0 | x_t)`.
pub trait Denoiser: Sync {
    fn predict(&self, xt: &Sequence, time: Time, rng: &mut RngStream) -> Result<Prediction>;

    /// Whether positions are decoded independently from per-position marginals.
    fn factorized(&self) -> bool {
        true
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict(&self, xt: &Sequence, time: Time, rng: &mut RngStream) -> Result<Prediction> {
        (**self).predict(xt, time, rng)
    }

    fn factorized(&self) -> bool {
        (**self).factorized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Sample,
    Argmax,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(DecodeMode::Sample),
            "argmax" => Ok(DecodeMode::Argmax),
            other => Err(Error::arg(format!("unknown decode mode `{other}`"))),
        }
    }
}

/// Denoiser backed by [`exact_posterior`].
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    model: ToyDataModel,
    schedule: AlphaSchedule,
    noise: NoiseModel,
    joint: bool,
    decode: DecodeMode,
}

impl OracleDenoiser {
    pub fn with_decode(mut self, decode: DecodeMode) -> Self {
        self.decode = decode;
        self
    }

    pub fn model(&self) -> &ToyDataModel {
        &self.model
    }

    pub fn is_joint(&self) -> bool {
        self.joint
    }

    pub fn posterior(&self, xt: &Sequence, time: Time) -> Result<Posterior> {
        exact_posterior(xt, time, &self.model, &self.schedule, &self.noise)
    }
}

/// `joint = true` draws `x̂_0` as a whole sequence from the posterior;
/// `joint = false` draws each position from its posterior marginal.
pub fn oracle_denoiser(
    model: ToyDataModel,
    schedule: AlphaSchedule,
    noise: NoiseModel,
    joint: bool,
) -> Result<OracleDenoiser> {
    if noise.base_size() != model.base_size() {
        return Err(Error::arg(format!(
            "noise has {} categories, model has {}",
            noise.base_size(),
            model.base_size()
        )));
    }
    Ok(OracleDenoiser {
        model,
        schedule,
        noise,
        joint,
        decode: DecodeMode::Sample,
    })
}

impl Denoiser for OracleDenoiser {
    fn predict(&self, xt: &Sequence, time: Time, rng: &mut RngStream) -> Result<Prediction> {
        let posterior = self.posterior(xt, time)?;
        let marginals = posterior.marginals(&self.model);
        let scores = marginals
            .iter()
            .map(|m| m.iter().cloned().fold(0.0, f64::max))
            .collect();
        let x0 = match (self.joint, self.decode) {
            (true, DecodeMode::Sample) => {
                self.model.support()[sample_index(posterior.probs(), rng)].clone()
            }
            (true, DecodeMode::Argmax) => self.model.support()[argmax(posterior.probs())].clone(),
            (false, decode) => {
                let tokens = marginals
                    .iter()
                    .map(|m| match decode {
                        DecodeMode::Sample => Token(sample_index(m, rng) as u32),
                        DecodeMode::Argmax => Token(argmax(m) as u32),
                    })
                    .collect();
                Sequence::from_tokens_unchecked(tokens)
            }
        };
        Ok(Prediction { x0, scores })
    }

    fn factorized(&self) -> bool {
        !self.joint
    }
}

/// Always predicts the same sequence with full confidence.
#[derive(Debug, Clone)]
pub struct TeacherDenoiser {
    x0: Sequence,
}

pub fn teacher_denoiser(x0_true: Sequence) -> TeacherDenoiser {
    TeacherDenoiser { x0: x0_true }
}

impl Denoiser for TeacherDenoiser {
    fn predict(&self, xt: &Sequence, _time: Time, _rng: &mut RngStream) -> Result<Prediction> {
        if xt.len() != self.x0.len() {
            return Err(Error::arg("x_t length differs from the teacher sequence"));
        }
        Ok(Prediction {
            x0: self.x0.clone(),
            scores: vec![1.0; self.x0.len()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::build_linear;

    fn seq(ix: &[u32], k: usize, mask: bool) -> Sequence {
        Sequence::from_indices(ix, &VocabSpec::new(k, mask).unwrap()).unwrap()
    }

    fn coupled_model() -> ToyDataModel {
        ToyDataModel::from_support(
            3,
            vec![
                (seq(&[0, 1], 3, false), 0.5),
                (seq(&[2, 2], 3, false), 0.3),
                (seq(&[1, 0], 3, false), 0.2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn posterior_at_full_noise_is_prior() {
        let m = coupled_model();
        let s = build_linear(4).unwrap();
        for noise in [
            NoiseModel::uniform(3).unwrap(),
            NoiseModel::absorbing(3).unwrap(),
        ] {
            let xt = noise.sample_sequence(2, &mut RngStream::new(0, 0));
            let p = exact_posterior(&xt, Time::Step(4), &m, &s, &noise).unwrap();
            for (a, b) in p.probs().iter().zip(m.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn posterior_without_noise_is_point_mass() {
        let m = coupled_model();
        let s = build_linear(4).unwrap();
        let noise = NoiseModel::uniform(3).unwrap();
        let xt = seq(&[2, 2], 3, false);
        let p = exact_posterior(&xt, Time::Step(0), &m, &s, &noise).unwrap();
        assert_eq!(p.probs(), &[0.0, 1.0, 0.0]);
        // outside the support at α = 1 is impossible
        let err = exact_posterior(&seq(&[0, 0], 3, false), Time::Step(0), &m, &s, &noise);
        assert!(matches!(err, Err(Error::ImpossibleObservation(_))));
    }

    #[test]
    fn absorbing_posterior_respects_unmasked_tokens() {
        let m =
            ToyDataModel::factorized(3, vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap();
        let s = build_linear(5).unwrap();
        let noise = NoiseModel::absorbing(3).unwrap();
        for t in 0..=5 {
            for obs in 0..3u32 {
                let xt = seq(&[obs, 3], 3, true);
                match exact_posterior(&xt, Time::Step(t), &m, &s, &noise) {
                    Ok(p) => {
                        for (x0, w) in m.support().iter().zip(p.probs()) {
                            if *w > 0.0 {
                                assert_eq!(x0[0], Token(obs));
                            }
                        }
                    }
                    // α_t = 0 forbids unmasked tokens, α_t = 1 forbids masks
                    Err(Error::ImpossibleObservation(_)) => assert!(t == 0 || t == 5),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn joint_and_marginal_views_agree() {
        let m = ToyDataModel::chain(
            3,
            3,
            vec![0.5, 0.25, 0.25],
            vec![
                vec![0.1, 0.8, 0.1],
                vec![0.3, 0.3, 0.4],
                vec![0.6, 0.2, 0.2],
            ],
        )
        .unwrap();
        let s = build_linear(6).unwrap();
        let noise = NoiseModel::uniform(3).unwrap();
        let xt = seq(&[1, 2, 0], 3, false);
        let p = exact_posterior(&xt, Time::Step(3), &m, &s, &noise).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let marg = p.marginals(&m);
        for (n, row) in marg.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                let direct: f64 = m
                    .support()
                    .iter()
                    .zip(p.probs())
                    .filter(|(s, _)| s[n].index() == x)
                    .map(|(_, w)| w)
                    .sum();
                assert!((v - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_scores_and_point_mass() {
        let target = seq(&[1, 0, 2], 3, false);
        let m = ToyDataModel::point_mass(3, target.clone()).unwrap();
        let noise = NoiseModel::absorbing(3).unwrap();
        let d = oracle_denoiser(m, build_linear(4).unwrap(), noise, false).unwrap();
        let mut rng = RngStream::new(1, 1);
        let xt = seq(&[3, 3, 3], 3, true);
        let pred = d.predict(&xt, Time::Step(4), &mut rng).unwrap();
        assert_eq!(pred.x0, target);

        let m = coupled_model();
        let d = oracle_denoiser(m, build_linear(4).unwrap(), noise, true).unwrap();
        let pred = d
            .predict(&seq(&[3, 1], 3, true), Time::Step(2), &mut rng)
            .unwrap();
        assert_eq!(pred.scores[1], 1.0);
        assert!(pred.x0.tokens().iter().all(|t| t.index() < 3));
    }

    #[test]
    fn argmax_decoding_is_deterministic() {
        let m = coupled_model();
        let noise = NoiseModel::absorbing(3).unwrap();
        let d = oracle_denoiser(m, build_linear(4).unwrap(), noise, true)
            .unwrap()
            .with_decode(DecodeMode::Argmax);
        let xt = seq(&[3, 3], 3, true);
        for s in 0..20 {
            let pred = d
                .predict(&xt, Time::Step(4), &mut RngStream::new(s, 0))
                .unwrap();
            assert_eq!(pred.x0, seq(&[0, 1], 3, false));
        }
    }

    #[test]
    fn teacher_returns_its_sequence() {
        let x = seq(&[1, 1, 0], 2, false);
        let t = teacher_denoiser(x.clone());
        let pred = t
            .predict(
                &seq(&[2, 0, 2], 2, true),
                Time::Step(3),
                &mut RngStream::new(0, 0),
            )
            .unwrap();
        assert_eq!(pred.x0, x);
        assert_eq!(pred.scores, vec![1.0; 3]);
    }

    #[test]
    fn parse_forms() {
        let m = parse_data_model("vocab 2 2 support\n0.5 0 1\n0.5 1 0\n").unwrap();
        assert_eq!(m.support().len(), 2);
        assert!(matches!(
            parse_data_model("vocab 2 2 support\n0.5 0 1\n0.4 1 0\n"),
            Err(Error::InvalidModel(_))
        ));
        assert!(parse_data_model("vocab 2 1 chain\n0.5 0.5\n0.5 0.6\n0.5 0.5\n").is_err());
        let m = parse_data_model("# comment\nvocab 3 2 factorized\n0.2 0.3 0.5\n1 0 0 # first\n")
            .unwrap();
        assert_eq!(m.support().len(), 3);
        assert!(matches!(
            parse_data_model("vocab 2 2 support\n0.5 0 x\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_data_model("vocab 2 2 other\n").is_err());
        assert!(parse_data_model("").is_err());
        assert!(parse_data_model("vocab 2 13 factorized\n").is_err());
    }

    #[test]
    fn support_bound_is_enforced() {
        let rows = vec![vec![0.5, 0.5]; 13];
        assert!(matches!(
            ToyDataModel::factorized(2, rows),
            Err(Error::InvalidModel(_))
        ));
        let rows = vec![vec![0.5, 0.5]; 12];
        assert_eq!(
            ToyDataModel::factorized(2, rows).unwrap().support().len(),
            4096
        );
    }

    #[test]
    fn text_round_trip() {
        let chain =
            ToyDataModel::chain(2, 3, vec![0.25, 0.75], vec![vec![0.5, 0.5], vec![0.1, 0.9]])
                .unwrap();
        for m in [coupled_model(), chain] {
            let back = parse_data_model(&m.to_text()).unwrap();
            assert_eq!(back.support(), m.support());
            for (a, b) in back.weights().iter().zip(m.weights()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
