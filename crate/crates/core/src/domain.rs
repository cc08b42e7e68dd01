//! Tokens, sequences, noise models, categorical distributions and seeded
//! random streams shared by every other module.
//!
//! Tokens are plain indices. When a vocabulary carries an absorbing state it
//! sits at index `K`, one past the last real category, so distributions over
//! the base vocabulary are never touched by it.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when checking that probabilities sum to one.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VocabSpec {
    base_size: usize,
    has_absorbing: bool,
}

impl VocabSpec {
    pub fn new(base_size: usize, has_absorbing: bool) -> Result<Self> {
        if base_size < 2 {
            return Err(Error::arg(format!(
                "vocabulary needs at least 2 categories, got {base_size}"
            )));
        }
        if base_size >= u32::MAX as usize {
            return Err(Error::arg("vocabulary too large"));
        }
        Ok(Self {
            base_size,
            has_absorbing,
        })
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn has_absorbing(&self) -> bool {
        self.has_absorbing
    }

    /// `K` without an absorbing state, `K + 1` with one.
    pub fn total_states(&self) -> usize {
        self.base_size + usize::from(self.has_absorbing)
    }

    pub fn mask(&self) -> Option<Token> {
        self.has_absorbing.then_some(Token(self.base_size as u32))
    }

    pub fn is_mask(&self, token: Token) -> bool {
        self.has_absorbing && token.index() == self.base_size
    }

    pub fn contains(&self, token: Token) -> bool {
        token.index() < self.total_states()
    }

    pub fn is_base(&self, token: Token) -> bool {
        token.index() < self.base_size
    }
}

/// A fixed-length token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(Vec<Token>);

impl Sequence {
    pub fn new(tokens: Vec<Token>, vocab: &VocabSpec) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::arg("sequence must contain at least one token"));
        }
        if let Some(bad) = tokens.iter().find(|t| !vocab.contains(**t)) {
            return Err(Error::arg(format!(
                "token {bad} outside a vocabulary of {} states",
                vocab.total_states()
            )));
        }
        Ok(Self(tokens))
    }

    pub fn from_indices(indices: &[u32], vocab: &VocabSpec) -> Result<Self> {
        Self::new(indices.iter().map(|&i| Token(i)).collect(), vocab)
    }

    /// Builds a sequence without validation. Callers guarantee every token is
    /// valid for the vocabulary in use.
    pub(crate) fn from_tokens_unchecked(tokens: Vec<Token>) -> Self {
        Self(tokens)
    }

    pub fn filled(token: Token, len: usize) -> Self {
        Self(vec![token; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub(crate) fn tokens_mut(&mut self) -> &mut [Token] {
        &mut self.0
    }

    pub fn indices(&self) -> Vec<u32> {
        self.0.iter().map(|t| t.0).collect()
    }

    pub fn contains_mask(&self, vocab: &VocabSpec) -> bool {
        self.0.iter().any(|&t| vocab.is_mask(t))
    }
}

impl std::ops::Index<usize> for Sequence {
    type Output = Token;

    fn index(&self, i: usize) -> &Token {
        &self.0[i]
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights have non-positive or non-finite total {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn point_mass(states: usize, index: usize) -> Self {
        let mut probs = vec![0.0; states];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn uniform(states: usize) -> Self {
        Self {
            probs: vec![1.0 / states as f64; states],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, token: Token) -> f64 {
        self.probs.get(token.index()).copied().unwrap_or(0.0)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Token {
        Token(sample_index(&self.probs, rng) as u32)
    }

    /// Index of the most probable state; ties go to the lowest index.
    pub fn argmax(&self) -> Token {
        Token(argmax(&self.probs) as u32)
    }
}

/// Draws an index from a probability vector that the caller has already
/// validated.
pub(crate) fn sample_index(probs: &[f64], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u just above the cumulative total
    last_positive
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical(dist: &CategoricalDist, rng: &mut RngStream) -> Token {
    dist.sample(rng)
}

pub fn sample_bernoulli(p: f64, rng: &mut RngStream) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!(
            "Bernoulli probability {p} outside [0, 1]"
        )));
    }
    Ok(rng.uniform() < p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    UniformMultinomial,
    Absorbing,
}

/// The stationary noise distribution the forward process mixes towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseModel {
    kind: NoiseKind,
    vocab: VocabSpec,
}

impl NoiseModel {
    /// Uniform over the `k` base categories.
    pub fn uniform(k: usize) -> Result<Self> {
        Ok(Self {
            kind: NoiseKind::UniformMultinomial,
            vocab: VocabSpec::new(k, false)?,
        })
    }

    /// Point mass on a mask state appended at index `k`.
    pub fn absorbing(k: usize) -> Result<Self> {
        Ok(Self {
            kind: NoiseKind::Absorbing,
            vocab: VocabSpec::new(k, true)?,
        })
    }

    pub fn new(kind: NoiseKind, k: usize) -> Result<Self> {
        match kind {
            NoiseKind::UniformMultinomial => Self::uniform(k),
            NoiseKind::Absorbing => Self::absorbing(k),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn vocab(&self) -> VocabSpec {
        self.vocab
    }

    pub fn base_size(&self) -> usize {
        self.vocab.base_size()
    }

    pub fn mask(&self) -> Option<Token> {
        self.vocab.mask()
    }

    pub fn prob(&self, token: Token) -> f64 {
        match self.kind {
            NoiseKind::UniformMultinomial if self.vocab.is_base(token) => {
                1.0 / self.vocab.base_size() as f64
            }
            NoiseKind::Absorbing if self.vocab.is_mask(token) => 1.0,
            _ => 0.0,
        }
    }

    pub fn dist(&self) -> CategoricalDist {
        match self.kind {
            NoiseKind::UniformMultinomial => CategoricalDist::uniform(self.vocab.base_size()),
            NoiseKind::Absorbing => {
                CategoricalDist::point_mass(self.vocab.total_states(), self.vocab.base_size())
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Token {
        match self.kind {
            NoiseKind::UniformMultinomial => {
                Token(rng.random_range(0..self.vocab.base_size() as u32))
            }
            NoiseKind::Absorbing => Token(self.vocab.base_size() as u32),
        }
    }

    pub fn sample_sequence(&self, len: usize, rng: &mut RngStream) -> Sequence {
        Sequence((0..len).map(|_| self.sample(rng)).collect())
    }
}

/// Seeded, replayable random stream.
///
/// Streams are ChaCha8 keyed by `seed` with the 64-bit stream selector set to
/// `stream_id`. Per-trial and per-position substreams use
/// `stream_id = trial * 2^32 + position`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn for_trial(seed: u64, trial: u64) -> Self {
        Self::for_position(seed, trial, 0)
    }

    pub fn for_position(seed: u64, trial: u64, position: u32) -> Self {
        Self::new(seed, substream_id(trial, position))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

pub fn substream_id(trial: u64, position: u32) -> u64 {
    (trial << 32) | u64::from(position)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
