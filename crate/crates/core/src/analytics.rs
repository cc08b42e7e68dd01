//! Closed-form NFE predictions and the distance and goodness-of-fit
//! statistics used to tie Monte Carlo runs back to them.
//!
//! For i.i.d. transition times with pmf `p_1..p_T`, the expected number of
//! distinct times among `N` draws is
//!
//! ```text
//! E|T| = Σ_i [1 - (1 - p_i)^N] = (1 - C) T,   C = Σ_i (1 - p_i)^N / T ≥ (1 - 1/T)^N
//! ```
//!
//! with equality in the bound exactly for the uniform pmf.

use serde::Serialize;
use statrs::function::gamma::gamma_ur;

use crate::batch::fold_trials;
use crate::domain::{RngStream, PROB_TOL};
use crate::error::{Error, Result};
use crate::schedule::{sample_transition_set, TransitionTimeDistribution};

/// Minimum expected count per chi-square bin after pooling.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NfeReport {
    pub steps: usize,
    pub n: usize,
    pub expected_nfe: f64,
    pub c_constant: f64,
    pub empirical_mean: Option<f64>,
    pub empirical_stddev: Option<f64>,
    pub n_trials: u64,
}

impl NfeReport {
    /// Standard error of the Monte Carlo mean.
    pub fn stderr(&self) -> Option<f64> {
        match (self.empirical_stddev, self.n_trials) {
            (Some(sd), n) if n > 0 => Some(sd / (n as f64).sqrt()),
            _ => None,
        }
    }

    /// Attaches Monte Carlo estimates of `E|T|` from `trials` transition sets.
    pub fn with_monte_carlo(
        mut self,
        dist: &TransitionTimeDistribution,
        trials: u64,
        seed: u64,
        parallelism: usize,
    ) -> Result<Self> {
        let (mean, sd) = monte_carlo_nfe(dist, self.n, trials, seed, parallelism)?;
        self.empirical_mean = Some(mean);
        self.empirical_stddev = Some(sd);
        self.n_trials = trials;
        Ok(self)
    }
}

/// Exact `E|T|` and `C` for a discrete transition law.
pub fn expected_nfe(dist: &TransitionTimeDistribution, n: usize) -> Result<NfeReport> {
    let pmf = dist.pmf().ok_or_else(|| {
        Error::arg("expected NFE is only defined for discrete laws; continuous times are a.s. distinct (NFE = N)")
    })?;
    if n == 0 {
        return Err(Error::arg("N must be at least 1"));
    }
    let n_exp = i32::try_from(n).map_err(|_| Error::arg("N too large"))?;
    let steps = pmf.steps();
    let missing: f64 = pmf.probs().iter().map(|p| (1.0 - p).powi(n_exp)).sum();
    let expected: f64 = pmf
        .probs()
        .iter()
        .map(|p| 1.0 - (1.0 - p).powi(n_exp))
        .sum();
    Ok(NfeReport {
        steps,
        n,
        expected_nfe: expected,
        c_constant: missing / steps as f64,
        empirical_mean: None,
        empirical_stddev: None,
        n_trials: 0,
    })
}

/// `(1 - 1/T)^N`, the smallest possible `C` for `T` steps and `N` tokens.
pub fn nfe_lower_bound_uniform(steps: usize, n: usize) -> f64 {
    (1.0 - 1.0 / steps as f64).powf(n as f64)
}

/// Mean and sample standard deviation of `|T|` over `trials` draws. Trial
/// `i` uses the random stream `(seed, i << 32)`.
pub fn monte_carlo_nfe(
    dist: &TransitionTimeDistribution,
    n: usize,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    if n == 0 {
        return Err(Error::arg("N must be at least 1"));
    }
    let (sum, sum_sq) = fold_trials(
        trials,
        parallelism,
        || (0u64, 0u64),
        |acc, trial| {
            let mut rng = RngStream::for_trial(seed, trial);
            let k = sample_transition_set(dist, n, &mut rng)
                .expect("validated inputs")
                .distinct_count() as u64;
            acc.0 += k;
            acc.1 += k * k;
        },
        |acc, part| {
            acc.0 += part.0;
            acc.1 += part.1;
        },
    );
    let m = trials as f64;
    let mean = sum as f64 / m;
    let var = if trials > 1 {
        ((sum_sq as f64 - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, var.sqrt()))
}

/// `½ Σ |a_i - b_i|`.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "support sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Normalizes a histogram.
pub fn empirical(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub passed: bool,
}

/// Pearson chi-square test of `counts` against `expected`.
///
/// Adjacent bins are pooled until each holds an expected count of at least
/// [`MIN_EXPECTED_COUNT`]; a short tail joins the last pooled bin. Counts in
/// zero-probability bins reject outright.
pub fn chi_square_gof(counts: &[u64], expected: &[f64], significance: f64) -> Result<GofResult> {
    if counts.len() != expected.len() {
        return Err(Error::arg(format!(
            "{} counts for {} expected bins",
            counts.len(),
            expected.len()
        )));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::arg(format!(
            "significance {significance} outside (0, 1)"
        )));
    }
    if let Some(p) = expected.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "expected probability {p}"
        )));
    }
    let mass: f64 = expected.iter().sum();
    if (mass - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!(
            "expected probabilities sum to {mass}"
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::arg("all counts are zero"));
    }
    if counts
        .iter()
        .zip(expected)
        .any(|(&c, &p)| c > 0 && p == 0.0)
    {
        return Ok(GofResult {
            statistic: f64::INFINITY,
            p_value: 0.0,
            dof: 0,
            passed: false,
        });
    }
    let n = total as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(expected) {
        obs += c as f64;
        exp += p * n;
        if exp >= MIN_EXPECTED_COUNT {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => pooled.push((obs, exp)),
        }
    }
    let dof = pooled.len().saturating_sub(1);
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let p_value = if dof == 0 || statistic <= 0.0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
    };
    Ok(GofResult {
        statistic,
        p_value,
        dof,
        passed: p_value >= significance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{beta_transition_distribution, DiscretePmf};

    fn pmf(p: Vec<f64>) -> TransitionTimeDistribution {
        TransitionTimeDistribution::DiscretePmf(DiscretePmf::new(p).unwrap())
    }

    /// E|T| by enumerating every assignment of N transition times.
    fn enumerate_expected(p: &[f64], n: usize) -> f64 {
        let t = p.len();
        let mut total = 0.0;
        let mut digits = vec![0usize; n];
        for _ in 0..t.pow(n as u32) {
            let w: f64 = digits.iter().map(|&d| p[d]).product();
            let mut seen = digits.clone();
            seen.sort_unstable();
            seen.dedup();
            total += w * seen.len() as f64;
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

    #[test]
    fn uniform_four_by_four() {
        let r = expected_nfe(&pmf(vec![0.25; 4]), 4).unwrap();
        assert!((r.c_constant - 0.31640625).abs() < 1e-15);
        assert!((r.expected_nfe - 2.734375).abs() < 1e-12);
        assert!(r.expected_nfe <= 0.7 * 4.0);
        assert!((nfe_lower_bound_uniform(4, 4) - 0.31640625).abs() < 1e-15);
    }

    #[test]
    fn formula_matches_enumeration() {
        let r = expected_nfe(&pmf(vec![0.25; 4]), 2).unwrap();
        assert!((r.expected_nfe - 1.75).abs() < 1e-12);
        assert!((enumerate_expected(&[0.25; 4], 2) - 1.75).abs() < 1e-12);
        for (p, n) in [
            (vec![0.7, 0.1, 0.1, 0.1], 3),
            (vec![0.2, 0.5, 0.3], 4),
            (vec![1.0], 2),
        ] {
            let r = expected_nfe(&pmf(p.clone()), n).unwrap();
            assert!((r.expected_nfe - enumerate_expected(&p, n)).abs() < 1e-12);
            assert!((r.expected_nfe - (1.0 - r.c_constant) * r.steps as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_token_needs_one_call() {
        let d = beta_transition_distribution(3.0, 3.0, Some(50)).unwrap();
        assert!((expected_nfe(&d, 1).unwrap().expected_nfe - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_pmf_has_larger_constant() {
        let r = expected_nfe(&pmf(vec![0.7, 0.1, 0.1, 0.1]), 4).unwrap();
        let want = (0.3f64.powi(4) + 3.0 * 0.9f64.powi(4)) / 4.0;
        assert!((r.c_constant - want).abs() < 1e-15);
        assert!(r.c_constant > nfe_lower_bound_uniform(4, 4));
        assert!(nfe_lower_bound_uniform(10, 400) < 1e-15);
    }

    #[test]
    fn continuous_laws_are_rejected() {
        let d = beta_transition_distribution(17.0, 4.0, None).unwrap();
        assert!(expected_nfe(&d, 3).is_err());
    }

    #[test]
    fn monte_carlo_tracks_formula() {
        let d = pmf(vec![0.25; 4]);
        let (mean, _) = monte_carlo_nfe(&d, 2, 100_000, 1, 0).unwrap();
        assert!((mean - 1.75).abs() < 0.01, "{mean}");
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.5, 0.5], &[0.75, 0.25]).unwrap() - 0.25).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn chi_square_exact_fit() {
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5], 1e-4).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn chi_square_reference_value() {
        // 28, 31, 40, 35 against uniform: statistic 2.41791..., p 0.49031...
        let r = chi_square_gof(&[28, 31, 40, 35], &[0.25; 4], 0.05).unwrap();
        assert!((r.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((r.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn chi_square_uniform_samples_pass_and_shifted_fail() {
        let mut rng = RngStream::new(77, 0);
        let k = 10;
        let mut counts = vec![0u64; k];
        for _ in 0..100_000 {
            counts[(rng.uniform() * k as f64) as usize] += 1;
        }
        assert!(chi_square_gof(&counts, &vec![0.1; k], 1e-4).unwrap().passed);
        // shifted pmf at TV 0.1 from uniform
        let mut shifted = vec![0.1; k];
        shifted[0] = 0.2;
        shifted[1] = 0.0;
        let mut counts = vec![0u64; k];
        let pmf = DiscretePmf::new(shifted).unwrap();
        for _ in 0..100_000 {
            counts[pmf.sample(&mut rng) - 1] += 1;
        }
        assert!(!chi_square_gof(&counts, &vec![0.1; k], 1e-4).unwrap().passed);
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let r = chi_square_gof(&[10, 0, 0, 1], &[0.9, 0.04, 0.04, 0.02], 1e-4).unwrap();
        assert_eq!(r.dof, 0);
        let r = chi_square_gof(&[0, 0, 1], &[0.0, 0.5, 0.5], 1e-4).unwrap();
        assert!(r.passed);
        let r = chi_square_gof(&[1, 0, 1], &[0.0, 0.5, 0.5], 1e-4).unwrap();
        assert!(!r.passed);
        assert!(chi_square_gof(&[0, 0], &[0.5, 0.5], 1e-4).is_err());
        assert!(chi_square_gof(&[1, 2], &[0.5, 0.6], 1e-4).is_err());
    }
}
