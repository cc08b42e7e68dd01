//! The step-by-step Markov corruption and the transition-time process give
//! the same per-token marginals at every t.

use dndm::analytics::{empirical, tv_distance};
use dndm::domain::{NoiseModel, RngStream, Sequence};
use dndm::forward::{marginal_at, markov_forward, nonmarkov_forward};
use dndm::schedule::{build_linear, Time};

fn main() -> dndm::Result<()> {
    let noise = NoiseModel::uniform(5)?;
    let schedule = build_linear(50)?;
    let x0 = Sequence::from_indices(&[0, 2, 4], &noise.vocab())?;
    let trials = 20_000u64;

    for t in [10, 25, 40] {
        let mut markov = vec![0u64; 5];
        let mut nonmarkov = vec![0u64; 5];
        for trial in 0..trials {
            let mut rng = RngStream::for_trial(1, trial);
            let a = markov_forward(&x0, &schedule, &noise, &mut rng)?;
            let b = nonmarkov_forward(&x0, &schedule, &noise, &mut rng)?;
            markov[a.state_at(Time::Step(t))?[0].index()] += 1;
            nonmarkov[b.state_at(Time::Step(t))?[0].index()] += 1;
        }
        let exact = marginal_at(x0[0], Time::Step(t), &schedule, &noise)?;
        println!(
            "t = {t:>2}  exact {:?}\n        TV markov {:.4}  TV non-markov {:.4}",
            exact
                .probs()
                .iter()
                .map(|p| (p * 1e3).round() / 1e3)
                .collect::<Vec<_>>(),
            tv_distance(&empirical(&markov), exact.probs())?,
            tv_distance(&empirical(&nonmarkov), exact.probs())?,
        );
    }
    Ok(())
}
