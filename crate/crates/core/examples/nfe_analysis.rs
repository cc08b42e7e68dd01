//! Expected number of denoiser calls for N tokens over T steps, exact and
//! estimated.

use dndm::analytics::{expected_nfe, nfe_lower_bound_uniform};
use dndm::schedule::{beta_transition_distribution, DiscretePmf, TransitionTimeDistribution};

fn main() -> dndm::Result<()> {
    let n = 25;
    println!(
        "{:>6} {:>10} {:>10} {:>12} {:>10} {:>10}",
        "T", "law", "E|T|", "MC", "C", "bound"
    );
    for steps in [25, 50, 100, 1000] {
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
        for (name, dist) in laws {
            let r = expected_nfe(&dist, n)?.with_monte_carlo(&dist, 20_000, 9, 0)?;
            println!(
                "{steps:>6} {name:>10} {:>10.4} {:>12.4} {:>10.4} {:>10.4}",
                r.expected_nfe,
                r.empirical_mean.unwrap(),
                r.c_constant,
                nfe_lower_bound_uniform(steps, n)
            );
        }
    }
    Ok(())
}
