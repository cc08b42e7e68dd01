//! DNDM against the absorbing baseline: same output law, far fewer calls.

use dndm::datamodel::{load_data_model, oracle_denoiser};
use dndm::domain::{NoiseModel, RngStream};
use dndm::sampler::{run_sampler, CountingDenoiser, SamplerConfig, SamplerKind};
use dndm::schedule::build_linear;

fn main() -> dndm::Result<()> {
    let model = load_data_model(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/data/chain3x4.txt"
    ))?;
    let noise = NoiseModel::absorbing(model.base_size())?;
    let schedule = build_linear(200)?;
    let oracle = oracle_denoiser(model.clone(), schedule.clone(), noise, true)?;
    let runs = 2_000u64;

    for kind in [
        SamplerKind::BaselineAbsorb,
        SamplerKind::Dndm,
        SamplerKind::DndmV2,
    ] {
        let counter = CountingDenoiser::new(&oracle);
        let mut hits = vec![0u64; model.support().len()];
        for run in 0..runs {
            let mut rng = RngStream::for_trial(3, run);
            let trace = run_sampler(
                kind,
                &counter,
                &schedule,
                &noise,
                model.len(),
                &SamplerConfig::default(),
                &mut rng,
            )?;
            hits[model
                .index_of(&trace.final_seq)
                .expect("oracle stays on the support")] += 1;
        }
        let (best, count) = hits.iter().enumerate().max_by_key(|(_, c)| **c).unwrap();
        println!(
            "{kind:<16} mean NFE {:>7.2}   most frequent {} ({:.3} vs q_data {:.3})",
            counter.count() as f64 / runs as f64,
            model.support()[best],
            *count as f64 / runs as f64,
            model.weights()[best],
        );
    }
    Ok(())
}
