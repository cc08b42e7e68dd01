//! Continuous-time DNDM: real-valued transition times, one call per token.

use dndm::datamodel::{load_data_model, oracle_denoiser};
use dndm::domain::{NoiseModel, RngStream};
use dndm::sampler::{dndm_continuous_sample, SamplerConfig};
use dndm::schedule::{beta_transition_distribution, AlphaSchedule};

fn main() -> dndm::Result<()> {
    let model = load_data_model(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/data/chain3x4.txt"
    ))?;
    let noise = NoiseModel::absorbing(model.base_size())?;
    let dist = beta_transition_distribution(17.0, 4.0, None)?;
    let schedule = AlphaSchedule::from_transition(&dist)?;
    let oracle = oracle_denoiser(model.clone(), schedule.clone(), noise, true)?;
    let config = SamplerConfig {
        transition: Some(dist),
        record_states: true,
        ..Default::default()
    };

    for run in 0..3 {
        let mut rng = RngStream::for_trial(5, run);
        let trace =
            dndm_continuous_sample(&oracle, &schedule, &noise, model.len(), &config, &mut rng)?;
        println!("run {run}: {} in {} calls", trace.final_seq, trace.nfe);
        for e in &trace.events {
            println!("    τ = {:.4}  positions {:?}", e.time, e.updated);
        }
    }
    Ok(())
}
