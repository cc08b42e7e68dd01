//! Top-k decoding: transition times fix how many tokens are revealed per
//! step, the denoiser's confidence picks which.

use dndm::datamodel::{load_data_model, oracle_denoiser, DecodeMode};
use dndm::domain::{NoiseModel, RngStream};
use dndm::sampler::{dndm_topk_sample, SamplerConfig};
use dndm::schedule::{beta_transition_distribution, build_cosine, DEFAULT_COSINE_OFFSET};

fn main() -> dndm::Result<()> {
    let model = load_data_model(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/data/chain3x4.txt"
    ))?;
    let noise = NoiseModel::absorbing(model.base_size())?;
    let schedule = build_cosine(50, DEFAULT_COSINE_OFFSET)?;
    let oracle = oracle_denoiser(model.clone(), schedule.clone(), noise, false)?
        .with_decode(DecodeMode::Argmax);
    let config = SamplerConfig {
        transition: Some(beta_transition_distribution(3.0, 3.0, Some(50))?),
        record_states: true,
        ..Default::default()
    };
    let mut rng = RngStream::for_trial(11, 0);
    let trace = dndm_topk_sample(&oracle, &schedule, &noise, model.len(), &config, &mut rng)?;
    println!(
        "transition times {:?}",
        trace.transitions.as_ref().unwrap().steps().unwrap()
    );
    for event in &trace.events {
        println!(
            "t = {:>2}  revealed {:?}  -> {}",
            event.time,
            event.updated,
            event.state.as_ref().unwrap()
        );
    }
    println!("final {}  nfe {}", trace.final_seq, trace.nfe);
    Ok(())
}
