//! The Markov baselines: absorbing reveal and the multinomial posterior kernel.

use dndm::datamodel::{load_data_model, oracle_denoiser, teacher_denoiser};
use dndm::domain::{NoiseModel, RngStream, Token};
use dndm::sampler::{
    baseline_absorb_sample, baseline_multinomial_sample, multinomial_posterior, SamplerConfig,
};
use dndm::schedule::build_linear;

fn main() -> dndm::Result<()> {
    // K = 2, x_t = 0, x̂_0 = 1, β_t = α_{t-1} = 0.5
    let theta = multinomial_posterior(Token(0), Token(1), 0.5, 0.5, 2)?;
    println!("θ_post = {:?}", theta.probs());

    let model = load_data_model(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/data/chain3x4.txt"
    ))?;
    let schedule = build_linear(25)?;
    let config = SamplerConfig::default();

    let absorbing = NoiseModel::absorbing(3)?;
    let oracle = oracle_denoiser(model.clone(), schedule.clone(), absorbing, true)?;
    let mut rng = RngStream::for_trial(2, 0);
    let trace = baseline_absorb_sample(
        &oracle,
        &schedule,
        &absorbing,
        model.len(),
        &config,
        &mut rng,
    )?;
    println!(
        "baseline-absorb: {} after {} calls",
        trace.final_seq, trace.nfe
    );

    let uniform = NoiseModel::uniform(3)?;
    let target = model.support()[0].clone();
    let teacher = teacher_denoiser(target.clone());
    let trace = baseline_multinomial_sample(
        &teacher,
        &schedule,
        &uniform,
        model.len(),
        &config,
        &mut rng,
    )?;
    println!(
        "baseline-multi with teacher {target}: {} after {} calls",
        trace.final_seq, trace.nfe
    );
    Ok(())
}
