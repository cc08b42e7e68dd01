//! Exact posterior over clean sequences given a partially masked observation.

use dndm::datamodel::{exact_posterior, load_data_model};
use dndm::domain::{NoiseModel, Sequence};
use dndm::schedule::{build_linear, Time};

fn main() -> dndm::Result<()> {
    let model = load_data_model(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/data/chain3x4.txt"
    ))?;
    let noise = NoiseModel::absorbing(model.base_size())?;
    let schedule = build_linear(10)?;
    // token 3 is the mask
    let xt = Sequence::from_indices(&[0, 3, 3, 2], &noise.vocab())?;
    let post = exact_posterior(&xt, Time::Step(6), &model, &schedule, &noise)?;

    let mut ranked: Vec<_> = model
        .support()
        .iter()
        .zip(post.probs())
        .filter(|(_, p)| **p > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(a.1));
    println!("x_6 = {xt}");
    for (seq, p) in ranked.iter().take(8) {
        println!("  {seq}  {p:.4}");
    }
    for (n, m) in post.marginals(&model).iter().enumerate() {
        println!("position {n}: {m:.3?}");
    }
    Ok(())
}
