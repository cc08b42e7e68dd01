//! Prints the three built-in schedules and a Beta transition law side by side.

use dndm::schedule::{
    beta_transition_distribution, transition_distribution, ScheduleKind, DEFAULT_COSINE_OFFSET,
};

fn main() -> dndm::Result<()> {
    let steps = 10;
    let laws = [
        ScheduleKind::Linear,
        ScheduleKind::Cosine,
        ScheduleKind::CosineSquared,
    ]
    .into_iter()
    .map(|k| {
        let s = k.build(Some(steps), DEFAULT_COSINE_OFFSET)?;
        Ok((
            k.name().to_string(),
            s.alphas().unwrap().to_vec(),
            transition_distribution(&s)?,
        ))
    })
    .collect::<dndm::Result<Vec<_>>>()?;
    let beta = beta_transition_distribution(3.0, 3.0, Some(steps))?;

    print!("{:>3}", "t");
    for (name, _, _) in &laws {
        print!("  {:>9} {:>7}", format!("α {name}"), "p_τ");
    }
    println!("  {:>9}", "beta(3,3)");
    for t in 1..=steps {
        print!("{t:>3}");
        for (_, alphas, dist) in &laws {
            print!("  {:>9.4} {:>7.4}", alphas[t], dist.pmf().unwrap().prob(t));
        }
        println!("  {:>9.4}", beta.pmf().unwrap().prob(t));
    }
    Ok(())
}
