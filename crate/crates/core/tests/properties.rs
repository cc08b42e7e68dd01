use dndm::analytics::{expected_nfe, nfe_lower_bound_uniform};
use dndm::datamodel::{exact_posterior, ToyDataModel};
use dndm::domain::{NoiseKind, NoiseModel, RngStream, Sequence, VocabSpec};
use dndm::forward::{markov_forward, nonmarkov_forward};
use dndm::schedule::{
    beta_transition_distribution, build_linear, sample_transition_set, transition_distribution,
    DiscretePmf, ScheduleKind, Time, TransitionTimeDistribution,
};
use proptest::prelude::*;

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_set_size_is_bounded(steps in 1usize..60, n in 1usize..40, seed in any::<u64>()) {
        let dist = transition_distribution(&build_linear(steps).unwrap()).unwrap();
        let set = sample_transition_set(&dist, n, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(set.distinct_count() >= 1);
        prop_assert!(set.distinct_count() <= n.min(steps));
        prop_assert_eq!(set.len(), n);
    }

    #[test]
    fn pmfs_are_normalized(steps in 1usize..300, a in 0.2f64..20.0, b in 0.2f64..20.0) {
        let beta = beta_transition_distribution(a, b, Some(steps)).unwrap();
        let total: f64 = beta.pmf().unwrap().probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(beta.pmf().unwrap().probs().iter().all(|p| *p >= 0.0));
        for kind in [ScheduleKind::Linear, ScheduleKind::Cosine, ScheduleKind::CosineSquared] {
            let d = transition_distribution(&kind.build(Some(steps), 0.008).unwrap()).unwrap();
            let total: f64 = d.pmf().unwrap().probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nfe_constant_respects_the_bound(w in weights(8), n in 1usize..50) {
        let total: f64 = w.iter().sum();
        let pmf = DiscretePmf::new(w.iter().map(|x| x / total).collect()).unwrap();
        let r = expected_nfe(&TransitionTimeDistribution::DiscretePmf(pmf), n).unwrap();
        prop_assert!(r.c_constant >= nfe_lower_bound_uniform(8, n) - 1e-12);
        prop_assert!(r.expected_nfe >= 1.0 - 1e-12);
        prop_assert!(r.expected_nfe <= n.min(8) as f64 + 1e-12);
    }

    #[test]
    fn posterior_is_a_distribution(
        w in weights(9),
        obs in prop::collection::vec(0u32..4, 2),
        t in 0usize..=10,
        uniform in any::<bool>(),
    ) {
        let v = VocabSpec::new(3, false).unwrap();
        let total: f64 = w.iter().sum();
        let entries = (0..9u32)
            .map(|i| (Sequence::from_indices(&[i / 3, i % 3], &v).unwrap(), w[i as usize] / total))
            .collect();
        let model = ToyDataModel::from_support(3, entries).unwrap();
        let noise = NoiseModel::new(if uniform { NoiseKind::UniformMultinomial } else { NoiseKind::Absorbing }, 3).unwrap();
        let schedule = build_linear(10).unwrap();
        let obs: Vec<u32> = if uniform { obs.iter().map(|o| o % 3).collect() } else { obs };
        let xt = Sequence::from_indices(&obs, &noise.vocab()).unwrap();
        // a mask at t = 0 and a data token at t = T under absorbing noise are
        // impossible; everything else has positive evidence
        match exact_posterior(&xt, Time::Step(t), &model, &schedule, &noise) {
            Ok(post) => {
                let total: f64 = post.probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(post.probs().iter().all(|p| *p >= 0.0));
            }
            Err(_) => prop_assert!((t == 0 && obs.contains(&3)) || (t == 10 && !uniform && obs.iter().any(|o| *o < 3))),
        }
    }

    #[test]
    fn trajectories_start_clean_and_end_in_noise(seed in any::<u64>(), steps in 1usize..30, markov in any::<bool>()) {
        let noise = NoiseModel::absorbing(4).unwrap();
        let x0 = Sequence::from_indices(&[0, 1, 2, 3], &noise.vocab()).unwrap();
        let schedule = build_linear(steps).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let traj = if markov {
            markov_forward(&x0, &schedule, &noise, &mut rng).unwrap()
        } else {
            nonmarkov_forward(&x0, &schedule, &noise, &mut rng).unwrap()
        };
        prop_assert_eq!(traj.state_at(Time::Step(0)).unwrap(), x0);
        let last = traj.state_at(Time::Step(steps)).unwrap();
        prop_assert!(last.tokens().iter().all(|t| noise.vocab().is_mask(*t)));
        // absorbing paths never unmask
        let states = traj.states().unwrap();
        for w in states.windows(2) {
            for (a, b) in w[0].tokens().iter().zip(w[1].tokens()) {
                prop_assert!(!noise.vocab().is_mask(*a) || noise.vocab().is_mask(*b));
            }
        }
    }
}
