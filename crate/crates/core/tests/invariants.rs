use election_core::asymptotics::{big_f, rho, AsymptoticModel, OscillationConfig};
use election_core::chain::{hitting_times, jump_indices, walk_covering, ChainPath, Exit, SplitStep};
use election_core::exact::{exact_cdf_dp, exact_mean_table, poisson_transform_fixpoint, poisson_transform_series, FixpointConfig};
use election_core::intervals::{build_intervals, cdf_exact};
use election_core::protocol::{run_election, ChannelFeedback, ElectionStatus, RandomCoins};
use election_core::rng::trial_rng;
use election_core::SplitParams;
use proptest::prelude::*;

fn bias() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_envelopes_are_monotone(p in bias(), seed in any::<u64>()) {
        let s = SplitParams::new(p).unwrap();
        let mut rng = trial_rng(seed, 0);
        let mut prev = election_core::chain::SplitChain::new();
        for (step, state) in ChainPath::new(s, &mut rng).take(60) {
            prop_assert!(prev.alpha() <= state.alpha());
            prop_assert!(state.upper() <= prev.upper());
            prop_assert!(state.alpha() <= state.upper());
            if state.ln_pi() > -30.0 {
                prop_assert!(state.alpha() < state.upper());
            }
            match step {
                SplitStep::Right => prop_assert_eq!(state.upper(), prev.upper()),
                SplitStep::Left if state.ln_pi() > -30.0 => prop_assert!(state.upper() < prev.upper()),
                SplitStep::Left => {}
            }
            prev = state;
        }
    }

    #[test]
    fn visited_states_cover_the_window(p in bias(), x in 0.01f64..0.98, w in 0.0f64..1.0, seed in any::<u64>()) {
        let y = x + w * (0.99 - x);
        let s = SplitParams::new(p).unwrap();
        let mut rng = trial_rng(seed, 1);
        let mut steps = Vec::new();
        let mut last = 0;
        let exit = walk_covering(&s, x, y, &mut rng, 100_000, |state, step| {
            assert!(state.covers(x, y));
            last = state.index();
            steps.extend(step);
            Ok(())
        }).unwrap();
        let tau = exit.tau().unwrap();
        prop_assert_eq!(last + 1, tau);
        if let Exit::Nu(nu) = exit {
            // The step into nu is not recorded; it must itself be a jump.
            prop_assert!(nu >= 1);
            prop_assert!(!jump_indices(&steps).contains(&(nu - 1)));
        }
    }

    #[test]
    fn nu_fires_one_step_after_a_jump(p in bias(), x in 0.01f64..0.98, seed in any::<u64>()) {
        let s = SplitParams::new(p).unwrap();
        let mut rng = trial_rng(seed, 2);
        let mut upto = Vec::new();
        let mut prev_alpha = 0.0;
        for (step, state) in ChainPath::new(s, &mut rng).take(10_000) {
            upto.push(step);
            if state.alpha() > x {
                prop_assert!(state.alpha() > prev_alpha);
                prop_assert!(jump_indices(&upto).contains(&(state.index() - 1)));
                break;
            }
            prev_alpha = state.alpha();
        }
    }

    #[test]
    fn hitting_times_agree_with_walk(p in bias(), x in 0.01f64..0.5, seed in any::<u64>()) {
        let s = SplitParams::new(p).unwrap();
        let y = x + 0.3;
        let h = hitting_times(&s, x, y, &mut trial_rng(seed, 3), 100_000).unwrap();
        let e = walk_covering(&s, x, y, &mut trial_rng(seed, 3), 100_000, |_, _| Ok(())).unwrap();
        prop_assert_eq!(h.tau.index(), e.tau());
    }

    #[test]
    fn protocol_eliminates_only_on_collisions(p in bias(), n in 2u32..40, seed in any::<u64>()) {
        let s = SplitParams::new(p).unwrap();
        let mut rng = trial_rng(seed, 4);
        let trace = run_election(n, &s, &mut RandomCoins(&mut rng), 100_000).unwrap();
        prop_assert_eq!(trace.status, ElectionStatus::Completed);
        prop_assert_eq!(trace.time_units, trace.coin_flip_rounds + 1);
        let mut candidates = n as usize;
        for pair in trace.rounds.windows(2).skip(1) {
            let (r, next) = (&pair[0], &pair[1]);
            prop_assert_eq!(r.active.len() + r.non_active.len(), candidates);
            let grew = next.eliminated.len() - r.eliminated.len();
            match r.feedback {
                ChannelFeedback::Collision => {
                    prop_assert_eq!(grew, r.non_active.len());
                    candidates = r.active.len();
                }
                _ => prop_assert_eq!(grew, 0),
            }
            for id in &next.eliminated[..] {
                prop_assert!(!next.active.contains(id) && !next.non_active.contains(id));
            }
        }
        let leader = trace.leader.unwrap();
        prop_assert_eq!(trace.rounds.last().unwrap().feedback, ChannelFeedback::Success(leader));
    }

    #[test]
    fn dp_cdf_is_monotone_and_matches_intervals(p in 0.1f64..0.9, n in 2usize..20, k in 0u32..10) {
        let s = SplitParams::new(p).unwrap();
        let a = exact_cdf_dp(n, k as usize, &s);
        let b = exact_cdf_dp(n, k as usize + 1, &s);
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
        prop_assert!((cdf_exact(n, k, &s).unwrap() - a).abs() < 1e-10);
    }

    #[test]
    fn intervals_partition_the_unit_interval(p in bias(), k in 0u32..12) {
        let s = SplitParams::new(p).unwrap();
        let d = build_intervals(k, &s).unwrap();
        let child = build_intervals(k + 1, &s).unwrap();
        prop_assert!((d.lengths().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..d.len() {
            prop_assert!((child.lengths()[2 * i] - p * d.lengths()[i]).abs() < 1e-15);
            prop_assert!((child.rights()[2 * i + 1] - d.rights()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_stays_in_unit_range(p in bias(), z in -50.0f64..50.0) {
        let s = SplitParams::new(p).unwrap();
        let r = rho(z, &s);
        prop_assert!(r > 0.0 && r <= 1.0);
    }

    #[test]
    fn transform_routes_agree(p in 0.2f64..0.8, x in 0.1f64..12.0) {
        let s = SplitParams::new(p).unwrap();
        let a = poisson_transform_series(x, &s, 1e-14).unwrap();
        let b = poisson_transform_fixpoint(x, &s, &FixpointConfig::default()).unwrap();
        prop_assert!((a - b).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oscillation_is_bounded_and_periodic(p in 0.1f64..0.9, z in 0.0f64..1.0) {
        let s = SplitParams::new(p).unwrap();
        let cfg = OscillationConfig::default();
        let f = big_f(z, &s, &cfg).unwrap();
        prop_assert!(f.abs() <= 4.0);
        prop_assert!((big_f(z + 7.0, &s, &cfg).unwrap() - f).abs() < 1e-8);
    }

    #[test]
    fn prediction_is_sum_of_parts(p in 0.1f64..0.9, n in 2u64..200) {
        let s = SplitParams::new(p).unwrap();
        let table = exact_mean_table(200, &s).unwrap();
        let d = AsymptoticModel::new(s, OscillationConfig::default()).decompose(n, Some(&table)).unwrap();
        prop_assert_eq!(d.predicted, d.leading + d.constant + d.oscillation);
        prop_assert!(d.leading > 0.0);
        prop_assert_eq!(d.residual.unwrap(), d.exact.unwrap() - d.predicted);
    }
}
