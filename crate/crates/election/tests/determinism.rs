use election::executor::Rayon;
use election_core::montecarlo::{mc_conjecture, mc_lemma_check, mc_mean_cost_via_tau, mc_protocol_mean, McRun, Sequential};
use election_core::SplitParams;

#[test]
fn parallel_runs_match_sequential_bit_for_bit() {
    let s = SplitParams::new(0.3).unwrap();
    let run = McRun::new(10_000, 5);
    assert_eq!(
        mc_mean_cost_via_tau(12, &s, &run, &Sequential).unwrap(),
        mc_mean_cost_via_tau(12, &s, &run, &Rayon).unwrap()
    );
    assert_eq!(
        mc_protocol_mean(12, &s, 10_000, 5, 10_000, &Sequential).unwrap(),
        mc_protocol_mean(12, &s, 10_000, 5, 10_000, &Rayon).unwrap()
    );
    assert_eq!(
        mc_lemma_check(0.3, 0.31, &s, &run, &Sequential).unwrap(),
        mc_lemma_check(0.3, 0.31, &s, &run, &Rayon).unwrap()
    );
    assert_eq!(
        mc_conjecture(&[0.2, 0.7], &s, &run, &Sequential).unwrap(),
        mc_conjecture(&[0.2, 0.7], &s, &run, &Rayon).unwrap()
    );
}

#[test]
fn worker_count_does_not_matter() {
    let s = SplitParams::new(0.5).unwrap();
    let run = McRun::new(20_000, 11);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| mc_mean_cost_via_tau(7, &s, &run, &Rayon).unwrap());
    let b = four.install(|| mc_mean_cost_via_tau(7, &s, &run, &Rayon).unwrap());
    assert_eq!(a, b);
}
