use election_core::chain::{hitting_times, jump_indices, ChainPath, Hit, DEFAULT_MAX_STEPS};
use election_core::exact::CdfTable;
use election_core::protocol::election_cost;
use election_core::rng::TrialSeeder;
use election_core::SplitParams;

/// Upper 1% points of the chi-square distribution.
fn chi2_99(df: usize) -> f64 {
    match df {
        8 => 20.090,
        12 => 26.217,
        _ => unreachable!(),
    }
}

#[test]
fn jump_gaps_are_geometric() {
    for (p, bins) in [(0.5, 12usize), (0.3, 8)] {
        let s = SplitParams::new(p).unwrap();
        let seeder = TrialSeeder::new(60);
        let mut counts = vec![0u64; bins + 1];
        let mut total = 0u64;
        for t in 0..5_000 {
            let mut rng = seeder.stream(t);
            let steps: Vec<_> = ChainPath::new(s, &mut rng).map(|(step, _)| step).take(400).collect();
            let jumps = jump_indices(&steps);
            let mut prev: i64 = -1;
            for &g in jumps.iter().take(20) {
                let gap = (g as i64 - prev - 1) as usize;
                counts[gap.min(bins)] += 1;
                total += 1;
                prev = g as i64;
            }
        }
        let q = 1.0 - p;
        let chi2: f64 = (0..=bins)
            .map(|k| {
                let prob = if k < bins { q * p.powi(k as i32) } else { p.powi(bins as i32) };
                let expected = prob * total as f64;
                let d = counts[k] as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < chi2_99(bins), "p = {p}: chi2 = {chi2}");
    }
}

#[test]
fn hitting_times_never_truncate_on_a_proper_window() {
    for p in [0.2, 0.5, 0.8] {
        let s = SplitParams::new(p).unwrap();
        let seeder = TrialSeeder::new(61);
        let truncated = (0..1_000_000u64)
            .filter(|&t| hitting_times(&s, 0.3, 0.7, &mut seeder.stream(t), DEFAULT_MAX_STEPS).unwrap().tau == Hit::Truncated)
            .count();
        assert_eq!(truncated, 0, "p = {p}");
    }
}

#[test]
fn protocol_cost_distribution_matches_dp() {
    let trials = 100_000u64;
    let crit = 1.63 / (trials as f64).sqrt();
    for p in [0.3, 0.5, 0.7] {
        let s = SplitParams::new(p).unwrap();
        let table = CdfTable::build_saturated(12, &s);
        for n in 2..=12u32 {
            let seeder = TrialSeeder::new(62 + n as u64);
            let mut hist = vec![0u64; table.k_max() + 2];
            for t in 0..trials {
                let c = election_cost(n, &s, &mut seeder.stream(t), 100_000).unwrap() as usize;
                hist[c.min(table.k_max() + 1)] += 1;
            }
            let mut acc = 0u64;
            let mut d: f64 = 0.0;
            for (k, h) in hist.iter().enumerate().take(table.k_max() + 1) {
                acc += h;
                let emp = acc as f64 / trials as f64;
                d = d.max((emp - table.cdf(n as usize, k).unwrap()).abs());
            }
            assert!(d < crit, "p = {p}, n = {n}: D = {d}");
        }
    }
}
