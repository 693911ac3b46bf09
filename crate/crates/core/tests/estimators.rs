use election_core::asymptotics::{big_f, const_term, OscillationConfig};
use election_core::exact::exact_mean_table;
use election_core::montecarlo::{
    mc_big_f, mc_conjecture, mc_const_term, mc_lemma_check, mc_mean_cost_via_tau, mc_protocol_mean,
    sample_order_stats_pair, McRun, Sequential,
};
use election_core::rng::trial_rng;
use election_core::SplitParams;

fn params(p: f64) -> SplitParams {
    SplitParams::new(p).unwrap()
}

#[test]
fn hitting_time_mean_for_two_stations() {
    let s = params(0.5);
    let e = mc_mean_cost_via_tau(2, &s, &McRun::new(1_000_000, 42), &Sequential).unwrap();
    assert!(e.is_reliable());
    assert!(e.covers(2.0, 3.0), "{e:?}");
}

#[test]
fn hitting_time_mean_for_three_stations() {
    let s = params(0.5);
    let e = mc_mean_cost_via_tau(3, &s, &McRun::new(200_000, 43), &Sequential).unwrap();
    assert!(e.covers(7.0 / 3.0, 3.0), "{e:?}");
}

#[test]
fn hitting_time_mean_matches_recurrence_at_fifty() {
    let s = params(0.3);
    let exact = exact_mean_table(50, &s).unwrap().get(50).unwrap();
    let e = mc_mean_cost_via_tau(50, &s, &McRun::new(200_000, 44), &Sequential).unwrap();
    assert!(e.covers(exact, 3.0), "{e:?} vs {exact}");
}

#[test]
fn protocol_mean_for_two_stations() {
    let e = mc_protocol_mean(2, &params(0.2), 200_000, 45, 100_000, &Sequential).unwrap();
    assert!(e.covers(3.125, 3.0), "{e:?}");
}

#[test]
fn protocol_and_hitting_time_agree() {
    let s = params(0.5);
    let a = mc_protocol_mean(20, &s, 100_000, 46, 100_000, &Sequential).unwrap();
    let b = mc_mean_cost_via_tau(20, &s, &McRun::new(100_000, 47), &Sequential).unwrap();
    assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
}

#[test]
fn second_order_statistic_scales_like_gamma_two() {
    let n = 10_000;
    let trials = 1_000_000u64;
    let mut rng = trial_rng(48, 0);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..trials {
        let v = n as f64 * sample_order_stats_pair(n, &mut rng).unwrap().1;
        sum += v;
        sq += v * v;
    }
    let mean = sum / trials as f64;
    let se = ((sq / trials as f64 - mean * mean) / trials as f64).sqrt();
    // E(n U_{2,n}) = 2n / (n + 1).
    let target = 2.0 * n as f64 / (n as f64 + 1.0);
    assert!((mean - target).abs() < 3.0 * se, "{mean} ± {se}");
    assert!((mean - 2.0).abs() < 3.0 * se + 1e-3);
}

#[test]
fn minimum_has_beta_marginal() {
    // Kolmogorov–Smirnov against P(U_1 <= a) = 1 - (1 - a)^5.
    let n = 5;
    let trials = 20_000;
    let mut rng = trial_rng(49, 0);
    let mut xs: Vec<f64> = (0..trials).map(|_| sample_order_stats_pair(n, &mut rng).unwrap().0).collect();
    xs.sort_by(f64::total_cmp);
    let cdf = |a: f64| 1.0 - (1.0 - a).powi(n as i32);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let f = cdf(a);
            (f - i as f64 / trials as f64).abs().max(((i + 1) as f64 / trials as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value.
    assert!(d < 1.63 / (trials as f64).sqrt(), "D = {d}");
}

#[test]
fn lemma_holds_with_common_random_numbers() {
    let s = params(0.5);
    let check = mc_lemma_check(0.3, 0.31, &s, &McRun::new(100_000, 50), &Sequential).unwrap();
    assert!(check.terms.omega);
    assert!(check.rhs.stderr > 0.0);
    assert!(check.holds(3.0), "{check:?}");
    assert!(check.paired_variance < check.independent_variance, "{check:?}");
}

#[test]
fn lemma_remainder_vanishes_when_second_cells_differ() {
    // rho(log_p x) x and rho(log_p y) y fall in different base-p cells, so the
    // gated chains always exit right after the second jump.
    let s = params(0.5);
    let check = mc_lemma_check(0.3, 0.35, &s, &McRun::new(100_000, 50), &Sequential).unwrap();
    assert_eq!(check.rhs.stderr, 0.0);
    assert_eq!(check.rhs.value, check.terms.first + check.terms.second);
    assert!(check.holds(3.0), "{check:?}");
}

#[test]
fn lemma_off_omega_reduces_to_first_term() {
    let s = params(0.5);
    let check = mc_lemma_check(0.4, 0.6, &s, &McRun::new(100_000, 51), &Sequential).unwrap();
    assert!(!check.terms.omega);
    assert_eq!(check.rhs.value, check.terms.first);
    assert!(check.lhs.covers(check.terms.first, 3.0), "{check:?}");
}

#[test]
fn constant_matches_its_monte_carlo_oracle() {
    for (p, seed) in [(0.5, 52), (0.2, 53)] {
        let s = params(p);
        let e = mc_const_term(&s, 10_000_000, seed, &Sequential).unwrap();
        let c = const_term(&s, 1e-16);
        assert!(e.covers(c, 3.0), "p = {p}: {e:?} vs {c}");
    }
}

#[test]
fn oscillation_matches_its_monte_carlo_oracle() {
    let s = params(0.5);
    for (z, seed) in [(0.1, 54), (0.37, 55), (0.9, 56)] {
        let f = big_f(z, &s, &OscillationConfig::default()).unwrap();
        let e = mc_big_f(z, &s, 2_000_000, seed, &Sequential).unwrap();
        assert!(e.covers(f, 3.0), "z = {z}: {e:?} vs {f}");
    }
}

#[test]
fn conjecture_estimates_are_finite_and_reproducible() {
    let s = params(0.5);
    let run = McRun::new(5_000, 57);
    let grid = [0.25, 0.5, 0.8];
    let a = mc_conjecture(&grid, &s, &run, &Sequential).unwrap();
    let b = mc_conjecture(&grid, &s, &run, &Sequential).unwrap();
    assert_eq!(a, b);
    for pt in &a {
        assert!(pt.log10_moment.is_finite());
        assert_eq!(pt.truncated(), 0);
        assert!(pt.top_share > 0.0 && pt.top_share <= 1.0);
    }
}

#[test]
fn mean_tau_at_half_reproducible_across_seeds() {
    let s = params(0.5);
    let a = mc_conjecture(&[0.5], &s, &McRun::new(100_000, 58), &Sequential).unwrap()[0].mean_tau;
    let b = mc_conjecture(&[0.5], &s, &McRun::new(100_000, 59), &Sequential).unwrap()[0].mean_tau;
    assert!(a.value.is_finite());
    assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
}
