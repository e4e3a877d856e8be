use stratdetect::formats::ReportRow;
use stratdetect::sim::{
    expected_gain_curve, noisy_supervision_experiment, power_experiment, GainConfig,
    NoisySupervisionConfig, PowerConfig, Sigma, SupervisionKind,
};
use stratdetect_core::assign::enumerate_assignments;
use stratdetect_core::ProblemInstance;

const FIXED: [[usize; 3]; 5] = [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Exact expected gain on toy5 by direct enumeration, competition
/// positions computed from raw Borda sums. Indexed by true rank 1..=5.
fn oracle_toy_gains(perm: [usize; 3]) -> Vec<f64> {
    let inst = ProblemInstance::identity(5, 3);
    let all = enumerate_assignments(&inst, 1000).unwrap();
    let position = |s: &[i64], w: usize| 1 + s.iter().filter(|&&x| x < s[w]).count();
    (1..=5)
        .map(|rank| {
            let w = 5 - rank;
            let total: i64 = all
                .iter()
                .map(|a| {
                    let mut truth = [0i64; 5];
                    let mut strat = [0i64; 5];
                    for i in 0..5 {
                        let mut ws = a.works(i).to_vec();
                        ws.sort_by(|x, y| y.cmp(x));
                        for (p, &j) in ws.iter().enumerate() {
                            truth[j] += p as i64 + 1;
                            let q = if i == w {
                                perm.iter().position(|&k| k == p).unwrap()
                            } else {
                                p
                            };
                            strat[j] += q as i64 + 1;
                        }
                    }
                    position(&truth, w) as i64 - position(&strat, w) as i64
                })
                .sum();
            total as f64 / all.len() as f64
        })
        .collect()
}

fn fixed_name(p: [usize; 3]) -> String {
    format!("fixed:{},{},{}", p[0], p[1], p[2])
}

fn toy_curve() -> Vec<ReportRow> {
    expected_gain_curve(&GainConfig {
        preset: "toy5".into(),
        strategies: FIXED.iter().map(|&p| fixed_name(p)).collect(),
        positions: None,
        exact: true,
        trials: 0,
        seed: 0,
    })
    .unwrap()
}

#[test]
fn toy_fixed_strategies_match_enumeration() {
    let rows = toy_curve();
    for perm in FIXED {
        let want = oracle_toy_gains(perm);
        let got: Vec<f64> = rows
            .iter()
            .filter(|r| r.series == fixed_name(perm) && r.x != "mean")
            .map(|r| r.estimate)
            .collect();
        assert_eq!(got.len(), 5);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{perm:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn toy_fixed_strategy_shape() {
    let rows = toy_curve();
    let gains = |perm: [usize; 3]| -> Vec<f64> {
        ["2", "3", "4"]
            .iter()
            .map(|x| {
                rows.iter()
                    .find(|r| r.series == fixed_name(perm) && r.x == *x)
                    .unwrap()
                    .estimate
            })
            .collect()
    };
    // Full reversal helps a strong work and hurts a weak one.
    let rev = gains([2, 1, 0]);
    assert!(rev[0] > 0.0 && rev[2] < 0.0);
    // Every rearrangement that moves the top work loses somewhere.
    for perm in [[1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        assert!(gains(perm).iter().any(|&g| g < 0.0), "{perm:?} never loses");
        assert!(gains(perm).iter().any(|&g| g > 0.0), "{perm:?} never wins");
    }
    // Swapping the two lower works never loses with shared competition
    // positions: a tie counts as the better place for every tied work.
    let low = gains([0, 2, 1]);
    assert!(low.iter().all(|&g| g >= 0.0) && low.iter().any(|&g| g > 0.0));
}

#[test]
fn toy_extreme_positions_cannot_gain() {
    let rows = toy_curve();
    for r in rows.iter().filter(|r| r.x == "1" || r.x == "5") {
        assert_eq!(r.estimate, 0.0, "{r:?}");
    }
}

fn rate(rows: &[ReportRow], series: &str, x: &str) -> f64 {
    rows.iter()
        .find(|r| r.series == series && r.x == x)
        .unwrap_or_else(|| panic!("no row {series} {x}"))
        .estimate
}

#[test]
fn supervision_noise_erodes_power() {
    let rows = noisy_supervision_experiment(&NoisySupervisionConfig {
        preset: "game20".into(),
        population: "distance".into(),
        truthful_fractions: vec![0.0],
        supervision_sigmas: vec![Sigma(0.0), Sigma(f64::INFINITY)],
        reviewer_sigma: 0.0,
        alpha: 0.05,
        k: 100,
        trials: 200,
        seed: 31,
    })
    .unwrap();
    let clean = rate(&rows, "sigma=0", "0");
    let blind = rate(&rows, "sigma=inf", "0");
    assert!(clean > 0.4, "clean supervision power {clean}");
    assert!(clean > blind + 0.2, "sigma=0 {clean} vs sigma=inf {blind}");
}

#[test]
fn power_grows_with_strategic_share() {
    let rows = power_experiment(&PowerConfig {
        preset: "game20".into(),
        populations: vec!["round4".into()],
        truthful_fractions: vec![0.0, 0.5, 1.0],
        supervision: vec![SupervisionKind::GroundTruth],
        reviewer_sigma: 0.0,
        supervision_sigma: Sigma(0.0),
        alpha: 0.05,
        k: 100,
        trials: 200,
        seed: 32,
    })
    .unwrap();
    let series = "round4|ground-truth";
    let (all, half, none) = (
        rate(&rows, series, "0"),
        rate(&rows, series, "0.5"),
        rate(&rows, series, "1"),
    );
    assert!(all > half && half > none, "{all} {half} {none}");
    // All-truthful is the null: 0.05 plus three binomial standard errors.
    assert!(none <= 0.05 + 3.0 * (0.05f64 * 0.95 / 200.0).sqrt());
    assert!(rows.iter().all(|r| r.trials == 200));
}
