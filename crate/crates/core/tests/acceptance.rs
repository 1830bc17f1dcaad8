//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{claim_suite, ks_distance, step_cdf_gap, AGG_CLAIMS, IND_CLAIMS};
use moment_eq::bidding::affine_transform_check;
use moment_eq::empirics::metrics::{moment_distance_from_stats, weighted_average};
use moment_eq::empirics::synthetic::SyntheticConfig;
use moment_eq::empirics::{generate, run_pipeline, Estimator, PipelineConfig};
use moment_eq::equilibrium::{
    monte_carlo_consistency, solve_equilibrium, solve_equilibrium_agg, solve_equilibrium_ind,
    upper_belief_ind,
};
use moment_eq::estimation::bne_bid;
use moment_eq::loss::oracle_worst_loss;
use moment_eq::{
    Belief, BiddingFunction, EmpiricalDistribution, EquilibriumOptions, EquilibriumSolution,
    Family, Orientation, ValueDistribution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn near(x: f64, target: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((x - target).abs() <= tol, format!("{what} = {x}, expected {target} ± {tol}"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn uniform_agg() -> Result<(EquilibriumSolution, Duration), String> {
    let start = Instant::now();
    let dist = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    let sol = solve_equilibrium_agg(&dist, 2, &EquilibriumOptions::default()).map_err(err)?;
    Ok((sol, start.elapsed()))
}

fn uniform_ind() -> Result<EquilibriumSolution, String> {
    let dist = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    solve_equilibrium_ind(&dist, 2, &EquilibriumOptions::default()).map_err(err)
}

fn criterion_1() -> Outcome {
    let (sol, elapsed) = uniform_agg()?;
    let b = sol.belief;
    near(b.low(), 0.0, 0.005, "l*")?;
    near(b.moment(), 0.37, 0.005, "m*")?;
    near(b.high(), 0.50, 0.005, "u*")?;
    near(sol.mean_bid, 0.28, 0.005, "average bid")?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!(
        "(l, m, u) = ({:.4}, {:.4}, {:.4}), average bid {:.4}, {elapsed:.2?}",
        b.low(),
        b.moment(),
        b.high(),
        sol.mean_bid
    ))
}

fn criterion_2() -> Outcome {
    let sol = uniform_ind()?;
    let b = sol.belief;
    near(b.low(), 0.0, 0.005, "l*")?;
    near(b.moment(), 0.30, 0.005, "mu*")?;
    near(b.high(), 0.55, 0.005, "u*")?;
    let mut worst = 0.0f64;
    for i in 1..100 {
        let mu = i as f64 / 100.0;
        let u = upper_belief_ind(0.0, mu, 1.0, 2).map_err(err)?;
        worst = worst.max((u - mu.sqrt()).abs());
    }
    ensure(worst <= 1e-8, format!("u(mu) deviates from sqrt(mu) by {worst}"))?;
    Ok(format!(
        "(l, mu, u) = ({:.4}, {:.4}, {:.4}); max |u(mu) - sqrt(mu)| = {worst:.1e}",
        b.low(),
        b.moment(),
        b.high()
    ))
}

fn criterion_3() -> Outcome {
    let dist = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    let mut worst = 0.0f64;
    let mut total = 0.0;
    for i in 0..256 {
        let v = i as f64 / 255.0;
        let b = bne_bid(&dist, 2, v, Orientation::BuyerAuction).map_err(err)?;
        worst = worst.max((b - v / 2.0).abs());
        total += b;
    }
    ensure(worst <= 1e-6, format!("max gap {worst}"))?;
    // step-distribution path on a fine grid converges to the same curve
    let grid: Vec<f64> = (0..4000).map(|i| (i as f64 + 0.5) / 4000.0).collect();
    let fine = ValueDistribution::discrete(EmpiricalDistribution::from_sample(&grid).map_err(err)?);
    let top = bne_bid(&fine, 2, 1.0, Orientation::BuyerAuction).map_err(err)?;
    near(top, 0.5, 1e-3, "highest bid (step distribution)")?;
    Ok(format!(
        "max |beta(v) - v/2| = {worst:.1e}; grid-average bid {:.4}",
        total / 256.0
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_ratio = 0.0f64;
    let mut cases = 0;
    for &n in &[2usize, 3, 4, 7] {
        for family in [Family::Aggregate, Family::Individual] {
            for orientation in [Orientation::BuyerAuction, Orientation::Procurement] {
                for _ in 0..13 {
                    let low = rng.gen_range(-1.0..1.0);
                    let width = rng.gen_range(0.2..2.0);
                    let high = low + width;
                    let moment = low + width * rng.gen_range(0.05..0.95);
                    let belief =
                        Belief::new(family, low, moment, high, n, orientation).map_err(err)?;
                    let bid = rng.gen_range(low..=high);
                    let value = match orientation {
                        Orientation::BuyerAuction => bid + rng.gen_range(0.0..1.5) * width,
                        Orientation::Procurement => bid - rng.gen_range(0.0..1.5) * width,
                    };
                    let closed = belief.worst_loss(value, bid).map_err(err)?;
                    let oracle = oracle_worst_loss(&belief, value, bid, 2000).map_err(err)?;
                    let ratio = (closed - oracle).abs() / width;
                    if ratio > 5e-3 {
                        return Err(format!(
                            "{belief:?} v={value} b={bid}: closed {closed} vs oracle {oracle}"
                        ));
                    }
                    worst_ratio = worst_ratio.max(ratio);
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{cases} tuples, max gap {worst_ratio:.1e} x (u-l), {elapsed:.2?}"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut points_moved = 0.0f64;
    let opts = EquilibriumOptions::default();
    for trial in 0..5 {
        let k = rng.gen_range(3..=20);
        let points: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let f = EmpiricalDistribution::from_weighted(&points, &weights).map_err(err)?;
        for n in [2usize, 3] {
            for family in [Family::Aggregate, Family::Individual] {
                let sol = solve_equilibrium(family, &ValueDistribution::discrete(f.clone()), n, &opts)
                    .map_err(|e| format!("trial {trial} n={n} {family}: {e}"))?;
                let bids = sol.bidding_function().bid_all(f.support()).map_err(err)?;
                let g = EmpiricalDistribution::from_weighted(&bids, f.weights()).map_err(err)?;
                let moment = match family {
                    Family::Aggregate => g.max_order_stat_mean(n).map_err(err)?,
                    Family::Individual => g.mean(),
                };
                let belief =
                    Belief::new(family, g.min(), moment, g.max(), n, Orientation::BuyerAuction)
                        .map_err(err)?;
                let values = BiddingFunction::new(belief).inverse_all(g.support()).map_err(err)?;
                let recovered = EmpiricalDistribution::from_weighted(&values, g.weights()).map_err(err)?;
                let slack = 1e-9 * (f.max() - f.min());
                let gap = step_cdf_gap(&f, &recovered, slack);
                let shift = f
                    .support()
                    .iter()
                    .zip(&values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                points_moved = points_moved.max(shift);
                if gap > 1e-6 {
                    return Err(format!("trial {trial} n={n} {family}: cdf gap {gap}"));
                }
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!(
        "5 distributions x n in {{2, 3}} x both families, max cdf gap {worst:.1e}, \
         max value error {points_moved:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let dist = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    let sol = uniform_ind()?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut distances = Vec::new();
    for size in [200usize, 2000, 20000] {
        let bids: Vec<f64> = (0..size)
            .map(|_| sol.bid(dist.sample(&mut rng)))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let g = EmpiricalDistribution::from_sample(&bids).map_err(err)?;
        let belief = Belief::new(
            Family::Individual,
            g.min(),
            g.mean(),
            g.max(),
            2,
            Orientation::BuyerAuction,
        )
        .map_err(err)?;
        let values = BiddingFunction::new(belief).inverse_all(&bids).map_err(err)?;
        let f_hat = EmpiricalDistribution::from_sample(&values).map_err(err)?;
        distances.push(ks_distance(&f_hat, |x| x.clamp(0.0, 1.0)));
    }
    ensure(
        distances.windows(2).all(|w| w[1] < w[0]),
        format!("KS not decreasing: {distances:?}"),
    )?;
    ensure(distances[2] <= 0.03, format!("final KS {}", distances[2]))?;
    Ok(format!(
        "KS at 200/2000/20000 = {:.4} / {:.4} / {:.4}",
        distances[0], distances[1], distances[2]
    ))
}

fn criterion_7() -> Outcome {
    let mut lines = Vec::new();
    let uniform = ValueDistribution::uniform(0.0, 1.0).map_err(err)?;
    let skewed = ValueDistribution::discrete(
        EmpiricalDistribution::from_weighted(&[1.0, 2.0, 2.5, 4.0], &[0.4, 0.3, 0.2, 0.1]).map_err(err)?,
    );
    let cases = [
        (Family::Aggregate, &uniform, 2, EquilibriumOptions::default()),
        (Family::Individual, &uniform, 2, EquilibriumOptions::default()),
        (Family::Aggregate, &uniform, 4, EquilibriumOptions::procurement()),
        (Family::Individual, &skewed, 3, EquilibriumOptions::default()),
    ];
    for (i, (family, dist, n, opts)) in cases.iter().enumerate() {
        let sol = solve_equilibrium(*family, dist, *n, opts).map_err(err)?;
        let check = monte_carlo_consistency(&sol, 1_000_000, 70 + i as u64).map_err(err)?;
        ensure(
            check.within(3.0),
            format!("{family} n={n}: {check:?} (z = {:.2})", check.z_score()),
        )?;
        lines.push(format!("{family} n={n} z={:.2}", check.z_score()));
    }
    Ok(lines.join(", "))
}

fn criterion_8() -> Outcome {
    let md = moment_distance_from_stats(1.062, 0.073, 1.071, 0.079);
    near(md, 0.011, 0.001, "MD spot value")?;
    let (records, _) = generate(&SyntheticConfig::default()).map_err(err)?;
    let out = run_pipeline(&records, &PipelineConfig::default()).map_err(err)?;
    let overall = |e: Estimator| {
        let entries: Vec<(f64, usize)> = out
            .report
            .rows
            .iter()
            .filter(|r| r.estimator == e.label())
            .map(|r| (r.l1, r.observations))
            .collect();
        weighted_average(&entries).unwrap_or(f64::INFINITY)
    };
    let scores: Vec<(Estimator, f64)> = Estimator::ALL.iter().map(|&e| (e, overall(e))).collect();
    let best = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let ind_out = overall(Estimator::IndOut);
    let table = scores
        .iter()
        .map(|(e, s)| format!("{e} {s:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(ind_out <= best, format!("IND-Out not best: {table}"))?;
    Ok(format!("MD spot {md:.4}; weighted L1: {table}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lines = Vec::new();
    for (family, claims) in [
        (Family::Aggregate, &AGG_CLAIMS[..]),
        (Family::Individual, &IND_CLAIMS[..]),
    ] {
        for &claim in claims {
            let checked = claim_suite(&mut rng, family, claim, 100)?;
            lines.push(format!("{family}/{claim:?}: {checked}"));
        }
    }
    Ok(lines.join(", "))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for _ in 0..20 {
        let scale = rng.gen_range(0.1..10.0);
        let shift = rng.gen_range(-5.0..5.0);
        let low = rng.gen_range(-1.0..1.0);
        let width = rng.gen_range(0.2..2.0);
        let moment = low + width * rng.gen_range(0.05..0.95);
        let n = rng.gen_range(2..=7);
        for family in [Family::Aggregate, Family::Individual] {
            for orientation in [Orientation::BuyerAuction, Orientation::Procurement] {
                let belief =
                    Belief::new(family, low, moment, low + width, n, orientation).map_err(err)?;
                let ok = affine_transform_check(&belief, scale, shift).map_err(err)?;
                ensure(ok, format!("{belief:?} under ({scale}, {shift})"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (belief, p, q) combinations"))
}

/// All tuples of `n` draws from `k` points.
fn tuples(k: usize, n: usize) -> Vec<Vec<usize>> {
    (0..k.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let d = code % k;
                    code /= k;
                    d
                })
                .collect()
        })
        .collect()
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in 1..=4usize {
        for _ in 0..25 {
            let points: Vec<f64> = {
                let mut p: Vec<f64> = Vec::new();
                while p.len() < k {
                    let x = rng.gen_range(0..100) as f64 / 10.0;
                    if !p.contains(&x) {
                        p.push(x);
                    }
                }
                p.sort_by(f64::total_cmp);
                p
            };
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(1..10) as f64).collect();
            let d = EmpiricalDistribution::from_weighted(&points, &weights).map_err(err)?;
            for n in 1..=4usize {
                let pmf = d.min_order_stat_pmf_all(n).map_err(err)?;
                let sum: f64 = pmf.iter().sum();
                ensure((sum - 1.0).abs() <= 1e-10, format!("pmf sums to {sum}"))?;
                let mut exact = vec![0.0; k];
                for t in tuples(k, n) {
                    let prob: f64 = t.iter().map(|&i| d.weights()[i]).product();
                    exact[*t.iter().min().unwrap()] += prob;
                }
                for (a, b) in pmf.iter().zip(&exact) {
                    worst = worst.max((a - b).abs());
                }
                ensure(worst <= 1e-12, format!("pmf gap {worst} at k={k} n={n}"))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (distribution, n) pairs, max gap {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("uniform aggregate equilibrium", criterion_1),
        ("uniform individual equilibrium", criterion_2),
        ("Bayes-Nash benchmark", criterion_3),
        ("closed-form loss vs oracle", criterion_4),
        ("identification round trip", criterion_5),
        ("estimator consistency", criterion_6),
        ("Monte Carlo belief consistency", criterion_7),
        ("synthetic pipeline ranking and MD", criterion_8),
        ("comparative statics", criterion_9),
        ("affine invariance", criterion_10),
        ("min-of-n pmf", criterion_11),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
