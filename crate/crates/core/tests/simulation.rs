use multipark::degree::DegreeDistribution;
use multipark::deposit::{
    estimate_densities, replica_seed, run_replica, run_replica_with, SimConfig, SiteState, Substrate,
};
use multipark::tree::{build_cycle, build_random_ball, build_regular_ball, GraphInstance};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

/// Two-layer code after an arrival at a site in state `site` whose neighbors
/// are in `nbrs`, read off the generator's rate table. `None` when no rate
/// applies and the code must stay put.
fn rate_table(site: &SiteState, nbrs: &[SiteState]) -> Option<u8> {
    let empty = |s: &SiteState| s.arrivals == 0;
    let single_first = |s: &SiteState| s.arrivals == 1 && s.two_layer_code() == 1;
    if empty(site) && nbrs.iter().all(empty) {
        return Some(1);
    }
    if empty(site) && nbrs.iter().all(|s| empty(s) || single_first(s)) && nbrs.iter().any(single_first) {
        return Some(2);
    }
    if single_first(site) && nbrs.iter().all(empty) {
        return Some(3);
    }
    None
}

fn assert_conformance(graph: &GraphInstance, horizon: f64, seed: u64) -> usize {
    let config = SimConfig::new(vec![horizon], 1, seed);
    let mut events = 0;
    run_replica_with(graph, &graph.interior, &config, seed, |ev, states| {
        events += 1;
        let nbrs: Vec<SiteState> = graph.neighbors(ev.vertex).iter().map(|&j| states[j as usize]).collect();
        let (from, to) = (ev.before.two_layer_code(), ev.after.two_layer_code());
        let expected = rate_table(&ev.before, &nbrs).unwrap_or(from);
        assert_eq!(to, expected, "vertex {} at t={}: {from} -> {to}", ev.vertex, ev.time);
        assert!(matches!((from, to), (a, b) if a == b || (a, b) == (0, 1) || (a, b) == (0, 2) || (a, b) == (1, 3)));

        assert_eq!(ev.after.arrivals, ev.before.arrivals + 1);
        assert!(ev.after.top > ev.before.top, "top must rise");
        let above = if ev.after.top >= 32 { 0 } else { ev.after.mask >> ev.after.top };
        assert_eq!(above, 0, "layers above the top are empty");
        if ev.after.top <= config.track_layers {
            assert!(ev.after.occupied(ev.after.top));
        }
    });
    events
}

#[test]
fn rate_table_on_cycle() {
    let g = build_cycle(200).unwrap();
    for seed in 0..5 {
        assert!(assert_conformance(&g, 6.0, seed) > 1000);
    }
}

#[test]
fn rate_table_on_regular_ball() {
    let g = build_regular_ball(4, 5, 1).unwrap();
    assert!(assert_conformance(&g, 3.0, 11) > 1000);
}

#[test]
fn rate_table_on_random_balls() {
    let dist: DegreeDistribution = "2:1/3,3:1/3,5:1/3".parse().unwrap();
    for seed in 0..5 {
        let g = build_random_ball(&dist, 6, 2, seed).unwrap();
        assert_conformance(&g, 4.0, seed + 100);
    }
}

/// Arrival counts at time `t` against Poisson(t), pooled over sites of one
/// large cycle and several replicas.
#[test]
fn arrivals_are_poisson() {
    let t = 2.0;
    let g = build_cycle(500).unwrap();
    let config = SimConfig::new(vec![t], 1, 0);
    let law = Poisson::new(t).unwrap();
    let cells = 8usize; // 0..=6 and a tail cell
    let mut counts = vec![0u64; cells];
    let mut total = 0u64;
    for i in 0..20 {
        let trace = run_replica(&g, &config, replica_seed(2718, i));
        for s in &trace.sites[0] {
            counts[(s.arrivals as usize).min(cells - 1)] += 1;
            total += 1;
        }
    }
    let mut stat = 0.0;
    for (k, &obs) in counts.iter().enumerate() {
        let p = if k < cells - 1 { law.pmf(k as u64) } else { 1.0 - law.cdf(cells as u64 - 2) };
        let exp = p * total as f64;
        stat += (obs as f64 - exp).powi(2) / exp;
    }
    let crit = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < crit, "chi2 = {stat:.2} >= {crit:.2}, counts {counts:?}");
}

#[test]
fn first_layer_is_monotone_along_a_trajectory() {
    let g = build_regular_ball(3, 8, 3).unwrap();
    let times: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    let trace = run_replica(&g, &SimConfig::new(times, 1, 5), 5);
    let frac: Vec<usize> = trace.sites.iter().map(|s| s.iter().filter(|x| x.occupied(1)).count()).collect();
    assert!(frac.windows(2).all(|w| w[0] <= w[1]), "{frac:?}");
}

#[test]
fn identical_runs_are_bit_identical_across_thread_counts() {
    let sub = Substrate::Fixed(build_cycle(300).unwrap());
    let config = SimConfig::new(vec![0.5, 2.0, 4.0], 24, 42).with_patterns(vec!["0101".parse().unwrap()]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_densities(&sub, &config).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.to_csv(), run(3).to_csv());
    let other = estimate_densities(&sub, &SimConfig { seed: 43, ..config.clone() }).unwrap();
    assert_ne!(one, other);
}

/// Root degrees of random balls follow the law (chi-square over 10⁴ seeds),
/// and internal vertices carry the law as well.
#[test]
fn random_ball_degrees_follow_the_law() {
    let dist: DegreeDistribution = "2:1/2,3:1/4,4:1/4".parse().unwrap();
    let probs = dist.float_weights();
    let mut root = [0u64; 3];
    let mut internal = [0u64; 3];
    for seed in 0..10_000u64 {
        let g = build_random_ball(&dist, 3, 1, seed).unwrap();
        let idx = |d: usize| d - 2;
        root[idx(g.degree(g.root.unwrap()))] += 1;
        if seed < 2000 {
            let depth = g.depth.as_ref().unwrap();
            for v in 0..g.vertex_count() as u32 {
                if depth[v as usize] < 3 {
                    internal[idx(g.degree(v))] += 1;
                }
            }
        }
    }
    let crit = ChiSquared::new(2.0).unwrap().inverse_cdf(0.999);
    for counts in [root, internal] {
        let n: u64 = counts.iter().sum();
        let stat: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&o, &p)| (o as f64 - p * n as f64).powi(2) / (p * n as f64))
            .sum();
        assert!(stat < crit, "chi2 = {stat:.2}, counts {counts:?}");
    }
}
