//! Fair ranking LP against exhaustive enumeration of ranking profiles.

use fairloop_core::metrics::{aggregate_utility_weighted, group_exposure_weighted};
use fairloop_core::optimizer::{fair_rank, sample_ranking, ConstraintKind, FairnessConstraint};
use fairloop_core::{GroupPartition, PositionWeights, RandomSource, RankedList, RelevanceMatrix};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every combination of one permutation per user.
fn profiles(n: usize, users: usize) -> Vec<Vec<RankedList>> {
    let perms: Vec<RankedList> = permutations(n).into_iter().map(|p| RankedList::new(p).unwrap()).collect();
    let mut out = vec![vec![]];
    for _ in 0..users {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<RankedList>| {
                perms.iter().map(move |p| {
                    let mut q = prefix.clone();
                    q.push(p.clone());
                    q
                })
            })
            .collect();
    }
    out
}

struct Instance {
    rel: RelevanceMatrix,
    groups: GroupPartition,
    pi: PositionWeights,
    weights: Vec<f64>,
}

fn random_instance(rng: &mut RandomSource, n: usize, users: usize, m: usize) -> Instance {
    let rows: Vec<Vec<f64>> = (0..users).map(|_| (0..n).map(|_| rng.uniform()).collect()).collect();
    // First m items seed the groups so none is empty.
    let labels: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.index(m) }).collect();
    Instance {
        rel: RelevanceMatrix::from_rows(&rows).unwrap(),
        groups: GroupPartition::new(labels, m).unwrap(),
        pi: PositionWeights::dcg(n).unwrap(),
        weights: (0..users).map(|_| rng.uniform_in(0.5, 2.0)).collect(),
    }
}

#[test]
fn slack_constraints_match_best_profile() {
    let mut rng = RandomSource::new(31);
    for _ in 0..25 {
        let (n, users, m) = (2 + rng.index(3), 1 + rng.index(2), 1 + rng.index(2));
        let inst = random_instance(&mut rng, n, users, m);
        let best = profiles(n, users)
            .iter()
            .map(|p| aggregate_utility_weighted(p, &inst.weights, &inst.rel, &inst.pi).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let out = fair_rank(&inst.rel, &inst.groups, &inst.pi, &FairnessConstraint::none(m), &inst.weights, &mut rng).unwrap();
        assert!((out.objective_value - best).abs() < 1e-9, "{} vs {best}", out.objective_value);
    }
}

/// With a single binding floor the optimum mixes at most two profiles.
fn two_point_oracle(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut offer = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
    for &(u, e) in points {
        if e >= floor {
            offer(u);
        }
    }
    for &(u1, e1) in points.iter().filter(|p| p.1 >= floor) {
        for &(u2, e2) in points.iter().filter(|p| p.1 < floor) {
            let lambda = (floor - e2) / (e1 - e2);
            offer(lambda * u1 + (1.0 - lambda) * u2);
        }
    }
    best
}

#[test]
fn single_floor_matches_profile_mixtures() {
    let mut rng = RandomSource::new(32);
    let mut checked = 0;
    for _ in 0..30 {
        let (n, users) = (3 + rng.index(2), 1 + rng.index(2));
        let inst = random_instance(&mut rng, n, users, 2);
        let points: Vec<(f64, f64)> = profiles(n, users)
            .iter()
            .map(|p| {
                (
                    aggregate_utility_weighted(p, &inst.weights, &inst.rel, &inst.pi).unwrap(),
                    group_exposure_weighted(p, &inst.weights, &inst.groups, &inst.pi, 1).unwrap(),
                )
            })
            .collect();
        let max_e = points.iter().map(|p| p.1).fold(0.0, f64::max);
        let floor = rng.uniform_in(0.0, max_e);
        let c = FairnessConstraint::new(ConstraintKind::ExposureFloor, vec![0.0, floor]).unwrap();
        let expected = two_point_oracle(&points, floor).unwrap();
        let out = fair_rank(&inst.rel, &inst.groups, &inst.pi, &c, &inst.weights, &mut rng).unwrap();
        assert!((out.objective_value - expected).abs() < 1e-7, "{} vs {expected}", out.objective_value);
        assert!(out.exposures[1] >= floor - 1e-7);
        checked += 1;
    }
    assert_eq!(checked, 30);
}

#[test]
fn price_of_fairness_is_monotone() {
    let mut rng = RandomSource::new(33);
    for _ in 0..10 {
        let inst = random_instance(&mut rng, 4, 2, 2);
        // Group j can reach at most the top |G_j| position weights.
        let reach = |j: usize| inst.pi.as_slice()[..inst.groups.members(j).count()].iter().sum::<f64>();
        let cap = reach(0).min(reach(1)).min(inst.pi.total() / 2.0);
        let mut last = f64::INFINITY;
        for k in 0..=8 {
            let eps = cap * k as f64 / 8.0;
            let c = FairnessConstraint::uniform(ConstraintKind::ExposureFloor, 2, eps).unwrap();
            let out = fair_rank(&inst.rel, &inst.groups, &inst.pi, &c, &inst.weights, &mut rng).unwrap();
            assert!(out.objective_value <= last + 1e-9);
            assert!(out.exposures.iter().all(|e| *e >= eps - 1e-7));
            last = out.objective_value;
        }
    }
}

#[test]
fn relabeling_items_keeps_objective() {
    let mut rng = RandomSource::new(34);
    let inst = random_instance(&mut rng, 4, 2, 2);
    let perm = [2, 0, 3, 1];
    let rows: Vec<Vec<f64>> = (0..2).map(|u| perm.iter().map(|&i| inst.rel.get(u, i)).collect()).collect();
    let labels: Vec<usize> = perm.iter().map(|&i| inst.groups.group_of(i)).collect();
    let c = FairnessConstraint::uniform(ConstraintKind::ExposureFloor, 2, 0.9).unwrap();
    let a = fair_rank(&inst.rel, &inst.groups, &inst.pi, &c, &inst.weights, &mut rng).unwrap();
    let b = fair_rank(
        &RelevanceMatrix::from_rows(&rows).unwrap(),
        &GroupPartition::new(labels, 2).unwrap(),
        &inst.pi,
        &c,
        &inst.weights,
        &mut rng,
    )
    .unwrap();
    assert!((a.objective_value - b.objective_value).abs() < 1e-9);
}

#[test]
fn sampled_exposure_is_unbiased() {
    let rel = RelevanceMatrix::from_rows(&[vec![1.0, 0.8, 0.3, 0.1]]).unwrap();
    let groups = GroupPartition::new(vec![0, 0, 1, 1], 2).unwrap();
    let pi = PositionWeights::dcg(4).unwrap();
    let floor = 0.45 * pi.total();
    let c = FairnessConstraint::uniform(ConstraintKind::ExposureFloor, 2, floor).unwrap();
    let mut rng = RandomSource::new(35);
    let out = fair_rank(&rel, &groups, &pi, &c, &[1.0], &mut rng).unwrap();
    assert!(out.decompositions[0].terms().len() > 1);

    let draws = 10_000;
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let r = sample_ranking(&out.decompositions[0], &mut rng);
            r.items().iter().enumerate().filter(|(_, &i)| groups.group_of(i) == 1).map(|(k, _)| pi.get(k)).sum()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - out.exposures[1]).abs() < 3.0 * se, "{mean} vs {}", out.exposures[1]);
}

#[test]
fn floors_beat_uniform_randomization() {
    // Two stance groups. A policy that mixes the relevance sort with a
    // uniformly random ranking at rate eps meets the floor; the LP does at least as well.
    let rel = RelevanceMatrix::from_rows(&[vec![0.9, 0.8, 0.2, 0.1], vec![0.7, 0.9, 0.3, 0.0]]).unwrap();
    let groups = GroupPartition::new(vec![0, 0, 1, 1], 2).unwrap();
    let pi = PositionWeights::dcg(4).unwrap();
    let w = [1.0, 1.0];
    let eps_mix = 0.6;
    let sorted: Vec<RankedList> = (0..2).map(|u| RankedList::by_scores(&rel.row(u))).collect();
    let all = permutations(4);
    let uniform_u: f64 = (0..2)
        .map(|u| all.iter().map(|p| p.iter().enumerate().map(|(k, &i)| pi.get(k) * rel.get(u, i)).sum::<f64>()).sum::<f64>() / 24.0)
        .sum();
    let sorted_u = aggregate_utility_weighted(&sorted, &w, &rel, &pi).unwrap();
    let sorted_e = group_exposure_weighted(&sorted, &w, &groups, &pi, 1).unwrap();
    let mix_u = (1.0 - eps_mix) * sorted_u + eps_mix * uniform_u;
    let mix_e = (1.0 - eps_mix) * sorted_e + eps_mix * pi.total() / 2.0;

    let c = FairnessConstraint::new(ConstraintKind::ExposureFloor, vec![0.0, mix_e]).unwrap();
    let out = fair_rank(&rel, &groups, &pi, &c, &w, &mut RandomSource::new(1)).unwrap();
    assert!(out.exposures[1] >= mix_e - 1e-7);
    assert!(out.objective_value > mix_u);
}
