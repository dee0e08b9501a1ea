//! One function per experiment: resolved config in, artifacts and a short
//! `key=value` summary out. Nothing touches the filesystem except input loading.

use fairloop_core::controller::{hard_floor_baseline, run_horizon, TOL_TRACK};
use fairloop_core::creators::epsilon_sweep;
use fairloop_core::io::{load_groups, load_relevance, load_stream};
use fairloop_core::longterm::{compare, Rollout};
use fairloop_core::optimizer::{fair_rank, FairnessConstraint};
use fairloop_core::user_dynamics::{run_opinion_sim, run_population_sim, tradeoff_sweep, OpinionParams, PopulationParams};
use fairloop_core::{GroupPartition, PositionWeights, RandomSource, RankedList, RelevanceMatrix};
use serde_json::json;

use crate::config::{
    ControllerConfig, CreatorsConfig, ExperimentConfig, LongtermConfig, Params, RankConfig, Source, TradeoffConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{json_artifact, numbered, real, Artifact, CsvTable};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
}

pub fn execute(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut rng = RandomSource::new(cfg.seed);
    match &cfg.params {
        Params::Opinion(p) => opinion(p, &mut rng),
        Params::Tradeoff(p) => tradeoff(p, &rng),
        Params::Population(p) => population(p, &mut rng),
        Params::Creators(p) => creators(p),
        Params::Controller(p) => controller(p),
        Params::Longterm(p) => longterm(p),
        Params::Rank(p) => rank(p, &mut rng),
    }
}

fn opinion(p: &OpinionParams, rng: &mut RandomSource) -> CliResult<Outcome> {
    let traj = run_opinion_sim(p, rng)?;
    // Row t carries x_t and the engagement of the step that produced it.
    let mut users = CsvTable::new(&["t", "user_id", "x", "engagement"])?;
    let mut steps = CsvTable::new(&["t", "mean_engagement", "polarization"])?;
    for (t, x) in traj.x.iter().enumerate() {
        for (u, xu) in x.iter().enumerate() {
            let eng = if t == 0 { String::new() } else { real(traj.engagement[t - 1][u]) };
            users.row(&[t.to_string(), u.to_string(), real(*xu), eng])?;
        }
        let mean = if t == 0 { String::new() } else { real(traj.mean_engagement[t - 1]) };
        steps.row(&[t.to_string(), mean, real(traj.polarization[t])])?;
    }
    Ok(Outcome {
        artifacts: vec![users.finish("opinion_trajectory.csv")?, steps.finish("opinion_steps.csv")?],
        summary: vec![
            format!("final_polarization={}", real(traj.final_polarization())),
            format!("mean_engagement={}", real(traj.time_averaged_engagement())),
        ],
    })
}

fn tradeoff(p: &TradeoffConfig, master: &RandomSource) -> CliResult<Outcome> {
    let rows = tradeoff_sweep(&p.epsilon_grid, &p.params(), master)?;
    let mut t = CsvTable::new(&["epsilon", "mean_eng", "sd_eng", "mean_pol", "sd_pol"])?;
    for r in &rows {
        t.row(&[real(r.epsilon), real(r.mean_eng), real(r.sd_eng), real(r.mean_pol), real(r.sd_pol)])?;
    }
    Ok(Outcome {
        artifacts: vec![t.finish("tradeoff.csv")?],
        summary: vec![format!("rows={}", rows.len()), format!("trials={}", p.trials)],
    })
}

fn population(p: &PopulationParams, rng: &mut RandomSource) -> CliResult<Outcome> {
    let counts = run_population_sim(p, rng)?;
    let mut t = CsvTable::new(&["t", "group", "count"])?;
    for (step, c) in counts.iter().enumerate() {
        for (g, n) in c.iter().enumerate() {
            t.row(&[step.to_string(), g.to_string(), n.to_string()])?;
        }
    }
    let last = counts.last().expect("trajectory holds t = 0");
    Ok(Outcome {
        artifacts: vec![t.finish("population.csv")?],
        summary: vec![format!("final_share_0={}", real(last[0] as f64 / p.n as f64))],
    })
}

fn creators(p: &CreatorsConfig) -> CliResult<Outcome> {
    let market = p.market.build()?;
    let grid = p.epsilon_grid.clone().unwrap_or_else(|| p.constraint.default_grid());
    let records = epsilon_sweep(&market, p.constraint, &grid)?;
    let (n, g) = (market.n_creators(), market.n_groups());
    let mut header = vec!["epsilon".to_string()];
    header.extend(numbered("exp", n));
    header.extend(numbered("p", n));
    header.push("utility".into());
    header.extend(numbered("fut_u", g));
    header.push("status".into());
    let mut t = CsvTable::new(&header)?;
    for r in &records {
        let mut row = vec![real(r.epsilon)];
        row.extend(r.exposures.iter().map(|x| real(*x)));
        row.extend(r.retention.iter().map(|x| real(*x)));
        row.push(real(r.utility));
        row.extend(r.future_utility.iter().map(|x| real(*x)));
        row.push(serde_json::to_value(r.status).expect("status").as_str().unwrap_or_default().to_string());
        t.row(&row)?;
    }
    let feasible: Vec<_> = records.iter().filter(|r| r.is_optimal()).collect();
    let total = market.total_users();
    let summary = json!({
        "constraint": p.constraint.name(),
        "total_users": total,
        "grid_points": records.len(),
        "feasible_points": feasible.len(),
        "max_feasible_epsilon": feasible.last().map(|r| r.epsilon),
        "records": records.iter().map(|r| json!({
            "epsilon": r.epsilon,
            "status": r.status,
            "utility_per_user": if r.is_optimal() { Some(r.utility / total) } else { None },
        })).collect::<Vec<_>>(),
    });
    let name = format!("creators_{}", p.constraint.name());
    Ok(Outcome {
        artifacts: vec![t.finish(&format!("{name}.csv"))?, json_artifact("creators_summary.json", &summary)?],
        summary: vec![
            format!("constraint={}", p.constraint.name()),
            format!("feasible_points={}/{}", feasible.len(), records.len()),
        ],
    })
}

fn labels(src: &Source<Vec<usize>>) -> CliResult<GroupPartition> {
    Ok(match src {
        Source::Path(p) => load_groups(p)?,
        Source::Inline(v) => GroupPartition::from_labels(v.clone())?,
    })
}

/// Leading positions with positive weight, at least one.
fn visible_slots(pi: &PositionWeights) -> usize {
    pi.as_slice().iter().take_while(|w| **w > 0.0).count().max(1)
}

/// Users separated by `;`, items within a user by spaces.
fn format_topk(rankings: &[RankedList], k: usize) -> String {
    rankings
        .iter()
        .map(|r| r.items()[..k.min(r.len())].iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(";")
}

fn controller(p: &ControllerConfig) -> CliResult<Outcome> {
    let stream: Vec<RelevanceMatrix> = match &p.stream {
        Source::Path(path) => load_stream(path)?,
        Source::Inline(steps) => steps.iter().map(|rows| RelevanceMatrix::from_rows(rows)).collect::<Result<_, _>>()?,
    };
    let groups = GroupPartition::from_labels(p.groups.clone())?;
    let pi = PositionWeights::from_vec(p.pi.clone())?;
    let horizon = stream.len();
    let run = run_horizon(&stream, &groups, &pi, &p.targets, p.gain, horizon, p.mode)?;
    let m = groups.n_groups();
    let k = visible_slots(&pi);

    let mut header = vec!["t".to_string()];
    header.extend(numbered("s", m));
    header.extend(numbered("boost", m));
    header.push("topk".into());
    header.push("utility".into());
    let mut t = CsvTable::new(&header)?;
    for s in &run.steps {
        let mut row = vec![s.t.to_string()];
        row.extend(s.s.iter().map(|x| real(*x)));
        row.extend(s.boost.iter().map(|x| real(*x)));
        row.push(format_topk(&s.rankings, k));
        row.push(real(s.utility));
        t.row(&row)?;
    }
    // The hard-floor comparison is informative only; an infeasible per-step floor is reported, not fatal.
    let baseline = match hard_floor_baseline(&stream, &groups, &pi, &p.targets, horizon) {
        Ok(v) => Some(v.iter().sum::<f64>()),
        Err(fairloop_core::Error::Infeasible) => None,
        Err(e) => return Err(e.into()),
    };
    let met = run.tracker.targets_met(TOL_TRACK);
    let summary = json!({
        "mode": p.mode,
        "horizon": horizon,
        "targets": p.targets,
        "cumulative_exposure": run.tracker.s,
        "shortfall": run.tracker.shortfall(),
        "targets_met": met,
        "total_utility": run.total_utility(),
        "hard_floor_utility": baseline,
        "final_lambda": run.dual.as_ref().map(|d| d.lambda.clone()),
    });
    Ok(Outcome {
        artifacts: vec![t.finish("controller.csv")?, json_artifact("controller_summary.json", &summary)?],
        summary: vec![
            format!("targets_met={met}"),
            format!("total_utility={}", real(run.total_utility())),
            format!("hard_floor_utility={}", baseline.map_or("infeasible".to_string(), real)),
        ],
    })
}

fn trajectory(r: &Rollout, name: &str) -> CliResult<Artifact> {
    let m = r.v[0].len();
    let mut header = vec!["t".to_string()];
    header.extend(numbered("v", m));
    header.extend(numbered("beta", m));
    header.push("reward".into());
    let mut t = CsvTable::new(&header)?;
    for (step, ((v, b), rew)) in r.v.iter().zip(&r.beta).zip(&r.reward).enumerate() {
        let mut row = vec![step.to_string()];
        row.extend(v.iter().map(|x| real(*x)));
        row.extend(b.iter().map(|x| real(*x)));
        row.push(real(*rew));
        t.row(&row)?;
    }
    t.finish(name)
}

fn longterm(p: &LongtermConfig) -> CliResult<Outcome> {
    let spec = p.spec();
    spec.validate(p.v0.len())?;
    let report = compare(&spec, &p.v0)?;
    let terminal_gap_v1 = report.terminal_farsighted[0] - report.terminal_myopic[0];
    let summary = json!({
        "myopic_value": report.myopic.value,
        "farsighted_value": report.farsighted.value,
        "farsighted_beta": report.farsighted_beta,
        "value_gap": report.value_gap,
        "terminal_myopic": report.terminal_myopic,
        "terminal_farsighted": report.terminal_farsighted,
        "terminal_gap_v1": terminal_gap_v1,
    });
    Ok(Outcome {
        artifacts: vec![
            json_artifact("longterm_report.json", &summary)?,
            trajectory(&report.myopic, "longterm_myopic.csv")?,
            trajectory(&report.farsighted, "longterm_farsighted.csv")?,
        ],
        summary: vec![
            format!("value_gap={}", real(report.value_gap)),
            format!("terminal_gap_v1={}", real(terminal_gap_v1)),
        ],
    })
}

fn rank(p: &RankConfig, rng: &mut RandomSource) -> CliResult<Outcome> {
    let rel = match &p.relevance {
        Source::Path(path) => load_relevance(path)?,
        Source::Inline(rows) => RelevanceMatrix::from_rows(rows)?,
    };
    let groups = labels(&p.groups)?;
    let n = rel.n_items();
    let pi = match (&p.pi, p.top_k) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either pi or top_k, not both".into())),
        (Some(v), None) => PositionWeights::from_vec(v.clone())?,
        (None, Some(k)) => PositionWeights::top_k(n, k)?,
        (None, None) => PositionWeights::dcg(n)?,
    };
    let m = groups.n_groups();
    let eps = match p.epsilon.len() {
        1 => vec![p.epsilon[0]; m],
        len if len == m => p.epsilon.clone(),
        len => return Err(CliError::Config(format!("{len} epsilon values for {m} groups"))),
    };
    let constraint = FairnessConstraint::new(p.constraint, eps)?;
    let weights = p.weights.clone().unwrap_or_else(|| vec![1.0; rel.n_users()]);
    let out = fair_rank(&rel, &groups, &pi, &constraint, &weights, rng)?;
    let report = json!({
        "objective_value": out.objective_value,
        "exposures": out.exposures,
        "constraint": p.constraint,
        "constraint_values": out.constraint_values,
        "rankings": out.rankings.iter().map(|r| r.items().to_vec()).collect::<Vec<_>>(),
        "decomposition_terms": out.decompositions.iter().map(|d| d.terms().len()).collect::<Vec<_>>(),
        "policies": out.policies.iter().map(|s| s.matrix().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        artifacts: vec![json_artifact("ranking.json", &report)?],
        summary: vec![
            format!("objective={}", out.objective_value),
            format!("exposures={}", out.exposures.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")),
        ],
    })
}
