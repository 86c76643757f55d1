use serde::Serialize;

use gifting::dynamics::{basin_sweep_pair, frequency_sweep, grid_axis, phase_portrait, BasinGrid};
use gifting::equilibrium::{classify_equilibria, verify_gift_pne_mapping, GiftMappingVerdict, PneSet};
use gifting::experiments::{convergence_table, risk_gift_sweep, transient_trace, Arm, MAX_FAILURE_RATE};
use gifting::game::{coordination_game, extend_with_gifting, GameDocument, GiftSet, NormalFormGame};
use gifting::learner::{train_run, OutcomeClass, RunOutcome, TraceLevel, Traces};
use gifting::{Error, Result};

use crate::config::CliConfig;
use crate::report::{num, opt, Report};

/// How a command finished when it did not error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Too many failed runs or cells.
    Unhealthy,
}

fn health(failed_share: f64) -> Status {
    if failed_share > MAX_FAILURE_RATE {
        Status::Unhealthy
    } else {
        Status::Ok
    }
}

fn base_game(cfg: &CliConfig) -> Result<NormalFormGame> {
    match &cfg.game.file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            GameDocument::from_toml(&text)?.base_game()
        }
        None => {
            let kind = cfg.game.kind.coordination(cfg.game.r);
            coordination_game(kind, &kind.default_params())
        }
    }
}

/// Gift sets from the game file when it has them, otherwise `{0, gamma}` for everyone.
fn gift_set(cfg: &CliConfig, players: usize) -> Result<GiftSet> {
    if let Some(path) = &cfg.game.file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(sets) = GameDocument::from_toml(&text)?.gift_sets {
            return GiftSet::new(sets);
        }
    }
    GiftSet::uniform(players, cfg.game.gamma)
}

fn finish(report: &Report) {
    for path in report.written() {
        println!("wrote {}", path.display());
    }
}

#[derive(Serialize)]
struct EquilibriaReport {
    base: PneSet,
    gifted: PneSet,
    mapping: GiftMappingVerdict,
}

fn print_pne(title: &str, set: &PneSet) {
    println!("{title}: {} pure equilibria", set.len());
    for p in &set.profiles {
        let mut flags = Vec::new();
        if p.prosocial {
            flags.push("prosocial");
        }
        if p.payoff_dominant {
            flags.push("payoff-dominant");
        }
        if p.risk_dominant {
            flags.push("risk-dominant");
        }
        let payoffs: Vec<String> = p.payoffs.iter().map(|&v| num(v)).collect();
        let product = p.nash_product.map(num).unwrap_or_else(|| "-".into());
        println!(
            "  ({})  payoffs [{}]  total {}  nash product {}  {}",
            p.labels.join(", "),
            payoffs.join(", "),
            num(p.total),
            product,
            flags.join(" ")
        );
    }
}

pub fn equilibria(cfg: &CliConfig) -> Result<Status> {
    let base = base_game(cfg)?;
    let gifts = gift_set(cfg, base.num_players())?;
    let gifted = extend_with_gifting(&base, &gifts)?;
    let out = EquilibriaReport {
        base: classify_equilibria(&base),
        gifted: classify_equilibria(gifted.game()),
        mapping: verify_gift_pne_mapping(&base, &gifts)?,
    };
    print_pne("base game", &out.base);
    print_pne("gifted game", &out.gifted);
    let verdict = if out.mapping.holds { "holds" } else { "FAILS" };
    println!("gifted equilibria = base equilibria with zero gifts: {verdict}");
    let mut report = Report::new("equilibria", cfg)?;
    report.json("equilibria.json", &out)?;
    report.config_echo()?;
    finish(&report);
    Ok(Status::Ok)
}

fn basin_rows(grid: &BasinGrid) -> impl Iterator<Item = Vec<String>> + '_ {
    grid.cells.iter().map(|c| {
        vec![
            num(c.d1),
            num(c.d2),
            c.samples.to_string(),
            c.prosocial.to_string(),
            c.risk_dominant.to_string(),
            c.other_pne.to_string(),
            c.unconverged.to_string(),
            c.failed.to_string(),
            num(c.fraction()),
        ]
    })
}

const BASIN_COLUMNS: [&str; 9] = [
    "d1",
    "d2",
    "samples",
    "prosocial",
    "risk_dominant",
    "other_pne",
    "unconverged",
    "failed",
    "fraction",
];

pub fn basin(cfg: &CliConfig) -> Result<Status> {
    let base = base_game(cfg)?;
    let d = &cfg.dynamics;
    let (plain, gifted) = basin_sweep_pair(&base, cfg.game.gamma, d.resolution, d.gift_samples, &d.flow)?;
    let mut report = Report::new("dynamics basin", cfg)?;
    report.csv("basin_ungifted.csv", &BASIN_COLUMNS, basin_rows(&plain))?;
    report.csv("basin_gifted.csv", &BASIN_COLUMNS, basin_rows(&gifted))?;
    report.config_echo()?;
    println!(
        "prosocial fraction: ungifted {:.4}, gifted {:.4} (unconverged {:.4} / {:.4}, failed {:.4} / {:.4})",
        plain.aggregate_fraction(),
        gifted.aggregate_fraction(),
        plain.unconverged_fraction(),
        gifted.unconverged_fraction(),
        plain.failed_fraction(),
        gifted.failed_fraction()
    );
    finish(&report);
    Ok(health(plain.failed_fraction().max(gifted.failed_fraction())))
}

pub fn frequency(cfg: &CliConfig) -> Result<Status> {
    let d = &cfg.dynamics;
    let rows = frequency_sweep(&d.r_values, &d.gammas, d.resolution, d.gift_samples, &d.flow)?;
    let mut report = Report::new("dynamics freq", cfg)?;
    report.csv(
        "frequency.csv",
        &["r", "gamma", "frequency", "unconverged", "failed"],
        rows.iter().map(|row| {
            vec![
                num(row.r),
                row.gamma.map(num).unwrap_or_else(|| "none".into()),
                num(row.frequency),
                num(row.unconverged),
                num(row.failed),
            ]
        }),
    )?;
    report.config_echo()?;
    for &r in &d.r_values {
        let line: Vec<String> = rows
            .iter()
            .filter(|row| row.r == r)
            .map(|row| match row.gamma {
                None => format!("base {:.3}", row.frequency),
                Some(g) => format!("{g}:{:.3}", row.frequency),
            })
            .collect();
        println!("r={r}: {}", line.join(" "));
    }
    finish(&report);
    Ok(health(rows.iter().map(|r| r.failed).fold(0.0, f64::max)))
}

pub fn portrait(cfg: &CliConfig) -> Result<Status> {
    let base = base_game(cfg)?;
    let gifted = extend_with_gifting(&base, &gift_set(cfg, base.num_players())?)?;
    let d = &cfg.dynamics;
    let points = phase_portrait(&gifted, &d.gift_offsets, &grid_axis(d.resolution))?;
    let mut report = Report::new("dynamics portrait", cfg)?;
    report.csv(
        "portrait.csv",
        &["d1", "d2", "dx", "dy", "magnitude"],
        points
            .iter()
            .map(|p| vec![num(p.d1), num(p.d2), num(p.dx), num(p.dy), num(p.magnitude)]),
    )?;
    report.config_echo()?;
    println!("{} field points", points.len());
    finish(&report);
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct TrainReport<'a> {
    environment: String,
    arm: Arm,
    seed: u64,
    policies: &'a [Vec<usize>],
    outcome: &'a RunOutcome,
    episodes: u64,
    env_steps: u64,
    opt_steps: u64,
    gift_start: Option<f64>,
    gift_end: Option<f64>,
    env_gift_end: Option<f64>,
}

fn trace_rows(traces: &Traces) -> impl Iterator<Item = Vec<String>> + '_ {
    traces.records.iter().map(|r| {
        let mut row = vec![r.episode.to_string(), r.step.to_string(), num(r.epsilon)];
        row.extend(r.actions.iter().map(|a| a.to_string()));
        row.extend(r.rewards.iter().map(|&v| num(v)));
        row.push(opt(r.batch_gift));
        row
    })
}

pub fn train(cfg: &CliConfig) -> Result<Status> {
    let spec = cfg.run.env.spec(cfg.game.r, cfg.run.horizon);
    let arm = cfg.game.arm();
    let env = spec.build(arm)?;
    let mut train = cfg.train_for(&spec);
    train.trace = TraceLevel::Full;
    let result = train_run(&env, &train, cfg.run.seed)?;
    let t = &result.traces;
    let mut report = Report::new("train", cfg)?;
    report.json(
        "run.json",
        &TrainReport {
            environment: format!("{:?}", cfg.run.env),
            arm,
            seed: cfg.run.seed,
            policies: &result.policies,
            outcome: &result.outcome,
            episodes: t.episodes,
            env_steps: t.env_steps,
            opt_steps: t.opt_steps,
            gift_start: t.gift_start,
            gift_end: t.gift_end,
            env_gift_end: t.env_gift_end,
        },
    )?;
    let n = env.num_agents();
    let mut columns = vec!["episode".to_string(), "step".into(), "epsilon".into()];
    columns.extend((0..n).map(|i| format!("action_{i}")));
    columns.extend((0..n).map(|i| format!("reward_{i}")));
    columns.push("batch_gift".into());
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    report.csv("trace.csv", &columns, trace_rows(t))?;
    report.config_echo()?;
    println!(
        "outcome {:?}, rollout {:?}, gifting {}",
        result.outcome.class, result.outcome.rollout, result.outcome.gifting
    );
    if let Some(e) = &result.outcome.error {
        eprintln!("run failed: {e}");
    }
    finish(&report);
    Ok(if result.outcome.class == OutcomeClass::Failed {
        Status::Unhealthy
    } else {
        Status::Ok
    })
}

pub fn table2(cfg: &CliConfig) -> Result<Status> {
    let result = convergence_table(&cfg.study_spec())?;
    let mut report = Report::new("study table2", cfg)?;
    report.csv(
        "table2.csv",
        &[
            "environment",
            "arm",
            "gamma",
            "runs",
            "prosocial",
            "risk_dominant",
            "other_pne",
            "unconverged",
            "failed",
            "prosocial_rate",
            "ci_low",
            "ci_high",
            "pne_rate",
            "seconds",
        ],
        result.rows.iter().map(|r| {
            let c = r.counts;
            vec![
                r.environment.clone(),
                r.arm.label(),
                num(r.arm.gamma()),
                c.total().to_string(),
                c.prosocial.to_string(),
                c.risk_dominant.to_string(),
                c.other_pne.to_string(),
                c.unconverged.to_string(),
                c.failed.to_string(),
                num(r.prosocial_rate),
                num(r.ci_low),
                num(r.ci_high),
                num(r.pne_rate),
                format!("{:.3}", r.seconds),
            ]
        }),
    )?;
    report.json("table2.json", &result)?;
    report.config_echo()?;
    println!("{:<22} {:<10} {:>9} {:>17} {:>8}", "environment", "arm", "prosocial", "95% CI", "PNE");
    for r in &result.rows {
        println!(
            "{:<22} {:<10} {:>8.1}% {:>7.1}%-{:>6.1}% {:>7.1}%",
            r.environment,
            r.arm.label(),
            100.0 * r.prosocial_rate,
            100.0 * r.ci_low,
            100.0 * r.ci_high,
            100.0 * r.pne_rate
        );
    }
    println!("failed runs {:.2}% in {:.1}s", 100.0 * result.failure_rate(), result.seconds);
    finish(&report);
    Ok(health(result.failure_rate()))
}

pub fn risk_gift(cfg: &CliConfig) -> Result<Status> {
    let s = &cfg.study;
    let result = risk_gift_sweep(&s.r_values, &s.gammas, s.seeds, cfg.study_seed, &cfg.train, cfg.workers)?;
    let mut report = Report::new("study risk-gift", cfg)?;
    let mut columns = vec!["r".to_string(), "baseline".into()];
    columns.extend(result.gammas.iter().map(|g| format!("gamma_{g}")));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = result
        .r_values
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut row = vec![num(r), num(result.baseline[i])];
            row.extend(result.rates[i].iter().map(|&v| num(v)));
            row
        })
        .collect();
    report.csv("risk_gift.csv", &columns, rows)?;
    report.json("risk_gift.json", &result)?;
    report.config_echo()?;
    for (i, &r) in result.r_values.iter().enumerate() {
        let cells: Vec<String> = result
            .gammas
            .iter()
            .zip(&result.rates[i])
            .map(|(g, v)| format!("{g}:{:.1}%", 100.0 * v))
            .collect();
        println!("r={r}: base {:.1}% {}", 100.0 * result.baseline[i], cells.join(" "));
    }
    finish(&report);
    Ok(health(result.study.failure_rate()))
}

pub fn transient(cfg: &CliConfig) -> Result<Status> {
    let result = transient_trace(&cfg.transient_spec())?;
    let mut report = Report::new("study transient", cfg)?;
    report.csv(
        "transient.csv",
        &[
            "seed",
            "class",
            "gift_start",
            "gift_end",
            "env_gift_end",
            "transient_shape",
        ],
        result.runs.iter().map(|r| {
            vec![
                r.seed.to_string(),
                format!("{:?}", r.class),
                opt(r.gift_start),
                opt(r.gift_end),
                opt(r.env_gift_end),
                r.transient_shape.to_string(),
            ]
        }),
    )?;
    let block = cfg.transient.curve_block.max(1);
    report.csv(
        "transient_curves.csv",
        &["seed", "opt_step", "batch_gift"],
        result.runs.iter().flat_map(|r| {
            r.curve
                .iter()
                .enumerate()
                .map(move |(k, &v)| vec![r.seed.to_string(), (k * block).to_string(), num(v)])
        }),
    )?;
    report.json("transient.json", &result)?;
    report.config_echo()?;
    let failed = result.runs.iter().filter(|r| r.class == OutcomeClass::Failed).count();
    println!(
        "{} runs, {} with the transient shape, converged runs stop gifting: {}",
        result.runs.len(),
        result.shaped_runs(),
        result.converged_runs_stop_gifting()
    );
    finish(&report);
    Ok(health(failed as f64 / result.runs.len() as f64))
}
