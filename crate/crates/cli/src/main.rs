use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use saltlab::attacks::{combined_attack, monte_carlo_advantage, AttackFamily, AttackParams};
use saltlab::bounds::{
    composition_count, distinct_count_moment, inversion_bound, salting_bound,
    salting_bound_large_advice, salting_bound_mult,
};
use saltlab::composition::{
    exact_win_probability, memoryless_win_probability, reduce_to_fair, MemorylessAlgorithm,
    ProductGame,
};
use saltlab::game::{build_game, Family, GameSpec};
use saltlab::qsim::{
    bounded_database_check, compare_with_standard_oracle, g_h_transition_check,
    lazy_sampling_check, path_decomposition, threshold_experiment, transition_capacity_check,
    unitarity_check, CircuitDescription, Dims, OracleKind, PropertySpec, Relation,
};
use saltlab::ratio::{parse_rational, to_json};
use saltlab::solver::{multi_challenge_value, optimal_nonuniform, optimal_strategy, optimal_value};
use saltlab::suite::{run_criterion, run_suite, CRITERIA};
use saltlab::{Budget, Error, Rational};

#[derive(Parser)]
#[command(
    name = "saltlab",
    version,
    about = "Exact and simulated experiments on salted query games"
)]
struct Cli {
    /// Write the payload here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the full run manifest (parameters, version, timing) here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal T-query winning probability.
    Eps(EpsArgs),
    /// Optimal value of the n-challenge game with n*T queries.
    EpsMulti(EpsMultiArgs),
    /// Optimal value with S bits of advice.
    EpsNonuniform(EpsNonuniformArgs),
    /// Evaluate a closed-form bound.
    Bound(BoundArgs),
    /// Monte Carlo estimate of the lookup-plus-online attack.
    Attack(AttackArgs),
    /// Reduce a memoryless algorithm to a fair executor.
    Reduce(ReduceArgs),
    /// Compressed-oracle checks.
    Qsim(QsimArgs),
    /// Run the acceptance battery.
    Suite(SuiteArgs),
}

#[derive(Args, Serialize)]
struct GameArgs {
    /// JSON game spec file; overrides the family flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<u32>,
    #[arg(long = "K", default_value_t = 1)]
    salts: usize,
    /// Arity for ksum.
    #[arg(long = "k")]
    k: Option<usize>,
}

impl GameArgs {
    fn spec(&self) -> anyhow::Result<GameSpec> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return Ok(GameSpec::from_json(&text)?);
        }
        let (Some(family), Some(m), Some(n)) = (&self.family, self.m, self.n) else {
            return Err(usage("need --spec or all of --family, --M, --N"));
        };
        let mut spec = GameSpec::new(Family::parse(family)?, m, n).salted(self.salts);
        spec.k = self.k;
        Ok(spec)
    }
}

#[derive(Args, Serialize)]
struct EpsArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long = "T")]
    t: usize,
    /// Include an optimal strategy tree.
    #[arg(long)]
    strategy: bool,
}

#[derive(Args, Serialize)]
struct EpsMultiArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Number of challenges.
    #[arg(long)]
    n_challenges: usize,
    /// Queries per challenge.
    #[arg(long = "T")]
    t: usize,
}

#[derive(Args, Serialize)]
struct EpsNonuniformArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long = "S")]
    s: u32,
    #[arg(long = "T")]
    t: usize,
    /// Include the advice assignment.
    #[arg(long)]
    advice: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BoundName {
    Salting,
    SaltingMult,
    LargeAdvice,
    Inversion,
    Moment,
    Compositions,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    #[arg(long, value_enum)]
    name: BoundName,
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated values of the n-challenge game for n = 0, 1, ...
    #[arg(long)]
    eps_multi: Option<String>,
    /// Derive eps or eps_multi from this game family with --M/--N instead.
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<u64>,
    #[arg(long = "S", default_value_t = 0)]
    s: u32,
    #[arg(long = "T", default_value_t = 1)]
    t: u64,
    #[arg(long = "K")]
    k: Option<u64>,
    #[arg(long = "L")]
    l: Option<u64>,
    #[arg(long = "Lmax", default_value_t = 64)]
    l_max: u32,
    /// Moment base.
    #[arg(long)]
    c: Option<String>,
    /// Constant standing in for the unstated one in the inversion fact.
    #[arg(long = "C", default_value = "1")]
    big_c: String,
}

#[derive(Args, Serialize)]
struct AttackArgs {
    #[arg(long)]
    family: String,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "N")]
    n: u32,
    #[arg(long = "S")]
    s: u64,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ReduceArgs {
    /// JSON file: {"games": [GameSpec...], "algorithm": {"programs": [...], "budgets": [...]}}.
    file: PathBuf,
    /// Emit traces only for the first this many oracle tuples.
    #[arg(long, default_value_t = 64)]
    max_traces: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum QsimCheck {
    Unitarity,
    Equivalence,
    BoundedDb,
    Transition,
    Paths,
    Threshold,
    Lemma5,
    Gh,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum OracleArg {
    Phase,
    Standard,
}

#[derive(Args, Serialize)]
struct QsimArgs {
    #[arg(long, value_enum)]
    check: QsimCheck,
    #[arg(long = "K", default_value_t = 1)]
    salts: usize,
    #[arg(long = "M", default_value_t = 2)]
    m: usize,
    #[arg(long = "N", default_value_t = 2)]
    n: u32,
    #[arg(long = "Z", default_value_t = 1)]
    z: usize,
    /// Queries per random circuit.
    #[arg(long = "T", default_value_t = 2)]
    t: usize,
    /// Random states or circuits per check.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// JSON circuit file; replaces the random circuits.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OracleArg::Phase)]
    oracle: OracleArg,
    /// collision, preimage_zero or ksumK.
    #[arg(long, default_value = "preimage_zero")]
    property: String,
    #[arg(long, default_value_t = 1)]
    kappa: usize,
    /// Salt whose transition is examined.
    #[arg(long, default_value_t = 0)]
    salt: usize,
    /// Database size bound before the query.
    #[arg(long, default_value_t = 1)]
    size: usize,
    /// Salts already successful (gh check), comma-separated.
    #[arg(long, default_value = "")]
    won: String,
    /// Constant for the threshold bound.
    #[arg(long = "C", default_value_t = 8.0)]
    big_c: f64,
}

#[derive(Args, Serialize)]
struct SuiteArgs {
    /// Run only these criteria (1-based), comma-separated.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    params: Value,
    seed: Option<u64>,
    version: &'static str,
    wall_time_s: f64,
    result: &'a Value,
}

/// A failure of the arguments rather than of the computation.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn rational_arg(s: &str, what: &str) -> anyhow::Result<Rational> {
    parse_rational(s).map_err(|_| usage(format!("{what}: cannot parse {s:?} as a rational")))
}

fn value_payload(v: &Rational) -> Value {
    let j = to_json(v);
    json!({ "value_num": j["num"], "value_den": j["den"] })
}

/// Payload plus whether every check in it passed.
type Outcome = (Value, bool);

fn eps(a: &EpsArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let game = build_game(&a.game.spec()?, budget)?;
    let mut out = value_payload(&optimal_value(&game, a.t));
    if a.strategy {
        out["strategy"] = serde_json::to_value(optimal_strategy(&game, a.t))?;
    }
    Ok((out, true))
}

fn eps_multi(a: &EpsMultiArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let game = build_game(&a.game.spec()?, budget)?;
    Ok((
        value_payload(&multi_challenge_value(&game, a.n_challenges, a.t, budget)?),
        true,
    ))
}

fn eps_nonuniform(a: &EpsNonuniformArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let game = build_game(&a.game.spec()?, budget)?;
    let sol = optimal_nonuniform(&game, a.s, a.t, budget)?;
    let mut out = value_payload(&sol.value);
    if a.advice {
        out["advice"] = json!(sol.advice);
    }
    Ok((out, true))
}

fn bound_eps_multi(a: &BoundArgs, budget: &Budget) -> anyhow::Result<Vec<Rational>> {
    if let Some(list) = &a.eps_multi {
        return list
            .split(',')
            .map(|s| rational_arg(s.trim(), "--eps-multi"))
            .collect();
    }
    let (Some(family), Some(m), Some(n)) = (&a.family, a.m, a.n) else {
        return Err(usage("need --eps-multi or --family with --M and --N"));
    };
    let game = build_game(&GameSpec::new(Family::parse(family)?, m, n as u32), budget)?;
    (0..=a.l_max as usize)
        .map(|i| multi_challenge_value(&game, i, a.t as usize, budget).map_err(Into::into))
        .collect()
}

fn bound(a: &BoundArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let need_k = || a.k.ok_or_else(|| usage("--K is required"));
    let need_l = || a.l.ok_or_else(|| usage("--L is required"));
    let report = match a.name {
        BoundName::Salting => {
            let eps = match (&a.eps, &a.family) {
                (Some(e), _) => rational_arg(e, "--eps")?,
                (None, Some(_)) => bound_eps_multi(a, budget)?
                    .get(1)
                    .cloned()
                    .ok_or_else(|| usage("empty eps list"))?,
                (None, None) => return Err(usage("need --eps or --family")),
            };
            salting_bound(&eps, a.s, a.t, need_k()?, a.l_max)?.to_json()
        }
        BoundName::SaltingMult => {
            salting_bound_mult(&bound_eps_multi(a, budget)?, a.s, a.t, need_k()?, a.l_max)?
                .to_json()
        }
        BoundName::LargeAdvice => {
            salting_bound_large_advice(&bound_eps_multi(a, budget)?, a.s, a.t, need_k()?, a.l_max)?
                .to_json()
        }
        BoundName::Inversion => {
            let n = a.n.ok_or_else(|| usage("--N is required"))?;
            inversion_bound(a.s, a.t, need_k()?, n, &rational_arg(&a.big_c, "--C")?)?.to_json()
        }
        BoundName::Moment => {
            let c = rational_arg(
                a.c.as_deref().ok_or_else(|| usage("--c is required"))?,
                "--c",
            )?;
            let r = distinct_count_moment(need_k()?, need_l()?, &c)?;
            json!({
                "name": "moment",
                "exact": to_json(&r.exact),
                "bound": to_json(&r.bound),
                "distribution": r.distribution.iter().map(to_json).collect::<Vec<_>>(),
                "holds": r.exact <= r.bound,
            })
        }
        BoundName::Compositions => {
            let r = composition_count(need_k()?, need_l()?)?;
            json!({
                "name": "compositions",
                "exact": r.exact.to_string(),
                "stirling_bound": to_json(&r.stirling_bound),
                "holds": Rational::from_integer(r.exact.clone()) <= r.stirling_bound,
            })
        }
    };
    let ok = report.get("holds").and_then(Value::as_bool).unwrap_or(true);
    Ok((report, ok))
}

fn attack(a: &AttackArgs) -> anyhow::Result<Outcome> {
    let family = AttackFamily::try_from(Family::parse(&a.family)?)?;
    let params = AttackParams {
        family,
        k: a.k,
        m: a.m,
        n: a.n,
        s: a.s,
        t: a.t,
    };
    let r = monte_carlo_advantage(&combined_attack(params)?, a.trials, a.seed)?;
    let mut out = serde_json::to_value(&r)?;
    out["capacity"] = json!(params.capacity());
    Ok((out, true))
}

fn reduce(a: &ReduceArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Input {
        games: Vec<GameSpec>,
        algorithm: MemorylessAlgorithm,
    }
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("reading {}", a.file.display()))?;
    let input: Input =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad reduce input: {e}")))?;
    let games = input
        .games
        .iter()
        .map(|s| build_game(s, budget))
        .collect::<saltlab::Result<Vec<_>>>()?;
    let product = ProductGame::new(games)?;
    let before = memoryless_win_probability(&input.algorithm, &product)?;
    let exec = reduce_to_fair(&input.algorithm, &product)?;
    let after = exact_win_probability(&exec)?;
    let mut traces = Vec::new();
    let mut fair = true;
    let mut err = None;
    product.for_each_tuple(|tuple, w| match exec.run(&product.tables(tuple)) {
        Ok(run) => {
            fair &= run.trace.is_fair(&input.algorithm.budgets);
            if traces.len() < a.max_traces {
                traces.push(json!({
                    "oracles": tuple,
                    "weight": to_json(w),
                    "outputs": run.outcome.outputs,
                    "wins": run.outcome.wins,
                    "trace": run.trace,
                }));
            }
        }
        Err(e) => err = Some(e),
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    let ok = fair && after >= before;
    Ok((
        json!({
            "before": to_json(&before),
            "after": to_json(&after),
            "fair": fair,
            "value_preserved": after >= before,
            "traces": traces,
        }),
        ok,
    ))
}

fn qsim(a: &QsimArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let kind = match a.oracle {
        OracleArg::Phase => OracleKind::Cphso,
        OracleArg::Standard => OracleKind::Csto,
    };
    let dims = Dims::new(a.salts, a.m, a.n, a.z)?;
    let circuits: Vec<CircuitDescription> = match &a.circuit {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            vec![serde_json::from_str(&text).map_err(|e| usage(format!("bad circuit: {e}")))?]
        }
        None => (0..a.trials as u64)
            .map(|i| CircuitDescription::random(dims, a.t, kind, a.seed.wrapping_add(i)))
            .collect(),
    };
    let prop = || PropertySpec::parse(&a.property);
    let per_circuit = |f: &dyn Fn(&CircuitDescription) -> anyhow::Result<(Value, bool)>| -> anyhow::Result<Outcome> {
        let mut reports = Vec::new();
        let mut ok = true;
        for c in &circuits {
            let (r, pass) = f(c)?;
            ok &= pass;
            reports.push(r);
        }
        Ok((json!({ "pass": ok, "reports": reports }), ok))
    };
    let (mut out, ok) = match a.check {
        QsimCheck::Unitarity => {
            let r = unitarity_check(dims, a.trials, a.seed, budget)?;
            let ok = r.holds;
            (
                json!({ "pass": ok, "report": r, "tolerance": { "norm": 1e-10, "involution": 1e-12 } }),
                ok,
            )
        }
        QsimCheck::Equivalence => per_circuit(&|c| {
            let r = compare_with_standard_oracle(c, budget)?;
            Ok((serde_json::to_value(&r)?, r.tv <= 1e-9))
        })?,
        QsimCheck::BoundedDb => per_circuit(&|c| {
            let r = bounded_database_check(c, budget)?;
            Ok((serde_json::to_value(&r)?, r.holds))
        })?,
        QsimCheck::Transition => {
            let r = transition_capacity_check(
                &prop()?,
                dims,
                a.salt,
                a.size,
                a.trials,
                a.seed,
                budget,
            )?;
            let ok = r.holds;
            (json!({ "pass": ok, "report": r, "tolerance": 1e-9 }), ok)
        }
        QsimCheck::Paths => {
            let p = prop()?;
            per_circuit(&|c| {
                let r = path_decomposition(c, &p, a.kappa, budget)?;
                Ok((serde_json::to_value(&r)?, r.residual <= 1e-8))
            })?
        }
        QsimCheck::Threshold => {
            let p = prop()?;
            per_circuit(&|c| {
                let r = threshold_experiment(c, &p, a.kappa, a.big_c, budget)?;
                Ok((serde_json::to_value(&r)?, r.holds))
            })?
        }
        QsimCheck::Lemma5 => {
            let rel = match a.property.as_str() {
                "collision" => Relation::Collision,
                "preimage_zero" => Relation::PreimageZero,
                "always" => Relation::Always,
                other => {
                    return Err(usage(format!(
                        "lemma5 supports collision, preimage_zero or always, not {other}"
                    )))
                }
            };
            per_circuit(&|c| {
                let r = lazy_sampling_check(c, rel, budget)?;
                Ok((serde_json::to_value(&r)?, r.holds))
            })?
        }
        QsimCheck::Gh => {
            let won = a
                .won
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| usage(format!("bad salt {s:?} in --won")))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let r = g_h_transition_check(
                &prop()?,
                dims,
                &won,
                a.salt,
                a.size,
                a.trials,
                a.seed,
                budget,
            )?;
            let ok = r.holds;
            (json!({ "pass": ok, "report": r, "tolerance": 1e-6 }), ok)
        }
    };
    out["check"] = serde_json::to_value(a.check)?;
    Ok((out, ok))
}

fn suite(a: &SuiteArgs, budget: &Budget) -> anyhow::Result<Outcome> {
    let results = match &a.only {
        None => run_suite(budget),
        Some(list) => list
            .split(',')
            .map(|s| match s.trim().parse::<usize>() {
                Ok(id) if (1..=CRITERIA.len()).contains(&id) => Ok(run_criterion(id, budget)),
                _ => Err(usage(format!("no criterion {s:?}"))),
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let ok = results.iter().all(|r| r.pass);
    Ok((json!({ "pass": ok, "criteria": results }), ok))
}

fn dispatch(
    cli: &Cli,
    budget: &Budget,
) -> anyhow::Result<(&'static str, Value, Option<u64>, Outcome)> {
    Ok(match &cli.cmd {
        Cmd::Eps(a) => ("eps", serde_json::to_value(a)?, None, eps(a, budget)?),
        Cmd::EpsMulti(a) => (
            "eps-multi",
            serde_json::to_value(a)?,
            None,
            eps_multi(a, budget)?,
        ),
        Cmd::EpsNonuniform(a) => (
            "eps-nonuniform",
            serde_json::to_value(a)?,
            None,
            eps_nonuniform(a, budget)?,
        ),
        Cmd::Bound(a) => ("bound", serde_json::to_value(a)?, None, bound(a, budget)?),
        Cmd::Attack(a) => ("attack", serde_json::to_value(a)?, Some(a.seed), attack(a)?),
        Cmd::Reduce(a) => ("reduce", serde_json::to_value(a)?, None, reduce(a, budget)?),
        Cmd::Qsim(a) => (
            "qsim",
            serde_json::to_value(a)?,
            Some(a.seed),
            qsim(a, budget)?,
        ),
        Cmd::Suite(a) => ("suite", serde_json::to_value(a)?, None, suite(a, budget)?),
    })
}

fn write(path: &Option<PathBuf>, v: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match path {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))
        }
        None => match writeln!(std::io::stdout(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.downcast_ref::<Usage>().is_some()
        || matches!(
            e.downcast_ref::<Error>(),
            Some(Error::InvalidSpec(_) | Error::Unsupported(_))
        )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let budget = Budget::from_env();
    let start = Instant::now();
    let result = dispatch(&cli, &budget).and_then(|(name, params, seed, (payload, ok))| {
        write(&cli.out, &payload)?;
        if cli.manifest.is_some() {
            let m = RunManifest {
                subcommand: name,
                params,
                seed,
                version: env!("CARGO_PKG_VERSION"),
                wall_time_s: start.elapsed().as_secs_f64(),
                result: &payload,
            };
            write(&cli.manifest, &serde_json::to_value(m)?)?;
        }
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
