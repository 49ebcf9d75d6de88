//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage or domain errors, 3 solver size
//! caps or numerical failure, 4 a bound check failed beyond its slack.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, bound_value, csv_row, fmt_g, lemma_hoeff_mc, monte_carlo, BoundQuery, Experiment,
    McReport, CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::instances::{
    gen_binomial_public_private, gen_iid, gen_public_private, make_order, read_instance,
    write_instance, IidDistribution, OrderModel, FAMILY_PUBLIC_PRIVATE,
};
use crate::oracles::{
    opt_exhaustive_integral, opt_fractional_lp, opt_public_private_closed_form, opt_unit_flow,
};
use crate::policies::{randomized_round, run_online, Mode, PolicyConfig, PolicyKind};
use crate::rng;
use crate::types::{Instance, OptKind, OptResult};

/// Exit code when an experiment's bound check fails.
pub const EXIT_BOUND_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "maxmin-lab",
    version,
    about = "Online max-min allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Compute the offline optimum of an instance.
    Opt(OptArgs),
    /// Run an online policy over one instance for several trials.
    Run(RunArgs),
    /// Run a named Monte Carlo experiment and emit the analysis CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Family {
    PublicPrivate,
    Binomial,
    Iid,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Number of items (iid family).
    #[arg(long)]
    m: Option<usize>,
    /// JSON file `{"support": [[prob, [v_0, ..., v_{n-1}]], ...]}` (iid family).
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Solver {
    Exhaustive,
    FlowIntegral,
    FlowFractional,
    Lp,
    ClosedForm,
}

#[derive(Args, Debug)]
struct OptArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    solver: Solver,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OrderFlag {
    Random,
    PublicFirst,
    File,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyFlag {
    Sgwr,
    Greedy,
    Uniform,
    Exppot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeFlag {
    Frac,
    Int,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OptFlag {
    Exhaustive,
    Flow,
    Lp,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "random")]
    order: OrderFlag,
    /// JSON array with a permutation of item indices (`--order file`).
    #[arg(long)]
    order_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sgwr")]
    policy: PolicyFlag,
    #[arg(long, value_enum, default_value = "frac")]
    mode: ModeFlag,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    beta: Option<f64>,
    /// Also round each fractional trace online.
    #[arg(long)]
    round: bool,
    /// Offline optimum for the ratio and regret columns.
    #[arg(long, value_enum)]
    opt: Option<OptFlag>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum ExperimentName {
    Coupon,
    Prefix,
    Binomial,
    Hoeff,
    Adversarial,
    RatioSweep,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Number of random vectors (hoeff).
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated k values (ratio-sweep); defaults to 16, 32, ..., 4096.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|()| 0),
        Command::Opt(a) => cmd_opt(&a).map(|()| 0),
        Command::Run(a) => cmd_run(&a).map(|()| 0),
        Command::Experiment(a) => cmd_experiment(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn opt_str<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistFile {
    support: Vec<(f64, Vec<f64>)>,
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let need = |x: Option<usize>, flag: &str| {
        x.ok_or_else(|| Error::Config(format!("--{flag} is required for this family")))
    };
    let instance = match a.family {
        Family::PublicPrivate => gen_public_private(a.n, need(a.k, "k")?)?,
        Family::Binomial => {
            let p =
                a.p.ok_or_else(|| Error::Config("--p is required for this family".into()))?;
            gen_binomial_public_private(a.n, need(a.k, "k")?, p, a.seed)?
        }
        Family::Iid => {
            let path = a
                .dist
                .as_ref()
                .ok_or_else(|| Error::Config("--dist is required for the iid family".into()))?;
            let text = fs::read_to_string(path)?;
            let file: DistFile = serde_json::from_str(&text)
                .map_err(|e| Error::Data(format!("distribution file: {e}")))?;
            gen_iid(
                a.n,
                need(a.m, "m")?,
                &IidDistribution::new(file.support)?,
                a.seed,
            )?
        }
    };
    write_instance(&instance, &a.out)?;
    let md = &instance.metadata;
    println!(
        "{} {} {} {} {} {}",
        md.family,
        instance.n_agents(),
        instance.n_items(),
        opt_str(md.k),
        opt_str(md.p),
        opt_str(md.seed)
    );
    Ok(())
}

fn closed_form_for(instance: &Instance) -> Result<OptResult> {
    let md = &instance.metadata;
    match (md.family.as_str(), md.k) {
        (FAMILY_PUBLIC_PRIVATE, Some(k)) => opt_public_private_closed_form(instance.n_agents(), k),
        _ => Err(Error::Config(
            "closed form OPT is only available for public_private instances".into(),
        )),
    }
}

fn solve(instance: &Instance, solver: Solver) -> Result<OptResult> {
    match solver {
        Solver::Exhaustive => opt_exhaustive_integral(instance),
        Solver::FlowIntegral => opt_unit_flow(instance, OptKind::Integral),
        Solver::FlowFractional => opt_unit_flow(instance, OptKind::Fractional),
        Solver::Lp => opt_fractional_lp(instance),
        Solver::ClosedForm => closed_form_for(instance),
    }
}

fn cmd_opt(a: &OptArgs) -> Result<()> {
    let instance = read_instance(&a.instance)?;
    let r = solve(&instance, a.solver)?;
    let json = serde_json::to_string(&r).map_err(|e| Error::Data(e.to_string()))?;
    emit(a.out.as_deref(), &format!("{json}\n"))
}

#[derive(Debug, Clone, Serialize)]
struct RunRow {
    trial: usize,
    seed: u64,
    min_load: f64,
    ratio: Option<f64>,
    regret: Option<f64>,
}

const RUN_HEADER: &str = "trial,seed,min_load,ratio,regret";

fn run_row(trial: usize, seed: u64, min_load: f64, opt: Option<f64>) -> RunRow {
    let report = opt.map(|o| analysis::competitive_from_values(min_load, o));
    RunRow {
        trial,
        seed,
        min_load,
        ratio: report.and_then(|r| r.ratio),
        regret: report.map(|r| r.additive_regret),
    }
}

fn run_csv(rows: &[RunRow]) -> String {
    let mut s = format!("{RUN_HEADER}\n");
    for r in rows {
        let field = |x: Option<f64>| x.map(fmt_g).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.trial,
            r.seed,
            fmt_g(r.min_load),
            field(r.ratio),
            field(r.regret)
        ));
    }
    s
}

fn policy_config(a: &RunArgs) -> PolicyConfig {
    let mode = match a.mode {
        ModeFlag::Frac => Mode::Fractional,
        ModeFlag::Int => Mode::Integral,
    };
    match a.policy {
        PolicyFlag::Sgwr => PolicyConfig::smooth_greedy(a.eps, mode),
        PolicyFlag::Greedy => PolicyConfig::greedy_least_loaded(),
        PolicyFlag::Uniform => PolicyConfig::uniform_random(0),
        PolicyFlag::Exppot => PolicyConfig {
            kind: PolicyKind::ExpPotential,
            eps: a.eps,
            beta: a.beta,
            ..PolicyConfig::exp_potential(a.eps)
        },
    }
}

fn run_opt(instance: &Instance, flag: OptFlag) -> Result<OptResult> {
    match flag {
        OptFlag::Exhaustive => opt_exhaustive_integral(instance),
        OptFlag::Flow => opt_unit_flow(instance, OptKind::Fractional),
        OptFlag::Lp => opt_fractional_lp(instance),
        OptFlag::ClosedForm => closed_form_for(instance),
    }
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let instance = read_instance(&a.instance)?;
    let cfg = policy_config(a);
    cfg.validate(instance.n_agents())?;
    if a.round && !cfg.is_fractional() {
        return Err(Error::Config(
            "--round needs --policy sgwr --mode frac".into(),
        ));
    }
    let fixed_order = match a.order {
        OrderFlag::Random => None,
        OrderFlag::PublicFirst => Some(make_order(&instance, &OrderModel::PublicFirst)?),
        OrderFlag::File => {
            let path = a
                .order_file
                .as_ref()
                .ok_or_else(|| Error::Config("--order file needs --order-file".into()))?;
            let perm: Vec<usize> = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::Data(format!("order file: {e}")))?;
            Some(make_order(&instance, &OrderModel::Explicit(perm))?)
        }
    };
    let opt = a
        .opt
        .map(|f| run_opt(&instance, f))
        .transpose()?
        .map(|r| r.value);

    let rows = analysis::run_trials(a.trials, a.seed, a.threads, |i, seed| {
        let order = match &fixed_order {
            Some(o) => o.clone(),
            None => make_order(&instance, &OrderModel::UniformRandom { seed })?,
        };
        let trace = run_online(&instance, &order, &cfg.clone().with_seed(seed))?;
        let main = run_row(i, seed, trace.min_load, opt);
        let rounded = if a.round {
            let r = randomized_round(&instance, &order, &trace, seed)?;
            Some(run_row(i, seed, r.min_load, opt))
        } else {
            None
        };
        Ok((main, rounded))
    })?;
    let (main, rounded): (Vec<RunRow>, Vec<Option<RunRow>>) = rows.into_iter().unzip();
    let rounded: Vec<RunRow> = rounded.into_iter().flatten().collect();

    let text = match a.format {
        Format::Csv if a.round => {
            format!(
                "# fractional\n{}\n# rounded\n{}",
                run_csv(&main),
                run_csv(&rounded)
            )
        }
        Format::Csv => run_csv(&main),
        Format::Json => {
            let value = if a.round {
                serde_json::json!({ "fractional": main, "rounded": rounded })
            } else {
                serde_json::json!(main)
            };
            format!("{value}\n")
        }
    };
    emit(a.out.as_deref(), &text)
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<i32> {
    let mut rows = Vec::new();
    let mut failed = false;
    let mut check = |exp: &Experiment, report: &McReport, rows: &mut Vec<String>| -> Result<()> {
        if let Some(v) = exp.validate(report)? {
            if !v.passed {
                failed = true;
                eprintln!(
                    "bound check failed: {} observed {} against {} (slack {})",
                    exp.tag(),
                    fmt_g(report.empirical_probability.unwrap_or(report.mean)),
                    fmt_g(v.target),
                    fmt_g(v.slack)
                );
            }
        }
        rows.push(csv_row(exp, report));
        Ok(())
    };
    let run = |tag: &str, p: &[(&str, f64)]| -> Result<(Experiment, McReport)> {
        let exp = Experiment::from_tag(tag, &params(p))?;
        let report = monte_carlo(&exp, a.trials, a.seed, a.threads)?;
        Ok((exp, report))
    };

    match a.name {
        ExperimentName::Coupon => {
            let (n, k) = (a.n.unwrap_or(2), a.k.unwrap_or(2));
            let (e, r) = run("coupon", &[("n", n as f64), ("k", k as f64)])?;
            check(&e, &r, &mut rows)?;
        }
        ExperimentName::Prefix => {
            let n = a.n.unwrap_or(64);
            let eps = a.eps.unwrap_or(0.25);
            let k = match a.k {
                Some(k) => k,
                None => {
                    let q = BoundQuery::new("k_threshold")
                        .with("eps", eps)
                        .with("n", n as f64);
                    (bound_value(&q)?.round() as usize).max(1)
                }
            };
            let p = [("n", n as f64), ("k", k as f64), ("eps", eps)];
            for tag in ["prefix_all_types", "prefix_few_public"] {
                let (e, r) = run(tag, &p)?;
                check(&e, &r, &mut rows)?;
            }
        }
        ExperimentName::Binomial => {
            let p = [
                ("n", a.n.unwrap_or(32) as f64),
                ("k", a.k.unwrap_or(512) as f64),
                ("p", a.p.unwrap_or(0.5)),
            ];
            for tag in ["binomial_private", "binomial_public_share"] {
                let (e, r) = run(tag, &p)?;
                check(&e, &r, &mut rows)?;
            }
        }
        ExperimentName::Adversarial => {
            let p = [
                ("n", a.n.unwrap_or(10) as f64),
                ("k", a.k.unwrap_or(1) as f64),
            ];
            for tag in ["adversarial_public_load", "adversarial_ratio"] {
                let (e, r) = run(tag, &p)?;
                check(&e, &r, &mut rows)?;
            }
        }
        ExperimentName::RatioSweep => {
            let n = a.n.unwrap_or(8);
            let eps = a.eps.unwrap_or(0.1);
            let ks =
                a.ks.clone()
                    .unwrap_or_else(|| (4..=12).map(|e| 1usize << e).collect());
            for k in ks {
                let (e, r) = run(
                    "random_order_ratio",
                    &[("n", n as f64), ("k", k as f64), ("eps", eps)],
                )?;
                check(&e, &r, &mut rows)?;
            }
        }
        ExperimentName::Hoeff => {
            let n = a.n.unwrap_or(2);
            let m = a.m.unwrap_or(6);
            let k = a.k.unwrap_or(3);
            let eps = a.eps.unwrap_or(0.5);
            if n == 0 || m == 0 {
                return Err(Error::Config("hoeff needs n, m >= 1".into()));
            }
            let mut r = rng::stream(a.seed, "vectors", 0);
            let vectors: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| r.random::<f64>()).collect())
                .collect();
            let h = lemma_hoeff_mc(&vectors, k, eps, a.trials, a.seed)?;
            if !h.holds {
                failed = true;
                eprintln!(
                    "bound check failed: hoeff mean {} below {} (slack {})",
                    fmt_g(h.report.mean),
                    fmt_g(h.bound),
                    fmt_g(analysis::SIGMA_SLACK * h.report.std_error)
                );
            }
            rows.push(format!(
                "hoeff,{n},{k},,{},{},{},{},,{}",
                fmt_g(eps),
                h.report.trials,
                fmt_g(h.report.mean),
                fmt_g(h.report.std_error),
                h.report.seed
            ));
        }
    }

    let mut text = format!("{CSV_HEADER}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    emit(a.out.as_deref(), &text)?;
    Ok(if failed { EXIT_BOUND_FAILED } else { 0 })
}
