//! `tscs`: run, audit, and inspect two-sided cost-sharing mechanisms.
//!
//! Exit codes: 0 success, 1 audit failure, 2 input or usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tscs::audit::{audit_all, AuditResult};
use tscs::caps::Caps;
use tscs::core_lp;
use tscs::gen::gen_random_scenario;
use tscs::lottery::decompose;
use tscs::market::{enumerate_realizations, CostClass, MarketScenario};
use tscs::mechanisms::{
    precompute_exact, precompute_sampled, ExAnteReport, ExpectedCoreUtilities, MechanismKind,
    UtilityBasis,
};
use tscs::scenario_io::{read_scenario_file, write_scenario_string};
use tscs::welfare;

#[derive(Parser)]
#[command(name = "tscs", version, about = "Two-sided cost-sharing mechanisms: run, audit, inspect")]
struct Cli {
    /// Worker threads for parallel audits; the TSCS_THREADS environment
    /// variable overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cap on enumerated realizations.
    #[arg(long, global = true)]
    max_realizations: Option<u64>,
    /// Cap on enumerated assignment words.
    #[arg(long, global = true)]
    max_assignments: Option<u64>,
    /// Cap on assignment LP columns.
    #[arg(long, global = true)]
    max_lp_columns: Option<u64>,
    /// Cap on enumerated lottery atoms.
    #[arg(long, global = true)]
    max_atoms: Option<u64>,
    /// Cap on mechanism evaluations in the truthfulness grid.
    #[arg(long, global = true)]
    max_deviation_runs: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism and print its exact ex-ante report as CSV.
    Run {
        /// 1 = exact, 2 = sampled, 3 = lottery.
        #[arg(long)]
        mechanism: u8,
        #[arg(long)]
        scenario: PathBuf,
        /// Sampling accuracy parameter (required for mechanism 2).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Sampling seed (required for mechanism 2 and for sampled mechanism 3).
        #[arg(long)]
        seed: Option<u64>,
        /// Sample-count override; smaller than the conformant count is flagged.
        #[arg(long)]
        samples: Option<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Audit a mechanism's properties; exits 1 if any audit fails.
    Audit {
        #[arg(long)]
        mechanism: u8,
        #[arg(long)]
        scenario: PathBuf,
        /// Audit every property (the default; kept as an explicit flag).
        #[arg(long)]
        all: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print per-realization core utility vectors (y, z, alpha, W, W*) as CSV.
    Core {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the lottery decomposition of one realization as CSV.
    Lottery {
        #[arg(long)]
        scenario: PathBuf,
        /// Index into the realization enumeration.
        #[arg(long)]
        realization: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a random scenario as JSON.
    Gen {
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        types_per_agent: usize,
        #[arg(long)]
        seed: u64,
        /// Write the scenario here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassArg {
    General,
    Submodular,
    Ngs,
    Additive,
}

impl From<ClassArg> for CostClass {
    fn from(c: ClassArg) -> CostClass {
        match c {
            ClassArg::General => CostClass::General,
            ClassArg::Submodular => CostClass::Submodular,
            ClassArg::Ngs => CostClass::Ngs,
            ClassArg::Additive => CostClass::Additive,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let caps = Caps {
        max_realizations: cli.max_realizations.unwrap_or(Caps::default().max_realizations),
        max_assignments: cli.max_assignments.unwrap_or(Caps::default().max_assignments),
        max_lp_columns: cli.max_lp_columns.unwrap_or(Caps::default().max_lp_columns),
        max_lottery_atoms: cli.max_atoms.unwrap_or(Caps::default().max_lottery_atoms),
        max_deviation_runs: cli
            .max_deviation_runs
            .unwrap_or(Caps::default().max_deviation_runs),
    };
    match run(cli.command, &caps, cli.threads) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let threads = std::env::var("TSCS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(flag);
    if let Some(t) = threads {
        // Ignore the error if a pool already exists (tests call this twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
}

fn run(command: Command, caps: &Caps, threads: Option<usize>) -> Result<ExitCode, String> {
    match command {
        Command::Run { mechanism, scenario, epsilon, seed, samples, report } => {
            let s = read_scenario_file(&scenario).map_err(|e| e.to_string())?;
            let (kind, expected) = build_mechanism(mechanism, &s, epsilon, seed, samples, caps)?;
            let r = tscs::mechanisms::ex_ante_report(&s, kind, &expected, caps)
                .map_err(|e| e.to_string())?;
            let mut out = header(
                &format!(
                    "command=run mechanism={mechanism} scenario={} epsilon={} seed={} samples={}",
                    scenario.display(),
                    opt(epsilon),
                    opt(seed),
                    opt(samples)
                ),
                caps,
                threads,
            );
            write_report_csv(&mut out, &r);
            emit(&out, report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { mechanism, scenario, all: _, epsilon, seed, samples, report } => {
            let s = read_scenario_file(&scenario).map_err(|e| e.to_string())?;
            let (kind, expected) = build_mechanism(mechanism, &s, epsilon, seed, samples, caps)?;
            let (summary, results) =
                audit_all(&s, kind, &expected, caps).map_err(|e| e.to_string())?;
            let mut out = header(
                &format!(
                    "command=audit mechanism={mechanism} scenario={} epsilon={} seed={} samples={}",
                    scenario.display(),
                    opt(epsilon),
                    opt(seed),
                    opt(samples)
                ),
                caps,
                threads,
            );
            write_audit_csv(&mut out, &results, &summary);
            emit(&out, report.as_deref())?;
            if results.iter().all(|r| r.pass) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Core { scenario, report } => {
            let s = read_scenario_file(&scenario).map_err(|e| e.to_string())?;
            let mut out = header(
                &format!("command=core scenario={}", scenario.display()),
                caps,
                threads,
            );
            write_core_csv(&mut out, &s, caps).map_err(|e| e.to_string())?;
            emit(&out, report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Lottery { scenario, realization, report } => {
            let s = read_scenario_file(&scenario).map_err(|e| e.to_string())?;
            let rs = enumerate_realizations(&s, caps).map_err(|e| e.to_string())?;
            let r = rs.get(realization).ok_or_else(|| {
                format!("realization index {realization} out of range (0..{})", rs.len())
            })?;
            let x = welfare::solve_primal_lp(r, caps).map_err(|e| e.to_string())?;
            let lot = decompose(&x, r, caps, None).map_err(|e| e.to_string())?;
            let mut out = header(
                &format!(
                    "command=lottery scenario={} realization={realization}",
                    scenario.display()
                ),
                caps,
                threads,
            );
            let _ = writeln!(out, "atom,weight,gamma,word");
            for (k, (w, a)) in lot.atoms.iter().enumerate() {
                let word: Vec<String> =
                    a.word(s.n()).iter().map(|d| d.to_string()).collect();
                let _ = writeln!(out, "{k},{w},{},\"{}\"", lot.gamma, word.join(","));
            }
            emit(&out, report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { class, n, m, types_per_agent, seed, out } => {
            if n == 0 || m == 0 || types_per_agent == 0 {
                return Err("gen requires n >= 1, m >= 1, types-per-agent >= 1".into());
            }
            if n > 24 {
                return Err(format!("n={n} exceeds the 24-buyer subset encoding"));
            }
            let s = gen_random_scenario(class.into(), n, m, types_per_agent, seed);
            s.validate().map_err(|e| e.to_string())?;
            eprintln!("# tscs {}", env!("CARGO_PKG_VERSION"));
            eprintln!(
                "# config: command=gen class={class:?} n={n} m={m} types_per_agent={types_per_agent} seed={seed}"
            );
            let text = write_scenario_string(&s);
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn header(config: &str, caps: &Caps, threads: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tscs {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "# config: {config} threads={} caps=realizations:{},assignments:{},lp_columns:{},atoms:{},deviation_runs:{}",
        opt(threads),
        caps.max_realizations,
        caps.max_assignments,
        caps.max_lp_columns,
        caps.max_lottery_atoms,
        caps.max_deviation_runs
    );
    out
}

fn build_mechanism(
    mechanism: u8,
    scenario: &MarketScenario,
    epsilon: Option<f64>,
    seed: Option<u64>,
    samples: Option<u64>,
    caps: &Caps,
) -> Result<(MechanismKind, ExpectedCoreUtilities), String> {
    match mechanism {
        1 => {
            let e = precompute_exact(scenario, UtilityBasis::ScaledCore, caps)
                .map_err(|e| e.to_string())?;
            Ok((MechanismKind::Exact, e))
        }
        2 => {
            let eps = epsilon.ok_or("mechanism 2 requires --epsilon")?;
            if !(eps > 0.0) {
                return Err(format!("--epsilon must be positive, got {eps}"));
            }
            let seed = seed.ok_or("mechanism 2 requires --seed")?;
            let e = precompute_sampled(scenario, UtilityBasis::ScaledCore, eps, seed, samples, caps)
                .map_err(|e| e.to_string())?;
            Ok((MechanismKind::Sampled, e))
        }
        3 => {
            let ok_class = scenario
                .declared_class
                .iter()
                .all(|c| matches!(c, CostClass::Submodular | CostClass::Additive));
            if !ok_class {
                return Err(
                    "mechanism 3 requires every seller declared submodular or additive".into()
                );
            }
            let e = match epsilon {
                Some(eps) => {
                    if !(eps > 0.0) {
                        return Err(format!("--epsilon must be positive, got {eps}"));
                    }
                    let seed = seed.ok_or("sampled mechanism 3 requires --seed")?;
                    precompute_sampled(scenario, UtilityBasis::RawDual, eps, seed, samples, caps)
                        .map_err(|e| e.to_string())?
                }
                None => precompute_exact(scenario, UtilityBasis::RawDual, caps)
                    .map_err(|e| e.to_string())?,
            };
            Ok((MechanismKind::Lottery, e))
        }
        other => Err(format!("unknown mechanism {other}; expected 1, 2, or 3")),
    }
}

fn write_report_csv(out: &mut String, r: &ExAnteReport) {
    let _ = writeln!(out, "agent_id,kind,expected_utility,price_or_wage_expectation");
    for (i, (u, p)) in r
        .expected_buyer_utility
        .iter()
        .zip(&r.expected_prices)
        .enumerate()
    {
        let _ = writeln!(out, "{i},buyer,{u},{p}");
    }
    for (j, (u, w)) in r
        .expected_seller_utility
        .iter()
        .zip(&r.expected_wages)
        .enumerate()
    {
        let _ = writeln!(out, "{j},seller,{u},{w}");
    }
    let _ = writeln!(
        out,
        "summary,welfare,budget_surplus,min_core_slack,alpha,delta,gamma"
    );
    let _ = writeln!(
        out,
        "summary,{},{},{},{},{},{}",
        r.mechanism_welfare, r.budget_surplus, r.core_slack, r.alpha, r.delta, r.gamma
    );
}

fn write_audit_csv(out: &mut String, results: &[AuditResult], summary: &ExAnteReport) {
    let _ = writeln!(out, "property,pass,worst_violation,tolerance,witness");
    for r in results {
        let witness = r
            .witness
            .as_ref()
            .map_or(String::new(), |w| w.to_string().replace('"', "'"));
        let _ = writeln!(
            out,
            "{},{},{},{},\"{}\"",
            r.property.as_str(),
            r.pass,
            r.worst_violation,
            r.tolerance,
            witness
        );
    }
    let _ = writeln!(
        out,
        "summary,welfare,budget_surplus,min_core_slack,alpha,delta,gamma"
    );
    let _ = writeln!(
        out,
        "summary,{},{},{},{},{},{}",
        summary.mechanism_welfare,
        summary.budget_surplus,
        summary.core_slack,
        summary.alpha,
        summary.delta,
        summary.gamma
    );
}

fn write_core_csv(out: &mut String, s: &MarketScenario, caps: &Caps) -> tscs::Result<()> {
    let n = s.n();
    let m = s.m();
    let alg = welfare::select_welfare_alg(s);
    let mut cols = vec!["realization".to_string(), "probability".to_string()];
    cols.extend((0..n).map(|i| format!("y{i}")));
    cols.extend((0..m).map(|j| format!("z{j}")));
    cols.extend(["alpha", "W", "W_star"].map(String::from));
    let _ = writeln!(out, "{}", cols.join(","));
    for (k, r) in enumerate_realizations(s, caps)?.iter().enumerate() {
        let (_, w) = welfare::run_welfare_alg(alg, r, caps)?;
        let cu = core_lp::core_utilities(r, w, caps)?;
        let mut row = vec![k.to_string(), r.probability.to_string()];
        row.extend(cu.y.iter().map(|v| v.to_string()));
        row.extend(cu.z.iter().map(|v| v.to_string()));
        row.push(cu.alpha.to_string());
        row.push(cu.welfare.to_string());
        row.push(cu.w_star.to_string());
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(())
}

fn emit(content: &str, path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
