//! `multipark`: simulate multilayer deposition, print exact curves, reproduce
//! the motive closed forms, certify the comparison results and run the
//! acceptance suite.
//!
//! Exit codes: 0 ok, 1 a check or validation failed, 2 usage error.
//! `MULTIPARK_THREADS` sets the width of the replica thread pool.

mod spec;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multipark::analytic::{averaged_curve, regular_curve};
use multipark::compare::{check_gf_dominance, check_jensen, check_layer_dominance, ComparisonReport};
use multipark::curve::DensityCurve;
use multipark::degree::DegreeDistribution;
use multipark::deposit::{estimate_densities, LayerPattern, Measure, SimConfig, Substrate, DEFAULT_TRACK_LAYERS};
use multipark::motives::{records_for_pattern, MotiveSystem};
use multipark::tree::{build_cycle, build_random_ball, build_regular_ball};
use multipark::validate::{run_all, ValidateOptions, DEFAULT_SEED};
use serde::Serialize;

use crate::spec::{parse_grid, Format, GraphArg, MeasureArg, RunSpec};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "multipark", version, about = "Multilayer particle deposition with screening on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo densities on a cycle, a regular tree ball or random tree balls.
    Simulate(CmdArgs),
    /// Exact density curves on regular or random trees.
    Analytic(CmdArgs),
    /// Solve a motive system and print or export its closed forms.
    Motives(CmdArgs),
    /// Certify a comparison result (--theorem 3, 4 or 5).
    Compare(CmdArgs),
    /// Run the acceptance suite.
    Validate(CmdArgs),
}

#[derive(Args)]
struct CmdArgs {
    /// JSON run specification; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    spec: RunSpec,
}

enum Failure {
    Usage(String),
    Check(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    spec: &'a RunSpec,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("MULTIPARK_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (name, args) = match cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Analytic(a) => ("analytic", a),
        Command::Motives(a) => ("motives", a),
        Command::Compare(a) => ("compare", a),
        Command::Validate(a) => ("validate", a),
    };
    let result = load_spec(args).and_then(|spec| match name {
        "simulate" => cmd_simulate(spec),
        "analytic" => cmd_analytic(spec),
        "motives" => cmd_motives(spec),
        "compare" => cmd_compare(spec),
        _ => cmd_validate(spec),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("multipark {name}: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("multipark {name}: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(args: CmdArgs) -> Result<RunSpec, Failure> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            RunSpec::from_json(&text).map_err(usage)?
        }
        None => RunSpec::default(),
    };
    Ok(base.overridden_by(args.spec))
}

fn emit(spec: &RunSpec, text: &str) -> Outcome {
    match &spec.out {
        Some(path) => fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_curve(command: &str, spec: &RunSpec, curve: &DensityCurve) -> Outcome {
    let meta = Meta { tool: "multipark", version: VERSION, command, spec };
    let text = match spec.format.unwrap_or_default() {
        Format::Csv => {
            format!("# {}\n{}", serde_json::to_string(&meta).expect("meta serializes"), curve.to_csv())
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                meta: Meta<'a>,
                curve: &'a DensityCurve,
            }
            let mut s = serde_json::to_string_pretty(&Doc { meta, curve }).expect("curve serializes");
            s.push('\n');
            s
        }
    };
    emit(spec, &text)
}

/// Sample times from `--times`, else `--grid`, else `default`.
fn resolve_times(spec: &mut RunSpec, default: impl FnOnce(&RunSpec) -> Vec<f64>) -> Result<Vec<f64>, Failure> {
    let times = match (&spec.times, &spec.grid) {
        (Some(t), _) => t.clone(),
        (None, Some(g)) => parse_grid(g).map_err(usage)?,
        (None, None) => default(spec),
    };
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(usage("sample times must be finite and nonnegative"));
    }
    spec.times = Some(times.clone());
    Ok(times)
}

fn parse_dist(s: &str) -> Result<DegreeDistribution, Failure> {
    s.parse::<DegreeDistribution>().map_err(|e| usage(format!("--atoms {s:?}: {e}")))
}

fn cmd_simulate(mut spec: RunSpec) -> Outcome {
    let graph = spec.graph.ok_or_else(|| usage("--graph cycle|regular|random is required"))?;
    let times = resolve_times(&mut spec, |s| {
        let horizon = s.horizon.unwrap_or(10.0);
        (1..=10).map(|i| horizon * i as f64 / 10.0).collect()
    })?;
    let horizon = *spec.horizon.get_or_insert(*times.last().expect("nonempty"));
    let replicas = *spec.replicas.get_or_insert(100);
    let seed = *spec.seed.get_or_insert(DEFAULT_SEED);
    let track_layers = *spec.track_layers.get_or_insert(DEFAULT_TRACK_LAYERS);
    let layers = spec.layers.get_or_insert_with(|| vec![1, 2]).clone();
    let patterns = spec
        .patterns
        .get_or_insert_with(Vec::new)
        .iter()
        .map(|p| p.parse::<LayerPattern>().map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;

    let substrate = match graph {
        GraphArg::Cycle => Substrate::Fixed(build_cycle(*spec.n.get_or_insert(1000)).map_err(usage)?),
        GraphArg::Regular => {
            let d = spec.d.ok_or_else(|| usage("--d is required for a regular tree"))?;
            let radius = *spec.radius.get_or_insert(12);
            let buffer = *spec.buffer.get_or_insert(4);
            Substrate::Fixed(build_regular_ball(d, radius, buffer).map_err(usage)?)
        }
        GraphArg::Random => {
            let atoms = spec.atoms.clone().ok_or_else(|| usage("--atoms is required for random trees"))?;
            let dist = parse_dist(&atoms)?;
            let radius = *spec.radius.get_or_insert(12);
            let buffer = *spec.buffer.get_or_insert(4);
            let measure = match spec.measure.get_or_insert(MeasureArg::Root) {
                MeasureArg::Root => Measure::Root,
                MeasureArg::Interior => Measure::Interior,
            };
            // Surface radius/buffer errors before the replicas start.
            build_random_ball(&dist, radius, buffer, 0).map_err(usage)?;
            Substrate::RandomTrees { dist, radius, buffer, measure }
        }
    };
    let config = SimConfig { horizon, sample_times: times, replicas, track_layers, seed, layers, patterns };
    let curve = estimate_densities(&substrate, &config).map_err(usage)?;
    emit_curve("simulate", &spec, &curve)
}

fn cmd_analytic(mut spec: RunSpec) -> Outcome {
    let times = resolve_times(&mut spec, |_| parse_grid("0:0.5:10").expect("valid grid"))?;
    let regular_degree = match (&spec.atoms, spec.d, spec.graph) {
        (Some(_), _, _) => None,
        (None, Some(d), _) => Some(d),
        (None, None, Some(GraphArg::Cycle)) => Some(*spec.d.get_or_insert(2)),
        _ => return Err(usage("give --d, --atoms or --graph cycle")),
    };
    let mut curve = match (&spec.atoms, regular_degree) {
        (Some(atoms), _) => averaged_curve(&parse_dist(atoms)?, &times).map_err(usage)?,
        (None, Some(d)) => regular_curve(d, &times).map_err(usage)?,
        (None, None) => unreachable!("handled above"),
    };
    for p in spec.patterns.clone().unwrap_or_default() {
        let pattern: LayerPattern = p.parse().map_err(usage)?;
        if regular_degree != Some(2) {
            return Err(usage("pattern curves are available on the line only (--d 2 or --graph cycle)"));
        }
        let sys = MotiveSystem::solve(records_for_pattern(&pattern.to_string()).map_err(usage)?).map_err(usage)?;
        let exact = DensityCurve::from_exact(&times, &[(format!("pattern:{pattern}"), &sys.target().closed_form)]);
        curve.series.extend(exact.series);
    }
    emit_curve("analytic", &spec, &curve)
}

fn cmd_motives(mut spec: RunSpec) -> Outcome {
    let pattern = spec.pattern.get_or_insert_with(|| "0101".into()).clone();
    let sys = MotiveSystem::solve(records_for_pattern(&pattern).map_err(usage)?).map_err(usage)?;
    let target = &sys.target().closed_form;
    let limit = target.limit_at_infinity().map_err(usage)?;

    if spec.show_closed_form.unwrap_or(false) {
        let mut text = format!("# motive system for pattern {pattern} (highest layer first)\n");
        for m in &sys.motives {
            text.push_str(&format!("{}(t) = {}\n", m.name, m.closed_form));
        }
        text.push_str(&format!("P_t({pattern}) = {}\n", target));
        text.push_str(&format!("limit t -> infinity: {limit}\n"));
        return emit(&spec, &text);
    }
    match spec.format.unwrap_or_default() {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                meta: Meta<'a>,
                pattern: &'a str,
                limit: String,
                system: &'a MotiveSystem,
            }
            let meta = Meta { tool: "multipark", version: VERSION, command: "motives", spec: &spec };
            let doc = Doc { meta, pattern: &pattern, limit: limit.to_string(), system: &sys };
            let mut s = serde_json::to_string_pretty(&doc).expect("system serializes");
            s.push('\n');
            emit(&spec, &s)
        }
        Format::Csv => {
            let times = resolve_times(&mut spec, |_| parse_grid("0:0.5:10").expect("valid grid"))?;
            let curve = DensityCurve::from_exact(&times, &[(format!("pattern:{pattern}"), target)]);
            emit_curve("motives", &spec, &curve)
        }
    }
}

fn cmd_compare(mut spec: RunSpec) -> Outcome {
    let theorem = spec.theorem.ok_or_else(|| usage("--theorem 3, 4 or 5 is required"))?;
    let report: ComparisonReport = match theorem {
        3 => check_layer_dominance(*spec.dmax.get_or_insert(50)).map_err(usage)?,
        4 => {
            let times = resolve_times(&mut spec, |_| (1..=40).map(|i| 0.25 * i as f64).collect())?;
            let s = parse_dist(spec.atoms.get_or_insert_with(|| "2:1".into()))?;
            let t = parse_dist(spec.versus.get_or_insert_with(|| "3:1".into()))?;
            check_gf_dominance(&s, &t, &times).map_err(usage)?
        }
        5 => {
            let times = resolve_times(&mut spec, |_| vec![0.5, 1.0, 2.0, 5.0])?;
            let d = *spec.d.get_or_insert(3);
            let s = parse_dist(spec.atoms.get_or_insert_with(|| "2:1/2,4:1/2".into()))?;
            check_jensen(d, &s, &times).map_err(usage)?
        }
        other => return Err(usage(format!("no comparison for theorem {other}; use 3, 4 or 5"))),
    };
    let text = match spec.format {
        Some(Format::Json) => {
            #[derive(Serialize)]
            struct Doc<'a> {
                meta: Meta<'a>,
                report: &'a ComparisonReport,
            }
            let meta = Meta { tool: "multipark", version: VERSION, command: "compare", spec: &spec };
            let mut s = serde_json::to_string_pretty(&Doc { meta, report: &report }).expect("report serializes");
            s.push('\n');
            s
        }
        _ => report.to_string(),
    };
    emit(&spec, &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} outcome: {:?}", report.claim, report.outcome)))
    }
}

fn cmd_validate(mut spec: RunSpec) -> Outcome {
    let opts = ValidateOptions {
        quick: *spec.quick.get_or_insert(false),
        seed: *spec.seed.get_or_insert(DEFAULT_SEED),
    };
    let results = run_all(opts);
    let failed = results.iter().filter(|r| !r.passed).count();
    let text = match spec.format {
        Some(Format::Json) => {
            let mut s = serde_json::to_string_pretty(&results).expect("results serialize");
            s.push('\n');
            s
        }
        _ => {
            let mut s = String::new();
            for r in &results {
                s.push_str(&format!("{r}\n"));
            }
            s.push_str(&format!(
                "{} of {} criteria passed (seed {}{})\n",
                results.len() - failed,
                results.len(),
                opts.seed,
                if opts.quick { ", quick" } else { "" }
            ));
            s
        }
    };
    emit(&spec, &text)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failed} criteria failed")))
    }
}
