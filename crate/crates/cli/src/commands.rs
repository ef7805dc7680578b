use std::path::Path;
use std::time::Instant;

use serde::Deserialize;
use serde_json::{json, Value};

use womctl_core::bundled;
use womctl_core::infostruct::InfoSchema;
use womctl_core::netgraph::{compute_delay_matrix, information_path};
use womctl_core::prescription::{count_strategies, CountMode, PrescriptionStrategy};
use womctl_core::solver::{self, Caps, Comparison, Method, SolveResult};
use womctl_core::sysmodel::{exact_strategy_cost, monte_carlo_cost, ControlStrategy, Instance, Problem};
use womctl_core::Error;

use crate::report::{digest, write_json, Failure, Report};
use crate::{Cli, Command, MethodArg};

pub const CAP_ENV: &str = "WOMCTL_CAP";

struct Loaded {
    digest: String,
    instance: Instance,
}

/// A path to an instance file, or the name of a bundled instance.
fn load(arg: &str) -> Result<Loaded, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("cannot read {arg}: {e}")))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Core(Error::Parse(format!("{arg} is not UTF-8"))))?;
        let instance = Instance::from_json(&text)?;
        return Ok(Loaded { digest: digest(&bytes), instance });
    }
    match bundled::by_name(arg) {
        Some(instance) => Ok(Loaded { digest: digest(instance.to_json().as_bytes()), instance }),
        None => Err(Failure::Io(format!(
            "{arg} is neither a file nor a bundled instance (bundled: {})",
            bundled::NAMES.join(", ")
        ))),
    }
}

fn caps(cli: &Cli) -> Result<Caps, Failure> {
    if let Some(cap) = cli.cap {
        return Ok(Caps::uniform(cap));
    }
    match std::env::var(CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Caps::uniform)
            .map_err(|_| Failure::Usage(format!("{CAP_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(Caps::default()),
    }
}

fn names(schema: &InfoSchema) -> Vec<String> {
    schema.iter().map(|v| v.to_string()).collect()
}

fn agent_label(r: &SolveResult) -> String {
    match (r.method, r.agent) {
        (Method::Brute, _) => "brute".into(),
        (Method::CommonInfo, _) => "common-info".into(),
        (Method::Prescription, Some(k)) => format!("agent {}", k + 1),
        (Method::Prescription, None) => "prescription".into(),
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Brute => "brute",
        Method::CommonInfo => "common-info",
        Method::Prescription => "prescription",
    }
}

fn result_json(r: &SolveResult) -> Value {
    json!({
        "method": method_name(r.method),
        "agent": r.agent.map(|k| k + 1),
        "optimal_cost": r.optimal_cost,
        "evaluated_cost": r.evaluated_cost,
        "search_size": r.search_size.to_string(),
        "wall_time": r.wall_time,
    })
}

fn print_results<'a>(rows: impl Iterator<Item = &'a SolveResult>) {
    println!("{:<14} {:>14} {:>14} {:>24} {:>10}", "solver", "optimal", "evaluated", "search size", "seconds");
    for r in rows {
        println!(
            "{:<14} {:>14.9} {:>14.9} {:>24} {:>10.3}",
            agent_label(r),
            r.optimal_cost,
            r.evaluated_cost,
            r.search_size.to_string(),
            r.wall_time
        );
    }
}

fn prescription_json(psi: &PrescriptionStrategy) -> Value {
    let laws: Vec<Value> = psi
        .laws
        .iter()
        .enumerate()
        .map(|(t, stage)| {
            Value::Array(
                stage
                    .iter()
                    .map(|law| {
                        json!({
                            "time": t,
                            "target": law.target + 1,
                            "conditioning": names(&law.conditioning),
                            "domain": names(&law.domain),
                            "tables": law.tables,
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    json!({ "owner": psi.owner + 1, "laws": laws })
}

/// Contents of a strategy file; only the control laws are read back.
#[derive(Deserialize)]
struct StrategyFile {
    control: ControlStrategy,
}

fn read_strategy(path: &Path) -> Result<ControlStrategy, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str::<StrategyFile>(&text)
        .map(|f| f.control)
        .map_err(|e| Failure::Core(Error::Parse(format!("strategy file {}: {e}", path.display()))))
}

fn comparison_json(problem: &Problem, cmp: &Comparison) -> Result<Value, Failure> {
    let counts = counts_json(problem)?;
    Ok(json!({
        "solvers": cmp.all().map(result_json).collect::<Vec<_>>(),
        "brute_skipped": cmp.brute.is_none(),
        "max_gap": cmp.max_gap,
        "consistent": cmp.consistent(),
        "counts": counts,
    }))
}

fn counts_json(problem: &Problem) -> Result<Value, Failure> {
    let brute = count_strategies(problem, CountMode::Brute)?;
    let agents = (0..problem.agents())
        .map(|k| count_strategies(problem, CountMode::Agent(k)).map(|c| c.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({ "brute": brute.to_string(), "agents": agents }))
}

fn mismatch(cmp: &Comparison) -> Failure {
    Failure::Core(Error::CostMismatch { what: format!("largest gap {:.3e} exceeds {:.0e}", cmp.max_gap, solver::COST_TOL) })
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let (mut report, outcome) = match &cli.command {
        Command::Demo { names } => {
            let mut report = Report::new("demo");
            let outcome = demo(cli, names, &mut report);
            (report, outcome)
        }
        cmd => {
            let (command, instance) = match cmd {
                Command::Validate { instance } => ("validate", instance),
                Command::Delays { instance } => ("delays", instance),
                Command::Schema { instance, .. } => ("schema", instance),
                Command::Counts { instance } => ("counts", instance),
                Command::Solve { instance, .. } => ("solve", instance),
                Command::Evaluate { instance, .. } => ("evaluate", instance),
                Command::Simulate { instance, .. } => ("simulate", instance),
                Command::Compare { instance } => ("compare", instance),
                Command::Demo { .. } => unreachable!(),
            };
            let loaded = load(instance)?;
            let mut report = Report::new(command);
            report.instance_digest = json!(loaded.digest);
            let outcome = single(cli, loaded.instance, &mut report);
            (report, outcome)
        }
    };
    report.time("total", start.elapsed().as_secs_f64());
    // a cost mismatch still produces a report
    match &outcome {
        Ok(()) | Err(Failure::Core(Error::CostMismatch { .. })) => {
            if let Some(path) = &cli.report {
                report.write(path)?;
            }
        }
        Err(_) => {}
    }
    outcome
}

fn single(cli: &Cli, instance: Instance, report: &mut Report) -> Result<(), Failure> {
    let caps = caps(cli)?;
    let t0 = Instant::now();
    let problem = instance.validate()?;
    report.time("validate", t0.elapsed().as_secs_f64());
    let sys = problem.system();
    match &cli.command {
        Command::Validate { .. } => {
            println!(
                "valid: {} agents, horizon {}, {} states, controls {:?}, observations {:?}",
                problem.agents(),
                problem.horizon(),
                sys.state_size,
                sys.control_sizes,
                sys.observation_sizes
            );
            report.results = json!({
                "valid": true,
                "agents": problem.agents(),
                "horizon": problem.horizon(),
                "state_size": sys.state_size,
                "control_sizes": sys.control_sizes,
                "observation_sizes": sys.observation_sizes,
                "static_memory": problem.instance().static_memory.is_some(),
            });
        }
        Command::Delays { .. } => {
            let net = &problem.instance().network;
            let d = compute_delay_matrix(net)?;
            println!("delay d[k][j] from agent k (rows) to agent j (columns):");
            for (k, row) in d.rows().iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
                println!("  {:>2}: {}", k + 1, cells.join(" "));
            }
            let mut paths = Vec::new();
            for from in 0..net.agents {
                for to in 0..net.agents {
                    if from != to {
                        let p = information_path(net, from, to)?;
                        let hops: Vec<usize> = p.agents.iter().map(|a| a + 1).collect();
                        println!("  path {} -> {}: {:?} (delay {})", from + 1, to + 1, hops, p.total_delay);
                        paths.push(json!({ "from": from + 1, "to": to + 1, "agents": hops, "delay": p.total_delay }));
                    }
                }
            }
            report.results = json!({ "delays": d.rows(), "paths": paths });
        }
        Command::Schema { time, .. } => {
            let tables = problem.tables();
            let times: Vec<usize> = match time {
                Some(t) if *t > problem.horizon() => {
                    return Err(Failure::Usage(format!("--time {t} is beyond the horizon {}", problem.horizon())))
                }
                Some(t) => vec![*t],
                None => (0..=problem.horizon()).collect(),
            };
            let mut out = Vec::new();
            for &t in &times {
                println!("t = {t}");
                for k in 0..problem.agents() {
                    let inacc: Vec<Value> = (k..problem.agents())
                        .map(|i| json!({ "i": i + 1, "vars": names(tables.inaccessible(t, k, i).unwrap()) }))
                        .collect();
                    println!("  agent {}", k + 1);
                    println!("    memory       {}", tables.memory(t, k));
                    println!("    accessible   {}", tables.accessible(t, k));
                    for i in k..problem.agents() {
                        println!("    L[{},{}]       {}", k + 1, i + 1, tables.inaccessible(t, k, i).unwrap());
                    }
                    println!("    state        X_{t} + {}", tables.equivalent(t, k));
                    println!("    new info     {}", tables.new_info(t, k));
                    out.push(json!({
                        "time": t,
                        "agent": k + 1,
                        "memory": names(tables.memory(t, k)),
                        "accessible": names(tables.accessible(t, k)),
                        "inaccessible": inacc,
                        "equivalent_state": names(tables.equivalent(t, k)),
                        "new_info": names(tables.new_info(t, k)),
                    }));
                }
            }
            report.results = json!({ "schemas": out });
        }
        Command::Counts { .. } => {
            let counts = counts_json(&problem)?;
            println!("brute force      {}", counts["brute"].as_str().unwrap());
            for (k, c) in counts["agents"].as_array().unwrap().iter().enumerate() {
                println!("agent {:<10} {}", k + 1, c.as_str().unwrap());
            }
            report.results = counts;
        }
        Command::Solve { method, agent, emit_strategy, emit_beliefs, .. } => {
            let r = match (method, agent) {
                (MethodArg::Prescription, Some(k)) => {
                    if *k == 0 || *k > problem.agents() {
                        return Err(Failure::Core(Error::AgentOutOfRange { index: *k, agents: problem.agents() }));
                    }
                    solver::solve_prescription(&problem, k - 1, caps)?
                }
                (MethodArg::Prescription, None) => return Err(Failure::Usage("--method prescription needs --agent".into())),
                (_, Some(_)) => return Err(Failure::Usage("--agent applies only to --method prescription".into())),
                (MethodArg::Brute, None) => solver::solve_brute_force(&problem, caps)?,
                (MethodArg::CommonInfo, None) => solver::solve_common_info_dp(&problem, caps)?,
            };
            print_results(std::iter::once(&r));
            report.time("solve", r.wall_time);
            report.results = result_json(&r);
            if let Some(path) = emit_strategy {
                let body = json!({
                    "method": method_name(r.method),
                    "agent": r.agent.map(|k| k + 1),
                    "control": r.strategy,
                    "prescription": r.prescription.as_ref().map(prescription_json),
                });
                write_json(path, &body)?;
            }
            if let Some(path) = emit_beliefs {
                let beliefs: Vec<Value> = r
                    .beliefs
                    .iter()
                    .map(|b| {
                        json!({
                            "time": b.state.time,
                            "agent": b.state.agent + 1,
                            "accessible": b.accessible,
                            "support": std::iter::once("X".to_string()).chain(names(&b.state.support)).collect::<Vec<_>>(),
                            "probs": b.state.probs,
                        })
                    })
                    .collect();
                write_json(path, &Value::Array(beliefs))?;
            }
        }
        Command::Evaluate { strategy, .. } => {
            let g = read_strategy(strategy)?;
            let cost = exact_strategy_cost(&problem, &g)?;
            println!("expected cost {:.9}", cost.expected_cost);
            for (t, c) in cost.per_stage_costs.iter().enumerate() {
                println!("  stage {t}: {c:.9}");
            }
            report.results = serde_json::to_value(&cost).expect("cost report serializes");
        }
        Command::Simulate { strategy, samples, .. } => {
            let g = read_strategy(strategy)?;
            let t1 = Instant::now();
            let est = monte_carlo_cost(&problem, &g, *samples, cli.seed)?;
            report.time("simulate", t1.elapsed().as_secs_f64());
            println!(
                "estimated cost {:.6} (stderr {:.6}, {} samples, seed {})",
                est.expected_cost,
                est.stderr.unwrap_or(0.0),
                samples,
                cli.seed
            );
            report.results = serde_json::to_value(&est).expect("cost report serializes");
        }
        Command::Compare { .. } => {
            let cmp = solver::compare_agents(&problem, caps)?;
            print_comparison(&cmp);
            report.results = comparison_json(&problem, &cmp)?;
            if !cmp.consistent() {
                return Err(mismatch(&cmp));
            }
        }
        Command::Demo { .. } => unreachable!(),
    }
    Ok(())
}

fn print_comparison(cmp: &Comparison) {
    print_results(cmp.all());
    if cmp.brute.is_none() {
        println!("(exhaustive search skipped: over the cap)");
    }
    println!("largest gap {:.3e}: {}", cmp.max_gap, if cmp.consistent() { "consistent" } else { "MISMATCH" });
}

fn demo(cli: &Cli, requested: &[String], report: &mut Report) -> Result<(), Failure> {
    let caps = caps(cli)?;
    let names: Vec<String> = if requested.is_empty() {
        vec!["static3".into(), "wom3".into()]
    } else {
        requested.to_vec()
    };
    let mut digests = serde_json::Map::new();
    let mut results = serde_json::Map::new();
    let mut failure = None;
    for name in &names {
        let instance = bundled::by_name(name)
            .ok_or_else(|| Failure::Io(format!("no bundled instance {name} (bundled: {})", bundled::NAMES.join(", "))))?;
        digests.insert(name.clone(), json!(digest(instance.to_json().as_bytes())));
        let problem = instance.validate()?;
        println!("== {name}");
        let t0 = Instant::now();
        let cmp = solver::compare_agents(&problem, caps)?;
        report.time(name, t0.elapsed().as_secs_f64());
        print_comparison(&cmp);
        results.insert(name.clone(), comparison_json(&problem, &cmp)?);
        if !cmp.consistent() && failure.is_none() {
            failure = Some(mismatch(&cmp));
        }
    }
    report.instance_digest = Value::Object(digests);
    report.results = Value::Object(results);
    failure.map_or(Ok(()), Err)
}
