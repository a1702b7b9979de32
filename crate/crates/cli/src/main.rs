use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vbstl::demo;
use vbstl::falsify::{run_campaign, CampaignConfig};
use vbstl::laws;
use vbstl::stl::{parse_with_params, Formula, SpecFile};
use vbstl::trace::Trace;
use vbstl::transform::{translate, BlockGraph, LoopMode, SwitchEncoding, TableValue, TranslateOptions};
use vbstl::vbool::{Monitor, Semantics, SemanticsConfig};

#[derive(Parser)]
#[command(name = "vbstl", version, about = "STL monitoring and falsification with VBool robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a block graph into an STL formula.
    Translate(TranslateArgs),
    /// Evaluate a formula on a trace. Exit status 0 if true, 1 if false, 2 on error.
    Monitor(MonitorArgs),
    /// Run a falsification campaign.
    Falsify(FalsifyArgs),
    /// Check the algebraic and semantic properties of the connectives.
    Laws(LawsArgs),
    /// Robustness of the four demo traces under max and additive semantics.
    Fig5(Fig5Args),
}

#[derive(Args)]
struct TranslateArgs {
    /// Block graph (JSON).
    #[arg(long)]
    graph: PathBuf,
    /// auto, templates, blackbox or unroll:N
    #[arg(long, default_value = "auto")]
    mode: String,
    /// implicative or disjunctive
    #[arg(long, default_value = "implicative")]
    encoding: String,
    /// Final simulation time in seconds.
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 4096)]
    entry_limit: usize,
    /// Also print the table of every block.
    #[arg(long)]
    tables: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MonitorArgs {
    /// Specification file.
    #[arg(long, conflicts_with = "formula", required_unless_present = "formula")]
    spec: Option<PathBuf>,
    /// Formula text.
    #[arg(long)]
    formula: Option<String>,
    /// Trace CSV with a `time` column.
    #[arg(long)]
    trace: PathBuf,
    /// max, additive, constant or random
    #[arg(long, default_value = "max")]
    semantics: String,
    /// Sample index to evaluate at.
    #[arg(long, default_value_t = 0)]
    at: usize,
    /// Parameter value, NAME=VALUE; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Robustness of `=` comparisons.
    #[arg(long)]
    eq_constant: Option<f64>,
    /// Left-hand-side scale of additive implication.
    #[arg(long)]
    implication_scale: Option<f64>,
    /// Robustness reported by the constant semantics.
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FalsifyArgs {
    /// Campaign file (JSON).
    config: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-run CSV. Without it the CSV goes to standard output and the
    /// summary to standard error.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving the best trace of every run.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Override the campaign seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LawsArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per law.
    #[arg(long, default_value_t = 100_000)]
    cases: usize,
}

#[derive(Args)]
struct Fig5Args {
    /// Write the four traces side by side to this CSV.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Write an isobar grid of both conjunctions to this CSV.
    #[arg(long)]
    isobars: Option<PathBuf>,
    /// Grid spacing of the isobar grid over [-5, 5].
    #[arg(long, default_value_t = 0.1)]
    step: f64,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value = value
        .trim()
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), value))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| anyhow!("cannot create {}: {e}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn json_number(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn cmd_translate(a: &TranslateArgs) -> Result<ExitCode> {
    let graph = BlockGraph::load(&a.graph)?;
    let mut opts = TranslateOptions::new(a.horizon);
    opts.loop_mode = a.mode.parse::<LoopMode>().map_err(anyhow::Error::msg)?;
    opts.encoding = a.encoding.parse::<SwitchEncoding>().map_err(anyhow::Error::msg)?;
    opts.entry_limit = a.entry_limit;
    let t = translate(&graph, &opts)?;
    let tables = |t: &vbstl::transform::Translation| -> Vec<(String, Vec<(String, String)>)> {
        t.tables
            .iter()
            .map(|(id, v)| {
                let rows = match v {
                    TableValue::Formula(t) => t
                        .entries
                        .iter()
                        .map(|e| (e.precondition.to_string(), e.consequent.to_string()))
                        .collect(),
                    TableValue::Signal(t) => t
                        .entries
                        .iter()
                        .map(|e| (e.precondition.to_string(), e.consequent.to_string()))
                        .collect(),
                };
                (id.clone(), rows)
            })
            .collect()
    };
    let mut out = io::stdout().lock();
    if a.json {
        let mut doc = json!({
            "formula": t.formula.to_string(),
            "instant": t.instant.as_ref().map(Formula::to_string),
            "size": t.formula.size(),
            "manifest": t.manifest,
        });
        if a.tables {
            let map: serde_json::Map<String, serde_json::Value> = tables(&t)
                .into_iter()
                .map(|(id, rows)| {
                    let rows = rows
                        .into_iter()
                        .map(|(p, c)| json!({"precondition": p, "consequent": c}))
                        .collect();
                    (id, serde_json::Value::Array(rows))
                })
                .collect();
            doc["tables"] = serde_json::Value::Object(map);
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(out, "{}", t.formula)?;
        for m in &t.manifest {
            let reason = serde_json::to_value(m.reason)?;
            writeln!(
                out,
                "# logged {} from block {} ({})",
                m.signal,
                m.block,
                reason.as_str().unwrap_or_default()
            )?;
        }
        if a.tables {
            for (id, rows) in tables(&t) {
                writeln!(out, "\n[{id}]")?;
                for (p, c) in rows {
                    writeln!(out, "{p} | {c}")?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_monitor(a: &MonitorArgs) -> Result<ExitCode> {
    let params: HashMap<String, f64> = a.params.iter().cloned().collect();
    let formula = match (&a.spec, &a.formula) {
        (Some(path), _) => SpecFile::load(path)?.formula(&params)?,
        (None, Some(text)) => parse_with_params(text, &params)?,
        (None, None) => bail!("give --spec or --formula"),
    };
    let file = File::open(&a.trace).map_err(|e| anyhow!("cannot open {}: {e}", a.trace.display()))?;
    let trace = Trace::from_csv(io::BufReader::new(file))?;
    let mut cfg = SemanticsConfig::with_semantics(a.semantics.parse::<Semantics>().map_err(anyhow::Error::msg)?);
    if let Some(k) = a.eq_constant {
        cfg.eq_constant = k;
    }
    if let Some(k) = a.implication_scale {
        cfg.implication_scale = k;
    }
    if let Some(m) = a.magnitude {
        cfg.constant_magnitude = m;
    }
    cfg.rng_seed = a.seed;
    cfg.validate().map_err(anyhow::Error::msg)?;
    let value = Monitor::new(cfg.clone()).evaluate(&formula, &trace, a.at)?;
    let mut out = io::stdout().lock();
    if a.json {
        let doc = json!({
            "formula": formula.to_string(),
            "semantics": cfg.semantics.name(),
            "at": a.at,
            "time": trace.times()[a.at],
            "truth": value.truth(),
            "robustness": json_number(value.robustness()),
            "signed": json_number(value.signed()),
        });
        writeln!(out, "{doc}")?;
    } else {
        writeln!(out, "truth: {}", value.truth())?;
        writeln!(out, "robustness: {}", value.robustness())?;
        writeln!(out, "signed: {}", value.signed())?;
    }
    Ok(if value.truth() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_falsify(a: &FalsifyArgs) -> Result<ExitCode> {
    let (config, base) = CampaignConfig::load(&a.config)?;
    let mut campaign = config.resolve(&base)?;
    if let Some(s) = a.seed {
        campaign.seed = s;
    }
    let names = campaign.model.parameter_space()?.names;
    let report = run_campaign(&campaign, a.jobs)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            report.write_csv(&names, &mut w)?;
            w.flush()?;
        }
        None => report.write_csv(&names, io::stdout().lock())?,
    }
    if let Some(dir) = &a.traces {
        std::fs::create_dir_all(dir).map_err(|e| anyhow!("cannot create {}: {e}", dir.display()))?;
        for r in &report.runs {
            if let Some(t) = &r.best_trace {
                let mut w = create(&dir.join(format!("run_{}.csv", r.run)))?;
                t.to_csv(&mut w)?;
                w.flush()?;
            }
        }
    }
    let s = &report.summary;
    let table = format!(
        "{:<10} {:>6} {:>8} {:>10}\n{:<10} {:>6} {:>8.1} {:>10}",
        "semantics",
        "Succ",
        "Iter",
        "Iter/Succ",
        campaign.semantics.semantics.name(),
        format!("{}/{}", s.succ, s.runs),
        s.iter,
        s.iter_per_succ_text()
    );
    if a.out.is_some() {
        println!("{table}");
    } else {
        eprintln!("{table}");
    }
    let failures: usize = report.runs.iter().map(|r| r.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} iterations failed to simulate or evaluate");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_laws(a: &LawsArgs) -> Result<ExitCode> {
    let reports = laws::run_all(a.seed, a.cases);
    let mut all = true;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} ({} cases, {} failures)", r.name, r.cases, r.failures);
        if let Some(e) = &r.example {
            println!("     first failure: {e}");
        }
        all &= r.passed();
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_fig5(a: &Fig5Args) -> Result<ExitCode> {
    if !(a.step > 0.0) {
        bail!("--step must be positive");
    }
    demo::write_demo_rows(io::stdout().lock())?;
    if let Some(p) = &a.traces {
        let mut w = create(p)?;
        demo::write_demo_traces(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.isobars {
        let mut w = create(p)?;
        demo::write_isobars(-5.0, 5.0, a.step, &mut w)?;
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Translate(a) => cmd_translate(a),
        Command::Monitor(a) => cmd_monitor(a),
        Command::Falsify(a) => cmd_falsify(a),
        Command::Laws(a) => cmd_laws(a),
        Command::Fig5(a) => cmd_fig5(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
