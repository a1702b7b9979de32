//! Falsification by simulated annealing over a model's parameter box.

mod anneal;

pub use anneal::{accept, anneal_step, reflect, uniform_point, AnnealConfig};

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{parse_with_params, EvalError, Formula, ParseError, SpecFile, SpecFileError};
use crate::sut::{ModelConfig, SutError, SutModel};
use crate::trace::Trace;
use crate::transform::{
    execute_graph, translate, BlockGraph, LoopMode, SwitchEncoding, TemplateRegistry,
    TransformError, TranslateOptions,
};
use crate::vbool::{Monitor, SemanticsConfig, VBool};

#[derive(Debug, Error)]
pub enum FalsifyError {
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("campaign file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sut(#[from] SutError),
    #[error(transparent)]
    Spec(#[from] SpecFileError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("formula cannot be evaluated on the model's traces: {0}")]
    Eval(#[from] EvalError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// A block graph whose executed signals are added to every simulated trace,
/// so that signals logged by the translation are available to the monitor.
#[derive(Debug, Clone)]
pub struct Observer {
    pub graph: BlockGraph,
    pub templates: TemplateRegistry,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub model: SutModel,
    pub formula: Formula,
    pub observer: Option<Observer>,
    pub semantics: SemanticsConfig,
    pub max_iterations: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub anneal: AnnealConfig,
}

impl Campaign {
    pub fn new(model: SutModel, formula: Formula, semantics: SemanticsConfig) -> Self {
        Campaign {
            model,
            formula,
            observer: None,
            semantics,
            max_iterations: 1000,
            repetitions: 20,
            seed: 0,
            anneal: AnnealConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), FalsifyError> {
        if self.max_iterations == 0 {
            return Err(FalsifyError::Config("max_iterations must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(FalsifyError::Config("repetitions must be at least 1".into()));
        }
        self.anneal.validate().map_err(FalsifyError::Config)?;
        self.semantics.validate().map_err(FalsifyError::Config)?;
        self.model.parameter_space()?;
        Ok(())
    }

    /// Simulates one point and adds the observer's signals.
    pub fn trace_for(&self, point: &[f64]) -> Result<Trace, FalsifyError> {
        let trace = self.model.run(point)?;
        match &self.observer {
            Some(o) => Ok(execute_graph(&o.graph, &trace, &o.templates)?),
            None => Ok(trace),
        }
    }

    /// Checks at the centre of the box that every signal of the formula is
    /// produced. A failing simulation is not an error here.
    pub fn check_signals(&self) -> Result<(), FalsifyError> {
        let space = self.model.parameter_space()?;
        let centre: Vec<f64> = space.bounds.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
        let trace = match self.trace_for(&centre) {
            Ok(t) => t,
            Err(FalsifyError::Sut(_)) => return Ok(()),
            Err(e) => return Err(e),
        };
        for s in self.formula.signals() {
            if !trace.has_signal(&s) {
                return Err(FalsifyError::Eval(EvalError::Trace(
                    crate::trace::TraceError::UnknownSignal(s),
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub falsified: bool,
    pub iterations: usize,
    pub best_point: Vec<f64>,
    /// Signed robustness of `best_point`; infinite if no point was evaluated.
    pub best_robustness: f64,
    /// Trace of `best_point` (the counterexample when falsified).
    pub best_trace: Option<Trace>,
    /// Iterations whose simulation or evaluation failed.
    pub failures: usize,
}

struct Evaluated {
    point: Vec<f64>,
    value: VBool,
    trace: Trace,
}

fn evaluate(
    campaign: &Campaign,
    monitor: &mut Monitor,
    point: Vec<f64>,
) -> Result<Evaluated, FalsifyError> {
    let trace = campaign.trace_for(&point)?;
    let value = monitor.evaluate(&campaign.formula, &trace, 0)?;
    if value.robustness().is_nan() {
        return Err(FalsifyError::Eval(EvalError::NotANumber {
            expr: campaign.formula.to_string(),
            index: 0,
        }));
    }
    Ok(Evaluated {
        point,
        value,
        trace,
    })
}

/// One annealing run. Every simulation counts as an iteration, including
/// failed ones; the run stops at the first false verdict.
pub fn falsify_once(campaign: &Campaign, run: usize, run_seed: u64) -> Result<RunResult, FalsifyError> {
    let bounds = campaign.model.parameter_space()?.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let mut semantics = campaign.semantics.clone();
    semantics.rng_seed = semantics.rng_seed.wrapping_add(run_seed);
    let mut monitor = Monitor::new(semantics);
    let cfg = &campaign.anneal;

    let mut result = RunResult {
        run,
        seed: run_seed,
        falsified: false,
        iterations: 0,
        best_point: uniform_point(&bounds, &mut rng),
        best_robustness: f64::INFINITY,
        best_trace: None,
        failures: 0,
    };
    let mut current: Option<(Vec<f64>, f64)> = None;
    let mut temperature = cfg.initial_temperature;
    let mut stagnant = 0usize;
    let mut next = result.best_point.clone();

    while result.iterations < campaign.max_iterations {
        result.iterations += 1;
        let restart = current.is_none();
        match evaluate(campaign, &mut monitor, next.clone()) {
            Ok(e) => {
                let signed = e.value.signed();
                // a false verdict always wins, even at zero robustness
                let falsified = !e.value.truth();
                if falsified || signed < result.best_robustness || result.best_trace.is_none() {
                    result.best_robustness = signed;
                    result.best_point = e.point.clone();
                    result.best_trace = Some(e.trace);
                    stagnant = 0;
                } else {
                    stagnant += 1;
                }
                if falsified {
                    result.falsified = true;
                    break;
                }
                let take = match &current {
                    None => true,
                    Some((_, f)) => accept(*f, signed, temperature, &mut rng),
                };
                if take || restart {
                    current = Some((e.point, signed));
                }
            }
            Err(err) => {
                log::warn!(
                    "run {run}: iteration {} failed: {err}",
                    result.iterations
                );
                result.failures += 1;
                stagnant += 1;
            }
        }
        temperature *= cfg.cooling;
        next = if stagnant >= cfg.restart_after {
            stagnant = 0;
            temperature = cfg.initial_temperature;
            current = None;
            uniform_point(&bounds, &mut rng)
        } else {
            match &current {
                Some((p, _)) => anneal_step(p, temperature, &bounds, &mut rng),
                None => uniform_point(&bounds, &mut rng),
            }
        };
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub runs: usize,
    pub succ: usize,
    /// Mean iterations over all runs.
    pub iter: f64,
    /// Mean iterations over successful runs.
    pub iter_per_succ: Option<f64>,
}

impl CampaignSummary {
    pub fn from_runs(runs: &[RunResult]) -> Self {
        let succ: Vec<&RunResult> = runs.iter().filter(|r| r.falsified).collect();
        let mean = |xs: &[&RunResult]| {
            xs.iter().map(|r| r.iterations as f64).sum::<f64>() / xs.len() as f64
        };
        let all: Vec<&RunResult> = runs.iter().collect();
        CampaignSummary {
            runs: runs.len(),
            succ: succ.len(),
            iter: if runs.is_empty() { f64::NAN } else { mean(&all) },
            iter_per_succ: (!succ.is_empty()).then(|| mean(&succ)),
        }
    }

    pub fn iter_per_succ_text(&self) -> String {
        self.iter_per_succ
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "-".into())
    }
}

impl std::fmt::Display for CampaignSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Succ {}/{}  Iter {:.1}  Iter/Succ {}",
            self.succ,
            self.runs,
            self.iter,
            self.iter_per_succ_text()
        )
    }
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub runs: Vec<RunResult>,
    pub summary: CampaignSummary,
}

/// Runs `repetitions` independent searches with seeds `seed + i`, on up to
/// `jobs` threads (0 = rayon default). Results are ordered by run index.
pub fn run_campaign(campaign: &Campaign, jobs: usize) -> Result<CampaignReport, FalsifyError> {
    campaign.validate()?;
    campaign.check_signals()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| FalsifyError::Config(e.to_string()))?;
    let runs: Vec<RunResult> = pool.install(|| {
        (0..campaign.repetitions)
            .into_par_iter()
            .map(|i| falsify_once(campaign, i, campaign.seed.wrapping_add(i as u64)))
            .collect::<Result<_, _>>()
    })?;
    let summary = CampaignSummary::from_runs(&runs);
    Ok(CampaignReport { runs, summary })
}

impl CampaignReport {
    /// One row per run followed by a `summary` row. Columns `succ`, `iter` and
    /// `iter_per_succ` hold a run's own figures on run rows (a single run is a
    /// campaign of one) and the campaign figures on the summary row.
    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<(), FalsifyError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["run", "seed", "succ", "iter", "iter_per_succ", "robustness"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.runs {
            let mut row = vec![
                r.run.to_string(),
                r.seed.to_string(),
                u8::from(r.falsified).to_string(),
                r.iterations.to_string(),
                if r.falsified {
                    r.iterations.to_string()
                } else {
                    "-".into()
                },
                r.best_robustness.to_string(),
            ];
            row.extend(r.best_point.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        let s = &self.summary;
        let mut row = vec![
            "summary".to_string(),
            String::new(),
            s.succ.to_string(),
            format!("{:.1}", s.iter),
            s.iter_per_succ_text(),
            String::new(),
        ];
        row.extend(names.iter().map(|_| String::new()));
        w.write_record(&row)?;
        w.flush().map_err(|e| FalsifyError::Csv(e.into()))?;
        Ok(())
    }
}

fn default_max_iterations() -> usize {
    1000
}

fn default_repetitions() -> usize {
    20
}

/// Campaign file. Exactly one of `spec`, `formula` and `graph` gives the
/// requirement; paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub graph: Option<PathBuf>,
    /// Loop mode for `graph` (`auto`, `templates`, `blackbox`, `unroll:N`).
    #[serde(default)]
    pub loop_mode: Option<String>,
    #[serde(default)]
    pub encoding: Option<String>,
    /// Values for named parameters of the formula.
    #[serde(default)]
    pub params: HashMap<String, f64>,
    #[serde(default)]
    pub semantics: SemanticsConfig,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub anneal: AnnealConfig,
}

impl CampaignConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), FalsifyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FalsifyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn resolve(&self, base: &Path) -> Result<Campaign, FalsifyError> {
        let model = self.model.build()?;
        let given = [self.spec.is_some(), self.formula.is_some(), self.graph.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(FalsifyError::Config(
                "give exactly one of `spec`, `formula` and `graph`".into(),
            ));
        }
        if self.graph.is_none() && (self.loop_mode.is_some() || self.encoding.is_some()) {
            return Err(FalsifyError::Config(
                "`loop_mode` and `encoding` only apply to `graph`".into(),
            ));
        }
        let mut observer = None;
        let formula = if let Some(p) = &self.spec {
            SpecFile::load(base.join(p))?.formula(&self.params)?
        } else if let Some(text) = &self.formula {
            parse_with_params(text, &self.params)?
        } else {
            let graph = BlockGraph::load(base.join(self.graph.as_ref().expect("checked")))?;
            let mut opts = TranslateOptions::new(model.horizon);
            if let Some(m) = &self.loop_mode {
                opts.loop_mode = m.parse::<LoopMode>().map_err(FalsifyError::Config)?;
            }
            if let Some(e) = &self.encoding {
                opts.encoding = e.parse::<SwitchEncoding>().map_err(FalsifyError::Config)?;
            }
            let t = translate(&graph, &opts)?;
            if !t.manifest.is_empty() {
                observer = Some(Observer {
                    graph,
                    templates: opts.templates,
                });
            }
            t.formula
        };
        let campaign = Campaign {
            model,
            formula,
            observer,
            semantics: self.semantics.clone(),
            max_iterations: self.max_iterations,
            repetitions: self.repetitions,
            seed: self.seed,
            anneal: self.anneal.clone(),
        };
        campaign.validate()?;
        Ok(campaign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;
    use crate::sut::StaticSwitched;
    use crate::vbool::{eval_robust, Semantics};

    fn static_campaign(thresh: f64, spec: &str, semantics: Semantics) -> Campaign {
        Campaign::new(
            StaticSwitched::new(thresh).model(1.0, 0.1),
            parse_stl(spec).unwrap(),
            SemanticsConfig::with_semantics(semantics),
        )
    }

    fn run(iterations: usize, falsified: bool) -> RunResult {
        RunResult {
            run: 0,
            seed: 0,
            falsified,
            iterations,
            best_point: vec![],
            best_robustness: 0.0,
            best_trace: None,
            failures: 0,
        }
    }

    #[test]
    fn summary_arithmetic() {
        let s = CampaignSummary::from_runs(&vec![run(10, true); 20]);
        assert_eq!((s.succ, s.iter, s.iter_per_succ), (20, 10.0, Some(10.0)));
        let s = CampaignSummary::from_runs(&[
            run(100, true),
            run(300, true),
            run(1000, false),
            run(1000, false),
        ]);
        assert_eq!((s.succ, s.iter, s.iter_per_succ), (2, 600.0, Some(200.0)));
        let s = CampaignSummary::from_runs(&[run(1000, false)]);
        assert_eq!(s.iter_per_succ_text(), "-");
    }

    #[test]
    fn tautology_uses_full_budget() {
        let mut c = static_campaign(0.9, "alw (y >= -1000)", Semantics::Max);
        c.max_iterations = 50;
        let r = falsify_once(&c, 0, 7).unwrap();
        assert!(!r.falsified);
        assert_eq!(r.iterations, 50);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = static_campaign(0.9, StaticSwitched::SPEC, Semantics::Max);
        let a = falsify_once(&c, 0, 11).unwrap();
        let b = falsify_once(&c, 0, 11).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.best_point, b.best_point);
        assert_eq!(a.best_robustness.to_bits(), b.best_robustness.to_bits());
    }

    #[test]
    fn easy_threshold_is_falsified_and_consistent() {
        let c = static_campaign(0.7, StaticSwitched::SPEC, Semantics::Constant);
        let r = falsify_once(&c, 0, 1).unwrap();
        assert!(r.falsified);
        assert!(r.best_robustness < 0.0);
        assert!(r.iterations <= c.max_iterations);
        let again = eval_robust(&c.formula, r.best_trace.as_ref().unwrap(), 0, &c.semantics).unwrap();
        assert_eq!(again.signed(), r.best_robustness);
        assert!(r.best_point.iter().all(|&u| u >= 0.7));
    }

    #[test]
    fn campaign_is_ordered_and_parallel_safe() {
        let mut c = static_campaign(0.9, StaticSwitched::SPEC, Semantics::Additive);
        c.repetitions = 6;
        c.max_iterations = 200;
        let one = run_campaign(&c, 1).unwrap();
        let many = run_campaign(&c, 4).unwrap();
        let key = |r: &CampaignReport| {
            r.runs
                .iter()
                .map(|x| (x.run, x.seed, x.iterations, x.best_robustness.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&one), key(&many));
        let mut a = Vec::new();
        let mut b = Vec::new();
        let names = vec!["u1".to_string(), "u2".to_string()];
        one.write_csv(&names, &mut a).unwrap();
        many.write_csv(&names, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().last().unwrap().starts_with("summary,"));
    }

    #[test]
    fn unknown_signal_is_rejected_up_front() {
        let c = static_campaign(0.9, "alw (z >= 0)", Semantics::Max);
        assert!(matches!(run_campaign(&c, 1), Err(FalsifyError::Eval(_))));
    }

    #[test]
    fn config_resolution() {
        let json = r#"{
            "model": {"kind": "static_switched", "thresh": 0.9},
            "formula": "alw (y >= lo)",
            "params": {"lo": 0},
            "semantics": {"semantics": "constant"},
            "repetitions": 3
        }"#;
        let cfg: CampaignConfig = serde_json::from_str(json).unwrap();
        let c = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(c.formula, parse_stl("alw (y >= 0)").unwrap());
        assert_eq!((c.repetitions, c.max_iterations), (3, 1000));
        assert_eq!(c.semantics.semantics, Semantics::Constant);

        let both = r#"{"model": {"kind": "delta_sigma"}, "formula": "alw (x1 < 1)", "spec": "a.stl"}"#;
        let cfg: CampaignConfig = serde_json::from_str(both).unwrap();
        assert!(matches!(cfg.resolve(Path::new(".")), Err(FalsifyError::Config(_))));
    }
}
