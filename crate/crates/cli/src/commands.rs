use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fedpandemic::classifier::save_checkpoint;
use fedpandemic::corpus::MedicalCorpus;
use fedpandemic::embedding::{EmbeddingTable, EMBEDDING_DIM};
use fedpandemic::evaluation::{build_evalset, epsilon_sweep, evaluate_run, noise_sweep, EvalSet, Experiment, SweepPoint, SweepResult};
use fedpandemic::noise::NoiseKind;
use fedpandemic::federation::{run_simulation, FederationContext, RunSettings, SimulationSpec};
use fedpandemic::survey::{bundled_surveys, load_surveys, CountrySurvey};
use fedpandemic::{Error, Result};
use serde::Serialize;

use crate::config::{Axis, ConfigLayer, RunConfig, SweepLayer, SweepPlan};
use crate::report::{accuracy_table, render};

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

struct Inputs {
    table: EmbeddingTable,
    surveys: Vec<CountrySurvey>,
    corpus: MedicalCorpus,
}

fn describe(path: &Option<PathBuf>) -> String {
    path.as_ref().map_or_else(|| "bundled".to_string(), |p| p.display().to_string())
}

fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let table = match &config.embeddings_path {
        Some(p) => EmbeddingTable::load(p, EMBEDDING_DIM)?,
        None => EmbeddingTable::bundled(),
    };
    let surveys = match &config.surveys_path {
        Some(p) => load_surveys(p)?,
        None => bundled_surveys(),
    };
    let corpus = match &config.corpus_path {
        Some(p) => MedicalCorpus::load(p)?,
        None => MedicalCorpus::bundled(),
    };
    log::debug!(
        "loaded {} embedding tokens, {} surveys, {} corpus terms",
        table.len(),
        surveys.len(),
        corpus.len()
    );
    Ok(Inputs { table, surveys, corpus })
}

/// Every survey symptom and corpus term without a vector, with its source.
fn unembeddable(inputs: &Inputs) -> Vec<(String, &'static str)> {
    let mut missing: Vec<(String, &'static str)> = Vec::new();
    for survey in &inputs.surveys {
        for sc in &survey.symptom_counts {
            let seen = missing.iter().any(|(m, _)| m == &sc.name);
            if !seen && inputs.table.encode(&sc.name).is_err() {
                missing.push((sc.name.clone(), "survey"));
            }
        }
    }
    for term in inputs.corpus.unembeddable(&inputs.table) {
        missing.push((term.to_string(), "corpus"));
    }
    missing
}

fn check_embeddable(inputs: &Inputs) -> Result<()> {
    let missing = unembeddable(inputs);
    if missing.is_empty() {
        return Ok(());
    }
    for (term, source) in &missing {
        eprintln!("unembeddable {source} term: {term}");
    }
    let names: Vec<&str> = missing.iter().map(|(t, _)| t.as_str()).collect();
    Err(Error::Config(format!("{} unembeddable term(s): {}", missing.len(), names.join(", "))))
}

pub fn validate(layer: ConfigLayer) -> Result<()> {
    let config = RunConfig::resolve(layer)?;
    let inputs = load_inputs(&config)?;
    let evalset = build_evalset(&inputs.surveys);
    let respondents: u64 = inputs.surveys.iter().map(|s| s.total).sum();
    println!(
        "embeddings: {} ({} tokens, dimension {}, {} malformed lines skipped)",
        describe(&config.embeddings_path),
        inputs.table.len(),
        inputs.table.dimension(),
        inputs.table.skipped_lines()
    );
    println!(
        "surveys: {} ({} countries, {} symptoms, {respondents} respondents)",
        describe(&config.surveys_path),
        inputs.surveys.len(),
        evalset.len()
    );
    println!("corpus: {} ({} terms)", describe(&config.corpus_path), inputs.corpus.len());
    check_embeddable(&inputs)?;
    println!("all survey symptoms and corpus terms are embeddable");
    let spec = config.spec()?;
    println!(
        "simulation {} at scale {}: {} clients of {}-{} persons, {} trained per round, {} global epochs",
        spec.id,
        config.scale,
        spec.n_clients,
        spec.size_range.0,
        spec.size_range.1,
        spec.selected_per_round(),
        spec.global_epochs
    );
    Ok(())
}

struct Prepared {
    config: RunConfig,
    spec: SimulationSpec,
    table: EmbeddingTable,
    ctx: FederationContext,
    evalset: EvalSet,
}

impl Prepared {
    fn new(config: RunConfig) -> Result<Self> {
        let spec = config.spec()?;
        if let Some(e) = config.epoch {
            if e > spec.global_epochs {
                return Err(Error::Config(format!(
                    "epoch {e} exceeds the {} global epochs of the run",
                    spec.global_epochs
                )));
            }
        }
        let inputs = load_inputs(&config)?;
        check_embeddable(&inputs)?;
        let ctx = FederationContext::new(&inputs.surveys, inputs.corpus, &inputs.table)?;
        let evalset = build_evalset(&inputs.surveys);
        Ok(Prepared {
            config,
            spec,
            table: inputs.table,
            ctx,
            evalset,
        })
    }

    fn settings(&self, seed: u64) -> Result<RunSettings> {
        Ok(RunSettings {
            weighting: self.config.weighting,
            country_assignment: self.config.country_assignment,
            fixed_client_data: self.config.fixed_client_data,
            ..RunSettings::new(seed, self.config.noise()?)
        })
    }

    fn experiment(&self) -> Experiment<'_> {
        Experiment {
            ctx: &self.ctx,
            embeddings: &self.table,
            evalset: &self.evalset,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<&'a SweepPlan>,
    simulation: &'a SimulationSpec,
    outputs: Vec<&'static str>,
    reproduce: String,
}

#[derive(Serialize)]
struct ReplayConfig<'a> {
    #[serde(flatten)]
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<&'a SweepPlan>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_results(dir: &Path, result: &SweepResult) -> Result<()> {
    let path = dir.join(PREDICTIONS_FILE);
    result.write_predictions_csv(create(&path)?).map_err(|e| with_path(e, &path))?;
    let path = dir.join(ACCURACY_FILE);
    result.write_accuracy_csv(create(&path)?).map_err(|e| with_path(e, &path))
}

/// Replaces the placeholder path the CSV writer reports with the real one.
fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

fn write_manifest(dir: &Path, command: &'static str, prepared: &Prepared, sweep: Option<&SweepPlan>, outputs: Vec<&'static str>) -> Result<()> {
    let replay = ReplayConfig {
        config: &prepared.config,
        sweep,
    };
    let toml_text = toml::to_string(&replay).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    write_file(&dir.join(CONFIG_FILE), &toml_text)?;
    let manifest = Manifest {
        tool: "fedpandemic",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: &prepared.config,
        sweep,
        simulation: &prepared.spec,
        outputs,
        reproduce: format!("fedpandemic {command} --config {}", dir.join(CONFIG_FILE).display()),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_file(&dir.join(MANIFEST_FILE), &(json + "\n"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn run(layer: ConfigLayer) -> Result<()> {
    let config = RunConfig::resolve(layer)?;
    let seed = config.require_seed()?;
    let prepared = Prepared::new(config)?;
    let dir = prepared.config.output_dir.clone();
    create_dir(&dir)?;

    let settings = prepared.settings(seed)?;
    log::info!(
        "simulation {}: {} clients, {} global epochs, seed {seed}",
        prepared.spec.id,
        prepared.spec.n_clients,
        prepared.spec.global_epochs
    );
    let run = run_simulation(&prepared.spec, &prepared.ctx, &settings)?;
    let point = SweepPoint::new(prepared.spec.id, &settings.noise, seed);
    let result = evaluate_run(point, &run, &prepared.evalset, &prepared.table)?;

    write_results(&dir, &result)?;
    let rounds_path = dir.join(ROUNDS_FILE);
    let mut rounds = create(&rounds_path)?;
    for report in &run.reports {
        let line = serde_json::to_string(report).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(rounds, "{line}").map_err(|e| Error::io(&rounds_path, e))?;
    }
    rounds.flush().map_err(|e| Error::io(&rounds_path, e))?;
    save_checkpoint(&run.final_model().params, dir.join(CHECKPOINT_FILE))?;
    let outputs = vec![PREDICTIONS_FILE, ACCURACY_FILE, ROUNDS_FILE, CHECKPOINT_FILE, CONFIG_FILE, MANIFEST_FILE];
    write_manifest(&dir, "run", &prepared, None, outputs)?;

    let (epoch, table) = accuracy_table(&result.accuracies, prepared.config.epoch);
    print!("{}", render(epoch, &table));
    if epoch > 0 {
        let (high, low) = result.group_means(&point, epoch);
        println!("mean prediction: high-prevalence symptoms {high:.4}, low-prevalence symptoms {low:.4}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Noise level of epsilon sweeps unless one is configured.
pub const EPSILON_SWEEP_NOISE_LEVEL: f64 = 0.5;

pub fn sweep(mut layer: ConfigLayer, sweep: SweepLayer) -> Result<()> {
    if sweep.values.as_ref().is_none_or(|v| v.is_empty()) {
        return Err(Error::Config("a sweep needs at least one value (--values)".into()));
    }
    if sweep.axis == Some(Axis::Epsilon) {
        // every point of an epsilon sweep uses the Laplace mechanism
        layer.mechanism = Some(NoiseKind::LaplaceDp);
        layer.noise_level = layer.noise_level.or(Some(EPSILON_SWEEP_NOISE_LEVEL));
        layer.epsilon = layer.epsilon.or_else(|| sweep.values.as_ref()?.first().copied());
    }
    let config = RunConfig::resolve(layer)?;
    let plan = SweepPlan::resolve(sweep, &config)?;
    let prepared = Prepared::new(config)?;
    let dir = prepared.config.output_dir.clone();
    create_dir(&dir)?;

    let base = prepared.settings(0)?;
    log::info!(
        "sweeping {} value(s) x {} seed(s) of simulation {}",
        plan.values.len(),
        plan.seeds.len(),
        prepared.spec.id
    );
    let result = match plan.axis {
        Axis::Noise => noise_sweep(
            &prepared.spec,
            prepared.config.mechanism,
            &plan.values,
            prepared.config.noise()?.epsilon(),
            &plan.seeds,
            &base,
            prepared.experiment(),
        )?,
        Axis::Epsilon => epsilon_sweep(
            &prepared.spec,
            &plan.values,
            prepared.config.noise_level,
            &plan.seeds,
            &base,
            prepared.experiment(),
        )?,
    };
    write_results(&dir, &result)?;
    write_manifest(&dir, "sweep", &prepared, Some(&plan), vec![PREDICTIONS_FILE, ACCURACY_FILE, CONFIG_FILE, MANIFEST_FILE])?;

    let (epoch, table) = accuracy_table(&result.accuracies, prepared.config.epoch);
    print!("{}", render(epoch, &table));
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn report(input: &Path, epoch: Option<usize>) -> Result<()> {
    let path = if input.is_dir() { input.join(ACCURACY_FILE) } else { input.to_path_buf() };
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let rows = SweepResult::read_accuracy_csv(file).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(&path, message),
        other => with_path(other, &path),
    })?;
    if rows.is_empty() {
        return Err(Error::parse(&path, "no accuracy rows"));
    }
    let (epoch, table) = accuracy_table(&rows, epoch);
    if table.is_empty() {
        return Err(Error::Config(format!("no rows for global epoch {epoch} in {}", path.display())));
    }
    print!("{}", render(epoch, &table));
    Ok(())
}
