//! Run configuration: an optional TOML file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use fedpandemic::federation::{CountryAssignment, SimulationId, SimulationSpec, Weighting};
use fedpandemic::noise::{NoiseKind, NoiseMechanism};
use fedpandemic::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every field is optional here; unset fields fall back to the config file
/// and then to the defaults of [`RunConfig`].
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Word-vector file (text format, 50 dimensions). Defaults to the bundled table.
    #[arg(long)]
    pub embeddings_path: Option<PathBuf>,
    /// Survey table (TOML). Defaults to the bundled five-country table.
    #[arg(long)]
    pub surveys_path: Option<PathBuf>,
    /// Medical corpus, one term per line. Defaults to the bundled corpus.
    #[arg(long)]
    pub corpus_path: Option<PathBuf>,
    /// Simulation topology: I, II, III or IV.
    #[arg(long, value_parser = parse_simulation)]
    #[serde(default, deserialize_with = "de_from_str")]
    pub simulation: Option<SimulationId>,
    /// uniform_threshold, normal_threshold or laplace_dp.
    #[arg(long, value_parser = parse_mechanism)]
    #[serde(default, deserialize_with = "de_from_str")]
    pub mechanism: Option<NoiseKind>,
    #[arg(long)]
    pub noise_level: Option<f64>,
    /// Privacy budget of laplace_dp.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Master seed of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplies client sizes and counts (rounded up, at least 1).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Fraction of clients trained per round.
    #[arg(long)]
    pub participation_fraction: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Reuse every client's first-round data in all rounds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fixed_client_data: Option<bool>,
    /// by_examples or uniform.
    #[arg(long, value_parser = parse_weighting)]
    pub weighting: Option<Weighting>,
    /// per_person or per_client.
    #[arg(long, value_parser = parse_assignment)]
    pub country_assignment: Option<CountryAssignment>,
    /// Global epoch used for summaries (default: the last one).
    #[arg(long)]
    pub epoch: Option<usize>,
    /// `[sweep]` table of the config file; the sweep command's flags
    /// override it.
    #[arg(skip)]
    pub sweep: Option<SweepLayer>,
}

/// Sweep axis, values and seeds.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SweepLayer {
    /// noise (levels of --mechanism) or epsilon (laplace_dp budgets at --noise-level).
    #[arg(long, value_parser = parse_axis)]
    #[serde(default, deserialize_with = "de_axis")]
    pub axis: Option<Axis>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Comma-separated master seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

impl SweepLayer {
    pub fn overlay(self, over: SweepLayer) -> SweepLayer {
        SweepLayer {
            axis: over.axis.or(self.axis),
            values: over.values.or(self.values),
            seeds: over.seeds.or(self.seeds),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Noise,
    Epsilon,
}

/// A validated sweep request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepPlan {
    pub fn resolve(layer: SweepLayer, config: &RunConfig) -> Result<Self> {
        let axis = layer
            .axis
            .ok_or_else(|| Error::Config("a sweep axis is required (--axis noise|epsilon)".into()))?;
        let values = layer.values.unwrap_or_default();
        let seeds = layer.seeds.unwrap_or_default();
        if values.is_empty() {
            return Err(Error::Config("a sweep needs at least one value (--values)".into()));
        }
        if seeds.is_empty() {
            return Err(Error::Config("a sweep needs at least one seed (--seeds)".into()));
        }
        // reject bad values before any simulation starts
        for &v in &values {
            match axis {
                Axis::Noise => NoiseMechanism::new(config.mechanism, v, config.noise()?.epsilon())?,
                Axis::Epsilon => NoiseMechanism::laplace(config.noise_level, v)?,
            };
        }
        Ok(SweepPlan { axis, values, seeds })
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "noise" => Ok(Axis::Noise),
        "epsilon" => Ok(Axis::Epsilon),
        _ => Err(format!("expected noise or epsilon, got {s:?}")),
    }
}

fn de_axis<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Axis>, D::Error> {
    let s = String::deserialize(d)?;
    parse_axis(&s).map(Some).map_err(serde::de::Error::custom)
}

impl ConfigLayer {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            embeddings_path: over.embeddings_path.or(self.embeddings_path),
            surveys_path: over.surveys_path.or(self.surveys_path),
            corpus_path: over.corpus_path.or(self.corpus_path),
            simulation: over.simulation.or(self.simulation),
            mechanism: over.mechanism.or(self.mechanism),
            noise_level: over.noise_level.or(self.noise_level),
            epsilon: over.epsilon.or(self.epsilon),
            seed: over.seed.or(self.seed),
            scale: over.scale.or(self.scale),
            participation_fraction: over.participation_fraction.or(self.participation_fraction),
            output_dir: over.output_dir.or(self.output_dir),
            fixed_client_data: over.fixed_client_data.or(self.fixed_client_data),
            weighting: over.weighting.or(self.weighting),
            country_assignment: over.country_assignment.or(self.country_assignment),
            epoch: over.epoch.or(self.epoch),
            sweep: over.sweep.or(self.sweep),
        }
    }
}

/// Fully resolved configuration, echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub embeddings_path: Option<PathBuf>,
    pub surveys_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    pub simulation: SimulationId,
    pub mechanism: NoiseKind,
    pub noise_level: f64,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub scale: f64,
    pub participation_fraction: Option<f64>,
    pub output_dir: PathBuf,
    pub fixed_client_data: bool,
    pub weighting: Weighting,
    pub country_assignment: CountryAssignment,
    pub epoch: Option<usize>,
}

impl RunConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<Self> {
        let config = RunConfig {
            embeddings_path: layer.embeddings_path,
            surveys_path: layer.surveys_path,
            corpus_path: layer.corpus_path,
            simulation: layer.simulation.unwrap_or(SimulationId::I),
            mechanism: layer.mechanism.unwrap_or(NoiseKind::UniformThreshold),
            noise_level: layer.noise_level.unwrap_or(0.0),
            epsilon: layer.epsilon,
            seed: layer.seed,
            scale: layer.scale.unwrap_or(1.0),
            participation_fraction: layer.participation_fraction,
            output_dir: layer.output_dir.unwrap_or_else(|| PathBuf::from("fedpandemic-out")),
            fixed_client_data: layer.fixed_client_data.unwrap_or(false),
            weighting: layer.weighting.unwrap_or_default(),
            country_assignment: layer.country_assignment.unwrap_or_default(),
            epoch: layer.epoch,
        };
        config.noise()?;
        config.spec()?;
        if config.epoch == Some(0) {
            return Err(Error::Config("epoch must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn noise(&self) -> Result<NoiseMechanism> {
        let epsilon = match self.mechanism {
            NoiseKind::LaplaceDp => Some(
                self.epsilon
                    .ok_or_else(|| Error::Config("laplace_dp needs an epsilon".into()))?,
            ),
            _ => None,
        };
        NoiseMechanism::new(self.mechanism, self.noise_level, epsilon)
    }

    /// The simulation topology after scaling and participation overrides.
    pub fn spec(&self) -> Result<SimulationSpec> {
        let mut spec = SimulationSpec::standard(self.simulation).scaled(self.scale)?;
        if let Some(f) = self.participation_fraction {
            spec.participation_fraction = f;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed = ...` in the config file)".into()))
    }
}

fn parse_simulation(s: &str) -> Result<SimulationId> {
    s.parse()
}

fn parse_mechanism(s: &str) -> Result<NoiseKind> {
    s.parse()
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "by_examples" => Ok(Weighting::ByExamples),
        "uniform" => Ok(Weighting::Uniform),
        _ => Err(format!("expected by_examples or uniform, got {s:?}")),
    }
}

fn parse_assignment(s: &str) -> Result<CountryAssignment, String> {
    match s {
        "per_person" => Ok(CountryAssignment::PerPerson),
        "per_client" => Ok(CountryAssignment::PerClient),
        _ => Err(format!("expected per_person or per_client, got {s:?}")),
    }
}

fn de_from_str<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let s = String::deserialize(d)?;
    s.parse().map(Some).map_err(serde::de::Error::custom)
}
