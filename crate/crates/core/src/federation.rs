//! Federated averaging over a simulated client population.
//!
//! A round broadcasts the global parameters to a sample of clients. Each
//! selected client synthesizes its survey data, trains locally and returns
//! its parameters; the server replaces the global model with the weighted
//! mean of the returned parameters. Clients draw all randomness from streams
//! keyed by `(seed, client_id, round)`, and the mean is accumulated in
//! ascending client id order, so a run is bit-reproducible regardless of how
//! clients are scheduled across threads.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{init_params, train_local, MlpParameters, TrainConfig};
use crate::corpus::MedicalCorpus;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::noise::NoiseMechanism;
use crate::rng::{stream, Purpose};
use crate::survey::{assign_countries, build_distribution, CountrySurvey, SymptomDistribution};
use crate::synth::{synthesize_cohorts, ClientDataset, PhraseEncoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SimulationId {
    I,
    II,
    III,
    IV,
}

impl SimulationId {
    pub const ALL: [SimulationId; 4] = [SimulationId::I, SimulationId::II, SimulationId::III, SimulationId::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            SimulationId::I => "I",
            SimulationId::II => "II",
            SimulationId::III => "III",
            SimulationId::IV => "IV",
        }
    }
}

impl fmt::Display for SimulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimulationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        let id = match upper.as_str() {
            "I" | "1" => SimulationId::I,
            "II" | "2" => SimulationId::II,
            "III" | "3" => SimulationId::III,
            "IV" | "4" => SimulationId::IV,
            _ => return Err(Error::Config(format!("unknown simulation {s:?}"))),
        };
        Ok(id)
    }
}

/// Client topology of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub id: SimulationId,
    /// Inclusive range of persons per client.
    pub size_range: (usize, usize),
    pub n_clients: usize,
    pub local_epochs: usize,
    pub global_epochs: usize,
    pub participation_fraction: f64,
}

impl SimulationSpec {
    /// Full-size topology of each simulation.
    pub fn standard(id: SimulationId) -> Self {
        let (size_range, n_clients, participation_fraction) = match id {
            SimulationId::I => ((60_000, 60_000), 20, 1.0),
            SimulationId::II => ((10_000, 20_000), 80, 1.0),
            SimulationId::III => ((500, 2_000), 900, 1.0),
            SimulationId::IV => ((2, 12), 100_000, 0.05),
        };
        SimulationSpec {
            id,
            size_range,
            n_clients,
            local_epochs: 5,
            global_epochs: 5,
            participation_fraction,
        }
    }

    /// Multiplies client sizes and the client count by `scale`, rounding up
    /// and keeping every quantity at least 1.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Config(format!("scale {scale} outside (0, 1]")));
        }
        let s = |v: usize| ((v as f64 * scale).ceil() as usize).max(1);
        Ok(SimulationSpec {
            size_range: (s(self.size_range.0), s(self.size_range.1)),
            n_clients: s(self.n_clients),
            ..self.clone()
        })
    }

    pub fn selected_per_round(&self) -> usize {
        ((self.participation_fraction * self.n_clients as f64).ceil() as usize).clamp(1, self.n_clients)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid size range ({lo}, {hi})")));
        }
        if self.n_clients == 0 {
            return Err(Error::Config("n_clients must be positive".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be positive".into()));
        }
        let f = self.participation_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("participation_fraction {f} outside (0, 1]")));
        }
        if f * (self.n_clients as f64) < 1.0 {
            return Err(Error::Config(format!(
                "participation_fraction {f} selects no client out of {}",
                self.n_clients
            )));
        }
        Ok(())
    }
}

/// Granularity at which persons are assigned to countries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountryAssignment {
    /// Every person of a client comes from one country.
    PerClient,
    /// Each person is assigned independently; a client is a mix.
    #[default]
    PerPerson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weight each client by its number of training examples.
    #[default]
    ByExamples,
    /// Plain mean over clients.
    Uniform,
}

/// One member of the population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientSpec {
    pub client_id: u64,
    pub n_persons: usize,
    /// Persons per survey, indexed like the survey list.
    pub country_counts: Vec<usize>,
}

impl ClientSpec {
    /// The client's country when all its persons share one.
    pub fn country(&self) -> Option<usize> {
        let mut nonzero = self.country_counts.iter().enumerate().filter(|(_, &n)| n > 0);
        match (nonzero.next(), nonzero.next()) {
            (Some((c, _)), None) => Some(c),
            _ => None,
        }
    }
}

/// Draws client sizes uniformly from the size range and assigns countries.
pub fn build_population<R: Rng + ?Sized>(
    spec: &SimulationSpec,
    surveys: &[CountrySurvey],
    assignment: CountryAssignment,
    rng: &mut R,
) -> Result<Vec<ClientSpec>> {
    spec.validate()?;
    if surveys.is_empty() {
        return Err(Error::Config("at least one survey is required".into()));
    }
    let (lo, hi) = spec.size_range;
    let sizes: Vec<usize> = (0..spec.n_clients).map(|_| rng.random_range(lo..=hi)).collect();
    let mut population = Vec::with_capacity(spec.n_clients);
    match assignment {
        CountryAssignment::PerClient => {
            let countries = assign_countries(spec.n_clients, surveys, rng);
            for (i, (n, c)) in sizes.into_iter().zip(countries).enumerate() {
                let mut counts = vec![0; surveys.len()];
                counts[c] = n;
                population.push(ClientSpec {
                    client_id: i as u64,
                    n_persons: n,
                    country_counts: counts,
                });
            }
        }
        CountryAssignment::PerPerson => {
            for (i, n) in sizes.into_iter().enumerate() {
                let mut counts = vec![0; surveys.len()];
                for c in assign_countries(n, surveys, rng) {
                    counts[c] += 1;
                }
                population.push(ClientSpec {
                    client_id: i as u64,
                    n_persons: n,
                    country_counts: counts,
                });
            }
        }
    }
    Ok(population)
}

/// Parameters returned by one client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: u64,
    pub params: MlpParameters,
    pub n_examples: u64,
}

/// Weighted mean of client parameters.
///
/// Updates are taken in ascending `client_id` order and accumulated as
/// deviations from the first update, in double-double arithmetic with the
/// integer example counts (reduced by their gcd) as weights. Identical
/// updates are therefore an exact fixed point, scaling every count by a
/// common factor changes nothing, and the result is within a rounding of the
/// exact mean. A final clamp to the componentwise range of the inputs keeps
/// the result inside their convex hull.
pub fn fedavg_aggregate(updates: &[ClientUpdate], weighting: Weighting) -> Result<MlpParameters> {
    if updates.is_empty() {
        return Err(Error::NoSurvivingClients);
    }
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    let n_values = ordered[0].params.num_values();
    if ordered.iter().any(|u| u.params.num_values() != n_values) {
        return Err(Error::Shape("client updates differ in shape".into()));
    }
    let mut counts: Vec<u64> = match weighting {
        Weighting::ByExamples => ordered.iter().map(|u| u.n_examples).collect(),
        Weighting::Uniform => vec![1; ordered.len()],
    };
    let divisor = counts.iter().fold(0, |g, &n| gcd(g, n));
    if divisor == 0 {
        return Err(Error::NoSurvivingClients);
    }
    counts.iter_mut().for_each(|n| *n /= divisor);
    let total = counts.iter().sum::<u64>() as f64;
    let weights: Vec<f64> = counts.iter().map(|&n| n as f64).collect();

    let columns: Vec<Vec<f64>> = ordered.iter().map(|u| u.params.to_vec()).collect();
    let base = &columns[0];
    let mean: Vec<f64> = (0..n_values)
        .map(|i| {
            let mut acc = DoubleDouble::default();
            let (mut lo, mut hi) = (base[i], base[i]);
            for (col, &w) in columns.iter().zip(&weights) {
                let v = col[i];
                let (d, d_err) = two_sum(v, -base[i]);
                acc.add_product(w, d);
                acc.lo += w * d_err;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let shift = acc.div(total);
            let (s, s_err) = two_sum(base[i], shift.hi);
            (s + (s_err + shift.lo)).clamp(lo, hi)
        })
        .collect();
    ordered[0].params.with_values(&mean)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Error-free sum: `a + b == s + err` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Unevaluated sum `hi + lo` carrying about 106 bits.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let (s, s_err) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += s_err + p_err;
    }

    fn div(self, d: f64) -> DoubleDouble {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi) + self.lo;
        let (hi, lo) = two_sum(q, r / d);
        DoubleDouble { hi, lo }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub params: MlpParameters,
    pub round_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round_index: usize,
    pub selected_clients: usize,
    pub participating_clients: usize,
    pub skipped_empty_clients: usize,
    pub total_examples: u64,
    pub mean_local_loss: f64,
    #[serde(serialize_with = "serialize_secs")]
    pub wall_time: Duration,
}

fn serialize_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Everything fixed for the duration of a run.
#[derive(Debug, Clone)]
pub struct FederationContext {
    pub surveys: Vec<CountrySurvey>,
    pub distributions: Vec<SymptomDistribution>,
    pub corpus: MedicalCorpus,
    pub encoder: PhraseEncoder,
}

impl FederationContext {
    pub fn new(surveys: &[CountrySurvey], corpus: MedicalCorpus, embeddings: &EmbeddingTable) -> Result<Self> {
        let distributions: Vec<_> = surveys.iter().map(build_distribution).collect();
        let encoder = PhraseEncoder::new(embeddings, &corpus, &distributions)?;
        Ok(FederationContext {
            surveys: surveys.to_vec(),
            distributions,
            corpus,
            encoder,
        })
    }
}

/// Knobs of a federated run that are not part of the topology.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    pub noise: NoiseMechanism,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weighting: Weighting,
    pub country_assignment: CountryAssignment,
    /// Reuse each client's round-0 data in every round.
    pub fixed_client_data: bool,
}

impl RunSettings {
    pub fn new(seed: u64, noise: NoiseMechanism) -> Self {
        let train = TrainConfig::default();
        RunSettings {
            seed,
            noise,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            weighting: Weighting::default(),
            country_assignment: CountryAssignment::default(),
            fixed_client_data: false,
        }
    }

    fn train_config(&self, spec: &SimulationSpec) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            local_epochs: spec.local_epochs,
        }
    }
}

/// Synthesizes one client's data for `round`.
pub fn client_dataset(
    client: &ClientSpec,
    round: usize,
    ctx: &FederationContext,
    settings: &RunSettings,
) -> Result<ClientDataset> {
    let data_round = if settings.fixed_client_data { 0 } else { round as u64 };
    let mut rng = stream(settings.seed, Purpose::ClientData, client.client_id, data_round);
    let cohorts: Vec<(&SymptomDistribution, usize)> = ctx
        .distributions
        .iter()
        .zip(&client.country_counts)
        .map(|(d, &n)| (d, n))
        .collect();
    synthesize_cohorts(
        client.client_id,
        &cohorts,
        &ctx.corpus,
        &settings.noise,
        &ctx.encoder,
        &mut rng,
    )
}

/// Selects `spec.selected_per_round()` clients without replacement, in
/// ascending id order.
pub fn select_clients<'a>(
    population: &'a [ClientSpec],
    spec: &SimulationSpec,
    round: usize,
    seed: u64,
) -> Vec<&'a ClientSpec> {
    let k = spec.selected_per_round().min(population.len());
    if k == population.len() {
        return population.iter().collect();
    }
    let mut rng = stream(seed, Purpose::Selection, round as u64, 0);
    let mut picked = index::sample(&mut rng, population.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &population[i]).collect()
}

/// One broadcast, local-training and aggregation cycle.
pub fn run_round(
    model: &GlobalModel,
    population: &[ClientSpec],
    spec: &SimulationSpec,
    ctx: &FederationContext,
    settings: &RunSettings,
) -> Result<(GlobalModel, RoundReport)> {
    let started = Instant::now();
    let round = model.round_index;
    let train_config = settings.train_config(spec);
    let selected = select_clients(population, spec, round, settings.seed);

    let results: Vec<Option<(ClientUpdate, f64)>> = selected
        .par_iter()
        .map(|client| -> Result<Option<(ClientUpdate, f64)>> {
            let data = client_dataset(client, round, ctx, settings)?;
            if data.is_empty() {
                return Ok(None);
            }
            let mut rng = stream(settings.seed, Purpose::ClientTrain, client.client_id, round as u64);
            let outcome = train_local(&model.params, &data, &train_config, &mut rng)?;
            Ok(Some((
                ClientUpdate {
                    client_id: client.client_id,
                    params: outcome.params,
                    n_examples: data.len() as u64,
                },
                outcome.mean_loss,
            )))
        })
        .collect::<Result<_>>()?;

    let skipped = results.iter().filter(|r| r.is_none()).count();
    let (updates, losses): (Vec<ClientUpdate>, Vec<f64>) = results.into_iter().flatten().unzip();
    let params = fedavg_aggregate(&updates, settings.weighting)?;
    let report = RoundReport {
        round_index: round + 1,
        selected_clients: selected.len(),
        participating_clients: updates.len(),
        skipped_empty_clients: skipped,
        total_examples: updates.iter().map(|u| u.n_examples).sum(),
        mean_local_loss: losses.iter().sum::<f64>() / losses.len() as f64,
        wall_time: started.elapsed(),
    };
    Ok((
        GlobalModel {
            params,
            round_index: round + 1,
        },
        report,
    ))
}

/// Snapshots after every round; `snapshots[0]` is the initial model.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub population: Vec<ClientSpec>,
    pub snapshots: Vec<GlobalModel>,
    pub reports: Vec<RoundReport>,
}

impl SimulationRun {
    pub fn final_model(&self) -> &GlobalModel {
        self.snapshots.last().expect("at least the initial snapshot")
    }
}

pub fn run_simulation(spec: &SimulationSpec, ctx: &FederationContext, settings: &RunSettings) -> Result<SimulationRun> {
    spec.validate()?;
    settings.train_config(spec).validate()?;
    if ctx.distributions.is_empty() {
        return Err(Error::Config("at least one survey is required".into()));
    }
    let mut pop_rng = stream(settings.seed, Purpose::Population, 0, 0);
    let population = build_population(spec, &ctx.surveys, settings.country_assignment, &mut pop_rng)?;

    let mut model = GlobalModel {
        params: init_params(&mut stream(settings.seed, Purpose::Init, 0, 0)),
        round_index: 0,
    };
    let mut snapshots = vec![model.clone()];
    let mut reports = Vec::with_capacity(spec.global_epochs);
    for _ in 0..spec.global_epochs {
        let (next, report) = run_round(&model, &population, spec, ctx, settings)?;
        log::info!(
            "round {}: {} clients, {} skipped, loss {:.4}",
            report.round_index,
            report.participating_clients,
            report.skipped_empty_clients,
            report.mean_local_loss
        );
        model = next;
        snapshots.push(model.clone());
        reports.push(report);
    }
    Ok(SimulationRun {
        population,
        snapshots,
        reports,
    })
}
