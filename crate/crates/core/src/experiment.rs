//! Configuration-driven experiments: characterize each cycle once, then run every
//! method for every repetition and compare against the noiseless output.
//!
//! All randomness derives from the master seed and the task's position
//! (repetition, method), so the worker schedule never changes the output.

use crate::cer::{characterize, CerReport, DEFAULT_DEPTHS};
use crate::circuit::{build_qpe_circuit, build_random_circuit, build_w_state_circuit, Circuit, Observable};
use crate::error::{Error, Result};
use crate::metrics::{improvement, qpe_decode, variation_distance, Distribution};
use crate::mitigation::{
    direct_estimate, nox_estimate, nox_plan, pec_estimate, pec_plan, rcal_measure, Amplification, ConfusionMatrix, Estimate,
};
use crate::noise::{synthetic_noise_model, NoiseModel, Signature};
use crate::simulator::exact::exact_run;
use crate::simulator::{derive_seed, Device, ReadoutNoise};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Worker count override.
pub const JOBS_ENV: &str = "QEM_JOBS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitSpec {
    WState { n: usize },
    Qpe { t: usize, kappa: f64 },
    Random { n: usize, m: usize, seed: u64 },
    Inline { circuit: serde_json::Value },
    File { path: PathBuf },
}

impl CircuitSpec {
    pub fn build(&self, base: &Path) -> Result<Circuit> {
        match self {
            CircuitSpec::WState { n } => build_w_state_circuit(*n),
            CircuitSpec::Qpe { t, kappa } => build_qpe_circuit(*t, *kappa),
            CircuitSpec::Random { n, m, seed } => build_random_circuit(*n, *m, *seed),
            CircuitSpec::Inline { circuit } => Circuit::from_json(&circuit.to_string()),
            CircuitSpec::File { path } => Circuit::load(base.join(path)),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            CircuitSpec::WState { n } => format!("w{n}"),
            CircuitSpec::Qpe { t, kappa } => format!("qpe_t{t}_k{kappa}"),
            CircuitSpec::Random { n, m, seed } => format!("random_n{n}_m{m}_s{seed}"),
            CircuitSpec::Inline { .. } => "inline".into(),
            CircuitSpec::File { path } => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        }
    }
}

/// Noise model source: a JSON file, or the synthetic per-cycle model of the given total error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Path(PathBuf),
    Synthetic { synthetic: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    /// `P(1|0)`, one value for all qubits or one per qubit.
    pub p10: Vec<f64>,
    pub p01: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CerSettings {
    pub depths: Vec<usize>,
    pub shots: usize,
    /// Use the true channels instead of benchmarking them.
    pub exact: bool,
}

impl Default for CerSettings {
    fn default() -> Self {
        CerSettings { depths: DEFAULT_DEPTHS.to_vec(), shots: 2000, exact: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "rem")]
    Rem,
    #[serde(rename = "pec")]
    Pec,
    #[serde(rename = "nox")]
    Nox,
    #[serde(rename = "pec+rem")]
    PecRem,
    #[serde(rename = "nox+rem")]
    NoxRem,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Rem => "rem",
            Method::Pec => "pec",
            Method::Nox => "nox",
            Method::PecRem => "pec+rem",
            Method::NoxRem => "nox+rem",
        }
    }

    fn uses_rem(self) -> bool {
        matches!(self, Method::Rem | Method::PecRem | Method::NoxRem)
    }
}

fn default_sigma() -> f64 {
    0.02
}
fn default_alpha() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    2
}
fn default_reps() -> usize {
    1
}
fn default_rcal_shots() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub circuit: CircuitSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub readout: Option<ReadoutSpec>,
    pub methods: Vec<Method>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: usize,
    #[serde(default = "default_true")]
    pub id_insert: bool,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub cer: CerSettings,
    #[serde(default = "default_rcal_shots")]
    pub rcal_shots: u64,
    /// Shots of the unmitigated run; defaults to `ceil(σ⁻²)`.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Observable tracked by the σ sweep; defaults to the most likely ideal outcome.
    #[serde(default)]
    pub observable: Option<Observable>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("sigma must lie in (0, 1), got {}", self.sigma));
        }
        if self.alpha < 2 {
            return bad(format!("alpha must be at least 2, got {}", self.alpha));
        }
        if self.id_insert && self.alpha % 2 == 0 {
            return bad(format!("identity insertion needs an odd alpha, got {}", self.alpha));
        }
        if let NoiseSpec::Path(p) = &self.noise {
            let p = self.base_dir.join(p);
            if !p.exists() {
                return bad(format!("noise model {} does not exist", p.display()));
            }
        }
        if let CircuitSpec::File { path } = &self.circuit {
            let p = self.base_dir.join(path);
            if !p.exists() {
                return bad(format!("circuit file {} does not exist", p.display()));
            }
        }
        if let Some(r) = &self.readout {
            if r.p10.is_empty() || r.p01.is_empty() {
                return bad("readout rates must not be empty".into());
            }
        }
        if self.methods.iter().any(|m| m.uses_rem()) && self.readout.is_none() {
            return bad("readout mitigation requested without a readout model".into());
        }
        Ok(())
    }

    fn noise_model(&self, c: &Circuit) -> Result<NoiseModel<f64>> {
        match &self.noise {
            NoiseSpec::Path(p) => NoiseModel::load(self.base_dir.join(p)),
            NoiseSpec::Synthetic { synthetic } => Ok(synthetic_noise_model(c, *synthetic)),
        }
    }

    fn readout_noise(&self, n: usize) -> Result<Option<ReadoutNoise>> {
        let expand = |v: &[f64]| -> Result<Vec<f64>> {
            match v.len() {
                1 => Ok(vec![v[0]; n]),
                l if l == n => Ok(v.to_vec()),
                l => Err(Error::Config(format!("{l} readout rates for {n} qubits"))),
            }
        };
        self.readout.as_ref().map(|r| Ok(ReadoutNoise { p10: expand(&r.p10)?, p01: expand(&r.p01)? })).transpose()
    }

    fn qpe_bits(&self) -> Option<usize> {
        match self.circuit {
            CircuitSpec::Qpe { t, .. } => Some(t),
            _ => None,
        }
    }
}

/// Everything shared by the runs of one configuration.
pub struct Prepared {
    pub circuit: Circuit,
    pub tag: String,
    pub noise: NoiseModel<f64>,
    pub device: Device,
    pub ideal: Distribution<f64>,
    pub reports: Vec<CerReport>,
    pub confusion: Option<ConfusionMatrix>,
    pub observables: Vec<Observable>,
}

/// Builds the circuit and device, characterizes each distinct cycle once and calibrates readout.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let circuit = cfg.circuit.build(&cfg.base_dir).map_err(|e| Error::Config(e.to_string()))?;
    let noise = cfg.noise_model(&circuit).map_err(|e| Error::Config(e.to_string()))?;
    let readout = cfg.readout_noise(circuit.n())?;
    let mut device = Device::new(noise.clone());
    if let Some(r) = &readout {
        device = device.with_readout(r.clone());
    }
    let k = circuit.measured().len();
    let ideal = exact_run::<f64>(&circuit, None, &[])?.distribution;
    let needs_rates =
        cfg.methods.iter().any(|m| matches!(m, Method::Pec | Method::PecRem) || (matches!(m, Method::Nox | Method::NoxRem) && !cfg.id_insert));
    let reports = if needs_rates { cer_reports(cfg, &circuit, &noise, readout.as_ref())? } else { vec![] };
    let confusion = if cfg.methods.iter().any(|m| m.uses_rem()) {
        Some(rcal_measure(&device, circuit.n(), cfg.rcal_shots, derive_seed(cfg.seed, &[u64::MAX]))?.restrict(circuit.measured())?)
    } else {
        None
    };
    Ok(Prepared {
        tag: cfg.circuit.tag(),
        circuit,
        noise,
        device,
        ideal,
        reports,
        confusion,
        observables: Observable::all_projectors(k),
    })
}

fn cer_reports(
    cfg: &ExperimentConfig,
    circuit: &Circuit,
    noise: &NoiseModel<f64>,
    readout: Option<&ReadoutNoise>,
) -> Result<Vec<CerReport>> {
    if cfg.cer.exact {
        return circuit
            .distinct_hard_cycles()
            .iter()
            .map(|h| {
                let ch = noise.get(h)?.as_pauli(h.n()).ok_or_else(|| Error::CoherentNoiseInExactMode(h.label()))?;
                CerReport::exact(h, &ch)
            })
            .collect();
    }
    characterize(circuit, noise, readout, &cfg.cer.depths, cfg.cer.shots, cfg.k, derive_seed(cfg.seed, &[u64::MAX - 1]))
}

/// One method on one repetition.
pub fn run_method(cfg: &ExperimentConfig, prep: &Prepared, method: Method, sigma: f64, seed: u64) -> Result<Estimate> {
    let c = &prep.circuit;
    let obs = &prep.observables;
    let base = match method {
        Method::None | Method::Rem => {
            let shots = cfg.shots.unwrap_or_else(|| (1.0 / (sigma * sigma)).ceil() as u64);
            direct_estimate(c, &prep.device, obs, shots, seed)?
        }
        Method::Pec | Method::PecRem => pec_estimate(&pec_plan(c, &prep.reports, sigma)?, &prep.device, obs, seed)?,
        Method::Nox | Method::NoxRem => {
            let (amp, reports) = if cfg.id_insert {
                (Amplification::IdentityInsertion, None)
            } else {
                (Amplification::AppendErrors, Some(prep.reports.as_slice()))
            };
            nox_estimate(&nox_plan(c, cfg.alpha, amp, reports, sigma)?, &prep.device, obs, seed)?
        }
    };
    if method.uses_rem() {
        base.with_readout_correction(prep.confusion.as_ref().expect("calibrated when requested"))
    } else {
        Ok(base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpeSummary {
    pub kappa: f64,
    pub decoded: BTreeMap<String, f64>,
}

/// One repetition of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: usize,
    pub vd: f64,
    pub clipped_mass: f64,
    pub shots_used: u64,
    pub values: BTreeMap<String, crate::mitigation::ValueEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qpe: Option<QpeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub circuit: String,
    pub method: String,
    pub vd: f64,
    pub vd_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement: Option<f64>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub circuit: String,
    pub seed: u64,
    pub sigma: f64,
    pub cer: Vec<CerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub results: Vec<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Variation distance to the ideal output; for QPE circuits, between decoded κ̂ distributions.
fn score(cfg: &ExperimentConfig, prep: &Prepared, est: &Estimate) -> Result<(f64, f64, Option<QpeSummary>)> {
    let (dist, clipped) = est.clipped();
    match (cfg.qpe_bits(), &cfg.circuit) {
        (Some(t), CircuitSpec::Qpe { kappa, .. }) => {
            let d = qpe_decode(&dist, t)?;
            let ideal = qpe_decode(&prep.ideal, t)?;
            let vd = variation_distance(ideal.as_distribution(), d.as_distribution())?;
            Ok((vd, clipped, Some(QpeSummary { kappa: *kappa, decoded: d.to_map() })))
        }
        _ => Ok((variation_distance(&prep.ideal, &dist)?, clipped, None)),
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `f` on a pool of `jobs` workers (`QEM_JOBS` or all cores when `None`).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let jobs = jobs.or_else(|| std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok())).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Full pipeline; writes the report (and a CSV next to it) when `output` is set.
///
/// On failure a partial report carrying the error is still written before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let prep = prepare(cfg)?;
    let tasks: Vec<(usize, usize, Method)> = (0..cfg.repetitions)
        .flat_map(|rep| cfg.methods.iter().enumerate().map(move |(mi, &m)| (rep, mi, m)))
        .collect();
    let outcomes: Vec<Result<(Estimate, f64, f64, Option<QpeSummary>)>> = tasks
        .par_iter()
        .map(|&(rep, _, m)| {
            let seed = derive_seed(cfg.seed, &[rep as u64, m as u64]);
            let est = run_method(cfg, &prep, m, cfg.sigma, seed)?;
            let (vd, clipped, qpe) = score(cfg, &prep, &est)?;
            Ok((est, vd, clipped, qpe))
        })
        .collect();

    let mut failure = None;
    let mut by_method: BTreeMap<usize, Vec<RunRecord>> = BTreeMap::new();
    for (&(rep, mi, _), out) in tasks.iter().zip(outcomes) {
        match out {
            Ok((est, vd, clipped_mass, qpe)) => by_method.entry(mi).or_default().push(RunRecord {
                rep,
                vd,
                clipped_mass,
                shots_used: est.shots_used,
                values: est.values,
                qpe,
            }),
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
            }
        }
    }
    let mut results: Vec<MethodSummary> = cfg
        .methods
        .iter()
        .enumerate()
        .filter_map(|(mi, m)| {
            let runs = by_method.remove(&mi)?;
            let vds: Vec<f64> = runs.iter().map(|r| r.vd).collect();
            let (vd, sd) = mean_std(&vds);
            Some(MethodSummary {
                circuit: prep.tag.clone(),
                method: m.tag().to_string(),
                vd,
                vd_stderr: sd / (vds.len() as f64).sqrt(),
                improvement: None,
                runs,
            })
        })
        .collect();
    if let Some(base) = results.iter().find(|r| r.method == "none").map(|r| r.vd) {
        for r in results.iter_mut().filter(|r| r.method != "none") {
            r.improvement = improvement(r.vd, base).ok();
        }
    }
    let report = Report {
        circuit: prep.tag.clone(),
        seed: cfg.seed,
        sigma: cfg.sigma,
        cer: prep.reports.clone(),
        confusion: prep.confusion.clone(),
        results,
        failure: failure.as_ref().map(|e| e.to_string()),
    };
    if let Some(out) = &cfg.output {
        write_report(&report, out)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// One CSV row per (method, repetition, observable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub circuit: String,
    pub method: String,
    pub rep: usize,
    pub obs: String,
    pub vd: f64,
    pub est: f64,
    pub stderr: f64,
}

impl Report {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.results
            .iter()
            .flat_map(|m| {
                m.runs.iter().flat_map(move |r| {
                    r.values.iter().map(move |(obs, v)| CsvRow {
                        circuit: m.circuit.clone(),
                        method: m.method.clone(),
                        rep: r.rep,
                        obs: obs.clone(),
                        vd: r.vd,
                        est: v.est,
                        stderr: v.stderr,
                    })
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.csv_rows())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn write_csv<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn write_report(report: &Report, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, report.to_json()?)?;
    std::fs::write(out.with_extension("csv"), report.to_csv()?)?;
    Ok(())
}

/// Spread of the mitigated estimator at one σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub method: String,
    pub obs: String,
    pub mean: f64,
    pub std: f64,
    pub mean_stderr: f64,
    pub ratio: f64,
    pub vd: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub circuit: String,
    pub seed: u64,
    pub cer: Vec<CerReport>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.rows)
    }
}

/// Repeats the first mitigating method (NOX unless only PEC is requested) at each σ
/// and reports the empirical spread of the tracked observable.
pub fn sigma_sweep(cfg: &ExperimentConfig, sigmas: &[f64]) -> Result<SweepReport> {
    if sigmas.is_empty() {
        return Err(Error::Config("no sigma values to sweep".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(Error::Config(format!("sigma must lie in (0, 1), got {s}")));
    }
    let method = cfg
        .methods
        .iter()
        .copied()
        .find(|m| matches!(m, Method::Nox | Method::NoxRem))
        .or_else(|| cfg.methods.iter().copied().find(|m| matches!(m, Method::Pec | Method::PecRem)))
        .unwrap_or(Method::Nox);
    let mut cfg = cfg.clone();
    cfg.methods = vec![method];
    let prep = prepare(&cfg)?;
    let obs = match &cfg.observable {
        Some(o) => o.clone(),
        None => {
            let best = (0..prep.ideal.probs().len())
                .max_by(|&a, &b| prep.ideal.get(a).total_cmp(&prep.ideal.get(b)).then(b.cmp(&a)))
                .expect("non-empty");
            Observable::Projector(crate::circuit::bitstring(best, prep.ideal.bits()))
        }
    };
    let label = obs.label();
    let tasks: Vec<(usize, usize)> = (0..sigmas.len()).flat_map(|si| (0..cfg.repetitions).map(move |r| (si, r))).collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(si, rep)| {
            let seed = derive_seed(cfg.seed, &[si as u64, rep as u64]);
            let est = run_method(&cfg, &prep, method, sigmas[si], seed)?;
            let v = est.value(&obs).ok_or_else(|| Error::Config(format!("observable {label} is not measured")))?;
            let (vd, _, _) = score(&cfg, &prep, &est)?;
            Ok((v.est, v.stderr, vd))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let runs: Vec<&(f64, f64, f64)> =
                tasks.iter().zip(&outcomes).filter(|((s, _), _)| *s == si).map(|(_, o)| o).collect();
            let (mean, std) = mean_std(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
            let n = runs.len() as f64;
            SweepRow {
                sigma,
                method: method.tag().to_string(),
                obs: label.clone(),
                mean,
                std,
                mean_stderr: runs.iter().map(|r| r.1).sum::<f64>() / n,
                ratio: std / sigma,
                vd: runs.iter().map(|r| r.2).sum::<f64>() / n,
                reps: runs.len(),
            }
        })
        .collect();
    let report = SweepReport { circuit: prep.tag.clone(), seed: cfg.seed, cer: prep.reports.clone(), rows };
    if let Some(out) = &cfg.output {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, report.to_json()?)?;
        std::fs::write(out.with_extension("csv"), report.to_csv()?)?;
    }
    Ok(report)
}

/// CER only: one report per distinct hard-cycle signature.
pub fn characterize_only(cfg: &ExperimentConfig) -> Result<Vec<CerReport>> {
    cfg.validate()?;
    let circuit = cfg.circuit.build(&cfg.base_dir).map_err(|e| Error::Config(e.to_string()))?;
    let noise = cfg.noise_model(&circuit).map_err(|e| Error::Config(e.to_string()))?;
    let readout = cfg.readout_noise(circuit.n())?;
    let reports = cer_reports(cfg, &circuit, &noise, readout.as_ref())?;
    if let Some(out) = &cfg.output {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(reports)
}

/// Process exit code for an error: 2 configuration, 3 infeasible plan, 4 backend.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Json(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 4,
    }
}

/// Distinct signatures of a circuit, in first-use order.
pub fn signatures(c: &Circuit) -> Vec<Signature> {
    c.distinct_hard_cycles().iter().map(Signature::of).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = cfg(r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02}, "methods": ["none", "nox"]}"#);
        assert_eq!(c.alpha, 3);
        assert!(c.id_insert);
        assert_eq!(c.cer.depths, DEFAULT_DEPTHS.to_vec());
        for bad in [
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02}, "methods": []}"#,
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02}, "methods": ["rem"]}"#,
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": "missing.json", "methods": ["none"]}"#,
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02}, "methods": ["none"], "alpha": 2}"#,
            r#"{"circuit": {"builder": "ghz", "n": 2}, "noise": {"synthetic": 0.02}, "methods": ["none"]}"#,
        ] {
            let e = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{bad}: {e}");
        }
    }

    #[test]
    fn noiseless_runs_sit_at_the_sampling_floor() {
        let c = cfg(
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.0}, "methods": ["none", "pec", "nox"],
                "cer": {"exact": true}, "sigma": 0.05, "seed": 3}"#,
        );
        let r = run_experiment(&c).unwrap();
        for m in &r.results {
            assert!(m.vd <= (4.0f64 / 400.0).sqrt(), "{} {}", m.method, m.vd);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let c = cfg(
            r#"{"circuit": {"builder": "w_state", "n": 2}, "noise": {"synthetic": 0.02}, "methods": ["none", "pec", "nox"],
                "cer": {"shots": 200}, "sigma": 0.1, "repetitions": 2, "seed": 9}"#,
        );
        let a = with_jobs(Some(1), || run_experiment(&c)).unwrap().unwrap();
        let b = with_jobs(Some(4), || run_experiment(&c)).unwrap().unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
