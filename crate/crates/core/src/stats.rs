//! Coincidence-count tables and their finite-statistics analysis: Bell
//! values from data, Poisson Monte-Carlo errors, and Chernoff p-value bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::functionals::{evaluate, normalized_value, optimal_behavior, BellFunctional, Family, NormalizationMode};
use crate::matkernel::{CMatrix, C64};
use crate::model::{born_behavior, Behavior, QuantumModel, Scenario};
use nalgebra::DMatrix;

/// Published tables are rounded to four decimals.
pub const NORMALIZED_BLOCK_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    #[serde(alias = "raw-counts", alias = "counts")]
    Raw,
    #[serde(alias = "normalized-frequencies", alias = "normalised")]
    Normalized,
}

/// Sidecar metadata next to a count CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMeta {
    pub kind: CountKind,
    pub d: usize,
    #[serde(default)]
    pub assumed_total_per_setting: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub scenario: Scenario,
    pub kind: CountKind,
    pub assumed_total_per_setting: Option<f64>,
    /// Indexed like [`Behavior`].
    values: Vec<f64>,
}

impl CountTable {
    pub fn new(scenario: Scenario, kind: CountKind, assumed_total_per_setting: Option<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != scenario.len() {
            return Err(Error::DimensionMismatch(format!("{} cells for a scenario with {} cells", values.len(), scenario.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::DomainError(format!("count table entry {v} is negative or not finite")));
        }
        if let Some(t) = assumed_total_per_setting {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::DomainError(format!("assumed total per setting must be positive, got {t}")));
            }
        }
        let t = CountTable { scenario, kind, assumed_total_per_setting, values };
        if kind == CountKind::Normalized {
            for x in 0..scenario.inputs_a {
                for y in 0..scenario.inputs_b {
                    let s = t.block_sum(x, y);
                    if (s - 1.0).abs() > NORMALIZED_BLOCK_TOL {
                        return Err(Error::InvalidBehavior(format!("normalized block (x={x}, y={y}) sums to {s}")));
                    }
                }
            }
        }
        Ok(t)
    }

    /// Synthetic table of expected counts `total · p`.
    pub fn from_behavior(p: &Behavior, total_per_setting: f64) -> Result<Self> {
        let values = p.as_slice().iter().map(|q| q * total_per_setting).collect();
        CountTable::new(p.scenario, CountKind::Raw, None, values)
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.values[self.scenario.index(a, b, x, y)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block_sum(&self, x: usize, y: usize) -> f64 {
        block(&self.scenario, &self.values, x, y).iter().sum()
    }

    /// Count-valued cells: raw counts as is, normalized frequencies scaled
    /// by the assumed total.
    pub fn pseudo_counts(&self) -> Result<Vec<f64>> {
        match self.kind {
            CountKind::Raw => Ok(self.values.clone()),
            CountKind::Normalized => {
                let t = self.assumed_total_per_setting.ok_or(Error::MissingTotals)?;
                Ok(self.values.iter().map(|v| v * t).collect())
            }
        }
    }

    pub fn total_counts(&self) -> Result<f64> {
        Ok(self.pseudo_counts()?.iter().sum())
    }
}

fn block<'a>(s: &Scenario, v: &'a [f64], x: usize, y: usize) -> &'a [f64] {
    let start = s.index(0, 0, x, y);
    &v[start..start + s.outcomes_a * s.outcomes_b]
}

/// `table.csv` → `table.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Loads a count CSV and its JSON sidecar.
pub fn load_counts(path: impl AsRef<Path>) -> Result<CountTable> {
    let path = path.as_ref();
    let meta: CountMeta = serde_json::from_reader(std::fs::File::open(sidecar_path(path))?)?;
    parse_counts(std::fs::File::open(path)?, &meta)
}

/// Parses the `x,y,a,b,value` schema; inputs are 1-based, outcomes 0-based.
pub fn parse_counts<R: Read>(reader: R, meta: &CountMeta) -> Result<CountTable> {
    if meta.d < 2 {
        return Err(Error::InvalidScenario(format!("outcome count {} < 2", meta.d)));
    }
    let scenario = Scenario::multi(meta.d);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let expected = ["x", "y", "a", "b", "value"];
    if header.len() != expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        let column = header.iter().zip(expected).position(|(h, e)| h != e).unwrap_or(header.len().min(expected.len())) + 1;
        return Err(Error::ParseError {
            line: 1,
            column,
            message: format!("expected header 'x,y,a,b,value', found '{}'", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut values = vec![f64::NAN; scenario.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 5 {
            return Err(Error::ParseError { line, column: rec.len().min(5) + 1, message: format!("expected 5 fields, found {}", rec.len()) });
        }
        let int = |col: usize, lo: usize, hi: usize| -> Result<usize> {
            let s = &rec[col];
            match s.parse::<usize>() {
                Ok(v) if (lo..=hi).contains(&v) => Ok(v),
                _ => Err(Error::ParseError { line, column: col + 1, message: format!("'{s}' is not an integer in {lo}..={hi}") }),
            }
        };
        let x = int(0, 1, scenario.inputs_a)? - 1;
        let y = int(1, 1, scenario.inputs_b)? - 1;
        let a = int(2, 0, meta.d - 1)?;
        let b = int(3, 0, meta.d - 1)?;
        let v: f64 = rec[4].parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(|| Error::ParseError {
            line,
            column: 5,
            message: format!("'{}' is not a nonnegative number", &rec[4]),
        })?;
        let i = scenario.index(a, b, x, y);
        if !values[i].is_nan() {
            return Err(Error::ParseError { line, column: 1, message: format!("duplicate cell x={}, y={}, a={a}, b={b}", x + 1, y + 1) });
        }
        values[i] = v;
    }

    let missing: Vec<(usize, usize, usize, usize)> = cells(&scenario).filter(|&(a, b, x, y)| values[scenario.index(a, b, x, y)].is_nan()).collect();
    if let Some(&(a, b, x, y)) = missing.first() {
        return Err(Error::IncompleteTable { missing: missing.len(), x: x + 1, y: y + 1, a, b });
    }
    CountTable::new(scenario, meta.kind, meta.assumed_total_per_setting, values)
}

fn cells(s: &Scenario) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
    (0..s.inputs_a).flat_map(move |x| {
        (0..s.inputs_b).flat_map(move |y| (0..s.outcomes_a).flat_map(move |a| (0..s.outcomes_b).map(move |b| (a, b, x, y))))
    })
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
    Error::ParseError { line, column: 0, message: e.to_string() }
}

/// Divides every block by its sum.
pub fn behavior_from_counts(t: &CountTable) -> Result<Behavior> {
    normalize_blocks(&t.scenario, t.values.clone())
}

fn normalize_blocks(s: &Scenario, mut v: Vec<f64>) -> Result<Behavior> {
    let n = s.outcomes_a * s.outcomes_b;
    for x in 0..s.inputs_a {
        for y in 0..s.inputs_b {
            let start = s.index(0, 0, x, y);
            let blk = &mut v[start..start + n];
            let sum: f64 = blk.iter().sum();
            if sum <= 0.0 {
                return Err(Error::ZeroBlock { x: x + 1, y: y + 1 });
            }
            blk.iter_mut().for_each(|q| *q /= sum);
        }
    }
    Behavior::new(*s, v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    /// Added to every mean before resampling; 0 reproduces the naive pipeline.
    pub pseudo_count: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { trials: 10_000, seed: 0, pseudo_count: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub sigma: f64,
    pub mean: f64,
    pub trials: usize,
    pub pseudo_count: f64,
}

/// Trials per RNG stream; results do not depend on the thread count.
const MC_BLOCK: usize = 256;

pub fn poisson_mc_error(t: &CountTable, f: &BellFunctional, trials: usize, seed: u64) -> Result<f64> {
    Ok(poisson_mc(t, f, &McConfig { trials, seed, ..McConfig::default() })?.sigma)
}

/// Standard deviation of `f` over Poisson resamplings of every cell.
pub fn poisson_mc(t: &CountTable, f: &BellFunctional, cfg: &McConfig) -> Result<McSummary> {
    if f.scenario != t.scenario {
        return Err(Error::ScenarioMismatch(format!("functional '{}' does not match the count table", f.name)));
    }
    if cfg.trials < 2 {
        return Err(Error::DomainError(format!("need at least 2 trials, got {}", cfg.trials)));
    }
    if !(cfg.pseudo_count >= 0.0) {
        return Err(Error::DomainError(format!("pseudo-count {} is negative", cfg.pseudo_count)));
    }
    let means: Vec<f64> = t.pseudo_counts()?.into_iter().map(|m| m + cfg.pseudo_count).collect();
    let dists: Vec<Option<Poisson<f64>>> = means.iter().map(|&m| if m > 0.0 { Poisson::new(m).ok() } else { None }).collect();
    let s = t.scenario;

    let blocks = cfg.trials.div_ceil(MC_BLOCK);
    let per_block: Vec<Result<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(blk as u64);
            let n = MC_BLOCK.min(cfg.trials - blk * MC_BLOCK);
            let mut out = Vec::with_capacity(n);
            let mut cell = vec![0.0; means.len()];
            for _ in 0..n {
                for (c, d) in cell.iter_mut().zip(&dists) {
                    *c = d.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                }
                out.push(evaluate(f, &normalize_blocks(&s, cell.clone())?)?);
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(cfg.trials);
    for b in per_block {
        values.extend(b?);
    }
    // Shifted by the first sample so constant data give exactly zero.
    let n = values.len() as f64;
    let shift = values[0];
    let dm = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - shift - dm).powi(2)).sum::<f64>() / (n - 1.0);
    let mean = shift + dm;
    Ok(McSummary { sigma: var.sqrt(), mean, trials: values.len(), pseudo_count: cfg.pseudo_count })
}

/// Binary relative entropy D(x‖y) in nats.
pub fn kl_divergence(x: f64, y: f64) -> Result<f64> {
    for (name, v) in [("x", x), ("y", y)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::DomainError(format!("{name} = {v} outside (0,1)")));
        }
    }
    Ok(x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub threshold: f64,
    pub observed: f64,
    pub gap: f64,
    pub kl: f64,
    pub counts: f64,
    pub log10_p_value_bound: f64,
    /// `exp(−kl·N)`, floored at the smallest positive double when it underflows.
    pub p_value_bound: f64,
}

/// Tail bound P(Δ ≥ Δ_obs) ≤ exp(−D(observed‖threshold)·N) on normalized values.
pub fn chernoff_analysis(threshold: f64, observed: f64, counts: f64) -> Result<ChernoffReport> {
    if !(threshold < observed) {
        return Err(Error::DomainError(format!("observed {observed} does not exceed threshold {threshold}")));
    }
    if !(counts > 0.0 && counts.is_finite()) {
        return Err(Error::DomainError(format!("count total {counts} must be positive")));
    }
    let kl = kl_divergence(observed, threshold)?;
    let ln_p = -kl * counts;
    Ok(ChernoffReport {
        threshold,
        observed,
        gap: observed - threshold,
        kl,
        counts,
        log10_p_value_bound: ln_p / std::f64::consts::LN_10,
        p_value_bound: ln_p.exp().max(f64::from_bits(1)),
    })
}

/// Counts needed for the tail bound to reach `p_target`: ln(1/p)/D.
pub fn chernoff_min_counts(threshold: f64, observed: f64, p_target: f64) -> Result<f64> {
    if !(p_target > 0.0 && p_target < 1.0) {
        return Err(Error::DomainError(format!("target p-value {p_target} outside (0,1)")));
    }
    if !(threshold < observed) {
        return Err(Error::DomainError(format!("observed {observed} does not exceed threshold {threshold}")));
    }
    Ok(-p_target.ln() / kl_divergence(observed, threshold)?)
}

/// White-noise visibility v with f(p_exp) = v·f(p_opt) + (1−v)·f(p_noise).
pub fn visibility_report(f: &BellFunctional, p_exp: &Behavior, p_opt: &Behavior, p_noise: &Behavior) -> Result<f64> {
    let (e, o, n) = (evaluate(f, p_exp)?, evaluate(f, p_opt)?, evaluate(f, p_noise)?);
    let v = (e - n) / (o - n);
    if !(o > n) || !(v > 0.0 && v <= 1.0 + 1e-9) {
        return Err(Error::DomainError(format!("visibility {v} outside (0,1] (experiment {e}, optimum {o}, noise {n})")));
    }
    Ok(v.min(1.0))
}

/// Visibility against the preset optimum of `family` and uniform noise.
pub fn family_visibility(family: Family, p_exp: &Behavior) -> Result<f64> {
    let d = p_exp.scenario.outcomes_a;
    let f = family.functional(d);
    visibility_report(&f, p_exp, &optimal_behavior(family, d)?, &Behavior::uniform(f.scenario))
}

/// Ideal state, every projector replaced by μ·P + (1−μ)·𝟙/D on both sides;
/// solves f = observed for μ by bisection.
pub fn measurement_fidelity(f: &BellFunctional, model: &QuantumModel, observed: f64) -> Result<f64> {
    let value = |mu: f64| -> Result<f64> { evaluate(f, &born_behavior(&noisy_measurements(model, mu)?)?) };
    let (mut lo, mut hi) = (0.0, 1.0);
    let (v_lo, v_hi) = (value(lo)?, value(hi)?);
    if !(v_hi > v_lo) || observed < v_lo || observed > v_hi + 1e-12 {
        return Err(Error::DomainError(format!("observed value {observed} outside [{v_lo}, {v_hi}] reachable by measurement noise")));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? < observed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn noisy_measurements(model: &QuantumModel, mu: f64) -> Result<QuantumModel> {
    let dim = model.dim;
    let noisy = |sets: &Vec<Vec<CMatrix>>| -> Vec<Vec<CMatrix>> {
        sets.iter()
            .map(|ops| {
                let w = C64::new((1.0 - mu) / ops.len() as f64, 0.0);
                let id = DMatrix::<C64>::identity(dim, dim) * w;
                ops.iter().map(|p| CMatrix::from(p.inner() * C64::new(mu, 0.0) + &id)).collect()
            })
            .collect()
    };
    QuantumModel::new(model.state.clone(), noisy(&model.meas_a), noisy(&model.meas_b), mu == 1.0 && model.projective)
}

/// What to compare the data against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsTarget {
    pub quantum_max: f64,
    /// Raw-value threshold, e.g. the bound for a lower dimension.
    pub threshold: f64,
    pub mode: NormalizationMode,
    pub p_target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub functional: String,
    pub value: f64,
    pub sigma: f64,
    pub trials: usize,
    pub assumed_total_per_setting: Option<f64>,
    pub mode: NormalizationMode,
    pub normalized_value: f64,
    pub normalized_threshold: f64,
    pub gap: f64,
    pub kl: f64,
    pub counts: f64,
    pub p_value_bound: f64,
    pub log10_p_value_bound: f64,
    pub p_target: f64,
    pub min_counts: f64,
}

pub fn stats_report(t: &CountTable, f: &BellFunctional, target: &StatsTarget, mc: &McConfig) -> Result<StatsReport> {
    let value = evaluate(f, &behavior_from_counts(t)?)?;
    let sigma = poisson_mc(t, f, mc)?;
    let norm = |v: f64| normalized_value(v, target.quantum_max, f.offset, target.mode);
    let (observed, threshold) = (norm(value), norm(target.threshold));
    let counts = t.total_counts()?;
    let ch = chernoff_analysis(threshold, observed, counts)?;
    let min_counts = chernoff_min_counts(threshold, observed, target.p_target)?;
    let report = StatsReport {
        functional: f.name.clone(),
        value,
        sigma: sigma.sigma,
        trials: sigma.trials,
        assumed_total_per_setting: match t.kind {
            CountKind::Normalized => t.assumed_total_per_setting,
            CountKind::Raw => None,
        },
        mode: target.mode,
        normalized_value: observed,
        normalized_threshold: threshold,
        gap: ch.gap,
        kl: ch.kl,
        counts,
        p_value_bound: ch.p_value_bound,
        log10_p_value_bound: ch.log10_p_value_bound,
        p_target: target.p_target,
        min_counts,
    };
    let finite = [report.value, report.sigma, report.normalized_value, report.gap, report.kl, report.log10_p_value_bound, report.min_counts];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!("non-finite statistic in report for '{}'", f.name)));
    }
    Ok(report)
}
