//! Bell functionals compiled down to flat coefficient tensors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matkernel::{hermitian_eig, CMatrix, C64};
use crate::model::{born_behavior, fourier_measurement, Behavior, FourierPhases, QuantumModel, Scenario};

/// How the coefficient tensor should be read: a plain two-input scenario or
/// the click/no-click image of a `d`-outcome one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Standard,
    Binarised { d: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    pub scenario: Scenario,
    /// Indexed like [`Behavior`], see [`Scenario::index`].
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub name: String,
    /// Local bound of the full functional (coefficients plus offset), if known.
    pub lhv_bound: Option<f64>,
    /// Local constant as printed in the literature, kept for reference only.
    pub published_lhv_constant: Option<f64>,
    pub layout: Layout,
}

impl BellFunctional {
    pub fn new(scenario: Scenario, coeffs: Vec<f64>, offset: f64, name: impl Into<String>) -> Result<Self> {
        if coeffs.len() != scenario.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a scenario with {} cells",
                coeffs.len(),
                scenario.len()
            )));
        }
        Ok(BellFunctional {
            scenario,
            coeffs,
            offset,
            name: name.into(),
            lhv_bound: None,
            published_lhv_constant: None,
            layout: Layout::Standard,
        })
    }

    pub fn zero(scenario: Scenario, offset: f64) -> Self {
        BellFunctional::new(scenario, vec![0.0; scenario.len()], offset, "zero").expect("shape matches")
    }

    #[inline]
    pub fn coeff(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.scenario.index(a, b, x, y)]
    }

    pub(crate) fn add(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.scenario.index(a, b, x, y);
        self.coeffs[i] += v;
    }

    /// Contraction without the offset.
    pub fn raw(&self, p: &Behavior) -> Result<f64> {
        if p.scenario != self.scenario {
            return Err(Error::ScenarioMismatch(format!(
                "functional '{}' is defined on {:?}, behavior on {:?}",
                self.name, self.scenario, p.scenario
            )));
        }
        Ok(self.coeffs.iter().zip(p.as_slice()).map(|(c, q)| c * q).sum())
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }
}

pub fn evaluate(f: &BellFunctional, p: &Behavior) -> Result<f64> {
    Ok(f.raw(p)? + f.offset)
}

/// I_d = P(A₁≤B₁) + P(B₁≤A₂) + P(B₂≤A₁) − P(B₂≤A₂) − 2.
pub fn cglmp_functional(d: usize) -> BellFunctional {
    assert!(d >= 2, "CGLMP needs at least two outcomes");
    let mut f = BellFunctional::zero(Scenario::multi(d), -2.0);
    for a in 0..d {
        for b in 0..d {
            if a <= b {
                f.add(a, b, 0, 0, 1.0);
            }
            if b <= a {
                f.add(a, b, 1, 0, 1.0);
                f.add(a, b, 0, 1, 1.0);
                f.add(a, b, 1, 1, -1.0);
            }
        }
    }
    f.name = format!("cglmp{d}");
    f.lhv_bound = Some(0.0);
    f
}

/// Which shift enters the β coefficients of the SATWAP-type functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SatwapConvention {
    /// β_k from g(k + 3/4). This is the member of the family whose local
    /// constant, quantum optimum and bounded-dimension values line up with
    /// the published d = 4 numbers and experimental data.
    #[default]
    ThreeQuarter,
    /// β_k from g(k + 1/2), the literal transcription.
    Half,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatwapCoefficients {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// (argument, g(argument)) pairs used.
    pub g: Vec<(f64, f64)>,
    pub convention: SatwapConvention,
}

pub fn satwap_g(x: f64, d: usize) -> f64 {
    1.0 / (PI * (x + 0.25) / d as f64).tan()
}

pub fn satwap_coefficients(d: usize, convention: SatwapConvention) -> SatwapCoefficients {
    let h = d / 2;
    let shift = match convention {
        SatwapConvention::ThreeQuarter => 0.75,
        SatwapConvention::Half => 0.5,
    };
    let scale = (PI / 4.0).tan() / (2.0 * d as f64);
    let gh = satwap_g(h as f64, d);
    let mut g = vec![(h as f64, gh)];
    let mut alpha = Vec::with_capacity(h);
    let mut beta = Vec::with_capacity(h);
    for k in 0..h {
        let ga = satwap_g(k as f64, d);
        let gb = satwap_g(k as f64 + shift, d);
        g.push((k as f64, ga));
        g.push((k as f64 + shift, gb));
        alpha.push(scale * (ga - gh));
        beta.push(scale * (gb - gh));
    }
    SatwapCoefficients { d, alpha, beta, g, convention }
}

/// Published local constant of the four-outcome functional.
pub const SATWAP4_PUBLISHED_LHV: f64 = 1.798;

pub fn satwap_functional(d: usize) -> BellFunctional {
    satwap_functional_with(d, SatwapConvention::default())
}

/// Σ_k α_k P_k − β_k Q_k minus the local constant. For d = 4 the constant is
/// the published 1.798; otherwise it is the enumerated local maximum.
pub fn satwap_functional_with(d: usize, convention: SatwapConvention) -> BellFunctional {
    assert!(d >= 2, "SATWAP needs at least two outcomes");
    let co = satwap_coefficients(d, convention);
    let mut f = BellFunctional::zero(Scenario::multi(d), 0.0);
    for k in 0..d / 2 {
        for j in 0..d {
            for i in 0..2 {
                let sh = i; // A_3 ≡ A_1 + 1
                f.add((j + k) % d, j, i, i, co.alpha[k]);
                f.add(j, (j + sh + k) % d, (i + 1) % 2, i, co.alpha[k]);
                f.add((j + d - k - 1) % d, j, i, i, -co.beta[k]);
                f.add(j, (j + sh + 2 * d - k - 1) % d, (i + 1) % 2, i, -co.beta[k]);
            }
        }
    }
    let exact = crate::lhv::lhv_bound_raw(&f).expect("two-input scenario is enumerable").value;
    f.name = match convention {
        SatwapConvention::ThreeQuarter => format!("satwap{d}"),
        SatwapConvention::Half => format!("satwap{d}-half"),
    };
    if d == 4 && convention == SatwapConvention::ThreeQuarter {
        f.offset = -SATWAP4_PUBLISHED_LHV;
        f.published_lhv_constant = Some(SATWAP4_PUBLISHED_LHV);
    } else {
        f.offset = -exact;
    }
    f.lhv_bound = Some(exact + f.offset);
    f
}

/// The two inequality families used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cglmp,
    Satwap,
}

impl Family {
    pub fn functional(self, d: usize) -> BellFunctional {
        match self {
            Family::Cglmp => cglmp_functional(d),
            Family::Satwap => satwap_functional(d),
        }
    }

    pub fn phases(self) -> FourierPhases {
        match self {
            Family::Cglmp => FourierPhases::cglmp(),
            Family::Satwap => FourierPhases::satwap(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Cglmp => "cglmp",
            Family::Satwap => "satwap",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cglmp" | "i" => Ok(Family::Cglmp),
            "satwap" | "s" => Ok(Family::Satwap),
            other => Err(Error::DomainError(format!("unknown family '{other}'"))),
        }
    }
}

/// Σ c_{abxy} A_{a|x} ⊗ B_{b|y} (offset not included).
pub fn bell_operator(f: &BellFunctional, meas_a: &[Vec<CMatrix>], meas_b: &[Vec<CMatrix>]) -> Result<CMatrix> {
    let s = f.scenario;
    if meas_a.len() != s.inputs_a || meas_b.len() != s.inputs_b {
        return Err(Error::ScenarioMismatch("measurement count differs from functional inputs".into()));
    }
    let da = meas_a[0][0].rows();
    let db = meas_b[0][0].rows();
    let mut op = DMatrix::<C64>::zeros(da * db, da * db);
    for x in 0..s.inputs_a {
        for y in 0..s.inputs_b {
            for b in 0..s.outcomes_b {
                // Σ_a c A_a, then one Kronecker product per (b, x, y)
                let mut left = DMatrix::<C64>::zeros(da, da);
                let mut any = false;
                for a in 0..s.outcomes_a {
                    let c = f.coeff(a, b, x, y);
                    if c != 0.0 {
                        left += meas_a[x][a].inner() * C64::new(c, 0.0);
                        any = true;
                    }
                }
                if any {
                    op += left.kronecker(meas_b[y][b].inner());
                }
            }
        }
    }
    Ok(CMatrix::from(op))
}

/// Fourier measurements of the family with the state that maximises the
/// functional for them (top eigenvector of the Bell operator).
pub fn optimal_model(family: Family, d: usize) -> Result<QuantumModel> {
    let phases = family.phases();
    let meas_a: Vec<Vec<CMatrix>> = phases.alice.iter().map(|&a| fourier_measurement(d, a, false)).collect();
    let meas_b: Vec<Vec<CMatrix>> = phases.bob.iter().map(|&b| fourier_measurement(d, b, true)).collect();
    let op = bell_operator(&family.functional(d), &meas_a, &meas_b)?;
    let psi = hermitian_eig(&op)?.vector(0);
    QuantumModel::new(CMatrix::outer(&psi), meas_a, meas_b, true)
}

pub fn optimal_behavior(family: Family, d: usize) -> Result<Behavior> {
    born_behavior(&optimal_model(family, d)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// value / max
    Ratio,
    /// (value − offset) / (max − offset): the ratio of raw contractions.
    ShiftedRatio,
}

/// Rescales `f` so that `quantum_max` maps to 1.
pub fn normalize_for_statistics(f: &BellFunctional, mode: NormalizationMode, quantum_max: f64) -> Result<BellFunctional> {
    let denom = match mode {
        NormalizationMode::Ratio => quantum_max,
        NormalizationMode::ShiftedRatio => quantum_max - f.offset,
    };
    if !(denom > 0.0) {
        return Err(Error::MaxNotPositive(denom));
    }
    let mut g = f.clone();
    g.coeffs.iter_mut().for_each(|c| *c /= denom);
    g.offset = match mode {
        NormalizationMode::Ratio => f.offset / denom,
        NormalizationMode::ShiftedRatio => 0.0,
    };
    g.lhv_bound = f.lhv_bound.map(|l| normalized_value(l, quantum_max, f.offset, mode));
    g.name = format!("{}-normalized", f.name);
    Ok(g)
}

/// Scalar version of [`normalize_for_statistics`].
pub fn normalized_value(value: f64, quantum_max: f64, offset: f64, mode: NormalizationMode) -> f64 {
    match mode {
        NormalizationMode::Ratio => value / quantum_max,
        NormalizationMode::ShiftedRatio => (value - offset) / (quantum_max - offset),
    }
}

/// Stored local bound, or the enumerated one when none is attached.
pub fn lhv_bound_or_enumerate(f: &BellFunctional) -> Result<f64> {
    match f.lhv_bound {
        Some(b) => Ok(b),
        None => crate::lhv::lhv_bound(f),
    }
}

/// v solving v·f(p_opt) + (1−v)·f(p_noise) = threshold.
pub fn critical_visibility(f: &BellFunctional, p_opt: &Behavior, p_noise: &Behavior, threshold: f64) -> Result<f64> {
    let hi = evaluate(f, p_opt)?;
    let lo = evaluate(f, p_noise)?;
    critical_visibility_from_values(hi, lo, threshold)
}

pub fn critical_visibility_from_values(value_opt: f64, value_noise: f64, threshold: f64) -> Result<f64> {
    let (min, max) = (value_opt.min(value_noise), value_opt.max(value_noise));
    if !(threshold >= min && threshold <= max) || value_opt == value_noise {
        return Err(Error::ThresholdOutsideRange { threshold, low: min, high: max });
    }
    Ok((threshold - value_noise) / (value_opt - value_noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mix_behaviors;

    #[test]
    fn cglmp_uniform_closed_form() {
        for d in 2..=6 {
            let f = cglmp_functional(d);
            let v = evaluate(&f, &Behavior::uniform(f.scenario)).unwrap();
            let pairs = (d * (d + 1) / 2) as f64;
            let closed = 2.0 * pairs / (d * d) as f64 - 2.0;
            assert!((v - closed).abs() < 1e-12, "d={d}");
        }
        let f = cglmp_functional(4);
        assert!((evaluate(&f, &Behavior::uniform(f.scenario)).unwrap() + 0.75).abs() < 1e-12);
    }

    #[test]
    fn cglmp4_optimal_model() {
        let p = born_behavior(&QuantumModel::cglmp4_optimal()).unwrap();
        let v = evaluate(&cglmp_functional(4), &p).unwrap();
        assert!((v - 0.365).abs() < 1e-3, "{v}");
    }

    #[test]
    fn satwap_coefficients_decrease() {
        for conv in [SatwapConvention::ThreeQuarter, SatwapConvention::Half] {
            let c = satwap_coefficients(4, conv);
            assert!(c.alpha[0] > c.alpha[1] && c.beta[0] > c.beta[1]);
        }
    }

    #[test]
    fn satwap_uniform_is_coefficient_sum() {
        for conv in [SatwapConvention::ThreeQuarter, SatwapConvention::Half] {
            let f = satwap_functional_with(4, conv);
            let c = satwap_coefficients(4, conv);
            let raw = f.raw(&Behavior::uniform(f.scenario)).unwrap();
            let expected: f64 = c.alpha.iter().sum::<f64>() - c.beta.iter().sum::<f64>();
            assert!((raw - expected).abs() < 1e-12);
        }
        // literal variant: (α₀+α₁) − (β₀+β₁) = 1/2 exactly
        let f = satwap_functional_with(4, SatwapConvention::Half);
        assert!((f.raw(&Behavior::uniform(f.scenario)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn satwap_preset_violates() {
        let f = satwap_functional(4);
        let p = born_behavior(&QuantumModel::satwap_optimal(4)).unwrap();
        let v = evaluate(&f, &p).unwrap();
        assert!(v > 0.29 && v < 0.31, "{v}");
    }

    #[test]
    fn cglmp_visibilities() {
        let f = cglmp_functional(4);
        let p = born_behavior(&QuantumModel::cglmp4_optimal()).unwrap();
        let u = Behavior::uniform(f.scenario);
        let v0 = critical_visibility(&f, &p, &u, 0.0).unwrap();
        let v3 = critical_visibility(&f, &p, &u, 0.305).unwrap();
        assert!((v0 - 0.673).abs() < 1e-3 && (v3 - 0.946).abs() < 1e-3, "{v0} {v3}");
        let top = evaluate(&f, &p).unwrap();
        assert!((critical_visibility(&f, &p, &u, top).unwrap() - 1.0).abs() < 1e-12);
        assert!(critical_visibility(&f, &p, &u, 5.0).is_err());
        let mixed = mix_behaviors(&p, &u, v3).unwrap();
        assert!((evaluate(&f, &mixed).unwrap() - 0.305).abs() < 1e-9);
    }

    #[test]
    fn statistics_normalization() {
        let f = cglmp_functional(4);
        assert!((normalized_value(0.305, 0.365, f.offset, NormalizationMode::Ratio) - 0.8356).abs() < 1e-4);
        let s = satwap_functional(4);
        let v = normalized_value(0.2117, 0.3019, s.offset, NormalizationMode::ShiftedRatio);
        assert!((v - 0.9571).abs() < 1e-4, "{v}");
        for mode in [NormalizationMode::Ratio, NormalizationMode::ShiftedRatio] {
            assert!((normalized_value(0.365, 0.365, -2.0, mode) - 1.0).abs() < 1e-15);
            let g = normalize_for_statistics(&f, mode, 0.365).unwrap();
            let p = born_behavior(&QuantumModel::cglmp4_optimal()).unwrap();
            let direct = normalized_value(evaluate(&f, &p).unwrap(), 0.365, f.offset, mode);
            assert!((evaluate(&g, &p).unwrap() - direct).abs() < 1e-12);
        }
        assert!(normalize_for_statistics(&f, NormalizationMode::Ratio, -0.1).is_err());
    }

    #[test]
    fn zero_functional_and_mismatch() {
        let f = BellFunctional::zero(Scenario::multi(3), 0.0);
        assert_eq!(evaluate(&f, &Behavior::uniform(f.scenario)).unwrap(), 0.0);
        assert!(evaluate(&f, &Behavior::uniform(Scenario::multi(2))).is_err());
        assert!(BellFunctional::new(Scenario::multi(2), vec![0.0; 3], 0.0, "bad").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = satwap_functional(4);
        let s = serde_json::to_string(&f).unwrap();
        let g: BellFunctional = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
