//! Bell scenarios, behaviors and quantum realizations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matkernel::{hermitian_eig, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub inputs_a: usize,
    pub inputs_b: usize,
    pub outcomes_a: usize,
    pub outcomes_b: usize,
}

impl Scenario {
    pub fn new(inputs_a: usize, inputs_b: usize, outcomes_a: usize, outcomes_b: usize) -> Result<Self> {
        if inputs_a == 0 || inputs_b == 0 || outcomes_a == 0 || outcomes_b == 0 {
            return Err(Error::InvalidScenario("all input/outcome counts must be at least 1".into()));
        }
        Ok(Scenario { inputs_a, inputs_b, outcomes_a, outcomes_b })
    }

    /// Two inputs and `d` outcomes per party.
    pub fn multi(d: usize) -> Self {
        Scenario { inputs_a: 2, inputs_b: 2, outcomes_a: d, outcomes_b: d }
    }

    /// `2d` two-outcome inputs per party: the click/no-click picture of a
    /// `d`-outcome scenario.
    pub fn binarised(d: usize) -> Self {
        Scenario { inputs_a: 2 * d, inputs_b: 2 * d, outcomes_a: 2, outcomes_b: 2 }
    }

    pub fn len(&self) -> usize {
        self.inputs_a * self.inputs_b * self.outcomes_a * self.outcomes_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat position of p(a,b|x,y): settings outermost, outcomes innermost.
    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.inputs_b + y) * self.outcomes_a + a) * self.outcomes_b + b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub scenario: Scenario,
    p: Vec<f64>,
}

/// Entries more negative than this are rejected rather than clamped.
pub const NEGATIVITY_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-9;

impl Behavior {
    /// Validates, clamps tiny negatives to zero.
    pub fn new(scenario: Scenario, mut p: Vec<f64>) -> Result<Self> {
        Self::check_shape(&scenario, &p)?;
        for v in p.iter_mut() {
            if !v.is_finite() || *v < -NEGATIVITY_TOL {
                return Err(Error::InvalidBehavior(format!("entry {v} is negative or not finite")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let b = Behavior { scenario, p };
        for x in 0..scenario.inputs_a {
            for y in 0..scenario.inputs_b {
                let s = b.block_sum(x, y);
                if (s - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidBehavior(format!("block (x={x}, y={y}) sums to {s}")));
                }
            }
        }
        Ok(b)
    }

    /// Unchecked construction for affine images (binarised noise, witness
    /// arithmetic) that need not be probability distributions.
    pub(crate) fn from_raw(scenario: Scenario, p: Vec<f64>) -> Self {
        debug_assert_eq!(p.len(), scenario.len());
        Behavior { scenario, p }
    }

    fn check_shape(scenario: &Scenario, p: &[f64]) -> Result<()> {
        if p.len() != scenario.len() {
            return Err(Error::InvalidBehavior(format!(
                "{} entries for a scenario with {} cells",
                p.len(),
                scenario.len()
            )));
        }
        Ok(())
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let v = 1.0 / (scenario.outcomes_a * scenario.outcomes_b) as f64;
        Behavior { scenario, p: vec![v; scenario.len()] }
    }

    /// Product of deterministic responses `sa[x]`, `sb[y]`.
    pub fn deterministic(scenario: Scenario, sa: &[usize], sb: &[usize]) -> Result<Self> {
        if sa.len() != scenario.inputs_a || sb.len() != scenario.inputs_b {
            return Err(Error::ScenarioMismatch("strategy length differs from input count".into()));
        }
        if sa.iter().any(|&a| a >= scenario.outcomes_a) || sb.iter().any(|&b| b >= scenario.outcomes_b) {
            return Err(Error::ScenarioMismatch("strategy outcome out of range".into()));
        }
        let mut p = vec![0.0; scenario.len()];
        for x in 0..scenario.inputs_a {
            for y in 0..scenario.inputs_b {
                p[scenario.index(sa[x], sb[y], x, y)] = 1.0;
            }
        }
        Ok(Behavior { scenario, p })
    }

    pub fn from_fn(scenario: Scenario, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = vec![0.0; scenario.len()];
        for x in 0..scenario.inputs_a {
            for y in 0..scenario.inputs_b {
                for a in 0..scenario.outcomes_a {
                    for b in 0..scenario.outcomes_b {
                        p[scenario.index(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Behavior::new(scenario, p)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.scenario.index(a, b, x, y)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn block_sum(&self, x: usize, y: usize) -> f64 {
        let s = &self.scenario;
        let start = s.index(0, 0, x, y);
        self.p[start..start + s.outcomes_a * s.outcomes_b].iter().sum()
    }

    /// Largest deviation of a party's marginal across the other party's inputs.
    pub fn signaling_deviation(&self) -> f64 {
        let s = self.scenario;
        let mut dev = 0.0f64;
        for x in 0..s.inputs_a {
            for a in 0..s.outcomes_a {
                let m: Vec<f64> = (0..s.inputs_b).map(|y| (0..s.outcomes_b).map(|b| self.get(a, b, x, y)).sum()).collect();
                for w in m.windows(2) {
                    dev = dev.max((w[0] - w[1]).abs());
                }
            }
        }
        for y in 0..s.inputs_b {
            for b in 0..s.outcomes_b {
                let m: Vec<f64> = (0..s.inputs_a).map(|x| (0..s.outcomes_a).map(|a| self.get(a, b, x, y)).sum()).collect();
                for w in m.windows(2) {
                    dev = dev.max((w[0] - w[1]).abs());
                }
            }
        }
        dev
    }
}

/// Single-party marginal table m[outcome][input].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub party: Party,
    pub values: Vec<Vec<f64>>,
}

impl Marginal {
    pub fn get(&self, outcome: usize, input: usize) -> f64 {
        self.values[outcome][input]
    }
}

pub const SIGNALING_TOL: f64 = 1e-6;

/// Marginal of `party`; errors if it depends on the other party's input by
/// more than [`SIGNALING_TOL`].
pub fn marginal(p: &Behavior, party: Party) -> Result<Marginal> {
    marginal_checked(p, party, SIGNALING_TOL)
}

pub fn marginal_checked(p: &Behavior, party: Party, tol: f64) -> Result<Marginal> {
    let (m, dev) = marginal_parts(p, party);
    if dev > tol {
        return Err(Error::SignalingDetected { party: party_char(party), deviation: dev });
    }
    Ok(m)
}

/// Marginal averaged over the other party's inputs; never fails. Used for
/// experimental data, which signals at the level of shot noise.
pub fn averaged_marginal(p: &Behavior, party: Party) -> Marginal {
    marginal_parts(p, party).0
}

fn party_char(party: Party) -> char {
    match party {
        Party::A => 'A',
        Party::B => 'B',
    }
}

fn marginal_parts(p: &Behavior, party: Party) -> (Marginal, f64) {
    let s = p.scenario;
    let (no, ni, nother, nother_out) = match party {
        Party::A => (s.outcomes_a, s.inputs_a, s.inputs_b, s.outcomes_b),
        Party::B => (s.outcomes_b, s.inputs_b, s.inputs_a, s.outcomes_a),
    };
    let mut values = vec![vec![0.0; ni]; no];
    let mut dev = 0.0f64;
    for (o, row) in values.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let per: Vec<f64> = (0..nother)
                .map(|j| {
                    (0..nother_out)
                        .map(|k| match party {
                            Party::A => p.get(o, k, i, j),
                            Party::B => p.get(k, o, j, i),
                        })
                        .sum()
                })
                .collect();
            let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            dev = dev.max(hi - lo);
            *slot = per.iter().sum::<f64>() / nother as f64;
        }
    }
    (Marginal { party, values }, dev)
}

pub fn mix_behaviors(p1: &Behavior, p2: &Behavior, v: f64) -> Result<Behavior> {
    if p1.scenario != p2.scenario {
        return Err(Error::ScenarioMismatch("cannot mix behaviors of different scenarios".into()));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::DomainError(format!("mixing weight {v} outside [0,1]")));
    }
    let p = p1.p.iter().zip(&p2.p).map(|(a, b)| v * a + (1.0 - v) * b).collect();
    Ok(Behavior { scenario: p1.scenario, p })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub schmidt_coefficients: Vec<f64>,
}

impl StateSpec {
    pub fn maximally_entangled(d: usize) -> Self {
        StateSpec { schmidt_coefficients: vec![1.0 / (d as f64).sqrt(); d] }
    }

    /// The optimal four-dimensional CGLMP state quoted to four decimals.
    pub fn cglmp4_optimal() -> Self {
        StateSpec { schmidt_coefficients: vec![0.5686, 0.4204, 0.4204, 0.5686] }
    }
}

/// Σ_k λ_k |kk⟩ as a vector on C^d ⊗ C^d.
pub fn schmidt_vector(spec: &StateSpec) -> Result<DVector<C64>> {
    let l = &spec.schmidt_coefficients;
    let norm: f64 = l.iter().map(|x| x * x).sum();
    // Published coefficients carry four decimals; accept them as-is and renormalize.
    if l.iter().any(|&x| x < 0.0 || !x.is_finite()) || (norm - 1.0).abs() > 1e-3 {
        return Err(Error::NotNormalized(norm));
    }
    let d = l.len();
    let mut v = DVector::zeros(d * d);
    for (k, &lk) in l.iter().enumerate() {
        v[k * d + k] = C64::new(lk / norm.sqrt(), 0.0);
    }
    Ok(v)
}

/// Density matrix of Σ_k λ_k |kk⟩. Coefficients within 1e-3 of unit norm
/// (four-decimal published values) are renormalized; anything further off
/// is rejected.
pub fn build_schmidt_state(spec: &StateSpec) -> Result<CMatrix> {
    Ok(CMatrix::outer(&schmidt_vector(spec)?))
}

/// Rank-one projectors onto (1/√d) Σ_k e^{i2πk(±a+α)/d}|k⟩; the minus sign
/// on the outcome is used when `conjugate` is set.
pub fn fourier_measurement(d: usize, phase: f64, conjugate: bool) -> Vec<CMatrix> {
    let s = if conjugate { -1.0 } else { 1.0 };
    let norm = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|a| {
            let v = DVector::from_fn(d, |k, _| {
                let t = 2.0 * PI * k as f64 * (s * a as f64 + phase) / d as f64;
                C64::from_polar(norm, t)
            });
            CMatrix::outer(&v)
        })
        .collect()
}

/// Measurement phases for the Fourier-type presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierPhases {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl FourierPhases {
    pub fn cglmp() -> Self {
        FourierPhases { alice: vec![0.0, 0.5], bob: vec![-0.25, 0.25] }
    }

    /// Alice's phases carry the opposite sign to the printed (x−1/2)/2 so that
    /// Bob's conjugated bases align with the SATWAP correlators.
    pub fn satwap() -> Self {
        FourierPhases { alice: vec![-0.25, -0.75], bob: vec![0.5, 1.0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantumModel {
    pub dim: usize,
    pub state: CMatrix,
    pub meas_a: Vec<Vec<CMatrix>>,
    pub meas_b: Vec<Vec<CMatrix>>,
    pub projective: bool,
}

pub const STATE_TOL: f64 = 1e-10;
pub const POVM_TOL: f64 = 1e-9;

impl QuantumModel {
    pub fn new(state: CMatrix, meas_a: Vec<Vec<CMatrix>>, meas_b: Vec<Vec<CMatrix>>, projective: bool) -> Result<Self> {
        let n = state.rows();
        let dim = (n as f64).sqrt().round() as usize;
        let m = QuantumModel { dim, state, meas_a, meas_b, projective };
        m.validate()?;
        Ok(m)
    }

    /// Fourier measurements with the given phases on a Schmidt state.
    pub fn fourier(spec: &StateSpec, phases: &FourierPhases) -> Result<Self> {
        let d = spec.schmidt_coefficients.len();
        let state = build_schmidt_state(spec)?;
        let meas_a = phases.alice.iter().map(|&a| fourier_measurement(d, a, false)).collect();
        let meas_b = phases.bob.iter().map(|&b| fourier_measurement(d, b, true)).collect();
        QuantumModel::new(state, meas_a, meas_b, true)
    }

    /// The four-dimensional CGLMP optimum: published state and phases.
    pub fn cglmp4_optimal() -> Self {
        QuantumModel::fourier(&StateSpec::cglmp4_optimal(), &FourierPhases::cglmp()).expect("preset is valid")
    }

    pub fn satwap_optimal(d: usize) -> Self {
        QuantumModel::fourier(&StateSpec::maximally_entangled(d), &FourierPhases::satwap()).expect("preset is valid")
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            inputs_a: self.meas_a.len(),
            inputs_b: self.meas_b.len(),
            outcomes_a: self.meas_a.first().map_or(0, |m| m.len()),
            outcomes_b: self.meas_b.first().map_or(0, |m| m.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 || self.state.rows() != d * d || self.state.cols() != d * d {
            return Err(Error::InvalidModel(format!(
                "state is {}x{}, not a square of a local dimension",
                self.state.rows(),
                self.state.cols()
            )));
        }
        if !self.state.is_hermitian(STATE_TOL) {
            return Err(Error::InvalidModel("state is not Hermitian".into()));
        }
        let tr = self.state.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidModel(format!("state trace {tr}")));
        }
        if self.state.min_eigenvalue()? < -STATE_TOL {
            return Err(Error::InvalidModel("state is not positive semidefinite".into()));
        }
        for (name, meas) in [("A", &self.meas_a), ("B", &self.meas_b)] {
            if meas.is_empty() {
                return Err(Error::InvalidModel(format!("party {name} has no inputs")));
            }
            let k = meas[0].len();
            for (x, ops) in meas.iter().enumerate() {
                if ops.len() != k || k == 0 {
                    return Err(Error::InvalidModel(format!("party {name} input {x}: ragged outcome list")));
                }
                let mut sum = CMatrix::zeros(d, d);
                for op in ops {
                    if op.rows() != d || op.cols() != d {
                        return Err(Error::InvalidModel(format!("party {name} input {x}: operator of wrong size")));
                    }
                    if !op.is_hermitian(POVM_TOL) || op.min_eigenvalue()? < -POVM_TOL {
                        return Err(Error::InvalidModel(format!("party {name} input {x}: operator not PSD")));
                    }
                    sum = &sum + op;
                }
                if (&sum - &CMatrix::identity(d)).frobenius_norm() > POVM_TOL {
                    return Err(Error::InvalidModel(format!("party {name} input {x}: operators do not sum to identity")));
                }
                if self.projective {
                    for (i, p) in ops.iter().enumerate() {
                        for (j, q) in ops.iter().enumerate() {
                            let pq = p * q;
                            let target = if i == j { p.clone() } else { CMatrix::zeros(d, d) };
                            if (&pq - &target).frobenius_norm() > POVM_TOL {
                                return Err(Error::InvalidModel(format!(
                                    "party {name} input {x}: operators {i},{j} not orthogonal projectors"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Born-rule behavior Tr((A_{a|x} ⊗ B_{b|y}) ρ).
pub fn born_behavior(model: &QuantumModel) -> Result<Behavior> {
    model.validate()?;
    Ok(born_unchecked(model.dim, model.state.inner(), &model.meas_a, &model.meas_b, model.scenario()))
}

pub(crate) fn born_unchecked(
    d: usize,
    rho: &DMatrix<C64>,
    meas_a: &[Vec<CMatrix>],
    meas_b: &[Vec<CMatrix>],
    scenario: Scenario,
) -> Behavior {
    let mut p = vec![0.0; scenario.len()];
    for (x, ops_a) in meas_a.iter().enumerate() {
        for (a, op) in ops_a.iter().enumerate() {
            let sigma = reduce_on_a(d, rho, op.inner());
            for (y, ops_b) in meas_b.iter().enumerate() {
                for (b, opb) in ops_b.iter().enumerate() {
                    p[scenario.index(a, b, x, y)] = crate::matkernel::trace_product(opb.inner(), &sigma).re;
                }
            }
        }
    }
    Behavior::from_raw(scenario, p.into_iter().map(|v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect())
}

/// σ = tr_A[(A ⊗ I) ρ], so that Tr((A⊗B)ρ) = Tr(B σ).
fn reduce_on_a(d: usize, rho: &DMatrix<C64>, a: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |k, l| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += a[(i, j)] * rho[(j * d + k, i * d + l)];
            }
        }
        acc
    })
}

/// Schmidt coefficients of a pure bipartite state vector on C^d ⊗ C^d,
/// sorted descending.
pub fn schmidt_coefficients(psi: &DVector<C64>, d: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(d, d, |i, j| psi[i * d + j]);
    let mut s: Vec<f64> = m.singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Leading eigenvector of a density matrix (the state itself when pure).
pub fn dominant_vector(rho: &CMatrix) -> Result<DVector<C64>> {
    Ok(hermitian_eig(rho)?.vector(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_uniform() {
        let s = Scenario::multi(4);
        assert_eq!(s.len(), 64);
        let u = Behavior::uniform(s);
        assert!((u.get(3, 2, 1, 0) - 1.0 / 16.0).abs() < 1e-15);
        let m = marginal(&u, Party::A).unwrap();
        assert!(m.values.iter().flatten().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(Scenario::new(0, 1, 1, 1).is_err());
    }

    #[test]
    fn rejects_bad_behaviors() {
        let s = Scenario::multi(2);
        assert!(Behavior::new(s, vec![0.25; 15]).is_err());
        let mut p = vec![0.25; 16];
        p[0] = -0.1;
        assert!(Behavior::new(s, p).is_err());
        let mut p = vec![0.25; 16];
        p[0] = -1e-13;
        p[1] = 0.5 + 1e-13;
        let b = Behavior::new(s, p).unwrap();
        assert_eq!(b.get(0, 0, 0, 0), 0.0);
    }

    #[test]
    fn deterministic_marginals() {
        let s = Scenario::multi(3);
        let p = Behavior::deterministic(s, &[2, 0], &[1, 1]).unwrap();
        let ma = marginal(&p, Party::A).unwrap();
        assert_eq!(ma.get(2, 0), 1.0);
        assert_eq!(ma.get(0, 1), 1.0);
        assert_eq!(ma.get(1, 0), 0.0);
    }

    #[test]
    fn signaling_behavior_is_flagged() {
        let s = Scenario::multi(2);
        let p = Behavior::from_fn(s, |a, _b, _x, y| if a == y { 0.5 } else { 0.0 }).unwrap();
        assert!(matches!(marginal(&p, Party::A), Err(Error::SignalingDetected { .. })));
        let avg = averaged_marginal(&p, Party::A);
        assert!((avg.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fourier_bases() {
        let p = fourier_measurement(2, 0.0, false);
        assert!((p[0].get(0, 1).re - 0.5).abs() < 1e-15 && (p[1].get(0, 1).re + 0.5).abs() < 1e-15);
        for d in 2..6 {
            for &(ph, c) in &[(0.0, false), (0.37, true), (-0.25, false)] {
                let ops = fourier_measurement(d, ph, c);
                let mut sum = CMatrix::zeros(d, d);
                for op in &ops {
                    sum = &sum + op;
                }
                assert!((&sum - &CMatrix::identity(d)).frobenius_norm() < 1e-10);
            }
            // distinct bases for a non-integer phase shift: no shared vector
            let p0 = fourier_measurement(d, 0.0, false);
            let p1 = fourier_measurement(d, 0.5, false);
            for a in &p0 {
                for b in &p1 {
                    assert!((a * b).trace().re < 1.0 - 1e-6);
                }
            }
        }
        // qubit bases half a period apart are mutually unbiased
        let p0 = fourier_measurement(2, 0.0, false);
        let p1 = fourier_measurement(2, 0.5, false);
        for a in &p0 {
            for b in &p1 {
                assert!(((a * b).trace().re - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn schmidt_states() {
        let r = build_schmidt_state(&StateSpec { schmidt_coefficients: vec![1.0, 0.0, 0.0, 0.0] }).unwrap();
        assert!((r.get(0, 0).re - 1.0).abs() < 1e-15 && r.frobenius_norm() - 1.0 < 1e-15);
        let phi = build_schmidt_state(&StateSpec::maximally_entangled(4)).unwrap();
        assert!((phi.get(0, 5).re - 0.25).abs() < 1e-15);
        assert!(build_schmidt_state(&StateSpec { schmidt_coefficients: vec![1.0, 1.0] }).is_err());
        let opt = build_schmidt_state(&StateSpec::cglmp4_optimal()).unwrap();
        assert!((opt.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_gives_uniform() {
        let d = 4;
        let state = CMatrix::identity(d * d).scale(1.0 / 16.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let basis = |rng: &mut ChaCha8Rng| {
            let u = random_unitary(d, rng);
            (0..d).map(|k| CMatrix::outer(&u.inner().column(k).into_owned())).collect::<Vec<_>>()
        };
        let ma = vec![basis(&mut rng), basis(&mut rng)];
        let mb = vec![basis(&mut rng), basis(&mut rng)];
        let model = QuantumModel::new(state, ma, mb, true).unwrap();
        let p = born_behavior(&model).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-12));
    }

    #[test]
    fn born_is_affine_in_state() {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = |rng: &mut ChaCha8Rng| {
            let u = random_unitary(d, rng);
            (0..d).map(|k| CMatrix::outer(&u.inner().column(k).into_owned())).collect::<Vec<_>>()
        };
        let ma = vec![basis(&mut rng), basis(&mut rng)];
        let mb = vec![basis(&mut rng), basis(&mut rng)];
        let r1 = CMatrix::outer(&crate::matkernel::random_unit_vector(9, &mut rng));
        let r2 = CMatrix::outer(&crate::matkernel::random_unit_vector(9, &mut rng));
        let v = 0.37;
        let mixed = &r1.scale(v) + &r2.scale(1.0 - v);
        let p1 = born_behavior(&QuantumModel::new(r1, ma.clone(), mb.clone(), true).unwrap()).unwrap();
        let p2 = born_behavior(&QuantumModel::new(r2, ma.clone(), mb.clone(), true).unwrap()).unwrap();
        let pm = born_behavior(&QuantumModel::new(mixed, ma, mb, true).unwrap()).unwrap();
        let mix = mix_behaviors(&p1, &p2, v).unwrap();
        for (x, y) in pm.as_slice().iter().zip(mix.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(pm.signaling_deviation() < 1e-12);
    }

    #[test]
    fn mixing_endpoints() {
        let s = Scenario::multi(2);
        let p1 = Behavior::deterministic(s, &[0, 1], &[1, 0]).unwrap();
        let p2 = Behavior::uniform(s);
        assert_eq!(mix_behaviors(&p1, &p2, 1.0).unwrap(), p1);
        assert_eq!(mix_behaviors(&p1, &p2, 0.0).unwrap(), p2);
        assert!(mix_behaviors(&p1, &Behavior::uniform(Scenario::multi(3)), 0.5).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        let d = 2;
        let state = CMatrix::identity(4).scale(0.5);
        let m = vec![fourier_measurement(d, 0.0, false); 2];
        assert!(QuantumModel::new(state, m.clone(), m.clone(), true).is_err());
        let half = vec![vec![CMatrix::identity(2).scale(0.5), CMatrix::identity(2).scale(0.5)]; 2];
        let state = CMatrix::identity(4).scale(0.25);
        assert!(QuantumModel::new(state.clone(), half.clone(), m.clone(), true).is_err());
        assert!(QuantumModel::new(state, half, m, false).is_ok());
    }
}
