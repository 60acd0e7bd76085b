//! Local-hidden-variable analysis: deterministic strategies, exact local
//! bounds and the locality linear program with its Bell witness.

use serde::{Deserialize, Serialize};

use crate::convex::simplex::{self, ColumnSource, Pricing};
use crate::convex::{SolveStatus, Tolerances};
use crate::error::{Error, Result};
use crate::functionals::{BellFunctional, Layout};
use crate::model::{averaged_marginal, Behavior, Party, Scenario};

/// Per-party enumeration guard.
pub const MAX_STRATEGIES_PER_PARTY: u128 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn behavior(&self, s: Scenario) -> Result<Behavior> {
        Behavior::deterministic(s, &self.a, &self.b)
    }
}

fn party_count(outcomes: usize, inputs: usize) -> Result<usize> {
    let n = (outcomes as u128).checked_pow(inputs as u32).unwrap_or(u128::MAX);
    if n > MAX_STRATEGIES_PER_PARTY {
        return Err(Error::TooLarge(n));
    }
    Ok(n as usize)
}

/// Digits of `idx` in base `radix`, least significant first.
fn decode(mut idx: usize, radix: usize, len: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(len) {
        *slot = idx % radix;
        idx /= radix;
    }
}

/// Streams every joint deterministic strategy, Bob's index varying fastest.
pub fn enumerate_strategies(s: Scenario) -> Result<impl Iterator<Item = DeterministicStrategy>> {
    let na = party_count(s.outcomes_a, s.inputs_a)?;
    let nb = party_count(s.outcomes_b, s.inputs_b)?;
    Ok((0..na).flat_map(move |ia| {
        (0..nb).map(move |ib| {
            let mut a = vec![0; s.inputs_a];
            let mut b = vec![0; s.inputs_b];
            decode(ia, s.outcomes_a, s.inputs_a, &mut a);
            decode(ib, s.outcomes_b, s.inputs_b, &mut b);
            DeterministicStrategy { a, b }
        })
    }))
}

pub fn strategy_count(s: Scenario) -> Result<u128> {
    Ok(party_count(s.outcomes_a, s.inputs_a)? as u128 * party_count(s.outcomes_b, s.inputs_b)? as u128)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LhvBound {
    /// max over strategies of Σ c·D (offset not included)
    pub value: f64,
    /// number of joint strategies attaining it (ties within 1e-12)
    pub maximizers: u128,
    pub argmax: DeterministicStrategy,
}

const TIE_TOL: f64 = 1e-12;

/// Exact maximum of the coefficient contraction over deterministic
/// strategies. Alice's responses are enumerated; Bob best-responds per input.
pub fn lhv_bound_raw(f: &BellFunctional) -> Result<LhvBound> {
    let s = f.scenario;
    let na = party_count(s.outcomes_a, s.inputs_a)?;
    party_count(s.outcomes_b, s.inputs_b)?;
    let mut sa = vec![0usize; s.inputs_a];
    let mut best = f64::NEG_INFINITY;
    let mut count: u128 = 0;
    let mut argmax = DeterministicStrategy { a: vec![0; s.inputs_a], b: vec![0; s.inputs_b] };
    let mut col = vec![0.0; s.outcomes_b];
    let mut bb = vec![0usize; s.inputs_b];
    for ia in 0..na {
        decode(ia, s.outcomes_a, s.inputs_a, &mut sa);
        let mut total = 0.0;
        let mut ties: u128 = 1;
        for y in 0..s.inputs_b {
            for (b, slot) in col.iter_mut().enumerate() {
                *slot = (0..s.inputs_a).map(|x| f.coeff(sa[x], b, x, y)).sum();
            }
            let (mut bi, mut bv) = (0, f64::NEG_INFINITY);
            for (b, &v) in col.iter().enumerate() {
                if v > bv {
                    bv = v;
                    bi = b;
                }
            }
            bb[y] = bi;
            ties *= col.iter().filter(|&&v| v >= bv - TIE_TOL).count() as u128;
            total += bv;
        }
        if total > best + TIE_TOL {
            best = total;
            count = ties;
            argmax = DeterministicStrategy { a: sa.clone(), b: bb.clone() };
        } else if total >= best - TIE_TOL {
            count += ties;
        }
    }
    Ok(LhvBound { value: best, maximizers: count, argmax })
}

/// Local bound of the full functional (offset included).
pub fn lhv_bound(f: &BellFunctional) -> Result<f64> {
    Ok(lhv_bound_raw(f)?.value + f.offset)
}

/// The behavior whose pairing with the witness is fixed to 1 + W(p) in the
/// locality program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Binarised image of the uniform multi-outcome behavior for binarised
    /// scenarios, the uniform behavior otherwise.
    #[default]
    Auto,
    /// The uniform behavior of the scenario itself.
    Uniform,
    /// Every probability cell weighted 1/(inputs_A·inputs_B).
    InputsOnly,
    /// Blocks (1/d², (d−1)/d², (d−1)/d², (d−1)²/d²): white noise seen
    /// through click/no-click measurements of a d-outcome device.
    BinarisedWhite { d: usize },
    Custom(Vec<f64>),
}

impl NoiseModel {
    pub fn vector(&self, s: Scenario) -> Result<Vec<f64>> {
        let uniform = || vec![1.0 / (s.outcomes_a * s.outcomes_b) as f64; s.len()];
        Ok(match self {
            NoiseModel::Auto => match binarised_dimension(s) {
                Some(d) => NoiseModel::BinarisedWhite { d }.vector(s)?,
                None => uniform(),
            },
            NoiseModel::Uniform => uniform(),
            NoiseModel::InputsOnly => vec![1.0 / (s.inputs_a * s.inputs_b) as f64; s.len()],
            NoiseModel::BinarisedWhite { d } => {
                if s.outcomes_a != 2 || s.outcomes_b != 2 {
                    return Err(Error::ScenarioMismatch("binarised noise needs two outcomes per input".into()));
                }
                let q = 1.0 / *d as f64;
                let marg = [q, 1.0 - q];
                let mut v = vec![0.0; s.len()];
                for x in 0..s.inputs_a {
                    for y in 0..s.inputs_b {
                        for a in 0..2 {
                            for b in 0..2 {
                                v[s.index(a, b, x, y)] = marg[a] * marg[b];
                            }
                        }
                    }
                }
                v
            }
            NoiseModel::Custom(v) => {
                if v.len() != s.len() {
                    return Err(Error::DimensionMismatch("custom noise vector has the wrong length".into()));
                }
                v.clone()
            }
        })
    }
}

/// `Some(d)` when `s` has the shape of a binarised d-outcome scenario.
pub fn binarised_dimension(s: Scenario) -> Option<usize> {
    (s.outcomes_a == 2 && s.outcomes_b == 2 && s.inputs_a == s.inputs_b && s.inputs_a >= 4 && s.inputs_a % 2 == 0)
        .then_some(s.inputs_a / 2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Coefficient tensor c with offset 0; local behaviors give c·p ≥ 0.
    pub functional: BellFunctional,
    /// c·n for the normalization behavior n; equals 1 + W(target).
    pub lp_objective: f64,
    pub is_local: bool,
    /// W = c·p on the behavior the program was solved for.
    pub value_on_target: f64,
    /// min over deterministic strategies of c·D, re-verified after solving.
    pub min_deterministic_value: f64,
    pub noise: NoiseModel,
    pub iterations: usize,
}

/// Collins–Gisin coordinates: constant, marginals without the last
/// outcome, joint terms without either last outcome.
struct CgLayout {
    s: Scenario,
    na1: usize,
    nb1: usize,
}

impl CgLayout {
    fn new(s: Scenario) -> Self {
        CgLayout { s, na1: s.outcomes_a - 1, nb1: s.outcomes_b - 1 }
    }
    fn len(&self) -> usize {
        1 + self.s.inputs_a * self.na1 + self.s.inputs_b * self.nb1 + self.s.inputs_a * self.s.inputs_b * self.na1 * self.nb1
    }
    fn ia(&self, a: usize, x: usize) -> usize {
        1 + x * self.na1 + a
    }
    fn ib(&self, b: usize, y: usize) -> usize {
        1 + self.s.inputs_a * self.na1 + y * self.nb1 + b
    }
    fn iab(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        1 + self.s.inputs_a * self.na1 + self.s.inputs_b * self.nb1 + ((x * self.s.inputs_b + y) * self.na1 + a) * self.nb1 + b
    }

    /// Coordinates of a (possibly unnormalized) tensor; marginals are
    /// averaged over the other party's inputs.
    fn coords(&self, v: &[f64]) -> Vec<f64> {
        let s = self.s;
        let at = |a: usize, b: usize, x: usize, y: usize| v[s.index(a, b, x, y)];
        let mut out = vec![0.0; self.len()];
        let mut total = 0.0;
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                for a in 0..s.outcomes_a {
                    for b in 0..s.outcomes_b {
                        total += at(a, b, x, y);
                    }
                }
            }
        }
        out[0] = total / (s.inputs_a * s.inputs_b) as f64;
        for x in 0..s.inputs_a {
            for a in 0..self.na1 {
                let m: f64 = (0..s.inputs_b).map(|y| (0..s.outcomes_b).map(|b| at(a, b, x, y)).sum::<f64>()).sum();
                out[self.ia(a, x)] = m / s.inputs_b as f64;
            }
        }
        for y in 0..s.inputs_b {
            for b in 0..self.nb1 {
                let m: f64 = (0..s.inputs_a).map(|x| (0..s.outcomes_a).map(|a| at(a, b, x, y)).sum::<f64>()).sum();
                out[self.ib(b, y)] = m / s.inputs_a as f64;
            }
        }
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                for a in 0..self.na1 {
                    for b in 0..self.nb1 {
                        out[self.iab(a, b, x, y)] = at(a, b, x, y);
                    }
                }
            }
        }
        out
    }

    /// Full tensor t with t·q = wᵀφ(q) for every no-signaling q.
    fn lift(&self, w: &[f64]) -> Vec<f64> {
        let s = self.s;
        let mut c = vec![0.0; s.len()];
        let blocks = (s.inputs_a * s.inputs_b) as f64;
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                for a in 0..s.outcomes_a {
                    for b in 0..s.outcomes_b {
                        let mut v = w[0] / blocks;
                        if a < self.na1 {
                            v += w[self.ia(a, x)] / s.inputs_b as f64;
                        }
                        if b < self.nb1 {
                            v += w[self.ib(b, y)] / s.inputs_a as f64;
                        }
                        if a < self.na1 && b < self.nb1 {
                            v += w[self.iab(a, b, x, y)];
                        }
                        c[s.index(a, b, x, y)] = v;
                    }
                }
            }
        }
        c
    }
}

/// max v s.t. Σ_λ q_λ φ(D_λ) − v φ(p − n) = φ(n), q ≥ 0, v free.
/// Columns: every joint strategy (implicit), then v⁺ and v⁻.
struct LocalityColumns {
    cg: CgLayout,
    na: usize,
    nb: usize,
    direction: Vec<f64>,
    rhs: Vec<f64>,
    sign: Vec<f64>,
}

impl LocalityColumns {
    fn strategy_of(&self, j: usize) -> (Vec<usize>, Vec<usize>) {
        let s = self.cg.s;
        let mut a = vec![0; s.inputs_a];
        let mut b = vec![0; s.inputs_b];
        decode(j / self.nb, s.outcomes_a, s.inputs_a, &mut a);
        decode(j % self.nb, s.outcomes_b, s.inputs_b, &mut b);
        (a, b)
    }

}

impl ColumnSource for LocalityColumns {
    fn rows(&self) -> usize {
        self.cg.len()
    }
    fn cols(&self) -> usize {
        self.na * self.nb + 2
    }
    fn rhs(&self) -> &[f64] {
        &self.rhs
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        let strategies = self.na * self.nb;
        if j >= strategies {
            let s = if j == strategies { -1.0 } else { 1.0 };
            for (i, o) in out.iter_mut().enumerate() {
                *o = s * self.direction[i] * self.sign[i];
            }
            return;
        }
        let (sa, sb) = self.strategy_of(j);
        let cg = &self.cg;
        let s = cg.s;
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 1.0;
        for x in 0..s.inputs_a {
            if sa[x] < cg.na1 {
                out[cg.ia(sa[x], x)] = 1.0;
            }
        }
        for y in 0..s.inputs_b {
            if sb[y] < cg.nb1 {
                out[cg.ib(sb[y], y)] = 1.0;
                for x in 0..s.inputs_a {
                    if sa[x] < cg.na1 {
                        out[cg.iab(sa[x], sb[y], x, y)] = 1.0;
                    }
                }
            }
        }
        for (o, sg) in out.iter_mut().zip(&self.sign) {
            *o *= sg;
        }
    }
    fn cost(&self, j: usize) -> f64 {
        let strategies = self.na * self.nb;
        if j == strategies {
            -1.0
        } else if j == strategies + 1 {
            1.0
        } else {
            0.0
        }
    }

    fn price(&self, y: &[f64], phase2: bool, rule: Pricing, tol: f64, basic: &[bool]) -> Option<(usize, f64)> {
        let cg = &self.cg;
        let s = cg.s;
        let ys: Vec<f64> = y.iter().zip(&self.sign).map(|(a, b)| a * b).collect();
        let strategies = self.na * self.nb;
        let mut best: Option<(usize, f64)> = None;
        let consider = |j: usize, d: f64, best: &mut Option<(usize, f64)>| {
            if d < -tol && !basic[j] && best.map_or(true, |(_, bd)| d < bd) {
                *best = Some((j, d));
            }
        };
        // the two explicit columns first: lowest indices under Bland come last, so
        // they are checked after strategies in that mode
        let dir: f64 = (0..self.rows()).map(|i| ys[i] * self.direction[i]).sum();
        let c_plus = if phase2 { -1.0 } else { 0.0 };
        let d_plus = c_plus + dir;
        let d_minus = -c_plus - dir;

        let mut sa = vec![0usize; s.inputs_a];
        let mut vals = vec![0.0; s.inputs_b * s.outcomes_b];
        match rule {
            Pricing::Dantzig => {
                consider(strategies, d_plus, &mut best);
                consider(strategies + 1, d_minus, &mut best);
                for ia in 0..self.na {
                    decode(ia, s.outcomes_a, s.inputs_a, &mut sa);
                    let mut g = ys[0];
                    for x in 0..s.inputs_a {
                        if sa[x] < cg.na1 {
                            g += ys[cg.ia(sa[x], x)];
                        }
                    }
                    let mut ib = 0usize;
                    let mut radix = 1usize;
                    for yy in 0..s.inputs_b {
                        let (mut bb, mut bv) = (s.outcomes_b - 1, 0.0);
                        for b in 0..cg.nb1 {
                            let mut v = ys[cg.ib(b, yy)];
                            for x in 0..s.inputs_a {
                                if sa[x] < cg.na1 {
                                    v += ys[cg.iab(sa[x], b, x, yy)];
                                }
                            }
                            if v > bv {
                                bv = v;
                                bb = b;
                            }
                        }
                        g += bv;
                        ib += bb * radix;
                        radix *= s.outcomes_b;
                    }
                    consider(ia * self.nb + ib, -g, &mut best);
                }
                best
            }
            Pricing::Bland => {
                let mut sb = vec![0usize; s.inputs_b];
                for ia in 0..self.na {
                    decode(ia, s.outcomes_a, s.inputs_a, &mut sa);
                    let mut base = ys[0];
                    for x in 0..s.inputs_a {
                        if sa[x] < cg.na1 {
                            base += ys[cg.ia(sa[x], x)];
                        }
                    }
                    for yy in 0..s.inputs_b {
                        for b in 0..s.outcomes_b {
                            let mut v = 0.0;
                            if b < cg.nb1 {
                                v = ys[cg.ib(b, yy)];
                                for x in 0..s.inputs_a {
                                    if sa[x] < cg.na1 {
                                        v += ys[cg.iab(sa[x], b, x, yy)];
                                    }
                                }
                            }
                            vals[yy * s.outcomes_b + b] = v;
                        }
                    }
                    for ib in 0..self.nb {
                        decode(ib, s.outcomes_b, s.inputs_b, &mut sb);
                        let g = base + (0..s.inputs_b).map(|yy| vals[yy * s.outcomes_b + sb[yy]]).sum::<f64>();
                        let j = ia * self.nb + ib;
                        if -g < -tol && !basic[j] {
                            return Some((j, -g));
                        }
                    }
                }
                if d_plus < -tol && !basic[strategies] {
                    return Some((strategies, d_plus));
                }
                if d_minus < -tol && !basic[strategies + 1] {
                    return Some((strategies + 1, d_minus));
                }
                None
            }
        }
    }
}

/// Locality test with the default noise model.
pub fn locality_lp(p: &Behavior) -> Result<WitnessReport> {
    locality_lp_with(p, &NoiseModel::Auto, &Tolerances::default())
}

pub fn locality_lp_with(p: &Behavior, noise: &NoiseModel, tol: &Tolerances) -> Result<WitnessReport> {
    let s = p.scenario;
    let na = party_count(s.outcomes_a, s.inputs_a)?;
    let nb = party_count(s.outcomes_b, s.inputs_b)?;
    let nvec = noise.vector(s)?;
    let cg = CgLayout::new(s);
    let phi_n = cg.coords(&nvec);
    let phi_p = cg.coords(p.as_slice());
    let direction: Vec<f64> = phi_p.iter().zip(&phi_n).map(|(a, b)| a - b).collect();
    let layout = match (noise, binarised_dimension(s)) {
        (NoiseModel::BinarisedWhite { d }, _) => Layout::Binarised { d: *d },
        (NoiseModel::Auto, Some(d)) => Layout::Binarised { d },
        _ => Layout::Standard,
    };

    if direction.iter().all(|v| v.abs() < 1e-14) {
        // p coincides with the normalization point: v is unbounded, p is local
        let mut f = BellFunctional::zero(s, 0.0);
        f.layout = layout;
        f.name = "witness".into();
        return Ok(WitnessReport {
            functional: f,
            lp_objective: f64::INFINITY,
            is_local: true,
            value_on_target: 0.0,
            min_deterministic_value: 0.0,
            noise: noise.clone(),
            iterations: 0,
        });
    }

    let sign: Vec<f64> = phi_n.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
    let rhs: Vec<f64> = phi_n.iter().zip(&sign).map(|(v, s)| v * s).collect();
    let cols = LocalityColumns { cg, na, nb, direction, rhs, sign };
    let out = simplex::run(&cols, tol.lp, tol.lp_max_iterations);
    match out.status {
        SolveStatus::Optimal => {}
        SolveStatus::Unbounded => {
            let mut f = BellFunctional::zero(s, 0.0);
            f.layout = layout;
            return Ok(WitnessReport {
                functional: f,
                lp_objective: f64::INFINITY,
                is_local: true,
                value_on_target: 0.0,
                min_deterministic_value: 0.0,
                noise: noise.clone(),
                iterations: out.iterations,
            });
        }
        other => {
            return Err(Error::NumericalFailure(format!("locality program ended with status {other:?}")));
        }
    }
    // witness w = −y in unsigned coordinates
    let w: Vec<f64> = out.duals.iter().zip(&cols.sign).map(|(y, s)| -y * s).collect();
    let coeffs = cols.cg.lift(&w);
    let mut functional = BellFunctional::new(s, coeffs, 0.0, "witness")?;
    functional.layout = layout;
    let lp_objective: f64 = functional.coeffs.iter().zip(&nvec).map(|(c, n)| c * n).sum();
    let value_on_target = functional.raw(p)?;
    let mut neg = functional.clone();
    neg.coeffs.iter_mut().for_each(|c| *c = -*c);
    let min_deterministic_value = -lhv_bound_raw(&neg)?.value;
    let scale = 1.0 + functional.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if min_deterministic_value < -1e-7 * scale {
        return Err(Error::NumericalFailure(format!(
            "witness fails local positivity by {min_deterministic_value:.3e}"
        )));
    }
    functional.lhv_bound = Some(min_deterministic_value);
    Ok(WitnessReport {
        functional,
        lp_objective,
        is_local: lp_objective >= 1.0 - 1e-9,
        value_on_target,
        min_deterministic_value,
        noise: noise.clone(),
        iterations: out.iterations,
    })
}

pub fn witness_value(report: &WitnessReport, p: &Behavior) -> Result<f64> {
    report.functional.raw(p)
}

/// Marginal-consistency projection used before the locality program; kept
/// public so callers can see what the program actually tests.
pub fn no_signaling_projection(p: &Behavior) -> Behavior {
    let s = p.scenario;
    let ma = averaged_marginal(p, Party::A);
    let mb = averaged_marginal(p, Party::B);
    let cg = CgLayout::new(s);
    let coords = cg.coords(p.as_slice());
    let mut v = vec![0.0; s.len()];
    for x in 0..s.inputs_a {
        for y in 0..s.inputs_b {
            for a in 0..s.outcomes_a {
                for b in 0..s.outcomes_b {
                    let val = match (a < cg.na1, b < cg.nb1) {
                        (true, true) => coords[cg.iab(a, b, x, y)],
                        (true, false) => ma.get(a, x) - (0..cg.nb1).map(|bb| coords[cg.iab(a, bb, x, y)]).sum::<f64>(),
                        (false, true) => mb.get(b, y) - (0..cg.na1).map(|aa| coords[cg.iab(aa, b, x, y)]).sum::<f64>(),
                        (false, false) => {
                            1.0 - (0..cg.na1).map(|aa| ma.get(aa, x)).sum::<f64>() - (0..cg.nb1).map(|bb| mb.get(bb, y)).sum::<f64>()
                                + (0..cg.na1).flat_map(|aa| (0..cg.nb1).map(move |bb| (aa, bb))).map(|(aa, bb)| coords[cg.iab(aa, bb, x, y)]).sum::<f64>()
                        }
                    };
                    v[s.index(a, b, x, y)] = val;
                }
            }
        }
    }
    Behavior::from_raw(s, v)
}
