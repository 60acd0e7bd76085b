//! Click/no-click binarisation of multi-outcome behaviors and the binarised
//! Bell-test pipeline.

use serde::{Deserialize, Serialize};

use crate::convex::Tolerances;
use crate::error::{Error, Result};
use crate::functionals::{critical_visibility, lhv_bound_or_enumerate, optimal_behavior, Family};
use crate::lhv::{locality_lp_with, NoiseModel, WitnessReport};
use crate::seesaw::{seesaw, SeesawConfig};
use crate::model::{averaged_marginal, mix_behaviors, Behavior, Party, Scenario, SIGNALING_TOL};

/// Outcome label of a binarised input: the sub-outcome fired (✓) or not (✗).
pub const CLICK: usize = 0;
pub const NO_CLICK: usize = 1;

/// Behavior over the binarised scenario. Alice's input (a, x) sits at index
/// a + d_A·x, Bob's (b, y) at b + d_B·y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarisedBehavior {
    pub d_a: usize,
    pub d_b: usize,
    behavior: Behavior,
}

impl BinarisedBehavior {
    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn into_behavior(self) -> Behavior {
        self.behavior
    }

    pub fn scenario(&self) -> Scenario {
        self.behavior.scenario
    }

    /// p_bin(o_A, o_B | (a,x), (b,y)).
    pub fn get(&self, oa: usize, ob: usize, a: usize, x: usize, b: usize, y: usize) -> f64 {
        self.behavior.get(oa, ob, a + self.d_a * x, b + self.d_b * y)
    }
}

pub fn binarised_scenario(s: Scenario) -> Scenario {
    Scenario {
        inputs_a: s.inputs_a * s.outcomes_a,
        inputs_b: s.inputs_b * s.outcomes_b,
        outcomes_a: 2,
        outcomes_b: 2,
    }
}

/// (✓,✓) = p(a,b|x,y), (✓,✗) = p_A(a|x) − p, (✗,✓) = p_B(b|y) − p,
/// (✗,✗) = 1 − p_A − p_B + p.
pub fn binarise_behavior(p: &Behavior) -> Result<BinarisedBehavior> {
    let dev = p.signaling_deviation();
    if dev > SIGNALING_TOL {
        let party = if crate::model::marginal(p, Party::A).is_err() { 'A' } else { 'B' };
        return Err(Error::SignalingDetected { party, deviation: dev });
    }
    Ok(binarise_unchecked(p))
}

/// Binarisation with marginals averaged over the other party's inputs; for
/// experimental tables carrying finite-count signaling.
pub fn binarise_averaged(p: &Behavior) -> BinarisedBehavior {
    binarise_unchecked(p)
}

fn binarise_unchecked(p: &Behavior) -> BinarisedBehavior {
    let s = p.scenario;
    let bs = binarised_scenario(s);
    let ma = averaged_marginal(p, Party::A);
    let mb = averaged_marginal(p, Party::B);
    let (da, db) = (s.outcomes_a, s.outcomes_b);
    let mut v = vec![0.0; bs.len()];
    let clamp = |q: f64| if q < 0.0 && q > -1e-10 { 0.0 } else { q };
    for x in 0..s.inputs_a {
        for y in 0..s.inputs_b {
            for a in 0..da {
                for b in 0..db {
                    let (xi, yi) = (a + da * x, b + db * y);
                    let pab = p.get(a, b, x, y);
                    let pa = ma.get(a, x);
                    let pb = mb.get(b, y);
                    v[bs.index(CLICK, CLICK, xi, yi)] = pab;
                    v[bs.index(CLICK, NO_CLICK, xi, yi)] = clamp(pa - pab);
                    v[bs.index(NO_CLICK, CLICK, xi, yi)] = clamp(pb - pab);
                    v[bs.index(NO_CLICK, NO_CLICK, xi, yi)] = clamp(1.0 - pa - pb + pab);
                }
            }
        }
    }
    BinarisedBehavior { d_a: da, d_b: db, behavior: Behavior::from_raw(bs, v) }
}

/// Locality program on the binarised image of `p`, normalised by binarised
/// white noise.
pub fn binarised_witness(p: &Behavior, tol: &Tolerances) -> Result<WitnessReport> {
    let bin = binarise_behavior(p)?;
    if bin.d_a != bin.d_b {
        return Err(Error::ScenarioMismatch("binarised witness needs equal outcome counts".into()));
    }
    locality_lp_with(bin.behavior(), &NoiseModel::BinarisedWhite { d: bin.d_a }, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseTolerance {
    pub family: Family,
    pub d: usize,
    /// Critical visibility of the binarised test, by bisection on v.
    pub v_crit: f64,
    /// Same quantity read directly off the locality program (1 + W).
    pub v_direct: f64,
    pub bisection_steps: usize,
}

/// Critical visibility v such that binarise(v·p_opt + (1−v)·uniform) is on
/// the local boundary. Bisection with the locality program as oracle, plus
/// the direct value for cross-checking.
pub fn binarised_noise_tolerance(family: Family, d: usize, tol: &Tolerances) -> Result<NoiseTolerance> {
    let p = optimal_behavior(family, d)?;
    let u = Behavior::uniform(p.scenario);
    let noise = NoiseModel::BinarisedWhite { d };
    let is_local = |v: f64| -> Result<bool> {
        let mixed = mix_behaviors(&p, &u, v)?;
        Ok(locality_lp_with(binarise_behavior(&mixed)?.behavior(), &noise, tol)?.is_local)
    };
    let direct = locality_lp_with(binarise_behavior(&p)?.behavior(), &noise, tol)?;
    let v_direct = (1.0 + direct.value_on_target).min(1.0);
    if is_local(1.0)? {
        return Ok(NoiseTolerance { family, d, v_crit: 1.0, v_direct, bisection_steps: 0 });
    }
    // the boundary is bracketed tightly around the direct value, then halved
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let probe = 2e-3;
    if v_direct > probe && v_direct < 1.0 - probe {
        if is_local(v_direct - probe)? {
            lo = v_direct - probe;
        }
        if !is_local(v_direct + probe)? {
            hi = v_direct + probe;
        }
    }
    let mut steps = 0;
    while hi - lo > 2e-5 {
        let mid = 0.5 * (lo + hi);
        if is_local(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(NoiseTolerance { family, d, v_crit: 0.5 * (lo + hi), v_direct, bisection_steps: steps })
}

/// White-noise critical visibility of the multi-outcome test with the
/// family's optimal behavior.
pub fn multi_outcome_tolerance(family: Family, d: usize) -> Result<f64> {
    let f = family.functional(d);
    let p = optimal_behavior(family, d)?;
    let threshold = lhv_bound_or_enumerate(&f)?;
    critical_visibility(&f, &p, &Behavior::uniform(p.scenario), threshold)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessSuiteRow {
    pub family: Family,
    pub d: usize,
    /// W on the ideal binarised behavior.
    pub ideal_value: f64,
    /// (D, minimised witness value) per local dimension.
    pub optimized: Vec<(usize, f64)>,
    pub witness: WitnessReport,
}

/// Witness from the ideal binarised behavior, then the see-saw minimum of
/// that witness over binarised realisations in each local dimension.
pub fn binarised_witness_suite(family: Family, d: usize, dims: &[usize], template: &SeesawConfig, tol: &Tolerances) -> Result<WitnessSuiteRow> {
    let p = optimal_behavior(family, d)?;
    let witness = binarised_witness(&p, tol)?;
    let optimized = dims
        .iter()
        .map(|&dim| {
            let cfg = SeesawConfig { dim, minimize: true, ..template.clone() };
            Ok((dim, seesaw(&witness.functional, &cfg)?.value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessSuiteRow { family, d, ideal_value: witness.value_on_target, optimized, witness })
}
