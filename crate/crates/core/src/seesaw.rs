//! Dimension-restricted lower bounds by alternating optimisation over
//! measurements (one SDP per input) and the shared pure state.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{embed_hermitian, unembed_hermitian, solve_sdp, SemidefiniteProgram, Tolerances};
use crate::error::{Error, Result};
use crate::functionals::BellFunctional;
use crate::matkernel::{hermitian_eig_unchecked, positive_part_projector, random_unit_vector, random_unitary, CMatrix, C64};
use crate::model::{Party, QuantumModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSolver {
    /// Closed form for two outcomes, SDP otherwise.
    #[default]
    Auto,
    Sdp,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeesawConfig {
    pub dim: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// A sweep counts as stalled when it gains less than this.
    pub tolerance: f64,
    /// Stalled sweeps in a row before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Minimise instead of maximise (used for witnesses).
    pub minimize: bool,
    pub solver: MeasurementSolver,
    pub sdp_tolerance: f64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        SeesawConfig {
            dim: 2,
            restarts: 50,
            max_iterations: 500,
            tolerance: 1e-8,
            patience: 3,
            seed: 0,
            minimize: false,
            solver: MeasurementSolver::Auto,
            sdp_tolerance: 1e-9,
        }
    }
}

impl SeesawConfig {
    pub fn new(dim: usize) -> Self {
        SeesawConfig { dim, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.restarts == 0 {
            return Err(Error::DomainError("see-saw needs dim ≥ 1 and at least one restart".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::DomainError("see-saw tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub value: f64,
    /// Functional value after initialisation and after every sweep.
    pub trajectory: Vec<f64>,
    /// Measurement steps where the solver failed and the old operators were kept.
    pub degraded_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeesawResult {
    /// Best functional value (offset included) over all restarts.
    pub value: f64,
    pub model: QuantumModel,
    pub best_restart: usize,
    pub restarts: Vec<Option<RestartOutcome>>,
    pub failures: Vec<String>,
}

impl SeesawResult {
    pub fn restart_values(&self) -> Vec<f64> {
        self.restarts.iter().flatten().map(|r| r.value).collect()
    }
}

type Meas = Vec<Vec<DMatrix<C64>>>;

/// ψ stored as the D×D coefficient matrix M with ψ = Σ M_ij |i⟩|j⟩.
#[derive(Clone)]
struct Iterate {
    m: DMatrix<C64>,
    a: Meas,
    b: Meas,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Operators R_{a,x} such that the objective is Σ_{x,a} tr(A_{a|x} R_{a,x}).
fn reduced_operators(coeffs: &BellFunctional, it: &Iterate, party: Party) -> Vec<Vec<DMatrix<C64>>> {
    let s = coeffs.scenario;
    let dim = it.m.nrows();
    let m = &it.m;
    match party {
        Party::A => (0..s.inputs_a)
            .map(|x| {
                (0..s.outcomes_a)
                    .map(|a| {
                        let mut op = DMatrix::<C64>::zeros(dim, dim);
                        for y in 0..s.inputs_b {
                            for b in 0..s.outcomes_b {
                                let w = coeffs.coeff(a, b, x, y);
                                if w != 0.0 {
                                    op += &it.b[y][b] * c(w);
                                }
                            }
                        }
                        // tr(M† A M Bᵀ) = tr(A · M Bᵀ M†)
                        m * op.transpose() * m.adjoint()
                    })
                    .collect()
            })
            .collect(),
        Party::B => (0..s.inputs_b)
            .map(|y| {
                (0..s.outcomes_b)
                    .map(|b| {
                        let mut op = DMatrix::<C64>::zeros(dim, dim);
                        for x in 0..s.inputs_a {
                            for a in 0..s.outcomes_a {
                                let w = coeffs.coeff(a, b, x, y);
                                if w != 0.0 {
                                    op += &it.a[x][a] * c(w);
                                }
                            }
                        }
                        // tr(B · Mᵀ Aᵀ M̄)
                        m.transpose() * op.transpose() * m.conjugate()
                    })
                    .collect()
            })
            .collect(),
    }
}

fn objective_from(r: &[Vec<DMatrix<C64>>], meas: &Meas) -> f64 {
    let mut v = 0.0;
    for (rx, mx) in r.iter().zip(meas) {
        for (ra, ma) in rx.iter().zip(mx) {
            v += crate::matkernel::trace_product(ma, ra).re;
        }
    }
    v
}

/// Raw (offset-free) objective ⟨ψ|Σ c A⊗B|ψ⟩.
fn raw_objective(f: &BellFunctional, it: &Iterate) -> f64 {
    objective_from(&reduced_operators(f, it, Party::A), &it.a)
}

fn hermitian_basis(dim: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut e = DMatrix::<C64>::zeros(dim, dim);
        e[(i, i)] = c(1.0);
        out.push(e);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let mut e = DMatrix::<C64>::zeros(dim, dim);
            e[(i, j)] = c(1.0);
            e[(j, i)] = c(1.0);
            out.push(e);
            let mut e = DMatrix::<C64>::zeros(dim, dim);
            e[(i, j)] = C64::new(0.0, -1.0);
            e[(j, i)] = C64::new(0.0, 1.0);
            out.push(e);
        }
    }
    out
}

/// argmax Σ_a tr(A_a R_a) over POVMs, as an LMI in the Hermitian
/// coordinates of A_0..A_{k−2}.
fn measurement_sdp(r: &[DMatrix<C64>], tol: f64) -> Result<Vec<DMatrix<C64>>> {
    let k = r.len();
    let dim = r[0].nrows();
    if k == 1 {
        return Ok(vec![DMatrix::identity(dim, dim)]);
    }
    let basis = hermitian_basis(dim);
    let nb = basis.len();
    let emb: Vec<DMatrix<f64>> = basis.iter().map(embed_hermitian).collect();
    let mut sdp = SemidefiniteProgram::new(vec![2 * dim; k], (k - 1) * nb);
    sdp.set_constant(k - 1, DMatrix::identity(2 * dim, 2 * dim));
    let last = &r[k - 1];
    for a in 0..k - 1 {
        let diff = &r[a] - last;
        for (j, (e, h)) in emb.iter().zip(&basis).enumerate() {
            let var = a * nb + j;
            sdp.objective[var] = crate::matkernel::trace_product(h, &diff).re;
            sdp.add_coefficient(var, a, e.clone());
            sdp.add_coefficient(var, k - 1, -e);
        }
    }
    let tols = Tolerances { sdp: tol, ..Tolerances::default() };
    let rep = solve_sdp(&sdp, &tols)?;
    if !rep.is_optimal() && rep.status != crate::convex::SolveStatus::MaxIterations {
        return Err(Error::NumericalFailure(format!("measurement SDP ended with {:?}", rep.status)));
    }
    let blocks = sdp.mapped(&rep.primal);
    let ops: Vec<DMatrix<C64>> = blocks.iter().map(unembed_hermitian).collect();
    Ok(clean_povm(ops))
}

/// Clips negative eigenvalues and renormalises so Σ A = I exactly.
fn clean_povm(ops: Vec<DMatrix<C64>>) -> Vec<DMatrix<C64>> {
    let dim = ops[0].nrows();
    let clipped: Vec<DMatrix<C64>> = ops
        .into_iter()
        .map(|a| {
            let e = hermitian_eig_unchecked(&a);
            let mut out = DMatrix::<C64>::zeros(dim, dim);
            for (k, &lam) in e.eigenvalues.iter().enumerate() {
                if lam > 0.0 {
                    let v = e.vector(k);
                    out += &v * v.adjoint() * c(lam);
                }
            }
            out
        })
        .collect();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for a in &clipped {
        sum += a;
    }
    let e = hermitian_eig_unchecked(&sum);
    let mut inv_sqrt = DMatrix::<C64>::zeros(dim, dim);
    for (k, &lam) in e.eigenvalues.iter().enumerate() {
        let v = e.vector(k);
        let w = if lam > 1e-14 { 1.0 / lam.sqrt() } else { 0.0 };
        inv_sqrt += &v * v.adjoint() * c(w);
    }
    let mut out: Vec<DMatrix<C64>> = clipped.iter().map(|a| &inv_sqrt * a * &inv_sqrt).collect();
    // directions where the sum vanished go to the last outcome
    let mut covered = DMatrix::<C64>::zeros(dim, dim);
    for a in &out {
        covered += a;
    }
    let gap = DMatrix::<C64>::identity(dim, dim) - covered;
    if gap.norm() > 1e-12 {
        let last = out.len() - 1;
        out[last] += gap;
    }
    for a in out.iter_mut() {
        *a = (&*a + a.adjoint()) * c(0.5);
    }
    out
}

fn closed_form_two_outcome(r: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
    let dim = r[0].nrows();
    let p = positive_part_projector(&(&r[0] - &r[1]), 1e-12);
    vec![p.clone(), DMatrix::identity(dim, dim) - p]
}

fn optimal_povm(r: &[DMatrix<C64>], solver: MeasurementSolver, tol: f64) -> Result<Vec<DMatrix<C64>>> {
    match (solver, r.len()) {
        (MeasurementSolver::ClosedForm, 2) | (MeasurementSolver::Auto, 2) => Ok(closed_form_two_outcome(r)),
        (MeasurementSolver::ClosedForm, k) => {
            Err(Error::DomainError(format!("closed-form measurement step needs two outcomes, got {k}")))
        }
        _ => measurement_sdp(r, tol),
    }
}

/// Updates one party's measurements; returns how many inputs fell back to
/// the previous operators because the solver failed or did not improve.
fn update_party(f: &BellFunctional, it: &mut Iterate, party: Party, cfg: &SeesawConfig) -> usize {
    let r = reduced_operators(f, it, party);
    let mut degraded = 0;
    for (x, rx) in r.iter().enumerate() {
        let current = match party {
            Party::A => &it.a[x],
            Party::B => &it.b[x],
        };
        let old: f64 = rx.iter().zip(current).map(|(ra, ma)| crate::matkernel::trace_product(ma, ra).re).sum();
        match optimal_povm(rx, cfg.solver, cfg.sdp_tolerance) {
            Ok(new) => {
                let val: f64 = rx.iter().zip(&new).map(|(ra, ma)| crate::matkernel::trace_product(ma, ra).re).sum();
                if val >= old {
                    match party {
                        Party::A => it.a[x] = new,
                        Party::B => it.b[x] = new,
                    }
                }
            }
            Err(_) => degraded += 1,
        }
    }
    degraded
}

fn bell_operator_raw(f: &BellFunctional, a: &Meas, b: &Meas) -> DMatrix<C64> {
    let s = f.scenario;
    let dim = a[0][0].nrows();
    let mut op = DMatrix::<C64>::zeros(dim * dim, dim * dim);
    for x in 0..s.inputs_a {
        for y in 0..s.inputs_b {
            for bb in 0..s.outcomes_b {
                let mut left = DMatrix::<C64>::zeros(dim, dim);
                let mut any = false;
                for aa in 0..s.outcomes_a {
                    let w = f.coeff(aa, bb, x, y);
                    if w != 0.0 {
                        left += &a[x][aa] * c(w);
                        any = true;
                    }
                }
                if any {
                    op += left.kronecker(&b[y][bb]);
                }
            }
        }
    }
    op
}

/// Leading eigenvector of the Bell operator; returns its eigenvalue.
fn update_state(f: &BellFunctional, it: &mut Iterate) -> f64 {
    let dim = it.m.nrows();
    let op = bell_operator_raw(f, &it.a, &it.b);
    let e = hermitian_eig_unchecked(&op);
    let v = e.vector(0);
    let candidate = DMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]);
    let old = Iterate { m: it.m.clone(), ..it.clone() };
    let before = raw_objective(f, &old);
    it.m = candidate;
    let after = raw_objective(f, it);
    if after < before {
        it.m = old.m;
        return before;
    }
    e.eigenvalues[0]
}

fn random_measurement<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Vec<DMatrix<C64>> {
    let u = random_unitary(dim, rng);
    let mut out = vec![DMatrix::<C64>::zeros(dim, dim); outcomes];
    let mut labels: Vec<usize> = (0..outcomes).collect();
    labels.shuffle(rng);
    for k in 0..dim {
        let a = if outcomes >= dim { labels[k] } else { rng.gen_range(0..outcomes) };
        let col: DVector<C64> = u.inner().column(k).into_owned();
        out[a] += &col * col.adjoint();
    }
    out
}

fn random_iterate(f: &BellFunctional, dim: usize, rng: &mut ChaCha8Rng) -> Iterate {
    let s = f.scenario;
    let a = (0..s.inputs_a).map(|_| random_measurement(dim, s.outcomes_a, rng)).collect();
    let b = (0..s.inputs_b).map(|_| random_measurement(dim, s.outcomes_b, rng)).collect();
    let psi = random_unit_vector(dim * dim, rng);
    let m = DMatrix::from_fn(dim, dim, |i, j| psi[i * dim + j]);
    Iterate { m, a, b }
}

/// One full restart on the (already sign-adjusted) functional `g`.
fn run_restart(g: &BellFunctional, cfg: &SeesawConfig, rng: &mut ChaCha8Rng) -> Result<(RestartOutcome, Iterate)> {
    let mut it = random_iterate(g, cfg.dim, rng);
    let mut value = raw_objective(g, &it);
    let mut trajectory = vec![value];
    let mut degraded = 0;
    let mut stalled = 0;
    for _ in 0..cfg.max_iterations {
        degraded += update_party(g, &mut it, Party::A, cfg);
        degraded += update_party(g, &mut it, Party::B, cfg);
        update_state(g, &mut it);
        let next = raw_objective(g, &it);
        if !next.is_finite() {
            return Err(Error::NumericalFailure("non-finite objective".into()));
        }
        let gain = next - value;
        value = next.max(value);
        trajectory.push(value);
        if gain < cfg.tolerance {
            stalled += 1;
            if stalled >= cfg.patience {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok((RestartOutcome { value, trajectory, degraded_steps: degraded }, it))
}

fn to_model(it: &Iterate) -> Result<QuantumModel> {
    let dim = it.m.nrows();
    let norm = it.m.norm();
    let psi = DVector::from_fn(dim * dim, |k, _| it.m[(k / dim, k % dim)] / c(norm));
    let wrap = |meas: &Meas| -> Vec<Vec<CMatrix>> {
        meas.iter().map(|ops| ops.iter().map(|o| CMatrix::from(o.clone())).collect()).collect()
    };
    QuantumModel::new(CMatrix::outer(&psi), wrap(&it.a), wrap(&it.b), false)
}

/// Best value of `f` found over `cfg.restarts` independent see-saw runs in
/// local dimension `cfg.dim`. Restart `i` draws from stream `i` of a ChaCha
/// generator keyed by `cfg.seed`, so results do not depend on thread count.
pub fn seesaw(f: &BellFunctional, cfg: &SeesawConfig) -> Result<SeesawResult> {
    cfg.validate()?;
    let sign = if cfg.minimize { -1.0 } else { 1.0 };
    let mut g = f.clone();
    g.coeffs.iter_mut().for_each(|v| *v *= sign);
    let runs: Vec<Result<(RestartOutcome, Iterate)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            run_restart(&g, cfg, &mut rng)
        })
        .collect();

    let mut best: Option<(usize, f64, Iterate)> = None;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut failures = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((mut out, it)) => {
                if best.as_ref().map_or(true, |(_, v, _)| out.value > *v) {
                    best = Some((i, out.value, it));
                }
                // report in the functional's own units
                out.value = sign * out.value + f.offset;
                out.trajectory.iter_mut().for_each(|v| *v = sign * *v + f.offset);
                restarts.push(Some(out));
            }
            Err(e) => {
                failures.push(format!("restart {i}: {e}"));
                restarts.push(None);
            }
        }
    }
    let Some((best_restart, raw, it)) = best else {
        return Err(Error::AllRestartsFailed(failures.join("; ")));
    };
    Ok(SeesawResult { value: sign * raw + f.offset, model: to_model(&it)?, best_restart, restarts, failures })
}

fn iterate_from_model(model: &QuantumModel) -> Result<Iterate> {
    let dim = model.dim;
    let psi = crate::model::dominant_vector(&model.state)?;
    let m = DMatrix::from_fn(dim, dim, |i, j| psi[i * dim + j]);
    let unwrap = |meas: &Vec<Vec<CMatrix>>| -> Meas { meas.iter().map(|ops| ops.iter().map(|o| o.inner().clone()).collect()).collect() };
    Ok(Iterate { m, a: unwrap(&model.meas_a), b: unwrap(&model.meas_b) })
}

fn check_scenario(f: &BellFunctional, model: &QuantumModel) -> Result<()> {
    if f.scenario != model.scenario() {
        return Err(Error::ScenarioMismatch(format!("functional on {:?}, model on {:?}", f.scenario, model.scenario())));
    }
    Ok(())
}

/// One maximising measurement update for `party` with everything else fixed.
/// The model's state is taken to be its leading eigenvector.
pub fn measurement_step(f: &BellFunctional, model: &QuantumModel, party: Party, solver: MeasurementSolver) -> Result<QuantumModel> {
    check_scenario(f, model)?;
    let mut it = iterate_from_model(model)?;
    let cfg = SeesawConfig { dim: model.dim, solver, ..Default::default() };
    update_party(f, &mut it, party, &cfg);
    to_model(&it)
}

/// Replaces the state by the leading eigenvector of the Bell operator and
/// returns the new model with its value (offset included).
pub fn state_step(f: &BellFunctional, model: &QuantumModel) -> Result<(QuantumModel, f64)> {
    check_scenario(f, model)?;
    let mut it = iterate_from_model(model)?;
    update_state(f, &mut it);
    let v = raw_objective(f, &it) + f.offset;
    Ok((to_model(&it)?, v))
}
