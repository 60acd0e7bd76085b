//! Upper bounds on D-dimensional quantum values by rank-constrained
//! moment-matrix sampling: moment matrices of random rank-one realisations
//! with a fixed rank profile span an affine set, and the SDP over its PSD
//! part bounds every realisation with that profile.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::convex::{embed_hermitian, solve_sdp, SemidefiniteProgram, SolveStatus, Tolerances};
use crate::error::{Error, Result};
use crate::functionals::BellFunctional;
use crate::matkernel::{random_unit_vector, random_unitary, C64};
use crate::model::Scenario;

/// Which outcomes of each input carry a rank-one projector (1) or zero (0).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankProfile {
    pub alice: Vec<Vec<u8>>,
    pub bob: Vec<Vec<u8>>,
}

impl RankProfile {
    pub fn new(alice: Vec<Vec<u8>>, bob: Vec<Vec<u8>>) -> Result<Self> {
        let p = RankProfile { alice, bob };
        let dim = p.alice.first().map_or(0, |r| rank(r));
        for r in p.alice.iter().chain(&p.bob) {
            if r.iter().any(|&v| v > 1) || rank(r) != dim {
                return Err(Error::DomainError("rank vectors must be 0/1 with equal sums".into()));
            }
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.alice.first().map_or(0, |r| rank(r))
    }

    fn support(r: &[u8]) -> Vec<usize> {
        r.iter().enumerate().filter(|(_, &v)| v == 1).map(|(a, _)| a).collect()
    }
}

fn rank(r: &[u8]) -> usize {
    r.iter().map(|&v| v as usize).sum()
}

/// All 0/1 vectors of length `d` with `dim` ones, in lexicographic order.
fn rank_vectors(d: usize, dim: usize) -> Vec<Vec<u8>> {
    (0u32..1 << d)
        .filter(|m| m.count_ones() as usize == dim)
        .map(|m| (0..d).map(|a| ((m >> a) & 1) as u8).collect())
        .collect::<BTreeSet<Vec<u8>>>()
        .into_iter()
        .collect()
}

/// Every rank profile for local dimension `dim` in scenario `s`.
pub fn enumerate_rank_profiles(s: Scenario, dim: usize) -> Result<Vec<RankProfile>> {
    if dim == 0 || dim > s.outcomes_a || dim > s.outcomes_b {
        return Err(Error::DomainError(format!("need 1 ≤ D ≤ outcomes, got D = {dim}")));
    }
    let va = rank_vectors(s.outcomes_a, dim);
    let vb = rank_vectors(s.outcomes_b, dim);
    let mut out = Vec::new();
    let total_inputs = s.inputs_a + s.inputs_b;
    let mut idx = vec![0usize; total_inputs];
    loop {
        let alice = (0..s.inputs_a).map(|x| va[idx[x]].clone()).collect();
        let bob = (0..s.inputs_b).map(|y| vb[idx[s.inputs_a + y]].clone()).collect();
        out.push(RankProfile { alice, bob });
        // odometer, last input fastest
        let mut k = total_inputs;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            let lim = if k < s.inputs_a { va.len() } else { vb.len() };
            idx[k] += 1;
            if idx[k] < lim {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Relabeling of inputs and outcomes: x → perm[x], a → sign·a + shift[x]
/// (mod d), optionally exchanging the parties first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    pub swap: bool,
    pub perm_a: Vec<usize>,
    pub perm_b: Vec<usize>,
    pub out_a: Vec<(bool, usize)>,
    pub out_b: Vec<(bool, usize)>,
}

fn apply_out(map: (bool, usize), a: usize, d: usize) -> usize {
    let base = if map.0 { (d - a) % d } else { a };
    (base + map.1) % d
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn outcome_maps(d: usize, inputs: usize) -> Vec<Vec<(bool, usize)>> {
    let single: Vec<(bool, usize)> = [false, true].iter().flat_map(|&s| (0..d).map(move |t| (s, t))).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..inputs {
        out = out
            .into_iter()
            .flat_map(|v: Vec<(bool, usize)>| {
                single.iter().map(move |m| {
                    let mut w = v.clone();
                    w.push(*m);
                    w
                })
            })
            .collect();
    }
    out
}

/// Relabelings under which the coefficient tensor is invariant (to 1e-12).
/// Candidates: party swap × input permutations × per-input maps a → ±a + t.
pub fn functional_symmetries(f: &BellFunctional) -> Vec<Relabeling> {
    let s = f.scenario;
    let (da, db) = (s.outcomes_a, s.outcomes_b);
    let swaps: &[bool] = if s.inputs_a == s.inputs_b && da == db { &[false, true] } else { &[false] };
    let pa = permutations(s.inputs_a);
    let pb = permutations(s.inputs_b);
    let oa = outcome_maps(da, s.inputs_a);
    let ob = outcome_maps(db, s.inputs_b);
    let mut out = Vec::new();
    for &swap in swaps {
        for perm_a in &pa {
            for perm_b in &pb {
                for out_a in &oa {
                    'cand: for out_b in &ob {
                        for x in 0..s.inputs_a {
                            for y in 0..s.inputs_b {
                                for a in 0..da {
                                    for b in 0..db {
                                        // source cell after the optional swap
                                        let v = if swap { f.coeff(b, a, y, x) } else { f.coeff(a, b, x, y) };
                                        let t = f.coeff(
                                            apply_out(out_a[x], a, da),
                                            apply_out(out_b[y], b, db),
                                            perm_a[x],
                                            perm_b[y],
                                        );
                                        if (v - t).abs() > 1e-12 {
                                            continue 'cand;
                                        }
                                    }
                                }
                            }
                        }
                        out.push(Relabeling {
                            swap,
                            perm_a: perm_a.clone(),
                            perm_b: perm_b.clone(),
                            out_a: out_a.clone(),
                            out_b: out_b.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Image of a rank profile under a relabeling: the operator that was at
/// (a, x) ends up at (σ_x(a), π(x)).
pub fn relabel_profile(p: &RankProfile, g: &Relabeling) -> RankProfile {
    let (src_a, src_b) = if g.swap { (&p.bob, &p.alice) } else { (&p.alice, &p.bob) };
    let map = |src: &Vec<Vec<u8>>, perm: &[usize], outm: &[(bool, usize)]| {
        let d = src[0].len();
        let mut dst = vec![vec![0u8; d]; src.len()];
        for (x, r) in src.iter().enumerate() {
            for (a, &v) in r.iter().enumerate() {
                dst[perm[x]][apply_out(outm[x], a, d)] = v;
            }
        }
        dst
    };
    RankProfile { alice: map(src_a, &g.perm_a, &g.out_a), bob: map(src_b, &g.perm_b, &g.out_b) }
}

/// One representative per orbit (the lexicographically smallest member).
pub fn deduplicate_profiles(profiles: &[RankProfile], symmetries: &[Relabeling]) -> Vec<RankProfile> {
    let mut reps = BTreeSet::new();
    for p in profiles {
        let canon = symmetries.iter().map(|g| relabel_profile(p, g)).chain(std::iter::once(p.clone())).min().expect("nonempty");
        reps.insert(canon);
    }
    reps.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Identity and single projectors of either party.
    One,
    /// Plus all products A·B.
    #[default]
    OneAb,
    /// Plus products A·A' of Alice's projectors across different inputs.
    OneAbAa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monomial {
    Identity,
    A { x: usize, a: usize },
    B { y: usize, b: usize },
    Ab { x: usize, a: usize, y: usize, b: usize },
    Aa { x: usize, a: usize, x2: usize, a2: usize },
}

/// Operator words indexing a moment matrix. Only nonzero projectors are
/// used, and per input the last nonzero one is dropped because it equals
/// the identity minus the others; the full matrix is a congruence of this
/// one, so both are PSD together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialList {
    pub level: Level,
    pub words: Vec<Monomial>,
}

impl MonomialList {
    pub fn for_profile(p: &RankProfile, level: Level) -> Self {
        let kept = |rs: &Vec<Vec<u8>>| -> Vec<(usize, usize)> {
            rs.iter()
                .enumerate()
                .flat_map(|(x, r)| {
                    let sup = RankProfile::support(r);
                    let n = sup.len().saturating_sub(1);
                    sup.into_iter().take(n).map(move |a| (x, a))
                })
                .collect()
        };
        let ka = kept(&p.alice);
        let kb = kept(&p.bob);
        let mut words = vec![Monomial::Identity];
        words.extend(ka.iter().map(|&(x, a)| Monomial::A { x, a }));
        words.extend(kb.iter().map(|&(y, b)| Monomial::B { y, b }));
        if level != Level::One {
            for &(x, a) in &ka {
                for &(y, b) in &kb {
                    words.push(Monomial::Ab { x, a, y, b });
                }
            }
        }
        if level == Level::OneAbAa {
            for &(x, a) in &ka {
                for &(x2, a2) in &ka {
                    if x != x2 {
                        words.push(Monomial::Aa { x, a, x2, a2 });
                    }
                }
            }
        }
        MonomialList { level, words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub gamma: DMatrix<C64>,
    /// Raw functional value of the realisation that produced the matrix.
    pub objective: f64,
}

/// A realisation with rank-one projectors on the profile's support.
struct Realisation {
    /// ψ as a D×D coefficient matrix.
    m: DMatrix<C64>,
    a: Vec<Vec<DMatrix<C64>>>,
    b: Vec<Vec<DMatrix<C64>>>,
}

fn random_projectors(r: &[u8], dim: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<C64>> {
    let u = random_unitary(dim, rng);
    let mut col = 0;
    r.iter()
        .map(|&v| {
            if v == 1 {
                let c: DVector<C64> = u.inner().column(col).into_owned();
                col += 1;
                &c * c.adjoint()
            } else {
                DMatrix::zeros(dim, dim)
            }
        })
        .collect()
}

fn random_realisation(p: &RankProfile, rng: &mut ChaCha8Rng) -> Realisation {
    let dim = p.dim();
    let a = p.alice.iter().map(|r| random_projectors(r, dim, rng)).collect();
    let b = p.bob.iter().map(|r| random_projectors(r, dim, rng)).collect();
    let psi = random_unit_vector(dim * dim, rng);
    Realisation { m: DMatrix::from_fn(dim, dim, |i, j| psi[i * dim + j]), a, b }
}

fn moment_of(f: &BellFunctional, list: &MonomialList, r: &Realisation) -> MomentMatrix {
    // (X ⊗ Y)ψ ↔ X M Yᵀ
    let vecs: Vec<DMatrix<C64>> = list
        .words
        .iter()
        .map(|w| match *w {
            Monomial::Identity => r.m.clone(),
            Monomial::A { x, a } => &r.a[x][a] * &r.m,
            Monomial::B { y, b } => &r.m * r.b[y][b].transpose(),
            Monomial::Ab { x, a, y, b } => &r.a[x][a] * &r.m * r.b[y][b].transpose(),
            Monomial::Aa { x, a, x2, a2 } => &r.a[x][a] * &r.a[x2][a2] * &r.m,
        })
        .collect();
    let n = vecs.len();
    let gamma = DMatrix::from_fn(n, n, |i, j| vecs[i].iter().zip(vecs[j].iter()).map(|(u, v)| u.conj() * v).sum::<C64>());
    let s = f.scenario;
    let mut obj = 0.0;
    for x in 0..s.inputs_a {
        for a in 0..s.outcomes_a {
            let am = &r.a[x][a] * &r.m;
            for y in 0..s.inputs_b {
                for b in 0..s.outcomes_b {
                    let c = f.coeff(a, b, x, y);
                    if c != 0.0 {
                        let v = &am * r.b[y][b].transpose();
                        obj += c * r.m.iter().zip(v.iter()).map(|(u, w)| (u.conj() * w).re).sum::<f64>();
                    }
                }
            }
        }
    }
    MomentMatrix { gamma, objective: obj }
}

/// Moment matrix of one random realisation with the given profile.
pub fn sample_moment_matrix(f: &BellFunctional, profile: &RankProfile, list: &MonomialList, seed: u64) -> MomentMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    moment_of(f, list, &random_realisation(profile, &mut rng))
}

/// Real coordinates [diag, √2·Re(upper), √2·Im(upper)]; Euclidean norm
/// equals the Frobenius norm of the Hermitian matrix.
pub fn vectorize(g: &DMatrix<C64>) -> Vec<f64> {
    let n = g.nrows();
    let mut v = Vec::with_capacity(n * n);
    v.extend((0..n).map(|i| g[(i, i)].re));
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            v.push(r2 * g[(i, j)].re);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            v.push(r2 * g[(i, j)].im);
        }
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Incremental orthonormal basis with twice-applied Gram–Schmidt.
struct Span {
    basis: Vec<Vec<f64>>,
    tol: f64,
}

impl Span {
    /// Adds `v` if independent; returns the normalised residual and the
    /// projection coefficients when accepted.
    fn try_add(&mut self, mut v: Vec<f64>) -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let n0 = norm(&v);
        if n0 == 0.0 {
            return None;
        }
        let mut coef = vec![0.0; self.basis.len()];
        for _ in 0..2 {
            for (k, b) in self.basis.iter().enumerate() {
                let h = dot(b, &v);
                coef[k] += h;
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= h * y);
            }
        }
        let r = norm(&v);
        if r < self.tol * n0 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= r);
        self.basis.push(v.clone());
        Some((v, r, coef))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpanBasis {
    pub basis: Vec<Vec<f64>>,
    pub dim: usize,
}

/// Orthonormal basis of the linear span of the vectorised samples.
pub fn affine_span_basis(samples: &[MomentMatrix], tol: f64) -> SpanBasis {
    let mut span = Span { basis: Vec::new(), tol };
    for s in samples {
        span.try_add(vectorize(&s.gamma));
    }
    let dim = span.basis.len();
    SpanBasis { basis: span.basis, dim }
}

/// Γ = Γ₀ + Σ_j t_j D_j with the objective carried along affinely.
struct AffineFamily {
    g0: DMatrix<C64>,
    f0: f64,
    dirs: Vec<DMatrix<C64>>,
    fdirs: Vec<f64>,
    samples: usize,
}

fn affine_family(
    f: &BellFunctional,
    profile: &RankProfile,
    list: &MonomialList,
    cfg: &DimBoundConfig,
    rng: &mut ChaCha8Rng,
) -> AffineFamily {
    let first = moment_of(f, list, &random_realisation(profile, rng));
    let v0 = vectorize(&first.gamma);
    let mut span = Span { basis: Vec::new(), tol: cfg.dependence_tol };
    // unnormalised companions of each basis vector
    let mut mats: Vec<DMatrix<C64>> = Vec::new();
    let mut fs: Vec<f64> = Vec::new();
    let mut dependent = 0;
    let mut samples = 1;
    while dependent < cfg.dependent_draws && samples < cfg.max_samples {
        let s = moment_of(f, list, &random_realisation(profile, rng));
        samples += 1;
        let v: Vec<f64> = vectorize(&s.gamma).iter().zip(&v0).map(|(a, b)| a - b).collect();
        match span.try_add(v) {
            Some((_, r, coef)) => {
                dependent = 0;
                let mut m = &s.gamma - &first.gamma;
                let mut fv = s.objective - first.objective;
                for (k, h) in coef.iter().enumerate() {
                    m -= &mats[k] * C64::new(*h, 0.0);
                    fv -= h * fs[k];
                }
                mats.push(m / C64::new(r, 0.0));
                fs.push(fv / r);
            }
            None => dependent += 1,
        }
    }
    AffineFamily { g0: first.gamma, f0: first.objective, dirs: mats, fdirs: fs, samples }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DimBoundConfig {
    pub level: Level,
    pub seed: u64,
    pub dependence_tol: f64,
    pub dependent_draws: usize,
    pub max_samples: usize,
    /// Skip symmetry reduction and solve every profile.
    pub full_enumeration: bool,
    pub sdp_tolerance: f64,
    pub sdp_max_iterations: usize,
}

impl Default for DimBoundConfig {
    fn default() -> Self {
        DimBoundConfig {
            level: Level::OneAb,
            seed: 0,
            dependence_tol: 1e-9,
            dependent_draws: 3,
            max_samples: 20_000,
            full_enumeration: false,
            sdp_tolerance: 1e-7,
            sdp_max_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileBound {
    pub profile: RankProfile,
    /// Raw bound (offset not included); None when the solver failed.
    pub value: Option<f64>,
    pub span_dim: usize,
    pub samples: usize,
    pub moment_size: usize,
    pub status: Option<SolveStatus>,
    pub residual: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimBoundReport {
    /// Bound on the functional (offset included).
    pub value: f64,
    pub dim: usize,
    pub level: Level,
    pub best_profile: RankProfile,
    pub total_profiles: usize,
    pub symmetries: usize,
    pub profiles: Vec<ProfileBound>,
    /// Some profile failed; the bound is over the successful ones only.
    pub partial: bool,
}

fn profile_seed(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Bound for a single profile.
pub fn profile_bound(f: &BellFunctional, profile: &RankProfile, cfg: &DimBoundConfig, stream: usize) -> ProfileBound {
    let list = MonomialList::for_profile(profile, cfg.level);
    let mut rng = profile_seed(cfg.seed, stream);
    let fam = affine_family(f, profile, &list, cfg, &mut rng);
    let n = list.len();
    let m = fam.dirs.len();
    let mut out = ProfileBound {
        profile: profile.clone(),
        value: None,
        span_dim: m,
        samples: fam.samples,
        moment_size: n,
        status: None,
        residual: 0.0,
        error: None,
    };
    if m == 0 {
        out.value = Some(fam.f0);
        out.status = Some(SolveStatus::Optimal);
        return out;
    }
    let mut sdp = SemidefiniteProgram::new(vec![2 * n], m);
    sdp.set_constant(0, embed_hermitian(&fam.g0));
    for (j, (d, fj)) in fam.dirs.iter().zip(&fam.fdirs).enumerate() {
        sdp.add_coefficient(j, 0, embed_hermitian(d));
        sdp.objective[j] = *fj;
    }
    let tol = Tolerances { sdp: cfg.sdp_tolerance, sdp_max_iterations: cfg.sdp_max_iterations, ..Tolerances::default() };
    match solve_sdp(&sdp, &tol) {
        Ok(rep) if matches!(rep.status, SolveStatus::Optimal | SolveStatus::MaxIterations) => {
            out.value = Some(fam.f0 + rep.value);
            out.status = Some(rep.status);
            out.residual = rep.primal_residual.max(rep.dual_residual).max(rep.gap.abs());
        }
        Ok(rep) => {
            out.status = Some(rep.status);
            out.error = Some(format!("solver status {:?}", rep.status));
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Maximum over rank profiles (up to symmetries of `f`) of the per-profile
/// bound, plus the offset.
pub fn dim_bound(f: &BellFunctional, dim: usize, cfg: &DimBoundConfig) -> Result<DimBoundReport> {
    let s = f.scenario;
    let all = enumerate_rank_profiles(s, dim)?;
    let total = all.len();
    let (reps, nsym) = if cfg.full_enumeration {
        (all, 0)
    } else {
        let sym = functional_symmetries(f);
        (deduplicate_profiles(&all, &sym), sym.len())
    };
    let results: Vec<ProfileBound> =
        reps.par_iter().enumerate().map(|(i, p)| profile_bound(f, p, cfg, i)).collect();
    let mut best: Option<(f64, &ProfileBound)> = None;
    for r in &results {
        if let Some(v) = r.value {
            if best.map_or(true, |(b, _)| v > b) {
                best = Some((v, r));
            }
        }
    }
    let Some((raw, winner)) = best else {
        return Err(Error::NumericalFailure("every rank profile failed".into()));
    };
    let best_profile = winner.profile.clone();
    let partial = results.iter().any(|r| r.value.is_none());
    Ok(DimBoundReport {
        value: raw + f.offset,
        dim,
        level: cfg.level,
        best_profile,
        total_profiles: total,
        symmetries: nsym,
        profiles: results,
        partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{cglmp_functional, satwap_functional};
    use crate::matkernel::hermitian_eig_unchecked;

    #[test]
    fn profile_counts() {
        let s = Scenario::multi(4);
        let counts: Vec<usize> = (1..=4).map(|d| enumerate_rank_profiles(s, d).unwrap().len()).collect();
        assert_eq!(counts, vec![256, 1296, 256, 1]);
        assert!(enumerate_rank_profiles(s, 5).is_err());
        let paper = RankProfile::new(
            vec![vec![1, 0, 1, 1], vec![0, 1, 1, 1]],
            vec![vec![0, 1, 1, 1], vec![1, 0, 1, 1]],
        )
        .unwrap();
        assert!(enumerate_rank_profiles(s, 3).unwrap().contains(&paper));
    }

    #[test]
    fn symmetries_form_orbits() {
        let f = cglmp_functional(4);
        let sym = functional_symmetries(&f);
        assert!(!sym.is_empty());
        let all = enumerate_rank_profiles(f.scenario, 3).unwrap();
        let reps = deduplicate_profiles(&all, &sym);
        assert!(reps.len() < all.len());
        // every symmetry preserves the coefficient tensor, hence values
        let g = &sym[sym.len() / 2];
        let p = &all[17];
        assert_eq!(relabel_profile(p, g).dim(), 3);
    }

    #[test]
    fn moment_matrices_are_psd_and_normalised() {
        let f = cglmp_functional(4);
        for dim in 1..=4 {
            let p = &enumerate_rank_profiles(f.scenario, dim).unwrap()[0];
            let list = MonomialList::for_profile(p, Level::OneAb);
            let m = sample_moment_matrix(&f, p, &list, 3);
            assert!((m.gamma[(0, 0)].re - 1.0).abs() < 1e-12);
            let e = hermitian_eig_unchecked(&m.gamma);
            assert!(e.eigenvalues.iter().all(|&l| l > -1e-9));
            if dim == 1 {
                assert_eq!(m.gamma.nrows(), 1);
            }
        }
    }

    #[test]
    fn span_of_repeats_and_pairs() {
        let f = cglmp_functional(4);
        let p = &enumerate_rank_profiles(f.scenario, 3).unwrap()[5];
        let list = MonomialList::for_profile(p, Level::OneAb);
        let a = sample_moment_matrix(&f, p, &list, 1);
        let b = sample_moment_matrix(&f, p, &list, 2);
        assert_eq!(affine_span_basis(&[a.clone(), a.clone(), a.clone()], 1e-9).dim, 1);
        assert_eq!(affine_span_basis(&[a, b], 1e-9).dim, 2);
    }

    #[test]
    fn qubit_cglmp_bound() {
        let f = cglmp_functional(2);
        let r = dim_bound(&f, 2, &DimBoundConfig::default()).unwrap();
        let want = (2.0 * 2f64.sqrt() - 2.0) / 4.0;
        assert!((r.value - want).abs() < 1e-4, "{}", r.value);
    }

    #[test]
    fn span_dimension_is_seed_independent() {
        let f = satwap_functional(4);
        let p = enumerate_rank_profiles(f.scenario, 2).unwrap()[7].clone();
        let dims: Vec<usize> = (0..5)
            .map(|seed| profile_bound(&f, &p, &DimBoundConfig { seed, ..Default::default() }, 0).span_dim)
            .collect();
        assert!(dims.windows(2).all(|w| w[0] == w[1]), "{dims:?}");
    }
}
