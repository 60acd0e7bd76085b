//! Primal-dual interior point for block-diagonal LMI problems
//!
//!   maximize cᵀy  s.t.  F₀ + Σᵢ yᵢ Fᵢ ⪰ 0,  G y = h
//!
//! solved through the standard pair with C = F₀, Aᵢ = −Fᵢ, b = c. Search
//! directions use Nesterov–Todd scaling and a Mehrotra corrector, all
//! formed in the scaled space where X and Z both become the diagonal D.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SolveReport, SolveStatus, Tolerances};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemidefiniteProgram {
    pub block_sizes: Vec<usize>,
    /// F₀, one symmetric matrix per block.
    pub constant: Vec<DMatrix<f64>>,
    /// For each variable, its (block, Fᵢ restricted to that block) pieces.
    pub coefficients: Vec<Vec<(usize, DMatrix<f64>)>>,
    /// Maximized.
    pub objective: Vec<f64>,
    /// Rows (g, h) meaning g·y = h.
    pub equalities: Vec<(Vec<f64>, f64)>,
}

impl SemidefiniteProgram {
    pub fn new(block_sizes: Vec<usize>, num_vars: usize) -> Self {
        let constant = block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        SemidefiniteProgram {
            block_sizes,
            constant,
            coefficients: vec![Vec::new(); num_vars],
            objective: vec![0.0; num_vars],
            equalities: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_constant(&mut self, block: usize, m: DMatrix<f64>) {
        self.constant[block] = m;
    }

    pub fn add_coefficient(&mut self, var: usize, block: usize, m: DMatrix<f64>) {
        if let Some(slot) = self.coefficients[var].iter_mut().find(|(b, _)| *b == block) {
            slot.1 += m;
        } else {
            self.coefficients[var].push((block, m));
        }
    }

    pub fn add_equality(&mut self, g: Vec<f64>, h: f64) {
        self.equalities.push((g, h));
    }

    /// F(y) block by block.
    pub fn mapped(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = self.constant.clone();
        for (i, pieces) in self.coefficients.iter().enumerate() {
            for (b, m) in pieces {
                out[*b] += m * y[i];
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let nb = self.block_sizes.len();
        if self.constant.len() != nb {
            return Err(Error::DimensionMismatch("one constant matrix per block required".into()));
        }
        for (b, m) in self.constant.iter().enumerate() {
            if m.nrows() != self.block_sizes[b] || m.ncols() != self.block_sizes[b] {
                return Err(Error::DimensionMismatch(format!("constant block {b} has the wrong size")));
            }
        }
        if self.coefficients.len() != self.num_vars() {
            return Err(Error::DimensionMismatch("coefficient list length differs from objective".into()));
        }
        for pieces in &self.coefficients {
            for (b, m) in pieces {
                if *b >= nb || m.nrows() != self.block_sizes[*b] || m.ncols() != self.block_sizes[*b] {
                    return Err(Error::DimensionMismatch(format!("coefficient piece for block {b} has the wrong size")));
                }
            }
        }
        for (g, h) in &self.equalities {
            if g.len() != self.num_vars() || !h.is_finite() {
                return Err(Error::DimensionMismatch("equality row of wrong length".into()));
            }
        }
        Ok(())
    }
}

/// dst += s·src
fn add_scaled(dst: &mut DMatrix<f64>, s: f64, src: &DMatrix<f64>) {
    dst.zip_apply(src, |a, b| *a += s * b);
}

/// Real symmetric embedding [[Re, −Im], [Im, Re]] of a Hermitian matrix.
/// Inner products double: ⟨emb H₁, emb H₂⟩ = 2 Re tr(H₁H₂).
pub fn embed_hermitian(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`embed_hermitian`] (reads the first block column).
pub fn unembed_hermitian(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        Complex64::new(re, im)
    })
}

/// One coefficient piece in the internal standard form: Aᵢ restricted to a
/// block, stored sparse when that is cheaper.
struct Piece {
    var: usize,
    dense: DMatrix<f64>,
    sparse: Option<Vec<(usize, usize, f64)>>,
}

struct Problem {
    sizes: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    /// per block, the pieces touching it
    blocks: Vec<Vec<Piece>>,
    b: Vec<f64>,
    m: usize,
}

fn fro(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl Problem {
    fn a_op(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (bi, pieces) in self.blocks.iter().enumerate() {
            for p in pieces {
                out[p.var] += match &p.sparse {
                    Some(s) => s.iter().map(|&(i, j, v)| v * x[bi][(i, j)]).sum::<f64>(),
                    None => inner(&p.dense, &x[bi]),
                };
            }
        }
        out
    }

    fn a_adj(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (bi, pieces) in self.blocks.iter().enumerate() {
            for p in pieces {
                let yi = y[p.var];
                if yi == 0.0 {
                    continue;
                }
                match &p.sparse {
                    Some(s) => {
                        for &(i, j, v) in s {
                            out[bi][(i, j)] += yi * v;
                        }
                    }
                    None => add_scaled(&mut out[bi], yi, &p.dense),
                }
            }
        }
        out
    }
}

/// NT scaling data of one block.
struct Scaling {
    g: DMatrix<f64>,
    d: Vec<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let r = z.clone().cholesky()?.l();
    let svd = (r.transpose() * &l).svd(false, true);
    let vt = svd.v_t?;
    let d: Vec<f64> = svd.singular_values.iter().cloned().collect();
    if d.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    let mut g = l * vt.transpose();
    for (j, &s) in d.iter().enumerate() {
        let f = 1.0 / s.sqrt();
        g.column_mut(j).scale_mut(f);
    }
    Some(Scaling { g, d })
}

/// Gᵀ A G, using the sparse form when available.
fn congruence(piece: &Piece, g: &DMatrix<f64>) -> DMatrix<f64> {
    match &piece.sparse {
        Some(s) => {
            let n = g.ncols();
            let mut out = DMatrix::zeros(n, n);
            for &(i, j, v) in s {
                let gi = g.row(i);
                let gj = g.row(j);
                for q in 0..n {
                    let f = v * gj[q];
                    if f == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        out[(p, q)] += gi[p] * f;
                    }
                }
            }
            out
        }
        None => g.transpose() * &piece.dense * g,
    }
}

/// Largest α ≤ cap with D + αΔ ⪰ 0.
fn max_step(d: &[f64], delta: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| s[i] * delta[(i, j)] * s[j]);
    let m = sym(&m);
    let lmin = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: Vec<f64>,
    z: Vec<DMatrix<f64>>,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
}

impl Measures {
    fn worst(&self) -> f64 {
        self.relgap.max(self.pinf).max(self.dinf)
    }
}

pub fn solve_sdp(sdp: &SemidefiniteProgram, tol: &Tolerances) -> Result<SolveReport> {
    sdp.validate()?;
    let nvars = sdp.num_vars();

    // Eliminate y = y₀ + N t when equality constraints are present.
    let (y0, null) = if sdp.equalities.is_empty() {
        (vec![0.0; nvars], None)
    } else {
        let p = sdp.equalities.len();
        let g = DMatrix::from_fn(p, nvars, |i, j| sdp.equalities[i].0[j]);
        let h = DVector::from_fn(p, |i, _| sdp.equalities[i].1);
        let svd = g.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cut = 1e-10 * smax.max(1.0);
        let y0 = svd.solve(&h, cut).map_err(|e| Error::NumericalFailure(e.to_string()))?;
        if (&g * &y0 - &h).amax() > tol.sdp.max(1e-9) * (1.0 + h.amax()) {
            return Ok(infeasible_report(nvars));
        }
        // full V from the SVD of the (square-padded) row space
        let gtg = g.transpose() * &g;
        let eig = gtg.symmetric_eigen();
        let cols: Vec<DVector<f64>> = (0..nvars)
            .filter(|&k| eig.eigenvalues[k].abs() <= cut * smax.max(1.0))
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let nmat = if cols.is_empty() { DMatrix::zeros(nvars, 0) } else { DMatrix::from_columns(&cols) };
        (y0.iter().cloned().collect(), Some(nmat))
    };

    // Build the reduced LMI data.
    let nb = sdp.block_sizes.len();
    let mut f0 = sdp.constant.clone();
    for (i, pieces) in sdp.coefficients.iter().enumerate() {
        if y0[i] != 0.0 {
            for (b, m) in pieces {
                f0[*b] += m * y0[i];
            }
        }
    }
    let (m, objective, coeffs): (usize, Vec<f64>, Vec<Vec<(usize, DMatrix<f64>)>>) = match &null {
        None => (nvars, sdp.objective.clone(), sdp.coefficients.clone()),
        Some(n) => {
            let k = n.ncols();
            let mut coeffs = vec![Vec::new(); k];
            for (t, slot) in coeffs.iter_mut().enumerate() {
                let mut acc: Vec<Option<DMatrix<f64>>> = vec![None; nb];
                for (i, pieces) in sdp.coefficients.iter().enumerate() {
                    let w = n[(i, t)];
                    if w.abs() < 1e-15 {
                        continue;
                    }
                    for (b, mat) in pieces {
                        match &mut acc[*b] {
                            Some(a) => add_scaled(a, w, mat),
                            None => acc[*b] = Some(mat * w),
                        }
                    }
                }
                *slot = acc.into_iter().enumerate().filter_map(|(b, a)| a.map(|a| (b, a))).collect();
            }
            let obj = (0..k).map(|t| (0..nvars).map(|i| n[(i, t)] * sdp.objective[i]).sum()).collect();
            (k, obj, coeffs)
        }
    };

    let mut blocks: Vec<Vec<Piece>> = (0..nb).map(|_| Vec::new()).collect();
    for (var, pieces) in coeffs.into_iter().enumerate() {
        for (b, mat) in pieces {
            let a = -mat;
            let nnz = a.iter().filter(|v| **v != 0.0).count();
            let sparse = if nnz <= a.nrows() {
                let mut s = Vec::with_capacity(nnz);
                for j in 0..a.ncols() {
                    for i in 0..a.nrows() {
                        if a[(i, j)] != 0.0 {
                            s.push((i, j, a[(i, j)]));
                        }
                    }
                }
                Some(s)
            } else {
                None
            };
            blocks[b].push(Piece { var, dense: a, sparse });
        }
    }
    let prob = Problem { sizes: sdp.block_sizes.clone(), c: f0.iter().map(sym).collect(), blocks, b: objective, m };

    let (it, iterations, status, meas) = interior_point(&prob, tol)?;

    // Map back to the caller's variables.
    let y: Vec<f64> = match &null {
        None => it.y.clone(),
        Some(n) => (0..nvars).map(|i| y0[i] + (0..m).map(|t| n[(i, t)] * it.y[t]).sum::<f64>()).collect(),
    };
    let value = sdp.objective.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>();
    let mapped = sdp.mapped(&y);
    let psd_violation = mapped
        .iter()
        .map(|blk| sym(blk).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let eq_res = sdp
        .equalities
        .iter()
        .map(|(g, h)| (g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - h).abs())
        .fold(0.0f64, f64::max);
    let dual: Vec<f64> = it.x.iter().flat_map(|blk| blk.transpose().iter().cloned().collect::<Vec<_>>()).collect();
    Ok(SolveReport {
        status,
        value,
        primal: y,
        dual,
        primal_residual: eq_res.max(-psd_violation),
        dual_residual: meas.pinf,
        gap: (meas.pobj - meas.dobj).abs(),
        psd_violation,
        iterations,
    })
}

fn infeasible_report(nvars: usize) -> SolveReport {
    SolveReport {
        status: SolveStatus::Infeasible,
        value: f64::NAN,
        primal: vec![f64::NAN; nvars],
        dual: Vec::new(),
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::NAN,
        psd_violation: f64::NAN,
        iterations: 0,
    }
}

fn measures(prob: &Problem, it: &Iterate, bnorm: f64, cnorm: f64) -> (Measures, Vec<f64>, Vec<DMatrix<f64>>) {
    let ax = prob.a_op(&it.x);
    let rp: Vec<f64> = prob.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let aty = prob.a_adj(&it.y);
    let rd: Vec<DMatrix<f64>> = (0..prob.sizes.len()).map(|k| &prob.c[k] - &it.z[k] - &aty[k]).collect();
    let pobj: f64 = prob.c.iter().zip(&it.x).map(|(c, x)| inner(c, x)).sum();
    let dobj: f64 = prob.b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
    let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| inner(x, z)).sum();
    let denom = 1.0 + pobj.abs() + dobj.abs();
    let m = Measures {
        pobj,
        dobj,
        relgap: (pobj - dobj).abs().max(xz.abs()) / denom,
        pinf: rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm),
        dinf: rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + cnorm),
    };
    (m, rp, rd)
}

#[allow(clippy::type_complexity)]
fn interior_point(prob: &Problem, tol: &Tolerances) -> Result<(Iterate, usize, SolveStatus, Measures)> {
    let nb = prob.sizes.len();
    let ntot: usize = prob.sizes.iter().sum();
    let bnorm = prob.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = prob.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();

    // Infeasible starting point scaled to the data.
    let mut x = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    for k in 0..nb {
        let n = prob.sizes[k] as f64;
        let mut xi = 10f64.max(n.sqrt());
        let mut eta = 10f64.max(n.sqrt()).max(fro(&prob.c[k]));
        for p in &prob.blocks[k] {
            let an = fro(&p.dense);
            xi = xi.max(n * (1.0 + prob.b[p.var].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(DMatrix::identity(prob.sizes[k], prob.sizes[k]) * xi);
        z.push(DMatrix::identity(prob.sizes[k], prob.sizes[k]) * eta);
    }
    let mut it = Iterate { x, y: vec![0.0; prob.m], z };
    let mut best: Option<(Iterate, Measures)> = None;

    for iter in 0..tol.sdp_max_iterations {
        let (meas, rp, rd) = measures(prob, &it, bnorm, cnorm);
        if !meas.pobj.is_finite() || !meas.dobj.is_finite() {
            break;
        }
        if meas.worst() < tol.sdp {
            return Ok((it, iter, SolveStatus::Optimal, meas));
        }
        // divergence of the dual objective with a feasible slack signals an unbounded LMI
        if meas.dinf < tol.sdp && meas.dobj > 1e10 * (1.0 + meas.pobj.abs().min(1e10)) {
            return Ok((it, iter, SolveStatus::Unbounded, meas));
        }
        if meas.pinf < tol.sdp && meas.pobj < -1e10 {
            return Ok((it, iter, SolveStatus::Infeasible, meas));
        }
        let keep = best.as_ref().map_or(true, |(_, bm)| meas.worst() < bm.worst());
        let mu = it.x.iter().zip(&it.z).map(|(x, z)| inner(x, z)).sum::<f64>() / ntot as f64;

        // scaling and Schur complement
        let mut scal = Vec::with_capacity(nb);
        for k in 0..nb {
            match nt_scaling(&it.x[k], &it.z[k]) {
                Some(s) => scal.push(s),
                None => return finish_early(it, best, iter, meas, tol),
            }
        }
        let mut mmat = DMatrix::<f64>::zeros(prob.m, prob.m);
        let mut tilde: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(nb);
        for k in 0..nb {
            let n = prob.sizes[k];
            let pieces = &prob.blocks[k];
            let t: Vec<DMatrix<f64>> = pieces.iter().map(|p| congruence(p, &scal[k].g)).collect();
            if !pieces.is_empty() {
                let mut cols = DMatrix::<f64>::zeros(n * n, pieces.len());
                for (c, tm) in t.iter().enumerate() {
                    cols.column_mut(c).copy_from_slice(tm.as_slice());
                }
                let gram = cols.transpose() * &cols;
                for (a, pa) in pieces.iter().enumerate() {
                    for (b, pb) in pieces.iter().enumerate() {
                        mmat[(pa.var, pb.var)] += gram[(a, b)];
                    }
                }
            }
            tilde.push(t);
        }
        let rd_t: Vec<DMatrix<f64>> = (0..nb).map(|k| scal[k].g.transpose() * &rd[k] * &scal[k].g).collect();

        let chol = match mmat.clone().cholesky() {
            Some(c) => c,
            None => {
                let reg = 1e-12 * (1.0 + mmat.diagonal().amax());
                let mut mr = mmat.clone();
                for i in 0..prob.m {
                    mr[(i, i)] += reg;
                }
                match mr.cholesky() {
                    Some(c) => c,
                    None => return finish_early(it, best, iter, meas, tol),
                }
            }
        };

        // one Newton solve for a given scaled complementarity target S
        let solve = |s: &[DMatrix<f64>]| -> (Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
            let mut rhs = DVector::from_vec(rp.clone());
            for k in 0..nb {
                let w = &rd_t[k] - &s[k];
                for (p, tm) in prob.blocks[k].iter().zip(&tilde[k]) {
                    rhs[p.var] += inner(tm, &w);
                }
            }
            let dy = chol.solve(&rhs);
            let mut dz_t = Vec::with_capacity(nb);
            let mut dx_t = Vec::with_capacity(nb);
            for k in 0..nb {
                let mut dz = rd_t[k].clone();
                for (p, tm) in prob.blocks[k].iter().zip(&tilde[k]) {
                    add_scaled(&mut dz, -dy[p.var], tm);
                }
                let dz = sym(&dz);
                dx_t.push(sym(&(&s[k] - &dz)));
                dz_t.push(dz);
            }
            (dy.iter().cloned().collect(), dx_t, dz_t)
        };
        let target = |sigma_mu: f64, corr: Option<(&[DMatrix<f64>], &[DMatrix<f64>])>| -> Vec<DMatrix<f64>> {
            (0..nb)
                .map(|k| {
                    let d = &scal[k].d;
                    let n = d.len();
                    let mut r = DMatrix::from_fn(n, n, |i, j| if i == j { sigma_mu - d[i] * d[i] } else { 0.0 });
                    if let Some((dx, dz)) = corr {
                        let prod = &dx[k] * &dz[k];
                        r -= (&prod + prod.transpose()) * 0.5;
                    }
                    DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (d[i] + d[j]))
                })
                .collect()
        };
        let steps = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nb {
                ap = ap.min(max_step(&scal[k].d, &dx[k]));
                ad = ad.min(max_step(&scal[k].d, &dz[k]));
            }
            (ap, ad)
        };

        // predictor
        let s_aff = target(0.0, None);
        let (_, dx_a, dz_a) = solve(&s_aff);
        let (ap, ad) = steps(&dx_a, &dz_a);
        let (ap1, ad1) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..nb {
            let d = &scal[k].d;
            let n = d.len();
            let xa = DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }) + &dx_a[k] * ap1;
            let za = DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }) + &dz_a[k] * ad1;
            mu_aff += inner(&xa, &za);
        }
        mu_aff /= ntot as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // corrector
        let s_c = target(sigma * mu, Some((&dx_a, &dz_a)));
        let (dy, dx_t, dz_t) = solve(&s_c);
        let (ap, ad) = steps(&dx_t, &dz_t);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        if keep {
            best = Some((Iterate { x: it.x.clone(), y: it.y.clone(), z: it.z.clone() }, meas));
        }
        let aty = prob.a_adj(&dy);
        for k in 0..nb {
            let g = &scal[k].g;
            let dx = g * &dx_t[k] * g.transpose();
            it.x[k] = sym(&(&it.x[k] + dx * ap));
            let dz = &rd[k] - &aty[k];
            it.z[k] = sym(&(&it.z[k] + dz * ad));
        }
        for (yi, d) in it.y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
    }
    let (meas, _, _) = measures(prob, &it, bnorm, cnorm);
    finish_early(it, best, tol.sdp_max_iterations, meas, tol)
}

/// Ran out of iterations or hit a numerical breakdown: return the best
/// iterate seen, flagged, or fail if it is far from converged.
#[allow(clippy::type_complexity)]
fn finish_early(
    it: Iterate,
    best: Option<(Iterate, Measures)>,
    iterations: usize,
    meas: Measures,
    tol: &Tolerances,
) -> Result<(Iterate, usize, SolveStatus, Measures)> {
    let (it, meas) = match best {
        Some((b, bm)) if bm.worst() < meas.worst() => (b, bm),
        _ => (it, meas),
    };
    if meas.worst() < tol.sdp * 10.0 {
        return Ok((it, iterations, SolveStatus::Optimal, meas));
    }
    if meas.worst() < tol.sdp.sqrt() {
        return Ok((it, iterations, SolveStatus::MaxIterations, meas));
    }
    Err(Error::NumericalFailure(format!(
        "interior point stalled after {iterations} iterations (gap {:.2e}, primal {:.2e}, dual {:.2e})",
        meas.relgap, meas.pinf, meas.dinf
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::{hermitian_eig, CMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Orthonormal Hermitian basis (w.r.t. Re tr(AB)) of n×n matrices.
    fn herm_basis(n: usize) -> Vec<DMatrix<Complex64>> {
        let mut out = Vec::new();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    let mut m = DMatrix::zeros(n, n);
                    m[(i, i)] = Complex64::new(1.0, 0.0);
                    out.push(m);
                } else {
                    let mut m = DMatrix::zeros(n, n);
                    m[(i, j)] = Complex64::new(s, 0.0);
                    m[(j, i)] = Complex64::new(s, 0.0);
                    out.push(m);
                    let mut m = DMatrix::zeros(n, n);
                    m[(i, j)] = Complex64::new(0.0, -s);
                    m[(j, i)] = Complex64::new(0.0, s);
                    out.push(m);
                }
            }
        }
        out
    }

    #[test]
    fn scalar_lmi() {
        // maximize t s.t. diag(1−t, 1−t) ⪰ 0
        let mut sdp = SemidefiniteProgram::new(vec![2], 1);
        sdp.set_constant(0, DMatrix::identity(2, 2));
        sdp.add_coefficient(0, 0, -DMatrix::identity(2, 2));
        sdp.objective[0] = 1.0;
        let r = solve_sdp(&sdp, &tol()).unwrap();
        assert!(r.is_optimal() && (r.value - 1.0).abs() < 1e-6, "{}", r.value);
        assert!(r.psd_violation >= -1e-6);
    }

    #[test]
    fn largest_eigenvalue_via_dual() {
        // min t s.t. tI − C ⪰ 0 equals λ_max(C) = max ⟨C,X⟩ over density matrices
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 5] {
            let c = random_hermitian(n, &mut rng);
            let mut sdp = SemidefiniteProgram::new(vec![2 * n], 1);
            sdp.set_constant(0, -embed_hermitian(&c));
            sdp.add_coefficient(0, 0, DMatrix::identity(2 * n, 2 * n));
            sdp.objective[0] = -1.0;
            let r = solve_sdp(&sdp, &tol()).unwrap();
            let lmax = hermitian_eig(&CMatrix::from(c)).unwrap().eigenvalues[0];
            assert!((-r.value - lmax).abs() < 1e-6 * (1.0 + lmax.abs()), "{} vs {lmax}", -r.value);
        }
    }

    #[test]
    fn two_outcome_measurement_matches_positive_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2, 3, 4] {
            let r0 = random_hermitian(n, &mut rng);
            let r1 = random_hermitian(n, &mut rng);
            let basis = herm_basis(n);
            let k = basis.len();
            // A = Σ t_k E_k; blocks emb(A) ⪰ 0 and emb(I − A) ⪰ 0
            let mut sdp = SemidefiniteProgram::new(vec![2 * n, 2 * n], k);
            sdp.set_constant(1, DMatrix::identity(2 * n, 2 * n));
            for (t, e) in basis.iter().enumerate() {
                let em = embed_hermitian(e);
                sdp.add_coefficient(t, 0, em.clone());
                sdp.add_coefficient(t, 1, -em);
                sdp.objective[t] = (e * (&r0 - &r1)).trace().re;
            }
            let r = solve_sdp(&sdp, &tol()).unwrap();
            let value = r.value + r1.trace().re;
            let diff = CMatrix::from(&r0 - &r1);
            let pos: f64 = hermitian_eig(&diff).unwrap().eigenvalues.iter().filter(|&&l| l > 0.0).sum();
            let oracle = pos + r1.trace().re;
            assert!((value - oracle).abs() < 1e-6 * (1.0 + oracle.abs()), "{value} vs {oracle}");
            assert!(r.psd_violation >= -10.0 * tol().sdp);
        }
    }

    #[test]
    fn equality_constraints_are_eliminated() {
        // maximize ⟨C, X⟩ over 2×2 real symmetric X ⪰ 0 with tr X = 1
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let mut sdp = SemidefiniteProgram::new(vec![2], 3);
        let e = [
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        ];
        for (i, m) in e.iter().enumerate() {
            sdp.add_coefficient(i, 0, m.clone());
            sdp.objective[i] = inner(&c, m);
        }
        sdp.add_equality(vec![1.0, 0.0, 1.0], 1.0);
        let r = solve_sdp(&sdp, &tol()).unwrap();
        let lmax = 5f64.sqrt();
        assert!((r.value - lmax).abs() < 1e-6, "{}", r.value);
        assert!((r.primal[0] + r.primal[2] - 1.0).abs() < 1e-9);
        // the dual certificate has the right number of entries
        assert_eq!(r.dual.len(), 4);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let mut sdp = SemidefiniteProgram::new(vec![1], 1);
        sdp.add_coefficient(0, 0, DMatrix::identity(1, 1));
        sdp.add_equality(vec![1.0], 1.0);
        sdp.add_equality(vec![1.0], 2.0);
        assert_eq!(solve_sdp(&sdp, &tol()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn embedding_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(3, &mut rng);
        let back = unembed_hermitian(&embed_hermitian(&h));
        assert!((&back - &h).iter().all(|z| z.norm() < 1e-15));
        let h2 = random_hermitian(3, &mut rng);
        let lhs = inner(&embed_hermitian(&h), &embed_hermitian(&h2));
        assert!((lhs - 2.0 * (&h * &h2).trace().re).abs() < 1e-12);
    }

    #[test]
    fn deterministic_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_hermitian(3, &mut rng);
        let mut sdp = SemidefiniteProgram::new(vec![6], 1);
        sdp.set_constant(0, -embed_hermitian(&c));
        sdp.add_coefficient(0, 0, DMatrix::identity(6, 6));
        sdp.objective[0] = -1.0;
        let a = solve_sdp(&sdp, &tol()).unwrap();
        let b = solve_sdp(&sdp, &tol()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
