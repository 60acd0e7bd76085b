//! Revised primal simplex on min cᵀx, Ax = b (b ≥ 0), x ≥ 0, with an
//! explicit dense basis inverse. Columns come from a [`ColumnSource`] so the
//! same engine drives explicit LPs and implicitly enumerated ones.

use nalgebra::DMatrix;

use super::SolveStatus;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Pricing {
    /// Most negative reduced cost.
    Dantzig,
    /// Lowest-index column with negative reduced cost (anti-cycling).
    Bland,
}

pub(crate) trait ColumnSource {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn rhs(&self) -> &[f64];
    fn column(&self, j: usize, out: &mut [f64]);
    fn cost(&self, j: usize) -> f64;

    /// Entering column and its reduced cost c_j·[phase 2] − yᵀa_j, or `None`
    /// when no column prices below `-tol`.
    fn price(&self, y: &[f64], phase2: bool, rule: Pricing, tol: f64, basic: &[bool]) -> Option<(usize, f64)> {
        let mut col = vec![0.0; self.rows()];
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols() {
            if basic[j] {
                continue;
            }
            self.column(j, &mut col);
            let c = if phase2 { self.cost(j) } else { 0.0 };
            let d = c - dot(y, &col);
            if d < -tol {
                match rule {
                    Pricing::Bland => return Some((j, d)),
                    Pricing::Dantzig => {
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some((j, d));
                        }
                    }
                }
            }
        }
        best
    }

    /// Some nonbasic column with |ρᵀa_j| > tol, used to pivot artificials out.
    fn find_in_row(&self, rho: &[f64], tol: f64, basic: &[bool]) -> Option<usize> {
        let mut col = vec![0.0; self.rows()];
        (0..self.cols()).find(|&j| {
            if basic[j] {
                return false;
            }
            self.column(j, &mut col);
            dot(rho, &col).abs() > tol
        })
    }

    /// Columns equal to unit vectors e_i usable as an initial basis.
    fn unit_columns(&self) -> Vec<Option<usize>> {
        vec![None; self.rows()]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct SimplexOutcome {
    pub status: SolveStatus,
    /// Values of all structural columns that are basic.
    pub basic_values: Vec<(usize, f64)>,
    /// Simplex multipliers y = B⁻ᵀc_B (phase 2 costs).
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Most negative reduced cost left at termination (≤ 0 means dual feasible).
    pub min_reduced_cost: f64,
}

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_LIMIT: usize = 40;

struct Engine<'a, S: ColumnSource> {
    src: &'a S,
    m: usize,
    n: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    col: Vec<f64>,
}

impl<'a, S: ColumnSource> Engine<'a, S> {
    fn column_of(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            self.src.column(j, out);
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j - self.n] = 1.0;
        }
    }

    fn cost_of(&self, j: usize, phase2: bool) -> f64 {
        match (j < self.n, phase2) {
            (true, true) => self.src.cost(j),
            (true, false) => 0.0,
            (false, true) => 0.0,
            (false, false) => 1.0,
        }
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = DMatrix::zeros(m, m);
        let mut col = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            self.column_of(j, &mut col);
            for r in 0..m {
                b[(r, i)] = col[r];
            }
        }
        match b.lu().try_inverse() {
            Some(inv) => {
                self.binv = inv;
                let rhs = self.src.rhs();
                for i in 0..m {
                    let v: f64 = (0..m).map(|k| self.binv[(i, k)] * rhs[k]).sum();
                    self.xb[i] = if v < 0.0 && v > -1e-9 { 0.0 } else { v };
                }
                true
            }
            None => false,
        }
    }

    fn duals(&self, phase2: bool) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost_of(j, phase2)).collect();
        (0..m).map(|k| (0..m).map(|i| cb[i] * self.binv[(i, k)]).sum()).collect()
    }

    fn objective(&self, phase2: bool) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, &x)| self.cost_of(j, phase2) * x).sum()
    }

    fn direction(&mut self, j: usize) -> Vec<f64> {
        let mut col = std::mem::take(&mut self.col);
        self.column_of(j, &mut col);
        let m = self.m;
        let u = (0..m).map(|i| (0..m).map(|k| self.binv[(i, k)] * col[k]).sum()).collect();
        self.col = col;
        u
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64], theta: f64) {
        let m = self.m;
        for i in 0..m {
            self.xb[i] -= theta * u[i];
            if self.xb[i] < 0.0 && self.xb[i] > -1e-11 {
                self.xb[i] = 0.0;
            }
        }
        self.xb[r] = theta;
        let ur = u[r];
        for k in 0..m {
            self.binv[(r, k)] /= ur;
        }
        for i in 0..m {
            if i != r && u[i] != 0.0 {
                let f = u[i];
                for k in 0..m {
                    let v = self.binv[(r, k)];
                    self.binv[(i, k)] -= f * v;
                }
            }
        }
        let old = self.basis[r];
        if old < self.n {
            self.is_basic[old] = false;
        }
        self.basis[r] = j;
        if j < self.n {
            self.is_basic[j] = true;
        }
    }

    /// Leaving row for entering direction u, or None if unbounded.
    fn ratio_test(&self, u: &[f64], phase2: bool, rule: Pricing) -> Option<(usize, f64)> {
        let scale = u.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let tol = PIVOT_TOL * scale;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let is_art = self.basis[i] >= self.n;
            let ratio = if phase2 && is_art && u[i].abs() > tol {
                // artificials stuck at zero must never move off zero
                0.0
            } else if u[i] > tol {
                self.xb[i].max(0.0) / u[i]
            } else {
                continue;
            };
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let better = if ratio < br - 1e-12 {
                        true
                    } else if ratio <= br + 1e-12 {
                        match rule {
                            Pricing::Dantzig => u[i].abs() > u[bi].abs(),
                            Pricing::Bland => self.basis[i] < self.basis[bi],
                        }
                    } else {
                        false
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best
    }
}

pub(crate) fn run<S: ColumnSource>(src: &S, tol: f64, max_iterations: usize) -> SimplexOutcome {
    let m = src.rows();
    let n = src.cols();
    let units = src.unit_columns();
    let mut basis = Vec::with_capacity(m);
    let mut is_basic = vec![false; n];
    for (i, u) in units.iter().enumerate() {
        match u {
            Some(j) => {
                basis.push(*j);
                is_basic[*j] = true;
            }
            None => basis.push(n + i),
        }
    }
    let mut eng = Engine {
        src,
        m,
        n,
        basis,
        is_basic,
        binv: DMatrix::identity(m, m),
        xb: src.rhs().to_vec(),
        col: vec![0.0; m],
    };
    let bscale = 1.0 + src.rhs().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut iterations = 0usize;
    let mut status = SolveStatus::Optimal;

    for phase2 in [false, true] {
        if !phase2 && eng.basis.iter().all(|&j| j < n) {
            continue;
        }
        let mut rule = Pricing::Dantzig;
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if iterations >= max_iterations {
                status = SolveStatus::MaxIterations;
                break;
            }
            if since_refactor >= REFACTOR_EVERY {
                if !eng.refactor() {
                    status = SolveStatus::MaxIterations;
                    break;
                }
                since_refactor = 0;
            }
            let y = eng.duals(phase2);
            let Some((j, _d)) = src.price(&y, phase2, rule, tol, &eng.is_basic) else {
                break;
            };
            let u = eng.direction(j);
            let Some((r, theta)) = eng.ratio_test(&u, phase2, rule) else {
                status = SolveStatus::Unbounded;
                break;
            };
            if theta * u.iter().fold(0.0f64, |s, v| s.max(v.abs())) < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    rule = Pricing::Bland;
                }
            } else {
                degenerate = 0;
                rule = Pricing::Dantzig;
            }
            eng.pivot(r, j, &u, theta);
            iterations += 1;
            since_refactor += 1;
        }
        eng.refactor();
        if status != SolveStatus::Optimal {
            break;
        }
        if !phase2 {
            if eng.objective(false) > 1e-8 * bscale {
                status = SolveStatus::Infeasible;
                break;
            }
            // pivot zero-level artificials out where a structural column can replace them
            for r in 0..m {
                if eng.basis[r] < n {
                    continue;
                }
                let rho: Vec<f64> = (0..m).map(|k| eng.binv[(r, k)]).collect();
                if let Some(j) = src.find_in_row(&rho, 1e-7, &eng.is_basic) {
                    let u = eng.direction(j);
                    eng.pivot(r, j, &u, 0.0);
                }
            }
            eng.refactor();
        }
    }

    let duals = eng.duals(true);
    let min_reduced_cost = src
        .price(&duals, true, Pricing::Dantzig, f64::NEG_INFINITY, &eng.is_basic)
        .map_or(0.0, |(_, d)| d.min(0.0));
    let basic_values = eng.basis.iter().zip(&eng.xb).filter(|(&j, _)| j < n).map(|(&j, &x)| (j, x)).collect();
    SimplexOutcome {
        status,
        basic_values,
        duals,
        objective: eng.objective(true),
        iterations,
        min_reduced_cost,
    }
}
