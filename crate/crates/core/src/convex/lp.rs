use serde::{Deserialize, Serialize};

use super::simplex::{self, ColumnSource};
use super::{SolveReport, SolveStatus, Tolerances};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptSense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

/// Variables are free unless bounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl VarBounds {
    pub const FREE: VarBounds = VarBounds { lower: None, upper: None };
    pub const NONNEG: VarBounds = VarBounds { lower: Some(0.0), upper: None };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: OptSense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBounds>,
}

impl LinearProgram {
    pub fn new(sense: OptSense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), bounds: vec![VarBounds::FREE; n] }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(OptSense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(OptSense::Minimize, objective)
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, sense: ConstraintSense, rhs: f64) -> Self {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self
    }

    pub fn le(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.constraint(coeffs, ConstraintSense::Le, rhs)
    }

    pub fn ge(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.constraint(coeffs, ConstraintSense::Ge, rhs)
    }

    pub fn eq(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.constraint(coeffs, ConstraintSense::Eq, rhs)
    }

    pub fn nonnegative(mut self) -> Self {
        self.bounds.iter_mut().for_each(|b| *b = VarBounds::NONNEG);
        self
    }

    pub fn bound(mut self, j: usize, bounds: VarBounds) -> Self {
        self.bounds[j] = bounds;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch(format!("constraint {i} has {} coefficients", c.coeffs.len())));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure(format!("constraint {i} has non-finite data")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("objective has non-finite entries".into()));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l > u {
                    return Err(Error::DimensionMismatch(format!("variable {j} has lower bound above upper bound")));
                }
            }
        }
        Ok(())
    }
}

/// How an original variable is expressed through standard-form columns:
/// x = shift + Σ sign·column.
#[derive(Clone, Debug)]
struct VarMap {
    shift: f64,
    parts: Vec<(usize, f64)>,
}

/// Dense column-major standard form.
struct StandardForm {
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    const_term: f64,
    row_sign: Vec<f64>,
    vars: Vec<VarMap>,
    units: Vec<Option<usize>>,
}

impl ColumnSource for StandardForm {
    fn rows(&self) -> usize {
        self.m
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn rhs(&self) -> &[f64] {
        &self.b
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.a[j * self.m..(j + 1) * self.m]);
    }
    fn cost(&self, j: usize) -> f64 {
        self.c[j]
    }
    fn unit_columns(&self) -> Vec<Option<usize>> {
        self.units.clone()
    }
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let obj_sign = match lp.sense {
        OptSense::Minimize => 1.0,
        OptSense::Maximize => -1.0,
    };
    // variable substitution
    let mut vars = Vec::with_capacity(lp.num_vars());
    let mut ncols = 0usize;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new(); // (column, upper − lower)
    for b in &lp.bounds {
        let vm = match (b.lower, b.upper) {
            (Some(l), None) => {
                ncols += 1;
                VarMap { shift: l, parts: vec![(ncols - 1, 1.0)] }
            }
            (Some(l), Some(u)) => {
                ncols += 1;
                extra_rows.push((ncols - 1, u - l));
                VarMap { shift: l, parts: vec![(ncols - 1, 1.0)] }
            }
            (None, Some(u)) => {
                ncols += 1;
                VarMap { shift: u, parts: vec![(ncols - 1, -1.0)] }
            }
            (None, None) => {
                ncols += 2;
                VarMap { shift: 0.0, parts: vec![(ncols - 2, 1.0), (ncols - 1, -1.0)] }
            }
        };
        vars.push(vm);
    }
    let structural = ncols;
    let m = lp.constraints.len() + extra_rows.len();
    // rows: (dense coefficients over structural columns, slack sign, rhs)
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(m);
    for con in &lp.constraints {
        let mut r = vec![0.0; structural];
        let mut rhs = con.rhs;
        for (j, &a) in con.coeffs.iter().enumerate() {
            rhs -= a * vars[j].shift;
            for &(col, s) in &vars[j].parts {
                r[col] += a * s;
            }
        }
        let slack = match con.sense {
            ConstraintSense::Le => 1.0,
            ConstraintSense::Ge => -1.0,
            ConstraintSense::Eq => 0.0,
        };
        rows.push((r, slack, rhs));
    }
    for &(col, width) in &extra_rows {
        let mut r = vec![0.0; structural];
        r[col] = 1.0;
        rows.push((r, 1.0, width));
    }
    let nslack = rows.iter().filter(|r| r.1 != 0.0).count();
    let n = structural + nslack;
    let mut a = vec![0.0; n * m];
    let mut b = vec![0.0; m];
    let mut row_sign = vec![1.0; m];
    let mut units = vec![None; m];
    let mut next_slack = structural;
    for (i, (r, slack, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[i] = sign;
        b[i] = sign * rhs;
        for j in 0..structural {
            a[j * m + i] = sign * r[j];
        }
        if *slack != 0.0 {
            a[next_slack * m + i] = sign * slack;
            if sign * slack > 0.0 {
                units[i] = Some(next_slack);
            }
            next_slack += 1;
        }
    }
    let mut c = vec![0.0; n];
    let mut const_term = 0.0;
    for (j, vm) in vars.iter().enumerate() {
        let oj = obj_sign * lp.objective[j];
        const_term += oj * vm.shift;
        for &(col, s) in &vm.parts {
            c[col] += oj * s;
        }
    }
    StandardForm { m, n, a, b, c, const_term, row_sign, vars, units }
}

pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<SolveReport> {
    lp.validate()?;
    let sf = standard_form(lp);
    let out = simplex::run(&sf, tol.lp, tol.lp_max_iterations);
    let obj_sign = match lp.sense {
        OptSense::Minimize => 1.0,
        OptSense::Maximize => -1.0,
    };
    let mut xs = vec![0.0; sf.n];
    for &(j, v) in &out.basic_values {
        xs[j] = v;
    }
    let x: Vec<f64> = sf
        .vars
        .iter()
        .map(|vm| vm.shift + vm.parts.iter().map(|&(c, s)| s * xs[c]).sum::<f64>())
        .collect();
    let value = match out.status {
        SolveStatus::Optimal | SolveStatus::MaxIterations => obj_sign * (out.objective + sf.const_term),
        SolveStatus::Unbounded => obj_sign * f64::NEG_INFINITY,
        SolveStatus::Infeasible => f64::NAN,
    };
    let dual: Vec<f64> = (0..lp.constraints.len()).map(|i| obj_sign * sf.row_sign[i] * out.duals[i]).collect();

    // residuals measured on the original problem
    let mut primal_residual = 0.0f64;
    for con in &lp.constraints {
        let lhs: f64 = con.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let viol = match con.sense {
            ConstraintSense::Le => (lhs - con.rhs).max(0.0),
            ConstraintSense::Ge => (con.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - con.rhs).abs(),
        };
        primal_residual = primal_residual.max(viol);
    }
    for (v, b) in x.iter().zip(&lp.bounds) {
        if let Some(l) = b.lower {
            primal_residual = primal_residual.max(l - v);
        }
        if let Some(u) = b.upper {
            primal_residual = primal_residual.max(v - u);
        }
    }
    let dual_obj: f64 = out.duals.iter().zip(&sf.b).map(|(y, b)| y * b).sum();
    let primal_obj: f64 = xs.iter().zip(&sf.c).map(|(x, c)| x * c).sum();
    let gap = if out.status == SolveStatus::Optimal { (primal_obj - dual_obj).abs() } else { f64::NAN };
    let mut status = out.status;
    if status == SolveStatus::Optimal {
        let scale = 1.0 + value.abs();
        if primal_residual > 1e3 * tol.lp * scale || -out.min_reduced_cost > 1e3 * tol.lp * scale {
            return Err(Error::NumericalFailure(format!(
                "simplex terminated with primal residual {primal_residual:.2e}, dual residual {:.2e}",
                -out.min_reduced_cost
            )));
        }
    }
    if status == SolveStatus::MaxIterations && out.iterations < tol.lp_max_iterations {
        status = SolveStatus::MaxIterations;
    }
    Ok(SolveReport {
        status,
        value,
        primal: x,
        dual,
        primal_residual,
        dual_residual: -out.min_reduced_cost,
        gap,
        psd_violation: 0.0,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn trivial_cases() {
        let lp = LinearProgram::maximize(vec![1.0]).le(vec![1.0], 3.0);
        let r = solve_lp(&lp, &tol()).unwrap();
        assert!(r.is_optimal() && (r.value - 3.0).abs() < 1e-12);
        let lp = LinearProgram::maximize(vec![1.0, 1.0]).le(vec![1.0, 1.0], 1.0).nonnegative();
        let r = solve_lp(&lp, &tol()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12 && (r.dual[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0]).le(vec![1.0], 1.0).ge(vec![1.0], 2.0);
        assert_eq!(solve_lp(&lp, &tol()).unwrap().status, SolveStatus::Infeasible);
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).le(vec![0.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp, &tol()).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn equalities_and_bounds() {
        // min x + 2y, x + y = 3, 0 ≤ x ≤ 2, y free → x=2, y=1
        let lp = LinearProgram::minimize(vec![1.0, 2.0])
            .eq(vec![1.0, 1.0], 3.0)
            .bound(0, VarBounds { lower: Some(0.0), upper: Some(2.0) });
        let r = solve_lp(&lp, &tol()).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        assert!((r.primal[0] - 2.0).abs() < 1e-12 && (r.primal[1] - 1.0).abs() < 1e-12);
        // negative right-hand sides and ≥ rows
        let lp = LinearProgram::minimize(vec![1.0, 1.0]).ge(vec![1.0, 2.0], -4.0).ge(vec![-1.0, 1.0], -1.0).nonnegative();
        assert!(solve_lp(&lp, &tol()).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0])
            .eq(vec![1.0, 1.0], 1.0)
            .eq(vec![2.0, 2.0], 2.0)
            .nonnegative();
        let r = solve_lp(&lp, &tol()).unwrap();
        assert!(r.is_optimal() && (r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under textbook Dantzig pricing.
        let lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0)
            .nonnegative();
        let r = solve_lp(&lp, &tol()).unwrap();
        assert!(r.is_optimal() && (r.value + 0.05).abs() < 1e-9, "{}", r.value);
    }

    /// Best vertex of {x ≥ 0, Ax ≤ b} by enumerating every choice of n
    /// active constraints.
    pub(crate) fn brute_force(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
        let n = c.len();
        let mut planes: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            planes.push((e, 0.0));
        }
        let k = planes.len();
        let mut best = f64::NEG_INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| planes[idx[i]].0[j]);
            let rhs = nalgebra::DVector::from_fn(n, |i, _| planes[idx[i]].1);
            if let Some(x) = mat.clone().lu().solve(&rhs) {
                if (&mat * &x - &rhs).amax() < 1e-9 {
                    let feasible = planes.iter().all(|(p, q)| p.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>() <= q + 1e-9);
                    if feasible {
                        best = best.max(c.iter().zip(x.iter()).map(|(u, v)| u * v).sum());
                    }
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for t in i + 1..n {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=7);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect()).collect();
            // a box keeps every instance bounded
            a.push(vec![1.0; n]);
            let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
            b.push(5.0);
            let mut lp = LinearProgram::maximize(c.clone()).nonnegative();
            for (row, &rhs) in a.iter().zip(&b) {
                lp = lp.le(row.clone(), rhs);
            }
            let r = solve_lp(&lp, &tol()).unwrap();
            let bf = brute_force(&c, &a, &b);
            assert!(r.is_optimal());
            assert!((r.value - bf).abs() < 1e-7, "{} vs {}", r.value, bf);
            // weak duality: Σ y_i b_i ≥ primal for a max problem with y ≥ 0
            let dual_value: f64 = r.dual.iter().zip(&b).map(|(y, b)| y * b).sum();
            assert!(r.dual.iter().all(|&y| y >= -1e-9));
            assert!(dual_value >= r.value - 1e-9);
            assert!(r.gap <= 1e-9 * (1.0 + r.value.abs()));
            assert!(r.primal_residual <= 1e-9);
        }
    }

    #[test]
    fn deterministic_reports() {
        let lp = LinearProgram::maximize(vec![3.0, 2.0, 1.0]).le(vec![1.0, 1.0, 1.0], 4.0).le(vec![1.0, 0.0, 2.0], 3.0).nonnegative();
        let r1 = solve_lp(&lp, &tol()).unwrap();
        let r2 = solve_lp(&lp, &tol()).unwrap();
        assert_eq!(r1.value.to_bits(), r2.value.to_bits());
        assert_eq!(r1.primal, r2.primal);
    }
}
