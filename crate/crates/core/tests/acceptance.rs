//! Acceptance criteria, one verdict line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bellhd_core::binarise::{binarise_behavior, binarised_noise_tolerance, binarised_witness, multi_outcome_tolerance};
use bellhd_core::convex::{solve_lp, solve_sdp, LinearProgram, SemidefiniteProgram, SolveStatus, Tolerances};
use bellhd_core::dimbound::{dim_bound, DimBoundConfig};
use bellhd_core::functionals::{critical_visibility, optimal_behavior};
use bellhd_core::lhv::{lhv_bound, lhv_bound_raw, locality_lp};
use bellhd_core::model::{dominant_vector, mix_behaviors, schmidt_coefficients};
use bellhd_core::seesaw::{seesaw, SeesawConfig};
use bellhd_core::stats::{behavior_from_counts, chernoff_min_counts, load_counts, poisson_mc_error};
use bellhd_core::{evaluate, Behavior, Family, Scenario};

/// One checked quantity inside a criterion.
struct Item {
    label: String,
    ok: bool,
    detail: String,
}

#[derive(Default)]
struct Checks(Vec<Item>);

impl Checks {
    fn abs(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.0.push(Item { label: label.into(), ok, detail: format!("{got:.6} vs {want} ± {tol:e}") });
    }

    fn rel(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = ((got - want) / want).abs() <= tol;
        self.0.push(Item { label: label.into(), ok, detail: format!("{got:.1} vs {want} ± {}%", tol * 100.0) });
    }

    fn within(&mut self, label: &str, got: f64, lo: f64, hi: f64) {
        self.0.push(Item { label: label.into(), ok: got >= lo && got <= hi, detail: format!("{got:.6} in [{lo}, {hi}]") });
    }

    fn truth(&mut self, label: &str, ok: bool, detail: String) {
        self.0.push(Item { label: label.into(), ok, detail });
    }
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn cfg(dim: usize, restarts: usize) -> SeesawConfig {
    SeesawConfig { dim, restarts, seed: 7, ..SeesawConfig::default() }
}

/// Dimension bounds shared by criteria 2, 5 and 11.
struct Ladder {
    /// (family, D, seesaw value, dim_bound value)
    rows: Vec<(Family, usize, f64, f64)>,
    seconds: f64,
}

impl Ladder {
    fn compute() -> Ladder {
        let start = Instant::now();
        let mut rows = Vec::new();
        for fam in [Family::Cglmp, Family::Satwap] {
            let f = fam.functional(4);
            for dim in 2..=4 {
                let upper = dim_bound(&f, dim, &DimBoundConfig::default()).expect("dimension bound").value;
                let lower = seesaw(&f, &cfg(dim, 50)).expect("see-saw").value;
                rows.push((fam, dim, lower, upper));
            }
        }
        Ladder { rows, seconds: start.elapsed().as_secs_f64() }
    }

    fn bound(&self, fam: Family, dim: usize) -> f64 {
        self.rows.iter().find(|r| r.0 == fam && r.1 == dim).expect("row").3
    }
}

fn c1(c: &mut Checks) {
    let start = Instant::now();
    let r = seesaw(&Family::Cglmp.functional(4), &cfg(4, 50)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.abs("seesaw I4 D=4", r.value, 0.365, 1e-3);
    c.truth("50 restarts under 30 s", secs < 30.0, format!("{secs:.1} s"));
}

fn c2(c: &mut Checks, ladder: &Ladder) {
    for (fam, want) in [(Family::Cglmp, [0.207, 0.305, 0.365]), (Family::Satwap, [0.152, 0.212, 0.302])] {
        for (dim, w) in (2..=4).zip(want) {
            c.abs(&format!("{} D={dim}", fam.name()), ladder.bound(fam, dim), w, 5e-3);
        }
    }
    c.truth("ladder under 20 min", ladder.seconds < 1200.0, format!("{:.0} s (bounds and see-saws)", ladder.seconds));
}

fn c3(c: &mut Checks) {
    let f = Family::Satwap.functional(4);
    c.abs("seesaw S4 D=4", seesaw(&f, &cfg(4, 50)).unwrap().value, 0.3019, 1e-3);
    c.abs("S4 local constant", lhv_bound_raw(&f).unwrap().value, 1.798, 2e-4);
}

fn c4(c: &mut Checks) {
    let r = seesaw(&Family::Cglmp.functional(4), &cfg(4, 50)).unwrap();
    let mut got = schmidt_coefficients(&dominant_vector(&r.model.state).unwrap(), 4);
    let mut want = vec![0.5686, 0.4204, 0.4204, 0.5686];
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        c.abs(&format!("Schmidt coefficient {i}"), *g, *w, 2e-3);
    }
}

fn c5(c: &mut Checks, ladder: &Ladder) {
    let f = Family::Cglmp.functional(4);
    let p = optimal_behavior(Family::Cglmp, 4).unwrap();
    let u = Behavior::uniform(f.scenario);
    c.abs("I4 v_crit (local)", critical_visibility(&f, &p, &u, 0.0).unwrap(), 0.673, 1e-3);
    c.abs("I4 v_crit (D=3)", critical_visibility(&f, &p, &u, ladder.bound(Family::Cglmp, 3)).unwrap(), 0.946, 1e-3);
    // Reported only: the published S4 figure is an open question.
    let s = Family::Satwap.functional(4);
    let ps = optimal_behavior(Family::Satwap, 4).unwrap();
    let local = critical_visibility(&s, &ps, &u, 0.0).unwrap();
    let d3 = critical_visibility(&s, &ps, &u, ladder.bound(Family::Satwap, 3)).unwrap();
    c.truth("S4 v_crit computed (flagged)", local.is_finite() && d3.is_finite(), format!("local {local:.4}, D=3 {d3:.4}; published 0.691 is an open question"));
}

fn c6(c: &mut Checks) {
    let start = Instant::now();
    let table = [(Family::Cglmp, -0.186, [-0.2129, -0.2575, -0.2575]), (Family::Satwap, -0.200, [-0.2094, -0.2532, -0.2532])];
    for (fam, ideal, rows) in table {
        let w = binarised_witness(&optimal_behavior(fam, 4).unwrap(), &Tolerances::default()).unwrap();
        c.abs(&format!("{} binarised witness", fam.name()), w.value_on_target, ideal, 2e-3);
        for (dim, want) in (2..=4).zip(rows) {
            let cfg = SeesawConfig { minimize: true, ..cfg(dim, 200) };
            let v = seesaw(&w.functional, &cfg).unwrap().value;
            c.abs(&format!("{} Table I D={dim}", fam.name()), v, want, 5e-3);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    c.truth("under 10 min", secs < 600.0, format!("{secs:.1} s"));
}

fn c7(c: &mut Checks) {
    let p4 = behavior_from_counts(&load_counts(data("table4.csv")).unwrap()).unwrap();
    let p5 = behavior_from_counts(&load_counts(data("table5.csv")).unwrap()).unwrap();
    c.abs("Table IV I4", evaluate(&Family::Cglmp.functional(4), &p4).unwrap(), 0.3346, 2e-3);
    c.abs("Table V S4", evaluate(&Family::Satwap.functional(4), &p5).unwrap(), 0.2832, 2e-3);
}

fn c8(c: &mut Checks) {
    for (file, fam, lo, hi) in [("table4.csv", Family::Cglmp, 0.0015, 0.0045), ("table5.csv", Family::Satwap, 0.0014, 0.0041)] {
        let t = load_counts(data(file)).unwrap();
        let start = Instant::now();
        let s = poisson_mc_error(&t, &fam.functional(4), 10_000, 1).unwrap();
        let secs = start.elapsed().as_secs_f64();
        c.within(&format!("sigma {}", fam.name()), s, lo, hi);
        c.truth(&format!("10k trials {} under 30 s", fam.name()), secs < 30.0, format!("{secs:.2} s"));
    }
}

fn c9(c: &mut Checks) {
    c.rel("I4 N_min p=1e-30", chernoff_min_counts(0.8356, 0.8356 + 0.0813, 1e-30).unwrap(), 2420.0, 0.02);
    c.rel("I4 N_min p=1e-300", chernoff_min_counts(0.8356, 0.8356 + 0.0813, 1e-300).unwrap(), 24000.0, 0.05);
    c.rel("S4 N_min p=1e-300", chernoff_min_counts(0.9571, 0.9571 + 0.0342, 1e-300).unwrap(), 33000.0, 0.02);
}

fn c10(c: &mut Checks) {
    let tol = Tolerances::default();
    for fam in [Family::Cglmp, Family::Satwap] {
        let multi: Vec<f64> = (2..=4).map(|d| multi_outcome_tolerance(fam, d).unwrap()).collect();
        let bin: Vec<f64> = (2..=4).map(|d| binarised_noise_tolerance(fam, d, &tol).unwrap().v_crit).collect();
        let show = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
        c.truth(&format!("{} multi-outcome decreasing", fam.name()), multi.windows(2).all(|w| w[1] < w[0]), show(&multi));
        c.truth(&format!("{} binarised increasing", fam.name()), bin.windows(2).all(|w| w[1] > w[0]), show(&bin));
        c.abs(&format!("{} coincide at d=2", fam.name()), multi[0] - bin[0], 0.0, 2e-3);
    }
}

fn c11(c: &mut Checks, ladder: &Ladder) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tol = Tolerances::default();

    // Duality gaps on random bounded LPs and eigenvalue SDPs.
    let mut worst_lp = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..6);
        let mut lp = LinearProgram::maximize((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).nonnegative();
        for _ in 0..rng.gen_range(1..5) {
            lp = lp.le((0..n).map(|_| rng.gen_range(0.1..1.0)).collect(), rng.gen_range(0.5..2.0));
        }
        let r = solve_lp(&lp, &tol).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        worst_lp = worst_lp.max(r.gap.abs());
    }
    let mut worst_sdp = 0.0f64;
    for _ in 0..10 {
        let n = rng.gen_range(2..5);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let sym = (&m + m.transpose()) * 0.5;
        // min t s.t. tI − C ⪰ 0
        let mut sdp = SemidefiniteProgram::new(vec![n], 1);
        sdp.set_constant(0, -sym.clone());
        sdp.add_coefficient(0, 0, DMatrix::identity(n, n));
        sdp.objective[0] = -1.0;
        let r = solve_sdp(&sdp, &tol).unwrap();
        let lmax = sym.symmetric_eigenvalues().max();
        assert!((-r.value - lmax).abs() < 1e-5, "{} vs {lmax}", -r.value);
        worst_sdp = worst_sdp.max(r.gap.abs());
    }
    c.truth("LP duality gaps", worst_lp <= 1e-7, format!("max {worst_lp:.1e}"));
    c.truth("SDP duality gaps", worst_sdp <= 1e-5, format!("max {worst_sdp:.1e}"));

    // See-saw trajectories never decrease.
    let r = seesaw(&Family::Satwap.functional(3), &cfg(3, 10)).unwrap();
    let drops = r
        .restarts
        .iter()
        .flatten()
        .flat_map(|o| o.trajectory.windows(2).map(|w| w[0] - w[1]).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    c.truth("see-saw monotone", drops <= 1e-9, format!("largest drop {drops:.1e}"));

    // Lower and upper bounds sandwich.
    let worst = ladder.rows.iter().map(|r| r.2 - r.3).fold(f64::NEG_INFINITY, f64::max);
    c.truth("seesaw ≤ dim_bound + 1e-4", worst <= 1e-4, format!("max excess {worst:.1e} over {} pairs", ladder.rows.len()));

    // Local mixtures: LP certifies locality and never beats enumeration.
    let s = Scenario::multi(3);
    let f = Family::Cglmp.functional(3);
    let bound = lhv_bound(&f).unwrap();
    let mut failures = 0;
    for _ in 0..100 {
        let k = rng.gen_range(1..6);
        let mut w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let mut p = vec![0.0; s.len()];
        for wi in &w {
            let sa: Vec<usize> = (0..2).map(|_| rng.gen_range(0..3)).collect();
            let sb: Vec<usize> = (0..2).map(|_| rng.gen_range(0..3)).collect();
            let d = Behavior::deterministic(s, &sa, &sb).unwrap();
            p.iter_mut().zip(d.as_slice()).for_each(|(q, v)| *q += wi * v);
        }
        let p = Behavior::new(s, p).unwrap();
        let rep = locality_lp(&p).unwrap();
        if !rep.is_local || evaluate(&f, &p).unwrap() > bound + 1e-9 {
            failures += 1;
        }
    }
    c.truth("100 random local behaviors", failures == 0, format!("{failures} disagreements"));

    // Binarisation is affine and keeps the full-click cell.
    let p = optimal_behavior(Family::Cglmp, 3).unwrap();
    let u = Behavior::uniform(p.scenario);
    let mut worst = 0.0f64;
    for v in [0.0, 0.3, 0.77, 1.0] {
        let lhs = binarise_behavior(&mix_behaviors(&p, &u, v).unwrap()).unwrap();
        let (bp, bu) = (binarise_behavior(&p).unwrap(), binarise_behavior(&u).unwrap());
        for ((l, a), b) in lhs.behavior().as_slice().iter().zip(bp.behavior().as_slice()).zip(bu.behavior().as_slice()) {
            worst = worst.max((l - (v * a + (1.0 - v) * b)).abs());
        }
    }
    let bp = binarise_behavior(&p).unwrap();
    let mut round = 0.0f64;
    for (x, y, a, b) in (0..2).flat_map(|x| (0..2).flat_map(move |y| (0..3).flat_map(move |a| (0..3).map(move |b| (x, y, a, b))))) {
        round = round.max((bp.get(0, 0, a, x, b, y) - p.get(a, b, x, y)).abs());
    }
    c.truth("binarisation affine and round-trips", worst < 1e-12 && round < 1e-12, format!("affinity {worst:.1e}, round trip {round:.1e}"));
}

fn run(n: u8, title: &str, f: impl FnOnce(&mut Checks)) -> bool {
    let start = Instant::now();
    let mut checks = Checks::default();
    let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut checks)));
    let panicked = outcome.is_err();
    let ok = !panicked && checks.0.iter().all(|i| i.ok);
    println!("criterion {n:>2} {:<4} {title} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    for i in &checks.0 {
        println!("    [{}] {}: {}", if i.ok { "ok" } else { "!!" }, i.label, i.detail);
    }
    if panicked {
        println!("    [!!] panicked before finishing");
    }
    ok
}

fn main() {
    // `cargo test -- --list` and filtered runs still expect a harness-like CLI.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let ladder = Ladder::compute();
    let results = [
        run(1, "CGLMP optimum", c1),
        run(2, "dimension ladder", |c| c2(c, &ladder)),
        run(3, "SATWAP optimum and local constant", c3),
        run(4, "optimal state recovery", c4),
        run(5, "visibilities", |c| c5(c, &ladder)),
        run(6, "binarisation and Table I", c6),
        run(7, "experimental golden numbers", c7),
        run(8, "Monte-Carlo errors", c8),
        run(9, "Chernoff counts", c9),
        run(10, "noise-tolerance trends", c10),
        run(11, "property suites", |c| c11(c, &ladder)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

