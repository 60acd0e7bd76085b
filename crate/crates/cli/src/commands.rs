use anyhow::{bail, Context, Result};
use serde_json::json;
use std::path::Path;

use bellhd_core::binarise::{binarise_averaged, binarise_behavior, binarised_noise_tolerance, binarised_witness_suite, multi_outcome_tolerance};
use bellhd_core::dimbound::{dim_bound, DimBoundConfig, Level, RankProfile};
use bellhd_core::functionals::{optimal_behavior, optimal_model, NormalizationMode};
use bellhd_core::lhv::{lhv_bound_raw, locality_lp_with, NoiseModel};
use bellhd_core::model::{dominant_vector, schmidt_coefficients};
use bellhd_core::seesaw::{seesaw as run_seesaw, MeasurementSolver, SeesawConfig};
use bellhd_core::stats::{behavior_from_counts, family_visibility, load_counts, measurement_fidelity, stats_report, McConfig, StatsTarget};
use bellhd_core::{evaluate, Behavior, BellFunctional, Family};

use crate::output::{json as emit_json, opt, sig6, Format, Table};
use crate::{CurveMode, Ctx, FunctionalArgs, LevelArg, ModeArg, NoiseArg, SolverArg};

/// Largest d accepted where runtime grows quickly with d.
const MAX_D: usize = 6;

pub fn functional(fa: &FunctionalArgs) -> Result<BellFunctional> {
    if let Some(path) = &fa.functional {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing functional {}", path.display()));
    }
    check_d(fa.d, 12)?;
    Ok(fa.family.functional(fa.d))
}

fn check_d(d: usize, max: usize) -> Result<()> {
    if !(2..=max).contains(&d) {
        bail!("d = {d} outside 2..={max}");
    }
    Ok(())
}

/// `uniform`, `optimal`, a count CSV (with sidecar) or a behavior JSON.
pub fn load_behavior(src: &str, fa: &FunctionalArgs, f: &BellFunctional) -> Result<Behavior> {
    let p = match src {
        "uniform" => Behavior::uniform(f.scenario),
        "optimal" => {
            if fa.functional.is_some() {
                bail!("'optimal' needs --family/--d, not a functional file");
            }
            optimal_behavior(fa.family, fa.d)?
        }
        path if path.ends_with(".csv") => behavior_from_counts(&load_counts(path)?)?,
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            serde_json::from_str(&text).with_context(|| format!("parsing behavior {path}"))?
        }
    };
    Ok(p)
}

fn level(l: LevelArg) -> Level {
    match l {
        LevelArg::One => Level::One,
        LevelArg::OneAb => Level::OneAb,
        LevelArg::OneAbAa => Level::OneAbAa,
    }
}

pub fn dimbound_config(ctx: &Ctx, l: Level) -> DimBoundConfig {
    DimBoundConfig {
        level: l,
        seed: ctx.cfg.seed,
        sdp_tolerance: ctx.cfg.tol.sdp,
        sdp_max_iterations: ctx.cfg.tol.sdp_max_iterations,
        ..DimBoundConfig::default()
    }
}

pub fn seesaw_config(ctx: &Ctx, dim: usize, restarts: Option<usize>) -> SeesawConfig {
    SeesawConfig { dim, restarts: restarts.unwrap_or(ctx.cfg.restarts), seed: ctx.cfg.seed, ..SeesawConfig::default() }
}

pub fn profile_string(p: &RankProfile) -> String {
    let side = |v: &Vec<Vec<u8>>| v.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<String>()).collect::<Vec<_>>().join("|");
    format!("A:{} B:{}", side(&p.alice), side(&p.bob))
}

pub fn eval(ctx: &Ctx, fa: &FunctionalArgs, src: &str) -> Result<()> {
    let f = functional(fa)?;
    let p = load_behavior(src, fa, &f)?;
    let v = evaluate(&f, &p)?;
    match ctx.format {
        Format::Json => emit_json(&json!({ "functional": f.name, "behavior": src, "value": v }))?,
        Format::Csv => print!("functional,behavior,value\n{},{},{}\n", f.name, src, sig6(v)),
        Format::Text => println!("{} on {}: {}", f.name, src, sig6(v)),
    }
    Ok(())
}

pub fn bounds(ctx: &Ctx, fa: &FunctionalArgs, dims: &[usize], restarts: Option<usize>, l: LevelArg) -> Result<()> {
    let f = functional(fa)?;
    let mut rows = Vec::new();
    for &dim in dims {
        if dim == 0 {
            bail!("local dimension must be positive");
        }
        if dim == 1 {
            let v = lhv_bound_raw(&f)?.value + f.offset;
            rows.push(json!({ "dim": 1, "seesaw": v, "dim_bound": v, "partial": false }));
            continue;
        }
        let lower = run_seesaw(&f, &seesaw_config(ctx, dim, restarts))?;
        let upper = dim_bound(&f, dim, &dimbound_config(ctx, level(l)))?;
        rows.push(json!({
            "dim": dim,
            "seesaw": lower.value,
            "dim_bound": upper.value,
            "partial": upper.partial,
            "best_profile": profile_string(&upper.best_profile),
        }));
    }
    if ctx.format == Format::Json {
        return emit_json(&json!({ "functional": f.name, "rows": rows }));
    }
    let mut t = Table::new(&["D", "seesaw", "dim_bound", "flag"]);
    for r in &rows {
        t.push(vec![
            r["dim"].to_string(),
            sig6(r["seesaw"].as_f64().unwrap_or(f64::NAN)),
            sig6(r["dim_bound"].as_f64().unwrap_or(f64::NAN)),
            if r["partial"].as_bool() == Some(true) { "partial".into() } else { String::new() },
        ]);
    }
    print!("{}", t.render(ctx.format));
    Ok(())
}

pub fn lhv(ctx: &Ctx, fa: &FunctionalArgs) -> Result<()> {
    let f = functional(fa)?;
    let b = lhv_bound_raw(&f)?;
    let out = json!({
        "functional": f.name,
        "raw_max": b.value,
        "bound": b.value + f.offset,
        "maximizers": b.maximizers.to_string(),
        "argmax": { "a": b.argmax.a, "b": b.argmax.b },
        "published_constant": f.published_lhv_constant,
    });
    match ctx.format {
        Format::Json => emit_json(&out)?,
        Format::Csv => print!(
            "functional,raw_max,bound,maximizers\n{},{},{},{}\n",
            f.name,
            sig6(b.value),
            sig6(b.value + f.offset),
            b.maximizers
        ),
        Format::Text => {
            println!("{}: local bound {} (raw maximum {}, {} maximising strategies)", f.name, sig6(b.value + f.offset), sig6(b.value), b.maximizers);
            if let Some(c) = f.published_lhv_constant {
                println!("published constant {}", sig6(c));
            }
        }
    }
    Ok(())
}

pub fn witness(ctx: &Ctx, fa: &FunctionalArgs, src: &str, binarised: bool, noise: NoiseArg, out: Option<&Path>) -> Result<()> {
    let f = functional(fa)?;
    let p = load_behavior(src, fa, &f)?;
    let noise = match noise {
        NoiseArg::Auto => NoiseModel::Auto,
        NoiseArg::Uniform => NoiseModel::Uniform,
        NoiseArg::InputsOnly => NoiseModel::InputsOnly,
    };
    let mut averaged = false;
    let target = if binarised {
        match binarise_behavior(&p) {
            Ok(b) => b.into_behavior(),
            Err(bellhd_core::Error::SignalingDetected { .. }) => {
                averaged = true;
                binarise_averaged(&p).into_behavior()
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        p
    };
    let r = locality_lp_with(&target, &noise, &ctx.cfg.tol)?;
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&r.functional)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = json!({
        "behavior": src,
        "binarised": binarised,
        "averaged_marginals": averaged,
        "noise": r.noise,
        "lp_objective": r.lp_objective,
        "is_local": r.is_local,
        "value_on_target": r.value_on_target,
        "min_deterministic_value": r.min_deterministic_value,
        "iterations": r.iterations,
    });
    match ctx.format {
        Format::Json => emit_json(&summary)?,
        Format::Csv => print!(
            "behavior,binarised,is_local,value_on_target,lp_objective\n{},{},{},{},{}\n",
            src,
            binarised,
            r.is_local,
            sig6(r.value_on_target),
            sig6(r.lp_objective)
        ),
        Format::Text => {
            println!("witness value {} ({})", sig6(r.value_on_target), if r.is_local { "local" } else { "nonlocal" });
            println!("locality program objective {}, {} iterations", sig6(r.lp_objective), r.iterations);
            println!("minimum over deterministic strategies {}", sig6(r.min_deterministic_value));
            if averaged {
                println!("note: data signal; binarised with input-averaged marginals");
            }
        }
    }
    Ok(())
}

pub fn seesaw(ctx: &Ctx, fa: &FunctionalArgs, dim: Option<usize>, restarts: Option<usize>, minimize: bool, solver: SolverArg, out: Option<&Path>) -> Result<()> {
    let f = functional(fa)?;
    let dim = dim.unwrap_or(f.scenario.outcomes_a);
    let cfg = SeesawConfig {
        minimize,
        solver: match solver {
            SolverArg::Auto => MeasurementSolver::Auto,
            SolverArg::Sdp => MeasurementSolver::Sdp,
            SolverArg::ClosedForm => MeasurementSolver::ClosedForm,
        },
        ..seesaw_config(ctx, dim, restarts)
    };
    let r = run_seesaw(&f, &cfg)?;
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&r.model)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let schmidt = schmidt_coefficients(&dominant_vector(&r.model.state)?, dim);
    let values = r.restart_values();
    let hits = values.iter().filter(|v| (*v - r.value).abs() < 1e-6).count();
    let summary = json!({
        "functional": f.name,
        "dim": dim,
        "value": r.value,
        "best_restart": r.best_restart,
        "restarts": cfg.restarts,
        "restarts_at_best": hits,
        "failures": r.failures.len(),
        "schmidt_coefficients": schmidt,
        "seed": cfg.seed,
    });
    match ctx.format {
        Format::Json => emit_json(&summary)?,
        Format::Csv => print!("functional,dim,value,restarts_at_best\n{},{},{},{}\n", f.name, dim, sig6(r.value), hits),
        Format::Text => {
            println!("{} in dimension {}: {}", f.name, dim, sig6(r.value));
            println!("{hits}/{} restarts reached the best value; {} failed", cfg.restarts, r.failures.len());
            println!("Schmidt coefficients: {}", schmidt.iter().map(|s| sig6(*s)).collect::<Vec<_>>().join(" "));
        }
    }
    Ok(())
}

pub fn dimbound(ctx: &Ctx, fa: &FunctionalArgs, dim: usize, l: LevelArg, full: bool, list: bool) -> Result<()> {
    let f = functional(fa)?;
    let cfg = DimBoundConfig { full_enumeration: full, ..dimbound_config(ctx, level(l)) };
    let r = dim_bound(&f, dim, &cfg)?;
    let residual = r.profiles.iter().map(|p| p.residual).fold(0.0f64, f64::max);
    match ctx.format {
        Format::Json => emit_json(&json!({ "functional": f.name, "report": r, "max_residual": residual }))?,
        _ if list => {
            let mut t = Table::new(&["profile", "bound", "span_dim", "moment_size", "error"]);
            for p in &r.profiles {
                t.push(vec![
                    profile_string(&p.profile),
                    opt(p.value.map(|v| v + f.offset)),
                    p.span_dim.to_string(),
                    p.moment_size.to_string(),
                    p.error.clone().unwrap_or_default(),
                ]);
            }
            print!("{}", t.render(ctx.format));
        }
        Format::Csv => print!(
            "functional,dim,value,best_profile,profiles_solved,total_profiles,partial\n{},{},{},{},{},{},{}\n",
            f.name,
            dim,
            sig6(r.value),
            profile_string(&r.best_profile),
            r.profiles.len(),
            r.total_profiles,
            r.partial
        ),
        Format::Text => {
            println!("{} in dimension {}: bound {}", f.name, dim, sig6(r.value));
            println!("best rank profile {}", profile_string(&r.best_profile));
            println!(
                "{} of {} profiles solved ({} symmetries), max residual {}{}",
                r.profiles.len(),
                r.total_profiles,
                r.symmetries,
                sig6(residual),
                if r.partial { ", PARTIAL" } else { "" }
            );
        }
    }
    Ok(())
}

pub fn binarise(ctx: &Ctx, fa: &FunctionalArgs, dims: &[usize], restarts: usize) -> Result<()> {
    if fa.functional.is_some() {
        bail!("binarise works from --family/--d");
    }
    check_d(fa.d, MAX_D)?;
    let template = SeesawConfig { restarts, seed: ctx.cfg.seed, ..SeesawConfig::default() };
    let row = binarised_witness_suite(fa.family, fa.d, dims, &template, &ctx.cfg.tol)?;
    if ctx.format == Format::Json {
        return emit_json(&json!({
            "family": fa.family.name(),
            "d": fa.d,
            "ideal_value": row.ideal_value,
            "optimized": row.optimized.iter().map(|(d, v)| json!({ "dim": d, "value": v })).collect::<Vec<_>>(),
            "restarts": restarts,
            "witness": row.witness.functional,
        }));
    }
    let mut t = Table::new(&["D", "min_witness"]);
    for (d, v) in &row.optimized {
        t.push(vec![d.to_string(), sig6(*v)]);
    }
    if ctx.format == Format::Text {
        println!("witness on the ideal binarised behavior: {}", sig6(row.ideal_value));
    }
    print!("{}", t.render(ctx.format));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn stats(
    ctx: &Ctx,
    data: &Path,
    family: Family,
    quantum_max: Option<f64>,
    threshold: Option<f64>,
    mode: Option<ModeArg>,
    p_target: f64,
    trials: Option<usize>,
    pseudo_count: f64,
) -> Result<()> {
    let table = load_counts(data)?;
    let d = table.scenario.outcomes_a;
    check_d(d, MAX_D)?;
    let f = family.functional(d);
    let quantum_max = match quantum_max {
        Some(q) => q,
        None => run_seesaw(&f, &seesaw_config(ctx, d, None))?.value,
    };
    let threshold = match threshold {
        Some(t) => t,
        None => dim_bound(&f, d - 1, &dimbound_config(ctx, Level::OneAb))?.value,
    };
    let mode = match mode {
        Some(ModeArg::Ratio) => NormalizationMode::Ratio,
        Some(ModeArg::ShiftedRatio) => NormalizationMode::ShiftedRatio,
        None if family == Family::Cglmp => NormalizationMode::Ratio,
        None => NormalizationMode::ShiftedRatio,
    };
    let target = StatsTarget { quantum_max, threshold, mode, p_target };
    let mc = McConfig { trials: trials.unwrap_or(ctx.cfg.trials), seed: ctx.cfg.seed, pseudo_count };
    let report = stats_report(&table, &f, &target, &mc)?;
    let p = behavior_from_counts(&table)?;
    let visibility = family_visibility(family, &p)?;
    let fidelity = measurement_fidelity(&f, &optimal_model(family, d)?, report.value)?;
    match ctx.format {
        Format::Json => emit_json(&json!({
            "data": data.display().to_string(),
            "report": report,
            "quantum_max": quantum_max,
            "threshold": threshold,
            "visibility": visibility,
            "measurement_fidelity": fidelity,
            "signaling_deviation": p.signaling_deviation(),
            "seed": mc.seed,
        }))?,
        Format::Csv => print!(
            "value,sigma,normalized,threshold,kl,log10_p,min_counts,visibility,fidelity\n{},{},{},{},{},{},{},{},{}\n",
            sig6(report.value),
            sig6(report.sigma),
            sig6(report.normalized_value),
            sig6(report.normalized_threshold),
            sig6(report.kl),
            sig6(report.log10_p_value_bound),
            sig6(report.min_counts),
            sig6(visibility),
            sig6(fidelity)
        ),
        Format::Text => {
            println!("{}: {} ± {} ({} Poisson trials)", f.name, sig6(report.value), sig6(report.sigma), report.trials);
            if let Some(t) = report.assumed_total_per_setting {
                println!("normalized table, assumed {} counts per setting", sig6(t));
            }
            println!("normalized {} vs threshold {} (gap {})", sig6(report.normalized_value), sig6(report.normalized_threshold), sig6(report.gap));
            println!("KL {}; p ≤ 10^{} at N = {}", sig6(report.kl), sig6(report.log10_p_value_bound), sig6(report.counts));
            println!("counts needed for p = {}: {}", sig6(report.p_target), sig6(report.min_counts));
            println!("white-noise visibility {}; measurement fidelity {}", sig6(visibility), sig6(fidelity));
        }
    }
    Ok(())
}

pub fn noise_curve(ctx: &Ctx, family: Family, d_min: usize, d_max: usize, mode: CurveMode) -> Result<()> {
    if d_min < 2 || d_min > d_max || d_max > MAX_D {
        bail!("need 2 ≤ d_min ≤ d_max ≤ {MAX_D}");
    }
    let mut rows = Vec::new();
    for d in d_min..=d_max {
        let v = match mode {
            CurveMode::Multi => multi_outcome_tolerance(family, d)?,
            CurveMode::Binarised => binarised_noise_tolerance(family, d, &ctx.cfg.tol)?.v_crit,
        };
        rows.push((d, v));
    }
    if ctx.format == Format::Json {
        let pts: Vec<_> = rows.iter().map(|(d, v)| json!({ "d": d, "v_crit": v })).collect();
        return emit_json(&json!({ "family": family.name(), "mode": format!("{mode:?}").to_lowercase(), "points": pts }));
    }
    let mut t = Table::new(&["d", "v_crit"]);
    for (d, v) in rows {
        t.push(vec![d.to_string(), sig6(v)]);
    }
    print!("{}", t.render(ctx.format));
    Ok(())
}
