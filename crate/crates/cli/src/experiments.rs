//! The six experiment runners.

use anyhow::{Context, Result};
use mbent_core::dynamics::{detect_plateau, estimate_saturation_time, fit_early_growth, GrowthFit, Plateau};
use mbent_core::moments::{interaction_bounds, theorem_check_orders};
use mbent_core::rdm::EntropyKind;
use mbent_core::symmetry::enumerate_labels;
use mbent_core::{
    block_dimension, block_trace, evolve_and_measure, max_entropy_bound, refined_entropy_bound, Normalization,
    SectorBasis, SolverOptions, TheoremReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelConfig};
use crate::output::{num, text_cell, Csv, OutputDir};
use crate::seeds::derive_seed;

/// Counts gathered while running one experiment.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    pub failures: Vec<String>,
    pub violations: usize,
}

fn point_name(value: f64) -> String {
    if value.is_nan() {
        "-".into()
    } else {
        num(value)
    }
}

fn status<T>(r: &std::result::Result<T, String>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => text_cell(e),
    }
}

fn nan_row(n: usize) -> Vec<String> {
    vec![num(f64::NAN); n]
}

fn fraction(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        value / bound
    } else {
        f64::NAN
    }
}

#[derive(Serialize)]
struct PointRecord<'a> {
    value: f64,
    member: usize,
    seed: u64,
    negated: bool,
    spec_hash: Option<String>,
    report: Option<&'a TheoremReport>,
    error: Option<&'a str>,
}

struct CheckJob {
    point: usize,
    member: usize,
    seed: u64,
    negated: bool,
}

struct CheckResult {
    hash: Option<String>,
    report: std::result::Result<TheoremReport, String>,
}

fn run_check(
    model: &ModelConfig,
    job: &CheckJob,
    n: usize,
    orders: &[usize],
    tol: f64,
    pin: bool,
    solver: &SolverOptions,
) -> CheckResult {
    let spec = match model.build(job.seed, pin) {
        Ok(s) if job.negated => s.negated(),
        Ok(s) => s,
        Err(e) => {
            return CheckResult {
                hash: None,
                report: Err(e.to_string()),
            }
        }
    };
    CheckResult {
        hash: Some(spec.content_hash()),
        report: theorem_check_orders(&spec, n, orders, tol, solver).map_err(|e| e.to_string()),
    }
}

pub(crate) fn gs_sweep(
    cfg: &ExperimentConfig,
    solver: &SolverOptions,
    out: &mut OutputDir,
    tally: &mut Tally,
) -> Result<()> {
    let points = cfg.sweep_points()?;
    let n = cfg.particles()?;
    let orders = cfg.orders()?;
    if points.is_empty() {
        return Ok(());
    }
    let seed = derive_seed(cfg.seeds.master, 0);
    let results: Vec<CheckResult> = points
        .par_iter()
        .enumerate()
        .map(|(point, (_, model))| {
            let job = CheckJob {
                point,
                member: 0,
                seed,
                negated: false,
            };
            run_check(model, &job, n, &orders, cfg.tolerance, true, solver)
        })
        .collect();
    for &m in &orders {
        let mut csv = Csv::new(&[
            "value", "e_gs", "mu1", "gap", "entropy", "bound", "deficit", "fraction", "status",
        ]);
        for ((value, _), res) in points.iter().zip(&results) {
            let mut row = vec![point_name(*value)];
            match &res.report {
                Ok(rep) => {
                    let def = rep.deficits.iter().find(|x| x.m == m).context("missing order")?;
                    row.extend(
                        [
                            rep.e_gs,
                            rep.mu1,
                            rep.gap,
                            def.entropy,
                            def.bound,
                            def.deficit,
                            fraction(def.entropy, def.bound),
                        ]
                        .map(num),
                    );
                }
                Err(_) => row.extend(nan_row(7)),
            }
            row.push(status(&res.report));
            csv.row(&row);
        }
        out.write(&format!("gs_M{m}.csv"), csv.as_str())?;
    }
    let records: Vec<PointRecord> = points
        .iter()
        .zip(&results)
        .map(|((value, _), res)| PointRecord {
            value: *value,
            member: 0,
            seed,
            negated: false,
            spec_hash: res.hash.clone(),
            report: res.report.as_ref().ok(),
            error: res.report.as_ref().err().map(String::as_str),
        })
        .collect();
    for (r, (value, _)) in results.iter().zip(&points) {
        if let Err(e) = &r.report {
            tally.failures.push(format!("point {}: {e}", point_name(*value)));
        }
    }
    out.write_json("gs_points.json", &records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Mean, population standard deviation and range, summed in input order.
pub fn aggregate(values: &[f64]) -> Aggregate {
    let count = values.len();
    if count == 0 {
        return Aggregate {
            mean: f64::NAN,
            std: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    Aggregate {
        mean,
        std: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        count,
    }
}

pub(crate) fn ensemble(
    cfg: &ExperimentConfig,
    solver: &SolverOptions,
    out: &mut OutputDir,
    tally: &mut Tally,
) -> Result<()> {
    let points = cfg.sweep_points()?;
    let n = cfg.particles()?;
    let d = cfg.model()?.orbitals();
    let orders = cfg.orders()?;
    let members = cfg.seeds.members;
    let jobs: Vec<CheckJob> = (0..points.len())
        .flat_map(|point| {
            (0..members).map(move |member| CheckJob {
                point,
                member,
                seed: 0,
                negated: false,
            })
        })
        .map(|mut j| {
            j.seed = derive_seed(cfg.seeds.master, j.member as u64);
            j
        })
        .collect();
    let results: Vec<CheckResult> = jobs
        .par_iter()
        .map(|job| run_check(&points[job.point].1, job, n, &orders, cfg.tolerance, true, solver))
        .collect();
    for (job, res) in jobs.iter().zip(&results) {
        if let Err(e) = &res.report {
            tally.failures.push(format!(
                "point {} member {}: {e}",
                point_name(points[job.point].0),
                job.member
            ));
        }
    }
    if points.is_empty() {
        return Ok(());
    }
    for &m in &orders {
        let bound = max_entropy_bound(d, n, m, EntropyKind::VonNeumann, Normalization::Unnormalized)?.value;
        let mut members_csv = Csv::new(&["value", "member", "seed", "entropy", "fraction", "status"]);
        let mut agg_csv = Csv::new(&[
            "value",
            "mean",
            "std",
            "min",
            "max",
            "bound",
            "mean_fraction",
            "members",
            "failures",
        ]);
        for (p, (value, _)) in points.iter().enumerate() {
            let mut entropies = Vec::with_capacity(members);
            for (job, res) in jobs.iter().zip(&results).filter(|(j, _)| j.point == p) {
                let s = match &res.report {
                    Ok(rep) => rep.deficits.iter().find(|x| x.m == m).map(|x| x.entropy),
                    Err(_) => None,
                };
                if let Some(s) = s {
                    entropies.push(s);
                }
                let s = s.unwrap_or(f64::NAN);
                members_csv.row(&[
                    point_name(*value),
                    job.member.to_string(),
                    job.seed.to_string(),
                    num(s),
                    num(fraction(s, bound)),
                    status(&res.report),
                ]);
            }
            let a = aggregate(&entropies);
            agg_csv.row(&[
                point_name(*value),
                num(a.mean),
                num(a.std),
                num(a.min),
                num(a.max),
                num(bound),
                num(fraction(a.mean, bound)),
                a.count.to_string(),
                (members - a.count).to_string(),
            ]);
        }
        out.write(&format!("ensemble_M{m}.csv"), agg_csv.as_str())?;
        out.write(&format!("ensemble_members_M{m}.csv"), members_csv.as_str())?;
    }
    Ok(())
}

pub(crate) fn theorem_check(
    cfg: &ExperimentConfig,
    solver: &SolverOptions,
    out: &mut OutputDir,
    tally: &mut Tally,
) -> Result<()> {
    let points = cfg.sweep_points()?;
    let n = cfg.particles()?;
    let orders = cfg.orders()?;
    let signs: &[bool] = if cfg.include_negated { &[false, true] } else { &[false] };
    let mut jobs = Vec::new();
    for point in 0..points.len() {
        for member in 0..cfg.seeds.members {
            for &negated in signs {
                jobs.push(CheckJob {
                    point,
                    member,
                    seed: derive_seed(cfg.seeds.master, member as u64),
                    negated,
                });
            }
        }
    }
    let results: Vec<CheckResult> = jobs
        .par_iter()
        .map(|job| run_check(&points[job.point].1, job, n, &orders, cfg.tolerance, false, solver))
        .collect();
    let mut csv = Csv::new(&[
        "value",
        "member",
        "seed",
        "negated",
        "e_gs",
        "mu1",
        "gap",
        "norm_h",
        "min_deficit",
        "trivial",
        "violation",
        "status",
    ]);
    let mut records = Vec::with_capacity(jobs.len());
    for (job, res) in jobs.iter().zip(&results) {
        let value = points[job.point].0;
        let mut row = vec![
            point_name(value),
            job.member.to_string(),
            job.seed.to_string(),
            job.negated.to_string(),
        ];
        match &res.report {
            Ok(rep) => {
                let min_def = rep.deficits.iter().map(|x| x.deficit).fold(f64::INFINITY, f64::min);
                row.extend([rep.e_gs, rep.mu1, rep.gap, rep.norm_h, min_def].map(num));
                row.extend([rep.trivial.to_string(), rep.violation.to_string()]);
                if rep.violation {
                    tally.violations += 1;
                }
            }
            Err(e) => {
                row.extend(nan_row(5));
                row.extend(["-".to_string(), "-".to_string()]);
                tally
                    .failures
                    .push(format!("member {} negated {}: {e}", job.member, job.negated));
            }
        }
        row.push(status(&res.report));
        csv.row(&row);
        records.push(PointRecord {
            value,
            member: job.member,
            seed: job.seed,
            negated: job.negated,
            spec_hash: res.hash.clone(),
            report: res.report.as_ref().ok(),
            error: res.report.as_ref().err().map(String::as_str),
        });
    }
    out.write("theorem.csv", csv.as_str())?;
    out.write_json("theorem_reports.json", &records)
}

pub(crate) fn bounds(
    cfg: &ExperimentConfig,
    solver: &SolverOptions,
    out: &mut OutputDir,
    tally: &mut Tally,
) -> Result<()> {
    let points = cfg.sweep_points()?;
    let n = cfg.particles()?;
    let b = cfg.bounds.as_ref().context("bounds block")?;
    let ps: Vec<f64> = b.p.iter().map(|p| p.value()).collect();
    let jobs: Vec<(usize, usize, u64)> = (0..points.len())
        .flat_map(|p| (0..cfg.seeds.members).map(move |m| (p, m)))
        .map(|(p, m)| (p, m, derive_seed(cfg.seeds.master, m as u64)))
        .collect();
    let results: Vec<std::result::Result<_, String>> = jobs
        .par_iter()
        .map(|&(p, _, seed)| {
            let spec = points[p].1.build(seed, false).map_err(|e| e.to_string())?;
            interaction_bounds(&spec, n, b.order, &ps, solver).map_err(|e| e.to_string())
        })
        .collect();
    let mut csv = Csv::new(&[
        "value",
        "member",
        "seed",
        "p",
        "norm",
        "bound",
        "slack",
        "holds",
        "mixed_order",
        "status",
    ]);
    for (&(p, member, seed), res) in jobs.iter().zip(&results) {
        let head = [point_name(points[p].0), member.to_string(), seed.to_string()];
        match res {
            Ok(list) => {
                for ib in list {
                    let slack = ib.norm - ib.bound;
                    let holds = slack >= -cfg.tolerance * ib.norm.abs().max(1.0);
                    if !holds {
                        tally.violations += 1;
                    }
                    let mut row = head.to_vec();
                    row.extend([num(ib.p), num(ib.norm), num(ib.bound), num(slack)]);
                    row.extend([holds.to_string(), ib.mixed_order.to_string(), "ok".into()]);
                    csv.row(&row);
                }
            }
            Err(e) => {
                tally.failures.push(format!("member {member}: {e}"));
                let mut row = head.to_vec();
                row.extend(nan_row(5));
                row.extend(["-".into(), "-".into(), text_cell(e)]);
                csv.row(&row);
            }
        }
    }
    out.write("bounds.csv", csv.as_str())
}

pub(crate) fn refined_bounds(cfg: &ExperimentConfig, out: &mut OutputDir, tally: &mut Tally) -> Result<()> {
    let r = cfg.refined.as_ref().context("refined block")?;
    let mut csv = Csv::new(&["species_counts", "N", "refined_bound", "global_bound", "status"]);
    let mut blocks = Csv::new(&["species_counts", "label", "trace", "dimension", "term"]);
    for counts in &r.species_counts {
        let key = counts.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        let n: usize = counts.iter().sum();
        let refined = refined_entropy_bound(counts, r.d, r.l, r.m);
        let global = max_entropy_bound(r.d, n, r.m, EntropyKind::VonNeumann, Normalization::Unnormalized);
        match (refined, global) {
            (Ok(a), Ok(b)) => {
                csv.row(&[key.clone(), n.to_string(), num(a.value), num(b.value), "ok".into()]);
                for lab in enumerate_labels(r.m, r.l) {
                    if lab.0.iter().zip(counts).any(|(m, n)| m > n) {
                        continue;
                    }
                    let t = block_trace(&lab, counts);
                    let dim = block_dimension(&lab, r.d, r.l);
                    let label = lab.0.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
                    blocks.row(&[
                        key.clone(),
                        label,
                        num(t),
                        dim.to_string(),
                        num(t * (dim as f64 / t).ln()),
                    ]);
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                tally.failures.push(format!("{key}: {e}"));
                csv.row(&[
                    key,
                    n.to_string(),
                    num(f64::NAN),
                    num(f64::NAN),
                    text_cell(&e.to_string()),
                ]);
            }
        }
    }
    out.write("refined_bounds.csv", csv.as_str())?;
    out.write("refined_blocks.csv", blocks.as_str())
}

#[derive(Debug, Clone, Serialize)]
struct TrajectorySummary {
    value: f64,
    label: String,
    scale: f64,
    fit: Option<GrowthFit>,
    saturation_estimate: Option<f64>,
    plateau: Option<Plateau>,
    max_norm_error: f64,
    max_trace_error: f64,
    refined_bounds: Vec<(usize, f64)>,
    max_off_block_residual: Vec<(usize, f64)>,
    notes: Vec<String>,
}

pub(crate) fn dynamics(
    cfg: &ExperimentConfig,
    solver: &SolverOptions,
    out: &mut OutputDir,
    tally: &mut Tally,
) -> Result<()> {
    let points = cfg.sweep_points()?;
    let n = cfg.particles()?;
    let dy = cfg.dynamics.as_ref().context("dynamics block")?;
    let seed = derive_seed(cfg.seeds.master, 0);
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..dy.initial.len()).map(move |k| (p, k)))
        .collect();
    let results: Vec<std::result::Result<_, String>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let model = &points[p].1;
            let init = &dy.initial[k];
            let spec = model.build(seed, false).map_err(|e| e.to_string())?;
            let basis = SectorBasis::new(spec.orbitals(), n).map_err(|e| e.to_string())?;
            let traj = dy.trajectory(init, model).map_err(|e| e.to_string())?;
            let trace = evolve_and_measure(&spec, &basis, &traj, solver).map_err(|e| e.to_string())?;
            let scale = model.dominant_scale();
            let time_scale = dy.time_scale(model);
            let mut summary = TrajectorySummary {
                value: points[p].0,
                label: init.label.clone(),
                scale,
                fit: None,
                saturation_estimate: None,
                plateau: None,
                max_norm_error: trace.norms.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max),
                max_trace_error: trace.trace_errors.iter().copied().fold(0.0, f64::max),
                refined_bounds: trace.blocks.iter().map(|b| (b.m, b.refined_bound)).collect(),
                max_off_block_residual: trace
                    .blocks
                    .iter()
                    .map(|b| (b.m, b.off_block_residual.iter().copied().fold(0.0, f64::max)))
                    .collect(),
                notes: Vec::new(),
            };
            if let Some(f) = &dy.fit {
                let window = (f.window.0 * time_scale, f.window.1 * time_scale);
                match fit_early_growth(&trace, f.m, window, f.exponent) {
                    Ok(fit) => {
                        match estimate_saturation_time(&fit, spec.orbitals(), n, f.m, scale, f.s_star) {
                            Ok(t) => summary.saturation_estimate = Some(t),
                            Err(e) => summary.notes.push(format!("saturation estimate: {e}")),
                        }
                        summary.fit = Some(fit);
                    }
                    Err(e) => summary.notes.push(format!("growth fit: {e}")),
                }
            }
            if let Some(pc) = &dy.plateau {
                match trace.series(pc.m, pc.kind) {
                    Some(values) => match detect_plateau(&trace.times, values, pc.tail, pc.fraction) {
                        Ok(pl) => summary.plateau = Some(pl),
                        Err(e) => summary.notes.push(format!("plateau: {e}")),
                    },
                    None => summary
                        .notes
                        .push(format!("plateau: no {:?} series for M = {}", pc.kind, pc.m)),
                }
            }
            Ok((trace, summary))
        })
        .collect();

    let mut table = Csv::new(&[
        "value",
        "label",
        "exponent",
        "amplitude",
        "fit_residual",
        "saturation_estimate",
        "plateau_time",
        "plateau_value",
        "status",
    ]);
    for (idx, (&(p, k), res)) in jobs.iter().zip(&results).enumerate() {
        let value = points[p].0;
        let label = &dy.initial[k].label;
        let mut row = vec![point_name(value), text_cell(label)];
        match res {
            Ok((trace, summary)) => {
                let stem = format!("trace_{idx:03}");
                out.write(&format!("{stem}.csv"), &trace.to_csv())?;
                if !trace.blocks.is_empty() {
                    out.write(&format!("{stem}_blocks.csv"), &blocks_csv(trace))?;
                }
                out.write_json(
                    &format!("{stem}.json"),
                    &serde_json::json!({
                        "summary": summary,
                        "metadata": trace.metadata,
                        "initial": dy.initial[k],
                        "model": points[p].1,
                        "trajectory": dy.trajectory(&dy.initial[k], &points[p].1)?,
                        "seed": seed,
                    }),
                )?;
                let fit = summary.fit.as_ref();
                row.extend(
                    [
                        fit.map_or(f64::NAN, |f| f.exponent),
                        fit.map_or(f64::NAN, |f| f.amplitude),
                        fit.map_or(f64::NAN, |f| f.residual),
                        summary.saturation_estimate.unwrap_or(f64::NAN),
                        summary.plateau.map_or(f64::NAN, |x| x.t_observed),
                        summary.plateau.map_or(f64::NAN, |x| x.value),
                    ]
                    .map(num),
                );
                row.push(if summary.notes.is_empty() {
                    "ok".into()
                } else {
                    text_cell(&summary.notes.join("; "))
                });
            }
            Err(e) => {
                tally.failures.push(format!("{label} at {}: {e}", point_name(value)));
                row.extend(nan_row(6));
                row.push(text_cell(e));
            }
        }
        table.row(&row);
    }
    out.write("dynamics_summary.csv", table.as_str())
}

/// Time, refined bound and off-block residual per order, then the total
/// von Neumann entropy when the trace carries it.
fn blocks_csv(trace: &mbent_core::EntropyTrace) -> String {
    let mut header = vec!["t".to_string()];
    for b in &trace.blocks {
        header.extend([
            format!("refined_bound_M{}", b.m),
            format!("off_block_M{}", b.m),
            format!("S_vn_M{}", b.m),
        ]);
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for (i, t) in trace.times.iter().enumerate() {
        let mut row = vec![num(*t)];
        for b in &trace.blocks {
            let s = trace.series(b.m, EntropyKind::VonNeumann).map_or(f64::NAN, |v| v[i]);
            row.extend([num(b.refined_bound), num(b.off_block_residual[i]), num(s)]);
        }
        csv.row(&row);
    }
    csv.as_str().to_string()
}
