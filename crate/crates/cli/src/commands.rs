use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use maskcfg::analysis::{tv, Region};
use maskcfg::closed_form::{sampled_from_coefficients, solve_2d_with};
use maskcfg::numerics::TimeRatio;
use maskcfg::oracle::{uniformization_terms, TERM_BUDGET};
use maskcfg::samplers::chi_square_test;
use maskcfg::validation::{run_all, ValidationOptions};
use maskcfg::{
    coefficients_2d, decay_exponent_fit, empirical_distribution, evolve_exact, guided_reverse,
    limit_distribution_2d, region_decomposition_2d, sample_exact_event, sample_tau_leaping, sample_uniformization,
    sampled_distribution_2d, solve_1d_guided, tilted_distribution, tv_curve_1d_closed, tv_curve_2d,
    DenseDistribution, GuidanceConfig, SampleBatch, TVCurve,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{density_rows, tv_rows, write_densities, write_limit, write_samples, write_tv};
use crate::scenario::Scenario;
use crate::svg;
use crate::{Cli, SchemeArg};

/// Largest closed-form vs oracle disagreement tolerated by `--validate`.
pub const VALIDATE_TOL: f64 = 1e-6;
/// Mass drift tolerated in oracle output.
pub const CONSERVATION_TOL: f64 = 1e-10;

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

fn guidance(s: &Scenario, w: f64) -> CliResult<GuidanceConfig> {
    Ok(GuidanceConfig::new(s.guided_index, w)?)
}

fn all_mask(s: &Scenario) -> DenseDistribution {
    let space = s.mixture.space();
    DenseDistribution::point_mass(space, space.all_mask_index())
}

/// Oracle densities on `times`; the mass must stay on the simplex.
fn oracle_densities(s: &Scenario, g: &GuidanceConfig, times: &[f64]) -> CliResult<Vec<DenseDistribution>> {
    let gen = guided_reverse(&s.mixture, g)?;
    let sol = evolve_exact(&gen, s.horizon, times, &all_mask(s))?;
    for (t, d) in times.iter().zip(&sol.densities) {
        let drift = (d.probs().iter().sum::<f64>() - 1.0).abs();
        if drift > CONSERVATION_TOL {
            return Err(CliError::Validation(format!("oracle mass drift {drift:e} at t = {t}")));
        }
    }
    Ok(sol.densities)
}

fn closed_densities(cli: &Cli, s: &Scenario, g: &GuidanceConfig, times: &[f64]) -> CliResult<Vec<DenseDistribution>> {
    match s.dims() {
        1 => {
            if cli.inject_fault {
                return Err(CliError::Config("fault injection targets the 2D coefficients".into()));
            }
            times
                .iter()
                .map(|&t| Ok(solve_1d_guided(&s.mixture, g, s.horizon, t)?))
                .collect()
        }
        2 => {
            let space = s.mixture.space();
            let mut coef = coefficients_2d(&s.mixture, g)?;
            if cli.inject_fault {
                coef.ln_c[0] += 0.1;
            }
            let terminal = sampled_from_coefficients(&coef, space)?;
            times
                .iter()
                .map(|&t| {
                    if t == s.horizon {
                        return Ok(terminal.clone());
                    }
                    let tr = TimeRatio::new(s.horizon, t)?;
                    let (d, flags) = solve_2d_with(&coef, space, &tr)?;
                    if flags.collisions > 0 || flags.underflows > 0 {
                        info!("t = {t}: {} collisions, {} underflows", flags.collisions, flags.underflows);
                    }
                    Ok(d)
                })
                .collect()
        }
        d => Err(CliError::Config(format!("closed forms cover D = 1, 2 (got D = {d}); use --oracle"))),
    }
}

/// Indices of the grid times the oracle can reach within its term budget;
/// the others are skipped with a warning.
fn checkable(s: &Scenario, g: &GuidanceConfig, times: &[f64]) -> CliResult<Vec<usize>> {
    let gen = guided_reverse(&s.mixture, g)?;
    let mut keep = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        if uniformization_terms(&gen, s.horizon, t)? <= TERM_BUDGET as f64 {
            keep.push(k);
        } else {
            warn!("w = {}: t = {t} is too stiff for the oracle; not cross-checked", g.w);
        }
    }
    Ok(keep)
}

fn densities(cli: &Cli, s: &Scenario, g: &GuidanceConfig, times: &[f64]) -> CliResult<Vec<DenseDistribution>> {
    if cli.oracle {
        return oracle_densities(s, g, times);
    }
    let closed = closed_densities(cli, s, g, times)?;
    if cli.validate {
        let keep = checkable(s, g, times)?;
        let sub: Vec<f64> = keep.iter().map(|&k| times[k]).collect();
        let oracle = oracle_densities(s, g, &sub)?;
        for ((t, a), b) in sub.iter().zip(keep.iter().map(|&k| &closed[k])).zip(&oracle) {
            let gap = a.max_abs_diff(b)?;
            if gap > VALIDATE_TOL {
                return Err(CliError::Validation(format!(
                    "closed form and oracle differ by {gap:e} at w = {}, t = {t}",
                    g.w
                )));
            }
        }
    }
    Ok(closed)
}

fn token_label(c: usize, n: usize) -> String {
    if c == n {
        "M".into()
    } else {
        c.to_string()
    }
}

/// Bar chart in 1D, heatmap over the unmasked cells in 2D, bar chart over
/// unmasked states otherwise.
fn distribution_svg(title: &str, d: &DenseDistribution) -> String {
    let space = d.space();
    let n = space.alphabet();
    match space.dims() {
        1 => {
            let labels: Vec<String> = (1..=n).map(|c| token_label(c, n)).collect();
            svg::bar_chart(title, &labels, d.probs())
        }
        2 => {
            let k = n - 1;
            let vals: Vec<f64> = (0..k * k).map(|u| d.prob(space.unmasked_index(u))).collect();
            svg::heatmap(title, k, k, &vals)
        }
        _ => {
            let idx: Vec<usize> = space.unmasked_iter().collect();
            let labels: Vec<String> = idx
                .iter()
                .map(|&x| space.state_of(x).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(""))
                .collect();
            let vals: Vec<f64> = idx.iter().map(|&x| d.prob(x)).collect();
            svg::bar_chart(title, &labels, &vals)
        }
    }
}

pub fn evolve(cli: &Cli, s: &Scenario) -> CliResult<()> {
    let mut rows = Vec::new();
    for &w in &s.ws {
        let g = guidance(s, w)?;
        let ds = densities(cli, s, &g, &s.times)?;
        for (&t, d) in s.times.iter().zip(&ds) {
            rows.extend(density_rows(d, w, t));
        }
        let last = ds.last().expect("nonempty grid");
        let t_last = *s.times.last().expect("nonempty grid");
        let title = format!("{} w={w} t={t_last}", s.name);
        write_text(&cli.out.join(format!("terminal_w{w}.svg")), &distribution_svg(&title, last))?;
        if t_last == s.horizon {
            let tilt = tilted_distribution(&s.mixture, &g)?;
            println!("w = {w}: terminal TV to the tilted target {:.6e}", tv(last, &tilt)?);
        }
    }
    let path = cli.out.join("densities.csv");
    write_densities(&path, s.dims(), &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn oracle_curve(s: &Scenario, g: &GuidanceConfig) -> CliResult<TVCurve> {
    let mut times = s.times.clone();
    if times.last() != Some(&s.horizon) {
        times.push(s.horizon);
    }
    let ds = oracle_densities(s, g, &times)?;
    let terminal = ds.last().expect("nonempty");
    let values = ds[..s.times.len()]
        .iter()
        .map(|d| tv(d, terminal))
        .collect::<maskcfg::Result<Vec<f64>>>()?;
    Ok(TVCurve {
        w: g.w,
        horizon: s.horizon,
        times: s.times.clone(),
        log_values: values.iter().map(|v| v.ln()).collect(),
        values,
    })
}

fn closed_curve(s: &Scenario, g: &GuidanceConfig) -> CliResult<TVCurve> {
    match s.dims() {
        1 => Ok(tv_curve_1d_closed(&s.mixture, g, s.horizon, &s.times)?),
        2 => Ok(tv_curve_2d(&s.mixture, g, s.horizon, &s.times)?),
        d => Err(CliError::Config(format!("closed forms cover D = 1, 2 (got D = {d}); use --oracle"))),
    }
}

pub fn tv_curve(cli: &Cli, s: &Scenario, t0: Option<f64>) -> CliResult<()> {
    let t0 = match t0 {
        Some(t) => *s
            .times
            .iter()
            .find(|&&x| (x - t).abs() <= 1e-12)
            .ok_or_else(|| CliError::Config(format!("t0 = {t} is not on the time grid")))?,
        None => *s
            .times
            .iter()
            .min_by(|a, b| (*a - 0.5 * s.horizon).abs().total_cmp(&(*b - 0.5 * s.horizon).abs()))
            .expect("nonempty grid"),
    };
    let mut curves = Vec::new();
    for &w in &s.ws {
        let g = guidance(s, w)?;
        let curve = if cli.oracle { oracle_curve(s, &g)? } else { closed_curve(s, &g)? };
        if cli.validate && !cli.oracle {
            let keep = checkable(s, &g, &s.times)?;
            let mut sub = s.clone();
            sub.times = keep.iter().map(|&k| s.times[k]).collect();
            let reference = oracle_curve(&sub, &g)?;
            let gap = keep
                .iter()
                .zip(&reference.values)
                .map(|(&k, b)| (curve.values[k] - b).abs())
                .fold(0.0, f64::max);
            if gap > VALIDATE_TOL {
                return Err(CliError::Validation(format!("TV curve differs from the oracle by {gap:e} at w = {w}")));
            }
        }
        curves.push(curve);
    }
    let rows: Vec<_> = curves.iter().flat_map(tv_rows).collect();
    write_tv(&cli.out.join("tv.csv"), &rows)?;
    let at_t0: Vec<f64> = curves.iter().map(|c| c.log_at(t0).expect("t0 on grid")).collect();
    write_text(
        &cli.out.join("tv_vs_w.svg"),
        &svg::line_plot(&format!("{}: ln TV at t = {t0}", s.name), &s.ws, &at_t0),
    )?;
    let fit_curves: Vec<TVCurve> = curves.iter().filter(|c| c.w >= 2.0).cloned().collect();
    let fit = match decay_exponent_fit(&fit_curves, t0) {
        Ok(f) => json!({ "t0": t0, "fit": f }),
        Err(e) => {
            warn!("decay fit skipped: {e}");
            json!({ "t0": t0, "fit": null, "skipped": e.to_string() })
        }
    };
    write_json(&cli.out.join("decay_fit.json"), &fit)?;
    for (w, l) in s.ws.iter().zip(&at_t0) {
        println!("w = {w}: ln TV(t0 = {t0}) = {l:.6e}");
    }
    if let Some(slope) = fit["fit"]["slope"].as_f64() {
        println!("decay fit slope {slope:.6}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CellReport {
    coords: Vec<usize>,
    region: &'static str,
    weights: Vec<f64>,
    limit_weight: f64,
}

const REGION_COLORS: [(&str, &str); 5] = [
    ("R1", "#2b8cbe"),
    ("R2_1", "#7bccc4"),
    ("R2_2", "#bae4bc"),
    ("R3", "#fdae6b"),
    ("R4", "#e6550d"),
];

pub fn regions(cli: &Cli, s: &Scenario) -> CliResult<()> {
    if s.dims() != 2 {
        return Err(CliError::Config(format!("regions need D = 2, got D = {}", s.dims())));
    }
    let rd = region_decomposition_2d(&s.mixture, &s.guided_label)?;
    let mut members = BTreeMap::new();
    for r in Region::ALL {
        members.insert(r.name(), rd.member_coords(r));
    }
    let cells: Vec<CellReport> = rd
        .states
        .iter()
        .map(|st| CellReport {
            coords: st.coords.clone(),
            region: st.region.name(),
            weights: s.ws.iter().map(|&w| st.weight(w)).collect(),
            limit_weight: st.limit_weight(),
        })
        .collect();
    let limit = match limit_distribution_2d(&rd, &s.mixture) {
        Ok(d) => Some(d),
        Err(maskcfg::Error::DegenerateLimit) => {
            warn!("no R1 or R2 state: the large-guidance limit is degenerate");
            None
        }
        Err(e) => return Err(e.into()),
    };
    if cli.validate {
        if let Some(&w) = s.ws.iter().find(|&&w| w >= 0.0 && !rd.ordering_holds(w)) {
            return Err(CliError::Validation(format!("region weight ordering fails at w = {w}")));
        }
    }
    let report = json!({
        "guided_class": s.guided_label,
        "regions": members,
        "marginal_supports": rd.marginal_supports,
        "shared_marginals": rd.shared_marginals,
        "w": s.ws,
        "cells": cells,
        "limit_available": limit.is_some(),
    });
    write_json(&cli.out.join("regions.json"), &report)?;
    let k = s.mixture.space().alphabet() - 1;
    let mut classes = vec![None; k * k];
    for st in &rd.states {
        let slot = Region::ALL.iter().position(|&r| r == st.region).expect("known region");
        classes[(st.coords[0] - 1) * k + st.coords[1] - 1] = Some(slot);
    }
    write_text(
        &cli.out.join("regions.svg"),
        &svg::category_map(&format!("{}: regions of {}", s.name, s.guided_label), k, k, &classes, &REGION_COLORS),
    )?;
    if let Some(d) = &limit {
        write_limit(&cli.out.join("limit.csv"), d)?;
    }
    for r in Region::ALL {
        println!("{}: {:?}", r.name(), members[r.name()]);
    }
    Ok(())
}

pub struct SampleArgs {
    pub scheme: SchemeArg,
    pub n: usize,
    pub steps: usize,
    pub w: Option<f64>,
    pub compare_steps: Option<usize>,
}

fn exact_terminal(s: &Scenario, g: &GuidanceConfig) -> CliResult<DenseDistribution> {
    match s.dims() {
        1 => Ok(solve_1d_guided(&s.mixture, g, s.horizon, s.horizon)?),
        2 => Ok(sampled_distribution_2d(&s.mixture, g)?),
        _ => Ok(oracle_densities(s, g, &[s.horizon])?.remove(0)),
    }
}

pub fn sample(cli: &Cli, s: &Scenario, args: &SampleArgs) -> CliResult<()> {
    let w = args.w.unwrap_or(s.ws[0]);
    let g = guidance(s, w)?;
    let gen = guided_reverse(&s.mixture, &g)?;
    let run = |scheme: SchemeArg, steps: usize| -> CliResult<SampleBatch> {
        Ok(match scheme {
            SchemeArg::ExactEvent => sample_exact_event(&gen, s.horizon, args.n, cli.seed)?,
            SchemeArg::Uniformization => sample_uniformization(&gen, s.horizon, args.n, cli.seed)?,
            SchemeArg::TauLeaping => sample_tau_leaping(&gen, s.horizon, steps, args.n, cli.seed)?,
        })
    };
    let batch = run(args.scheme, args.steps)?;
    write_samples(&cli.out.join("samples.csv"), &batch)?;
    let exact = exact_terminal(s, &g)?;
    let tv_exact = tv(&empirical_distribution(&batch)?, &exact)?;
    let chi = chi_square_test(&batch.counts(), &exact, 1e-3).ok();
    let comparison = match args.compare_steps {
        Some(k) => {
            let other = run(SchemeArg::TauLeaping, k)?;
            let tv_other = tv(&empirical_distribution(&other)?, &exact)?;
            Some(json!({ "steps": k, "tv_to_exact": tv_other, "gap": tv_exact - tv_other }))
        }
        None => None,
    };
    let report = json!({
        "scheme": batch.scheme,
        "n": args.n,
        "seed": cli.seed,
        "w": w,
        "tv_to_exact": tv_exact,
        "chi_square": chi,
        "wall_time": batch.wall_time,
        "diagnostics": batch.diagnostics,
        "comparison": comparison,
    });
    write_json(&cli.out.join("sample_report.json"), &report)?;
    println!("{} n = {}: TV to the exact terminal law {tv_exact:.4e}", batch.scheme.name(), args.n);
    if let Some(c) = &comparison {
        println!("tau-leaping with {} steps: TV {:.4e}", c["steps"], c["tv_to_exact"].as_f64().unwrap_or(f64::NAN));
    }
    if cli.validate && args.scheme != SchemeArg::TauLeaping {
        if let Some(c) = chi {
            if !c.passes() {
                return Err(CliError::Validation(format!("chi-square p = {:.3e}", c.p_value)));
            }
        }
    }
    Ok(())
}

pub fn validate(cli: &Cli) -> CliResult<()> {
    let opts = ValidationOptions {
        quick: cli.quick,
        fault_injection: cli.inject_fault,
    };
    let reports = run_all(&opts);
    for r in &reports {
        println!("{}", r.line());
    }
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{}/{} criteria passed", reports.len() - failed.len(), reports.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("criteria {failed:?} failed")))
    }
}
