//! Subcommand implementations.

use crate::config::{load_run_config, load_sweep_config, RunConfig, SweepConfig, SystemKind};
use crate::csvio::{read_trace_csv, write_trace_csv, TraceTable};
use crate::manifest::RunManifest;
use crate::runner::{predicted_risk_curve, prepare_model, run_one};
use crate::svg::{render_stacked, SvgChart};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use slowfast_core::analysis::{extract_transition, fit_scaling, plateau_level, verify_scenario};
use slowfast_core::kernels::KernelPair;
use slowfast_core::trace::RiskTrace;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn hermite(function: &str, truncation: usize, out: Option<&Path>) -> Result<()> {
    let act = slowfast_core::activations::resolve_with_truncation(function, truncation)?;
    let series = act.series();
    let kp = KernelPair::new(series, series);
    let mut text = String::from("k,coeff\n");
    for (k, c) in series.coeffs().iter().enumerate() {
        text.push_str(&format!("{k},{c}\n"));
    }
    text.push_str(&format!("# norm_sq,{}\n", series.norm_sq()));
    text.push_str(&format!("# u_at_one,{}\n", kp.u_at_one()));
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Run one config into `out/` (trace.csv + manifest.json).
pub fn run_to_dir(cfg: &RunConfig, out: &Path) -> Result<TraceTable> {
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let table = run_one(cfg)?;
    let trace_path = out.join("trace.csv");
    write_trace_csv(&trace_path, &table)?;
    let manifest = RunManifest::new(
        cfg,
        cfg.seed,
        vec!["trace.csv".into()],
        started.elapsed().as_secs_f64() * 1e3,
    )?;
    manifest.write(&out.join("manifest.json"))?;
    Ok(table)
}

pub fn simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    checkpoint_every: Option<usize>,
) -> Result<()> {
    let mut cfg = load_run_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = checkpoint_every {
        cfg.checkpoint_every = Some(c);
    }
    let table = run_to_dir(&cfg, out)?;
    println!(
        "{}: {} samples, initial risk {:.6}, terminal risk {:.6} -> {}",
        cfg.system.as_str(),
        table.trace.len(),
        table.trace.risk.first().copied().unwrap_or(f64::NAN),
        table.trace.terminal_risk(),
        out.join("trace.csv").display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CellResult {
    value: f64,
    dir: String,
    terminal_risk: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paired_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling_sup_risk_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepFit {
    param: String,
    level: Option<usize>,
    exponent: f64,
    intercept: f64,
    r_squared: f64,
    /// For level-1 transitions: exponent after dividing out log(1/ε).
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_log_normalized: Option<f64>,
}

fn analyze_cell(
    sweep: &SweepConfig,
    cell_cfg: &RunConfig,
    table: &TraceTable,
    dir: &Path,
    value: f64,
) -> Result<CellResult> {
    let mut result = CellResult {
        value,
        dir: dir.display().to_string(),
        terminal_risk: table.trace.terminal_risk(),
        center: None,
        width: None,
        paired_distance: None,
        coupling_sup_risk_gap: None,
    };
    if let Some(tr) = &sweep.transition {
        let prep = prepare_model(cell_cfg)?;
        let from = plateau_level(&prep.model.phi, tr.level);
        let floor = table
            .trace
            .risk
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let to = plateau_level(&prep.model.phi, tr.level + 1).max(floor.max(1e-14));
        let (c, w) = extract_transition(&table.trace, from, to)?;
        result.center = Some(c);
        result.width = Some(w);
    }
    if sweep.paired_with_reduced {
        result.paired_distance = Some(paired_distance_for(cell_cfg)?);
    }
    if cell_cfg.system == SystemKind::Psgd {
        if let Some((_, col)) = table.extra.iter().find(|(n, _)| n == "risk_gap_gf") {
            result.coupling_sup_risk_gap = Some(col.iter().cloned().fold(0.0, f64::max));
        }
    }
    Ok(result)
}

/// Sup over sample times of the paired particle distance between the
/// mean-field run of `cfg` and the reduced flow from the same initialization.
fn paired_distance_for(cfg: &RunConfig) -> Result<f64> {
    use slowfast_core::flow::{
        init_meanfield, integrate_meanfield, integrate_reduced, paired_mean_square_distance,
        FlowConfig, MeanFieldSystem, ReducedState, ReducedSystem,
    };
    let prep = prepare_model(cfg)?;
    let st = init_meanfield::<f64>(cfg.m, &cfg.pa.to_law(), cfg.seed)?;
    let red0 = ReducedState::centered(st.a.clone());
    let fc = FlowConfig {
        eps: cfg.eps,
        t_end: cfg.t_end,
        rtol: cfg.rtol,
        atol: cfg.atol,
        max_step: None,
        seed: cfg.seed,
    };
    let grid = slowfast_core::trace::log_grid(cfg.t_start(), cfg.t_end, cfg.samples.min(100));
    let mf = integrate_meanfield(
        &MeanFieldSystem::new(prep.model.clone(), st.weights.clone(), cfg.eps),
        &st,
        &fc,
        &grid,
    )?;
    let red = integrate_reduced(
        &ReducedSystem::new(prep.model, cfg.m, cfg.eps),
        &red0,
        &fc,
        &grid,
    )?;
    let m = cfg.m;
    let mut sup = 0.0f64;
    for (ym, yr) in mf.states.iter().zip(&red.states) {
        sup = sup.max(paired_mean_square_distance(
            &ym[..m],
            &ym[m..2 * m],
            &yr[..m],
            &yr[m..2 * m],
        ));
    }
    Ok(sup)
}

pub fn sweep(config: &Path, out: &Path, jobs: Option<usize>) -> Result<()> {
    let sweep = load_sweep_config(config)?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or_else(num_cpus))
        .build()?;

    let cells: Vec<(usize, f64)> = sweep.values.iter().cloned().enumerate().collect();
    let results: Vec<(usize, f64, Result<CellResult>)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(idx, value)| {
                let run = (|| -> Result<CellResult> {
                    let cell_cfg = sweep.cell(value)?;
                    let dir = out.join(format!("cell_{idx:02}_{}_{value:e}", sweep.param.as_str()));
                    let table = run_to_dir(&cell_cfg, &dir)?;
                    analyze_cell(&sweep, &cell_cfg, &table, &dir, value)
                })();
                (idx, value, run)
            })
            .collect()
    });

    let mut ok: Vec<&CellResult> = Vec::new();
    let mut failures = Vec::new();
    for (idx, value, res) in &results {
        match res {
            Ok(cell) => ok.push(cell),
            Err(e) => failures.push(serde_json::json!({
                "cell": idx, "value": value, "error": format!("{e:#}")
            })),
        }
    }
    ok.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());

    let mut agg = String::from(
        "value,terminal_risk,center,width,paired_distance,coupling_sup_risk_gap,dir\n",
    );
    for c in &ok {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        agg.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.value,
            c.terminal_risk,
            opt(c.center),
            opt(c.width),
            opt(c.paired_distance),
            opt(c.coupling_sup_risk_gap),
            c.dir
        ));
    }
    std::fs::write(out.join("aggregated.csv"), agg)?;
    if !failures.is_empty() {
        std::fs::write(
            out.join("failures.json"),
            serde_json::to_string_pretty(&failures)?,
        )?;
        log::warn!("{} sweep cell(s) failed; see failures.json", failures.len());
    }

    // scaling fit when enough transition centers were extracted
    let centers: Vec<(f64, f64)> = ok
        .iter()
        .filter_map(|c| c.center.map(|t| (c.value, t)))
        .collect();
    if centers.len() >= 4 {
        let eps: Vec<f64> = centers.iter().map(|p| p.0).collect();
        let times: Vec<f64> = centers.iter().map(|p| p.1).collect();
        let fit = fit_scaling(&eps, &times)?;
        let level = sweep.transition.as_ref().map(|t| t.level);
        let exponent_log_normalized = if level == Some(1) {
            let norm: Vec<f64> = centers.iter().map(|(e, t)| t / (1.0 / e).ln()).collect();
            Some(fit_scaling(&eps, &norm)?.exponent)
        } else {
            None
        };
        let report = SweepFit {
            param: sweep.param.as_str().into(),
            level,
            exponent: fit.exponent,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            exponent_log_normalized,
        };
        std::fs::write(out.join("fit.json"), serde_json::to_string_pretty(&report)?)?;
        println!(
            "sweep fit: exponent {:.4} (r² {:.4}){}",
            report.exponent,
            report.r_squared,
            report
                .exponent_log_normalized
                .map_or(String::new(), |e| format!(", log-normalized {e:.4}")),
        );
    }
    println!(
        "{} cells ok, {} failed -> {}",
        ok.len(),
        failures.len(),
        out.join("aggregated.csv").display()
    );
    Ok(())
}

fn num_cpus() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn asymptotics(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_run_config(config)?;
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let (grid, curve) = predicted_risk_curve(&cfg)?;
    let mut text = String::from("t,predicted_risk\n");
    for (t, r) in grid.iter().zip(&curve) {
        text.push_str(&format!("{t},{r}\n"));
    }
    let path = out.join("predicted.csv");
    std::fs::write(&path, text)?;
    RunManifest::new(
        &cfg,
        cfg.seed,
        vec!["predicted.csv".into()],
        started.elapsed().as_secs_f64() * 1e3,
    )?
    .write(&out.join("manifest.json"))?;
    println!("predicted risk curve -> {}", path.display());
    Ok(())
}

struct LoadedRun {
    dir: PathBuf,
    config: RunConfig,
    table: TraceTable,
}

fn load_runs(dirs: &[PathBuf]) -> Result<Vec<LoadedRun>> {
    dirs.iter()
        .map(|dir| {
            let manifest = RunManifest::read(&dir.join("manifest.json"))?;
            let config: RunConfig = serde_json::from_value(manifest.config.clone())
                .with_context(|| format!("config embedded in {}", dir.display()))?;
            let table = read_trace_csv(&dir.join("trace.csv"))?;
            Ok(LoadedRun {
                dir: dir.clone(),
                config,
                table,
            })
        })
        .collect()
}

pub fn analyze(runs: &[PathBuf], level: usize, out: &Path) -> Result<()> {
    let loaded = load_runs(runs)?;
    if loaded.is_empty() {
        bail!("no runs given");
    }
    std::fs::create_dir_all(out)?;
    let prep = prepare_model(&loaded[0].config)?;
    let pairs: Vec<(f64, &RiskTrace)> = loaded
        .iter()
        .map(|r| (r.config.eps, &r.table.trace))
        .collect();
    let verdict = verify_scenario(&pairs, &prep.model.phi, level)?;
    std::fs::write(
        out.join("verdict.json"),
        serde_json::to_string_pretty(&verdict)?,
    )?;

    // per-(ε, level) evidence rows
    let mut evidence = String::from("eps,level,center,width,expected_center_exponent\n");
    for r in &loaded {
        for l in 1..=level {
            let from = plateau_level(&prep.model.phi, l);
            let floor = r
                .table
                .trace
                .risk
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let to = plateau_level(&prep.model.phi, l + 1).max(floor.max(1e-14));
            if to >= from {
                continue;
            }
            if let Ok((c, w)) = extract_transition(&r.table.trace, from, to) {
                let expected = if l == 1 { 0.5 } else { 1.0 / (2.0 * l as f64) };
                evidence.push_str(&format!("{},{l},{c},{w},{expected}\n", r.config.eps));
            }
        }
    }
    std::fs::write(out.join("evidence.csv"), evidence)?;

    println!(
        "scenario holds up to level {} -> {}",
        verdict.holds_up_to_level,
        out.join("verdict.json").display()
    );
    for lv in &verdict.levels {
        println!(
            "  level {}: plateau {} (err {}), center exponent {} (expected {:.3}) -> {}",
            lv.level,
            if lv.plateau_found { "found" } else { "missing" },
            lv.level_error
                .map_or("-".into(), |e| format!("{:.2}%", 100.0 * e)),
            lv.center_exponent
                .map_or("-".into(), |e| format!("{e:.3}")),
            lv.expected_center_exponent,
            if lv.passed { "pass" } else { "fail" },
        );
    }
    Ok(())
}

pub fn plot(runs: &[PathBuf], overlay: bool, panels: bool, out: &Path) -> Result<()> {
    let loaded = load_runs(runs)?;
    if loaded.is_empty() {
        bail!("no runs given");
    }
    let mut charts = Vec::new();
    let mut risk_chart = SvgChart::new("population risk", "t", "risk");
    risk_chart.log_y = true;
    let mut max_gap: Option<f64> = None;
    for r in &loaded {
        let label = format!("{} eps={:.0e}", r.config.system.as_str(), r.config.eps);
        risk_chart.push_series(label, r.table.trace.times.clone(), r.table.trace.risk.clone());
        if overlay {
            let (grid, curve) = predicted_risk_curve(&r.config)?;
            // vertical gap on the shared grid (risk traces use the same grid)
            let gap = r
                .table
                .trace
                .risk
                .iter()
                .zip(&curve)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            max_gap = Some(max_gap.map_or(gap, |g: f64| g.max(gap)));
            risk_chart.push_dashed(
                format!("predicted eps={:.0e}", r.config.eps),
                grid,
                curve,
            );
        }
    }
    charts.push(risk_chart);

    if panels {
        for r in &loaded {
            if r.table.a_cols.is_empty() {
                bail!(
                    "{} has no state columns; rerun with \"dump_state\": true",
                    r.dir.display()
                );
            }
            let m = r.table.a_cols[0].len();
            let mut a_chart = SvgChart::new(
                format!("a_i(t), eps={:.0e}", r.config.eps),
                "t",
                "a_i",
            );
            let mut s_chart = SvgChart::new(
                format!("s_i(t), eps={:.0e}", r.config.eps),
                "t",
                "s_i",
            );
            for i in 0..m {
                let a: Vec<f64> = r.table.a_cols.iter().map(|row| row[i]).collect();
                let s: Vec<f64> = r.table.s_cols.iter().map(|row| row[i]).collect();
                a_chart.push_series(format!("a_{i}"), r.table.trace.times.clone(), a);
                s_chart.push_series(format!("s_{i}"), r.table.trace.times.clone(), s);
            }
            charts.push(a_chart);
            charts.push(s_chart);
        }
    }

    let svg = if charts.len() == 1 {
        charts[0].render()
    } else {
        render_stacked(&charts)
    };
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    if let Some(gap) = max_gap {
        let manifest_path = out.with_extension("json");
        std::fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&serde_json::json!({
                "plot": out.display().to_string(),
                "max_overlay_gap": gap,
            }))?,
        )?;
        println!("max overlay gap {gap:.4} -> {}", manifest_path.display());
    }
    println!("plot -> {}", out.display());
    Ok(())
}

/// Config of the running example: the degree-2 target with ReLU activation.
pub fn example_config(eps: f64, m: usize, t_end: f64, seed: u64) -> RunConfig {
    RunConfig {
        system: SystemKind::Meanfield,
        phi: "poly:1,-1,0.6666666666666666".into(),
        sigma: "relu".into(),
        eps,
        m,
        d: None,
        level: None,
        simplified_mode: None,
        t_end,
        t_start: None,
        rtol: 1e-9,
        atol: 1e-12,
        pa: crate::config::PaSelector::Rademacher,
        seed,
        samples: 400,
        truncation: 16,
        eta: None,
        n_steps: None,
        checkpoint_every: None,
        dump_state: false,
    }
}

pub fn reproduce_figure(
    figure: u8,
    out: &Path,
    jobs: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    // a mean-negative Rademacher draw reaches a lower terminal plateau
    let seed = seed.unwrap_or(2);
    match figure {
        1 => {
            let cfg = example_config(1e-6, 10, 5.0, seed);
            let (grid, curve) = predicted_risk_curve(&cfg)?;
            let mut chart = SvgChart::new(
                "piecewise plateau prediction (time scales 1-3)",
                "t",
                "risk",
            );
            chart.log_y = true;
            chart.push_series("predicted risk", grid.clone(), curve);
            for (label, level) in [("1/2 Σ_{k≥1} φ_k²", 13.0 / 18.0), ("1/2 Σ_{k≥2} φ_k²", 2.0 / 9.0)]
            {
                chart.push_dashed(label, grid.clone(), vec![level; grid.len()]);
            }
            let path = out.join("fig1.svg");
            std::fs::write(&path, chart.render())?;
            println!("figure 1 -> {}", path.display());
        }
        2 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or_else(num_cpus).min(2))
                .build()?;
            let configs = [
                ("eps1e-3", example_config(1e-3, 10, 30.0, seed)),
                ("eps1e-6", example_config(1e-6, 10, 5.0, seed)),
            ];
            let tables: Vec<Result<TraceTable>> = pool.install(|| {
                use rayon::prelude::*;
                configs
                    .par_iter()
                    .map(|(name, cfg)| run_to_dir(cfg, &out.join(format!("fig2_{name}"))))
                    .collect()
            });
            let mut charts = Vec::new();
            for ((name, _cfg), table) in configs.iter().zip(tables) {
                let table = table?;
                let mut linear = SvgChart::new(format!("risk ({name})"), "t", "risk");
                linear.log_y = false;
                linear.push_series("risk", table.trace.times.clone(), table.trace.risk.clone());
                let mut logc = SvgChart::new(format!("risk, log scale ({name})"), "t", "risk");
                logc.log_y = true;
                logc.push_series("risk", table.trace.times.clone(), table.trace.risk.clone());
                let mut comps = SvgChart::new(format!("risk components ({name})"), "t", "comp_k");
                comps.log_y = true;
                for k in 0..3usize {
                    let col: Vec<f64> = table.trace.components.iter().map(|c| c[k]).collect();
                    comps.push_series(format!("degree {k}"), table.trace.times.clone(), col);
                }
                charts.extend([linear, logc, comps]);
            }
            let path = out.join("fig2.svg");
            std::fs::write(&path, render_stacked(&charts))?;
            println!("figure 2 -> {}", path.display());
        }
        3 => {
            let mut cfg = example_config(1e-6, 10, 5.0, seed);
            cfg.dump_state = true;
            let dir = out.join("fig3_run");
            run_to_dir(&cfg, &dir)?;
            plot(&[dir], false, true, &out.join("fig3.svg"))?;
            println!("figure 3 -> {}", out.join("fig3.svg").display());
        }
        other => bail!("unknown figure {other}; expected 1, 2 or 3"),
    }
    Ok(())
}
