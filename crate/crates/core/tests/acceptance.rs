//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (visible under `--nocapture`).
//!
//! Shared expensive runs (the ε ladder of mean-field integrations) are
//! computed once and reused across criteria.

use slowfast_core::activations;
use slowfast_core::analysis::{
    detect_plateaus, extract_transition, fit_scaling, match_levels, plateau_level,
    MIN_SPAN_DECADES_DEFAULT, SLOPE_TOL_DEFAULT,
};
use slowfast_core::asymptotics::{predicted_risk, AsymptoticParams};
use slowfast_core::flow::{
    init_full, init_meanfield, integrate_full, integrate_meanfield, integrate_reduced,
    integrate_simplified, paired_mean_square_distance, risk_full, risk_meanfield,
    FlowConfig, FlowRun, FlowSystem, FullState, FullSystem, MeanFieldState, MeanFieldSystem,
    Model, ReducedState, ReducedSystem, SimplifiedInit, SimplifiedState, SimplifiedSystem,
    WeightLaw,
};
use slowfast_core::scalar::dot;
use slowfast_core::sgd::{psgd_step, run_psgd, SgdConfig, SgdState};
use slowfast_core::trace::{log_grid_as, RiskTrace};
use std::sync::OnceLock;
use std::time::Instant;

const P1: f64 = 13.0 / 18.0;
const P2: f64 = 2.0 / 9.0;

fn example_model() -> Model<f64> {
    Model::new(
        activations::example_target().series_as(),
        activations::relu(16).series_as(),
    )
}

fn uniform_law() -> WeightLaw {
    WeightLaw::Uniform { lo: -2.0, hi: 2.0 }
}

/// Mean-field run of the running example at (eps, t_end).
fn meanfield_run(eps: f64, t_end: f64, m: usize, seed: u64) -> FlowRun<f64> {
    let st = init_meanfield::<f64>(m, &uniform_law(), seed).unwrap();
    let sys = MeanFieldSystem::new(example_model(), st.weights.clone(), eps);
    let cfg = FlowConfig::new(eps, t_end).with_tols(1e-9, 1e-12);
    let grid = log_grid_as::<f64>(eps * 1e-3, t_end, 400);
    integrate_meanfield(&sys, &st, &cfg, &grid).unwrap()
}

/// ε ladder shared by criteria 2, 3 and 12: horizons reach past the level-2
/// transition (center ≈ 2.5 ε^{1/4} for this model).
fn ladder() -> &'static Vec<(f64, RiskTrace)> {
    static LADDER: OnceLock<Vec<(f64, RiskTrace)>> = OnceLock::new();
    LADDER.get_or_init(|| {
        [1e-4, 1e-5, 1e-6, 1e-7, 1e-8]
            .into_iter()
            .map(|eps: f64| {
                let t_end = 6.0 * eps.powf(0.25);
                (eps, meanfield_run(eps, t_end, 10, 1).trace)
            })
            .collect()
    })
}

fn level_center(trace: &RiskTrace, level: usize) -> Option<(f64, f64)> {
    let phi = example_model().phi;
    let from = plateau_level(&phi, level);
    let floor = trace.risk.iter().cloned().fold(f64::INFINITY, f64::min);
    let to = plateau_level(&phi, level + 1).max(floor.max(1e-14));
    if to >= from {
        return None;
    }
    extract_transition(trace, from, to).ok()
}

/// Deterministic near-unit atoms: Rademacher-like magnitudes whose distinct
/// values avoid the particle-permutation lock of exactly repeated atoms (see
/// the paired-atom note in the README).
fn paired_atoms() -> WeightLaw {
    WeightLaw::Atoms(vec![0.97, -0.97, 0.99, -0.99, 1.01, -1.01, 1.03, -1.03, 1.05, -1.05])
}

fn figure2_run(eps: f64, t_end: f64) -> FlowRun<f64> {
    let st = init_meanfield::<f64>(10, &paired_atoms(), 1).unwrap();
    let sys = MeanFieldSystem::new(example_model(), st.weights.clone(), eps);
    let cfg = FlowConfig::new(eps, t_end).with_tols(1e-9, 1e-12);
    let grid = log_grid_as::<f64>(eps * 1e-3, t_end, 400);
    integrate_meanfield(&sys, &st, &cfg, &grid).unwrap()
}

fn matched_plateau_levels(runs: &[&FlowRun<f64>]) -> Vec<(usize, f64)> {
    let phi = example_model().phi;
    let mut out = Vec::new();
    for run in runs {
        let segs =
            detect_plateaus(&run.trace, SLOPE_TOL_DEFAULT, MIN_SPAN_DECADES_DEFAULT).unwrap();
        let rep = match_levels(segs, &phi, 0.05);
        for seg in &rep.segments {
            if let Some(l) = seg.matched_degree {
                out.push((l, seg.level_value));
            }
        }
    }
    out
}

#[test]
fn criterion_01_figure2_reproduction() {
    let started = Instant::now();
    let coarse = figure2_run(1e-3, 30.0);
    let fine = figure2_run(1e-6, 5.0);
    let matched = matched_plateau_levels(&[&coarse, &fine]);

    let terminal = fine.trace.terminal_risk();
    assert!(terminal <= 0.02, "terminal risk {terminal} > 0.02 at eps=1e-6");
    let wall = started.elapsed().as_secs_f64();
    assert!(wall <= 60.0, "runtime {wall:.1}s exceeds 1 min");
    println!(
        "criterion 1 (partial): terminal risk {terminal:.2e} ≤ 0.02, runtime {wall:.1}s, matched plateaus {matched:?}"
    );

    let p1_match = matched.iter().find(|(l, _)| *l == 1);
    assert!(p1_match.is_some(), "no plateau matched 13/18: {matched:?}");
    let (_, v1) = p1_match.unwrap();
    assert!((v1 - P1).abs() / P1 <= 0.05, "level {v1} vs 13/18");
    println!("criterion 1 (partial): plateau {v1:.4} matches 13/18 = {P1:.4}");

    // At eps = 1e-6 the degree-2 erosion starts before the degree-1 residual
    // finishes: the flattest stretch sits ~6% below 2/9 for every admissible
    // initialization tried, so this clause fails at the pinned ε; the
    // supplement test shows the identical pipeline resolves the plateau to
    // within 5% at eps ≤ 1e-7. Kept faithful to the stated criterion.
    let p2_match = matched.iter().find(|(l, _)| *l == 2);
    assert!(
        p2_match.is_some(),
        "criterion 1 FAIL (known): no detected plateau within 5% of 2/9 at eps ∈ {{1e-3, 1e-6}}; \
         the flattest shelf at eps=1e-6 sits ≈0.208 (6% low) because the level-2 drop overlaps \
         the level-1 transition at this ε; see criterion_01_supplement_plateau_resolves_in_eps. \
         matched: {matched:?}"
    );
    let (_, v2) = p2_match.unwrap();
    assert!((v2 - P2).abs() / P2 <= 0.05, "level {v2} vs 2/9");
    println!("criterion 1 PASS: plateaus {v1:.4} and {v2:.4}, terminal {terminal:.2e}, runtime {wall:.1}s");
}

/// Not a criterion: demonstrates that the 2/9-plateau clause of criterion 1
/// is ε-limited, not implementation-limited. The same model, init family and
/// detector resolve both plateau levels within 5% once ε ≤ 1e-7.
#[test]
fn criterion_01_supplement_plateau_resolves_in_eps() {
    let run = figure2_run(1e-7, 0.5);
    let matched = matched_plateau_levels(&[&run]);
    let v1 = matched
        .iter()
        .find(|(l, _)| *l == 1)
        .map(|(_, v)| *v)
        .expect("13/18 plateau");
    let v2 = matched
        .iter()
        .find(|(l, _)| *l == 2)
        .map(|(_, v)| *v)
        .expect("2/9 plateau");
    assert!((v1 - P1).abs() / P1 <= 0.05);
    assert!((v2 - P2).abs() / P2 <= 0.05, "level {v2} vs 2/9");
    assert!(run.trace.terminal_risk() <= 0.02);
    println!(
        "criterion 1 supplement PASS: at eps=1e-7 plateaus {v1:.4} (13/18) and {v2:.4} (2/9) match within 5%"
    );
}

#[test]
fn criterion_02_level1_transition_law() {
    let started = Instant::now();
    let runs = ladder();
    let mut eps_v = Vec::new();
    let mut centers = Vec::new();
    for (eps, trace) in runs {
        let (c, _) = level_center(trace, 1).expect("level-1 transition present");
        eps_v.push(*eps);
        centers.push(c);
    }
    // the level-1 center carries the log(1/ε) factor; divide it out
    let normalized: Vec<f64> = centers
        .iter()
        .zip(&eps_v)
        .map(|(&c, &e)| c / (1.0f64 / e).ln())
        .collect();
    let fit = fit_scaling(&eps_v, &normalized).unwrap();
    assert!(
        (fit.exponent - 0.5).abs() <= 0.05,
        "center exponent {} outside 0.50 ± 0.05",
        fit.exponent
    );
    // prefactor at the smallest ε: center/(√ε log(1/ε)) vs 1/(4|σ_1φ_1|) = 0.5
    let (eps_min, c_min) = (eps_v[eps_v.len() - 1], centers[centers.len() - 1]);
    let ratio = c_min / (eps_min.sqrt() * (1.0f64 / eps_min).ln());
    let target = 0.5;
    assert!(
        (ratio - target).abs() / target <= 0.20,
        "prefactor {ratio:.4} outside 20% of {target}"
    );
    let wall = started.elapsed().as_secs_f64();
    assert!(wall <= 300.0, "runtime {wall:.0}s exceeds 5 min");
    println!(
        "criterion 2 PASS: level-1 exponent {:.4} (log-normalized), prefactor {ratio:.4} vs 0.5, runtime {wall:.0}s",
        fit.exponent
    );
}

#[test]
fn criterion_03_level2_transition_exponent() {
    let runs = ladder();
    let mut eps_v = Vec::new();
    let mut centers = Vec::new();
    for (eps, trace) in runs {
        let (c, _) = level_center(trace, 2).expect("level-2 transition present");
        eps_v.push(*eps);
        centers.push(c);
    }
    let fit = fit_scaling(&eps_v, &centers).unwrap();
    assert!(
        (fit.exponent - 0.25).abs() <= 0.05,
        "center exponent {} outside 0.25 ± 0.05",
        fit.exponent
    );
    println!(
        "criterion 3 PASS: level-2 exponent {:.4} (c_2 fitted {:.2})",
        fit.exponent,
        fit.intercept.exp()
    );
}

fn simplified_half_crossing(level: usize, eps: f64, seed: u64) -> (f64, f64) {
    let st = SimplifiedState::<f64>::init(8, level, eps, SimplifiedInit::Aligned, 1.0, seed);
    let sys = SimplifiedSystem::new(&st, 1.0, 1.0);
    let lf = level as f64;
    let tau_end = 40.0 * eps.powf(-(lf - 1.0) / (2.0 * lf * (lf + 1.0)));
    let cfg = FlowConfig::new(eps, tau_end).with_tols(1e-10, 1e-13);
    let grid = log_grid_as::<f64>(1e-3, tau_end, 3000);
    let run = integrate_simplified(&sys, &st, &cfg, &grid).unwrap();
    let half = 0.25; // half of φ_l²/2 with φ_l = 1
    let tau_half = run
        .times
        .iter()
        .zip(&run.trace.risk)
        .find(|(_, &r)| r < half)
        .map(|(&t, _)| t)
        .expect("risk crosses half");
    let t10 = run
        .times
        .iter()
        .zip(&run.trace.risk)
        .find(|(_, &r)| r < 0.45)
        .map(|(&t, _)| t)
        .unwrap();
    let t90 = run
        .times
        .iter()
        .zip(&run.trace.risk)
        .find(|(_, &r)| r < 0.05)
        .map(|(&t, _)| t)
        .unwrap();
    (tau_half, t90 - t10)
}

#[test]
fn criterion_04_simplified_model_theorem() {
    for (level, ladder, mu) in [
        (2usize, vec![1e-8, 1e-11, 1e-14, 1e-17, 1e-20], 0.25),
        (3, vec![1e-12, 1e-16, 1e-20, 1e-24, 1e-28], 1.0 / 6.0),
    ] {
        let mut t_half = Vec::new();
        let mut widths = Vec::new();
        for &eps in &ladder {
            let (tau, width) = simplified_half_crossing(level, eps, 3);
            let nu = 1.0 / (level as f64 + 1.0);
            t_half.push(eps.powf(nu) * tau);
            widths.push(width);
        }
        let fit = fit_scaling(&ladder, &t_half).unwrap();
        let rel = (fit.exponent - mu).abs() / mu;
        assert!(
            rel <= 0.15,
            "level {level}: exponent {} vs μ = {mu} ({:.0}% off)",
            fit.exponent,
            100.0 * rel
        );
        let wmax = widths.iter().cloned().fold(0.0f64, f64::max);
        let wmin = widths.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            wmax / wmin <= 2.0,
            "level {level}: τ-widths vary by {:.2}x: {widths:?}",
            wmax / wmin
        );
        println!(
            "criterion 4 PASS (level {level}): t-exponent {:.4} vs μ = {mu:.4}, τ-width spread {:.2}x",
            fit.exponent,
            wmax / wmin
        );
    }

    // case (c): opposed initialization drives the overlap to zero
    let level = 2usize;
    let eps = 1e-8f64;
    let st = SimplifiedState::<f64>::init(6, level, eps, SimplifiedInit::Opposed, 1.0, 5);
    let sys = SimplifiedSystem::new(&st, 1.0, 1.0);
    let tau_end = 50.0 * eps.powf(-1.0 / 12.0);
    let cfg = FlowConfig::new(eps, tau_end).with_tols(1e-10, 1e-13);
    let run = integrate_simplified(&sys, &st, &cfg, &[tau_end]).unwrap();
    let final_s = sys
        .decode(run.states.last().unwrap())
        .s_tilde
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let threshold = 0.1 * eps.powf(1.0 / (2.0 * level as f64 * (level as f64 + 1.0)));
    assert!(
        final_s <= threshold,
        "case (c): |s̃| = {final_s:e} above 0.1 ε^(1/2l(l+1)) = {threshold:e}"
    );
    println!("criterion 4 PASS (case c): terminal |s̃| = {final_s:.2e} ≤ {threshold:.2e}");
}

#[test]
fn criterion_05_conserved_quantity() {
    let level = 2usize;
    let eps = 1e-8f64;
    let st = SimplifiedState::<f64>::init(8, level, eps, SimplifiedInit::Aligned, 1.0, 12);
    let sys = SimplifiedSystem::new(&st, 1.0, 1.0);
    let tau_end = 30.0 * eps.powf(-1.0 / 12.0);
    let cfg = FlowConfig::new(eps, tau_end).with_tols(1e-10, 1e-14);
    let grid: Vec<f64> = (1..=40).map(|i| tau_end * i as f64 / 40.0).collect();
    let run = integrate_simplified(&sys, &st, &cfg, &grid).unwrap();
    let q0 = st.conserved();
    let mut worst = 0.0f64;
    for y in &run.states {
        for (q, q0) in sys.decode(y).conserved().iter().zip(&q0) {
            worst = worst.max((q - q0).abs());
        }
    }
    assert!(worst <= 1e-8, "conserved-quantity drift {worst:e}");
    println!("criterion 5 PASS: max per-particle drift {worst:.2e} ≤ 1e-8");
}

#[test]
fn criterion_06_reduction_consistency() {
    // (a) full-d vs reduced from matched Gram data
    for d in [500usize, 2000] {
        let model = example_model();
        let (m, eps, t_end) = (6, 0.1, 2.0);
        let full0 = init_full::<f64>(m, d, &WeightLaw::Rademacher, 11).unwrap();
        let red0 = ReducedState::from_full(&full0);
        let cfg = FlowConfig::new(eps, t_end).with_tols(1e-9, 1e-12);
        let grid = log_grid_as::<f64>(1e-3, t_end, 50);
        let frun = integrate_full(&FullSystem::new(model.clone(), &full0, eps), &full0, &cfg, &grid)
            .unwrap();
        let rrun =
            integrate_reduced(&ReducedSystem::new(model, m, eps), &red0, &cfg, &grid).unwrap();
        let gap = frun
            .trace
            .risk
            .iter()
            .zip(&rrun.trace.risk)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-6, "d = {d}: risk gap {gap:e}");
        println!("criterion 6 PASS (full vs reduced, d={d}): sup risk gap {gap:.2e} ≤ 1e-6");
    }

    // (b) reduced vs mean-field paired distance decreasing over m
    let model = example_model();
    let (eps, t_end) = (0.1, 5.0);
    let a_pool = init_meanfield::<f64>(80, &WeightLaw::Rademacher, 7).unwrap().a;
    let mut sups = Vec::new();
    for m in [10usize, 20, 40, 80] {
        let a: Vec<f64> = a_pool[..m].to_vec();
        let mf0 = MeanFieldState::uniform(a.clone());
        let red0 = ReducedState::centered(a);
        let cfg = FlowConfig::new(eps, t_end).with_tols(1e-9, 1e-12);
        let grid = log_grid_as::<f64>(1e-3, t_end, 60);
        let mfr = integrate_meanfield(
            &MeanFieldSystem::new(model.clone(), mf0.weights.clone(), eps),
            &mf0,
            &cfg,
            &grid,
        )
        .unwrap();
        let rer = integrate_reduced(&ReducedSystem::new(model.clone(), m, eps), &red0, &cfg, &grid)
            .unwrap();
        let mut sup = 0.0f64;
        for (ym, yr) in mfr.states.iter().zip(&rer.states) {
            sup = sup.max(paired_mean_square_distance(
                &ym[..m],
                &ym[m..2 * m],
                &yr[..m],
                &yr[m..2 * m],
            ));
        }
        sups.push((m, sup));
    }
    for w in sups.windows(2) {
        assert!(
            w[1].1 < w[0].1,
            "paired distance not decreasing: {sups:?}"
        );
    }
    println!(
        "criterion 6 PASS (reduced vs mean-field): paired distances {:?} decrease over m",
        sups.iter()
            .map(|(m, s)| format!("m={m}: {s:.2e}"))
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_07_gradient_correctness() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let model = example_model();
    let h = 1e-6;
    let tol = 1e-5;
    for case in 0..20 {
        let m = 3 + (case % 3);
        // shared random particle data
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.8..0.8)).collect();

        // full system: ε ∂a = -m ∂R/∂a, ∂u = -m (I - uuᵀ)∇R
        let d = 12;
        let full = init_full::<f64>(m, d, &WeightLaw::Rademacher, 1000 + case as u64).unwrap();
        let mut full = FullState { a: a.clone(), ..full };
        full.a = a.clone();
        let eps = 0.31;
        let fsys = FullSystem::new(model.clone(), &full, eps);
        let y = full.to_flat();
        let mut dy = vec![0.0; y.len()];
        let mut sc = fsys.new_scratch();
        fsys.rhs(&y, &mut dy, &mut sc);
        let risk_of = |y: &[f64]| {
            risk_full(&fsys.decode(y), &model.kernels, model.phi_norm_sq())
        };
        for i in 0..m {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let g = (risk_of(&yp) - risk_of(&ym)) / (2.0 * h);
            assert!(
                (dy[i] + m as f64 * g / eps).abs() < tol,
                "case {case} full a-block"
            );
        }
        for i in 0..m {
            let mut grad = vec![0.0; d];
            for t in 0..d {
                let idx = m + i * d + t;
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[idx] += h;
                ym[idx] -= h;
                grad[t] = (risk_of(&yp) - risk_of(&ym)) / (2.0 * h);
            }
            let ui = full.row(i);
            let radial = dot(&grad, ui);
            for t in 0..d {
                let expect = -(m as f64) * (grad[t] - radial * ui[t]);
                assert!(
                    (dy[m + i * d + t] - expect).abs() < tol,
                    "case {case} full u-block"
                );
            }
        }

        // reduced system: finite differences through a full-state realization
        let red = ReducedState::from_full(&full);
        let rsys = ReducedSystem::new(model.clone(), m, eps);
        let yr = red.to_flat();
        let mut dyr = vec![0.0; yr.len()];
        let mut scr = rsys.new_scratch();
        rsys.rhs(&yr, &mut dyr, &mut scr);
        // ds_i = <u_*, du_i>, dr_ij = <du_i, u_j> + <u_i, du_j> with du from
        // the FD-verified full flow
        let du = &dy[m..];
        for i in 0..m {
            let dui = &du[i * d..(i + 1) * d];
            let ds = dot(&full.u_star, dui);
            assert!((dyr[m + i] - ds).abs() < tol, "case {case} reduced s-block");
            for j in (i + 1)..m {
                let duj = &du[j * d..(j + 1) * d];
                let dr = dot(dui, full.row(j)) + dot(full.row(i), duj);
                let idx = 2 * m + slowfast_core::flow::pair_index(m, i, j);
                assert!((dyr[idx] - dr).abs() < tol, "case {case} reduced R-block");
            }
        }

        // mean-field system with the (1 - s²) metric factor
        let weights = vec![1.0 / m as f64; m];
        let msys = MeanFieldSystem::new(model.clone(), weights.clone(), eps);
        let mut ymf: Vec<f64> = a.clone();
        ymf.extend(&s);
        let mut dymf = vec![0.0; 2 * m];
        let mut scm = msys.new_scratch();
        msys.rhs(&ymf, &mut dymf, &mut scm);
        let risk_mf = |y: &[f64]| {
            risk_meanfield(&msys.decode(y), &model.kernels, model.phi_norm_sq())
        };
        for i in 0..m {
            let mut yp = ymf.clone();
            let mut ym2 = ymf.clone();
            yp[i] += h;
            ym2[i] -= h;
            let g = (risk_mf(&yp) - risk_mf(&ym2)) / (2.0 * h);
            assert!(
                (dymf[i] + g / (weights[i] * eps)).abs() < tol,
                "case {case} mf a-block"
            );
            let mut yp = ymf.clone();
            let mut ym2 = ymf.clone();
            yp[m + i] += h;
            ym2[m + i] -= h;
            let g = (risk_mf(&yp) - risk_mf(&ym2)) / (2.0 * h);
            let metric = 1.0 - s[i] * s[i];
            assert!(
                (dymf[m + i] + metric * g / weights[i]).abs() < tol,
                "case {case} mf s-block"
            );
        }

        // simplified system with its metric factors
        let level = 2 + (case % 2);
        let st = SimplifiedState {
            a_tilde: a.clone(),
            s_tilde: s.clone(),
            weights: weights.clone(),
            level,
            eps: 1e-4,
        };
        let ssys = SimplifiedSystem::new(&st, 0.8, 0.5);
        let ys = st.to_flat();
        let mut dys = vec![0.0; 2 * m];
        let mut scs = ssys.new_scratch();
        ssys.rhs(&ys, &mut dys, &mut scs);
        let risk_l = |y: &[f64]| {
            let gap = 0.5 - 0.8 * ssys.moment(y);
            0.5 * gap * gap
        };
        let e2b = 1e-4f64.powf(1.0 / (level as f64 + 1.0));
        for i in 0..m {
            let mut yp = ys.clone();
            let mut ym2 = ys.clone();
            yp[i] += h;
            ym2[i] -= h;
            let g = (risk_l(&yp) - risk_l(&ym2)) / (2.0 * h);
            assert!(
                (dys[i] + g / weights[i]).abs() < tol,
                "case {case} simplified a-block"
            );
            let mut yp = ys.clone();
            let mut ym2 = ys.clone();
            yp[m + i] += h;
            ym2[m + i] -= h;
            let g = (risk_l(&yp) - risk_l(&ym2)) / (2.0 * h);
            let metric = 1.0 - e2b * s[i] * s[i];
            assert!(
                (dys[m + i] + metric * g / weights[i]).abs() < tol,
                "case {case} simplified s-block"
            );
        }
    }
    println!("criterion 7 PASS: all four systems match finite differences at 20 random states (tol 1e-5)");
}

#[test]
fn criterion_08_monotone_risk() {
    let rtol = 1e-9;
    let slack = 10.0 * rtol;
    let model = example_model();

    let mf0 = init_meanfield::<f64>(8, &uniform_law(), 3).unwrap();
    let cfg = FlowConfig::new(0.05, 20.0).with_tols(rtol, 1e-12);
    let grid = log_grid_as::<f64>(1e-4, 20.0, 150);
    let mf = integrate_meanfield(
        &MeanFieldSystem::new(model.clone(), mf0.weights.clone(), 0.05),
        &mf0,
        &cfg,
        &grid,
    )
    .unwrap();

    let full0 = init_full::<f64>(5, 100, &WeightLaw::Rademacher, 4).unwrap();
    let cfg2 = FlowConfig::new(0.1, 3.0).with_tols(rtol, 1e-12);
    let grid2 = log_grid_as::<f64>(1e-3, 3.0, 80);
    let fr = integrate_full(
        &FullSystem::new(model.clone(), &full0, 0.1),
        &full0,
        &cfg2,
        &grid2,
    )
    .unwrap();
    let red0 = ReducedState::from_full(&full0);
    let rr = integrate_reduced(&ReducedSystem::new(model, 5, 0.1), &red0, &cfg2, &grid2).unwrap();

    let st = SimplifiedState::<f64>::init(6, 2, 1e-6, SimplifiedInit::Aligned, 1.0, 9);
    let ssys = SimplifiedSystem::new(&st, 1.0, 1.0);
    let cfg3 = FlowConfig::new(1e-6, 50.0).with_tols(rtol, 1e-13);
    let grid3: Vec<f64> = (1..=100).map(|i| 0.5 * i as f64).collect();
    let sr = integrate_simplified(&ssys, &st, &cfg3, &grid3).unwrap();

    for (name, run) in [("full", &fr), ("reduced", &rr), ("mean-field", &mf), ("simplified", &sr)]
    {
        for w in run.trace.risk.windows(2) {
            assert!(
                w[1] <= w[0] + slack,
                "{name}: risk increased {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    println!("criterion 8 PASS: risk non-increasing along all four flows (slack {slack:e})");
}

#[test]
fn criterion_09_counterexamples() {
    use slowfast_core::hermite::HermiteSeries;
    // (D.1) σ = he_1, φ_2 = 2/3: risk floored at ½φ_2² = 2/9
    let phi = HermiteSeries::new(vec![1.0, -1.0, 2.0 / 3.0]).unwrap();
    let model = Model::new(phi, HermiteSeries::<f64>::unit(1));
    let st = init_meanfield::<f64>(8, &uniform_law(), 2).unwrap();
    let cfg = FlowConfig::new(0.01, 50.0).with_tols(1e-9, 1e-12);
    let grid = log_grid_as::<f64>(1e-4, 50.0, 150);
    let run = integrate_meanfield(
        &MeanFieldSystem::new(model, st.weights.clone(), 0.01),
        &st,
        &cfg,
        &grid,
    )
    .unwrap();
    let min_risk = run.trace.risk.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min_risk >= P2 - 1e-15, "D.1: min risk {min_risk} below 2/9");
    for comps in &run.trace.components {
        assert_eq!(comps[2], P2, "D.1: degree-2 component moved");
    }

    // (D.2) φ_0 = φ_1 = 0: overlaps stay pinned at zero over [0, 100]
    let phi = HermiteSeries::new(vec![0.0, 0.0, 1.0]).unwrap();
    let model = Model::new(phi, activations::relu(16).series_as());
    let st = init_meanfield::<f64>(8, &uniform_law(), 6).unwrap();
    let cfg = FlowConfig::new(0.01, 100.0).with_tols(1e-9, 1e-12);
    let grid: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
    let run = integrate_meanfield(
        &MeanFieldSystem::new(model, st.weights.clone(), 0.01),
        &st,
        &cfg,
        &grid,
    )
    .unwrap();
    let mut max_s = 0.0f64;
    for y in &run.states {
        for &s in &y[8..16] {
            max_s = max_s.max(s.abs());
        }
    }
    assert!(max_s <= 1e-10, "D.2: overlap escaped to {max_s:e}");

    // (D.3) simplified with φ_l = 0: Σ w ã² non-increasing
    let st = SimplifiedState::<f64>::init(6, 2, 1e-6, SimplifiedInit::Aligned, 1.0, 4);
    let sys = SimplifiedSystem::new(&st, 0.9, 0.0);
    let cfg = FlowConfig::new(1e-6, 50.0).with_tols(1e-10, 1e-13);
    let grid: Vec<f64> = (1..=50).map(|i| i as f64).collect();
    let run = integrate_simplified(&sys, &st, &cfg, &grid).unwrap();
    let second_moment = |y: &[f64]| -> f64 {
        y[..6]
            .iter()
            .zip(&sys.weights)
            .map(|(&a, &w)| w * a * a)
            .sum()
    };
    let mut prev = second_moment(&st.to_flat());
    for y in &run.states {
        let cur = second_moment(y);
        assert!(cur <= prev + 1e-12, "D.3: Σwã² rose {prev} -> {cur}");
        prev = cur;
    }
    println!(
        "criterion 9 PASS: D.1 floor {min_risk:.6} ≥ 2/9, D.2 max |s| = {max_s:.1e}, D.3 second moment non-increasing"
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

/// Median over ten seeds of sup_k |R(GF at kη) - R(PSGD at k)| at the
/// criterion's pinned geometry (d=200, m=40, ε=0.1, T=2).
fn coupling_gap_medians(etas: &[f64]) -> Vec<f64> {
    let phi = activations::example_target();
    let sigma = activations::relu(16);
    etas.iter()
        .map(|&eta| {
            let sups: Vec<f64> = (1..=10u64)
                .map(|seed| {
                    let cfg = SgdConfig {
                        d: 200,
                        m: 40,
                        eta,
                        eps: 0.1,
                        n_steps: (2.0 / eta).round() as usize,
                        seed,
                        z: 0.0,
                        checkpoint_every: ((2.0 / eta) / 20.0).round() as usize,
                        gf_rtol: 1e-8,
                        gf_atol: 1e-11,
                    };
                    run_psgd(&cfg, &phi, &sigma, &WeightLaw::Rademacher)
                        .unwrap()
                        .coupling
                        .sup_risk_gap()
                })
                .collect();
            median(sups)
        })
        .collect()
}

fn assert_unbiased_increments() {
    let phi = activations::example_target();
    let sigma = activations::relu(16);
    let model = example_model();
    let init = init_full::<f64>(6, 30, &WeightLaw::Rademacher, 55).unwrap();
    let (eta, eps) = (1e-3, 0.2);
    let mut gd = SgdState::from_full(&init);
    slowfast_core::sgd::gd_step(&mut gd, &model, &init.u_star, eta, eps);
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    let n = 10_000;
    let mut mean = vec![0.0f64; 6];
    let mut sq = vec![0.0f64; 6];
    for _ in 0..n {
        let x: Vec<f64> = (0..30)
            .map(|_| slowfast_core::Real::std_normal(&mut rng))
            .collect();
        let y = phi.eval(dot(&init.u_star, &x));
        let mut st = SgdState::from_full(&init);
        psgd_step(&mut st, &x, y, |z| sigma.eval(z), |z| sigma.deriv(z), eta, eps).unwrap();
        for i in 0..6 {
            let inc = st.a[i] - init.a[i];
            mean[i] += inc;
            sq[i] += inc * inc;
        }
    }
    for i in 0..6 {
        let mu = mean[i] / n as f64;
        let var = sq[i] / n as f64 - mu * mu;
        let band = 3.0 * (var / n as f64).sqrt();
        let target = gd.a[i] - init.a[i];
        assert!(
            (mu - target).abs() < band,
            "unbiasedness: particle {i}: {mu:e} vs {target:e} (3σ = {band:e})"
        );
    }
}

#[test]
fn criterion_10_sgd_coupling_shape() {
    let started = Instant::now();
    assert_unbiased_increments();
    println!("criterion 10 (partial): unbiasedness Monte Carlo test passes at 3σ");

    let etas = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let medians = coupling_gap_medians(&etas);
    let wall = started.elapsed().as_secs_f64();
    assert!(wall <= 600.0, "runtime {wall:.0}s exceeds 10 min");
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[0] / w[1]).collect();
    println!(
        "criterion 10 (partial): medians {medians:?}, ratios {ratios:?}, runtime {wall:.0}s"
    );

    // At the pinned grid the two largest steps sit outside the linear
    // coupling regime (gap ~ 0.1-0.2, comparable to the plateau heights), so
    // the last halving's ratio lands above 1.9 for every seed pool and gap
    // statistic tried; the √η band does hold two halvings further down (see
    // criterion_10_supplement_sqrt_eta_regime). Kept faithful as stated.
    for (i, r) in ratios.iter().enumerate() {
        assert!(
            (1.1..=1.9).contains(r),
            "criterion 10 FAIL (known): η halving {}→{} gap ratio {r:.3} outside [1.1, 1.9]; \
             medians {medians:?}; see criterion_10_supplement_sqrt_eta_regime",
            etas[i],
            etas[i + 1]
        );
    }
    println!("criterion 10 PASS: ratios {ratios:?} within [1.1, 1.9]");
}

/// Not a criterion: the √η coupling law emerges once the gap is small
/// compared to the risk scale. Two further halvings below the pinned grid
/// put the successive ratios inside the band.
#[test]
fn criterion_10_supplement_sqrt_eta_regime() {
    let etas = [1.25e-4, 6.25e-5, 3.125e-5];
    let medians = coupling_gap_medians(&etas);
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[0] / w[1]).collect();
    for r in &ratios {
        assert!(
            (1.1..=1.9).contains(r),
            "ratios {ratios:?} medians {medians:?}"
        );
    }
    println!(
        "criterion 10 supplement PASS: ratios {ratios:?} within [1.1, 1.9] for η ≤ 1.25e-4"
    );
}

#[test]
fn criterion_11_hermite_layer() {
    use slowfast_core::hermite::{hermite_eval, GaussHermite, HermiteSeries};
    use slowfast_core::kernels::KernelPair;
    let q = GaussHermite::<f64>::new(200).unwrap();
    // orthonormality to 1e-10 for degrees ≤ 12
    let mut worst_ortho = 0.0f64;
    for j in 0..=12usize {
        for k in 0..=12usize {
            let v = q.expect(|x| hermite_eval(j, x).unwrap() * hermite_eval(k, x).unwrap());
            let target = if j == k { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max((v - target).abs());
        }
    }
    assert!(worst_ortho < 1e-10, "orthonormality error {worst_ortho:e}");

    // ReLU coefficients against the half-line moment oracle
    let relu = activations::relu(16);
    let oracle = relu_moment_oracle(16);
    let mut worst_relu = 0.0f64;
    for (k, &o) in oracle.iter().enumerate() {
        worst_relu = worst_relu.max((relu.series().coeff(k) - o).abs());
    }
    assert!(worst_relu < 1e-8, "ReLU coefficient error {worst_relu:e}");

    // kernel series vs bivariate-Gaussian quadrature on polynomial models
    let mut worst_kernel = 0.0f64;
    let polys = [
        vec![1.0, -1.0, 2.0 / 3.0],
        vec![0.3, 0.7, -0.2, 0.5, 0.0, -0.4, 0.25],
        vec![-0.8, 0.1, 0.9, -0.3, 0.2, 0.6, -0.5],
    ];
    for pc in &polys {
        for sc in &polys {
            let phi = HermiteSeries::new(pc.clone()).unwrap();
            let sigma = HermiteSeries::new(sc.clone()).unwrap();
            let kp = KernelPair::new(&phi, &sigma);
            for i in 0..=20 {
                let s = -1.0 + 2.0 * i as f64 / 20.0;
                let v_oracle = q.expect_bivariate(|g, gs| phi.eval(g) * sigma.eval(gs), s);
                let u_oracle = q.expect_bivariate(|g, gs| sigma.eval(g) * sigma.eval(gs), s);
                worst_kernel = worst_kernel.max((kp.v(s) - v_oracle).abs());
                worst_kernel = worst_kernel.max((kp.u(s) - u_oracle).abs());
            }
        }
    }
    assert!(worst_kernel < 1e-8, "kernel series error {worst_kernel:e}");
    println!(
        "criterion 11 PASS: orthonormality {worst_ortho:.1e}, ReLU coeffs {worst_relu:.1e}, kernels {worst_kernel:.1e}"
    );
}

/// Closed-form half-line Gaussian moments oracle for E[x⁺ he_k], independent
/// of the quadrature and of the production coefficient formula.
fn relu_moment_oracle(kmax: usize) -> Vec<f64> {
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    let mut he: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for k in 2..=kmax {
        let mut next = vec![0.0; k + 1];
        for (j, &c) in he[k - 1].iter().enumerate() {
            next[j + 1] += c;
        }
        for (j, &c) in he[k - 2].iter().enumerate() {
            next[j] -= (k as f64 - 1.0) * c;
        }
        he.push(next);
    }
    let moment = |j: usize| -> f64 {
        let mut v = if j % 2 == 0 { 0.5 } else { 1.0 / sqrt_2pi };
        let mut i = j as i64 - 1;
        while i > 1 {
            v *= i as f64;
            i -= 2;
        }
        v
    };
    let mut fact = vec![1.0f64; kmax + 1];
    for k in 1..=kmax {
        fact[k] = fact[k - 1] * k as f64;
    }
    (0..=kmax)
        .map(|k| {
            let raw: f64 = he[k]
                .iter()
                .enumerate()
                .map(|(j, &c)| c * moment(j + 1))
                .sum();
            raw / fact[k].sqrt()
        })
        .collect()
}

#[test]
fn criterion_12_asymptotics_overlay() {
    // sup gap between the piecewise prediction and the integrated risk,
    // per piece window, decreasing along ε ∈ {1e-3, 1e-4, 1e-5}
    let model = example_model();
    let mut gaps: Vec<[f64; 3]> = Vec::new();
    for &eps in &[1e-3, 1e-4, 1e-5] {
        let st = init_meanfield::<f64>(10, &uniform_law(), 1).unwrap();
        let params = AsymptoticParams::new(&st.a, &st.weights, &model.phi, &model.sigma, eps);
        let trace = if eps <= 1e-4 {
            // reuse ladder runs where available
            ladder()
                .iter()
                .find(|(e, _)| (*e - eps).abs() < eps * 1e-9)
                .map(|(_, t)| t.clone())
                .unwrap_or_else(|| meanfield_run(eps, 6.0 * eps.powf(0.25), 10, 1).trace)
        } else {
            meanfield_run(eps, 6.0 * eps.powf(0.25), 10, 1).trace
        };
        let rate = params.linear_rate();
        let b12 = (eps * eps.sqrt()).sqrt();
        let log_inv = (1.0f64 / eps).ln();
        let b23 = (eps.sqrt() * eps.sqrt() * log_inv / (4.0 * rate)).sqrt();
        // piece-3 window ends where the level-2 drop begins
        let p3_end = trace
            .times
            .iter()
            .zip(&trace.risk)
            .find(|(_, &r)| r < 0.8 * P2)
            .map(|(&t, _)| t)
            .unwrap_or(*trace.times.last().unwrap());
        let mut piece_gaps = [0.0f64; 3];
        for (&t, &r) in trace.times.iter().zip(&trace.risk) {
            let piece = if t < b12 {
                0
            } else if t < b23 {
                1
            } else if t < p3_end {
                2
            } else {
                continue;
            };
            let pred = predicted_risk(&params, &model.phi, t, eps);
            piece_gaps[piece] = piece_gaps[piece].max((pred - r).abs());
        }
        gaps.push(piece_gaps);
    }
    for piece in 0..3 {
        for w in gaps.windows(2) {
            assert!(
                w[1][piece] < w[0][piece],
                "piece {piece} sup gap not decreasing: {gaps:?}"
            );
        }
    }
    println!(
        "criterion 12 PASS: per-piece sup gaps decrease along the ε ladder: {gaps:?}"
    );
}
