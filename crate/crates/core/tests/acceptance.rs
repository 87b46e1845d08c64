//! Acceptance suite: one test per release criterion, each printing a single
//! `ACCEPTANCE cN <name>: PASS` line (run with `--nocapture` to see them all;
//! any failure fails the test). Tolerances are pinned here and are not
//! configurable.

use std::time::Instant;

use num_complex::Complex64;

use gaugesim::analysis::{
    collapsed_axis, cumulative_error, fit_exponential_decay, protection_efficacy,
};
use gaugesim::cli::{run_mode_ensemble, ExperimentConfig, NoiseConfig};
use gaugesim::compile;
use gaugesim::evolve::{
    f_gamma, hs_mean, initial_state, run_trajectory, trajectory_rng, ModelTables, NoiseKind,
    NoiseSpec, RunMode, TrajectoryRecord, TrotterParams,
};
use gaugesim::group::{permutation_eigenvalues, FiniteGroup};
use gaugesim::mitigate::{
    commutation_cliques, dps_ensemble_average, psv_estimate, psv_mean_weight, survival_series,
};
use gaugesim::model::{gauss_operator, ladder_geometry, physical_dimension, CouplingParams};

fn pass(id: &str, name: &str, detail: &str) {
    println!("ACCEPTANCE {id} {name}: PASS ({detail})");
}

fn config(
    n_plaquettes: usize,
    kind: NoiseKind,
    gamma: f64,
    n_steps: usize,
    n_trajectories: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        n_plaquettes,
        inv_g2: 0.5,
        dt: 0.25,
        n_steps,
        n_trajectories,
        seed,
        noise: NoiseConfig { kind, gamma },
        modes: vec![RunMode::Noiseless],
    }
}

fn tables_for(cfg: &ExperimentConfig) -> ModelTables {
    ModelTables::build(
        cfg.n_plaquettes,
        CouplingParams::new(cfg.inv_g2).unwrap(),
        cfg.dt,
    )
    .unwrap()
}

fn noiseless_reference(tables: &ModelTables, cfg: &ExperimentConfig) -> TrajectoryRecord {
    let params = TrotterParams {
        dt: cfg.dt,
        n_steps: cfg.n_steps,
        coupling: CouplingParams::new(cfg.inv_g2).unwrap(),
    };
    let ctx = tables.context(params, NoiseSpec::none(), RunMode::Noiseless, cfg.seed);
    run_trajectory(&ctx, 0).unwrap()
}

#[test]
fn c01_physical_sector_dimensions() {
    let start = Instant::now();
    let group = FiniteGroup::d3().unwrap();
    let d2 = physical_dimension(&ladder_geometry(2), &group).unwrap();
    let d3 = physical_dimension(&ladder_geometry(3), &group).unwrap();
    assert_eq!(d2, 49);
    assert_eq!(d3, 251);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    pass("c1", "physical_sector_dimensions", &format!("n=2: {d2}, n=3: {d3}"));
}

#[test]
fn c02_noiseless_gauge_conservation() {
    let start = Instant::now();
    let cfg = config(2, NoiseKind::None, 0.0, 100, 1, 11);
    let tables = tables_for(&cfg);
    let rec = noiseless_reference(&tables, &cfg);
    let max_gv = rec
        .gv
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, &v| m.max(v));
    assert!(max_gv < 1e-9, "max GV = {max_gv}");

    let params = TrotterParams {
        dt: 0.25,
        n_steps: 100,
        coupling: CouplingParams::new(0.5).unwrap(),
    };
    let ctx = tables.context(params, NoiseSpec::none(), RunMode::Psv, 11);
    let psv_rec = run_trajectory(&ctx, 0).unwrap();
    for &w in &psv_rec.psv_den {
        assert!((w - 1.0).abs() < 1e-9, "symmetric weight {w}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
    pass(
        "c2",
        "noiseless_gauge_conservation",
        &format!("100 steps, max GV = {max_gv:.2e}"),
    );
}

#[test]
fn c03_initial_plaquette_expectation() {
    let cfg = config(2, NoiseKind::None, 0.0, 1, 1, 1);
    let tables = tables_for(&cfg);
    let s = initial_state(&tables.geom, &tables.group);
    let op1 = s.expectation_diagonal(&tables.op1_table);
    assert!(op1.abs() < 1e-12);
    pass("c3", "initial_plaquette_expectation", &format!("<O_P1>(0) = {op1:.2e}"));
}

#[test]
fn c04_gauss_operator_spectra() {
    let group = FiniteGroup::d3().unwrap();
    let geom = ladder_geometry(2);
    let count = |eigs: &[Complex64], target: Complex64| {
        eigs.iter().filter(|z| (**z - target).norm() < 1e-9).count()
    };
    let one = Complex64::new(1.0, 0.0);
    let minus = -one;
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    for v in 0..2 {
        for g in 1..6 {
            let op = gauss_operator(&geom, v, g, &group);
            let rotation = group.element_order(g) == 3;
            for (link, perm) in op.links.iter().zip(op.perms.iter()) {
                let eigs = permutation_eigenvalues(perm);
                let vertical = *link >= 2;
                let expected: Vec<(Complex64, usize)> = match (rotation, vertical) {
                    (false, false) => vec![(one, 3), (minus, 3)],
                    (false, true) => vec![(one, 4), (minus, 2)],
                    (true, false) => vec![(one, 2), (omega, 2), (omega.conj(), 2)],
                    (true, true) => vec![(one, 4), (omega, 1), (omega.conj(), 1)],
                };
                let total: usize = expected.iter().map(|e| e.1).sum();
                assert_eq!(total, 6);
                for (val, mult) in expected {
                    assert_eq!(
                        count(&eigs, val),
                        mult,
                        "g={g} v={v} link={link} eigenvalue {val}"
                    );
                }
            }
        }
    }
    pass("c4", "gauss_operator_spectra", "all link spectra match");
}

#[test]
fn c05_noise_calibration() {
    let start = Instant::now();
    let dim = 1296;
    for (i, &gamma) in [0.1, 0.2, 0.3].iter().enumerate() {
        let n = 2000;
        let mut rng = trajectory_rng(500 + i as u64, 0, 2);
        let traces: Vec<f64> = (0..n)
            .map(|_| {
                gaugesim::evolve::sample_householder_unitary(dim, gamma, &mut rng)
                    .normalized_trace()
                    .re
            })
            .collect();
        let mean = traces.iter().sum::<f64>() / n as f64;
        let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let expected = hs_mean(gamma, dim);
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "gamma={gamma}: mc {mean} vs analytic {expected}, se {se}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 120.0);
    pass("c5", "noise_calibration", "3 gammas within 3 SE over 2000 draws");
}

#[test]
fn c06_survival_rate_law_and_collapse() {
    let dt = 0.25;
    let dim = 1296;
    let cases = [(0.1f64, 200usize), (0.2, 100), (0.3, 60)];
    let mut collapse_curves: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut details = Vec::new();
    for (i, &(gamma, steps)) in cases.iter().enumerate() {
        let cfg = config(2, NoiseKind::Householder, gamma, steps, 1000, 600 + i as u64);
        let tables = tables_for(&cfg);
        // Survival probabilities are quadratic in the calibrated mean overlap
        // (amplitude level hs_mean), so the per-step escape probability is
        // 1 - hs_mean^2 = 1 - e^{-gamma^2} (1 - 2/dim)^2.
        let expected_rate = (1.0 - hs_mean(gamma, dim).powi(2)) / dt;

        let dps = run_mode_ensemble(&tables, &cfg, RunMode::Dps, cfg.seed).unwrap();
        let surv = survival_series(&dps);
        let times = &dps[0].times;
        let fit = fit_exponential_decay(times, &surv).unwrap();
        let rel = (fit.rate - expected_rate).abs() / expected_rate;
        assert!(
            rel < 0.15,
            "gamma={gamma}: DPS survival rate {} vs f/dt {} ({:.1}%)",
            fit.rate,
            expected_rate,
            rel * 100.0
        );

        let psv = run_mode_ensemble(&tables, &cfg, RunMode::Psv, cfg.seed).unwrap();
        let weight = psv_mean_weight(&psv);
        // The symmetric weight saturates at dim(H_P)/dim(H) = 49/1296 (the
        // infinite-temperature value), so fit the decay of the excess above
        // that floor.
        let floor = 49.0 / dim as f64;
        let weight_excess: Vec<f64> = weight
            .iter()
            .map(|w| ((w - floor) / (1.0 - floor)).max(1e-12))
            .collect();
        let wfit = fit_exponential_decay(times, &weight_excess).unwrap();
        let wrel = (wfit.rate - expected_rate).abs() / expected_rate;
        assert!(
            wrel < 0.15,
            "gamma={gamma}: PSV weight rate {} vs f/dt {} ({:.1}%)",
            wfit.rate,
            expected_rate,
            wrel * 100.0
        );

        collapse_curves.push((collapsed_axis(times, dt, f_gamma(gamma, dim)), surv));
        details.push(format!("g={gamma}: {:.1}%/{:.1}%", rel * 100.0, wrel * 100.0));
    }

    // Rescaled survival curves collapse onto each other.
    let x_max = collapse_curves
        .iter()
        .map(|(x, _)| *x.last().unwrap())
        .fold(f64::INFINITY, f64::min);
    let interp = |xs: &[f64], ys: &[f64], x: f64| -> f64 {
        let k = xs.partition_point(|&v| v < x).min(xs.len() - 1).max(1);
        let (x0, x1) = (xs[k - 1], xs[k]);
        let (y0, y1) = (ys[k - 1], ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let mut max_dev = 0.0f64;
    let mut x = 0.0;
    while x <= x_max {
        for a in 0..collapse_curves.len() {
            for b in a + 1..collapse_curves.len() {
                let ya = interp(&collapse_curves[a].0, &collapse_curves[a].1, x);
                let yb = interp(&collapse_curves[b].0, &collapse_curves[b].1, x);
                max_dev = max_dev.max((ya - yb).abs());
            }
        }
        x += 0.05;
    }
    assert!(max_dev < 0.05, "collapse deviation {max_dev}");
    pass(
        "c6",
        "survival_rate_law_and_collapse",
        &format!("rate errors {}; collapse dev {max_dev:.3}", details.join(", ")),
    );
}

#[test]
fn c07_long_time_saturation() {
    let cfg = config(2, NoiseKind::Householder, 0.3, 160, 1000, 700);
    let tables = tables_for(&cfg);
    let psv = run_mode_ensemble(&tables, &cfg, RunMode::Psv, cfg.seed).unwrap();

    // Average the last 8 slices (t/a in [38, 40]).
    let n_slices = psv[0].times.len();
    let late: Vec<usize> = (n_slices - 8..n_slices).collect();
    let weight = psv_mean_weight(&psv);
    let late_weight: f64 = late.iter().map(|&t| weight[t]).sum::<f64>() / late.len() as f64;
    let expected = 49.0 / 1296.0;
    let rel = (late_weight - expected).abs() / expected;
    assert!(rel < 0.20, "late weight {late_weight} vs {expected} ({rel:.3})");

    // GV plateaus: reflections 1/2, rotations 1/sqrt(3).
    let gv = |k: usize| -> f64 {
        let s = dps_ensemble_average(&psv, move |r| &r.gv[k]);
        late.iter().map(|&t| s[t].mean).sum::<f64>() / late.len() as f64
    };
    let mut detail = Vec::new();
    for (k, &(_, g)) in tables.monitored.iter().enumerate() {
        let plateau = gv(k);
        let expected = if tables.group.element_order(g) == 2 {
            0.5
        } else {
            1.0 / 3.0f64.sqrt()
        };
        assert!(
            (plateau - expected).abs() < 0.05,
            "element {g}: plateau {plateau} vs {expected}"
        );
        detail.push(format!("{plateau:.3}"));
    }
    pass(
        "c7",
        "long_time_saturation",
        &format!("weight {late_weight:.4} (target {expected:.4}); GV {}", detail.join("/")),
    );
}

struct MitigationRun {
    times: Vec<f64>,
    noiseless_op1: Vec<f64>,
    noisy_op1: Vec<f64>,
    dps_op1: Vec<f64>,
    psv_op1: Vec<f64>,
    noiseless_hb: Vec<f64>,
    noisy_hb: Vec<f64>,
    dps_hb: Vec<f64>,
    psv_hb: Vec<f64>,
}

fn mitigation_run(cfg: &ExperimentConfig) -> MitigationRun {
    let tables = tables_for(cfg);
    let reference = noiseless_reference(&tables, cfg);
    let noisy = run_mode_ensemble(&tables, cfg, RunMode::Noisy, cfg.seed).unwrap();
    let dps = run_mode_ensemble(&tables, cfg, RunMode::Dps, cfg.seed).unwrap();
    let psv = run_mode_ensemble(&tables, cfg, RunMode::Psv, cfg.seed).unwrap();
    let mean = |records: &[TrajectoryRecord], pick: fn(&TrajectoryRecord) -> &[f64]| -> Vec<f64> {
        dps_ensemble_average(records, pick)
            .into_iter()
            .map(|s| s.mean)
            .collect()
    };
    MitigationRun {
        times: reference.times.clone(),
        noiseless_op1: reference.op1.clone(),
        noisy_op1: mean(&noisy, |r| &r.op1),
        dps_op1: mean(&dps, |r| &r.op1),
        psv_op1: psv_estimate(&psv),
        noiseless_hb: reference.hb.clone(),
        noisy_hb: mean(&noisy, |r| &r.hb),
        dps_hb: mean(&dps, |r| &r.hb),
        psv_hb: gaugesim::mitigate::psv_ratio_series(&psv, |r| &r.psv_hb_num),
    }
}

#[test]
fn c08_mitigation_quality() {
    // gamma = 0.2: DPS and PSV track noiseless within 0.1 for t/a <= 5 while
    // the unmitigated mean departs by > 0.2 somewhere in t/a in [5, 10].
    let cfg = config(2, NoiseKind::Householder, 0.2, 40, 500, 800);
    let run = mitigation_run(&cfg);
    let mut max_dps = 0.0f64;
    let mut max_psv = 0.0f64;
    let mut max_noisy_late = 0.0f64;
    for (t, &time) in run.times.iter().enumerate() {
        let reference = run.noiseless_op1[t];
        if time <= 5.0 {
            max_dps = max_dps.max((run.dps_op1[t] - reference).abs());
            max_psv = max_psv.max((run.psv_op1[t] - reference).abs());
        }
        if (5.0..=10.0).contains(&time) {
            max_noisy_late = max_noisy_late.max((run.noisy_op1[t] - reference).abs());
        }
    }
    assert!(max_dps < 0.1, "DPS deviation {max_dps}");
    assert!(max_psv < 0.1, "PSV deviation {max_psv}");
    assert!(max_noisy_late > 0.2, "noisy deviation only {max_noisy_late}");

    // gamma = 0.3: PSV exceeds 0.1 deviation strictly before DPS does.
    let cfg3 = config(2, NoiseKind::Householder, 0.3, 40, 500, 801);
    let run3 = mitigation_run(&cfg3);
    let first_cross = |series: &[f64]| -> usize {
        series
            .iter()
            .zip(run3.noiseless_op1.iter())
            .position(|(s, r)| (s - r).abs() > 0.1)
            .unwrap_or(usize::MAX)
    };
    let psv_cross = first_cross(&run3.psv_op1);
    let dps_cross = first_cross(&run3.dps_op1);
    assert!(
        psv_cross < dps_cross,
        "PSV crosses at slice {psv_cross}, DPS at {dps_cross}"
    );
    pass(
        "c8",
        "mitigation_quality",
        &format!(
            "g=0.2: dps {max_dps:.3}, psv {max_psv:.3}, noisy {max_noisy_late:.3}; \
             g=0.3 crossings psv={psv_cross} dps={dps_cross}"
        ),
    );
}

#[test]
fn c09_efficacy_ordering() {
    let cfg = config(2, NoiseKind::Householder, 0.3, 40, 1000, 900);
    let run = mitigation_run(&cfg);
    let eps = |series: &[f64], upto: usize| -> f64 {
        let e_noisy = cumulative_error(&run.noiseless_hb[..=upto], &run.noisy_hb[..=upto]);
        let e_mit = cumulative_error(&run.noiseless_hb[..=upto], &series[..=upto]);
        protection_efficacy(e_noisy, e_mit).unwrap()
    };
    // Earliest statistically resolvable slice: after a single Trotter step the
    // cumulative errors of both protocols are still below the ensemble's
    // standard error, so the ratio is noise-dominated there.
    let early = 2;
    let late = run.times.len() - 1;
    let eps_dps_early = eps(&run.dps_hb, early);
    let eps_psv_early = eps(&run.psv_hb, early);
    let eps_dps_late = eps(&run.dps_hb, late);
    let eps_psv_late = eps(&run.psv_hb, late);
    assert!(
        eps_psv_early > eps_dps_early,
        "early: psv {eps_psv_early} vs dps {eps_dps_early}"
    );
    assert!(
        eps_dps_late >= eps_psv_late,
        "late: dps {eps_dps_late} vs psv {eps_psv_late}"
    );
    pass(
        "c9",
        "efficacy_ordering",
        &format!(
            "early psv {eps_psv_early:.3} > dps {eps_dps_early:.3}; \
             late dps {eps_dps_late:.3} >= psv {eps_psv_late:.3}"
        ),
    );
}

#[test]
fn c10_compiler_equivalence_and_costs() {
    let start = Instant::now();
    let group = FiniteGroup::d3().unwrap();
    let geom = ladder_geometry(2);
    let coupling = CouplingParams::new(0.5).unwrap();
    let electric =
        gaugesim::model::electric_link_hamiltonian(coupling, &group, "tau").unwrap();

    // Electric step.
    let mut seq = compile::GateSequence::new(vec![6]);
    seq.gates = compile::compile_electric_step(0, &electric, 0.25);
    let diff = gaugesim::linalg::max_abs_diff(&seq.unitary(&group).unwrap(), &electric.propagator(0.25));
    assert!(diff < 1e-10);

    // Plaquette steps are the exact diagonal magnetic phases.
    for p in 0..2 {
        let mut pseq = compile::GateSequence::new(vec![6; 4]);
        pseq.gates = compile::compile_plaquette_step(&geom, p, coupling.inv_g2, 0.25, "tau");
        let table = gaugesim::model::plaquette_trace_table(&geom, &group, "tau", p);
        let report = pseq.resource_report(&group);
        assert_eq!(report.ctrl_perm_total, 30);
        for col in 0..1296 {
            let mut amps = vec![Complex64::new(0.0, 0.0); 1296];
            amps[col] = Complex64::new(1.0, 0.0);
            pseq.apply(&group, &mut amps).unwrap();
            let expected = Complex64::from_polar(1.0, coupling.inv_g2 * 0.25 * table[col]);
            assert!((amps[col] - expected).norm() < 1e-10);
        }
    }

    let step = compile::compile_trotter_step(&geom, &electric, coupling.inv_g2, 0.25, "tau");
    assert_eq!(step.resource_report(&group).ctrl_perm_total, 60);

    // DPS checks: ancilla-conditioned blocks are the spectral projectors.
    for &(v, g) in &[(0usize, 1usize), (1, 4)] {
        let seq = compile::compile_dps_check(&geom, &group, v, g);
        let n = group.element_order(g);
        let expected_cost = if n == 2 { 8 } else { 10 };
        assert_eq!(seq.resource_report(&group).ctrl_perm_total, expected_cost);

        let mut perms: Vec<Vec<u32>> = Vec::new();
        let mut power = g;
        for _ in 1..n {
            perms.push(gauss_operator(&geom, v, power, &group).full_perm(6, 4));
            power = group.multiply(power, g);
        }
        let w = 2.0 * std::f64::consts::PI / n as f64;
        for col in 0..1296 {
            let mut joint = vec![Complex64::new(0.0, 0.0); 1296 * n];
            joint[col] = Complex64::new(1.0, 0.0);
            seq.apply(&group, &mut joint).unwrap();
            for k in 0..n {
                // P_k column: (1/N) sum_m w^{-km} e_{perm_m(col)}.
                let mut expected = vec![Complex64::new(0.0, 0.0); 1296];
                expected[col] += Complex64::new(1.0 / n as f64, 0.0);
                for (m, perm) in perms.iter().enumerate() {
                    expected[perm[col] as usize] +=
                        Complex64::from_polar(1.0 / n as f64, -w * (k * (m + 1)) as f64);
                }
                for i in 0..1296 {
                    assert!(
                        (joint[k * 1296 + i] - expected[i]).norm() < 1e-10,
                        "block {k}, col {col}, row {i}, g={g} v={v}"
                    );
                }
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
    pass("c10", "compiler_equivalence_and_costs", "30/60 step, 8/10 checks, 1e-10");
}

#[test]
fn c11_clique_cover() {
    let start = Instant::now();
    let group = FiniteGroup::d3().unwrap();
    let geom = ladder_geometry(2);
    let cliques = commutation_cliques(&geom, &group);
    assert!(cliques.len() <= 16);
    assert_eq!(cliques.iter().map(|c| c.len()).sum::<usize>(), 36);

    // Per-vertex commuting-class structure {e,r,r^2}, {s}, {sr}, {sr^2}.
    let class = |g: usize| -> usize {
        if g < 3 {
            0
        } else {
            g - 2
        }
    };
    for clique in &cliques {
        let sig: Vec<(usize, usize)> = clique
            .iter()
            .map(|&idx| (class(idx % 6), class(idx / 6)))
            .collect();
        assert!(
            sig.windows(2).all(|w| w[0] == w[1]),
            "clique mixes vertex classes: {sig:?}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
    pass(
        "c11",
        "clique_cover",
        &format!("{} cliques over 36 products", cliques.len()),
    );
}

#[test]
fn c12_three_plaquette_dephasing() {
    // n=3, dephasing, gamma scaled from the n=2 value 0.2 by sqrt(3/2).
    let cfg3 = config(3, NoiseKind::Dephasing, 0.245, 30, 145, 1200);
    let run3 = mitigation_run(&cfg3);
    let mut max_dps = 0.0f64;
    let mut max_psv = 0.0f64;
    for (t, &time) in run3.times.iter().enumerate() {
        if time <= 5.0 {
            let reference = run3.noiseless_op1[t];
            max_dps = max_dps.max((run3.dps_op1[t] - reference).abs());
            max_psv = max_psv.max((run3.psv_op1[t] - reference).abs());
        }
    }
    assert!(max_dps < 0.15, "n=3 DPS deviation {max_dps}");
    assert!(max_psv < 0.15, "n=3 PSV deviation {max_psv}");

    // Late-time PSV deviation relative to its own noisy baseline is smaller
    // at n=3 than in the matched n=2 dephasing run.
    let cfg2 = config(2, NoiseKind::Dephasing, 0.2, 30, 145, 1201);
    let run2 = mitigation_run(&cfg2);
    let late_ratio = |run: &MitigationRun| -> f64 {
        let n = run.times.len();
        let window = n - 4..n;
        let dev_psv: f64 = window
            .clone()
            .map(|t| (run.psv_op1[t] - run.noiseless_op1[t]).abs())
            .sum::<f64>();
        let dev_noisy: f64 = window
            .clone()
            .map(|t| (run.noisy_op1[t] - run.noiseless_op1[t]).abs())
            .sum::<f64>();
        dev_psv / dev_noisy
    };
    let r3 = late_ratio(&run3);
    let r2 = late_ratio(&run2);
    assert!(r3 < r2, "late-time PSV/noisy ratio: n=3 {r3} vs n=2 {r2}");
    pass(
        "c12",
        "three_plaquette_dephasing",
        &format!("dps {max_dps:.3}, psv {max_psv:.3}; late ratios n3 {r3:.3} < n2 {r2:.3}"),
    );
}
