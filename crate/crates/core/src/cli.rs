//! Experiment orchestration: config parsing, ensemble execution across
//! mitigation modes, CSV/JSON output, and the self-check and reporting
//! subcommands behind the binary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compile;
use crate::evolve::{
    self, hs_mean, sample_householder_unitary, trajectory_rng, ModelTables, NoiseKind, NoiseSpec,
    RunMode, TrajectoryRecord, TrotterParams,
};
use crate::group::{permutation_eigenvalues, FiniteGroup};
use crate::mitigate::{
    commutation_cliques, dps_ensemble_average, psv_estimate, survival_series, SliceStats,
};
use crate::model::{gauss_operator, ladder_geometry, physical_dimension, CouplingParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub gamma: f64,
}

fn default_modes() -> Vec<RunMode> {
    vec![RunMode::Noiseless, RunMode::Noisy, RunMode::Dps, RunMode::Psv]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_plaquettes: usize,
    pub inv_g2: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_trajectories: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<RunMode>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n_plaquettes) {
            return Err(Error::Config(format!(
                "n_plaquettes must be 2 or 3, got {}",
                self.n_plaquettes
            )));
        }
        if self.n_trajectories == 0 || self.n_steps == 0 {
            return Err(Error::Config(
                "n_trajectories and n_steps must be positive".into(),
            ));
        }
        if self.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        CouplingParams::new(self.inv_g2)?;
        let dim = 6usize.pow(2 * self.n_plaquettes as u32);
        NoiseSpec {
            kind: self.noise.kind,
            gamma: self.noise.gamma,
        }
        .validate(dim)?;
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        Ok(())
    }

    fn noise_for(&self, mode: RunMode) -> NoiseSpec {
        if mode == RunMode::Noiseless {
            NoiseSpec::none()
        } else {
            NoiseSpec {
                kind: self.noise.kind,
                gamma: self.noise.gamma,
            }
        }
    }
}

/// Writes `content` atomically: to a sibling temp file first, then rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Per-mode ensemble execution; trajectory order is preserved so output is
/// independent of thread scheduling.
pub fn run_mode_ensemble(
    tables: &ModelTables,
    cfg: &ExperimentConfig,
    mode: RunMode,
    master_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let params = TrotterParams {
        dt: cfg.dt,
        n_steps: cfg.n_steps,
        coupling: CouplingParams::new(cfg.inv_g2)?,
    };
    let ctx = tables.context(params, cfg.noise_for(mode), mode, master_seed);
    (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|i| evolve::run_trajectory(&ctx, i))
        .collect()
}

fn gv_column_names(tables: &ModelTables) -> Vec<String> {
    tables
        .monitored
        .iter()
        .map(|(v, g)| format!("GV_{g}_{v}"))
        .collect()
}

fn csv_header(tables: &ModelTables) -> String {
    let mut cols = vec![
        "t_over_a".to_string(),
        "mode".to_string(),
        "mean_OP1".to_string(),
        "std_OP1".to_string(),
        "stderr_OP1".to_string(),
        "n_valid".to_string(),
        "mean_HE".to_string(),
        "mean_HB".to_string(),
    ];
    cols.extend(gv_column_names(tables));
    cols.push("psv_num".to_string());
    cols.push("psv_den".to_string());
    cols.push("P_s".to_string());
    cols.join(",")
}

/// Delta-method standard error of the ratio-of-means estimator.
fn psv_ratio_stderr(records: &[TrajectoryRecord], slice: usize) -> f64 {
    let m = records.len() as f64;
    let nums: Vec<f64> = records.iter().map(|r| r.psv_num[slice]).collect();
    let dens: Vec<f64> = records.iter().map(|r| r.psv_den[slice]).collect();
    let mean_n = nums.iter().sum::<f64>() / m;
    let mean_d = dens.iter().sum::<f64>() / m;
    if m < 2.0 || mean_d == 0.0 {
        return f64::NAN;
    }
    let r = mean_n / mean_d;
    let mut var_n = 0.0;
    let mut var_d = 0.0;
    let mut cov = 0.0;
    for (n, d) in nums.iter().zip(dens.iter()) {
        var_n += (n - mean_n).powi(2);
        var_d += (d - mean_d).powi(2);
        cov += (n - mean_n) * (d - mean_d);
    }
    let k = m * (m - 1.0);
    ((var_n + r * r * var_d - 2.0 * r * cov) / k).sqrt() / mean_d.abs()
}

/// Turns one mode's ensemble into CSV rows (no header).
pub fn mode_csv_rows(
    tables: &ModelTables,
    mode: RunMode,
    records: &[TrajectoryRecord],
) -> Vec<String> {
    let n_slices = records[0].times.len();
    let op1 = dps_ensemble_average(records, |r| &r.op1);
    let he = dps_ensemble_average(records, |r| &r.he);
    let hb = dps_ensemble_average(records, |r| &r.hb);
    let gv: Vec<Vec<SliceStats>> = (0..tables.monitored.len())
        .map(|k| dps_ensemble_average(records, move |r| &r.gv[k]))
        .collect();
    let surv = survival_series(records);
    let psv = if mode == RunMode::Psv {
        Some((
            psv_estimate(records),
            crate::mitigate::psv_mean_weight(records),
        ))
    } else {
        None
    };
    let psv_num_mean: Option<Vec<f64>> = psv.as_ref().map(|_| {
        (0..n_slices)
            .map(|t| {
                records.iter().map(|r| r.psv_num[t]).sum::<f64>() / records.len() as f64
            })
            .collect()
    });

    (0..n_slices)
        .map(|t| {
            let (mean, std, stderr) = match (&psv, mode) {
                (Some((est, _)), RunMode::Psv) => {
                    (est[t], f64::NAN, psv_ratio_stderr(records, t))
                }
                _ => (op1[t].mean, op1[t].std, op1[t].stderr),
            };
            let mut fields = vec![
                fmt_float(records[0].times[t]),
                mode.label().to_string(),
                fmt_float(mean),
                fmt_float(std),
                fmt_float(stderr),
                op1[t].n_valid.to_string(),
                fmt_float(he[t].mean),
                fmt_float(hb[t].mean),
            ];
            for series in &gv {
                fields.push(fmt_float(series[t].mean));
            }
            match (&psv, &psv_num_mean) {
                (Some((_, den)), Some(num)) => {
                    fields.push(fmt_float(num[t]));
                    fields.push(fmt_float(den[t]));
                }
                _ => {
                    fields.push("nan".to_string());
                    fields.push("nan".to_string());
                }
            }
            fields.push(if mode == RunMode::Dps {
                fmt_float(surv[t])
            } else {
                "nan".to_string()
            });
            fields.join(",")
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub columns: Vec<String>,
    pub outputs: Vec<String>,
}

/// Executes every configured mode with paired trajectory seeds and writes one
/// CSV per mode plus a manifest. Returns the written paths.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let master_seed = seed_override.unwrap_or(cfg.seed);
    fs::create_dir_all(out_dir)?;
    let tables = ModelTables::build(cfg.n_plaquettes, CouplingParams::new(cfg.inv_g2)?, cfg.dt)?;

    let mut written = Vec::new();
    for &mode in &cfg.modes {
        let records = run_mode_ensemble(&tables, cfg, mode, master_seed)?;
        let mut out = String::new();
        out.push_str(&csv_header(&tables));
        out.push('\n');
        for row in mode_csv_rows(&tables, mode, &records) {
            out.push_str(&row);
            out.push('\n');
        }
        let path = out_dir.join(format!("series_{}.csv", mode.label()));
        write_atomic(&path, &out)?;
        written.push(path);
    }

    let manifest = RunManifest {
        config: cfg.clone(),
        master_seed,
        columns: csv_header(&tables).split(',').map(String::from).collect(),
        outputs: written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let manifest_path = out_dir.join("run_manifest.json");
    write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    written.push(manifest_path);
    Ok(written)
}

fn spectrum_counts(perm: &[usize]) -> Vec<(i64, usize)> {
    // Eigenvalue multiset keyed by rounded angle in thousandths of a turn.
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for e in permutation_eigenvalues(perm) {
        let turn = (e.arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
        let key = (turn * 1000.0).round() as i64 % 1000;
        *counts.entry(key).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

/// Structural self-checks; prints one `PASS`/`FAIL` line per check and
/// returns whether everything passed.
pub fn cmd_verify(out: &mut impl std::io::Write) -> Result<bool> {
    let group = FiniteGroup::d3()?;
    let mut all_ok = true;
    let mut check = |out: &mut dyn std::io::Write, name: &str, ok: bool, detail: String| {
        let _ = writeln!(
            out,
            "{} {name} {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            all_ok = false;
        }
    };

    // Physical-sector dimensions (dual-counting consistency is internal).
    for (n, expected) in [(2usize, 49usize), (3, 251)] {
        let geom = ladder_geometry(n);
        let dim = physical_dimension(&geom, &group)?;
        check(
            out,
            "physical_dimension",
            dim == expected,
            format!("n={n} dim={dim} expected={expected}"),
        );
    }

    // Group Fourier transform unitarity.
    let f = group.fourier_matrix()?;
    let defect = crate::linalg::unitarity_defect(&f);
    check(out, "fourier_unitarity", defect < 1e-12, format!("defect={defect:.2e}"));

    // Gauss-operator spectra per link type: multiplicity pattern of the
    // permutation eigenvalues, keyed by angle (in 1/1000 turn).
    let geom = ladder_geometry(2);
    let mut spectra_ok = true;
    for v in 0..2 {
        for g in 1..6 {
            let op = gauss_operator(&geom, v, g, &group);
            let rotation = group.element_order(g) == 3;
            for (link, perm) in op.links.iter().zip(op.perms.iter()) {
                let vertical = *link >= 2;
                let expected: Vec<(i64, usize)> = match (rotation, vertical) {
                    (false, false) => vec![(0, 3), (500, 3)],
                    (false, true) => vec![(0, 4), (500, 2)],
                    (true, false) => vec![(0, 2), (333, 2), (667, 2)],
                    (true, true) => vec![(0, 4), (333, 1), (667, 1)],
                };
                if spectrum_counts(perm) != expected {
                    spectra_ok = false;
                }
            }
        }
    }
    check(out, "gauss_spectra", spectra_ok, "per-link eigenvalue multiplicities".into());

    // Compiled circuits against their dense definitions.
    let coupling = CouplingParams::new(0.5)?;
    let electric = crate::model::electric_link_hamiltonian(coupling, &group, "tau")?;
    let mut seq = compile::GateSequence::new(vec![6]);
    seq.gates = compile::compile_electric_step(0, &electric, 0.25);
    let diff = crate::linalg::max_abs_diff(&seq.unitary(&group)?, &electric.propagator(0.25));
    check(out, "compile_electric", diff < 1e-10, format!("max_diff={diff:.2e}"));

    let step = compile::compile_trotter_step(&geom, &electric, coupling.inv_g2, 0.25, "tau");
    let report = step.resource_report(&group);
    check(
        out,
        "compile_step_resources",
        report.ctrl_perm_total == 60 && report.gate_counts["ctrl_mult"] == 12,
        format!("ctrl_perm_total={}", report.ctrl_perm_total),
    );

    let mut dps_ok = true;
    for g in 1..6 {
        let seq = compile::compile_dps_check(&geom, &group, 0, g);
        let expected = if group.element_order(g) == 2 { 8 } else { 10 };
        if seq.resource_report(&group).ctrl_perm_total != expected {
            dps_ok = false;
        }
    }
    check(out, "compile_dps_resources", dps_ok, "reflection=8 rotation=10".into());

    let cliques = commutation_cliques(&geom, &group);
    let covered: usize = cliques.iter().map(|c| c.len()).sum();
    check(
        out,
        "psv_cliques",
        cliques.len() == 16 && covered == 36,
        format!("count={} covered={covered}", cliques.len()),
    );

    // Electric spectrum structure: one eigenvalue per irrep with multiplicity
    // dim^2, matching the Fourier column layout.
    let cols = group.fourier_columns();
    let mut degeneracy_ok = true;
    for (i, (j, _, _)) in cols.iter().enumerate() {
        for (k, (j2, _, _)) in cols.iter().enumerate() {
            let same = (electric.eigenvalues[i] - electric.eigenvalues[k]).abs() < 1e-9;
            if (j == j2) != same {
                degeneracy_ok = false;
            }
        }
    }
    check(out, "electric_degeneracy", degeneracy_ok, "dim(j)^2 blocks".into());

    Ok(all_ok)
}

#[derive(Debug, Serialize)]
pub struct NoiseCalibration {
    pub gamma: f64,
    pub dim: usize,
    pub samples: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub analytic_mean: f64,
    pub f_gamma: f64,
}

/// Monte-Carlo check of the mean normalized Hilbert-Schmidt overlap of the
/// Householder noise against the closed form.
pub fn cmd_noise_calibrate(
    gamma: f64,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<NoiseCalibration> {
    if samples < 2 {
        return Err(Error::Config("need at least 2 samples".into()));
    }
    let mut rng = trajectory_rng(seed, 0, 2);
    let traces: Vec<f64> = (0..samples)
        .map(|_| sample_householder_unitary(dim, gamma, &mut rng).normalized_trace().re)
        .collect();
    let mean = traces.iter().sum::<f64>() / samples as f64;
    let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    Ok(NoiseCalibration {
        gamma,
        dim,
        samples,
        mc_mean: mean,
        mc_stderr: (var / samples as f64).sqrt(),
        analytic_mean: hs_mean(gamma, dim),
        f_gamma: evolve::f_gamma(gamma, dim),
    })
}

#[derive(Debug, Serialize)]
pub struct CompileReport {
    pub n_plaquettes: usize,
    pub trotter_step: compile::ResourceReport,
    pub trotter_text: String,
    pub dps_checks: Vec<DpsCheckReport>,
}

#[derive(Debug, Serialize)]
pub struct DpsCheckReport {
    pub vertex: usize,
    pub element: usize,
    pub ancilla_dim: usize,
    pub resources: compile::ResourceReport,
}

/// Gate counts and circuit listings for one lattice size.
pub fn cmd_compile_report(n_plaquettes: usize, inv_g2: f64, dt: f64) -> Result<CompileReport> {
    let geom = ladder_geometry(n_plaquettes);
    let group = FiniteGroup::d3()?;
    let coupling = CouplingParams::new(inv_g2)?;
    let electric = crate::model::electric_link_hamiltonian(coupling, &group, "tau")?;
    let step = compile::compile_trotter_step(&geom, &electric, coupling.inv_g2, dt, "tau");
    let mut dps_checks = Vec::new();
    for v in 0..geom.n_vertices() {
        for g in 1..group.order {
            let seq = compile::compile_dps_check(&geom, &group, v, g);
            dps_checks.push(DpsCheckReport {
                vertex: v,
                element: g,
                ancilla_dim: group.element_order(g),
                resources: seq.resource_report(&group),
            });
        }
    }
    Ok(CompileReport {
        n_plaquettes,
        trotter_step: step.resource_report(&group),
        trotter_text: step.to_text(),
        dps_checks,
    })
}
