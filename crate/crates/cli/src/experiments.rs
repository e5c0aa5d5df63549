// SPDX-License-Identifier: Apache-2.0

//! Named experiments with their baked-in defaults.

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use lskin::classical::PopulationVector;
use lskin::dynamics::{evolve_recording, initial_state};
use lskin::ensemble::{classical_ensemble, ensemble_evolve, sinai_experiment, EnsembleOptions, EnsembleTrace};
use lskin::fit::{default_window, fit_power, fit_sinai, fit_trace, time_window, walk_extremes, Field, ScalingFit};
use lskin::hatano_nelson::{clean_spectrum, effective_hamiltonian, phase_ensemble, random_phases, skin_diagnostics, DiagonalConvention};
use lskin::io;
use lskin::lattice::Disorder;
use lskin::liouvillian::Superoperator;
use lskin::meanfield::{dilute_comparison, meanfield_evolve, OccupationVector};
use lskin::metrics::{localization_metrics, profile_corner_mass};
use lskin::transport::{center_site, TimeGrid, TransportTrace};

use crate::config::{ExperimentConfig, HatanoNelsonConfig, MeanFieldConfig, ToleranceConfig};
use crate::output::OutputDir;

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment { name: "fig2-spectrum", about: "Liouvillian spectrum, steady state and eigenmode profile, uniform h = 0.4" },
    Experiment { name: "fig3-reciprocal", about: "same as fig2-spectrum with h = 0" },
    Experiment { name: "fig4-erratic", about: "steady states of three bernoulli(p = 0.5) realizations" },
    Experiment { name: "fig5-drift", about: "quantum spreading with uniform h = 1, L = 81" },
    Experiment { name: "fig6-diffusion", about: "quantum spreading with h = 0, L = 81" },
    Experiment { name: "fig7-biased", about: "ensemble spreading, bernoulli h = 1, p = 0.3, R = 100" },
    Experiment { name: "fig8-subdiffusion", about: "ensemble spreading, bernoulli h = 1, p = 0.5, R = 100, log time" },
    Experiment { name: "fig9-sinai", about: "classical ensemble, L = 401, t up to 1e6, (ln t)^4 fit" },
    Experiment { name: "classical-diffusion", about: "classical master equation ensemble with any disorder" },
    Experiment { name: "meanfield-dilute", about: "exclusion mean-field occupations against the master equation" },
    Experiment { name: "hn-contrast", about: "random-phase non-Hermitian hopping model, clean spectrum and spreading" },
];

pub fn defaults(name: &str) -> Result<ExperimentConfig> {
    let fig2 = ExperimentConfig {
        experiment: name.to_string(),
        sites: 31,
        hopping: 0.2,
        rate: 1.0,
        seed: 0,
        realizations: 1,
        disorder: Disorder::Uniform { h: 0.4 },
        grid: TimeGrid::Linear { t_max: 1.0, points: 2 },
        tolerance: ToleranceConfig::default(),
        meanfield: None,
        hatano_nelson: None,
    };
    let drift = ExperimentConfig { sites: 81, disorder: Disorder::Uniform { h: 1.0 }, grid: TimeGrid::Linear { t_max: 12.0, points: 241 }, ..fig2.clone() };
    let subdiffusion = TimeGrid::Logarithmic { t_min: 0.1, t_max: 300.0, per_decade: 20 };
    Ok(match name {
        "fig2-spectrum" => fig2,
        "fig3-reciprocal" => ExperimentConfig { disorder: Disorder::Zero, ..fig2 },
        "fig4-erratic" => ExperimentConfig { disorder: Disorder::Bernoulli { h: 0.4, p: 0.5 }, realizations: 3, ..fig2 },
        "fig5-drift" => drift,
        "fig6-diffusion" => ExperimentConfig { disorder: Disorder::Zero, grid: TimeGrid::Linear { t_max: 25.0, points: 251 }, ..drift },
        "fig7-biased" => ExperimentConfig {
            disorder: Disorder::Bernoulli { h: 1.0, p: 0.3 },
            realizations: 100,
            grid: TimeGrid::Linear { t_max: 15.0, points: 151 },
            ..drift
        },
        "fig8-subdiffusion" => ExperimentConfig { disorder: Disorder::Bernoulli { h: 1.0, p: 0.5 }, realizations: 100, grid: subdiffusion, ..drift },
        "fig9-sinai" => ExperimentConfig {
            sites: 401,
            hopping: 0.0,
            disorder: Disorder::Bernoulli { h: 1.0, p: 0.5 },
            realizations: 200,
            grid: TimeGrid::Logarithmic { t_min: 1.0, t_max: 1e6, per_decade: 20 },
            ..drift
        },
        "classical-diffusion" => {
            ExperimentConfig { sites: 401, hopping: 0.0, disorder: Disorder::Zero, grid: TimeGrid::Linear { t_max: 200.0, points: 201 }, ..drift }
        }
        "meanfield-dilute" => ExperimentConfig {
            hopping: 0.0,
            disorder: Disorder::Bernoulli { h: 1.0, p: 0.5 },
            grid: TimeGrid::Linear { t_max: 20.0, points: 101 },
            meanfield: Some(MeanFieldConfig { n_total: 0.01 }),
            ..drift
        },
        "hn-contrast" => ExperimentConfig {
            hopping: 1.0,
            disorder: Disorder::Bernoulli { h: 1.0, p: 0.5 },
            realizations: 100,
            grid: TimeGrid::Logarithmic { t_min: 0.1, t_max: 20.0, per_decade: 20 },
            hatano_nelson: Some(HatanoNelsonConfig { kappa: 0.4, convention: DiagonalConvention::EdgeHalfLoss }),
            ..drift
        },
        other => {
            let known: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
            bail!("unknown experiment '{other}' (known: {})", known.join(", "))
        }
    })
}

/// Run `cfg.experiment`, writing data files into `out`. Returns the
/// experiment-specific part of the summary.
pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    match cfg.experiment.as_str() {
        "fig2-spectrum" | "fig3-reciprocal" | "fig4-erratic" => spectrum(cfg, out),
        "fig5-drift" | "fig6-diffusion" => single_quantum(cfg, out),
        "fig7-biased" | "fig8-subdiffusion" => quantum_ensemble(cfg, out),
        "fig9-sinai" => sinai(cfg, out),
        "classical-diffusion" => classical(cfg, out),
        "meanfield-dilute" => meanfield(cfg, out),
        "hn-contrast" => hatano_nelson(cfg, out),
        other => bail!("unknown experiment '{other}'"),
    }
}

fn fit_value(fit: lskin::Result<ScalingFit>) -> Value {
    match fit {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn trace_fits(trace: &TransportTrace) -> Value {
    let w = default_window(trace);
    json!({
        "abs_n_cm": fit_value(fit_trace(trace, Field::AbsNCm, Some(w.clone()))),
        "d2": fit_value(fit_trace(trace, Field::D2, Some(w))),
    })
}

fn ensemble_info(e: &EnsembleTrace) -> Value {
    json!({
        "realizations": e.realizations(),
        "included": e.included.len(),
        "contaminated": e.contaminated,
        "failed": e.failed,
        "clean_points": e.clean_len,
        "t_clean": e.times.get(e.clean_len.saturating_sub(1)),
    })
}

fn spectrum(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let model_cfg = cfg.model();
    let mut runs = vec![];
    for r in 0..cfg.realizations as u64 {
        let model = model_cfg.build(r)?;
        let s = Superoperator::assemble(&model)?.spectrum()?;
        let tag = if cfg.realizations == 1 { String::new() } else { format!("_r{r}") };
        out.write_with(&format!("spectrum{tag}.csv"), |w| io::write_spectrum(w, &s.eigenvalues))?;
        let steady = s.steady_state.matrix().mapv(|z| z.re);
        out.write_with(&format!("steady_state{tag}.csv"), |w| io::write_grid(w, &steady))?;
        let profile = s.eigenmode_profile();
        out.write_with(&format!("eigenmode_profile{tag}.csv"), |w| io::write_grid(w, &profile))?;
        let pops = s.steady_state.populations();
        let peak = pops.iter().enumerate().fold(0, |b, (i, &x)| if x > pops[b] { i } else { b }) + 1;
        let zero_modes = s.eigenvalues.iter().filter(|z| z.norm() < 1e-9).count();
        runs.push(json!({
            "realization": r,
            "zero_modes": zero_modes,
            "max_re_lambda": s.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
            "steady_state": localization_metrics(&pops, 0.1)?,
            "steady_peak_site": peak,
            "profile_corner_mass": profile_corner_mass(&profile, 0.1)?,
            "walk": walk_extremes(&model.walk()),
        }));
    }
    Ok(json!({ "runs": runs }))
}

fn single_quantum(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let model = cfg.model().build(0)?;
    let n0 = center_site(cfg.sites);
    let times = cfg.grid.times()?;
    let run = evolve_recording(&model, &initial_state(cfg.sites, n0)?, &times, cfg.tolerance()?)?;
    out.write_with("trace.csv", |w| io::write_trace(w, &run.trace))?;
    let frames = run.trace.populations.as_deref().context("populations were not recorded")?;
    out.write_with("populations.csv", |w| io::write_snapshots(w, &run.trace.times, frames, "population"))?;
    Ok(json!({
        "n0": n0,
        "method": run.method,
        "trace_drift": run.trace_drift,
        "hermiticity_defect": run.hermiticity_defect,
        "clean_points": run.trace.clean_len(),
        "boundary_contaminated": run.trace.is_contaminated(),
        "fits": trace_fits(&run.trace),
    }))
}

fn quantum_ensemble(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let times = cfg.grid.times()?;
    let e = ensemble_evolve(&cfg.model(), &times, cfg.tolerance()?, cfg.realizations, EnsembleOptions::default())?;
    out.write_with("ensemble.csv", |w| io::write_ensemble(w, &e))?;
    let n0 = center_site(cfg.sites);
    Ok(json!({ "n0": n0, "ensemble": ensemble_info(&e), "fits": trace_fits(&e.mean_trace(n0)) }))
}

fn classical(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let times = cfg.grid.times()?;
    let e = classical_ensemble(&cfg.model(), &times, cfg.realizations, EnsembleOptions::default())?;
    out.write_with("ensemble.csv", |w| io::write_ensemble(w, &e))?;
    let n0 = center_site(cfg.sites);
    Ok(json!({ "n0": n0, "ensemble": ensemble_info(&e), "fits": trace_fits(&e.mean_trace(n0)) }))
}

fn sinai(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let sc = cfg.sinai()?;
    let outcome = sinai_experiment(&sc)?;
    let e = &outcome.ensemble;
    out.write_with("ensemble.csv", |w| io::write_ensemble(w, e))?;
    let n0 = center_site(sc.sites);
    let trace = e.mean_trace(n0);
    let t_end = trace.times[e.clean_len - 1];
    let window = time_window(&trace, 1e2, t_end);
    let last_two = time_window(&trace, t_end / 100.0, t_end);
    let sinai_value = |w: std::ops::Range<usize>, y: &[f64]| match fit_sinai(&trace.times[w.clone()], &y[w]) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let max_abs_n_cm = e.n_cm[..e.clean_len].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(json!({
        "run": {
            "seed": sc.seed,
            "L": sc.sites,
            "h": sc.h,
            "p": 0.5,
            "Q": sc.rate,
            "t_window_used": [trace.times[window.start.min(trace.len() - 1)], t_end],
            "clamp_count": outcome.clamp_count,
            "stepping_fallbacks": outcome.stepped,
            "boundary_contaminated": e.contaminated,
        },
        "ensemble": ensemble_info(e),
        "max_abs_n_cm": max_abs_n_cm,
        "fit": sinai_value(window.clone(), &trace.d2),
        "fit_last_two_decades": sinai_value(last_two, &trace.d2),
        "msd_fit": sinai_value(window, &e.msd),
    }))
}

fn meanfield(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let n_total = cfg.meanfield.context("missing [meanfield] table")?.n_total;
    let model = cfg.model().build(0)?;
    let times = cfg.grid.times()?;
    let p0 = PopulationVector::localized(cfg.sites, center_site(cfg.sites))?;
    let tol = cfg.tolerance()?;
    let run = meanfield_evolve(&model, &OccupationVector::scaled(&p0, n_total)?, &times, tol)?;
    out.write_with("occupations.csv", |w| io::write_snapshots(w, &run.times, &run.occupations, "n_l"))?;
    let cmp = dilute_comparison(&model, &p0, n_total, &times, tol.rtol)?;
    Ok(json!({
        "total_drift": run.total_drift,
        "min_occupation": run.min_occupation,
        "dilute": cmp,
    }))
}

fn hatano_nelson(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let pe = cfg.phase_ensemble()?;
    let clean = effective_hamiltonian(pe.sites, pe.hopping, pe.kappa, &vec![0.0; pe.sites - 1], DiagonalConvention::Uniform)?;
    let mut numeric = clean.eigenvalues()?;
    numeric.sort_by(|a, b| a.re.total_cmp(&b.re));
    let exact = clean_spectrum(pe.sites, pe.hopping, pe.kappa);
    let spectrum_error = numeric.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    out.write_with("spectrum.csv", |w| io::write_spectrum(w, &numeric))?;

    let h0 = effective_hamiltonian(pe.sites, pe.hopping, pe.kappa, &random_phases(pe.sites, pe.p, pe.seed, 0)?, pe.convention)?;
    let skin = skin_diagnostics(&h0)?;

    let times = cfg.grid.times()?;
    let e = phase_ensemble(&pe, &times, cfg.tolerance()?, cfg.realizations, EnsembleOptions::default())?;
    out.write_with("ensemble.csv", |w| io::write_ensemble(w, &e))?;
    let n0 = center_site(pe.sites);
    let trace = e.mean_trace(n0);
    let w = default_window(&trace);
    Ok(json!({
        "clean_spectrum_error": spectrum_error,
        "regime_warning": clean.regime_warning,
        "skin_r0": { "corner_mass": skin.corner_mass, "predicted_sites": skin.predicted_sites },
        "ensemble": ensemble_info(&e),
        "fits": trace_fits(&trace),
        "msd_fit": fit_value(fit_power(&trace.times[w.clone()], &e.msd[w])),
    }))
}
