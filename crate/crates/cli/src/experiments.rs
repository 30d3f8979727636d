//! Experiment implementations: each id produces one or more CSV tables.

use rayon::prelude::*;
use std::f64::consts::PI;

use zzest::bayes::{run_protocol, BayesConfig, SampleKind, Scheme};
use zzest::dynamics::{propagate_with_sensitivity, TimeGrid};
use zzest::fisher::qfi_curve;
use zzest::grape::{optimize, GradientMethod, GrapeConfig, GrapeResult};
use zzest::model::{
    ControlVector, EvolutionMode, FeedbackChannels, FeedbackConfig, SystemParams,
};
use zzest::{DensityMatrix, PureState};

use crate::config::RunConfig;
use crate::output::Table;
use crate::CliError;

fn numerical(e: zzest::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn run_experiment(id: &str, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    match id {
        "fig1" => fig1(cfg),
        "fig2" => fig2(cfg),
        "fig3a" => fig3a(cfg),
        "fig3b" => fig3b(cfg),
        "fig4a" => fig4a(cfg),
        "fig4b" => fig4b(cfg),
        "fig5a" => fig5(cfg, false),
        "fig5b" => fig5(cfg, true),
        "fig6a" => fig6a(cfg),
        "fig6b" => fig6b(cfg),
        "fig7a" => fig7a(cfg),
        "fig7b" => fig7b(cfg),
        "fig9" => fig9(cfg),
        "table1" => table1(cfg),
        "custom" => custom(cfg),
        other => Err(CliError::Config(format!("unknown experiment '{other}'"))),
    }
}

fn grid(cfg: &RunConfig) -> Result<TimeGrid, CliError> {
    TimeGrid::new(cfg.t_final, cfg.segments).map_err(|e| CliError::Config(e.to_string()))
}

/// QFI against time for zero controls under the given mode.
fn curve(
    params: &SystemParams,
    mode: EvolutionMode,
    grid: &TimeGrid,
    probe: &DensityMatrix,
) -> Result<Vec<(f64, f64)>, CliError> {
    let controls = vec![ControlVector::zero(); grid.segments()];
    curve_with_controls(params, mode, grid, probe, &controls)
}

fn curve_with_controls(
    params: &SystemParams,
    mode: EvolutionMode,
    grid: &TimeGrid,
    probe: &DensityMatrix,
    controls: &[ControlVector],
) -> Result<Vec<(f64, f64)>, CliError> {
    let traj =
        propagate_with_sensitivity(probe, params, controls, mode, grid).map_err(numerical)?;
    let values = qfi_curve(&traj).map_err(numerical)?;
    Ok(traj.times.iter().copied().zip(values).collect())
}

fn peak(curve: &[(f64, f64)]) -> f64 {
    curve.iter().map(|(_, q)| *q).fold(f64::NEG_INFINITY, f64::max)
}

fn feedback_mode(lambda: f64, channels: FeedbackChannels) -> Result<EvolutionMode, CliError> {
    Ok(EvolutionMode::Feedback(
        FeedbackConfig::new(lambda, 1.0, channels).map_err(|e| CliError::Config(e.to_string()))?,
    ))
}

fn grape_config(cfg: &RunConfig, clip: Option<f64>, mode: EvolutionMode) -> Result<GrapeConfig, CliError> {
    Ok(GrapeConfig {
        grid: grid(cfg)?,
        epsilon: cfg.epsilon,
        iterations: cfg.iterations,
        clip,
        mode,
        gradient_method: GradientMethod::Adjoint,
        restarts: None,
    })
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fig1(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let mut rows = Vec::new();
    for g in [0.1, 0.2] {
        let params = SystemParams::new(cfg.omega1, cfg.omega2, g, cfg.gamma, cfg.gamma)
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (t, q) in curve(&params, EvolutionMode::Free, &grid, &probe)? {
            rows.push(vec![fmt(t), fmt(g), fmt(q)]);
        }
    }
    Ok(vec![Table::new("fig1", &["t", "g_true", "qfi"], rows)])
}

fn fig2(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let params = cfg.params()?;
    let channels = cfg.channels()?;
    let lambdas: Vec<f64> = (0..33).map(|k| PI * k as f64 / 32.0).collect();
    let curves: Vec<_> = lambdas
        .par_iter()
        .map(|&lambda| curve(&params, feedback_mode(lambda, channels)?, &grid, &probe))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (lambda, curve) in lambdas.iter().zip(curves) {
        for (t, q) in curve {
            rows.push(vec![fmt(t), fmt(*lambda), fmt(q)]);
        }
    }
    Ok(vec![Table::new("fig2", &["t", "lambda", "qfi"], rows)])
}

fn lambda_peaks(
    cfg: &RunConfig,
    g: f64,
    lambdas: &[f64],
) -> Result<Vec<f64>, CliError> {
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let params = SystemParams::new(cfg.omega1, cfg.omega2, g, cfg.gamma, cfg.gamma)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let channels = cfg.channels()?;
    lambdas
        .par_iter()
        .map(|&lambda| Ok(peak(&curve(&params, feedback_mode(lambda, channels)?, &grid, &probe)?)))
        .collect()
}

fn fig3a(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let lambdas: Vec<f64> = (0..=16).map(|k| PI * k as f64 / 16.0).collect();
    let peaks = lambda_peaks(cfg, cfg.g_true, &lambdas)?;
    let rows = lambdas
        .iter()
        .zip(&peaks)
        .map(|(l, f)| vec![fmt(*l), fmt(*f)])
        .collect();
    Ok(vec![Table::new("fig3a", &["lambda", "fmax"], rows)])
}

fn fig3b(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let lambdas: Vec<f64> = (0..=16).map(|k| PI * k as f64 / 16.0).collect();
    let mut rows = Vec::new();
    for g in [0.1, 0.2, 0.3] {
        let peaks = lambda_peaks(cfg, g, &lambdas)?;
        let base = peaks[0];
        for (l, f) in lambdas.iter().zip(&peaks) {
            rows.push(vec![fmt(*l), fmt(g), fmt(f - base)]);
        }
    }
    Ok(vec![Table::new("fig3b", &["lambda", "g_true", "delta_fmax"], rows)])
}

fn eta_curves(
    cfg: &RunConfig,
    etas: &[f64],
) -> Result<Vec<Vec<(f64, f64)>>, CliError> {
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let params = cfg.params()?;
    let channels = cfg.channels()?;
    etas.par_iter()
        .map(|&eta| {
            let config = FeedbackConfig::new(cfg.lambda, eta, channels)
                .map_err(|e| CliError::Config(e.to_string()))?;
            curve(&params, EvolutionMode::ImperfectFeedback(config), &grid, &probe)
        })
        .collect()
}

fn fig4a(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let etas: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let curves = eta_curves(cfg, &etas)?;
    let mut rows = Vec::new();
    for (eta, curve) in etas.iter().zip(curves) {
        for (t, q) in curve {
            rows.push(vec![fmt(t), fmt(*eta), fmt(q)]);
        }
    }
    Ok(vec![Table::new("fig4a", &["t", "eta", "qfi"], rows)])
}

fn fig4b(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let etas: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let curves = eta_curves(cfg, &etas)?;
    let rows = etas
        .iter()
        .zip(&curves)
        .map(|(eta, curve)| {
            let (_, q) = curve.last().expect("curve has the final time");
            vec![fmt(*eta), fmt(*q)]
        })
        .collect();
    Ok(vec![Table::new("fig4b", &["eta", "qfi"], rows)])
}

fn optimize_hybrid(
    cfg: &RunConfig,
    clip: Option<f64>,
    probe: &DensityMatrix,
    params: &SystemParams,
) -> Result<GrapeResult, CliError> {
    let mode = feedback_mode(cfg.lambda, cfg.channels()?)?;
    let config = grape_config(cfg, clip, mode)?;
    optimize(&config, params, probe).map_err(numerical)
}

fn fig5(cfg: &RunConfig, clipped: bool) -> Result<Vec<Table>, CliError> {
    let clip = if clipped { Some(cfg.clip.unwrap_or(0.2)) } else { None };
    let result = optimize_hybrid(cfg, clip, &PureState::plus_plus().density(), &cfg.params()?)?;
    let dt = cfg.t_final / cfg.segments as f64;
    let axes = ["x", "y", "z"];
    let mut rows = Vec::new();
    for (m, u) in result.best_controls.iter().enumerate() {
        for qubit in 0..2 {
            for (a, axis) in axes.iter().enumerate() {
                rows.push(vec![
                    fmt(m as f64 * dt),
                    (qubit + 1).to_string(),
                    axis.to_string(),
                    fmt(u.0[3 * qubit + a]),
                ]);
            }
        }
    }
    let name = if clipped { "fig5b" } else { "fig5a" };
    Ok(vec![Table::new(name, &["t", "qubit", "axis", "u"], rows)])
}

fn fig6a(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let params = cfg.params()?;
    let grid = grid(cfg)?;
    let mode = feedback_mode(cfg.lambda, cfg.channels()?)?;
    let probes = [
        ("plus_plus", PureState::plus_plus()),
        ("phi_plus", PureState::bell_phi_plus()),
        ("psi_plus", PureState::bell_psi_plus()),
    ];
    let mut rows = Vec::new();
    for (label, probe) in probes {
        let rho0 = probe.density();
        let result = optimize_hybrid(cfg, cfg.clip, &rho0, &params)?;
        for (t, q) in curve_with_controls(&params, mode, &grid, &rho0, &result.best_controls)? {
            rows.push(vec![fmt(t), label.to_string(), fmt(q)]);
        }
    }
    Ok(vec![Table::new("fig6a", &["t", "probe", "qfi"], rows)])
}

fn fig6b(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let grid = grid(cfg)?;
    let mode = feedback_mode(cfg.lambda, cfg.channels()?)?;
    let probe = PureState::plus_plus().density();
    let mut rows = Vec::new();
    for g in [0.1, 0.2, 0.3] {
        let params = SystemParams::new(cfg.omega1, cfg.omega2, g, cfg.gamma, cfg.gamma)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let result = optimize_hybrid(cfg, cfg.clip, &probe, &params)?;
        for (t, q) in curve_with_controls(&params, mode, &grid, &probe, &result.best_controls)? {
            rows.push(vec![fmt(t), fmt(g), fmt(q)]);
        }
    }
    Ok(vec![Table::new("fig6b", &["t", "g_true", "qfi"], rows)])
}

fn fig7a(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let params = cfg.params()?;
    let probe = PureState::plus_plus().density();
    let hybrid = optimize_hybrid(cfg, cfg.clip, &probe, &params)?;
    let grape_only = optimize(
        &grape_config(cfg, cfg.clip, EvolutionMode::Free)?,
        &params,
        &probe,
    )
    .map_err(numerical)?;
    let mut rows = Vec::new();
    for (label, history) in [("hybrid", &hybrid.qfi_history), ("grape", &grape_only.qfi_history)]
    {
        for (i, q) in history.iter().enumerate() {
            rows.push(vec![i.to_string(), label.to_string(), fmt(*q)]);
        }
    }
    Ok(vec![Table::new("fig7a", &["iteration", "scheme", "qfi"], rows)])
}

fn fig7b(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let params = cfg.params()?;
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let mode = feedback_mode(cfg.lambda, cfg.channels()?)?;
    let hybrid = optimize_hybrid(cfg, cfg.clip, &probe, &params)?;

    let mut rows = Vec::new();
    for (t, q) in curve(&params, EvolutionMode::Free, &grid, &probe)? {
        rows.push(vec![fmt(t), "none".into(), fmt(q)]);
    }
    for (t, q) in curve(&params, mode, &grid, &probe)? {
        rows.push(vec![fmt(t), "feedback".into(), fmt(q)]);
    }
    for (t, q) in curve_with_controls(&params, mode, &grid, &probe, &hybrid.best_controls)? {
        rows.push(vec![fmt(t), "hybrid".into(), fmt(q)]);
    }
    Ok(vec![Table::new("fig7b", &["t", "scheme", "qfi"], rows)])
}

fn protocol_config(
    cfg: &RunConfig,
    scheme: Scheme,
    kind: SampleKind,
    seed: u64,
) -> Result<BayesConfig, CliError> {
    Ok(BayesConfig {
        batches: cfg.batches,
        copies_per_batch: cfg.copies,
        scheme,
        sample_kind: kind,
        seed,
        grid: grid(cfg)?,
        g_true: cfg.g_true,
        params: cfg.params()?,
        channels: cfg.channels()?,
        grape_iterations: 50,
    })
}

fn require_seed(cfg: &RunConfig, id: &str) -> Result<u64, CliError> {
    cfg.seed
        .ok_or_else(|| CliError::Config(format!("{id} requires an explicit --seed for reproducibility")))
}

fn fig9(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let seed = require_seed(cfg, "fig9")?;
    let mut rows = Vec::new();
    for (scheme, scheme_label) in [(Scheme::None, "none"), (Scheme::Feedback, "feedback")] {
        for (kind, kind_label) in
            [(SampleKind::Perfect, "perfect"), (SampleKind::Imperfect, "imperfect")]
        {
            let record =
                run_protocol(&protocol_config(cfg, scheme, kind, seed)?).map_err(numerical)?;
            for (batch, estimate) in record.estimates.iter().enumerate() {
                rows.push(vec![
                    (batch + 1).to_string(),
                    scheme_label.to_string(),
                    kind_label.to_string(),
                    fmt(*estimate),
                ]);
            }
        }
    }
    Ok(vec![Table::new("fig9", &["batch", "scheme", "sample_kind", "g_hat"], rows)])
}

fn table1(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let seed = require_seed(cfg, "table1")?;
    let mut rows = Vec::new();
    for (scheme, scheme_label) in [
        (Scheme::None, "none"),
        (Scheme::Feedback, "feedback"),
        (Scheme::Hybrid, "hybrid"),
    ] {
        for (kind, kind_label) in
            [(SampleKind::Imperfect, "imperfect"), (SampleKind::Perfect, "perfect")]
        {
            let record =
                run_protocol(&protocol_config(cfg, scheme, kind, seed)?).map_err(numerical)?;
            rows.push(vec![scheme_label.to_string(), kind_label.to_string(), fmt(record.mse)]);
        }
    }
    Ok(vec![Table::new("table1", &["scheme", "sample_kind", "mse"], rows)])
}

fn custom(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let params = cfg.params()?;
    let grid = grid(cfg)?;
    let probe = PureState::plus_plus().density();
    let mode = mode_from_config(cfg)?;
    let rows = curve(&params, mode, &grid, &probe)?
        .into_iter()
        .map(|(t, q)| vec![fmt(t), fmt(q)])
        .collect();
    Ok(vec![Table::new("custom", &["t", "qfi"], rows)])
}

/// Mode inferred from the overrides: imperfect detection when eta < 1, plain
/// feedback when lambda > 0, free otherwise.
pub fn mode_from_config(cfg: &RunConfig) -> Result<EvolutionMode, CliError> {
    let channels = cfg.channels()?;
    if cfg.eta < 1.0 {
        Ok(EvolutionMode::ImperfectFeedback(
            FeedbackConfig::new(cfg.lambda, cfg.eta, channels)
                .map_err(|e| CliError::Config(e.to_string()))?,
        ))
    } else if cfg.lambda > 0.0 {
        feedback_mode(cfg.lambda, channels)
    } else {
        Ok(EvolutionMode::Free)
    }
}

// --- scan ---

#[derive(Debug, Clone)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Parse `name=start:stop:count` into an inclusive linspace.
pub fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("axis '{spec}' is not name=start:stop:count")))?;
    if !["t", "lambda", "eta", "g"].contains(&name) {
        return Err(CliError::Config(format!(
            "axis '{name}' must be one of t, lambda, eta, g"
        )));
    }
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("axis '{spec}' needs start:stop:count")));
    }
    let start: f64 = parts[0].parse().map_err(|_| CliError::Config("bad axis start".into()))?;
    let stop: f64 = parts[1].parse().map_err(|_| CliError::Config("bad axis stop".into()))?;
    let count: usize = parts[2].parse().map_err(|_| CliError::Config("bad axis count".into()))?;
    if count == 0 || (count == 1 && start != stop) {
        return Err(CliError::Config("axis needs count >= 1 (and >= 2 unless start == stop)".into()));
    }
    let values = if count == 1 {
        vec![start]
    } else {
        (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()
    };
    Ok(Axis { name: name.to_string(), values })
}

pub fn run_scan(axes: &[Axis], metric: &str, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(CliError::Config("scan takes one or two --axis arguments".into()));
    }
    if !["qfi", "fmax"].contains(&metric) {
        return Err(CliError::Config(format!("metric '{metric}' must be qfi or fmax")));
    }

    // Cartesian grid, row-major over the axes in the given order.
    let points: Vec<Vec<(String, f64)>> = if axes.len() == 1 {
        axes[0].values.iter().map(|&v| vec![(axes[0].name.clone(), v)]).collect()
    } else {
        let mut out = Vec::new();
        for &a in &axes[0].values {
            for &b in &axes[1].values {
                out.push(vec![(axes[0].name.clone(), a), (axes[1].name.clone(), b)]);
            }
        }
        out
    };

    let values: Vec<f64> = points
        .par_iter()
        .map(|point| evaluate_point(point, metric, cfg))
        .collect::<Result<_, _>>()?;

    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.push(metric.to_string());
    let rows = points
        .iter()
        .zip(&values)
        .map(|(point, v)| {
            let mut row: Vec<String> = point.iter().map(|(_, x)| fmt(*x)).collect();
            row.push(fmt(*v));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    Ok(vec![Table::new("scan", &header_refs, rows)])
}

fn evaluate_point(point: &[(String, f64)], metric: &str, cfg: &RunConfig) -> Result<f64, CliError> {
    let mut local = cfg.clone();
    let mut t_value = None;
    let mut lambda_axis = false;
    let mut eta_axis = false;
    for (name, value) in point {
        match name.as_str() {
            "t" => t_value = Some(*value),
            "lambda" => {
                local.lambda = *value;
                lambda_axis = true;
            }
            "eta" => {
                local.eta = *value;
                eta_axis = true;
            }
            "g" => local.g_true = *value,
            _ => unreachable!("axis names validated at parse time"),
        }
    }
    let channels = local.channels()?;
    let mode = if eta_axis || local.eta < 1.0 {
        EvolutionMode::ImperfectFeedback(
            FeedbackConfig::new(local.lambda, local.eta, channels)
                .map_err(|e| CliError::Config(e.to_string()))?,
        )
    } else if lambda_axis || local.lambda > 0.0 {
        feedback_mode(local.lambda, channels)?
    } else {
        EvolutionMode::Free
    };
    let params = local.params()?;
    let probe = PureState::plus_plus().density();

    match metric {
        "fmax" => {
            let grid = grid(&local)?;
            Ok(peak(&curve(&params, mode, &grid, &probe)?))
        }
        "qfi" => {
            let horizon = t_value.unwrap_or(local.t_final);
            if horizon <= 0.0 {
                return Ok(0.0);
            }
            let grid = TimeGrid::new(horizon, local.segments)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let curve = curve(&params, mode, &grid, &probe)?;
            Ok(curve.last().expect("curve has the final time").1)
        }
        _ => unreachable!("metric validated above"),
    }
}
