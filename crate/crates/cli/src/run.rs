//! Scenario execution: builds the shared context, computes every requested
//! series, and emits one CSV per (arrival point, kind) plus a run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use toa_core::{
    classical_distribution, sample_gaussian_ensemble, scenario_momentum_grid, trace_arrivals,
    CrossingKind, DistributionSeries, MomentumGrid, ScenarioContext, SeriesKind,
};

use crate::config::{format_x, kind_slug, kind_tag, write_config, ScenarioConfig};
use crate::CliError;

pub struct RunOutput {
    pub manifest_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

fn ctx_err(context: String) -> impl FnOnce(toa_core::Error) -> CliError {
    move |source| CliError::Run { context, source }
}

/// Momentum grid and scenario context for a config. The automatic sizing
/// is a floor: `numerics.momentum.nodes` only ever raises the node count.
pub(crate) fn build_context(config: &ScenarioConfig) -> Result<ScenarioContext, CliError> {
    let t_extent = config.times.t_max.abs().max(config.times.t_min.abs());
    let auto = scenario_momentum_grid(
        &config.packet,
        &config.potential,
        &config.numerics.spatial,
        t_extent,
        &config.units,
    )
    .map_err(ctx_err("sizing the momentum grid".into()))?;
    let grid = match config.numerics.momentum_nodes {
        Some(n) if n > auto.nodes().len() => {
            let p_max = config.packet.p0.abs() + config.packet.support_halfwidth(&config.units);
            MomentumGrid::symmetric(p_max, n as f64 * std::f64::consts::PI / 4.0)
                .map_err(ctx_err(format!("building the {n}-node momentum grid")))?
        }
        _ => auto,
    };
    ScenarioContext::with_momentum_grid(
        config.packet,
        config.potential.clone(),
        config.numerics.spatial.clone(),
        grid,
        config.units,
    )
    .map_err(ctx_err("preparing the scenario context".into()))
}

/// Human-readable validation report: the applied defaults plus the
/// smallness parameters behind the incoming-asymptote identification.
pub fn validate_report(config: &ScenarioConfig) -> Result<String, CliError> {
    let ctx = build_context(config)?;
    let small = ctx.smallness();
    let grid = ctx.momentum_grid();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "config OK: {} arrival point(s), {} series kind(s), {} time nodes on [{}, {}]",
        config.arrivals.len(),
        config.kinds.len(),
        config.times.count,
        config.times.t_min,
        config.times.t_max
    );
    let _ = writeln!(
        out,
        "momentum grid: {} nodes covering |p| <= {:.4}",
        grid.nodes().len(),
        grid.nodes().last().copied().unwrap_or(0.0)
    );
    let _ = writeln!(
        out,
        "negative-momentum fraction of the packet: {:.3e}",
        small.negative_momentum_fraction
    );
    match small.barrier_edge {
        Some(edge) => {
            let _ = writeln!(
                out,
                "packet amplitude at the first potential edge (x = {edge}): {:.3e}",
                small.edge_amplitude
            );
        }
        None => {
            let _ = writeln!(out, "no potential segments: free propagation");
        }
    }
    Ok(out)
}

fn write_csv(path: &Path, series: &DistributionSeries, times: &[f64]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    let res: std::io::Result<()> = (|| {
        file.write_all(b"T,total,left,right\n")?;
        for (i, &t) in times.iter().enumerate() {
            writeln!(
                file,
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                t,
                series.total()[i],
                series.left()[i],
                series.right()[i]
            )?;
        }
        file.flush()
    })();
    res.map_err(io_err)
}

/// Run the scenario and write every output under `out_dir`: one CSV per
/// (arrival point, kind) and `manifest.txt` last, once everything else
/// succeeded. Output is deterministic for a fixed config.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let ctx = build_context(config)?;

    let quantum: Vec<SeriesKind> = config
        .kinds
        .iter()
        .copied()
        .filter(|&k| k != SeriesKind::Classical)
        .collect();
    let t_range = format!("T in [{}, {}]", config.times.t_min, config.times.t_max);
    let bundle = if quantum.is_empty() {
        None
    } else {
        let tags: Vec<&str> = quantum.iter().map(|&k| kind_tag(k)).collect();
        Some(
            ctx.series_bundle(&config.arrivals, &config.times, &quantum)
                .map_err(ctx_err(format!(
                    "computing [{}] at X = {:?} over {t_range}",
                    tags.join(", "),
                    config.arrivals
                )))?,
        )
    };

    let classical = if config.kinds.contains(&SeriesKind::Classical) {
        let ensemble = sample_gaussian_ensemble(
            &config.packet,
            config.numerics.classical_samples,
            config.numerics.seed,
            &config.units,
        )
        .map_err(ctx_err("sampling the classical ensemble".into()))?;
        let mut per_x = Vec::new();
        for &x in &config.arrivals {
            let context = format!("computing classical at X = {x} over {t_range}");
            let events = trace_arrivals(
                &ensemble,
                &config.potential,
                x,
                config.times.t_max,
                &config.units,
            )
            .map_err(ctx_err(context.clone()))?;
            per_x.push(
                classical_distribution(&events, x, &config.times, config.numerics.bandwidth)
                    .map_err(ctx_err(context))?,
            );
        }
        Some(per_x)
    } else {
        None
    };

    // Interleave back into (arrival point outer, requested kind inner).
    let mut series: Vec<&DistributionSeries> = Vec::new();
    let mut bundle_at = 0;
    for (xi, _) in config.arrivals.iter().enumerate() {
        for &kind in &config.kinds {
            if kind == SeriesKind::Classical {
                series.push(&classical.as_ref().expect("classical computed")[xi]);
            } else {
                series.push(&bundle.as_ref().expect("bundle computed").series[bundle_at]);
                bundle_at += 1;
            }
        }
    }

    let times = config.times.nodes();
    let mut csv_paths = Vec::new();
    let mut manifest = String::new();
    let _ = writeln!(
        manifest,
        "# Run manifest; regenerate the plot script with `toa plot <this file>`."
    );
    for line in write_config(config).lines() {
        let _ = writeln!(manifest, "config.{line}");
    }
    let grid = ctx.momentum_grid();
    let _ = writeln!(
        manifest,
        "numerics.momentum.nodes_effective = {}",
        grid.nodes().len()
    );
    let _ = writeln!(
        manifest,
        "numerics.momentum.p_max = {:.11e}",
        grid.nodes().last().copied().unwrap_or(0.0)
    );
    let small = ctx.smallness();
    let _ = writeln!(
        manifest,
        "report.negative_momentum_fraction = {:.11e}",
        small.negative_momentum_fraction
    );
    if small.barrier_edge.is_some() {
        let _ = writeln!(
            manifest,
            "report.barrier_edge_amplitude = {:.11e}",
            small.edge_amplitude
        );
    }
    if let Some(bundle) = &bundle {
        let _ = writeln!(
            manifest,
            "report.window_edge_ratio = {:.11e}",
            bundle.window_edge_ratio
        );
    }

    for s in &series {
        let name = format!("{}_x{}.csv", kind_slug(s.kind()), format_x(s.x()));
        let path = out_dir.join(&name);
        write_csv(&path, s, &times)?;
        let key = format!("series.{}.x{}", kind_slug(s.kind()), format_x(s.x()));
        let _ = writeln!(manifest, "{key}.file = {name}");
        let (peak_t, peak_h) = s.peak();
        let _ = writeln!(manifest, "{key}.peak_time = {peak_t:.11e}");
        let _ = writeln!(manifest, "{key}.peak_height = {peak_h:.11e}");
        csv_paths.push(path);
    }

    // Headline comparisons, when a run carries both sides of one.
    let find = |x: f64, kind: CrossingKind| {
        series
            .iter()
            .copied()
            .find(|s| s.x() == x && s.kind() == SeriesKind::Crossing(kind))
    };
    for &x in &config.arrivals {
        if let (Some(a), Some(b)) = (
            find(x, CrossingKind::KijowskiFree),
            find(x, CrossingKind::Proposal2Plus),
        ) {
            let sup = a
                .total()
                .iter()
                .zip(b.total())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            let _ = writeln!(
                manifest,
                "sup_dev.kijowski_free_vs_pi2_plus.x{} = {sup:.11e}",
                format_x(x)
            );
        }
        if let (Some(three), Some(one)) = (
            find(x, CrossingKind::Proposal3Plus),
            find(x, CrossingKind::Proposal1),
        ) {
            let _ = writeln!(
                manifest,
                "ratio.pi3_plus_to_pi1.x{} = {:.11e}",
                format_x(x),
                three.peak().1 / one.peak().1
            );
        }
    }

    let manifest_path = out_dir.join("manifest.txt");
    fs::write(&manifest_path, manifest).map_err(|source| CliError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(RunOutput {
        manifest_path,
        csv_paths,
    })
}
