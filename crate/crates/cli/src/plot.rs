//! Gnuplot script generation from a run manifest. The script only restyles
//! CSV files already on disk; nothing is recomputed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toa_core::SeriesKind;

use crate::config::{format_x, kind_slug, parse_key_values, KIND_TAGS};
use crate::CliError;

fn manifest_err(msg: String) -> CliError {
    CliError::Manifest(msg)
}

/// Per-kind base style. Solid references, dashed proposals, markers for the
/// quantum flux and the classical histogram so overlap stays readable.
fn style_for(slug: &str, outgoing_flux_pair: bool) -> (&'static str, &'static str) {
    match slug {
        "kijowski_free" => ("with lines lw 2 lc rgb '#1f77b4'", "Pi_K"),
        "pi1" => ("with lines lw 2 dashtype 4 lc rgb '#ff7f0e'", "Pi_1"),
        "pi2_plus" => ("with lines lw 2 dashtype 2 lc rgb '#2ca02c'", "Pi_2+"),
        "pi2_minus" => ("with lines lw 2 lc rgb '#9467bd'", "Pi_2-"),
        "pi3_plus" => ("with lines lw 2 lc rgb '#17becf'", "Pi_3+"),
        "pi3_minus" => ("with lines lw 2 dashtype 5 lc rgb '#8c564b'", "Pi_3-"),
        "flux" if outgoing_flux_pair => {
            ("with lines lw 2 dashtype 3 lc rgb '#d62728'", "J")
        }
        "flux" => ("with points pt 7 ps 0.35 lc rgb '#d62728'", "J"),
        "classical" => ("with points pt 4 ps 0.5 lc rgb '#7f7f7f'", "classical"),
        other => panic!("no plot style for kind {other}"),
    }
}

/// Write `plot.gp` next to the manifest: one panel per arrival point, the
/// series in the order the run requested them. Returns the script path.
pub fn emit_plot_script(manifest_path: &Path) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|source| CliError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let map = parse_key_values(manifest_path, &text)?;
    let value = |key: &str| map.get(key).map(|(_, v)| v.as_str());

    let arrivals: Vec<f64> = value("config.arrivals.x")
        .ok_or_else(|| manifest_err("manifest lacks config.arrivals.x".into()))?
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| manifest_err(format!("bad config.arrivals.x: {e}")))?;
    let kinds: Vec<&str> = value("config.kinds")
        .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let slugs: Vec<&'static str> = kinds
        .iter()
        .map(|tag| {
            KIND_TAGS
                .iter()
                .find(|(t, _)| t == tag)
                .map(|&(_, k)| kind_slug(k))
                .ok_or_else(|| manifest_err(format!("unknown series kind {tag} in manifest")))
        })
        .collect::<Result<_, _>>()?;
    if arrivals.is_empty() || slugs.is_empty() {
        return Err(manifest_err("manifest describes a run with nothing to plot".into()));
    }
    let first_edge: Option<f64> = value("config.potential.segment.1.left")
        .map(|v| {
            v.parse()
                .map_err(|e| manifest_err(format!("bad potential edge: {e}")))
        })
        .transpose()?;

    let mut sorted = slugs.clone();
    sorted.sort_unstable();
    let outgoing_flux_pair = sorted == ["flux", "pi2_minus"];
    // The exact-minus-reflected difference curve is meaningful upstream of
    // the potential and only for the bare exact/pi3+/flux comparison.
    let diff_set = sorted == ["flux", "pi1", "pi3_plus"];
    let pi1_slug = kind_slug(SeriesKind::Crossing(toa_core::CrossingKind::Proposal1));

    let mut gp = String::new();
    let _ = writeln!(
        gp,
        "# Generated from {}. The script only restyles the CSVs; rerun `toa` to recompute.",
        manifest_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| manifest_path.display().to_string())
    );
    let _ = writeln!(gp, "set datafile separator ','");
    let _ = writeln!(
        gp,
        "set terminal pngcairo size 960,{} enhanced",
        360 * arrivals.len()
    );
    let _ = writeln!(gp, "set output 'figures.png'");
    let _ = writeln!(gp, "set multiplot layout {},1", arrivals.len());
    let _ = writeln!(gp, "set xlabel 'T'");
    let _ = writeln!(gp, "set ylabel 'arrival density'");
    let _ = writeln!(gp, "set key top right");

    for &x in &arrivals {
        let fx = format_x(x);
        let _ = writeln!(gp, "\nset title 'X = {x}'");
        let mut clauses = Vec::new();
        for slug in &slugs {
            let file = value(&format!("series.{slug}.x{fx}.file")).ok_or_else(|| {
                manifest_err(format!("manifest lists no CSV for {slug} at X = {x}"))
            })?;
            let (style, label) = style_for(slug, outgoing_flux_pair);
            // Against the signed flux, the outgoing proposal shows its
            // from-the-left (positive-momentum) crossing component: that is
            // the branch the flux can match downstream.
            let column = if *slug == "pi2_minus" && outgoing_flux_pair {
                "1:3"
            } else {
                "1:2"
            };
            clauses.push(format!(
                "  '{file}' skip 1 using {column} {style} title '{label}'"
            ));
        }
        if diff_set && first_edge.map(|edge| x < edge).unwrap_or(false) {
            let file = value(&format!("series.{pi1_slug}.x{fx}.file")).ok_or_else(|| {
                manifest_err(format!("manifest lists no CSV for {pi1_slug} at X = {x}"))
            })?;
            clauses.push(format!(
                "  '{file}' skip 1 using 1:($3-$4) with lines lw 2 dashtype 3 lc rgb '#555555' title 'Pi_1 L-R'"
            ));
        }
        let _ = writeln!(gp, "plot \\\n{}", clauses.join(", \\\n"));
    }
    let _ = writeln!(gp, "\nunset multiplot");

    let script_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("plot.gp");
    std::fs::write(&script_path, gp).map_err(|source| CliError::Io {
        path: script_path.clone(),
        source,
    })?;
    Ok(script_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::run::run_scenario;

    fn script_for(name: &str, shrink: bool) -> String {
        let dir = tempfile::tempdir().unwrap();
        let mut config = preset(name).unwrap();
        if shrink {
            config.times = toa_core::TimeGrid::new(0.0, 2.0, 3).unwrap();
        }
        let out = run_scenario(&config, dir.path()).unwrap();
        let script = emit_plot_script(&out.manifest_path).unwrap();
        assert_eq!(script.file_name().unwrap(), "plot.gp");
        std::fs::read_to_string(script).unwrap()
    }

    #[test]
    fn upstream_panel_carries_the_net_rightward_difference_curve() {
        let gp = script_for("figure3", true);
        assert!(gp.contains("using 1:($3-$4)"), "{gp}");
        assert!(gp.contains("multiplot layout 1,1"), "{gp}");
        assert!(gp.contains("set title 'X = -2'"), "{gp}");
    }

    #[test]
    fn downstream_panel_of_the_same_kinds_omits_the_difference_curve() {
        let gp = script_for("figure4", true);
        assert!(!gp.contains("($3-$4)"), "{gp}");
        assert!(gp.contains("'pi1_x5.csv' skip 1 using 1:2"), "{gp}");
        assert!(gp.contains("pt 7"), "flux stays a point series: {gp}");
    }

    #[test]
    fn outgoing_flux_pair_plots_the_positive_momentum_column() {
        let gp = script_for("figure2", true);
        assert!(gp.contains("'pi2_minus_x-2.csv' skip 1 using 1:3"), "{gp}");
        assert!(!gp.contains("pt 7"), "flux switches to a dashed line: {gp}");
        assert!(gp.contains("multiplot layout 3,1"), "{gp}");
    }

    #[test]
    fn missing_series_entries_are_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.txt");
        std::fs::write(
            &manifest,
            "config.arrivals.x = 5\nconfig.kinds = pi1\n",
        )
        .unwrap();
        let err = emit_plot_script(&manifest).unwrap_err();
        assert!(
            err.to_string().contains("no CSV for pi1 at X = 5"),
            "{err}"
        );
    }
}
