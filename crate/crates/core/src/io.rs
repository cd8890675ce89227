//! CSV and JSON export. All floating-point output is written with 17
//! significant digits so runs can be diffed bitwise.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::characteristics::CharPath;
use crate::error::Result;
use crate::grid::GridFunction;
use crate::modulation::FrameSeries;
use crate::trajectory::{FieldTrajectory, SeriesBundle};
use crate::weights::{self, WeightSpec};

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// "x,value" rows, one per node.
pub fn write_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    let mut out = String::from("x,value\n");
    for (x, v) in f.grid.nodes().iter().zip(&f.values) {
        out.push_str(&fmt_f64(*x));
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// "t,value" rows.
pub fn write_series(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("t,value\n");
    for (t, v) in samples {
        out.push_str(&fmt_f64(*t));
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// One CSV per named series; returns the written file names.
pub fn write_series_bundle(dir: &Path, bundle: &SeriesBundle) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for (name, col) in &bundle.columns {
        let fname = format!("series_{name}.csv");
        let samples: Vec<(f64, f64)> = bundle.t.iter().copied().zip(col.iter().copied()).collect();
        write_series(&dir.join(&fname), &samples)?;
        files.push(fname);
    }
    Ok(files)
}

/// Snapshot CSVs with the sample time embedded in the file name; `stride`
/// subsamples the stored states.
pub fn write_snapshots(dir: &Path, traj: &FieldTrajectory, stride: usize) -> Result<Vec<String>> {
    let stride = stride.max(1);
    let mut files = Vec::new();
    let mut k = 0;
    while k < traj.len() {
        let fname = format!("snapshot_t{:.6}.csv", traj.times[k]);
        write_grid_function(&dir.join(&fname), &traj.state_at(k))?;
        files.push(fname);
        if k == traj.len() - 1 {
            break;
        }
        k = (k + stride).min(traj.len() - 1);
    }
    Ok(files)
}

/// "t,X,a,dxa,dxxa" rows.
pub fn write_char_path(path: &Path, cp: &CharPath) -> Result<()> {
    let mut out = String::from("t,X,a,dxa,dxxa\n");
    for s in &cp.samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.x),
            fmt_f64(s.a),
            fmt_f64(s.dxa),
            fmt_f64(s.dxxa)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// "s,mu,x_star,alpha_m1,alpha_1,xi_sup,xi_weighted_sup" rows.
pub fn write_frame_series(path: &Path, series: &FrameSeries, weight: &WeightSpec) -> Result<()> {
    let mut out = String::from("s,mu,x_star,alpha_m1,alpha_1,xi_sup,xi_weighted_sup\n");
    for f in &series.frames {
        let wsup = weights::weighted_sup(&f.xi, weight);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(f.s),
            fmt_f64(f.mu),
            fmt_f64(f.x_star),
            fmt_f64(f.alpha_m1),
            fmt_f64(f.alpha_1),
            fmt_f64(f.xi.sup_norm()),
            fmt_f64(wsup)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Two-column plain-text plot data plus a gnuplot script referencing every
/// emitted file. Decay-type series are written as (t, log value).
pub fn emit_plotdata(
    dir: &Path,
    series: &[(&str, Vec<(f64, f64)>, bool)],
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut script = String::from("set key outside\nplot \\\n");
    for (name, samples, logscale) in series {
        if samples.is_empty() {
            continue;
        }
        let fname = format!("{name}.dat");
        let mut out = String::new();
        for (t, v) in samples {
            let y = if *logscale { v.max(1e-300).ln() } else { *v };
            out.push_str(&format!("{} {}\n", fmt_f64(*t), fmt_f64(y)));
        }
        fs::write(dir.join(&fname), out)?;
        script.push_str(&format!("  \"{fname}\" with lines title \"{name}\", \\\n"));
        files.push(fname);
    }
    script.push_str("  NaN notitle\npause -1\n");
    fs::write(dir.join("plot.gp"), script)?;
    files.push("plot.gp".to_string());
    Ok(files)
}

/// Run manifest: parameters, produced files, exit status.
#[derive(Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub parameters: std::collections::BTreeMap<String, String>,
    pub files: Vec<String>,
    pub status: String,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    write_json(&path, manifest)?;
    Ok(path)
}

/// Create the directory (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Convenience: write with a trailing newline guard for text outputs.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn grid_function_round_trips_through_csv() {
        let dir = std::env::temp_dir().join("pjipm_io_test");
        ensure_dir(&dir).unwrap();
        let g = Grid::new(32).unwrap();
        let f = GridFunction::sample(&g, |x| x.sin() * 0.123456789012345678);
        let path = dir.join("f.csv");
        write_grid_function(&path, &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,value");
        for (line, (x, v)) in lines.zip(f.grid.nodes().iter().zip(&f.values)) {
            let mut parts = line.split(',');
            let xr: f64 = parts.next().unwrap().parse().unwrap();
            let vr: f64 = parts.next().unwrap().parse().unwrap();
            assert_eq!(xr.to_bits(), x.to_bits());
            assert_eq!(vr.to_bits(), v.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn plotdata_skips_empty_series() {
        let dir = std::env::temp_dir().join("pjipm_io_plot_test");
        ensure_dir(&dir).unwrap();
        let files = emit_plotdata(
            &dir,
            &[
                ("decay", vec![(0.0, 1.0), (1.0, 0.5)], true),
                ("empty", vec![], false),
            ],
        )
        .unwrap();
        assert!(files.contains(&"decay.dat".to_string()));
        assert!(!files.contains(&"empty.dat".to_string()));
        std::fs::remove_dir_all(&dir).ok();
    }
}
