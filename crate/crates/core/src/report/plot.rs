use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{AssetAnalysis, CrossSection, Report};
use crate::distribution::Side;
use crate::error::{Error, Result};

/// Figure ids understood by [`emit_plot_data`].
pub const FIGURES: [&str; 12] = [
    "mountain-cdf",
    "tails",
    "acf",
    "volclust",
    "leverage",
    "tra",
    "jb",
    "correlation",
    "eigen",
    "rolling",
    "distance",
    "clusters",
];

fn unknown(id: &str) -> Error {
    Error::UnknownFigure {
        id: id.to_string(),
        available: FIGURES.iter().map(|s| s.to_string()).collect(),
    }
}

fn missing(id: &str) -> Error {
    Error::InsufficientData(format!("report holds no data for figure {id}"))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".into()
    }
}

/// Writes the CSV data behind one figure under `dir`. Per-asset figures go
/// to `dir/<figure>/<asset>.csv`, cross-sectional ones to `dir/<figure>.csv`.
/// Each file starts with `#` comment lines naming axes and units.
pub fn emit_plot_data(report: &Report, figure: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    if !FIGURES.contains(&figure) {
        return Err(unknown(figure));
    }
    let files: Vec<(PathBuf, String)> = match figure {
        "tails" => tails(report).map(|t| vec![(dir.join("tails.csv"), t)]).unwrap_or_default(),
        "correlation" | "eigen" | "rolling" | "distance" | "clusters" => report
            .cross
            .as_ref()
            .and_then(|c| cross_figure(figure, c))
            .map(|t| vec![(dir.join(format!("{figure}.csv")), t)])
            .unwrap_or_default(),
        _ => report
            .analyses()
            .filter_map(|a| {
                asset_figure(figure, a).map(|t| (dir.join(figure).join(format!("{}.csv", a.row.asset_id)), t))
            })
            .collect(),
    };
    if files.is_empty() {
        return Err(missing(figure));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, text) in files {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn asset_figure(figure: &str, a: &AssetAnalysis) -> Option<String> {
    let id = &a.row.asset_id;
    let mut s = format!("# figure: {figure}\n# asset: {id}\n");
    match figure {
        "mountain-cdf" => {
            let m = a.mountain.as_ref()?;
            let _ = writeln!(s, "# x: |normalized return| in units of the sample std");
            let _ = writeln!(s, "# branch: 1-F(x) for side=right, F(-x) for side=left");
            let _ = writeln!(s, "# error band: binomial sqrt(branch*(1-branch)/n), n={}", m.n);
            s.push_str("x,branch,side\n");
            for side in [Side::Right, Side::Left] {
                for p in m.branch(side) {
                    let _ = writeln!(s, "{},{},{}", num(p.x), num(p.value), side.as_str());
                }
            }
        }
        "acf" => {
            let acf = a.acf.as_ref()?;
            let abs = a.vol_cluster.as_ref().map(|v| &v.acf_abs);
            let _ = writeln!(s, "# lag: in units of the return horizon");
            let _ = writeln!(s, "# acf_scaled, abs_acf_scaled: autocorrelation times sqrt(pair count)");
            let _ = writeln!(s, "# band: +-3 significance band in scaled units");
            s.push_str("lag,acf_scaled,abs_acf_scaled,count,band\n");
            for (i, lag) in acf.lags.iter().enumerate() {
                let abs_v = abs.and_then(|x| x.scaled_at(*lag)).map_or("NA".into(), num);
                let _ = writeln!(s, "{lag},{},{abs_v},{},3", num(acf.scaled_values[i]), acf.pair_counts[i]);
            }
        }
        "volclust" => {
            let f = a.vol_cluster.as_ref()?;
            let _ = writeln!(s, "# abs_acf: autocorrelation of |r|; fit: exp(intercept) * lag^slope");
            let _ = writeln!(s, "# slope: {} +- {}, r_squared: {}", num(f.slope), num(f.slope_stderr), num(f.r_squared));
            s.push_str("lag,abs_acf,used,fit\n");
            for (i, lag) in f.acf_abs.lags.iter().enumerate() {
                let used = f.used_lags.binary_search(lag).is_ok();
                let fit = (f.intercept + f.slope * (*lag as f64).ln()).exp();
                let _ = writeln!(s, "{lag},{},{},{}", num(f.acf_abs.values[i]), used as u8, num(fit));
            }
        }
        "leverage" => {
            let l = a.leverage.as_ref()?;
            let _ = writeln!(s, "# lag: k<0 pairs past returns with future |r|");
            let _ = writeln!(s, "# L_scaled: correlation times sqrt(count); band: +-3 in the same units");
            s.push_str("lag,L_scaled,count,band\n");
            for i in 0..l.lags.len() {
                let _ = writeln!(s, "{},{},{},3", l.lags[i], num(l.scaled_values[i]), l.pair_counts[i]);
            }
        }
        "tra" => {
            let t = a.tra.as_ref()?;
            let _ = writeln!(s, "# n: lag in days; delta: cumulative sum of C(k)-C(-k)");
            let _ = writeln!(s, "# days_used: {}", t.days_used);
            s.push_str("n,c_pos,c_neg,delta\n");
            for i in 0..t.lags.len() {
                let _ = writeln!(s, "{},{},{},{}", t.lags[i], num(t.c_pos[i]), num(t.c_neg[i]), num(t.delta[i]));
            }
        }
        "jb" => {
            let j = a.jb.as_ref()?;
            let _ = writeln!(s, "# horizon_days: aggregation horizon; jb: Jarque-Bera statistic");
            let _ = writeln!(s, "# log10-log10 slope: {} +- {}", num(j.slope), num(j.slope_stderr));
            s.push_str("horizon_days,jb,n,critical_95\n");
            for i in 0..j.horizons_days.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    num(j.horizons_days[i]),
                    num(j.jb_values[i]),
                    j.sample_sizes[i],
                    num(j.critical_value_95)
                );
            }
        }
        _ => return None,
    }
    Some(s)
}

fn tails(report: &Report) -> Option<String> {
    let mut s = String::from("# figure: tails\n# exponent: alpha for model=power, eta for model=exponential\n");
    s.push_str("asset,side,model,threshold_sigma,exponent,exponent_stderr,r_squared,n_tail\n");
    let mut any = false;
    for a in report.analyses() {
        for f in &a.tails {
            any = true;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                a.row.asset_id,
                f.side.as_str(),
                f.model.as_str(),
                num(f.threshold_sigma),
                num(f.exponent),
                num(f.exponent_stderr),
                num(f.r_squared),
                f.n_tail
            );
        }
    }
    any.then_some(s)
}

fn square_matrix(s: &mut String, labels: &[String], m: &nalgebra::DMatrix<f64>, order: &[usize]) {
    s.push_str("asset");
    for &j in order {
        s.push(',');
        s.push_str(&labels[j]);
    }
    s.push('\n');
    for &i in order {
        s.push_str(&labels[i]);
        for &j in order {
            let _ = write!(s, ",{}", num(m[(i, j)]));
        }
        s.push('\n');
    }
}

fn cross_figure(figure: &str, c: &CrossSection) -> Option<String> {
    let mut s = format!("# figure: {figure}\n");
    match figure {
        "correlation" => {
            let _ = writeln!(s, "# daily log-return correlation over {} common days", c.n_times);
            let order: Vec<usize> = (0..c.assets.len()).collect();
            square_matrix(&mut s, &c.assets, &c.correlation, &order);
        }
        "eigen" => {
            let e = &c.eigen;
            let n = e.eigenvalues_sorted_desc.len() as f64;
            let _ = writeln!(s, "# random-matrix upper edge: {} (fraction {})", num(e.baseline_edge), num(e.baseline_edge / n));
            let _ = writeln!(s, "# eigenvalues above the edge: {}", e.n_above_baseline);
            let b = c.bootstrap.as_ref();
            if let Some(b) = b {
                let _ = writeln!(s, "# bootstrap: {} trials, conservative = mean - 3 stderr", b.trials);
            }
            s.push_str("rank,eigenvalue,explained_fraction,bootstrap_mean,bootstrap_stderr,bootstrap_conservative\n");
            let at = |v: Option<&Vec<f64>>, i: usize| v.and_then(|v| v.get(i).copied()).map_or("NA".into(), num);
            for (i, (v, f)) in e.eigenvalues_sorted_desc.iter().zip(&e.explained_fraction).enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    i + 1,
                    num(*v),
                    num(*f),
                    at(b.map(|b| &b.mean), i),
                    at(b.map(|b| &b.stderr), i),
                    at(b.map(|b| &b.conservative), i)
                );
            }
        }
        "rolling" => {
            let r = c.rolling.as_ref()?;
            let _ = writeln!(s, "# first_fraction: first eigenvalue / N over the trailing window");
            s.push_str("timestamp,first_fraction,cum_mean_log_return\n");
            for p in r {
                let f = p.first_fraction.map_or("NA".into(), num);
                let _ = writeln!(s, "{},{f},{}", p.timestamp, num(p.cum_mean_log_return));
            }
        }
        "distance" => {
            let d = c.distance.as_ref()?;
            let _ = writeln!(s, "# euclidean distance of z-scored stylized facts, rows in linkage order");
            let cols: Vec<&str> = d.columns.iter().map(|c| c.name()).collect();
            let _ = writeln!(s, "# features: {}", cols.join(" "));
            square_matrix(&mut s, &d.labels, &d.matrix, &d.linkage_order);
        }
        "clusters" => {
            let (d, cl) = (c.distance.as_ref()?, c.clustering.as_ref()?);
            let _ = writeln!(s, "# complete linkage cut into {} clusters", cl.n_clusters);
            s.push_str("asset,cluster,leaf_position\n");
            for (pos, &i) in cl.leaf_order.iter().enumerate() {
                let _ = writeln!(s, "{},{},{pos}", d.labels[i], cl.labels[i]);
            }
        }
        _ => return None,
    }
    Some(s)
}
