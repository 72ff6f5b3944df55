//! Merge RD CSVs into bitrate-sorted series.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};

use crate::rdcsv::{self, RdRow};
use crate::ReportArgs;

/// Read and merge files in order; later rows replace earlier ones with the
/// same cell id.
pub fn merge(paths: &[PathBuf]) -> Result<Vec<RdRow>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(rdcsv::read_rows(p)?);
    }
    Ok(rdcsv::dedupe_keep_last(all))
}

/// (scene, space, path, preset).
pub type SeriesKey = (String, String, String, String);

/// One series per key, points sorted by total bits.
pub fn series(rows: &[RdRow]) -> Vec<(SeriesKey, Vec<&RdRow>)> {
    let mut out: Vec<(SeriesKey, Vec<&RdRow>)> = Vec::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let key = (r.scene.clone(), r.space.clone(), r.path.clone(), r.preset.clone());
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push(r),
            None => out.push((key, vec![r])),
        }
    }
    for (_, pts) in &mut out {
        pts.sort_by_key(|r| (r.bits_total, r.qp));
    }
    out
}

fn fmt_psnr(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

pub fn render(rows: &[RdRow]) -> String {
    let mut out = String::new();
    for ((scene, space, path, preset), pts) in series(rows) {
        let _ = writeln!(out, "# scene={scene} space={space} path={path} preset={preset}");
        let _ = writeln!(out, "bits_total\tpsnr_left\tpsnr_right\tqp");
        for r in pts {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.bits_total.unwrap_or(0),
                fmt_psnr(r.psnr_left),
                fmt_psnr(r.psnr_right),
                r.qp
            );
        }
        out.push('\n');
    }
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        let _ = writeln!(out, "# {failed} failed cells omitted");
    }
    out
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let rows = merge(&a.csv)?;
    let text = render(&rows);
    match &a.out {
        Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.merged {
        rdcsv::write_rows(p, &rows)?;
    }
    Ok(())
}
