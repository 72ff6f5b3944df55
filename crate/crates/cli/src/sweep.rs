//! Colour space × rank preset × QP grids.
//!
//! Cells sharing a (space, preset) pair share one Tucker analysis, so the
//! solver runs once per group and every QP reuses it. Finished cells are
//! appended to `rd.csv` as they complete; a rerun skips every cell whose id
//! already has a successful row.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use mescode_core::codec::{
    analyze, decode_stream, encode_analysis, entropy::EntropyTag, rank_preset, Backend, DecodeOptions, PathTag,
    SolveOptions,
};
use mescode_core::color::ColorSpace;
use mescode_core::metrics::{scene_psnr, PsnrDomain};
use mescode_core::scene::{load_scene, SceneStack};

use crate::rdcsv::{self, Appender, RdRow};
use crate::{check_qp, check_scene_dir, usage, SweepArgs};

pub const RD_CSV: &str = "rd.csv";

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scene: PathBuf,
    pub spaces: Vec<ColorSpace>,
    pub presets: Vec<usize>,
    pub qps: Vec<u8>,
    pub path: PathTag,
    pub backend: Backend,
    pub out: PathBuf,
    /// Worker threads; `None` uses every CPU.
    pub jobs: Option<usize>,
    pub solve: SolveOptions,
    pub decode: DecodeOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.spaces.is_empty() || self.presets.is_empty() || self.qps.is_empty() {
            return Err(usage("sweep needs at least one space, preset and qp"));
        }
        for &qp in &self.qps {
            check_qp(qp)?;
        }
        if let Some(&k) = self.presets.iter().find(|&&k| !(1..=5).contains(&k)) {
            return Err(usage(format!("rank preset {k} outside 1..=5")));
        }
        if self.jobs == Some(0) {
            return Err(usage("--jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out.join(RD_CSV)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Grid cells with a successful row after the run.
    pub succeeded: usize,
}

struct Cell {
    qp: u8,
    id: String,
}

struct Group {
    space: ColorSpace,
    preset: usize,
    cells: Vec<Cell>,
}

fn space_rank(s: &str) -> usize {
    ["rgb", "ycbcr", "ipt"].iter().position(|&n| n == s).unwrap_or(usize::MAX)
}

/// Canonical row order: scene, space, path, preset, qp.
pub fn grid_order(rows: &mut [RdRow]) {
    rows.sort_by(|a, b| {
        let key = |r: &RdRow| {
            (r.scene.clone(), space_rank(&r.space), r.space.clone(), r.path.clone(), r.preset.parse::<usize>().ok(), r.preset.clone(), r.qp)
        };
        key(a).cmp(&key(b))
    });
}

fn measure(
    scene: &SceneStack,
    analysis: &mescode_core::codec::Analysis,
    qp: u8,
    spec: &SweepSpec,
) -> mescode_core::Result<(mescode_core::codec::BitBreakdown, Vec<f64>)> {
    let enc = encode_analysis(analysis, qp, spec.path, EntropyTag::Range, &spec.backend)?;
    let dec = decode_stream(&enc.bytes, &spec.decode)?;
    let p = scene_psnr(scene, &dec.scene, PsnrDomain::Rgb)?;
    Ok((enc.bits, p.per_view))
}

fn run_group(scene: &SceneStack, g: &Group, spec: &SweepSpec, sink: &Mutex<Appender>) -> Result<(usize, usize)> {
    let space = g.space.name();
    let preset = g.preset.to_string();
    let row = |cell: &Cell| RdRow {
        scene: scene.name().to_string(),
        space: space.into(),
        preset: preset.clone(),
        qp: cell.qp,
        path: spec.path.name().into(),
        bits_latent: None,
        bits_backend: None,
        bits_total: None,
        psnr_left: None,
        psnr_right: None,
        error: String::new(),
        cell_id: cell.id.clone(),
    };
    let analysis = rank_preset(g.preset, scene.meta().tensor_dims())
        .and_then(|ranks| analyze(scene, g.space, ranks, &spec.solve));
    let (mut ok, mut failed) = (0, 0);
    for cell in &g.cells {
        let mut r = row(cell);
        match analysis.as_ref().map_err(|e| e.to_string()).and_then(|a| measure(scene, a, cell.qp, spec).map_err(|e| e.to_string())) {
            Ok((bits, psnr)) => {
                r.bits_latent = Some(bits.latent);
                r.bits_backend = Some(bits.backend);
                r.bits_total = Some(bits.total);
                r.psnr_left = psnr.first().copied();
                r.psnr_right = psnr.get(1).copied();
                ok += 1;
            }
            Err(msg) => {
                r.error = msg;
                failed += 1;
            }
        }
        sink.lock().expect("csv writer poisoned").append(&r)?;
    }
    Ok((ok, failed))
}

/// Run every pending cell of the grid and rewrite `rd.csv` and the
/// `rd_<space>.dat` files.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary> {
    spec.validate()?;
    check_scene_dir(&spec.scene)?;
    let scene = load_scene(&spec.scene).with_context(|| format!("loading {}", spec.scene.display()))?;
    std::fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let csv = spec.csv_path();

    let previous = if csv.exists() { rdcsv::read_rows(&csv)? } else { Vec::new() };
    let done: HashSet<String> = previous.iter().filter(|r| r.ok()).map(|r| r.cell_id.clone()).collect();

    let mut summary = SweepSummary::default();
    let mut grid = HashSet::new();
    let mut groups = Vec::new();
    for &space in &spec.spaces {
        for &preset in &spec.presets {
            let mut cells = Vec::new();
            for &qp in &spec.qps {
                let id = rdcsv::cell_id(
                    scene.name(),
                    space.name(),
                    &preset.to_string(),
                    qp,
                    spec.path.name(),
                    spec.backend.kind(),
                );
                grid.insert(id.clone());
                if done.contains(&id) {
                    summary.skipped += 1;
                } else if !cells.iter().any(|c: &Cell| c.id == id) {
                    cells.push(Cell { qp, id });
                }
            }
            if !cells.is_empty() {
                groups.push(Group { space, preset, cells });
            }
        }
    }

    let sink = Mutex::new(Appender::open(&csv)?);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = spec.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build()?;
    let counts = pool.install(|| {
        groups.par_iter().map(|g| run_group(&scene, g, spec, &sink)).collect::<Result<Vec<_>>>()
    })?;
    drop(sink);
    for (ok, failed) in counts {
        summary.computed += ok;
        summary.failed += failed;
    }

    let mut rows = rdcsv::dedupe_keep_last(rdcsv::read_rows(&csv)?);
    grid_order(&mut rows);
    rdcsv::write_rows(&csv, &rows)?;

    summary.succeeded = rows.iter().filter(|r| r.ok() && grid.contains(&r.cell_id)).count();

    for space in spaces_present(&rows) {
        let path = spec.out.join(format!("rd_{space}.dat"));
        std::fs::write(&path, gnuplot_dat(&rows, &space)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(summary)
}

fn spaces_present(rows: &[RdRow]) -> Vec<String> {
    let mut spaces: Vec<String> = Vec::new();
    for r in rows {
        if !spaces.contains(&r.space) {
            spaces.push(r.space.clone());
        }
    }
    spaces
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.6}"),
        None => "NaN".into(),
    }
}

/// Gnuplot data: one block per (scene, path, preset) with successful rows
/// sorted by total bits, blocks separated by two blank lines.
pub fn gnuplot_dat(rows: &[RdRow], space: &str) -> String {
    let mut ok: Vec<&RdRow> = rows.iter().filter(|r| r.ok() && r.space == space).collect();
    ok.sort_by_key(|r| (r.scene.clone(), r.path.clone(), r.preset.parse::<usize>().ok(), r.preset.clone(), r.bits_total));
    let mut out = format!("# {space}: bits_total psnr_left psnr_right qp\n");
    let mut current: Option<(&str, &str, &str)> = None;
    for r in ok {
        let key = (r.scene.as_str(), r.path.as_str(), r.preset.as_str());
        if current != Some(key) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# scene {} path {} preset {}", r.scene, r.path, r.preset);
            current = Some(key);
        }
        let _ = writeln!(
            out,
            "{} {} {} {}",
            r.bits_total.unwrap_or(0),
            num(r.psnr_left),
            num(r.psnr_right),
            r.qp
        );
    }
    out
}

pub fn spec_from_args(a: &SweepArgs) -> Result<SweepSpec> {
    Ok(SweepSpec {
        scene: a.scene.clone(),
        spaces: a.spaces.iter().map(|&s| s.into()).collect(),
        presets: a.presets.clone(),
        qps: a.qps.clone(),
        path: a.path.into(),
        backend: a.coding.backend()?,
        out: a.out.clone(),
        jobs: a.jobs,
        solve: a.coding.solve(),
        decode: a.coding.decode_options(),
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let spec = spec_from_args(a)?;
    let s = run_sweep(&spec)?;
    eprintln!(
        "{} computed, {} skipped, {} failed; results in {}",
        s.computed,
        s.skipped,
        s.failed,
        spec.csv_path().display()
    );
    if s.succeeded == 0 {
        bail!("no grid cell succeeded");
    }
    Ok(())
}
