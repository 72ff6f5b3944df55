//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mescode_cli::rdcsv::{read_rows, RdRow};
use mescode_cli::sweep::{run_sweep, SweepSpec};
use mescode_core::codec::container::CompressedStream;
use mescode_core::codec::entropy::{entropy_decode, entropy_encode, EntropyTag};
use mescode_core::codec::frames::{builtin_decode, builtin_encode, FrameSet};
use mescode_core::codec::{
    decode_stream, encode_stream, Backend, DecodeOptions, EncodeConfig, PathTag, SolveOptions,
};
use mescode_core::color::{ipt_from_rgb, rgb_from_ipt, rgb_from_ycbcr, ycbcr_from_rgb, ColorSpace};
use mescode_core::metrics::{scene_psnr, PsnrDomain};
use mescode_core::scene::{synthetic_scene, write_scene, ImageFormat, SceneStack};
use mescode_core::tensor::{ttm_transposed, ttmc, DenseTensor, Matrix};
use mescode_core::tucker::synth::{random_orthonormal, random_tensor, random_tucker};
use mescode_core::tucker::{
    fit, hooi_sweep, naive_contraction_count, perturbed_ttmc, pp_operators, t_hosvd, truncation_bound, tucker_als,
    SolveConfig, SweepKind,
};
use mescode_core::{Mat, Tensor};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let (dims, ranks) = ([24, 32, 5, 2], [2, 3, 2, 2]);
    let mut worst = (f64::INFINITY, 0);
    for seed in 0..20 {
        let (t, _) = random_tucker::<f64, _>(&dims, &ranks, &mut rng(seed)).map_err(|e| e.to_string())?;
        let cfg = SolveConfig { max_sweeps: 15, ..SolveConfig::new(ranks.to_vec()) };
        let out = tucker_als(&t, &cfg).map_err(|e| e.to_string())?;
        let f = fit(&t, &out.model).map_err(|e| e.to_string())?;
        ensure(f >= 1.0 - 1e-6, || format!("seed {seed}: fit {f}"))?;
        ensure(out.trace.sweeps() <= 15, || format!("seed {seed}: {} sweeps", out.trace.sweeps()))?;
        if f < worst.0 {
            worst = (f, out.trace.sweeps());
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("20/20 seeds, worst fit 1-{:.1e}, {elapsed:.2?}", 1.0 - worst.0))
}

fn hooi_monotone() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut sweeps = 0;
    for seed in 0..10 {
        let t = random_tensor::<f64, _>(&[16, 16, 5, 2], &mut rng(100 + seed)).map_err(|e| e.to_string())?;
        let mut model = t_hosvd(&t, &[4, 4, 2, 2]).map_err(|e| e.to_string())?;
        let mut last = fit(&t, &model).map_err(|e| e.to_string())?;
        for s in 0..25 {
            model = hooi_sweep(&t, &model).map_err(|e| e.to_string())?;
            let f = fit(&t, &model).map_err(|e| e.to_string())?;
            ensure(f - last >= -1e-12, || format!("seed {seed} sweep {s}: fit change {}", f - last))?;
            worst = worst.min(f - last);
            last = f;
            sweeps += 1;
        }
    }
    Ok(format!("{sweeps} sweeps, smallest change {worst:.2e}"))
}

fn thosvd_bound() -> Outcome {
    let cases: [(&[usize], &[usize]); 5] = [
        (&[8, 7, 5, 2], &[3, 3, 2, 1]),
        (&[16, 16, 5, 2], &[4, 4, 2, 2]),
        (&[10, 12, 3, 2], &[2, 5, 3, 1]),
        (&[9, 6, 4], &[2, 2, 2]),
        (&[12, 10, 5, 2], &[6, 1, 4, 2]),
    ];
    let mut tightest = 0.0f64;
    for seed in 0..10u64 {
        let (dims, ranks) = cases[seed as usize % cases.len()];
        let t = random_tensor::<f64, _>(dims, &mut rng(200 + seed)).map_err(|e| e.to_string())?;
        let m = t_hosvd(&t, ranks).map_err(|e| e.to_string())?;
        let err = t.sub(&m.reconstruct()).map_err(|e| e.to_string())?.norm_sq();
        let bound = truncation_bound(&t, ranks).map_err(|e| e.to_string())?;
        ensure(err <= bound * (1.0 + 1e-8), || format!("seed {seed}: error {err} > bound {bound}"))?;
        tightest = tightest.max(err / bound);
    }
    Ok(format!("10 instances, max error/bound {tightest:.3}"))
}

fn perturbed_dirs(anchors: &[Mat], seed: u64) -> Vec<Mat> {
    let mut r = rng(seed);
    anchors
        .iter()
        .map(|a| Matrix::from_fn(a.rows(), a.cols(), |_, _| r.random_range(-1.0..1.0)))
        .collect()
}

fn pp_fidelity() -> Outcome {
    // (a) zero delta: perturbed TTMc equals the frozen standard TTMc bit for bit.
    let t = random_tensor::<f64, _>(&[9, 8, 5, 2], &mut rng(300)).map_err(|e| e.to_string())?;
    let mut model = t_hosvd(&t, &[3, 3, 2, 2]).map_err(|e| e.to_string())?;
    for _ in 0..3 {
        model = hooi_sweep(&t, &model).map_err(|e| e.to_string())?;
    }
    let st = pp_operators(&t, model.factors()).map_err(|e| e.to_string())?;
    for n in 0..4 {
        let a = perturbed_ttmc(&st, model.factors(), n).map_err(|e| e.to_string())?;
        let b = ttmc(&t, model.factors(), Some(n)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("(a) mode {n}: zero-delta operator differs from standard TTMc"))?;
    }

    // (b) first-order error ratio when eps halves.
    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let t = random_tensor::<f64, _>(&[6, 5, 5, 2], &mut rng(310 + seed)).map_err(|e| e.to_string())?;
        let mut r = rng(320 + seed);
        let anchors: Vec<Mat> = t.dims().iter().zip([2, 2, 2, 1]).map(|(&s, k)| random_orthonormal(s, k, &mut r)).collect();
        let st = pp_operators(&t, &anchors).map_err(|e| e.to_string())?;
        let dirs = perturbed_dirs(&anchors, 330 + seed);
        let err_at = |eps: f64, n: usize| -> Result<f64, String> {
            let cur: Vec<Mat> = anchors
                .iter()
                .zip(&dirs)
                .map(|(a, d)| Matrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) + eps * d.get(i, j)))
                .collect();
            let approx = perturbed_ttmc(&st, &cur, n).map_err(|e| e.to_string())?;
            let exact = ttmc(&t, &cur, Some(n)).map_err(|e| e.to_string())?;
            Ok(approx.sub(&exact).map_err(|e| e.to_string())?.fro_norm())
        };
        for n in 0..4 {
            let ratio = err_at(1e-2, n)? / err_at(5e-3, n)?;
            ensure((3.0..=5.0).contains(&ratio), || format!("(b) seed {seed} mode {n}: ratio {ratio}"))?;
            ratios.push(ratio);
        }
    }

    // (c) accelerated solve matches plain ALS.
    let mut worst_gap = 0.0f64;
    let mut pp_sweeps = 0;
    for seed in 0..5u64 {
        let t = noisy_low_rank(&[20, 18, 5, 2], &[4, 4, 2, 2], 1.0, 340 + seed)?;
        let base = SolveConfig { max_sweeps: 60, fit_tol: 1e-9, ..SolveConfig::new(vec![4, 4, 2, 2]) };
        let plain = tucker_als(&t, &SolveConfig { pairwise_perturbation: false, ..base.clone() }).map_err(|e| e.to_string())?;
        let accel = tucker_als(&t, &base).map_err(|e| e.to_string())?;
        let gap = (accel.fit - plain.fit).abs();
        ensure(gap <= 1e-3, || format!("(c) seed {seed}: fit {} vs {}", accel.fit, plain.fit))?;
        worst_gap = worst_gap.max(gap);
        let n = accel.trace.records.iter().filter(|r| r.kind == SweepKind::Perturbed).count();
        ensure(n > 0, || format!("(c) seed {seed}: no perturbation sweep ran"))?;
        pp_sweeps += n;
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "(a) bit-exact, (b) ratios in [{lo:.3}, {hi:.3}], (c) max fit gap {worst_gap:.1e} over 5 solves ({pp_sweeps} pp sweeps)"
    ))
}

fn noisy_low_rank(dims: &[usize], ranks: &[usize], noise: f64, seed: u64) -> Result<Tensor, String> {
    let mut r = rng(seed);
    let (t, _) = random_tucker::<f64, _>(dims, ranks, &mut r).map_err(|e| e.to_string())?;
    let scale = t.fro_norm() / (t.len() as f64).sqrt();
    let data = t.data().iter().map(|v| v + noise * scale * r.random_range(-1.0..1.0)).collect();
    DenseTensor::new(dims.to_vec(), data).map_err(|e| e.to_string())
}

fn dimension_tree() -> Outcome {
    let mut worst = 0.0f64;
    let mut counts = (0, 0);
    for seed in 0..3u64 {
        let t = random_tensor::<f64, _>(&[7, 6, 5, 2], &mut rng(400 + seed)).map_err(|e| e.to_string())?;
        let mut r = rng(410 + seed);
        let anchors: Vec<Mat> = t.dims().iter().zip([3, 2, 2, 1]).map(|(&s, k)| random_orthonormal(s, k, &mut r)).collect();
        let st = pp_operators(&t, &anchors).map_err(|e| e.to_string())?;
        for n in 0..4 {
            let naive_single = naive_product(&t, &anchors, &[n]);
            let d = st.single(n).sub(&naive_single).map_err(|e| e.to_string())?.max_abs();
            worst = worst.max(d);
            for i in 0..4 {
                if i == n {
                    continue;
                }
                let pair = st.pair(i, n).ok_or_else(|| format!("missing pair ({i}, {n})"))?;
                let d = pair.sub(&naive_product(&t, &anchors, &[i, n])).map_err(|e| e.to_string())?.max_abs();
                worst = worst.max(d);
            }
        }
        counts = (st.contractions(), naive_contraction_count(4));
        ensure(counts.0 < counts.1, || format!("{} tree contractions, naive {}", counts.0, counts.1))?;
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}, {} contractions vs {} naive", counts.0, counts.1))
}

/// Contract every mode except `keep`, highest mode first.
fn naive_product(t: &Tensor, anchors: &[Mat], keep: &[usize]) -> Tensor {
    let mut cur = t.clone();
    for m in (0..t.order()).rev() {
        if !keep.contains(&m) {
            cur = ttm_transposed(&cur, &anchors[m], m).expect("shapes match");
        }
    }
    cur
}

fn colour_round_trips() -> Outcome {
    let mut r = rng(500);
    let (mut ycc, mut ipt) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let px: [f64; 3] = [r.random(), r.random(), r.random()];
        let back = rgb_from_ycbcr(ycbcr_from_rgb(px));
        let back2 = rgb_from_ipt(ipt_from_rgb(px));
        for c in 0..3 {
            ycc = ycc.max((back[c] - px[c]).abs());
            ipt = ipt.max((back2[c] - px[c]).abs());
        }
    }
    ensure(ycc < 1e-12, || format!("Y'CbCr max error {ycc:e}"))?;
    ensure(ipt < 1e-4, || format!("IPT max error {ipt:e}"))?;
    let mut gray = 0.0f64;
    for k in 0..=10 {
        let g = k as f64 / 10.0;
        let [_, p, t] = ipt_from_rgb([g; 3]);
        gray = gray.max((p - 0.5).abs()).max((t - 0.5).abs());
    }
    ensure(gray < 1e-6, || format!("gray |P-0.5| or |T-0.5| up to {gray:e}"))?;
    Ok(format!("Y'CbCr {ycc:.1e}, IPT {ipt:.1e}, gray offset {gray:.1e}"))
}

fn codec_round_trips() -> Outcome {
    let scene = synthetic_scene(48, 32, 2, 3, 7).map_err(|e| e.to_string())?;
    for path in [PathTag::Latent, PathTag::Frames] {
        let cfg = EncodeConfig { path, ..EncodeConfig::new([8, 8, 2, 2], 12, ColorSpace::Ipt) };
        let enc = encode_stream(&scene, &cfg).map_err(|e| e.to_string())?;
        let parsed = CompressedStream::from_bytes(&enc.bytes).map_err(|e| e.to_string())?;
        ensure(parsed == enc.stream, || format!("{path}: parsed stream differs"))?;
        let again = parsed.to_bytes().map_err(|e| e.to_string())?;
        ensure(again == enc.bytes, || format!("{path}: re-serialized bytes differ"))?;
        decode_stream(&enc.bytes, &DecodeOptions::default()).map_err(|e| e.to_string())?;
    }

    let mut r = rng(700);
    let (w, h, v, e) = (64, 48, 2, 3);
    let planes = (0..v * e * 3).map(|_| (0..w * h).map(|_| r.random()).collect()).collect();
    let frames = FrameSet::new(w, h, v, e, planes).map_err(|e| e.to_string())?;
    let coded = builtin_encode(&frames, 0, EntropyTag::Range).map_err(|e| e.to_string())?;
    let back = builtin_decode(&coded, (w, h, v, e), 0, EntropyTag::Range).map_err(|e| e.to_string())?;
    ensure(back == frames, || "builtin frames codec lossy at qp 0".into())?;

    let mib = 1 << 20;
    let random: Vec<u8> = (0..mib).map(|_| r.random()).collect();
    let constant = vec![0x5a; mib];
    let mut sizes = Vec::new();
    for (name, data) in [("random", &random), ("constant", &constant)] {
        let enc = entropy_encode(data, EntropyTag::Range).map_err(|e| e.to_string())?;
        let dec = entropy_decode(&enc, EntropyTag::Range).map_err(|e| e.to_string())?;
        ensure(&dec == data, || format!("entropy round trip failed on 1 MiB {name}"))?;
        sizes.push(format!("{name} {} B", enc.len()));
    }
    Ok(format!("container bit-exact on both paths, frames lossless, entropy {}", sizes.join(", ")))
}

fn scene_dir(root: &Path, name: &str, scene: &SceneStack) -> Result<std::path::PathBuf, String> {
    let dir = root.join(name);
    write_scene(scene, &dir, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(dir)
}

fn grid_spec(scene: &Path, out: &Path, max_sweeps: usize, jobs: Option<usize>) -> SweepSpec {
    SweepSpec {
        scene: scene.to_path_buf(),
        spaces: vec![ColorSpace::YCbCr, ColorSpace::Ipt],
        presets: vec![1, 2, 3, 4, 5],
        qps: vec![5, 10, 15, 20],
        path: PathTag::Latent,
        backend: Backend::Builtin,
        out: out.to_path_buf(),
        jobs,
        solve: SolveOptions { max_sweeps, ..SolveOptions::default() },
        decode: DecodeOptions::default(),
    }
}

type Grid = HashMap<(String, usize, u8), RdRow>;

fn load_grid(csv: &Path) -> Result<Grid, String> {
    let rows = read_rows(csv).map_err(|e| e.to_string())?;
    let mut grid = HashMap::new();
    for r in rows {
        if !r.ok() {
            return Err(format!("cell {} {} qp {} failed: {}", r.space, r.preset, r.qp, r.error));
        }
        let preset = r.preset.parse().map_err(|_| format!("bad preset {}", r.preset))?;
        grid.insert((r.space.clone(), preset, r.qp), r);
    }
    Ok(grid)
}

fn rd_structure(root: &Path, scene_path: &Path) -> Outcome {
    let start = Instant::now();
    let out = root.join("rd-als");
    run_sweep(&grid_spec(scene_path, &out, 50, None)).map_err(|e| format!("{e:#}"))?;
    let als = load_grid(&out.join("rd.csv"))?;
    ensure(als.len() == 40, || format!("{} rows, expected 40", als.len()))?;
    let qps = [5u8, 10, 15, 20];
    let bits = |g: &Grid, s: &str, k: usize, q: u8| g[&(s.to_string(), k, q)].bits_total.unwrap_or(0);
    for s in ["ycbcr", "ipt"] {
        for &q in &qps {
            for k in 1..5 {
                let (a, b) = (bits(&als, s, k, q), bits(&als, s, k + 1, q));
                ensure(a < b, || format!("{s} qp {q}: bits {a} at preset {k} vs {b} at preset {}", k + 1))?;
            }
        }
        for k in 1..=5 {
            for w in qps.windows(2) {
                let (a, b) = (bits(&als, s, k, w[0]), bits(&als, s, k, w[1]));
                ensure(a > b, || format!("{s} preset {k}: bits {a} at qp {} vs {b} at qp {}", w[0], w[1]))?;
            }
        }
    }

    let out = root.join("rd-thosvd");
    run_sweep(&grid_spec(scene_path, &out, 0, None)).map_err(|e| format!("{e:#}"))?;
    let th = load_grid(&out.join("rd.csv"))?;
    for s in ["ycbcr", "ipt"] {
        for &q in &qps {
            for k in 1..5 {
                for view in 0..2 {
                    let p = |k: usize| {
                        let r = &th[&(s.to_string(), k, q)];
                        if view == 0 { r.psnr_left } else { r.psnr_right }.unwrap_or(f64::NAN)
                    };
                    ensure(p(k + 1) >= p(k), || {
                        format!("{s} qp {q} view {view}: PSNR {} at preset {k} vs {} at preset {}", p(k), p(k + 1), k + 1)
                    })?;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("grids took {elapsed:?}"))?;
    let span = |s: &str| format!("{}->{}", bits(&als, s, 1, 5), bits(&als, s, 5, 5));
    Ok(format!(
        "bits at qp 5 across presets 1->5: ycbcr {}, ipt {}; two 40-cell grids in {elapsed:.1?}",
        span("ycbcr"),
        span("ipt")
    ))
}

fn near_lossless() -> Outcome {
    let mut r = rng(900);
    let natural = synthetic_scene(64, 48, 2, 5, 3).map_err(|e| e.to_string())?;
    let noise = {
        let imgs = (0..2)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let mut plane = || (0..40 * 24).map(|_| f64::from(r.random::<u8>()) / 255.0).collect();
                        mescode_core::Image::new(40, 24, [plane(), plane(), plane()], ColorSpace::Rgb).unwrap()
                    })
                    .collect()
            })
            .collect();
        SceneStack::new("noise", imgs).map_err(|e| e.to_string())?
    };
    let mut lowest = f64::INFINITY;
    for scene in [natural.quantize_8bit(), noise] {
        let dims = scene.meta().tensor_dims();
        for space in [ColorSpace::Rgb, ColorSpace::YCbCr, ColorSpace::Ipt] {
            let cfg = EncodeConfig::new(dims, 0, space);
            let enc = encode_stream(&scene, &cfg).map_err(|e| e.to_string())?;
            let dec = decode_stream(&enc.bytes, &DecodeOptions::default()).map_err(|e| e.to_string())?;
            let p = scene_psnr(&scene, &dec.scene, PsnrDomain::Rgb).map_err(|e| e.to_string())?;
            for (v, &db) in p.per_view.iter().enumerate() {
                ensure(db > 55.0, || format!("{} {space} view {v}: {db:.2} dB", scene.name()))?;
                lowest = lowest.min(db);
            }
        }
    }
    Ok(format!("lowest per-view PSNR {lowest:.2} dB over 2 scenes x 3 spaces"))
}

fn numeric_columns(csv: &Path) -> Result<Vec<String>, String> {
    let rows = read_rows(csv).map_err(|e| e.to_string())?;
    Ok(rows
        .iter()
        .map(|r| {
            format!(
                "{}|{}|{}|{}|{:?}|{:?}|{:?}|{:?}|{:?}",
                r.space, r.preset, r.qp, r.path, r.bits_latent, r.bits_backend, r.bits_total, r.psnr_left, r.psnr_right
            )
        })
        .collect())
}

fn determinism(root: &Path, scene_path: &Path) -> Outcome {
    let a = root.join("det-a");
    let b = root.join("det-b");
    run_sweep(&grid_spec(scene_path, &a, 50, None)).map_err(|e| format!("{e:#}"))?;
    run_sweep(&grid_spec(scene_path, &b, 50, Some(1))).map_err(|e| format!("{e:#}"))?;
    let (ca, cb) = (numeric_columns(&a.join("rd.csv"))?, numeric_columns(&b.join("rd.csv"))?);
    ensure(ca.len() == 40, || format!("{} rows", ca.len()))?;
    if let Some((x, y)) = ca.iter().zip(&cb).find(|(x, y)| x != y) {
        return Err(format!("rows differ: {x} vs {y}"));
    }
    ensure(ca == cb, || "row counts differ".into())?;
    let bytes_equal = std::fs::read(a.join("rd.csv")).ok() == std::fs::read(b.join("rd.csv")).ok();
    Ok(format!("40 rows identical across a parallel and a single-thread run (files byte-equal: {bytes_equal})"))
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let scene = synthetic_scene(256, 144, 2, 5, 0).expect("synthetic scene");
    let scene_path = scene_dir(root.path(), "scene", &scene).expect("write scene");

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("exact Tucker recovery", Box::new(exact_recovery)),
        ("HOOI monotonicity", Box::new(hooi_monotone)),
        ("truncated HOSVD error bound", Box::new(thosvd_bound)),
        ("pairwise-perturbation fidelity", Box::new(pp_fidelity)),
        ("dimension-tree correctness and savings", Box::new(dimension_tree)),
        ("colour round trips", Box::new(colour_round_trips)),
        ("codec round trips", Box::new(codec_round_trips)),
        ("RD structure on the 5x4 grid", Box::new(|| rd_structure(root.path(), &scene_path))),
        ("near-lossless end to end", Box::new(near_lossless)),
        ("sweep determinism", Box::new(|| determinism(root.path(), &scene_path))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.1?}]", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{:.1?}]", i + 1, start.elapsed());
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
