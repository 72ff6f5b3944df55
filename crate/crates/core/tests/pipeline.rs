use std::time::Duration;

use mescode_core::codec::container::HEADER_LEN;
use mescode_core::codec::external::ExternalConfig;
use mescode_core::codec::{
    analyze, decode_stream, encode_analysis, encode_stream, entropy::EntropyTag, recorded_command, Backend,
    DecodeOptions, EncodeConfig, PathTag, SolveOptions,
};
use mescode_core::color::ColorSpace;
use mescode_core::metrics::{scene_psnr, PsnrDomain};
use mescode_core::scene::{load_scene, synthetic_scene, write_scene, ImageFormat, SceneStack};
use mescode_core::Error;

fn scene() -> SceneStack {
    synthetic_scene(40, 24, 2, 3, 11).unwrap()
}

#[test]
fn scene_files_round_trip_exactly() {
    let s = scene();
    for format in [ImageFormat::Png, ImageFormat::Ppm] {
        let dir = tempfile::tempdir().unwrap();
        let written = write_scene(&s, dir.path(), format).unwrap();
        assert_eq!(written.len(), 6);
        let loaded = load_scene(dir.path()).unwrap();
        assert_eq!((loaded.views(), loaded.exposures()), (2, 3));
        assert_eq!(loaded.images(), s.quantize_8bit().images());
        let again = tempfile::tempdir().unwrap();
        write_scene(&loaded, again.path(), format).unwrap();
        for f in &written {
            let name = f.file_name().unwrap();
            assert_eq!(std::fs::read(f).unwrap(), std::fs::read(again.path().join(name)).unwrap());
        }
    }
}

#[test]
fn missing_view_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&scene(), dir.path(), ImageFormat::Png).unwrap();
    std::fs::remove_file(dir.path().join("right_1.png")).unwrap();
    assert!(matches!(load_scene(dir.path()), Err(Error::MissingImage { exposure: 1, .. })));
}

#[test]
fn encoding_is_deterministic() {
    let s = scene();
    let cfg = EncodeConfig::new([6, 8, 2, 2], 10, ColorSpace::Ipt);
    assert_eq!(encode_stream(&s, &cfg).unwrap().bytes, encode_stream(&s, &cfg).unwrap().bytes);
}

#[test]
fn bit_breakdown_adds_up() {
    let s = scene().quantize_8bit();
    for path in [PathTag::Latent, PathTag::Frames] {
        let cfg = EncodeConfig { path, ..EncodeConfig::new([6, 8, 2, 2], 10, ColorSpace::YCbCr) };
        let enc = encode_stream(&s, &cfg).unwrap();
        let overhead = 8 * enc.stream.overhead_bytes() as u64;
        let payload: u64 = enc.stream.blocks.iter().map(|b| 8 * b.len() as u64).sum();
        assert_eq!(enc.bits.total, overhead + payload);
        assert!(enc.bits.latent + enc.bits.backend <= payload);
        match path {
            PathTag::Latent => assert_eq!(enc.bits.backend, 0),
            PathTag::Frames => assert_eq!(enc.bits.latent, 0),
        }
    }
}

#[test]
fn distortion_falls_with_rank_under_truncated_hosvd() {
    let s = scene().quantize_8bit();
    let solve = SolveOptions { max_sweeps: 0, ..SolveOptions::default() };
    let mut last = 0.0;
    for ranks in [[2, 2, 1, 1], [6, 8, 2, 2], [12, 20, 3, 2], [24, 40, 3, 2]] {
        let a = analyze(&s, ColorSpace::Ipt, ranks, &solve).unwrap();
        let enc = encode_analysis(&a, 0, PathTag::Latent, EntropyTag::Range, &Backend::Builtin).unwrap();
        let dec = decode_stream(&enc.bytes, &DecodeOptions::default()).unwrap();
        let p = scene_psnr(&s, &dec.scene, PsnrDomain::Rgb).unwrap().per_view[0];
        assert!(p >= last, "{ranks:?}: {p} < {last}");
        last = p;
    }
}

#[test]
fn identity_external_backend() {
    let s = scene().quantize_8bit();
    let scratch = tempfile::tempdir().unwrap();
    let backend = Backend::External(ExternalConfig {
        scratch_dir: Some(scratch.path().to_path_buf()),
        ..ExternalConfig::new("cp {in} {out} # qp={qp}")
    });
    let cfg = EncodeConfig { path: PathTag::Frames, backend, ..EncodeConfig::new([24, 40, 3, 2], 20, ColorSpace::YCbCr) };
    let enc = encode_stream(&s, &cfg).unwrap();
    let command = enc.backend_command.clone().unwrap();
    assert!(command.starts_with("cp ") && command.ends_with("# qp=20"), "{command}");
    assert_eq!(recorded_command(&enc.stream).unwrap().as_deref(), Some(command.as_str()));
    // The identity encoder emits I420: full-size luma plus two quarter-size chroma planes.
    assert_eq!(enc.bits.backend, 8 * 6 * (40 * 24 + 2 * 20 * 12));
    let dec = decode_stream(&enc.bytes, &DecodeOptions::default()).unwrap();
    assert!(scene_psnr(&s, &dec.scene, PsnrDomain::Rgb).unwrap().per_view[0] > 25.0);
    assert_eq!(std::fs::read_dir(scratch.path()).unwrap().count(), 0, "scratch files left behind");
}

#[test]
fn external_decode_template_is_honoured() {
    let s = scene().quantize_8bit();
    let backend = Backend::External(ExternalConfig {
        decode_template: Some("cat {in} > {out}".into()),
        ..ExternalConfig::new("cat {in} > {out}")
    });
    let cfg = EncodeConfig { path: PathTag::Frames, backend, ..EncodeConfig::new([24, 40, 3, 2], 5, ColorSpace::Ipt) };
    let enc = encode_stream(&s, &cfg).unwrap();
    let failing = DecodeOptions {
        external: Some(ExternalConfig { decode_template: Some("exit 3".into()), ..ExternalConfig::new("") }),
    };
    assert!(matches!(decode_stream(&enc.bytes, &failing), Err(Error::Backend { .. })));
    assert!(decode_stream(&enc.bytes, &DecodeOptions::default()).is_ok());
}

#[test]
fn external_failures_carry_the_command() {
    let s = scene();
    for (template, timeout) in [("definitely-not-a-real-encoder {in} {out}", 60), ("sleep 5", 1)] {
        let backend = Backend::External(ExternalConfig {
            timeout: Duration::from_secs(timeout),
            ..ExternalConfig::new(template)
        });
        let cfg = EncodeConfig { path: PathTag::Frames, backend, ..EncodeConfig::new([2, 2, 1, 1], 10, ColorSpace::Ipt) };
        match encode_stream(&s, &cfg) {
            Err(Error::Backend { command, .. }) => assert!(command.starts_with(template.split(' ').next().unwrap())),
            other => panic!("expected a backend error, got {other:?}"),
        }
    }
}

#[test]
fn corrupt_streams_are_rejected() {
    let enc = encode_stream(&scene(), &EncodeConfig::new([4, 4, 2, 2], 10, ColorSpace::Ipt)).unwrap();
    let opts = DecodeOptions::default();

    let mut bad = enc.bytes.clone();
    bad[0] = b'X';
    let err = decode_stream(&bad, &opts).unwrap_err();
    assert!(matches!(err, Error::BadMagic));
    assert!(err.to_string().contains("bad magic"));

    let mut bad = enc.bytes.clone();
    bad[4] = 99;
    assert!(matches!(decode_stream(&bad, &opts), Err(Error::UnsupportedVersion(99))));

    assert!(decode_stream(&enc.bytes[..HEADER_LEN - 1], &opts).is_err());
    assert!(decode_stream(&enc.bytes[..enc.bytes.len() - 5], &opts).is_err());
    assert!(decode_stream(&[], &opts).is_err());
}

#[test]
fn single_view_scenes_work() {
    let s = synthetic_scene(24, 16, 1, 2, 5).unwrap().quantize_8bit();
    let enc = encode_stream(&s, &EncodeConfig::new([16, 24, 2, 1], 0, ColorSpace::YCbCr)).unwrap();
    let dec = decode_stream(&enc.bytes, &DecodeOptions::default()).unwrap();
    let p = scene_psnr(&s, &dec.scene, PsnrDomain::Rgb).unwrap();
    assert_eq!(p.per_view.len(), 1);
    assert!(p.per_view[0] > 55.0);
}
