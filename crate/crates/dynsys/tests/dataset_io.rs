use proptest::prelude::*;
use ssop_dynsys::{read_dataset, write_dataset, Error, TrajectoryDataset};

fn sample_dataset(with_coeffs: bool) -> TrajectoryDataset {
    let n = 3;
    let len = 4;
    let inputs: Vec<f64> = (0..n * len * 2).map(|i| (i as f64).sin() * 1e3).collect();
    let outputs: Vec<f64> = (0..n * len).map(|i| (i as f64).cos() / 7.0).collect();
    let grid: Vec<f64> = (0..len).map(|k| 0.5 + k as f64 * 0.25).collect();
    let mut ds = TrajectoryDataset::new(n, len, 2, 1, inputs, outputs, grid).unwrap();
    if with_coeffs {
        ds = ds.with_coefficients(2, (0..6).map(|i| i as f64 * 0.3).collect()).unwrap();
    }
    ds.insert_meta("system", "roundtrip");
    ds.insert_meta("seed", 17);
    ds
}

#[test]
fn roundtrip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for with_coeffs in [false, true] {
        let path = dir.path().join(format!("ds_{with_coeffs}.ssop"));
        let ds = sample_dataset(with_coeffs);
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }
}

#[test]
fn truncated_files_yield_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("full.ssop");
    write_dataset(&sample_dataset(true), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    for cut in [2, 7, 20, bytes.len() / 2, bytes.len() - 3] {
        let short = dir.path().join("short.ssop");
        std::fs::write(&short, &bytes[..cut]).unwrap();
        match read_dataset(&short) {
            Err(Error::Format(msg)) => assert!(msg.contains("truncated"), "cut {cut}: {msg}"),
            other => panic!("cut {cut}: expected a format error, got {other:?}"),
        }
    }
}

#[test]
fn bad_magic_version_and_trailing_bytes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("base.ssop");
    write_dataset(&sample_dataset(false), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    let p = dir.path().join("magic.ssop");
    std::fs::write(&p, &wrong_magic).unwrap();
    assert!(matches!(read_dataset(&p), Err(Error::Format(m)) if m.contains("magic")));

    let mut wrong_version = bytes.clone();
    wrong_version[4] = 9;
    let p = dir.path().join("version.ssop");
    std::fs::write(&p, &wrong_version).unwrap();
    assert!(matches!(read_dataset(&p), Err(Error::Format(m)) if m.contains("version")));

    let mut trailing = bytes;
    trailing.push(0);
    let p = dir.path().join("trailing.ssop");
    std::fs::write(&p, &trailing).unwrap();
    assert!(matches!(read_dataset(&p), Err(Error::Format(m)) if m.contains("trailing")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any well-formed dataset survives the file format unchanged.
    #[test]
    fn random_datasets_roundtrip(
        n in 1usize..4,
        len in 1usize..6,
        in_dim in 1usize..3,
        out_dim in 1usize..3,
        coeff in 0usize..3,
        fill in -1e6f64..1e6,
    ) {
        let inputs: Vec<f64> = (0..n * len * in_dim).map(|i| fill + i as f64).collect();
        let outputs: Vec<f64> = (0..n * len * out_dim).map(|i| fill - i as f64 * 0.5).collect();
        let grid: Vec<f64> = (0..len).map(|k| k as f64 * 0.125).collect();
        let mut ds = TrajectoryDataset::new(n, len, in_dim, out_dim, inputs, outputs, grid).unwrap();
        if coeff > 0 {
            ds = ds.with_coefficients(coeff, (0..n * coeff).map(|i| i as f64).collect()).unwrap();
        }
        ds.insert_meta("split", "all");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.ssop");
        write_dataset(&ds, &path).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), ds);
    }
}
