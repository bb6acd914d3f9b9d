use num_complex::Complex64;
use phk_core::bundlealg::IntMat;
use phk_lab::config::{FileConfig, MatrixSpec};
use phk_lab::formats::{write_ergodicity_csv, write_lyapunov_csv, BundleFile};
use phk_lab::RunError;

#[test]
fn bundle_json_round_trip() {
    let h = IntMat::from_rows(&[vec![1, 0, 3], vec![0, -2, 5]]).unwrap();
    let f = BundleFile::from_mat(&h);
    let mut buf = Vec::new();
    f.write(&mut buf).unwrap();
    let back = BundleFile::read(buf.as_slice()).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.to_mat().unwrap(), h);
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["m"], 3);
    assert_eq!(v["matrix"][1][2], 5);
}

#[test]
fn bundle_json_rejects_bad_input() {
    let bad_shape = BundleFile::read(r#"{"k": 2, "m": 2, "matrix": [[1, 0]]}"#.as_bytes()).unwrap();
    assert!(matches!(bad_shape.to_mat(), Err(RunError::Config(_))));
    assert!(BundleFile::read(r#"{"k": 1, "m": 1, "matrix": [[0.5]]}"#.as_bytes()).is_err());
    assert!(BundleFile::read(r#"{"k": 1, "m": 1, "matrix": [[1]], "extra": 0}"#.as_bytes()).is_err());
}

#[test]
fn ergodicity_csv_layout() {
    let mut buf = Vec::new();
    write_ergodicity_csv(&mut buf, &[(1, Complex64::new(1.0, 0.0)), (10, Complex64::new(0.3, -0.4))]).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert_eq!(s, "n,re_avg,im_avg,abs_avg\n1,1,0,1\n10,0.3,-0.4,0.5\n");
}

#[test]
fn lyapunov_csv_layout() {
    let mut buf = Vec::new();
    write_lyapunov_csv(&mut buf, &[(100, vec![1.5, -1.5]), (200, vec![1.25, -1.25])]).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert_eq!(s, "iteration_block,exponent_1,exponent_2\n100,1.5,-1.5\n200,1.25,-1.25\n");
}

#[test]
fn config_schema() {
    let c = FileConfig::parse(
        r#"{
            "seed": 7, "jobs": 2, "out": "results",
            "map": {"epsilon": 0.05, "d": 4, "direction": [8, 5]},
            "bundle": {"a": [[1, 0], [0, 1]], "k": 2, "m": 22},
            "lyapunov": {"iters": 100000, "orbits": 2, "skew_k": 4},
            "metric": {"mu": [1.5], "samples": 100},
            "ph": {"d_max": 8, "n_max": 4, "samples": 1000, "k": 4},
            "ergodicity": {"k": 4, "omega": [0.1, 0.2], "characters": [[1, 0]], "iters": 10000},
            "simulate": {"iters": 10}
        }"#,
    )
    .unwrap();
    assert_eq!(c.seed, Some(7));
    assert_eq!(c.map.direction, Some([8, 5]));
    assert_eq!(c.bundle.a, Some(MatrixSpec::Rows(vec![vec![1, 0], vec![0, 1]])));
    assert_eq!(c.ergodicity.characters, Some(vec![vec![1, 0]]));
    let named = FileConfig::parse(r#"{"bundle": {"a": "B2"}}"#).unwrap();
    assert_eq!(named.bundle.a, Some(MatrixSpec::Named("B2".into())));
    assert_eq!(FileConfig::parse("{}").unwrap(), FileConfig::default());
}

#[test]
fn config_errors_carry_positions() {
    match FileConfig::parse("{\n\"map\": {\"d\": -1}\n}") {
        Err(RunError::Config(m)) => assert!(m.contains("line 2"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(FileConfig::parse(r#"{"unknown": 1}"#).is_err());
}
