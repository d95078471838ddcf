mod common;

use common::{fixture, random_series, rng};
use proptest::prelude::*;
use twistren::config::RunConfig;
use twistren::ifs::DyadicWord;
use twistren::io::{
    cloud_csv, curve_csv, from_json, read_config, read_json, to_json, write_json, write_text,
    FixedPointFile, SeriesJson, FIXED_POINT_SCHEMA,
};
use twistren::series::BivariateSeries;

#[test]
fn fixed_point_file_round_trips_exactly() {
    let f = fixture();
    let file = FixedPointFile::new(
        f.g(),
        Some(f.report().clone()),
        f.path.iter().map(|(_, r)| r.clone()).collect(),
    );
    assert_eq!(file.schema, FIXED_POINT_SCHEMA);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/fixed_point.json");
    write_json(&path, &file).unwrap();
    let back: FixedPointFile = read_json(&path).unwrap();
    assert_eq!(back, file);
    let g = back.system::<f64>().unwrap();
    assert_eq!(g.s, f.g().s);
    assert_eq!(g.z_cache, f.g().z_cache);
    assert_eq!(g.lambda.to_bits(), f.g().lambda.to_bits());
    assert_eq!(g.mu.to_bits(), f.g().mu.to_bits());
    // Serialization is deterministic.
    assert_eq!(to_json(&back).unwrap(), to_json(&file).unwrap());
}

#[test]
fn coefficients_are_row_major_square() {
    let s = BivariateSeries::from_terms(2, [-1.0, 1.0], &[(0, 1, 2.0), (1, 0, -3.0), (2, 0, 5.0)]);
    let j = SeriesJson::from_series(&s);
    assert_eq!(j.coeffs, vec![0.0, 2.0, 0.0, -3.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
}

#[test]
fn malformed_inputs() {
    let e = from_json::<FixedPointFile>("{\"lambda\": 1", "test").unwrap_err();
    assert_eq!(e.code(), "InvalidInput");
    let bad = SeriesJson {
        max_degree: 2,
        domain: [-1.0, 1.0],
        coeffs: vec![1.0; 4],
    };
    assert_eq!(bad.to_series::<f64>().unwrap_err().code(), "InvalidInput");
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        read_json::<FixedPointFile>(&dir.path().join("missing.json"))
            .unwrap_err()
            .code(),
        "InvalidInput"
    );
}

#[test]
fn config_defaults_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    write_text(
        &p,
        "{\"degree_schedule\": [6, 10], \"ifs\": {\"theta\": 0.3}}",
    )
    .unwrap();
    let cfg = read_config(&p).unwrap();
    assert_eq!(cfg.degree_schedule, vec![6, 10]);
    assert_eq!(cfg.ifs.theta, 0.3);
    assert_eq!(cfg.solver, RunConfig::default().solver);
    write_text(&p, "{\"degree_schedule\": []}").unwrap();
    assert_eq!(read_config(&p).unwrap_err().code(), "InvalidSchedule");
    write_text(&p, "{\"tolerances\": {\"det\": -1}}").unwrap();
    assert_eq!(read_config(&p).unwrap_err().code(), "InvalidInput");
    let full: RunConfig = from_json(&to_json(&RunConfig::default()).unwrap(), "default").unwrap();
    assert_eq!(full, RunConfig::default());
}

#[test]
fn csv_layout() {
    let rows = vec![
        (DyadicWord::from_index(2, 3), [0.5, -0.25f64]),
        (DyadicWord::from_index(5, 3), [1e-20, 3.0]),
    ];
    assert_eq!(
        cloud_csv(&rows),
        "word,x,y\n010,0.5,-0.25\n101,0.00000000000000000001,3\n"
    );
    let text = curve_csv(&[0.0, 0.5, 1.0f64], &[[0.0, 0.0], [-1.5, 2.0], [1.0, 2.0]]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["t,x,y", "0,0,0", "0.5,-1.5,2", "1,1,2"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_json_round_trip(seed in 0u64..1000, deg in 0usize..8) {
        let mut r = rng(seed);
        let s = random_series(&mut r, deg, deg, [-1.2, 1.2]).scale(1.0 / 3.0);
        let back: SeriesJson = from_json(&to_json(&SeriesJson::from_series(&s)).unwrap(), "p").unwrap();
        prop_assert_eq!(back.to_series::<f64>().unwrap(), s);
    }

    #[test]
    fn csv_floats_parse_back(x in any::<f64>().prop_filter("finite", |v| v.is_finite()), y in -1e3f64..1e3) {
        let text = cloud_csv(&[(DyadicWord::from_index(1, 1), [x, y])]);
        let row = text.lines().nth(1).unwrap();
        let f: Vec<&str> = row.split(',').collect();
        prop_assert_eq!(f.len(), 3);
        prop_assert_eq!(f[1].parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert_eq!(f[2].parse::<f64>().unwrap().to_bits(), y.to_bits());
    }
}
