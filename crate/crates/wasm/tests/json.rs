use chernoff_lab_wasm::{cesaro_trajectory_json, convergence_sweep_json, ergodic_bound_json};
use serde_json::Value;

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn sweep_rows_follow_the_dyadic_grid() {
    let v = parse(&convergence_sweep_json("example2-blocks", 2, 42, 1.0, 10).unwrap());
    let rows = v["rows"].as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, (2..=10).map(|k| 1u64 << k).collect::<Vec<_>>());
    let errs: Vec<f64> = rows.iter().map(|r| r["norm_error"].as_f64().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn odd_period_rows_carry_a_failure() {
    let v = parse(&convergence_sweep_json("cyclic", 2, 1, 1.0, 4).unwrap());
    let first = &v["rows"][0];
    assert_eq!(first["n"], 4);
    assert!(first["failure"].is_null());
    assert!(convergence_sweep_json("bounds-suite", 2, 1, 1.0, 4).is_err());
    assert!(convergence_sweep_json("example1-dft", 2, 1, 1.0, 40).is_err());
}

#[test]
fn cesaro_distance_decays() {
    let v = parse(&cesaro_trajectory_json(3, 5, 12).unwrap());
    let points = v.as_array().unwrap();
    assert_eq!(points.len(), 13);
    let first = points[0]["distance"].as_f64().unwrap();
    let last = points[12]["distance"].as_f64().unwrap();
    assert!(last < first / 100.0, "{first} → {last}");
}

#[test]
fn ergodic_bound_holds_along_the_sweep() {
    for instance in 0..4 {
        let v = parse(&ergodic_bound_json(42, instance, 10).unwrap());
        for p in v.as_array().unwrap() {
            assert!(p["lhs"].as_f64().unwrap() <= p["bound"].as_f64().unwrap());
        }
    }
}
