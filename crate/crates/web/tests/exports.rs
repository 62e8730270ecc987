use densecode_web::{me_surface, multistage_point, separation_curve};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn surface_peaks_at_log12() {
    let v = parse(me_surface(4, 30));
    let i: Vec<f64> = v["I_bits"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(i.len(), 31 * 32 / 2);
    assert_eq!(v["a0"].as_array().unwrap().len(), i.len());
    let max = i.iter().cloned().fold(f64::MIN, f64::max);
    assert!((max - 12f64.log2()).abs() < 1e-9);
    assert!(me_surface(4, 500).is_err());
}

#[test]
fn separation_endpoints() {
    let v = parse(separation_curve(0.2, 2, 10));
    let ps = v["P_s"].as_array().unwrap();
    assert_eq!(ps[0].as_f64(), Some(1.0));
    assert!((ps[10].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!(separation_curve(1.5, 2, 10).is_err());
}

#[test]
fn multistage_values() {
    let v = parse(multistage_point(0.2, 0.3, 4));
    assert!((v["I_suc2"].as_f64().unwrap() - 7.0 / 3.0).abs() < 1e-9);
    assert_eq!(v["stage2_degenerate"], Value::Bool(false));
    let d = parse(multistage_point(0.2, 0.2, 4));
    assert_eq!(d["stage2_degenerate"], Value::Bool(true));
    assert!(multistage_point(0.7, 0.7, 4).is_err());
}
