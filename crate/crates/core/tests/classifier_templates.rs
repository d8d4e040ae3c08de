mod common;

use common::*;
use rotor_mle::classify::classify_series;
use rotor_mle::*;

#[test]
fn template_families_match_scan_oracle() {
    let cfg = ClassifierConfig::default();
    let mut failures = Vec::new();
    for t in template_families() {
        let expected_w = scan_window(t.pattern, &t.v);
        match classify_series(&t.v, &cfg, DT) {
            Ok(c) if c.pattern == t.pattern && c.w == expected_w => {}
            other => failures.push(format!("{}: expected {:?} w={expected_w}, got {other:?}", t.label, t.pattern)),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn classification_is_scale_invariant() {
    let cfg = ClassifierConfig::default();
    for t in template_families() {
        let base = classify_series(&t.v, &cfg, DT).unwrap();
        let scaled: Vec<f64> = t.v.iter().map(|x| 7.5 * x).collect();
        assert_eq!(classify_series(&scaled, &cfg, DT).unwrap(), base, "{}", t.label);
    }
}

#[test]
fn online_and_batch_agree() {
    let cfg = ClassifierConfig::default();
    for t in template_families() {
        let mut c = SwingClassifier::new(cfg.clone(), DT);
        let mut emitted = Vec::new();
        for &x in &t.v {
            if let Some(r) = c.push(x).unwrap() {
                emitted.push(r);
            }
        }
        assert_eq!(emitted.len(), 1, "{}", t.label);
        assert_eq!(emitted[0], classify_series(&t.v, &cfg, DT).unwrap());
        // never decided before the data that defines w exists
        assert!(emitted[0].decided_at >= emitted[0].w.min(cfg.n_c), "{}", t.label);
    }
}
