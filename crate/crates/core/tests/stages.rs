mod common;

use common::bundled_staged;
use lifecycle::stages::{backward_induction, evaluate_initial, evaluate_stage, StageValues};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn staged_example_values() {
    let model = bundled_staged("staged-example.staged");
    assert_eq!(model.warnings().len(), 1);
    let values = backward_induction(&model);
    let iii = model.find(1, "III").unwrap();
    let iv = model.find(1, "IV").unwrap();
    let v = model.find(1, "V").unwrap();
    assert!(close(values.value(1, iii), 11.0 / 4.0));
    assert!(close(values.value(1, iv), 19.0 / 6.0));
    assert!(close(values.value(1, v), 23.0 / 5.0));
    assert_eq!(values.optimal_control(1, iii), Some(1));
    assert_eq!(values.optimal_control(1, iv), Some(0));
    assert_eq!(values.optimal_control(1, v), Some(0));

    let start = model.find(0, "I").unwrap();
    let cv = values.control_values(0, start);
    assert!(close(cv[0], 2597.0 / 600.0));
    assert!(close(cv[1], 151.0 / 60.0));
    assert_eq!(values.optimal_control(0, start), Some(0));
    assert!(close(evaluate_initial(&model, &values), 2597.0 / 600.0));
}

#[test]
fn deterministic_example() {
    let model = bundled_staged("deterministic-example.staged");
    assert!(model.warnings().is_empty());
    let values = backward_induction(&model);
    let start = model.find(0, "start").unwrap();
    assert_eq!(values.value(0, start), 12.0);
    assert_eq!(values.optimal_control(0, start), Some(0));
    assert_eq!(values.value(1, model.find(1, "equipped").unwrap()), 14.0);
    assert_eq!(values.value(1, model.find(1, "steady").unwrap()), 8.0);
}

#[test]
fn resume_from_serialized_stage() {
    let model = bundled_staged("staged-example.staged");
    let full = backward_induction(&model);
    let saved = serde_json::to_string(&full).unwrap();
    let restored: StageValues = serde_json::from_str(&saved).unwrap();
    assert_eq!(restored, full);
    let slice = evaluate_stage(&model, 0, &restored.stages[1].values);
    assert_eq!(slice, full.stages[0]);
}
