mod common;

use common::bundled_tree;
use lifecycle::tree::{build_product_launch_tree, rollback, total_probability, LaunchParameters};

fn example_rollback() -> lifecycle::tree::RolledBackTree {
    rollback(&build_product_launch_tree(&LaunchParameters::example()).unwrap())
}

#[test]
fn marginal_national_outcomes() {
    let p = LaunchParameters::example();
    let conditional: Vec<Vec<f64>> = p.conditional.iter().map(|r| r.to_vec()).collect();
    let m = total_probability(&p.prior, &conditional).unwrap();
    for (got, want) in m.iter().zip([0.4, 0.42, 0.18]) {
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
    assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

#[test]
fn branch_values() {
    let rolled = example_rollback();
    assert_eq!(rolled.value_along(&[0]), Some(77000.0));
    assert_eq!(rolled.value_along(&[1, 0, 1]), Some(142250.0));
    assert_eq!(rolled.value_along(&[1, 1, 1]), Some(74750.0));
    assert_eq!(rolled.value_along(&[1, 2, 1]), Some(-16500.0));
    assert_eq!(rolled.value_along(&[1, 0, 0]), Some(8500.0));
    assert_eq!(rolled.value_along(&[1, 1, 0]), Some(1000.0));
    assert_eq!(rolled.value_along(&[1, 2, 0]), Some(-2750.0));
    assert_eq!(rolled.value_along(&[2]), Some(0.0));
    assert_eq!(rolled.value, 80500.0);
}

#[test]
fn optimal_strategy() {
    let rolled = example_rollback();
    assert_eq!(rolled.best_branch(), Some(1));
    let steps = rolled.strategy();
    let values: Vec<f64> = steps.iter().map(|s| s.value).collect();
    assert_eq!(values, vec![80500.0, 142250.0, 74750.0, -2750.0]);
    let choices: Vec<(Vec<String>, String)> =
        steps.into_iter().map(|s| (s.context, s.choice)).collect();
    assert_eq!(choices.len(), 4);
    assert_eq!(choices[0].1, "test regionally");
    assert_eq!(choices[1].1, "go national");
    assert_eq!(choices[2].1, "go national");
    assert_eq!(choices[3].1, "stop");
    assert_eq!(
        choices[3].0.last().map(String::as_str),
        Some("regional negative")
    );
}

#[test]
fn bundled_file_matches_builder() {
    let file = rollback(&bundled_tree());
    let built = example_rollback();
    assert_eq!(file.value, built.value);
    for path in [
        &[0][..],
        &[1, 0, 1],
        &[1, 1, 1],
        &[1, 2, 1],
        &[1, 2, 0],
        &[2],
    ] {
        let (a, b) = (
            file.value_along(path).unwrap(),
            built.value_along(path).unwrap(),
        );
        assert!((a - b).abs() <= 1e-9, "{path:?}: {a} vs {b}");
    }
    assert_eq!(file.value_along(&[0]), Some(77000.0));
}
