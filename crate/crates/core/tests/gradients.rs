mod common;

use common::draws;

fn assert_all_below(errors: &[f64], what: &str) {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    assert!(worst < 1e-4, "{what}: worst relative error {worst:e}");
}

#[test]
fn actor_log_prob_gradient() {
    assert_all_below(&draws::actor(25, 1), "actor");
}

#[test]
fn critic_loss_gradient() {
    assert_all_below(&draws::critic(25, 2), "critic");
}

#[test]
fn constraint_loss_gradient() {
    assert_all_below(&draws::constraint(25, 3), "constraint");
}
