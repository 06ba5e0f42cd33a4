//! Closed-loop rollout of the scalar system with the exact residual cancelled.

use adaptive_polyopt::model::{ConvexSet, CostWeights, FeatureMap, NoiseLaw, ParamSchedule, SystemSpec};
use adaptive_polyopt::rng::{StreamRng, W_STREAM};

fn main() {
    let spec = SystemSpec {
        delta: 0.1,
        feature_map: FeatureMap::Tanh { scales: vec![1.0, 3.0] },
        cost: CostWeights { q: 1.0, r: 0.5, lambda: 0.1, theta_bar: 1.0 },
        theta_set: ConvexSet::interval(0.5, 5.0),
        a_set: ConvexSet::Box { lo: vec![-3.0; 2], hi: vec![3.0; 2] },
        x0: 1.5,
        theta0: None,
        w_law: NoiseLaw::uniform(0.05),
        obs_law: NoiseLaw::zero(),
        schedule: ParamSchedule::Constant { value: vec![1.0, -0.5] },
        horizon: 60,
        state_bound: 2.0,
        feature_bound: 1.0,
    };
    spec.validate().expect("valid spec");

    let mut rng = StreamRng::substream(7, W_STREAM);
    let theta = 1.0;
    let mut x = spec.x0;
    let mut total = 0.0;
    for t in 0..spec.horizon {
        let a_star = spec.schedule.value_at(t);
        let u = spec.policy_input(x, theta, spec.residual(x, &a_star).unwrap());
        total += spec.stage_cost(x, u, theta);
        if t % 10 == 0 {
            println!("t={t:3} x={x:+.5} u={u:+.5}");
        }
        x = spec.step_true(x, u, t, &mut rng);
    }
    println!("total cost over {} steps: {total:.5}", spec.horizon);
}
