use asvlab::env::{EnvConfig, RandomizationConfig, SuccessRule, OBS_DIM};
use asvlab::eval::{run_grid_eval, select_cells};

fn pursuit(o: &[f64; OBS_DIM]) -> [f64; 2] {
    let turn = (1.5 * o[4].atan2(o[3])).clamp(-1.0, 1.0);
    let fwd = if o[3] > 0.7 { 0.6 } else { 0.1 };
    [(fwd - turn).clamp(-1.0, 1.0), (fwd + turn).clamp(-1.0, 1.0)]
}

fn median_eacc(world: &EnvConfig, seed: u64) -> f64 {
    let cells = select_cells(&world.grid, None).unwrap();
    let mut e: Vec<f64> = run_grid_eval(&mut pursuit, world, &cells, seed, false).unwrap().iter().map(|m| m.e_acc).collect();
    e.sort_by(f64::total_cmp);
    e[e.len() / 2]
}

#[test]
fn disturbances_do_not_lower_effort() {
    let calm = EnvConfig {
        randomization: RandomizationConfig::disabled(),
        success: SuccessRule::capture(),
        ..EnvConfig::default()
    };
    let rough = EnvConfig { randomization: RandomizationConfig::default().disturbances_only(), ..calm.clone() };
    let base = median_eacc(&calm, 0);
    for seed in 0..3 {
        let disturbed = median_eacc(&rough, seed);
        assert!(disturbed >= 0.95 * base, "seed {seed}: median E_acc {disturbed:.1} with disturbances, {base:.1} without");
    }
}
