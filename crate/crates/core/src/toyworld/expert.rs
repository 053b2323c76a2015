//! Scripted demonstrator: reach the object, grasp, carry it to the goal,
//! release.

use super::config::EnvConfig;
use super::env::{dist, EnvState};

/// Proportional controller in the action space. Displacements are expressed
/// as `(target - current) / step_scale` so a saturated action covers
/// `step_scale` per step and the final approach lands exactly.
pub fn expert_action(cfg: &EnvConfig, state: &EnvState) -> [f64; 3] {
    let toward = |from: [f64; 2], to: [f64; 2]| -> [f64; 2] {
        [
            ((to[0] - from[0]) / cfg.step_scale).clamp(-1.0, 1.0),
            ((to[1] - from[1]) / cfg.step_scale).clamp(-1.0, 1.0),
        ]
    };
    if dist(state.object_pos, state.goal_pos) <= cfg.success_radius {
        return [0.0, 0.0, -1.0];
    }
    if state.grasped {
        let d = toward(state.object_pos, state.goal_pos);
        return [d[0], d[1], 1.0];
    }
    let d = toward(state.agent_pos, state.object_pos);
    if dist(state.agent_pos, state.object_pos) <= cfg.grasp_radius {
        [d[0], d[1], 1.0]
    } else {
        [d[0], d[1], -1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toyworld::env::{reset, step, Instruction, Magnitude, PerturbMode, PerturbSpec};

    fn run_expert(cfg: &EnvConfig, mut s: EnvState) -> Option<usize> {
        for t in 0..cfg.max_episode_steps {
            s = step(cfg, &s, &expert_action(cfg, &s));
            if s.is_success(cfg) {
                return Some(t + 1);
            }
        }
        None
    }

    #[test]
    fn releases_at_goal() {
        let cfg = EnvConfig::default();
        let s = EnvState {
            agent_pos: [0.9, 0.9],
            object_pos: [0.9, 0.9],
            goal_pos: [0.9, 0.9],
            grasped: true,
            step_index: 3,
        };
        assert_eq!(expert_action(&cfg, &s)[2], -1.0);
    }

    #[test]
    fn moves_right_toward_object_on_the_right() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, Instruction::GOAL_A, &PerturbSpec::none(), 0);
        let a = expert_action(&cfg, &s);
        assert!(a[0] > 0.0);
        assert_eq!(a[2], -1.0);
    }

    #[test]
    fn solves_both_tasks_unperturbed() {
        let cfg = EnvConfig::default();
        for task in 0..2 {
            let s = reset(&cfg, Instruction::new(task).unwrap(), &PerturbSpec::none(), 0);
            let steps = run_expert(&cfg, s).expect("expert must succeed");
            assert!(steps <= cfg.max_episode_steps);
        }
    }

    #[test]
    fn solves_major_perturbations() {
        let cfg = EnvConfig::default();
        let p = PerturbSpec::preset(PerturbMode::Combined, Magnitude::Major);
        for seed in 0..100 {
            let s = reset(&cfg, Instruction::for_index(seed as usize), &p, seed);
            assert!(run_expert(&cfg, s).is_some(), "seed {seed}");
        }
    }

    #[test]
    fn actions_stay_in_range() {
        let cfg = EnvConfig::default();
        let p = PerturbSpec::preset(PerturbMode::Combined, Magnitude::Major);
        let mut s = reset(&cfg, Instruction::GOAL_B, &p, 1);
        for _ in 0..80 {
            let a = expert_action(&cfg, &s);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            s = step(&cfg, &s, &a);
        }
    }
}
