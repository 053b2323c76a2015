use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::{EnvConfig, N_TASKS, STATE_DIM};
use crate::error::{Error, Result};
use crate::rng;

pub type Vec2 = [f64; 2];

pub const AGENT_START: Vec2 = [0.1, 0.1];
pub const OBJECT_START: Vec2 = [0.5, 0.5];
pub const GOAL_A: Vec2 = [0.9, 0.9];
pub const GOAL_B: Vec2 = [0.9, 0.1];

/// Initial positions are kept this far from the border after perturbation.
const RESET_MARGIN: f64 = 0.05;

pub(crate) fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn clamp_unit(p: Vec2) -> Vec2 {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

/// Task 0 pushes the object to goal A, task 1 to goal B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    task_id: u8,
}

impl Instruction {
    pub const GOAL_A: Instruction = Instruction { task_id: 0 };
    pub const GOAL_B: Instruction = Instruction { task_id: 1 };

    pub fn new(task_id: u8) -> Result<Self> {
        if (task_id as usize) < N_TASKS {
            Ok(Self { task_id })
        } else {
            Err(Error::Domain(format!("unknown task id {task_id}")))
        }
    }

    /// Alternates tasks by index; used to balance datasets and evaluations.
    pub fn for_index(i: usize) -> Self {
        Self {
            task_id: (i % N_TASKS) as u8,
        }
    }

    pub fn task_id(self) -> u8 {
        self.task_id
    }

    pub fn nominal_goal(self) -> Vec2 {
        match self.task_id {
            0 => GOAL_A,
            _ => GOAL_B,
        }
    }

    pub fn one_hot(self) -> [f64; N_TASKS] {
        let mut v = [0.0; N_TASKS];
        v[self.task_id as usize] = 1.0;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    None,
    Object,
    Goal,
    RobotState,
    Combined,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 5] = [
        PerturbMode::None,
        PerturbMode::Object,
        PerturbMode::Goal,
        PerturbMode::RobotState,
        PerturbMode::Combined,
    ];
    /// The four perturbation families.
    pub const FAMILIES: [PerturbMode; 4] = [
        PerturbMode::Object,
        PerturbMode::Goal,
        PerturbMode::RobotState,
        PerturbMode::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::None => "none",
            PerturbMode::Object => "object",
            PerturbMode::Goal => "goal",
            PerturbMode::RobotState => "robot_state",
            PerturbMode::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn moves_object(self) -> bool {
        matches!(self, PerturbMode::Object | PerturbMode::Combined)
    }

    fn moves_goal(self) -> bool {
        matches!(self, PerturbMode::Goal | PerturbMode::Combined)
    }

    fn moves_agent(self) -> bool {
        matches!(self, PerturbMode::RobotState | PerturbMode::Combined)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Minor,
    Major,
}

impl Magnitude {
    pub fn name(self) -> &'static str {
        match self {
            Magnitude::Minor => "minor",
            Magnitude::Major => "major",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "minor" => Some(Magnitude::Minor),
            "major" => Some(Magnitude::Major),
            _ => None,
        }
    }

    /// `(object, goal, agent)` offset maxima in unit-square units.
    pub fn offsets(self) -> (f64, f64, f64) {
        match self {
            Magnitude::Minor => (0.05, 0.05, 0.10),
            Magnitude::Major => (0.10, 0.10, 0.25),
        }
    }
}

/// Uniform L-infinity offsets applied to the nominal start positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub object_offset_max: f64,
    pub goal_offset_max: f64,
    pub agent_offset_max: f64,
    pub mode: PerturbMode,
    pub magnitude: Magnitude,
}

impl PerturbSpec {
    pub fn none() -> Self {
        Self::preset(PerturbMode::None, Magnitude::Minor)
    }

    /// Offsets taken from the magnitude table; `mode` selects which apply.
    pub fn preset(mode: PerturbMode, magnitude: Magnitude) -> Self {
        let (object_offset_max, goal_offset_max, agent_offset_max) = magnitude.offsets();
        Self {
            object_offset_max,
            goal_offset_max,
            agent_offset_max,
            mode,
            magnitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("object_offset_max", self.object_offset_max),
            ("goal_offset_max", self.goal_offset_max),
            ("agent_offset_max", self.agent_offset_max),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("perturb.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Short label such as `object_minor`, or `unperturbed`.
    pub fn suite_name(&self) -> String {
        match self.mode {
            PerturbMode::None => "unperturbed".into(),
            m => format!("{}_{}", m.name(), self.magnitude.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent_pos: Vec2,
    pub object_pos: Vec2,
    pub goal_pos: Vec2,
    pub grasped: bool,
    pub step_index: usize,
}

impl EnvState {
    /// The 5-vector exposed to the policy.
    pub fn state_vector(&self) -> [f64; STATE_DIM] {
        [
            self.agent_pos[0],
            self.agent_pos[1],
            self.object_pos[0],
            self.object_pos[1],
            if self.grasped { 1.0 } else { 0.0 },
        ]
    }

    /// Rebuilds a state from the policy-visible vector plus a goal.
    pub fn from_state_vector(s: &[f64], goal_pos: Vec2) -> Result<Self> {
        crate::error::shape_check("state vector", STATE_DIM, s.len())?;
        Ok(Self {
            agent_pos: [s[0], s[1]],
            object_pos: [s[2], s[3]],
            goal_pos,
            grasped: s[4] > 0.5,
            step_index: 0,
        })
    }

    pub fn is_success(&self, cfg: &EnvConfig) -> bool {
        dist(self.object_pos, self.goal_pos) <= cfg.success_radius
    }
}

/// Nominal positions plus seeded uniform offsets for the coordinates the
/// perturbation mode selects. Six offsets are always drawn, in the order
/// agent, object, goal, so a seed yields the same draws under every mode.
pub fn reset(_cfg: &EnvConfig, instruction: Instruction, perturb: &PerturbSpec, seed: u64) -> EnvState {
    let mut r = rng::seeded(seed);
    let mut unit = || -> f64 { r.random_range(-1.0..=1.0) };
    let agent_off = [unit(), unit()];
    let object_off = [unit(), unit()];
    let goal_off = [unit(), unit()];

    let place = |nominal: Vec2, off: Vec2, max: f64, active: bool| -> Vec2 {
        let scale = if active { max } else { 0.0 };
        [
            (nominal[0] + scale * off[0]).clamp(RESET_MARGIN, 1.0 - RESET_MARGIN),
            (nominal[1] + scale * off[1]).clamp(RESET_MARGIN, 1.0 - RESET_MARGIN),
        ]
    };
    let mode = perturb.mode;
    EnvState {
        agent_pos: place(AGENT_START, agent_off, perturb.agent_offset_max, mode.moves_agent()),
        object_pos: place(OBJECT_START, object_off, perturb.object_offset_max, mode.moves_object()),
        goal_pos: place(
            instruction.nominal_goal(),
            goal_off,
            perturb.goal_offset_max,
            mode.moves_goal(),
        ),
        grasped: false,
        step_index: 0,
    }
}

/// One deterministic transition. Actions are clamped to `[-1, 1]` (NaN reads
/// as 0). The grasp toggles first, using the pre-move positions; then the
/// agent moves and a grasped object is displaced with it.
pub fn step(cfg: &EnvConfig, state: &EnvState, action: &[f64]) -> EnvState {
    let a = |i: usize| {
        let v = action.get(i).copied().unwrap_or(0.0);
        if v.is_nan() {
            0.0
        } else {
            v.clamp(-1.0, 1.0)
        }
    };
    let (dx, dy, grasp) = (a(0), a(1), a(2));
    let mut next = *state;
    if !next.grasped && grasp > 0.5 && dist(next.agent_pos, next.object_pos) <= cfg.grasp_radius {
        next.grasped = true;
    } else if next.grasped && grasp < -0.5 {
        next.grasped = false;
    }
    let moved = clamp_unit([
        next.agent_pos[0] + cfg.step_scale * dx,
        next.agent_pos[1] + cfg.step_scale * dy,
    ]);
    let delta = [moved[0] - next.agent_pos[0], moved[1] - next.agent_pos[1]];
    next.agent_pos = moved;
    if next.grasped {
        next.object_pos = clamp_unit([next.object_pos[0] + delta[0], next.object_pos[1] + delta[1]]);
    }
    next.step_index += 1;
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unperturbed_reset_uses_nominal_constants() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, Instruction::GOAL_A, &PerturbSpec::none(), 99);
        assert_eq!(s.agent_pos, [0.1, 0.1]);
        assert_eq!(s.object_pos, [0.5, 0.5]);
        assert_eq!(s.goal_pos, [0.9, 0.9]);
        let s = reset(&cfg, Instruction::GOAL_B, &PerturbSpec::none(), 99);
        assert_eq!(s.goal_pos, [0.9, 0.1]);
        assert!(!s.grasped);
        assert_eq!(s.step_index, 0);
    }

    #[test]
    fn object_perturbation_respects_bound_and_mode() {
        let cfg = EnvConfig::default();
        let p = PerturbSpec {
            object_offset_max: 0.05,
            ..PerturbSpec::preset(PerturbMode::Object, Magnitude::Minor)
        };
        for seed in 0..200 {
            let s = reset(&cfg, Instruction::GOAL_A, &p, seed);
            assert!((s.object_pos[0] - 0.5).abs() <= 0.05 && (s.object_pos[1] - 0.5).abs() <= 0.05);
            assert_eq!(s.agent_pos, AGENT_START);
            assert_eq!(s.goal_pos, GOAL_A);
        }
        assert_eq!(reset(&cfg, Instruction::GOAL_A, &p, 5), reset(&cfg, Instruction::GOAL_A, &p, 5));
    }

    #[test]
    fn zero_action_only_advances_time() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, Instruction::GOAL_A, &PerturbSpec::none(), 0);
        let n = step(&cfg, &s, &[0.0, 0.0, 0.0]);
        assert_eq!(n.step_index, 1);
        assert_eq!(EnvState { step_index: 0, ..n }, s);
    }

    #[test]
    fn grasp_then_drag_moves_object() {
        let cfg = EnvConfig::default();
        let s = EnvState {
            agent_pos: [0.5, 0.5],
            object_pos: [0.5, 0.5],
            goal_pos: GOAL_A,
            grasped: false,
            step_index: 0,
        };
        let s = step(&cfg, &s, &[0.0, 0.0, 1.0]);
        assert!(s.grasped);
        let s = step(&cfg, &s, &[1.0, 0.0, 0.0]);
        assert!((s.object_pos[0] - (0.5 + cfg.step_scale)).abs() < 1e-15);
        let s = step(&cfg, &s, &[0.0, 0.0, -1.0]);
        assert!(!s.grasped);
    }

    #[test]
    fn grasp_fails_out_of_reach() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, Instruction::GOAL_A, &PerturbSpec::none(), 0);
        assert!(!step(&cfg, &s, &[0.0, 0.0, 1.0]).grasped);
    }

    #[test]
    fn modes_parse_by_name() {
        for m in PerturbMode::ALL {
            assert_eq!(PerturbMode::parse(m.name()), Some(m));
        }
        assert_eq!(PerturbMode::parse("sideways"), None);
        assert_eq!(PerturbSpec::preset(PerturbMode::Goal, Magnitude::Major).suite_name(), "goal_major");
    }

    proptest! {
        #[test]
        fn random_walks_stay_in_unit_square(
            seed in 0u64..1000,
            actions in proptest::collection::vec(proptest::array::uniform3(-3.0f64..3.0), 1000),
        ) {
            let cfg = EnvConfig::default();
            let p = PerturbSpec::preset(PerturbMode::Combined, Magnitude::Major);
            let mut s = reset(&cfg, Instruction::for_index(seed as usize), &p, seed);
            for a in &actions {
                s = step(&cfg, &s, a);
                for v in s.agent_pos.iter().chain(&s.object_pos) {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
        }

        #[test]
        fn perturbation_offsets_never_exceed_maxima(seed in any::<u64>(), major in any::<bool>()) {
            let cfg = EnvConfig::default();
            let mag = if major { Magnitude::Major } else { Magnitude::Minor };
            let p = PerturbSpec::preset(PerturbMode::Combined, mag);
            let s = reset(&cfg, Instruction::GOAL_B, &p, seed);
            let linf = |a: Vec2, b: Vec2| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
            prop_assert!(linf(s.agent_pos, AGENT_START) <= p.agent_offset_max + 1e-15);
            prop_assert!(linf(s.object_pos, OBJECT_START) <= p.object_offset_max + 1e-15);
            prop_assert!(linf(s.goal_pos, GOAL_B) <= p.goal_offset_max + 1e-15);
        }
    }
}
