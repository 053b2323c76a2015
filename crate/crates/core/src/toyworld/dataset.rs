//! Expert demonstration datasets and their on-disk format.
//!
//! ```text
//! magic    "WMDS\0"                                   5 bytes
//! version  u16
//! header   frame_size u32 | action_dim u32 | chunk_len u32 | record_count u64
//! record*  (all f32)
//!          frame            frame_size^2
//!          task_id          1
//!          state            5   (agent x, agent y, object x, object y, grasped)
//!          actions          chunk_len * action_dim, row-major by time step
//!          future frames    chunk_len * frame_size^2
//!          actions_valid    1   (1.0 or 0.0)
//! ```
//!
//! Everything is little-endian. Records produced by [`generate_dataset`] are
//! already rounded to `f32`, so a dataset read back from disk is identical to
//! the one generated in memory.

use std::path::Path;

use rand_distr::{Distribution, Normal};

use super::config::{EnvConfig, STATE_DIM};
use super::env::{reset, step, EnvState, Instruction, PerturbSpec};
use super::expert::expert_action;
use super::render::{render, Frame};
use crate::chunk::ActionChunk;
use crate::error::{Error, Result};
use crate::io::{atomic_write, ByteReader};
use crate::rng;

pub const MAGIC: &[u8; 5] = b"WMDS\0";
pub const FORMAT_VERSION: u16 = 1;

/// What the policy sees at a decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: Frame,
    pub instruction: Instruction,
    pub state: [f64; STATE_DIM],
}

impl Observation {
    pub fn of(state: &EnvState, instruction: Instruction, cfg: &EnvConfig) -> Self {
        Self {
            frame: render(state, cfg),
            instruction,
            state: state.state_vector(),
        }
    }
}

/// One supervised example: the observation at a chunk start, the executed
/// `T x A` action chunk and the `T` frames that followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkRecord {
    pub frame: Frame,
    pub instruction: Instruction,
    pub state: [f64; STATE_DIM],
    pub actions: ActionChunk,
    pub future_frames: Vec<Frame>,
    /// False when the chunk runs past the end of its episode and was padded
    /// with post-termination expert steps.
    pub future_actions_valid: bool,
}

impl ChunkRecord {
    pub fn observation(&self) -> Observation {
        Observation {
            frame: self.frame.clone(),
            instruction: self.instruction,
            state: self.state,
        }
    }

    /// `(frame_t, action_t, frame_{t+1})` for each step of the chunk.
    pub fn transitions(&self) -> impl Iterator<Item = (&Frame, &[f64], &Frame)> {
        (0..self.actions.horizon()).map(move |t| {
            let before = if t == 0 { &self.frame } else { &self.future_frames[t - 1] };
            (before, self.actions.row(t), &self.future_frames[t])
        })
    }
}

fn q(v: f64) -> f64 {
    v as f32 as f64
}

fn quantize_frame(f: Frame) -> Frame {
    let size = f.size();
    let px = f.pixels().iter().map(|&p| q(p)).collect();
    Frame::from_pixels(size, px).expect("size preserved")
}

/// Runs noisy expert episodes and slices each into non-overlapping chunks.
///
/// Episode `e` uses instruction `e mod 2`. An episode ends at success or at
/// `max_episode_steps`; a trailing partial chunk is completed with further
/// expert steps and flagged invalid.
pub fn generate_dataset(
    cfg: &EnvConfig,
    n_episodes: usize,
    perturb: &PerturbSpec,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<ChunkRecord>> {
    cfg.validate()?;
    perturb.validate()?;
    if n_episodes == 0 {
        return Err(Error::Config("dataset needs at least one episode".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let t_len = cfg.chunk_len;
    let mut records = Vec::new();
    for e in 0..n_episodes {
        let instruction = Instruction::for_index(e);
        let mut state = reset(cfg, instruction, perturb, rng::derive_seed(seed, &[e as u64, 0]));
        let mut noise_rng = rng::derived(seed, &[e as u64, 1]);
        let mut states = vec![state];
        let mut actions: Vec<Vec<f64>> = Vec::new();
        let mut length = None;
        let mut t = 0;
        loop {
            if length.is_none() && (state.is_success(cfg) || t == cfg.max_episode_steps) {
                length = Some(t);
            }
            if let Some(len) = length {
                if t >= len.div_ceil(t_len) * t_len {
                    break;
                }
            }
            let a: Vec<f64> = expert_action(cfg, &state)
                .iter()
                .map(|&v| q((v + noise.sample(&mut noise_rng)).clamp(-1.0, 1.0)))
                .collect();
            state = step(cfg, &state, &a);
            states.push(state);
            actions.push(a);
            t += 1;
        }
        let len = length.unwrap();
        for c in 0..len.div_ceil(t_len) {
            let start = c * t_len;
            let init = &states[start];
            records.push(ChunkRecord {
                frame: quantize_frame(render(init, cfg)),
                instruction,
                state: init.state_vector().map(q),
                actions: ActionChunk::from_rows(&actions[start..start + t_len])?,
                future_frames: states[start + 1..=start + t_len]
                    .iter()
                    .map(|s| quantize_frame(render(s, cfg)))
                    .collect(),
                future_actions_valid: start + t_len <= len,
            });
        }
    }
    Ok(records)
}

/// Dataset shape parameters stored in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub frame_size: usize,
    pub action_dim: usize,
    pub chunk_len: usize,
}

impl DatasetHeader {
    pub fn of(cfg: &EnvConfig) -> Self {
        Self {
            frame_size: cfg.frame_size,
            action_dim: cfg.action_dim,
            chunk_len: cfg.chunk_len,
        }
    }

    /// Errors naming the first field that disagrees with `cfg`.
    pub fn check_matches(&self, cfg: &EnvConfig) -> Result<()> {
        for (name, file, conf) in [
            ("frame_size", self.frame_size, cfg.frame_size),
            ("action_dim", self.action_dim, cfg.action_dim),
            ("chunk_len", self.chunk_len, cfg.chunk_len),
        ] {
            if file != conf {
                return Err(Error::Shape(format!(
                    "dataset {name} = {file} but config env.{name} = {conf}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<ChunkRecord>,
}

pub fn encode_dataset(header: DatasetHeader, records: &[ChunkRecord]) -> Result<Vec<u8>> {
    let DatasetHeader {
        frame_size,
        action_dim,
        chunk_len,
    } = header;
    let px = frame_size * frame_size;
    let record_floats = px + 1 + STATE_DIM + chunk_len * action_dim + chunk_len * px + 1;
    let mut out = Vec::with_capacity(32 + records.len() * record_floats * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [frame_size, action_dim, chunk_len] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    let mut put = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for (i, r) in records.iter().enumerate() {
        let bad_shape = r.frame.size() != frame_size
            || r.actions.horizon() != chunk_len
            || r.actions.action_dim() != action_dim
            || r.future_frames.len() != chunk_len
            || r.future_frames.iter().any(|f| f.size() != frame_size);
        if bad_shape {
            return Err(Error::Shape(format!("record {i} does not match the dataset header")));
        }
        r.frame.pixels().iter().for_each(|&p| put(p));
        put(r.instruction.task_id() as f64);
        r.state.iter().for_each(|&s| put(s));
        r.actions.as_slice().iter().for_each(|&a| put(a));
        for f in &r.future_frames {
            f.pixels().iter().for_each(|&p| put(p));
        }
        put(if r.future_actions_valid { 1.0 } else { 0.0 });
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("bad dataset magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let frame_size = r.u32()? as usize;
    let action_dim = r.u32()? as usize;
    let chunk_len = r.u32()? as usize;
    let n = r.u64()? as usize;
    let px = frame_size * frame_size;
    let frame = |r: &mut ByteReader| -> Result<Frame> {
        let pixels = (0..px).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        Frame::from_pixels(frame_size, pixels)
    };
    let mut records = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let f0 = frame(&mut r)?;
        let task = r.f32()?;
        let instruction = Instruction::new(task as u8)
            .map_err(|_| Error::Format(format!("bad task id {task}")))?;
        let mut state = [0.0; STATE_DIM];
        for s in &mut state {
            *s = f64::from(r.f32()?);
        }
        let actions = (0..chunk_len * action_dim)
            .map(|_| r.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        let future_frames = (0..chunk_len).map(|_| frame(&mut r)).collect::<Result<Vec<_>>>()?;
        let valid = r.f32()? != 0.0;
        records.push(ChunkRecord {
            frame: f0,
            instruction,
            state,
            actions: ActionChunk::from_vec(chunk_len, action_dim, actions)?,
            future_frames,
            future_actions_valid: valid,
        });
    }
    if !r.is_empty() {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    Ok(Dataset {
        header: DatasetHeader {
            frame_size,
            action_dim,
            chunk_len,
        },
        records,
    })
}

pub fn write_dataset(path: &Path, header: DatasetHeader, records: &[ChunkRecord]) -> Result<()> {
    atomic_write(path, &encode_dataset(header, records)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toyworld::env::{Magnitude, PerturbMode};

    #[test]
    fn slicing_arithmetic() {
        // A noiseless unperturbed episode: count steps to success directly.
        let cfg = EnvConfig::default();
        let mut s = reset(&cfg, Instruction::GOAL_A, &PerturbSpec::none(), rng::derive_seed(0, &[0, 0]));
        let mut len = 0usize;
        while !s.is_success(&cfg) {
            s = step(&cfg, &s, &expert_action(&cfg, &s));
            len += 1;
        }
        let recs = generate_dataset(&cfg, 1, &PerturbSpec::none(), 0.0, 0).unwrap();
        assert_eq!(recs.len(), len.div_ceil(cfg.chunk_len));
        let padded = !len.is_multiple_of(cfg.chunk_len);
        assert_eq!(!recs.last().unwrap().future_actions_valid, padded);
        assert!(recs[..recs.len() - 1].iter().all(|r| r.future_actions_valid));

        let cfg8 = EnvConfig { chunk_len: 8, max_episode_steps: 24, ..Default::default() };
        // Success is impossible in 24 steps from the nominal start at this
        // speed, so the episode terminates at exactly step 24.
        let slow = EnvConfig { step_scale: 0.01, ..cfg8 };
        let recs = generate_dataset(&slow, 1, &PerturbSpec::none(), 0.0, 3).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.future_actions_valid));
    }

    #[test]
    fn records_are_well_formed() {
        let cfg = EnvConfig::default();
        let p = PerturbSpec::preset(PerturbMode::Combined, Magnitude::Minor);
        let recs = generate_dataset(&cfg, 6, &p, 0.3, 11).unwrap();
        for r in &recs {
            assert_eq!(r.future_frames.len(), cfg.chunk_len);
            assert!(r.actions.as_slice().iter().all(|a| (-1.0..=1.0).contains(a)));
            for f in std::iter::once(&r.frame).chain(&r.future_frames) {
                assert!(f.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
        assert!(recs.iter().any(|r| r.instruction == Instruction::GOAL_B));
    }

    #[test]
    fn stored_frames_replay_exactly() {
        let cfg = EnvConfig::default();
        let p = PerturbSpec::preset(PerturbMode::RobotState, Magnitude::Major);
        let recs = generate_dataset(&cfg, 10, &p, 0.2, 5).unwrap();
        for r in &recs {
            let mut s = EnvState::from_state_vector(&r.state, r.instruction.nominal_goal()).unwrap();
            for (t, a) in r.actions.rows().enumerate() {
                s = step(&cfg, &s, a);
                assert_eq!(quantize_frame(render(&s, &cfg)), r.future_frames[t]);
            }
        }
    }

    #[test]
    fn file_roundtrip_and_determinism() {
        let cfg = EnvConfig::default();
        let recs = generate_dataset(&cfg, 3, &PerturbSpec::none(), 0.0, 1).unwrap();
        let bytes = encode_dataset(DatasetHeader::of(&cfg), &recs).unwrap();
        assert_eq!(&bytes[..5], b"WMDS\0");
        let again = encode_dataset(
            DatasetHeader::of(&cfg),
            &generate_dataset(&cfg, 3, &PerturbSpec::none(), 0.0, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(bytes, again);
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back.records, recs);
        assert_eq!(back.header, DatasetHeader::of(&cfg));
        assert!(decode_dataset(&bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = EnvConfig::default();
        assert!(generate_dataset(&cfg, 0, &PerturbSpec::none(), 0.0, 1).is_err());
        assert!(generate_dataset(&cfg, 1, &PerturbSpec::none(), -1.0, 1).is_err());
    }
}
