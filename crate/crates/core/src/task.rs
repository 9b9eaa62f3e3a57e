//! Selection-task protocols: trial schedules, reach kinematics, dwell
//! selection and a conflict-adaptation model of completion time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Condition, DLevel, EventCode, EventMarker, HandStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolMode {
    BlockedRadius,
    Oddball,
}

/// Missing fields are taken from the preset for `mode` (blocked when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ProtocolPatch")]
pub struct ProtocolConfig {
    pub mode: ProtocolMode,
    /// Trials per participant (blocked) or per session (oddball).
    pub trials_total: usize,
    pub block_len: usize,
    /// Selection distance as a multiple of the target radius, indexed by `DLevel`.
    pub d_multipliers: [f64; 3],
    pub rest_every_blocks: usize,
    pub rest_duration_s: f64,
    pub dwell_s: f64,
    pub trial_timeout_s: f64,
    pub inter_trial_rest_s: f64,
    /// Pause between a selection and the next event (next trial or rest onset).
    pub inter_trial_gap_s: f64,
    /// Recording time before the first trial.
    pub lead_in_s: f64,
    pub hand_styles: Vec<HandStyle>,
    pub sessions: usize,
}

impl ProtocolConfig {
    pub fn blocked() -> Self {
        Self {
            mode: ProtocolMode::BlockedRadius,
            trials_total: 300,
            block_len: 10,
            d_multipliers: [0.2, 1.0, 1.5],
            rest_every_blocks: 3,
            rest_duration_s: 30.0,
            dwell_s: 0.3,
            trial_timeout_s: 5.0,
            inter_trial_rest_s: 5.0,
            inter_trial_gap_s: 0.5,
            lead_in_s: 2.0,
            hand_styles: HandStyle::ALL.to_vec(),
            sessions: 1,
        }
    }

    /// D1 is the target size, D2 twice the target size.
    pub fn oddball() -> Self {
        Self {
            mode: ProtocolMode::Oddball,
            trials_total: 120,
            block_len: 4,
            d_multipliers: [1.0, 2.0, 1.5],
            sessions: 3,
            ..Self::blocked()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let durations = [
            ("rest_duration_s", self.rest_duration_s),
            ("dwell_s", self.dwell_s),
            ("trial_timeout_s", self.trial_timeout_s),
            ("inter_trial_rest_s", self.inter_trial_rest_s),
            ("inter_trial_gap_s", self.inter_trial_gap_s),
        ];
        for (name, v) in durations {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.lead_in_s >= 0.0) {
            return bad("lead_in_s must be nonnegative".into());
        }
        if self.d_multipliers.iter().any(|m| !(*m >= 0.0)) {
            return bad("d_multipliers must be nonnegative".into());
        }
        if self.trials_total == 0 || self.block_len == 0 {
            return bad("trials_total and block_len must be positive".into());
        }
        match self.mode {
            ProtocolMode::BlockedRadius => {
                if self.trials_total % self.block_len != 0 {
                    return bad(format!(
                        "{} trials do not divide into blocks of {}",
                        self.trials_total, self.block_len
                    ));
                }
                if (self.trials_total / self.block_len) % 3 != 0 {
                    return bad("block count must be divisible by the three D levels".into());
                }
                if self.rest_every_blocks == 0 {
                    return bad("rest_every_blocks must be positive".into());
                }
            }
            ProtocolMode::Oddball => {
                if self.trials_total % 4 != 0 {
                    return bad(format!(
                        "oddball sessions need a multiple of 4 trials, got {}",
                        self.trials_total
                    ));
                }
                if self.hand_styles.is_empty()
                    || self.sessions == 0
                    || self.sessions > self.hand_styles.len()
                {
                    return bad("sessions must be between 1 and the number of hand styles".into());
                }
            }
        }
        Ok(())
    }

    pub fn multiplier(&self, level: DLevel) -> f64 {
        self.d_multipliers[level.index()]
    }

    /// The level whose selection distance matches the visible target.
    pub fn congruent_level(&self) -> DLevel {
        match self.mode {
            ProtocolMode::BlockedRadius => DLevel::D2,
            ProtocolMode::Oddball => DLevel::D1,
        }
    }

    pub fn is_congruent(&self, level: DLevel) -> bool {
        level == self.congruent_level()
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self::blocked()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolPatch {
    mode: Option<ProtocolMode>,
    trials_total: Option<usize>,
    block_len: Option<usize>,
    d_multipliers: Option<[f64; 3]>,
    rest_every_blocks: Option<usize>,
    rest_duration_s: Option<f64>,
    dwell_s: Option<f64>,
    trial_timeout_s: Option<f64>,
    inter_trial_rest_s: Option<f64>,
    inter_trial_gap_s: Option<f64>,
    lead_in_s: Option<f64>,
    hand_styles: Option<Vec<HandStyle>>,
    sessions: Option<usize>,
}

impl From<ProtocolPatch> for ProtocolConfig {
    fn from(p: ProtocolPatch) -> Self {
        let base = match p.mode {
            Some(ProtocolMode::Oddball) => Self::oddball(),
            _ => Self::blocked(),
        };
        Self {
            mode: p.mode.unwrap_or(base.mode),
            trials_total: p.trials_total.unwrap_or(base.trials_total),
            block_len: p.block_len.unwrap_or(base.block_len),
            d_multipliers: p.d_multipliers.unwrap_or(base.d_multipliers),
            rest_every_blocks: p.rest_every_blocks.unwrap_or(base.rest_every_blocks),
            rest_duration_s: p.rest_duration_s.unwrap_or(base.rest_duration_s),
            dwell_s: p.dwell_s.unwrap_or(base.dwell_s),
            trial_timeout_s: p.trial_timeout_s.unwrap_or(base.trial_timeout_s),
            inter_trial_rest_s: p.inter_trial_rest_s.unwrap_or(base.inter_trial_rest_s),
            inter_trial_gap_s: p.inter_trial_gap_s.unwrap_or(base.inter_trial_gap_s),
            lead_in_s: p.lead_in_s.unwrap_or(base.lead_in_s),
            hand_styles: p.hand_styles.unwrap_or(base.hand_styles),
            sessions: p.sessions.unwrap_or(base.sessions),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSide {
    Pos1,
    Pos2,
}

impl TargetSide {
    pub fn for_trial(trial_id: u32) -> Self {
        if trial_id % 2 == 0 {
            TargetSide::Pos1
        } else {
            TargetSide::Pos2
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetSide::Pos1 => "pos1",
            TargetSide::Pos2 => "pos2",
        }
    }
}

impl std::str::FromStr for TargetSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos1" => Ok(TargetSide::Pos1),
            "pos2" => Ok(TargetSide::Pos2),
            other => Err(Error::format("target_side", format!("unknown value `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub trial_id: u32,
    pub block_id: u32,
    /// 0-based position within the block.
    pub block_position: u32,
    pub d_level: DLevel,
    pub style: Option<HandStyle>,
    pub target_side: TargetSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub mode: ProtocolMode,
    pub entries: Vec<TrialEntry>,
}

/// Blocks of constant D in a seeded uniform permutation of `{D1 x k, D2 x k, D3 x k}`.
pub fn build_blocked_schedule(cfg: &ProtocolConfig, seed: u64) -> Result<TrialPlan> {
    if cfg.mode != ProtocolMode::BlockedRadius {
        return Err(Error::InvalidConfig("blocked schedule needs BlockedRadius mode".into()));
    }
    cfg.validate()?;
    let n_blocks = cfg.trials_total / cfg.block_len;
    let per_level = n_blocks / 3;
    let mut blocks: Vec<DLevel> = DLevel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, per_level))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    blocks.shuffle(&mut rng);
    let entries = (0..cfg.trials_total)
        .map(|i| {
            let block = i / cfg.block_len;
            TrialEntry {
                trial_id: i as u32,
                block_id: block as u32,
                block_position: (i % cfg.block_len) as u32,
                d_level: blocks[block],
                style: None,
                target_side: TargetSide::for_trial(i as u32),
            }
        })
        .collect();
    Ok(TrialPlan {
        mode: cfg.mode,
        entries,
    })
}

/// Hand style of each session for a participant: a cyclic Latin-square rotation.
pub fn session_styles(cfg: &ProtocolConfig, participant_index: usize) -> Vec<HandStyle> {
    let k = cfg.hand_styles.len();
    (0..cfg.sessions)
        .map(|s| cfg.hand_styles[(s + participant_index) % k])
        .collect()
}

/// One plan per session, each repeating `[D1, D1, D1, D2]`.
pub fn build_oddball_schedule(cfg: &ProtocolConfig, participant_index: usize) -> Result<Vec<TrialPlan>> {
    if cfg.mode != ProtocolMode::Oddball {
        return Err(Error::InvalidConfig("oddball schedule needs Oddball mode".into()));
    }
    cfg.validate()?;
    Ok(session_styles(cfg, participant_index)
        .into_iter()
        .map(|style| TrialPlan {
            mode: cfg.mode,
            entries: (0..cfg.trials_total as u32)
                .map(|i| TrialEntry {
                    trial_id: i,
                    block_id: i / 4,
                    block_position: i % 4,
                    d_level: if i % 4 == 3 { DLevel::D2 } else { DLevel::D1 },
                    style: Some(style),
                    target_side: TargetSide::for_trial(i),
                })
                .collect(),
        })
        .collect())
}

/// Straight-line reach with a minimum-jerk time profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachModel {
    pub start: [f64; 3],
    pub target_center: [f64; 3],
    pub actual_radius_m: f64,
    pub movement_time_s: f64,
}

impl Default for ReachModel {
    fn default() -> Self {
        Self {
            start: [-0.15, 0.0, 0.0],
            target_center: [0.15, 0.0, 0.0],
            actual_radius_m: 0.05,
            movement_time_s: 0.8,
        }
    }
}

impl ReachModel {
    /// `10u^3 - 15u^4 + 6u^5` with `u = t / T`, clamped to `[0, 1]`.
    pub fn path_fraction(&self, t: f64) -> f64 {
        let u = (t / self.movement_time_s).clamp(0.0, 1.0);
        u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }

    pub fn position(&self, t: f64) -> [f64; 3] {
        if t >= self.movement_time_s {
            return self.target_center;
        }
        let s = self.path_fraction(t);
        std::array::from_fn(|i| self.start[i] + s * (self.target_center[i] - self.start[i]))
    }

    pub fn distance_to_target(&self, t: f64) -> f64 {
        let p = self.position(t);
        (0..3)
            .map(|i| (p[i] - self.target_center[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn reach_distance(&self) -> f64 {
        (0..3)
            .map(|i| (self.start[i] - self.target_center[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// First time on a 1 ms grid with the hand within `d_abs` of the target
    /// centre; `None` if that never happens.
    pub fn crossing_time(&self, d_abs: f64) -> Option<f64> {
        if !(d_abs >= 0.0) {
            return None;
        }
        let steps = (self.movement_time_s * 1000.0).ceil() as u64;
        (0..=steps)
            .map(|k| (k as f64 / 1000.0).min(self.movement_time_s))
            .find(|&t| self.distance_to_target(t) <= d_abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConflictRtModel {
    pub block_change_penalty_s: f64,
    pub conflict_penalty_s: f64,
    /// Multiplicative decay per within-block position.
    pub decay: f64,
    /// Fraction of the conflict penalty removed after an incongruent trial.
    pub congruency_modulation: f64,
    pub noise_sd_s: f64,
}

impl Default for ConflictRtModel {
    fn default() -> Self {
        Self {
            block_change_penalty_s: 0.4,
            conflict_penalty_s: 0.3,
            decay: 0.5,
            congruency_modulation: 0.3,
            noise_sd_s: 0.05,
        }
    }
}

impl ConflictRtModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.block_change_penalty_s >= 0.0
            && self.conflict_penalty_s >= 0.0
            && self.noise_sd_s >= 0.0
            && (0.0..=1.0).contains(&self.decay))
        {
            return Err(Error::InvalidConfig(
                "penalties and noise must be nonnegative, decay in [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.congruency_modulation) {
            return Err(Error::InvalidConfig(format!(
                "congruency modulation must lie in [0, 1), got {}",
                self.congruency_modulation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub entry: TrialEntry,
    pub crossing_time_s: f64,
    pub completion_time_s: f64,
    /// Absent for the first trial.
    pub prev_trial_congruent: Option<bool>,
    pub feedback_onset_sample: Option<usize>,
}

/// Completion time without noise. Missing crossings count as the trial timeout.
pub fn expected_completion(
    entry: &TrialEntry,
    prev: Option<&TrialEntry>,
    model: &ConflictRtModel,
    reach: &ReachModel,
    cfg: &ProtocolConfig,
) -> (f64, f64) {
    let d_abs = cfg.multiplier(entry.d_level) * reach.actual_radius_m;
    let crossing = reach.crossing_time(d_abs).unwrap_or(cfg.trial_timeout_s);
    let mut completion = crossing + cfg.dwell_s;
    let blocked = cfg.mode == ProtocolMode::BlockedRadius;
    let decay = if blocked {
        model.decay.powi(entry.block_position as i32)
    } else {
        1.0
    };
    if blocked {
        completion += model.block_change_penalty_s * decay;
    }
    if !cfg.is_congruent(entry.d_level) {
        let after_conflict = prev.is_some_and(|p| !cfg.is_congruent(p.d_level));
        let modulation = if after_conflict {
            1.0 - model.congruency_modulation
        } else {
            1.0
        };
        completion += model.conflict_penalty_s * modulation * decay;
    }
    (crossing, completion)
}

pub fn simulate_trial<R: Rng + ?Sized>(
    entry: &TrialEntry,
    prev: Option<&TrialEntry>,
    model: &ConflictRtModel,
    reach: &ReachModel,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> TrialRecord {
    let (crossing, mean) = expected_completion(entry, prev, model, reach, cfg);
    let noise = if model.noise_sd_s > 0.0 {
        Normal::new(0.0, model.noise_sd_s)
            .expect("validated sd")
            .sample(rng)
    } else {
        0.0
    };
    TrialRecord {
        entry: *entry,
        crossing_time_s: crossing,
        completion_time_s: (mean + noise).max(crossing + cfg.dwell_s),
        prev_trial_congruent: prev.map(|p| cfg.is_congruent(p.d_level)),
        feedback_onset_sample: None,
    }
}

pub fn simulate_plan(
    plan: &TrialPlan,
    model: &ConflictRtModel,
    reach: &ReachModel,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(plan
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let prev = i.checked_sub(1).map(|j| &plan.entries[j]);
            simulate_trial(e, prev, model, reach, cfg, &mut rng)
        })
        .collect())
}

/// Uniform event latency in `[lo_ms, hi_ms]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub lo_ms: f64,
    pub hi_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            lo_ms: 100.0,
            hi_ms: 150.0,
        }
    }
}

impl LatencyModel {
    pub const ZERO: LatencyModel = LatencyModel { lo_ms: 0.0, hi_ms: 0.0 };

    pub fn sample_ms<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi_ms > self.lo_ms {
            rng.random_range(self.lo_ms..=self.hi_ms)
        } else {
            self.lo_ms
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lo_ms >= 0.0 && self.hi_ms >= self.lo_ms {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "latency range [{}, {}] ms is invalid",
                self.lo_ms, self.hi_ms
            )))
        }
    }
}

/// Lays the trials out on a timeline and emits the marker stream.
///
/// Each trial starts with `TrialStart`, is selected `completion_time_s`
/// later, and the `FeedbackOnset` marker lands at the selection time plus
/// the sampled event latency. Rests follow every `rest_every_blocks` blocks
/// (blocked mode, none after the last block) or every trial (oddball mode).
pub fn emit_markers(
    records: &[TrialRecord],
    cfg: &ProtocolConfig,
    latency: LatencyModel,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Vec<EventMarker>> {
    latency.validate()?;
    if !(sample_rate_hz > 0.0) {
        return Err(Error::InvalidConfig("sample rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_sample = |t: f64| (t * sample_rate_hz).round() as usize;
    let mut markers = Vec::with_capacity(records.len() * 3);
    let mut t = cfg.lead_in_s;
    for (i, rec) in records.iter().enumerate() {
        let e = &rec.entry;
        if i > 0 && records[i - 1].entry.trial_id >= e.trial_id {
            return Err(Error::InvalidEvents("records are not ordered by trial_id".into()));
        }
        let condition = Condition {
            d_level: e.d_level,
            style: e.style,
            block_id: e.block_id,
            trial_id: e.trial_id,
        };
        markers.push(EventMarker {
            sample_index: to_sample(t),
            code: EventCode::TrialStart,
            condition: Some(condition),
        });
        let selection = t + rec.completion_time_s;
        markers.push(EventMarker {
            sample_index: to_sample(selection + latency.sample_ms(&mut rng) / 1000.0),
            code: EventCode::FeedbackOnset,
            condition: Some(condition),
        });
        t = selection + cfg.inter_trial_gap_s;
        let Some(next) = records.get(i + 1) else {
            break;
        };
        let rest_due = match cfg.mode {
            ProtocolMode::BlockedRadius => {
                next.entry.block_id != e.block_id
                    && (e.block_id as usize + 1) % cfg.rest_every_blocks == 0
            }
            ProtocolMode::Oddball => true,
        };
        if rest_due {
            let duration = match cfg.mode {
                ProtocolMode::BlockedRadius => cfg.rest_duration_s,
                ProtocolMode::Oddball => cfg.inter_trial_rest_s,
            };
            markers.push(EventMarker {
                sample_index: to_sample(t),
                code: EventCode::RestStart,
                condition: None,
            });
            t += duration;
            markers.push(EventMarker {
                sample_index: to_sample(t),
                code: EventCode::RestEnd,
                condition: None,
            });
            t += cfg.inter_trial_gap_s;
        }
    }
    for w in markers.windows(2) {
        if w[1].sample_index <= w[0].sample_index {
            return Err(Error::InvalidEvents(format!(
                "overlapping trials: {:?} at sample {} does not follow {:?} at sample {}",
                w[1].code, w[1].sample_index, w[0].code, w[0].sample_index
            )));
        }
    }
    Ok(markers)
}

/// Copies each trial's `FeedbackOnset` sample into its record.
pub fn bind_feedback_onsets(records: &mut [TrialRecord], markers: &[EventMarker]) {
    for m in markers.iter().filter(|m| m.code == EventCode::FeedbackOnset) {
        if let Some(c) = m.condition {
            if let Some(r) = records.iter_mut().find(|r| r.entry.trial_id == c.trial_id) {
                r.feedback_onset_sample = Some(m.sample_index);
            }
        }
    }
}
