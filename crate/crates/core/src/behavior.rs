//! Completion-time analyses of the blocked-radius experiment: within-block
//! adaptation curves and the first-order congruency sequence effect.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DLevel;
use crate::stats::{mean, paired_ttest, sample_sd, ComparisonResult};
use crate::task::TrialRecord;

/// Trials at the start of a block averaged for the sequence effect.
pub const FIRST_TRIALS: usize = 3;

/// The transitions compared in the headline analysis, as (previous block, current block).
pub const HEADLINE_PAIRS: [(DLevel, DLevel); 4] = [
    (DLevel::D2, DLevel::D1),
    (DLevel::D3, DLevel::D1),
    (DLevel::D2, DLevel::D3),
    (DLevel::D1, DLevel::D3),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    /// 1-based position within the block.
    pub position: u32,
    pub mean_s: f64,
    pub sd_s: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub d_level: DLevel,
    pub cells: Vec<CurveCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPositionCurve {
    pub block_len: u32,
    pub levels: Vec<LevelCurve>,
}

/// Mean and sd of completion time per (D level, position in block).
pub fn block_position_curve(trials: &[TrialRecord]) -> Result<BlockPositionCurve> {
    if trials.is_empty() {
        return Err(Error::EmptyInput("no trials".into()));
    }
    let block_len = trials.iter().map(|t| t.entry.block_position).max().unwrap_or(0) + 1;
    let mut groups: BTreeMap<(DLevel, u32), Vec<f64>> = BTreeMap::new();
    for t in trials {
        groups
            .entry((t.entry.d_level, t.entry.block_position))
            .or_default()
            .push(t.completion_time_s);
    }
    let mut levels = Vec::new();
    for &level in DLevel::ALL {
        if !groups.keys().any(|(l, _)| *l == level) {
            continue;
        }
        let cells = (0..block_len)
            .map(|pos| {
                let xs = groups.get(&(level, pos)).ok_or_else(|| {
                    Error::InvalidConfig(format!("{level} has no trials at block position {}", pos + 1))
                })?;
                Ok(CurveCell {
                    position: pos + 1,
                    mean_s: mean(xs),
                    sd_s: sample_sd(xs),
                    n: xs.len(),
                })
            })
            .collect::<Result<_>>()?;
        levels.push(LevelCurve {
            d_level: level,
            cells,
        });
    }
    Ok(BlockPositionCurve { block_len, levels })
}

/// Per level, paired test across participants of mean completion time at
/// 1-based positions `early` versus `late`.
pub fn early_late_comparison(
    per_participant: &[Vec<TrialRecord>],
    early: std::ops::RangeInclusive<u32>,
    late: std::ops::RangeInclusive<u32>,
) -> Result<Vec<ComparisonResult>> {
    let mut out = Vec::new();
    for &level in DLevel::ALL {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for trials in per_participant {
            let pick = |range: &std::ops::RangeInclusive<u32>| -> Vec<f64> {
                trials
                    .iter()
                    .filter(|t| t.entry.d_level == level && range.contains(&(t.entry.block_position + 1)))
                    .map(|t| t.completion_time_s)
                    .collect()
            };
            let (e, l) = (pick(&early), pick(&late));
            if !e.is_empty() && !l.is_empty() {
                xs.push(mean(&e));
                ys.push(mean(&l));
            }
        }
        if xs.is_empty() {
            continue;
        }
        let label = format!(
            "{level}: positions {}-{} vs {}-{}",
            early.start(),
            early.end(),
            late.start(),
            late.end()
        );
        out.push(paired_ttest(&xs, &ys)?.with_label(label));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSummary {
    pub previous: DLevel,
    pub current: DLevel,
    /// Per participant mean of the first trials of every block with this transition.
    pub per_participant: Vec<Option<f64>>,
    pub group_mean: Option<f64>,
    pub headline: bool,
}

impl TransitionSummary {
    pub fn label(&self) -> String {
        format!("{}/{}", self.previous, self.current)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CseComparison {
    /// Congruent-preceded transition (previous block D2).
    pub congruent_prev: (DLevel, DLevel),
    pub incongruent_prev: (DLevel, DLevel),
    /// `xs` = congruent-preceded, `ys` = incongruent-preceded; positive t
    /// means incongruent-preceded trials were faster.
    pub result: ComparisonResult,
    pub used: Vec<usize>,
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruencySequenceResult {
    pub first_trials: usize,
    /// The four headline transitions first, then the remaining ones.
    pub transitions: Vec<TransitionSummary>,
    pub comparisons: Vec<CseComparison>,
}

impl CongruencySequenceResult {
    pub fn transition(&self, previous: DLevel, current: DLevel) -> Option<&TransitionSummary> {
        self.transitions
            .iter()
            .find(|t| t.previous == previous && t.current == current)
    }
}

/// Per-transition means of one participant's first trials per block.
fn participant_transitions(trials: &[TrialRecord]) -> Result<BTreeMap<(DLevel, DLevel), f64>> {
    let mut blocks: BTreeMap<u32, Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        blocks.entry(t.entry.block_id).or_default().push(t);
    }
    let mut levels = Vec::with_capacity(blocks.len());
    for (id, block) in &mut blocks {
        block.sort_by_key(|t| t.entry.trial_id);
        let level = block[0].entry.d_level;
        if block.iter().any(|t| t.entry.d_level != level) {
            return Err(Error::InvalidConfig(format!("block {id} mixes D levels")));
        }
        levels.push((level, block));
    }
    let mut pooled: BTreeMap<(DLevel, DLevel), Vec<f64>> = BTreeMap::new();
    for w in levels.windows(2) {
        let (prev, _) = &w[0];
        let (cur, block) = &w[1];
        pooled
            .entry((*prev, *cur))
            .or_default()
            .extend(block.iter().take(FIRST_TRIALS).map(|t| t.completion_time_s));
    }
    Ok(pooled.into_iter().map(|(k, v)| (k, mean(&v))).collect())
}

pub fn congruency_sequence_effect(per_participant: &[Vec<TrialRecord>]) -> Result<CongruencySequenceResult> {
    if per_participant.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "congruency sequence analysis needs at least 2 participants, got {}",
            per_participant.len()
        )));
    }
    let tables: Vec<BTreeMap<(DLevel, DLevel), f64>> = per_participant
        .iter()
        .map(|t| participant_transitions(t))
        .collect::<Result<_>>()?;

    let mut order: Vec<(DLevel, DLevel)> = HEADLINE_PAIRS.to_vec();
    for &p in DLevel::ALL {
        for &c in DLevel::ALL {
            if !order.contains(&(p, c)) {
                order.push((p, c));
            }
        }
    }
    let transitions = order
        .iter()
        .map(|&(previous, current)| {
            let per_participant: Vec<Option<f64>> =
                tables.iter().map(|t| t.get(&(previous, current)).copied()).collect();
            let present: Vec<f64> = per_participant.iter().flatten().copied().collect();
            TransitionSummary {
                previous,
                current,
                group_mean: (!present.is_empty()).then(|| mean(&present)),
                per_participant,
                headline: HEADLINE_PAIRS.contains(&(previous, current)),
            }
        })
        .collect();

    let comparisons = [
        ((DLevel::D2, DLevel::D1), (DLevel::D3, DLevel::D1)),
        ((DLevel::D2, DLevel::D3), (DLevel::D1, DLevel::D3)),
    ]
    .into_iter()
    .map(|(congruent_prev, incongruent_prev)| {
        let (mut xs, mut ys, mut used, mut dropped) = (vec![], vec![], vec![], vec![]);
        for (i, t) in tables.iter().enumerate() {
            match (t.get(&congruent_prev), t.get(&incongruent_prev)) {
                (Some(&x), Some(&y)) => {
                    xs.push(x);
                    ys.push(y);
                    used.push(i);
                }
                _ => dropped.push(i),
            }
        }
        let label = format!(
            "{}/{} vs {}/{}",
            congruent_prev.0, congruent_prev.1, incongruent_prev.0, incongruent_prev.1
        );
        if xs.len() < 2 {
            return Err(Error::EmptyInput(format!(
                "{label}: only {} participants have both transitions",
                xs.len()
            )));
        }
        Ok(CseComparison {
            congruent_prev,
            incongruent_prev,
            result: paired_ttest(&xs, &ys)?.with_label(label),
            used,
            dropped,
        })
    })
    .collect::<Result<_>>()?;

    Ok(CongruencySequenceResult {
        first_trials: FIRST_TRIALS,
        transitions,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{TargetSide, TrialEntry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(trial_id: u32, block_id: u32, pos: u32, d: DLevel, t: f64) -> TrialRecord {
        TrialRecord {
            entry: TrialEntry {
                trial_id,
                block_id,
                block_position: pos,
                d_level: d,
                style: None,
                target_side: TargetSide::for_trial(trial_id),
            },
            crossing_time_s: 0.1,
            completion_time_s: t,
            prev_trial_congruent: None,
            feedback_onset_sample: None,
        }
    }

    /// Blocks of `len` trials with the given levels and random times.
    fn participant(levels: &[DLevel], len: u32, rng: &mut ChaCha8Rng) -> Vec<TrialRecord> {
        let mut out = Vec::new();
        for (b, &d) in levels.iter().enumerate() {
            for p in 0..len {
                out.push(record(b as u32 * len + p, b as u32, p, d, rng.random_range(0.5..2.0)));
            }
        }
        out
    }

    #[test]
    fn constant_times_give_flat_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut trials = participant(&[DLevel::D1, DLevel::D2, DLevel::D3], 10, &mut rng);
        trials.iter_mut().for_each(|t| t.completion_time_s = 1.25);
        let c = block_position_curve(&trials).unwrap();
        assert_eq!(c.block_len, 10);
        assert_eq!(c.levels.len(), 3);
        for l in &c.levels {
            assert_eq!(l.cells.len(), 10);
            for cell in &l.cells {
                assert_eq!(cell.mean_s, 1.25);
                assert_eq!(cell.sd_s, 0.0);
            }
        }
        assert!(block_position_curve(&[]).is_err());
    }

    #[test]
    fn curve_matches_group_by_oracle_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let levels = [DLevel::D1, DLevel::D3, DLevel::D2, DLevel::D1, DLevel::D2, DLevel::D3];
        let mut trials = participant(&levels, 10, &mut rng);
        let c = block_position_curve(&trials).unwrap();
        for l in &c.levels {
            for cell in &l.cells {
                let xs: Vec<f64> = trials
                    .iter()
                    .filter(|t| t.entry.d_level == l.d_level && t.entry.block_position + 1 == cell.position)
                    .map(|t| t.completion_time_s)
                    .collect();
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
                assert!((cell.mean_s - m).abs() < 1e-12);
                assert!((cell.sd_s - sd).abs() < 1e-12);
                assert_eq!(cell.n, 2);
            }
        }
        trials.reverse();
        assert_eq!(block_position_curve(&trials).unwrap(), c);
    }

    #[test]
    fn transition_means_match_filter_and_average_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use DLevel::*;
        let orders = [
            vec![D2, D1, D3, D1, D2, D3, D1, D3, D2, D1],
            vec![D3, D1, D2, D1, D1, D3, D3, D2, D1, D2],
            vec![D1, D3, D2, D1, D3, D1, D2, D3, D3, D1],
        ];
        let cohort: Vec<Vec<TrialRecord>> = orders.iter().map(|o| participant(o, 10, &mut rng)).collect();
        let r = congruency_sequence_effect(&cohort).unwrap();
        assert_eq!(r.first_trials, 3);
        assert_eq!(r.transitions.len(), 9);
        assert!(r.transitions[..4].iter().all(|t| t.headline));
        assert!(r.transitions[4..].iter().all(|t| !t.headline));
        assert_eq!(r.transitions[0].label(), "D2/D1");
        for (p, (order, trials)) in orders.iter().zip(&cohort).enumerate() {
            for t in &r.transitions {
                let mut xs = Vec::new();
                for b in 1..order.len() {
                    if order[b - 1] == t.previous && order[b] == t.current {
                        xs.extend(
                            trials
                                .iter()
                                .filter(|x| x.entry.block_id == b as u32 && x.entry.block_position < 3)
                                .map(|x| x.completion_time_s),
                        );
                    }
                }
                let want = (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
                match (t.per_participant[p], want) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                    (None, None) => {}
                    other => panic!("{} participant {p}: {other:?}", t.label()),
                }
            }
        }
        for c in &r.comparisons {
            assert_eq!(c.used.len() + c.dropped.len(), 3);
        }
        // participant 1 has no D2/D3 transition
        assert_eq!(r.comparisons[1].dropped, vec![1]);
    }

    #[test]
    fn relabelling_trial_ids_does_not_change_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use DLevel::*;
        let cohort: Vec<Vec<TrialRecord>> = (0..4)
            .map(|_| participant(&[D2, D1, D3, D1, D2, D3, D1, D3, D2], 10, &mut rng))
            .collect();
        let base = congruency_sequence_effect(&cohort).unwrap();
        let shifted: Vec<Vec<TrialRecord>> = cohort
            .iter()
            .map(|p| p.iter().map(|t| { let mut t = *t; t.entry.trial_id += 1000; t }).collect())
            .collect();
        assert_eq!(congruency_sequence_effect(&shifted).unwrap(), base);
    }

    #[test]
    fn too_few_participants_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use DLevel::*;
        let one = vec![participant(&[D2, D1, D2, D3, D1, D3], 10, &mut rng)];
        assert!(congruency_sequence_effect(&one).is_err());
        // two participants, but only one has D3/D1
        let cohort = vec![
            participant(&[D2, D1, D2, D3, D1, D3, D3, D1], 10, &mut rng),
            participant(&[D2, D1, D2, D3, D2, D3], 10, &mut rng),
        ];
        assert!(congruency_sequence_effect(&cohort).is_err());
    }

    #[test]
    fn mixed_block_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = participant(&[DLevel::D1, DLevel::D2], 10, &mut rng);
        p[3].entry.d_level = DLevel::D3;
        assert!(congruency_sequence_effect(&[p.clone(), p]).is_err());
    }

    #[test]
    fn early_late_detects_adaptation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        use DLevel::*;
        let cohort: Vec<Vec<TrialRecord>> = (0..6)
            .map(|_| {
                let mut p = participant(&[D1, D2, D3, D1, D2, D3], 10, &mut rng);
                for t in &mut p {
                    t.completion_time_s += 0.5 * 0.5f64.powi(t.entry.block_position as i32);
                }
                p
            })
            .collect();
        let r = early_late_comparison(&cohort, 1..=2, 8..=10).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].label, "D1: positions 1-2 vs 8-10");
    }
}
