//! Configuration, seed derivation and the staged batch pipeline.
//!
//! Stages communicate only through files under the output directory:
//!
//! | stage        | reads                                  | writes                                  |
//! |--------------|----------------------------------------|-----------------------------------------|
//! | `simulate`   | -                                      | `trials_behavior.csv`, `trials_oddball.csv`, `markers/` |
//! | `synth`      | `trials_oddball.csv`, `markers/`       | `recordings/`                           |
//! | `preprocess` | `trials_oddball.csv`, `recordings/`    | `epochs/`                               |
//! | `erp`        | `epochs/`                              | `erp.json`                              |
//! | `behavior`   | `trials_behavior.csv`                  | `behavior.json`                         |
//! | `report`     | `erp.json` and/or `behavior.json`      | `results.json`, SVG figures             |
//!
//! `all` runs every stage in memory and writes the trial logs, markers,
//! both analysis files and the report, but no recordings or epoch store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::behavior::{block_position_curve, congruency_sequence_effect, early_late_comparison};
use crate::erp::{
    area_difference, average_erp, channel_significance_map, difference_waveform, frn_peak, grand_average,
    match_trial_counts, roi_area_comparison, FrnWindow, DEFAULT_ROI,
};
use crate::error::{Error, Result};
use crate::io::{
    create_dir, read_bundle, read_events_csv, read_trial_log, write_bundle, write_events_csv, write_file,
    write_trial_log, EpochStore, TrialLogRow,
};
use crate::preprocess::{
    baseline_correct_set, extract_session_epochs, reject_artifacts, BandpassFilter, EpochSet, EpochWindow,
    FilterSpec,
};
use crate::report::{
    config_hash, write_report, BehaviorResults, ErpResults, GroundTruth, Provenance, Results, StyleErpResult,
};
use crate::signal::{
    ChannelLayout, DLevel, EegRecording, EventCode, EventMarker, HandStyle, DEFAULT_CHANNELS, DEFAULT_REFERENCES,
    DEFAULT_SAMPLE_RATE_HZ,
};
use crate::synth::{channel_seed, gen_noise, inject_in_place, mix_seed, ErpTemplate, NoiseKind, NoiseSpec, ScenarioSpec};
use crate::task::{
    bind_feedback_onsets, build_blocked_schedule, build_oddball_schedule, emit_markers, simulate_plan,
    ConflictRtModel, LatencyModel, ProtocolConfig, ProtocolMode, ReachModel, TrialRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorConfig {
    pub participants: u32,
    pub protocol: ProtocolConfig,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            participants: 16,
            protocol: ProtocolConfig::blocked(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub kind: NoiseKind,
    pub sd_uv: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let d = NoiseSpec::default();
        Self {
            kind: d.kind,
            sd_uv: d.sd_uv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErpConfig {
    pub participants: u32,
    pub protocol: ProtocolConfig,
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    pub references: Vec<String>,
    /// Re-reference to the mean of `references` before filtering. Off by
    /// default: synthetic channels are already mastoid-referenced.
    pub rereference: bool,
    /// Recording continues this long after the last marker.
    pub tail_s: f64,
    pub noise: NoiseSettings,
    pub template: ErpTemplate,
    pub scenario: ScenarioSpec,
    pub latency: LatencyModel,
    pub filter: FilterSpec,
    pub window: EpochWindow,
    pub artifact_threshold_uv: f64,
    pub roi: Vec<String>,
    pub frn_window: FrnWindow,
}

impl Default for ErpConfig {
    fn default() -> Self {
        Self {
            participants: 10,
            protocol: ProtocolConfig::oddball(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            channels: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
            references: DEFAULT_REFERENCES.iter().map(|s| s.to_string()).collect(),
            rereference: false,
            tail_s: 2.0,
            noise: NoiseSettings::default(),
            template: ErpTemplate::default(),
            scenario: ScenarioSpec::default(),
            latency: LatencyModel::default(),
            filter: FilterSpec::default(),
            window: EpochWindow::default(),
            artifact_threshold_uv: 100.0,
            roi: DEFAULT_ROI.iter().map(|s| s.to_string()).collect(),
            frn_window: FrnWindow::default(),
        }
    }
}

impl ErpConfig {
    pub fn layout(&self) -> Result<ChannelLayout> {
        ChannelLayout::new(&self.channels, &self.references)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub behavior: BehaviorConfig,
    pub erp: ErpConfig,
    pub reach: ReachModel,
    pub rt: ConflictRtModel,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Missing {
                what: "config file".into(),
                path: path.to_path_buf(),
            });
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Sets the participant count of both cohorts.
    pub fn with_participants(mut self, n: u32) -> Self {
        self.behavior.participants = n;
        self.erp.participants = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.behavior;
        if b.protocol.mode != ProtocolMode::BlockedRadius {
            return Err(Error::InvalidConfig("behavior.protocol.mode must be BlockedRadius".into()));
        }
        b.protocol.validate()?;
        let e = &self.erp;
        if e.protocol.mode != ProtocolMode::Oddball {
            return Err(Error::InvalidConfig("erp.protocol.mode must be Oddball".into()));
        }
        e.protocol.validate()?;
        for (name, n) in [("behavior", b.participants), ("erp", e.participants)] {
            if n < 2 {
                return Err(Error::InvalidConfig(format!("{name}.participants must be at least 2, got {n}")));
            }
        }
        let layout = e.layout()?;
        if e.roi.is_empty() {
            return Err(Error::InvalidConfig("erp.roi is empty".into()));
        }
        for c in &e.roi {
            layout.index_of(c)?;
        }
        if !(e.tail_s >= 0.0) {
            return Err(Error::InvalidConfig(format!("erp.tail_s must be nonnegative, got {}", e.tail_s)));
        }
        if !(e.noise.sd_uv >= 0.0 && e.noise.sd_uv.is_finite()) {
            return Err(Error::InvalidConfig(format!("erp.noise.sd_uv must be nonnegative, got {}", e.noise.sd_uv)));
        }
        if !(e.artifact_threshold_uv > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "erp.artifact_threshold_uv must be positive, got {}",
                e.artifact_threshold_uv
            )));
        }
        if !(e.frn_window.start_ms < e.frn_window.end_ms) {
            return Err(Error::InvalidConfig("erp.frn_window must have start_ms < end_ms".into()));
        }
        e.template.validate()?;
        e.scenario.validate()?;
        e.filter.validate(e.sample_rate_hz)?;
        e.window.validate()?;
        self.rt.validate()
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }
}

/// Named random streams, each derived from the run seed.
pub const SEED_STREAMS: [&str; 6] = [
    "behavior.schedule",
    "behavior.rt",
    "erp.rt",
    "erp.latency",
    "erp.noise",
    "erp.match",
];

pub fn stream_seed(seed: u64, stream: &str) -> u64 {
    channel_seed(seed, stream)
}

/// Seed of item `index` within a stream.
pub fn item_seed(seed: u64, stream: &str, index: u64) -> u64 {
    mix_seed(stream_seed(seed, stream), index)
}

fn session_index(cfg: &Config, participant: u32, session: u32) -> u64 {
    participant as u64 * cfg.erp.protocol.sessions as u64 + session as u64
}

pub fn seed_table(seed: u64) -> BTreeMap<String, u64> {
    let mut m: BTreeMap<String, u64> = SEED_STREAMS.iter().map(|s| (s.to_string(), stream_seed(seed, s))).collect();
    m.insert("run".into(), seed);
    m
}

pub fn provenance(cfg: &Config, seed: u64) -> Result<Provenance> {
    Ok(Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash()?,
        seed,
        seeds: seed_table(seed),
    })
}

/// One simulated blocked-radius participant per entry.
pub fn simulate_behavior(cfg: &Config, seed: u64) -> Result<Vec<Vec<TrialRecord>>> {
    let proto = &cfg.behavior.protocol;
    (0..cfg.behavior.participants)
        .map(|p| {
            let plan = build_blocked_schedule(proto, item_seed(seed, "behavior.schedule", p as u64))?;
            simulate_plan(&plan, &cfg.rt, &cfg.reach, proto, item_seed(seed, "behavior.rt", p as u64))
        })
        .collect()
}

pub fn analyze_behavior(cfg: &Config, cohort: &[Vec<TrialRecord>]) -> Result<BehaviorResults> {
    let all: Vec<TrialRecord> = cohort.iter().flatten().copied().collect();
    let block_len = cfg.behavior.protocol.block_len as u32;
    let late_start = block_len.saturating_sub(2).max(1);
    Ok(BehaviorResults {
        participants: cohort.len() as u32,
        curve: block_position_curve(&all)?,
        adaptation: early_late_comparison(cohort, 1..=2.min(block_len), late_start..=block_len)?,
        congruency: congruency_sequence_effect(cohort)?,
    })
}

/// Trials and markers of one oddball session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSim {
    pub participant: u32,
    pub session: u32,
    pub records: Vec<TrialRecord>,
    pub markers: Vec<EventMarker>,
}

pub fn simulate_erp_cohort(cfg: &Config, seed: u64) -> Result<Vec<SessionSim>> {
    let e = &cfg.erp;
    let mut out = Vec::new();
    for p in 0..e.participants {
        for (s, plan) in build_oddball_schedule(&e.protocol, p as usize)?.iter().enumerate() {
            let s = s as u32;
            let idx = session_index(cfg, p, s);
            let mut records = simulate_plan(plan, &cfg.rt, &cfg.reach, &e.protocol, item_seed(seed, "erp.rt", idx))?;
            let markers = emit_markers(
                &records,
                &e.protocol,
                e.latency,
                e.sample_rate_hz,
                item_seed(seed, "erp.latency", idx),
            )?;
            bind_feedback_onsets(&mut records, &markers);
            out.push(SessionSim {
                participant: p,
                session: s,
                records,
                markers,
            });
        }
    }
    Ok(out)
}

pub fn session_samples(cfg: &Config, markers: &[EventMarker]) -> usize {
    let last = markers.last().map_or(0, |m| m.sample_index);
    last + 1 + (cfg.erp.tail_s * cfg.erp.sample_rate_hz).round() as usize
}

/// Background noise plus the scenario-scaled template at every feedback onset.
pub fn synth_session(
    cfg: &Config,
    layout: &ChannelLayout,
    seed: u64,
    participant: u32,
    session: u32,
    markers: &[EventMarker],
) -> Result<EegRecording> {
    let e = &cfg.erp;
    let spec = NoiseSpec {
        kind: e.noise.kind,
        sd_uv: e.noise.sd_uv,
        seed: item_seed(seed, "erp.noise", session_index(cfg, participant, session)),
    };
    let mut rec = gen_noise(layout, session_samples(cfg, markers), e.sample_rate_hz, &spec)?;
    inject_in_place(&mut rec, markers, &e.template.render(e.sample_rate_hz), &e.scenario);
    Ok(rec)
}

/// Re-reference, filter, epoch, baseline-correct and reject, in that order.
/// `rec` is consumed as scratch space.
pub fn preprocess_session(
    cfg: &Config,
    filter: &BandpassFilter,
    rec: &mut EegRecording,
    markers: &[EventMarker],
    session: u32,
) -> Result<EpochSet> {
    let e = &cfg.erp;
    if e.rereference {
        rec.rereference_in_place(&e.references)?;
    }
    filter.apply_recording(rec)?;
    let mut set = extract_session_epochs(rec, markers, &e.window, &[EventCode::FeedbackOnset], session);
    baseline_correct_set(&mut set, e.window.baseline())?;
    reject_artifacts(&set, e.artifact_threshold_uv)
}

fn merge_session(store: &mut Vec<(u32, EpochSet)>, participant: u32, set: EpochSet) -> Result<()> {
    match store.iter_mut().find(|(p, _)| *p == participant) {
        Some((_, acc)) => acc.extend(set),
        None => {
            store.push((participant, set));
            Ok(())
        }
    }
}

/// Synthesizes and preprocesses every session in memory.
pub fn build_epoch_store(cfg: &Config, seed: u64, sims: &[SessionSim]) -> Result<EpochStore> {
    let layout = cfg.erp.layout()?;
    let filter = BandpassFilter::design(&cfg.erp.filter, cfg.erp.sample_rate_hz)?;
    let mut participants = Vec::new();
    for sim in sims {
        let mut rec = synth_session(cfg, &layout, seed, sim.participant, sim.session, &sim.markers)?;
        let set = preprocess_session(cfg, &filter, &mut rec, &sim.markers, sim.session)?;
        merge_session(&mut participants, sim.participant, set)?;
    }
    Ok(EpochStore {
        participants,
        seeds: seed_table(seed),
    })
}

/// Injected template measured over the FRN window, scaled by the ROI mean
/// weight and the D2 minus D1 gain of `style`.
pub fn ground_truth(cfg: &Config, style: HandStyle) -> GroundTruth {
    let e = &cfg.erp;
    let t = e.template.render(e.sample_rate_hz);
    let times = t.times_ms();
    let w = e.frn_window;
    let inside: Vec<(f64, f64)> = times
        .iter()
        .zip(&t.shape)
        .filter(|(&x, _)| x >= w.start_ms - 1e-9 && x <= w.end_ms + 1e-9)
        .map(|(&x, &y)| (x, y))
        .collect();
    let integral: f64 = inside.windows(2).map(|p| (p[1].0 - p[0].0) * (p[0].1 + p[1].1) * 0.5).sum();
    let gain = e.scenario.get(Some(style), DLevel::D2) - e.scenario.get(Some(style), DLevel::D1);
    GroundTruth {
        peak_latency_ms: e.template.peak_latency_ms,
        area_difference_uv_ms: gain * e.template.mean_weight(&e.roi) * integral,
    }
}

pub fn analyze_erp(cfg: &Config, seed: u64, store: &EpochStore) -> Result<ErpResults> {
    let e = &cfg.erp;
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    for (_, set) in &store.participants {
        for r in &set.rejection_log {
            *rejections.entry(r.reason.label().to_string()).or_default() += 1;
        }
    }
    let present: BTreeSet<HandStyle> = store
        .participants
        .iter()
        .flat_map(|(_, s)| s.epochs.iter().filter_map(|ep| ep.condition.style))
        .collect();
    let mut styles = Vec::new();
    for style in present {
        let mut d1s = Vec::new();
        let mut d2s = Vec::new();
        for (p, set) in &store.participants {
            let d1 = set.filter(|c| c.style == Some(style) && c.d_level == DLevel::D1);
            let d2 = set.filter(|c| c.style == Some(style) && c.d_level == DLevel::D2);
            if d1.is_empty() || d2.is_empty() {
                continue;
            }
            let match_seed = mix_seed(item_seed(seed, "erp.match", *p as u64), style.index() as u64);
            let (m1, m2) = match_trial_counts(&d1, &d2, match_seed)?;
            let dropped = d1.len() + d2.len() - m1.len() - m2.len();
            if dropped > 0 {
                *rejections.entry("subsampled".into()).or_default() += dropped;
            }
            d1s.push(m1);
            d2s.push(m2);
        }
        if d1s.len() < 2 {
            return Err(Error::EmptyInput(format!(
                "{style}: only {} participants have both D1 and D2 epochs",
                d1s.len()
            )));
        }
        let roi_label = e.roi.join("/");
        let avg = |sets: &[EpochSet], tag: &str| -> Result<_> {
            let waves = sets
                .iter()
                .map(|s| average_erp(s, &e.roi, &roi_label))
                .collect::<Result<Vec<_>>>()?;
            grand_average(&waves, &format!("{style} {tag}"))
        };
        let d1 = avg(&d1s, "D1")?;
        let d2 = avg(&d2s, "D2")?;
        let difference = difference_waveform(&d2, &d1)?;
        styles.push(StyleErpResult {
            style,
            frn_d1: frn_peak(&d1, e.frn_window)?,
            frn_d2: frn_peak(&d2, e.frn_window)?,
            frn_difference: frn_peak(&difference, e.frn_window)?,
            area_difference_uv_ms: area_difference(&d2, &d1, e.frn_window)?,
            comparison: roi_area_comparison(&d2s, &d1s, &e.roi, e.frn_window, &format!("{style}: D2 vs D1"))?,
            channel_map: channel_significance_map(&d2s, &d1s, e.frn_window)?,
            ground_truth: ground_truth(cfg, style),
            d1,
            d2,
            difference,
        });
    }
    Ok(ErpResults {
        participants: store.participants.len() as u32,
        roi: e.roi.clone(),
        window: e.frn_window,
        rejections,
        styles,
    })
}

/// Simulation, synthesis, preprocessing and analysis of both experiments, in memory.
pub fn run_all_in_memory(cfg: &Config, seed: u64) -> Result<Results> {
    let cohort = simulate_behavior(cfg, seed)?;
    let sims = simulate_erp_cohort(cfg, seed)?;
    let store = build_epoch_store(cfg, seed, &sims)?;
    Ok(Results {
        provenance: provenance(cfg, seed)?,
        behavior: Some(analyze_behavior(cfg, &cohort)?),
        erp: Some(analyze_erp(cfg, seed, &store)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Synth,
    Preprocess,
    Erp,
    Behavior,
    Report,
    All,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Synth,
        Command::Preprocess,
        Command::Erp,
        Command::Behavior,
        Command::Report,
        Command::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Synth => "synth",
            Command::Preprocess => "preprocess",
            Command::Erp => "erp",
            Command::Behavior => "behavior",
            Command::Report => "report",
            Command::All => "all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown subcommand `{s}`")))
    }
}

/// Output file layout under the `--out` directory.
#[derive(Debug, Clone)]
pub struct OutDir(pub PathBuf);

impl OutDir {
    pub fn behavior_log(&self) -> PathBuf {
        self.0.join("trials_behavior.csv")
    }
    pub fn oddball_log(&self) -> PathBuf {
        self.0.join("trials_oddball.csv")
    }
    pub fn markers(&self, participant: u32, session: u32) -> PathBuf {
        self.0.join("markers").join(format!("p{participant:02}_s{session}.csv"))
    }
    pub fn recording(&self, participant: u32, session: u32) -> PathBuf {
        self.0.join("recordings").join(format!("p{participant:02}_s{session}"))
    }
    pub fn epochs(&self) -> PathBuf {
        self.0.join("epochs")
    }
    pub fn erp_json(&self) -> PathBuf {
        self.0.join("erp.json")
    }
    pub fn behavior_json(&self) -> PathBuf {
        self.0.join("behavior.json")
    }
    pub fn results_json(&self) -> PathBuf {
        self.0.join("results.json")
    }
}

fn behavior_rows(cohort: &[Vec<TrialRecord>]) -> Vec<TrialLogRow> {
    cohort
        .iter()
        .enumerate()
        .flat_map(|(p, trials)| {
            trials.iter().map(move |&record| TrialLogRow {
                participant: p as u32,
                session: 0,
                record,
            })
        })
        .collect()
}

fn oddball_rows(sims: &[SessionSim]) -> Vec<TrialLogRow> {
    sims.iter()
        .flat_map(|s| {
            s.records.iter().map(move |&record| TrialLogRow {
                participant: s.participant,
                session: s.session,
                record,
            })
        })
        .collect()
}

fn write_simulation(out: &OutDir, cohort: &[Vec<TrialRecord>], sims: &[SessionSim]) -> Result<()> {
    create_dir(&out.0)?;
    create_dir(&out.0.join("markers"))?;
    write_trial_log(&out.behavior_log(), &behavior_rows(cohort))?;
    write_trial_log(&out.oddball_log(), &oddball_rows(sims))?;
    for s in sims {
        write_events_csv(&out.markers(s.participant, s.session), &s.markers)?;
    }
    Ok(())
}

fn read_log(path: &Path, what: &str) -> Result<Vec<TrialLogRow>> {
    if !path.exists() {
        return Err(Error::Missing {
            what: what.into(),
            path: path.to_path_buf(),
        });
    }
    read_trial_log(path)
}

/// Distinct (participant, session) pairs of a trial log, in order.
fn log_sessions(rows: &[TrialLogRow]) -> Vec<(u32, u32)> {
    rows.iter()
        .map(|r| (r.participant, r.session))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn read_session_markers(out: &OutDir, p: u32, s: u32, rows: &[TrialLogRow]) -> Result<Vec<EventMarker>> {
    let path = out.markers(p, s);
    if !path.exists() {
        return Err(Error::Missing {
            what: "marker file".into(),
            path,
        });
    }
    let markers = read_events_csv(&path)?;
    let onsets = markers.iter().filter(|m| m.code == EventCode::FeedbackOnset).count();
    let trials = rows.iter().filter(|r| r.participant == p && r.session == s).count();
    if onsets != trials {
        return Err(Error::InvalidEvents(format!(
            "{}: {onsets} feedback onsets for {trials} logged trials",
            path.display()
        )));
    }
    Ok(markers)
}

fn behavior_cohort(rows: &[TrialLogRow]) -> Vec<Vec<TrialRecord>> {
    let mut by: BTreeMap<u32, Vec<TrialRecord>> = BTreeMap::new();
    for r in rows {
        by.entry(r.participant).or_default().push(r.record);
    }
    by.into_values().collect()
}

fn check_seeds(found: &BTreeMap<String, u64>, seed: u64, what: &Path) -> Result<()> {
    if found.get("run") != Some(&seed) {
        return Err(Error::InvalidConfig(format!(
            "{} was produced with seed {:?}, not {seed}",
            what.display(),
            found.get("run")
        )));
    }
    Ok(())
}

fn write_results_json(path: &Path, results: &Results) -> Result<()> {
    write_file(path, results.to_json()?.as_bytes())
}

fn read_partial(path: &Path, prov: &Provenance) -> Result<Option<Results>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r = Results::from_json(&text).map_err(|e| Error::format("analysis results", format!("{}: {e}", path.display())))?;
    if r.provenance.config_hash != prov.config_hash || r.provenance.seed != prov.seed {
        return Err(Error::InvalidConfig(format!(
            "{} was produced with a different config or seed",
            path.display()
        )));
    }
    Ok(Some(r))
}

/// Runs one pipeline stage. Returns the files it wrote.
pub fn run(cmd: Command, cfg: &Config, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out = OutDir(out.to_path_buf());
    let prov = provenance(cfg, seed)?;
    match cmd {
        Command::Simulate => {
            let cohort = simulate_behavior(cfg, seed)?;
            let sims = simulate_erp_cohort(cfg, seed)?;
            write_simulation(&out, &cohort, &sims)?;
            let mut files = vec![out.behavior_log(), out.oddball_log()];
            files.extend(sims.iter().map(|s| out.markers(s.participant, s.session)));
            Ok(files)
        }
        Command::Synth => {
            let rows = read_log(&out.oddball_log(), "oddball trial log")?;
            let layout = cfg.erp.layout()?;
            let mut files = Vec::new();
            for (p, s) in log_sessions(&rows) {
                let markers = read_session_markers(&out, p, s, &rows)?;
                let mut rec = synth_session(cfg, &layout, seed, p, s, &markers)?;
                rec.quantize_f32();
                let dir = out.recording(p, s);
                write_bundle(&rec, &markers, &seed_table(seed), &dir)?;
                files.push(dir);
            }
            Ok(files)
        }
        Command::Preprocess => {
            let rows = read_log(&out.oddball_log(), "oddball trial log")?;
            let filter = BandpassFilter::design(&cfg.erp.filter, cfg.erp.sample_rate_hz)?;
            let mut participants = Vec::new();
            for (p, s) in log_sessions(&rows) {
                let dir = out.recording(p, s);
                if !dir.join("meta.json").exists() {
                    return Err(Error::Missing {
                        what: "recording bundle".into(),
                        path: dir,
                    });
                }
                let (mut rec, markers) = read_bundle(&dir)?;
                if rec.layout().names() != cfg.erp.channels.as_slice() {
                    return Err(Error::InvalidConfig(format!(
                        "{} has channels that differ from erp.channels",
                        dir.display()
                    )));
                }
                let set = preprocess_session(cfg, &filter, &mut rec, &markers, s)?;
                merge_session(&mut participants, p, set)?;
            }
            let store = EpochStore {
                participants,
                seeds: seed_table(seed),
            };
            store.write(&out.epochs())?;
            Ok(vec![out.epochs()])
        }
        Command::Erp => {
            let store = EpochStore::read(&out.epochs())?;
            check_seeds(&store.seeds, seed, &out.epochs())?;
            let results = Results {
                provenance: prov,
                behavior: None,
                erp: Some(analyze_erp(cfg, seed, &store)?),
            };
            write_results_json(&out.erp_json(), &results)?;
            Ok(vec![out.erp_json()])
        }
        Command::Behavior => {
            let rows = read_log(&out.behavior_log(), "behavior trial log")?;
            let results = Results {
                provenance: prov,
                behavior: Some(analyze_behavior(cfg, &behavior_cohort(&rows))?),
                erp: None,
            };
            write_results_json(&out.behavior_json(), &results)?;
            Ok(vec![out.behavior_json()])
        }
        Command::Report => {
            let erp = read_partial(&out.erp_json(), &prov)?.and_then(|r| r.erp);
            let behavior = read_partial(&out.behavior_json(), &prov)?.and_then(|r| r.behavior);
            if erp.is_none() && behavior.is_none() {
                return Err(Error::Missing {
                    what: "analysis results (erp.json or behavior.json)".into(),
                    path: out.0.clone(),
                });
            }
            write_report(
                &Results {
                    provenance: prov,
                    behavior,
                    erp,
                },
                &out.0,
            )
        }
        Command::All => {
            let cohort = simulate_behavior(cfg, seed)?;
            let sims = simulate_erp_cohort(cfg, seed)?;
            write_simulation(&out, &cohort, &sims)?;
            let behavior = analyze_behavior(cfg, &cohort)?;
            let store = build_epoch_store(cfg, seed, &sims)?;
            let erp = analyze_erp(cfg, seed, &store)?;
            drop(store);
            write_results_json(
                &out.behavior_json(),
                &Results {
                    provenance: prov.clone(),
                    behavior: Some(behavior.clone()),
                    erp: None,
                },
            )?;
            write_results_json(
                &out.erp_json(),
                &Results {
                    provenance: prov.clone(),
                    behavior: None,
                    erp: Some(erp.clone()),
                },
            )?;
            let mut files = vec![out.behavior_log(), out.oddball_log(), out.behavior_json(), out.erp_json()];
            files.extend(write_report(
                &Results {
                    provenance: prov,
                    behavior: Some(behavior),
                    erp: Some(erp),
                },
                &out.0,
            )?);
            Ok(files)
        }
    }
}
