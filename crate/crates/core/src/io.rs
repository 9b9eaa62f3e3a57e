//! On-disk formats: recording bundles, trial logs and epoch stores.
//!
//! Bulk samples are little-endian f32, channel-major. Metadata is JSON and
//! event tables are CSV with empty fields for absent tags.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Epoch, EpochSet, EpochWindow, Rejection};
use crate::signal::{
    validate_markers, ChannelLayout, Condition, DLevel, EegRecording, EventCode, EventMarker, HandStyle,
};
use crate::task::{TargetSide, TrialEntry, TrialRecord};

pub const EVENTS_HEADER: [&str; 6] = ["sample_index", "code", "d_level", "style", "block_id", "trial_id"];

pub const TRIAL_LOG_HEADER: [&str; 10] = [
    "participant",
    "session",
    "trial_id",
    "block_id",
    "d_level",
    "style",
    "target_side",
    "crossing_s",
    "completion_s",
    "prev_congruent",
];

const EPOCHS_HEADER: [&str; 8] = [
    "participant",
    "session",
    "sample_index",
    "code",
    "d_level",
    "style",
    "block_id",
    "trial_id",
];

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Missing {
            what: what.into(),
            path: path.to_path_buf(),
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    require(path, what)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(what, format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_f32(w: &mut impl Write, path: &Path, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for &x in xs {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a whole f32 file after checking it holds exactly `expected` values.
fn read_f32_file(path: &Path, what: &str, expected: usize) -> Result<Vec<f64>> {
    require(path, what)?;
    let len = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if len != expected as u64 * 4 {
        return Err(Error::format(
            what,
            format!(
                "size mismatch in {}: {len} bytes, expected {} ({expected} f32 values)",
                path.display(),
                expected as u64 * 4
            ),
        ));
    }
    let mut bytes = Vec::with_capacity(len as usize);
    BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn csv_reader(path: &Path, what: &str, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    require(path, what)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(what, format!("{}: {e}", path.display())))?;
    let got = rdr.headers()?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            what,
            format!(
                "malformed header in {}: expected `{}`, found `{}`",
                path.display(),
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|e| Error::format(name, format!("line {line}: cannot parse `{raw}`: {e}")))
}

fn opt_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match rec.get(i).unwrap_or("") {
        "" => Ok(None),
        _ => field(rec, i, name, line).map(Some),
    }
}

fn opt_str<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn marker_fields(m: &EventMarker) -> [String; 6] {
    let c = m.condition.as_ref();
    [
        m.sample_index.to_string(),
        m.code.to_string(),
        opt_str(c.map(|c| c.d_level)),
        opt_str(c.and_then(|c| c.style)),
        opt_str(c.map(|c| c.block_id)),
        opt_str(c.map(|c| c.trial_id)),
    ]
}

/// Parses the six marker columns starting at `at`.
fn parse_marker(rec: &csv::StringRecord, at: usize, line: u64) -> Result<EventMarker> {
    let sample_index = field(rec, at, "sample_index", line)?;
    let code: EventCode = field(rec, at + 1, "code", line)?;
    let d_level: Option<DLevel> = opt_field(rec, at + 2, "d_level", line)?;
    let style: Option<HandStyle> = opt_field(rec, at + 3, "style", line)?;
    let block_id: Option<u32> = opt_field(rec, at + 4, "block_id", line)?;
    let trial_id: Option<u32> = opt_field(rec, at + 5, "trial_id", line)?;
    let condition = match (d_level, block_id, trial_id) {
        (Some(d_level), Some(block_id), Some(trial_id)) => Some(Condition {
            d_level,
            style,
            block_id,
            trial_id,
        }),
        (None, None, None) if style.is_none() => None,
        _ => {
            return Err(Error::format(
                "events",
                format!("line {line}: condition tags must be all present or all empty"),
            ))
        }
    };
    Ok(EventMarker {
        sample_index,
        code,
        condition,
    })
}

pub fn write_events_csv(path: &Path, markers: &[EventMarker]) -> Result<()> {
    validate_markers(markers, None)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("events", format!("{}: {e}", path.display())))?;
    w.write_record(EVENTS_HEADER)?;
    for m in markers {
        w.write_record(marker_fields(m))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an event table, rejecting unsorted indices.
pub fn read_events_csv(path: &Path) -> Result<Vec<EventMarker>> {
    let mut rdr = csv_reader(path, "events", &EVENTS_HEADER)?;
    let mut out: Vec<EventMarker> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let m = parse_marker(&rec, 0, line)?;
        if let Some(prev) = out.last() {
            if m.sample_index < prev.sample_index {
                return Err(Error::InvalidEvents(format!(
                    "{} line {line}: sample_index {} is smaller than the previous {}",
                    path.display(),
                    m.sample_index,
                    prev.sample_index
                )));
            }
        }
        out.push(m);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub reference_labels: Vec<String>,
    pub n_samples: usize,
    pub seeds: BTreeMap<String, u64>,
}

/// A continuous recording with its markers and the seeds that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingBundle {
    pub recording: EegRecording,
    pub markers: Vec<EventMarker>,
    pub seeds: BTreeMap<String, u64>,
}

impl RecordingBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bundle(&self.recording, &self.markers, &self.seeds, dir)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta: BundleMeta = read_json(&dir.join("meta.json"), "bundle metadata")?;
        let layout = ChannelLayout::new(&meta.channel_names, &meta.reference_labels)?;
        let samples = read_f32_file(&dir.join("samples.bin"), "samples.bin", layout.len() * meta.n_samples)?;
        let recording = EegRecording::new(meta.sample_rate_hz, layout, meta.n_samples, samples)?;
        let markers = read_events_csv(&dir.join("events.csv"))?;
        validate_markers(&markers, Some(meta.n_samples))?;
        Ok(Self {
            recording,
            markers,
            seeds: meta.seeds,
        })
    }
}

pub fn write_bundle(
    rec: &EegRecording,
    markers: &[EventMarker],
    seeds: &BTreeMap<String, u64>,
    dir: &Path,
) -> Result<()> {
    validate_markers(markers, Some(rec.n_samples()))?;
    create_dir(dir)?;
    let meta = BundleMeta {
        sample_rate_hz: rec.sample_rate_hz(),
        channel_names: rec.layout().names().to_vec(),
        reference_labels: rec.layout().reference_labels().to_vec(),
        n_samples: rec.n_samples(),
        seeds: seeds.clone(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    let path = dir.join("samples.bin");
    let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
    for row in rec.rows() {
        write_f32(&mut w, &path, row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_events_csv(&dir.join("events.csv"), markers)
}

pub fn read_bundle(dir: &Path) -> Result<(EegRecording, Vec<EventMarker>)> {
    let b = RecordingBundle::read(dir)?;
    Ok((b.recording, b.markers))
}

/// One row of the trial log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialLogRow {
    pub participant: u32,
    pub session: u32,
    pub record: TrialRecord,
}

pub fn write_trial_log(path: &Path, rows: &[TrialLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("trial log", format!("{}: {e}", path.display())))?;
    w.write_record(TRIAL_LOG_HEADER)?;
    for r in rows {
        let e = &r.record.entry;
        w.write_record([
            r.participant.to_string(),
            r.session.to_string(),
            e.trial_id.to_string(),
            e.block_id.to_string(),
            e.d_level.to_string(),
            opt_str(e.style),
            e.target_side.as_str().to_string(),
            r.record.crossing_time_s.to_string(),
            r.record.completion_time_s.to_string(),
            opt_str(r.record.prev_trial_congruent),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trial log. Block positions are recomputed as the rank of each
/// trial id within its (participant, session, block).
pub fn read_trial_log(path: &Path) -> Result<Vec<TrialLogRow>> {
    let mut rdr = csv_reader(path, "trial log", &TRIAL_LOG_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let crossing_time_s: f64 = field(&rec, 7, "crossing_s", line)?;
        let completion_time_s: f64 = field(&rec, 8, "completion_s", line)?;
        if !(completion_time_s >= crossing_time_s) {
            return Err(Error::format(
                "trial log",
                format!("line {line}: completion_s {completion_time_s} is less than crossing_s {crossing_time_s}"),
            ));
        }
        rows.push(TrialLogRow {
            participant: field(&rec, 0, "participant", line)?,
            session: field(&rec, 1, "session", line)?,
            record: TrialRecord {
                entry: TrialEntry {
                    trial_id: field(&rec, 2, "trial_id", line)?,
                    block_id: field(&rec, 3, "block_id", line)?,
                    block_position: 0,
                    d_level: field(&rec, 4, "d_level", line)?,
                    style: opt_field(&rec, 5, "style", line)?,
                    target_side: field::<TargetSide>(&rec, 6, "target_side", line)?,
                },
                crossing_time_s,
                completion_time_s,
                prev_trial_congruent: opt_field(&rec, 9, "prev_congruent", line)?,
                feedback_onset_sample: None,
            },
        });
    }
    let mut blocks: BTreeMap<(u32, u32, u32), Vec<(u32, usize)>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        blocks
            .entry((r.participant, r.session, r.record.entry.block_id))
            .or_default()
            .push((r.record.entry.trial_id, i));
    }
    for members in blocks.values_mut() {
        members.sort_unstable();
        for (rank, &(_, i)) in members.iter().enumerate() {
            rows[i].record.entry.block_position = rank as u32;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreMeta {
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    window: EpochWindow,
    pre_samples: usize,
    n_samples: usize,
    participants: Vec<u32>,
    n_epochs: usize,
    seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredRejection {
    participant: u32,
    #[serde(flatten)]
    rejection: Rejection,
}

/// Cleaned epochs of every participant, one set each.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStore {
    pub participants: Vec<(u32, EpochSet)>,
    pub seeds: BTreeMap<String, u64>,
}

impl EpochStore {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let first = &self
            .participants
            .first()
            .ok_or_else(|| Error::EmptyInput("epoch store has no participants".into()))?
            .1;
        let n_samples = first.window.n_samples(first.sample_rate_hz);
        let pre_samples = first.window.pre_samples(first.sample_rate_hz);
        for (p, set) in &self.participants {
            if set.channel_names != first.channel_names
                || set.sample_rate_hz != first.sample_rate_hz
                || set.window != first.window
            {
                return Err(Error::InvalidConfig(format!(
                    "participant {p} epochs differ in channels, rate or window"
                )));
            }
        }
        create_dir(dir)?;
        let meta = StoreMeta {
            sample_rate_hz: first.sample_rate_hz,
            channel_names: first.channel_names.clone(),
            window: first.window,
            pre_samples,
            n_samples,
            participants: self.participants.iter().map(|(p, _)| *p).collect(),
            n_epochs: self.participants.iter().map(|(_, s)| s.len()).sum(),
            seeds: self.seeds.clone(),
        };
        write_json(&dir.join("meta.json"), &meta)?;

        let table = dir.join("epochs.csv");
        let mut w = csv::Writer::from_path(&table).map_err(|e| Error::format("epoch table", format!("{}: {e}", table.display())))?;
        w.write_record(EPOCHS_HEADER)?;
        let data = dir.join("data.bin");
        let mut bin = BufWriter::new(fs::File::create(&data).map_err(|e| Error::io(&data, e))?);
        let mut rejections = Vec::new();
        for (p, set) in &self.participants {
            for e in &set.epochs {
                let mut marker = e.marker;
                marker.condition = Some(e.condition);
                let mut row = vec![p.to_string(), e.session.to_string()];
                row.extend(marker_fields(&marker));
                w.write_record(&row)?;
                write_f32(&mut bin, &data, &e.data)?;
            }
            rejections.extend(set.rejection_log.iter().map(|r| StoredRejection {
                participant: *p,
                rejection: r.clone(),
            }));
        }
        w.flush().map_err(|e| Error::io(&table, e))?;
        bin.flush().map_err(|e| Error::io(&data, e))?;
        write_json(&dir.join("rejections.json"), &rejections)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        require(&meta_path, "epoch store")?;
        let meta: StoreMeta = read_json(&meta_path, "epoch store metadata")?;
        let n_ch = meta.channel_names.len();
        let per_epoch = n_ch * meta.n_samples;
        let data = read_f32_file(&dir.join("data.bin"), "data.bin", meta.n_epochs * per_epoch)?;

        let mut sets: BTreeMap<u32, EpochSet> = meta
            .participants
            .iter()
            .map(|&p| (p, EpochSet::empty(meta.channel_names.clone(), meta.sample_rate_hz, meta.window)))
            .collect();
        let mut rdr = csv_reader(&dir.join("epochs.csv"), "epoch table", &EPOCHS_HEADER)?;
        let mut k = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let participant: u32 = field(&rec, 0, "participant", line)?;
            let session = field(&rec, 1, "session", line)?;
            let marker = parse_marker(&rec, 2, line)?;
            let condition = marker
                .condition
                .ok_or_else(|| Error::format("epoch table", format!("line {line}: epoch without condition")))?;
            if k >= meta.n_epochs {
                return Err(Error::format("epoch table", "more rows than n_epochs"));
            }
            let set = sets
                .get_mut(&participant)
                .ok_or_else(|| Error::format("epoch table", format!("line {line}: unknown participant {participant}")))?;
            set.epochs.push(Epoch {
                condition,
                session,
                marker,
                sample_rate_hz: meta.sample_rate_hz,
                pre_samples: meta.pre_samples,
                n_channels: n_ch,
                n_samples: meta.n_samples,
                data: data[k * per_epoch..(k + 1) * per_epoch].to_vec(),
            });
            k += 1;
        }
        if k != meta.n_epochs {
            return Err(Error::format(
                "epoch table",
                format!("{k} rows but metadata declares {}", meta.n_epochs),
            ));
        }
        let rejections: Vec<StoredRejection> = read_json(&dir.join("rejections.json"), "rejection log")?;
        for r in rejections {
            sets.get_mut(&r.participant)
                .ok_or_else(|| Error::format("rejection log", format!("unknown participant {}", r.participant)))?
                .rejection_log
                .push(r.rejection);
        }
        Ok(Self {
            participants: sets.into_iter().collect(),
            seeds: meta.seeds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{extract_session_epochs, RejectReason};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bundle(seed: u64) -> RecordingBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = ChannelLayout::default_32().subset(&["Fz", "FCz", "M1", "M2"]).unwrap();
        let n = 3000;
        let samples: Vec<f64> = (0..layout.len() * n)
            .map(|_| rng.random_range(-50.0f32..50.0) as f64)
            .collect();
        let rec = EegRecording::new(1000.0, layout, n, samples).unwrap();
        let mut markers = Vec::new();
        let mut t = 10;
        for i in 0..12u32 {
            let code = EventCode::ALL[i as usize % 4];
            let condition = matches!(code, EventCode::TrialStart | EventCode::FeedbackOnset).then(|| Condition {
                d_level: DLevel::ALL[rng.random_range(0..3)],
                style: (i % 3 != 0).then_some(HandStyle::S2),
                block_id: i / 4,
                trial_id: i,
            });
            markers.push(EventMarker {
                sample_index: t,
                code,
                condition,
            });
            t += rng.random_range(0..200);
        }
        RecordingBundle {
            recording: rec,
            markers,
            seeds: BTreeMap::from([("noise".to_string(), seed)]),
        }
    }

    #[test]
    fn bundle_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..4 {
            let b = random_bundle(seed);
            let path = dir.path().join(format!("b{seed}"));
            b.write(&path).unwrap();
            let back = RecordingBundle::read(&path).unwrap();
            assert_eq!(back, b);
            let bits = |r: &EegRecording| r.samples().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.recording), bits(&b.recording));
        }
        let text = fs::read_to_string(dir.path().join("b0/events.csv")).unwrap();
        assert!(text.starts_with("sample_index,code,d_level,style,block_id,trial_id\n"));
        assert!(text.lines().any(|l| l.ends_with("RestStart,,,,")));
    }

    #[test]
    fn truncated_samples_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        random_bundle(1).write(dir.path()).unwrap();
        let p = dir.path().join("samples.bin");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        let err = read_bundle(dir.path()).unwrap_err().to_string();
        assert!(err.contains("size mismatch"), "{err}");
    }

    #[test]
    fn decreasing_event_indices_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        random_bundle(2).write(dir.path()).unwrap();
        let p = dir.path().join("events.csv");
        fs::write(&p, "sample_index,code,d_level,style,block_id,trial_id\n50,RestStart,,,,\n40,RestEnd,,,,\n").unwrap();
        let err = read_bundle(dir.path()).unwrap_err().to_string();
        assert!(err.contains("smaller than the previous"), "{err}");
    }

    #[test]
    fn malformed_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        random_bundle(3).write(dir.path()).unwrap();
        fs::write(dir.path().join("events.csv"), "sample,code,d_level,style,block_id,trial_id\n").unwrap();
        let err = read_bundle(dir.path()).unwrap_err().to_string();
        assert!(err.contains("malformed header"), "{err}");
        fs::write(dir.path().join("events.csv"), "sample_index,code,d_level,style,block_id,trial_id\n5,Bogus,,,,\n").unwrap();
        assert!(read_bundle(dir.path()).is_err());
    }

    #[test]
    fn trial_log_round_trips_and_recomputes_positions() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rows = Vec::new();
        for p in 0..2u32 {
            for i in 0..20u32 {
                let crossing = rng.random_range(0.2..0.8);
                rows.push(TrialLogRow {
                    participant: p,
                    session: 0,
                    record: TrialRecord {
                        entry: TrialEntry {
                            trial_id: i,
                            block_id: i / 10,
                            block_position: i % 10,
                            d_level: DLevel::ALL[(i / 10) as usize],
                            style: (p == 1).then_some(HandStyle::S3),
                            target_side: TargetSide::for_trial(i),
                        },
                        crossing_time_s: crossing,
                        completion_time_s: crossing + rng.random_range(0.3..1.0),
                        prev_trial_congruent: (i > 0).then(|| i % 3 == 0),
                        feedback_onset_sample: None,
                    },
                });
            }
        }
        let path = dir.path().join("trials.csv");
        write_trial_log(&path, &rows).unwrap();
        assert_eq!(read_trial_log(&path).unwrap(), rows);

        // shuffled row order: positions still follow trial order
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        fs::write(&path, lines.join("\n")).unwrap();
        let back = read_trial_log(&path).unwrap();
        for r in &back {
            assert_eq!(r.record.entry.block_position, r.record.entry.trial_id % 10);
        }
    }

    #[test]
    fn trial_log_rejects_completion_before_crossing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(
            &path,
            format!("{}\n0,0,0,0,D1,,pos1,0.9,0.5,\n", TRIAL_LOG_HEADER.join(",")),
        )
        .unwrap();
        assert!(read_trial_log(&path).is_err());
    }

    #[test]
    fn epoch_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let b = random_bundle(9);
        let mut rec = b.recording.clone();
        rec.quantize_f32();
        let window = EpochWindow::default();
        let mut participants = Vec::new();
        for p in 0..2u32 {
            let mut set = extract_session_epochs(&rec, &b.markers, &window, &[EventCode::FeedbackOnset], p);
            set.rejection_log.push(Rejection {
                session: p,
                marker: b.markers[0],
                reason: RejectReason::Artifact {
                    channel: "Fz".into(),
                    peak_uv: 123.5,
                },
            });
            participants.push((p + 3, set));
        }
        let store = EpochStore {
            participants,
            seeds: BTreeMap::from([("pipeline".into(), 1)]),
        };
        assert!(store.participants.iter().any(|(_, s)| !s.is_empty()));
        store.write(dir.path()).unwrap();
        assert_eq!(EpochStore::read(dir.path()).unwrap(), store);
    }

    #[test]
    fn missing_store_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = EpochStore::read(&dir.path().join("epochs")).unwrap_err().to_string();
        assert!(err.contains("missing epoch store"), "{err}");
    }
}
