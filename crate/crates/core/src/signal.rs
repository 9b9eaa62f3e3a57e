//! Multichannel EEG recordings, channel layouts and experiment event streams.
//!
//! Samples are always microvolts. Recordings are stored channel-major in a
//! single flat buffer so that per-channel DSP can borrow contiguous rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default 32-electrode montage in the modified 10-20 convention.
///
/// The last two entries are the left and right mastoid references.
pub const DEFAULT_CHANNELS: [&str; 32] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FT7", "FC3", "FCz", "FC4", "FT8", "T7", "C3",
    "Cz", "C4", "T8", "TP7", "CP3", "CPz", "CP4", "TP8", "P7", "P3", "Pz", "P4", "P8", "O1", "Oz",
    "O2", "M1", "M2",
];

pub const DEFAULT_REFERENCES: [&str; 2] = ["M1", "M2"];

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    names: Vec<String>,
    reference_labels: Vec<String>,
}

impl ChannelLayout {
    pub fn new<S: AsRef<str>>(names: &[S], reference_labels: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let reference_labels: Vec<String> = reference_labels
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        if names.is_empty() {
            return Err(Error::InvalidLayout("no channels".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidLayout(format!("channel {i} has an empty label")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidLayout(format!("duplicate label `{name}`")));
            }
        }
        for (i, r) in reference_labels.iter().enumerate() {
            if !names.contains(r) {
                return Err(Error::InvalidLayout(format!(
                    "reference `{r}` is not a channel"
                )));
            }
            if reference_labels[..i].contains(r) {
                return Err(Error::InvalidLayout(format!("duplicate reference `{r}`")));
            }
        }
        Ok(Self {
            names,
            reference_labels,
        })
    }

    pub fn default_32() -> Self {
        Self::new(&DEFAULT_CHANNELS, &DEFAULT_REFERENCES).expect("default layout is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn reference_labels(&self) -> &[String] {
        &self.reference_labels
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::UnknownChannel(label.to_string()))
    }

    pub fn is_reference(&self, label: &str) -> bool {
        self.reference_labels.iter().any(|r| r == label)
    }

    /// Layout restricted to `labels`, in that order. References not kept are dropped.
    pub fn subset<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        for l in labels {
            self.index_of(l.as_ref())?;
        }
        let refs: Vec<&str> = self
            .reference_labels
            .iter()
            .map(String::as_str)
            .filter(|r| labels.iter().any(|l| l.as_ref() == *r))
            .collect();
        let names: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
        Self::new(&names, &refs)
    }
}

impl Default for ChannelLayout {
    fn default() -> Self {
        Self::default_32()
    }
}

/// Channel-major multichannel recording in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    sample_rate_hz: f64,
    layout: ChannelLayout,
    n_samples: usize,
    samples: Vec<f64>,
}

impl EegRecording {
    /// `samples` is channel-major: all of channel 0, then channel 1, ...
    pub fn new(
        sample_rate_hz: f64,
        layout: ChannelLayout,
        n_samples: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.len() != layout.len() * n_samples {
            return Err(Error::InvalidRecording(format!(
                "expected {} x {} samples, got {}",
                layout.len(),
                n_samples,
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecording(format!(
                "non-finite sample in channel `{}` at index {}",
                layout.names()[pos / n_samples.max(1)],
                pos % n_samples.max(1)
            )));
        }
        Ok(Self {
            sample_rate_hz,
            layout,
            n_samples,
            samples,
        })
    }

    pub fn from_rows(sample_rate_hz: f64, layout: ChannelLayout, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != layout.len() {
            return Err(Error::InvalidRecording(format!(
                "{} rows for {} channels",
                rows.len(),
                layout.len()
            )));
        }
        let n_samples = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_samples) {
            return Err(Error::InvalidRecording(format!(
                "row {i} has {} samples, expected {n_samples}",
                rows[i].len()
            )));
        }
        Self::new(sample_rate_hz, layout, n_samples, rows.concat())
    }

    pub fn zeros(sample_rate_hz: f64, layout: ChannelLayout, n_samples: usize) -> Result<Self> {
        let len = layout.len() * n_samples;
        Self::new(sample_rate_hz, layout, n_samples, vec![0.0; len])
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_channels(&self) -> usize {
        self.layout.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index * self.n_samples..(index + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.samples[index * self.n_samples..(index + 1) * self.n_samples]
    }

    pub fn channel_by_label(&self, label: &str) -> Result<&[f64]> {
        Ok(self.channel(self.layout.index_of(label)?))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_samples.max(1)).take(self.n_channels())
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Rounds every sample to the nearest `f32`, the on-disk precision.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.samples {
            *v = *v as f32 as f64;
        }
    }

    /// In-place variant of [`rereference`].
    pub fn rereference_in_place<S: AsRef<str>>(&mut self, refs: &[S]) -> Result<()> {
        if refs.is_empty() {
            return Err(Error::InvalidConfig("empty reference set".into()));
        }
        let idx: Vec<usize> = refs
            .iter()
            .map(|r| self.layout.index_of(r.as_ref()))
            .collect::<Result<_>>()?;
        let n = self.n_samples;
        let inv = 1.0 / idx.len() as f64;
        let mut mean = vec![0.0; n];
        for &i in &idx {
            for (m, v) in mean.iter_mut().zip(self.channel(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m *= inv;
        }
        for ch in 0..self.n_channels() {
            let row = self.channel_mut(ch);
            if idx.contains(&ch) {
                row.fill(0.0);
            } else {
                for (v, m) in row.iter_mut().zip(&mean) {
                    *v -= m;
                }
            }
        }
        Ok(())
    }
}

/// Subtracts the per-sample mean of `refs` from every other channel and zeroes the references.
pub fn rereference<S: AsRef<str>>(rec: &EegRecording, refs: &[S]) -> Result<EegRecording> {
    let mut out = rec.clone();
    out.rereference_in_place(refs)?;
    Ok(out)
}

pub fn select_channels<S: AsRef<str>>(rec: &EegRecording, labels: &[S]) -> Result<EegRecording> {
    let layout = rec.layout.subset(labels)?;
    let mut samples = Vec::with_capacity(labels.len() * rec.n_samples);
    for l in labels {
        samples.extend_from_slice(rec.channel_by_label(l.as_ref())?);
    }
    EegRecording::new(rec.sample_rate_hz, layout, rec.n_samples, samples)
}

/// Half-open sample window `[start, end)`.
pub fn slice_time(rec: &EegRecording, start: usize, end: usize) -> Result<EegRecording> {
    if start >= end || end > rec.n_samples {
        return Err(Error::OutOfRange {
            start,
            end,
            len: rec.n_samples,
        });
    }
    let mut samples = Vec::with_capacity(rec.n_channels() * (end - start));
    for row in rec.rows() {
        samples.extend_from_slice(&row[start..end]);
    }
    Ok(EegRecording {
        sample_rate_hz: rec.sample_rate_hz,
        layout: rec.layout.clone(),
        n_samples: end - start,
        samples,
    })
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::format(stringify!($name), format!("unknown value `{other}`"))),
                }
            }
        }
    };
}

label_enum!(
    /// Selection-distance condition.
    DLevel { D1 => "D1", D2 => "D2", D3 => "D3" }
);

label_enum!(
    /// Virtual hand rendering style: realistic, robotic, arrow.
    HandStyle { S1 => "S1", S2 => "S2", S3 => "S3" }
);

label_enum!(
    EventCode {
        TrialStart => "TrialStart",
        FeedbackOnset => "FeedbackOnset",
        RestStart => "RestStart",
        RestEnd => "RestEnd",
    }
);

impl DLevel {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl HandStyle {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub d_level: DLevel,
    pub style: Option<HandStyle>,
    pub block_id: u32,
    pub trial_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub sample_index: usize,
    pub code: EventCode,
    /// Absent for rest markers.
    pub condition: Option<Condition>,
}

/// Checks ordering and, when `n_samples` is given, that every marker lies inside the recording.
pub fn validate_markers(markers: &[EventMarker], n_samples: Option<usize>) -> Result<()> {
    for (i, w) in markers.windows(2).enumerate() {
        if w[1].sample_index < w[0].sample_index {
            return Err(Error::InvalidEvents(format!(
                "marker {} at sample {} precedes marker {} at sample {}",
                i + 1,
                w[1].sample_index,
                i,
                w[0].sample_index
            )));
        }
    }
    if let (Some(n), Some(last)) = (n_samples, markers.last()) {
        if last.sample_index >= n {
            return Err(Error::InvalidEvents(format!(
                "marker at sample {} beyond recording of {n} samples",
                last.sample_index
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_layout() -> ChannelLayout {
        ChannelLayout::new(&["Fz", "Cz", "M1", "M2"], &["M1", "M2"]).unwrap()
    }

    fn random_rec(seed: u64, n: usize) -> EegRecording {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..4 * n).map(|_| rng.random_range(-50.0..50.0)).collect();
        EegRecording::new(1000.0, small_layout(), n, samples).unwrap()
    }

    #[test]
    fn default_layout_has_32_channels_and_two_references() {
        let l = ChannelLayout::default_32();
        assert_eq!(l.len(), 32);
        assert_eq!(l.reference_labels(), &["M1", "M2"]);
        for r in l.reference_labels() {
            assert!(l.names().contains(r));
        }
    }

    #[test]
    fn layout_rejects_duplicates_and_foreign_references() {
        assert!(ChannelLayout::new(&["Fz", "Fz"], &[]).is_err());
        assert!(ChannelLayout::new(&["Fz", ""], &[]).is_err());
        assert!(ChannelLayout::new(&["Fz", "Cz"], &["M1"]).is_err());
    }

    #[test]
    fn recording_rejects_non_finite_and_ragged() {
        let l = small_layout();
        let mut s = vec![0.0; 8];
        s[5] = f64::NAN;
        assert!(EegRecording::new(1000.0, l.clone(), 2, s).is_err());
        assert!(EegRecording::new(1000.0, l.clone(), 2, vec![0.0; 7]).is_err());
        assert!(EegRecording::new(0.0, l.clone(), 2, vec![0.0; 8]).is_err());
        assert!(EegRecording::from_rows(1000.0, l, vec![vec![0.0; 2], vec![0.0; 3], vec![], vec![]]).is_err());
    }

    #[test]
    fn rereference_zero_is_fixed_point() {
        let rec = EegRecording::zeros(1000.0, small_layout(), 50).unwrap();
        assert_eq!(rereference(&rec, &["M1", "M2"]).unwrap(), rec);
    }

    #[test]
    fn rereference_removes_common_mode() {
        let rec = EegRecording::new(1000.0, small_layout(), 10, vec![7.25; 40]).unwrap();
        let out = rereference(&rec, &["M1", "M2"]).unwrap();
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rereference_matches_elementwise_oracle() {
        let rec = random_rec(3, 200);
        let out = rereference(&rec, &["M1", "M2"]).unwrap();
        let m1 = rec.channel(2);
        let m2 = rec.channel(3);
        for ch in 0..2 {
            for k in 0..200 {
                let expected = rec.channel(ch)[k] - (m1[k] + m2[k]) / 2.0;
                assert!((out.channel(ch)[k] - expected).abs() < 1e-12);
            }
        }
        assert!(out.channel(2).iter().chain(out.channel(3)).all(|&v| v == 0.0));
        assert_eq!(out.layout(), rec.layout());
    }

    #[test]
    fn rereference_unknown_label_is_named() {
        let rec = random_rec(1, 10);
        match rereference(&rec, &["M3"]) {
            Err(Error::UnknownChannel(l)) => assert_eq!(l, "M3"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(rereference::<&str>(&rec, &[]).is_err());
    }

    #[test]
    fn rereference_twice_equals_once() {
        let rec = random_rec(9, 100);
        let once = rereference(&rec, &["M1", "M2"]).unwrap();
        let twice = rereference(&once, &["M1", "M2"]).unwrap();
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn select_identity_single_and_reversed() {
        let rec = random_rec(5, 30);
        let names: Vec<String> = rec.layout().names().to_vec();
        assert_eq!(select_channels(&rec, &names).unwrap(), rec);

        let one = select_channels(&rec, &["Cz"]).unwrap();
        assert_eq!(one.n_channels(), 1);
        assert_eq!(one.channel(0), rec.channel(1));
        assert!(one.layout().reference_labels().is_empty());

        let rev: Vec<String> = names.iter().rev().cloned().collect();
        let out = select_channels(&rec, &rev).unwrap();
        let index_map = [3usize, 2, 1, 0];
        for (new, &old) in index_map.iter().enumerate() {
            assert_eq!(out.channel(new), rec.channel(old));
        }
        assert_eq!(out.layout().reference_labels(), &["M1", "M2"]);
        assert!(select_channels(&rec, &["Oz"]).is_err());
    }

    #[test]
    fn slice_identity_single_and_errors() {
        let rec = random_rec(6, 40);
        assert_eq!(slice_time(&rec, 0, 40).unwrap(), rec);
        let one = slice_time(&rec, 17, 18).unwrap();
        assert_eq!(one.n_samples(), 1);
        for ch in 0..4 {
            assert_eq!(one.channel(ch), &[rec.channel(ch)[17]]);
        }
        assert!(slice_time(&rec, 5, 5).is_err());
        assert!(slice_time(&rec, 0, 41).is_err());
        assert!(slice_time(&rec, 10, 3).is_err());
    }

    #[test]
    fn marker_validation() {
        let m = |s| EventMarker {
            sample_index: s,
            code: EventCode::TrialStart,
            condition: None,
        };
        assert!(validate_markers(&[m(1), m(1), m(5)], Some(6)).is_ok());
        assert!(validate_markers(&[m(5), m(1)], None).is_err());
        assert!(validate_markers(&[m(6)], Some(6)).is_err());
    }

    proptest! {
        #[test]
        fn nested_slices_compose(seed in 0u64..1000, a in 0usize..20, len1 in 2usize..30, c_frac in 0.0f64..1.0, d_frac in 0.0f64..1.0) {
            let rec = random_rec(seed, 60);
            let b = a + len1;
            let inner = slice_time(&rec, a, b).unwrap();
            let c = ((len1 - 1) as f64 * c_frac) as usize;
            let d = c + 1 + ((len1 - c - 1) as f64 * d_frac) as usize;
            let nested = slice_time(&inner, c, d).unwrap();
            let direct = slice_time(&rec, a + c, a + d).unwrap();
            prop_assert_eq!(nested, direct);
        }

        #[test]
        fn select_composes_as_label_composition(seed in 0u64..1000, perm in Just([2usize, 0, 3, 1]).prop_shuffle(), k in 1usize..=4) {
            let rec = random_rec(seed, 16);
            let names = rec.layout().names().to_vec();
            let first: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
            let second: Vec<String> = first.iter().rev().take(k).cloned().collect();
            let two_step = select_channels(&select_channels(&rec, &first).unwrap(), &second).unwrap();
            let direct = select_channels(&rec, &second).unwrap();
            prop_assert_eq!(two_step, direct);
        }
    }
}
