//! Ground-truth synthetic EEG: white or 1/f background noise plus Gaussian
//! FRN-like deflections injected at feedback markers.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::{ChannelLayout, DLevel, EegRecording, EventCode, EventMarker, HandStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sd_uv: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Pink,
            sd_uv: 10.0,
            seed: 0,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// SplitMix64 finaliser, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one channel's noise stream. Keyed by label so that a channel's
/// noise does not depend on which other channels are generated.
pub fn channel_seed(seed: u64, label: &str) -> u64 {
    mix_seed(seed, fnv1a(label.as_bytes()))
}

/// Smallest `m >= n` whose only prime factors are 2, 3 and 5.
pub fn fast_fft_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Independent noise per channel. Pink noise is white noise shaped to a
/// `1/sqrt(f)` amplitude spectrum in the frequency domain, with the DC bin
/// removed, truncated to `n_samples`, then rescaled to exactly `sd_uv`.
/// The transform runs at the next 2-3-5 smooth length.
pub fn gen_noise(
    layout: &ChannelLayout,
    n_samples: usize,
    sample_rate_hz: f64,
    spec: &NoiseSpec,
) -> Result<EegRecording> {
    let mut samples = vec![0.0; layout.len() * n_samples];
    if spec.sd_uv > 0.0 && n_samples > 0 {
        let m = fast_fft_len(n_samples.max(2));
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c = planner.plan_fft_forward(m);
        let c2r = planner.plan_fft_inverse(m);
        let mut time = r2c.make_input_vec();
        let mut freq = r2c.make_output_vec();
        let mut scratch = vec![Complex64::new(0.0, 0.0); r2c.get_scratch_len().max(c2r.get_scratch_len())];
        for (name, row) in layout.names().iter().zip(samples.chunks_exact_mut(n_samples)) {
            let mut rng = ChaCha8Rng::seed_from_u64(channel_seed(spec.seed, name));
            match spec.kind {
                NoiseKind::White => {
                    for v in row.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = z * spec.sd_uv;
                    }
                }
                NoiseKind::Pink => {
                    for v in time.iter_mut() {
                        *v = StandardNormal.sample(&mut rng);
                    }
                    r2c.process_with_scratch(&mut time, &mut freq, &mut scratch)
                        .expect("fft buffers sized by planner");
                    freq[0] = Complex64::new(0.0, 0.0);
                    for (k, c) in freq.iter_mut().enumerate().skip(1) {
                        *c /= (k as f64).sqrt();
                    }
                    if m % 2 == 0 {
                        let last = freq.len() - 1;
                        freq[last].im = 0.0;
                    }
                    c2r.process_with_scratch(&mut freq, &mut time, &mut scratch)
                        .expect("fft buffers sized by planner");
                    row.copy_from_slice(&time[..n_samples]);
                    let mean = row.iter().sum::<f64>() / n_samples as f64;
                    let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                        / n_samples as f64)
                        .sqrt();
                    if sd > 0.0 {
                        let g = spec.sd_uv / sd;
                        for v in row.iter_mut() {
                            *v = (*v - mean) * g;
                        }
                    }
                }
            }
        }
    }
    EegRecording::new(sample_rate_hz, layout.clone(), n_samples, samples)
}

/// Frontal-weighted scalp distribution used by the default template.
pub fn default_channel_weights() -> BTreeMap<String, f64> {
    [
        ("Fz", 1.0),
        ("FCz", 1.0),
        ("F3", 0.8),
        ("F4", 0.8),
        ("FC3", 0.7),
        ("FC4", 0.7),
        ("Cz", 0.5),
        ("Fp1", 0.4),
        ("Fp2", 0.4),
        ("F7", 0.3),
        ("F8", 0.3),
        ("C3", 0.3),
        ("C4", 0.3),
        ("FT7", 0.2),
        ("FT8", 0.2),
        ("CPz", 0.2),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErpTemplate {
    pub peak_amplitude_uv: f64,
    pub peak_latency_ms: f64,
    /// Gaussian standard deviation.
    pub width_ms: f64,
    /// Channels not listed have weight 0.
    pub channel_weights: BTreeMap<String, f64>,
}

impl Default for ErpTemplate {
    fn default() -> Self {
        Self {
            peak_amplitude_uv: -5.0,
            peak_latency_ms: 170.0,
            width_ms: 25.0,
            channel_weights: default_channel_weights(),
        }
    }
}

impl ErpTemplate {
    pub fn weight(&self, label: &str) -> f64 {
        self.channel_weights.get(label).copied().unwrap_or(0.0)
    }

    pub fn mean_weight<S: AsRef<str>>(&self, labels: &[S]) -> f64 {
        labels.iter().map(|l| self.weight(l.as_ref())).sum::<f64>() / labels.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_ms > 0.0) {
            return Err(crate::Error::InvalidConfig("template width must be positive".into()));
        }
        if let Some((k, w)) = self
            .channel_weights
            .iter()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(crate::Error::InvalidConfig(format!(
                "weight {w} for `{k}` outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn render(&self, sample_rate_hz: f64) -> RenderedTemplate {
        render_template(self, sample_rate_hz)
    }
}

/// Unit-weight template shape sampled from 0 ms; channel waveforms are
/// `weight * shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTemplate {
    pub sample_rate_hz: f64,
    pub shape: Vec<f64>,
    pub weights: BTreeMap<String, f64>,
}

impl RenderedTemplate {
    pub fn channel(&self, label: &str) -> Vec<f64> {
        let w = self.weights.get(label).copied().unwrap_or(0.0);
        self.shape.iter().map(|v| w * v).collect()
    }

    pub fn times_ms(&self) -> Vec<f64> {
        (0..self.shape.len())
            .map(|k| k as f64 * 1000.0 / self.sample_rate_hz)
            .collect()
    }
}

/// Samples `amplitude * exp(-(x - latency)^2 / (2 width^2))` on `[0, latency + 4 width]`.
pub fn render_template(t: &ErpTemplate, sample_rate_hz: f64) -> RenderedTemplate {
    let end_ms = t.peak_latency_ms + 4.0 * t.width_ms;
    let n = (end_ms * sample_rate_hz / 1000.0).floor() as usize + 1;
    let shape = (0..n)
        .map(|k| {
            let x = k as f64 * 1000.0 / sample_rate_hz;
            let z = (x - t.peak_latency_ms) / t.width_ms;
            t.peak_amplitude_uv * (-0.5 * z * z).exp()
        })
        .collect();
    RenderedTemplate {
        sample_rate_hz,
        shape,
        weights: t.channel_weights.clone(),
    }
}

/// Template gain per (hand style, D level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scale: BTreeMap<HandStyle, BTreeMap<DLevel, f64>>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let mut s = Self::zeros();
        s.set(HandStyle::S1, DLevel::D2, 1.0);
        s.set(HandStyle::S2, DLevel::D2, 0.4);
        s.set(HandStyle::S3, DLevel::D2, 0.0);
        s
    }
}

impl ScenarioSpec {
    pub fn zeros() -> Self {
        Self {
            scale: HandStyle::ALL
                .iter()
                .map(|&s| (s, DLevel::ALL.iter().map(|&d| (d, 0.0)).collect()))
                .collect(),
        }
    }

    pub fn uniform(value: f64) -> Self {
        let mut s = Self::zeros();
        for style in HandStyle::ALL {
            for d in DLevel::ALL {
                s.set(*style, *d, value);
            }
        }
        s
    }

    pub fn set(&mut self, style: HandStyle, d: DLevel, value: f64) {
        self.scale.entry(style).or_default().insert(d, value);
    }

    /// Zero for untagged styles or missing entries.
    pub fn get(&self, style: Option<HandStyle>, d: DLevel) -> f64 {
        style
            .and_then(|s| self.scale.get(&s))
            .and_then(|m| m.get(&d))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn sum(&self, other: &ScenarioSpec) -> ScenarioSpec {
        let mut out = ScenarioSpec::zeros();
        for style in HandStyle::ALL {
            for d in DLevel::ALL {
                out.set(*style, *d, self.get(Some(*style), *d) + other.get(Some(*style), *d));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (style, m) in &self.scale {
            for (d, v) in m {
                if !(*v >= 0.0 && v.is_finite()) {
                    return Err(crate::Error::InvalidConfig(format!(
                        "scenario scale for ({style}, {d}) must be nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// In-place variant of [`inject`].
pub fn inject_in_place(
    rec: &mut EegRecording,
    markers: &[EventMarker],
    template: &RenderedTemplate,
    scenario: &ScenarioSpec,
) {
    let n = rec.n_samples();
    let weights: Vec<f64> = rec
        .layout()
        .names()
        .iter()
        .map(|l| template.weights.get(l).copied().unwrap_or(0.0))
        .collect();
    for m in markers.iter().filter(|m| m.code == EventCode::FeedbackOnset) {
        let Some(c) = m.condition else { continue };
        let gain = scenario.get(c.style, c.d_level);
        if gain == 0.0 || m.sample_index >= n {
            continue;
        }
        let len = template.shape.len().min(n - m.sample_index);
        for (ch, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &mut rec.channel_mut(ch)[m.sample_index..m.sample_index + len];
            for (v, s) in row.iter_mut().zip(&template.shape) {
                *v += gain * w * s;
            }
        }
    }
}

/// Adds the scaled template at every `FeedbackOnset`; tails past the end are cut.
pub fn inject(
    rec: &EegRecording,
    markers: &[EventMarker],
    template: &ErpTemplate,
    scenario: &ScenarioSpec,
) -> EegRecording {
    let mut out = rec.clone();
    inject_in_place(&mut out, markers, &template.render(rec.sample_rate_hz()), scenario);
    out
}
