//! The results document and its static SVG figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::behavior::{BlockPositionCurve, CongruencySequenceResult};
use crate::erp::{ChannelComparison, ErpWaveform, FrnMeasure, FrnWindow};
use crate::error::{Error, Result};
use crate::io::{create_dir, write_file};
use crate::signal::HandStyle;
use crate::stats::ComparisonResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// sha256 of the canonical (sorted-key) JSON form of the configuration.
    pub config_hash: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
}

/// Hex sha256 of `value` serialized as JSON with sorted keys.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    Ok(Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// What was injected, measured the same way as the recovered waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub peak_latency_ms: f64,
    pub area_difference_uv_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleErpResult {
    pub style: HandStyle,
    pub d1: ErpWaveform,
    pub d2: ErpWaveform,
    /// D2 minus D1.
    pub difference: ErpWaveform,
    pub frn_d1: FrnMeasure,
    pub frn_d2: FrnMeasure,
    pub frn_difference: FrnMeasure,
    pub area_difference_uv_ms: f64,
    /// Per-participant ROI area, D2 versus D1.
    pub comparison: ComparisonResult,
    pub channel_map: Vec<ChannelComparison>,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpResults {
    pub participants: u32,
    pub roi: Vec<String>,
    pub window: FrnWindow,
    /// Rejected or dropped epochs by reason.
    pub rejections: BTreeMap<String, usize>,
    pub styles: Vec<StyleErpResult>,
}

impl ErpResults {
    pub fn style(&self, style: HandStyle) -> Option<&StyleErpResult> {
        self.styles.iter().find(|s| s.style == style)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorResults {
    pub participants: u32,
    pub curve: BlockPositionCurve,
    /// Early (positions 1-2) versus late (8-10) completion time per level.
    pub adaptation: Vec<ComparisonResult>,
    pub congruency: CongruencySequenceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub provenance: Provenance,
    pub behavior: Option<BehaviorResults>,
    pub erp: Option<ErpResults>,
}

impl Results {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#222222"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Trims trailing zeros so labels read "0.5" rather than "0.500".
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

/// Linear data-to-pixel mapping for one panel.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape_xml(title)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#000"/>"##,
            x1 - x0,
            y1 - y0
        );
        for (axis, (lo, hi)) in [('x', self.x), ('y', self.y)] {
            let step = nice_step(hi - lo, 6);
            let mut v = (lo / step).ceil() * step;
            while v <= hi + step * 1e-9 {
                if axis == 'x' {
                    let p = self.px(v);
                    let _ = writeln!(
                        svg,
                        r##"<line x1="{p:.1}" y1="{y1:.1}" x2="{p:.1}" y2="{:.1}" stroke="#000"/><text x="{p:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
                        y1 + 5.0,
                        y1 + 18.0,
                        num(v)
                    );
                } else {
                    let p = self.py(v);
                    let _ = writeln!(
                        svg,
                        r##"<line x1="{:.1}" y1="{p:.1}" x2="{x0:.1}" y2="{p:.1}" stroke="#000"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
                        x0 - 5.0,
                        x0 - 8.0,
                        p + 4.0,
                        num(v)
                    );
                }
                v += step;
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            escape_xml(xlabel)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape_xml(ylabel)
        );
    }

    fn polyline(&self, svg: &mut String, xs: &[f64], ys: &[f64], color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }
}

fn open_svg() -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    )
}

fn legend(svg: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            x + 20.0,
            x + 25.0,
            y + 4.0,
            escape_xml(label)
        );
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Waveforms on a shared time axis with the FRN window shaded and, when
/// given, the peak marked by a red vertical line.
pub fn render_erp_svg(
    title: &str,
    waves: &[(&str, &ErpWaveform)],
    window: FrnWindow,
    peak: Option<&FrnMeasure>,
) -> Result<String> {
    if waves.is_empty() || waves.iter().any(|(_, w)| w.values.is_empty()) {
        return Err(Error::EmptyInput(format!("{title}: no waveform samples")));
    }
    let times = &waves[0].1.times_ms;
    if waves.iter().any(|(_, w)| w.times_ms != *times || w.values.len() != times.len()) {
        return Err(Error::MismatchedAxes(format!("{title}: waveforms differ in time axis")));
    }
    let x = (times[0], times[times.len() - 1]);
    let y = extent(waves.iter().flat_map(|(_, w)| w.values.iter().copied()));
    let f = Frame::new(x, (y.0.min(0.0), y.1.max(0.0)));
    let mut svg = open_svg();
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{TOP:.1}" width="{:.2}" height="{:.1}" fill="#999" fill-opacity="0.25"/>"##,
        f.px(window.start_ms),
        f.px(window.end_ms) - f.px(window.start_ms),
        H - TOP - BOTTOM
    );
    f.axes(&mut svg, title, "Time (ms)", "Amplitude (µV)");
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT:.1}" y1="{zero:.2}" x2="{right:.1}" y2="{zero:.2}" stroke="#888" stroke-dasharray="3,3"/>"##,
        zero = f.py(0.0),
        right = W - RIGHT
    );
    let mut entries = Vec::new();
    for (i, (label, w)) in waves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        f.polyline(&mut svg, &w.times_ms, &w.values, color);
        entries.push((label.to_string(), color));
    }
    if let Some(p) = peak {
        let px = f.px(p.peak_latency_ms);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{TOP:.1}" x2="{px:.2}" y2="{:.1}" stroke="#d62728" stroke-width="1.5"/>"##,
            H - BOTTOM
        );
        entries.push((format!("FRN peak {} ms", num(p.peak_latency_ms)), "#d62728"));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Mean completion time against position in block, one line per level.
pub fn render_curve_svg(curve: &BlockPositionCurve) -> Result<String> {
    if curve.levels.iter().all(|l| l.cells.is_empty()) {
        return Err(Error::EmptyInput("block-position curve has no cells".into()));
    }
    let cells = || curve.levels.iter().flat_map(|l| l.cells.iter());
    let x = extent(cells().map(|c| c.position as f64));
    let y = extent(cells().flat_map(|c| [c.mean_s - c.sd_s, c.mean_s + c.sd_s]));
    let f = Frame::new(x, y);
    let mut svg = open_svg();
    f.axes(&mut svg, "Completion time by position in block", "Trial position in block", "Completion time (s)");
    let mut entries = Vec::new();
    for (i, l) in curve.levels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for c in &l.cells {
            let px = f.px(c.position as f64);
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}" stroke-opacity="0.5"/>"#,
                f.py(c.mean_s - c.sd_s),
                f.py(c.mean_s + c.sd_s)
            );
        }
        let xs: Vec<f64> = l.cells.iter().map(|c| c.position as f64).collect();
        let ys: Vec<f64> = l.cells.iter().map(|c| c.mean_s).collect();
        f.polyline(&mut svg, &xs, &ys, color);
        entries.push((l.d_level.to_string(), color));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Bar chart of first-trial completion time per headline transition.
pub fn render_congruency_svg(cse: &CongruencySequenceResult) -> Result<String> {
    let bars: Vec<(String, f64)> = cse
        .transitions
        .iter()
        .filter(|t| t.headline)
        .filter_map(|t| t.group_mean.map(|m| (t.label(), m)))
        .collect();
    if bars.is_empty() {
        return Err(Error::EmptyInput("no headline transition has data".into()));
    }
    let hi = bars.iter().map(|b| b.1).fold(0.0, f64::max);
    let f = Frame::new((0.0, bars.len() as f64), (0.0, hi * 1.1));
    let mut svg = open_svg();
    f.axes(
        &mut svg,
        "First trials after a block change (previous/current)",
        "Transition",
        "Completion time (s)",
    );
    let slot = f.px(1.0) - f.px(0.0);
    for (i, (label, m)) in bars.iter().enumerate() {
        let x = f.px(i as f64) + slot * 0.2;
        let y = f.py(*m);
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            slot * 0.6,
            f.py(0.0) - y,
            PALETTE[if i % 2 == 0 { 0 } else { 1 }],
            x + slot * 0.3,
            y - 6.0,
            escape_xml(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Per-channel paired test results as an SVG table.
pub fn render_significance_table_svg(title: &str, rows: &[ChannelComparison]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{title}: no channels")));
    }
    let row_h = 18.0;
    let height = 60.0 + row_h * (rows.len() + 1) as f64;
    let mut svg = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"{height:.0}\" viewBox=\"0 0 460 {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    );
    let _ = writeln!(svg, r#"<text x="230" y="24" text-anchor="middle" font-size="15">{}</text>"#, escape_xml(title));
    let cols = [20.0, 110.0, 200.0, 300.0, 390.0];
    let header = ["Channel", "t", "p", "Mean diff", "p < 0.05"];
    let y0 = 50.0;
    for (x, h) in cols.iter().zip(header) {
        let _ = writeln!(svg, r#"<text x="{x:.0}" y="{y0:.0}" font-weight="bold">{}</text>"#, escape_xml(h));
    }
    for (i, r) in rows.iter().enumerate() {
        let y = y0 + row_h * (i + 1) as f64;
        if r.result.significant {
            let _ = writeln!(
                svg,
                r##"<rect x="10" y="{:.0}" width="440" height="{row_h:.0}" fill="#fde0dd"/>"##,
                y - 13.0
            );
        }
        let cells = [
            r.channel.clone(),
            format!("{:.3}", r.result.t_statistic),
            format!("{:.4}", r.result.p_value),
            format!("{:.2}", r.result.mean_difference),
            if r.result.significant { "yes".into() } else { "no".into() },
        ];
        for (x, c) in cols.iter().zip(cells) {
            let _ = writeln!(svg, r#"<text x="{x:.0}" y="{y:.0}">{}</text>"#, escape_xml(&c));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes results.json plus every figure the results support. Returns the written paths.
pub fn write_report(results: &Results, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files: Vec<(String, String)> = vec![("results.json".into(), results.to_json()?)];
    if let Some(b) = &results.behavior {
        files.push(("block_position.svg".into(), render_curve_svg(&b.curve)?));
        files.push(("congruency.svg".into(), render_congruency_svg(&b.congruency)?));
    }
    if let Some(e) = &results.erp {
        for s in &e.styles {
            let waves = [("D1", &s.d1), ("D2", &s.d2), ("D2 - D1", &s.difference)];
            files.push((
                format!("erp_{}.svg", s.style),
                render_erp_svg(
                    &format!("{} ROI ERP, {}", e.roi.join("/"), s.style),
                    &waves,
                    e.window,
                    Some(&s.frn_difference),
                )?,
            ));
            files.push((
                format!("channels_{}.svg", s.style),
                render_significance_table_svg(&format!("{}: D2 vs D1 FRN-window area", s.style), &s.channel_map)?,
            ));
        }
    }
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}
