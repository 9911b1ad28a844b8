//! Vertical eye opening from receiver waveforms and the known transmitted
//! bits, plus an SVG/CSV rendering of the folded eye.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtl::{LinkRun, Waveforms};

/// Where and how to sample: bit `b` is sampled at
/// `(b + 0.5)·UI + latency + phase`, for bits whose whole phase window lies
/// after `warmup` and inside the record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeWindow {
    pub data_rate: f64,
    pub latency: f64,
    pub warmup: f64,
}

impl EyeWindow {
    pub fn unit_interval(&self) -> f64 {
        1.0 / self.data_rate
    }
}

impl From<&LinkRun> for EyeWindow {
    fn from(run: &LinkRun) -> Self {
        EyeWindow {
            data_rate: run.data_rate,
            latency: run.latency,
            warmup: run.warmup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireEye {
    /// 1-based wire index.
    pub wire: usize,
    pub eye_v: f64,
    /// Sampling phase relative to the nominal bit center, in UI.
    pub phase_ui: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeReport {
    pub per_wire: Vec<WireEye>,
    pub min_v: f64,
    pub avg_v: f64,
    pub max_v: f64,
}

impl EyeReport {
    pub fn eye(&self, wire: usize) -> f64 {
        self.per_wire[wire].eye_v
    }

    pub fn eyes(&self) -> Vec<f64> {
        self.per_wire.iter().map(|w| w.eye_v).collect()
    }
}

struct PhaseGrid {
    offsets: Vec<i64>,
    bit_lo: usize,
    bit_hi: usize,
}

fn phase_grid(waves: &Waveforms, nbits: usize, window: &EyeWindow) -> Result<PhaseGrid> {
    let ui = window.unit_interval();
    let per_ui = ((ui / waves.dt).round() as i64).max(1);
    let offsets: Vec<i64> = (-(per_ui / 2)..(per_ui - per_ui / 2)).collect();
    let lo_off = offsets[0] as f64 * waves.dt;
    let hi_off = offsets[offsets.len() - 1] as f64 * waves.dt;
    let t_end = waves.time(waves.len().saturating_sub(1));

    let bit_time = |b: usize| (b as f64 + 0.5) * ui + window.latency;
    let mut bit_lo = ((window.warmup - window.latency - lo_off) / ui - 0.5)
        .ceil()
        .max(0.0) as usize;
    while bit_lo > 0 && bit_time(bit_lo - 1) + lo_off >= window.warmup {
        bit_lo -= 1;
    }
    while bit_time(bit_lo) + lo_off < window.warmup {
        bit_lo += 1;
    }
    let mut bit_hi = bit_lo;
    while bit_hi < nbits && bit_time(bit_hi) + hi_off <= t_end {
        bit_hi += 1;
    }
    if bit_hi <= bit_lo {
        return Err(Error::validation(
            "waveforms",
            "no complete bit after the warmup period; run a longer simulation",
        ));
    }
    Ok(PhaseGrid {
        offsets,
        bit_lo,
        bit_hi,
    })
}

/// Eye height of one wire at every candidate phase, as `(phase_ui, volts)`.
/// Values are not clamped.
pub fn eye_by_phase(
    waves: &Waveforms,
    wire: usize,
    bits: &[bool],
    window: &EyeWindow,
) -> Result<Vec<(f64, f64)>> {
    let grid = phase_grid(waves, bits.len(), window)?;
    scan_wire(waves, wire, bits, window, &grid)
}

fn scan_wire(
    waves: &Waveforms,
    wire: usize,
    bits: &[bool],
    window: &EyeWindow,
    grid: &PhaseGrid,
) -> Result<Vec<(f64, f64)>> {
    let ui = window.unit_interval();
    let active = &bits[grid.bit_lo..grid.bit_hi];
    if active.iter().all(|&b| b) || active.iter().all(|&b| !b) {
        return Err(Error::DegenerateStream(wire + 1));
    }
    let samples = &waves.rx[wire];
    let mut out = Vec::with_capacity(grid.offsets.len());
    for &off in &grid.offsets {
        let mut ones_min = f64::INFINITY;
        let mut zeros_max = f64::NEG_INFINITY;
        for (b, &bit) in bits.iter().enumerate().take(grid.bit_hi).skip(grid.bit_lo) {
            let t = (b as f64 + 0.5) * ui + window.latency + off as f64 * waves.dt;
            let k = ((t - waves.start_time) / waves.dt).round() as usize;
            let x = samples[k];
            if bit {
                ones_min = ones_min.min(x);
            } else {
                zeros_max = zeros_max.max(x);
            }
        }
        out.push((off as f64 * waves.dt / ui, ones_min - zeros_max));
    }
    Ok(out)
}

/// Bit-conditioned vertical eye opening of every wire, maximized over a
/// common sampling phase per wire.
pub fn eye_measure(waves: &Waveforms, streams: &[Vec<bool>], window: &EyeWindow) -> Result<EyeReport> {
    if streams.len() != waves.n() {
        return Err(Error::DimensionMismatch {
            expected: waves.n(),
            found: streams.len(),
        });
    }
    let nbits = streams.iter().map(Vec::len).min().unwrap_or(0);
    let grid = phase_grid(waves, nbits, window)?;
    let mut per_wire = Vec::with_capacity(streams.len());
    for (w, bits) in streams.iter().enumerate() {
        let scan = scan_wire(waves, w, bits, window, &grid)?;
        let mut best = scan[0];
        for &p in &scan[1..] {
            if p.1 > best.1 {
                best = p;
            }
        }
        per_wire.push(WireEye {
            wire: w + 1,
            eye_v: best.1.max(0.0),
            phase_ui: best.0,
        });
    }
    let eyes: Vec<f64> = per_wire.iter().map(|w| w.eye_v).collect();
    Ok(EyeReport {
        min_v: eyes.iter().copied().fold(f64::INFINITY, f64::min),
        max_v: eyes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        avg_v: eyes.iter().sum::<f64>() / eyes.len() as f64,
        per_wire,
    })
}

/// Convenience wrapper for a finished link run.
pub fn measure_run(run: &LinkRun) -> Result<EyeReport> {
    eye_measure(&run.waves, &run.streams, &EyeWindow::from(run))
}

/// Folded eye of one wire: SVG drawing and `phase_ui,volts` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeDiagram {
    pub svg: String,
    pub csv: String,
    pub rows: usize,
}

/// Folds every sample at or after the warmup into a two-UI window aligned
/// so that bit centers land at 0.5 and 1.5 UI.
pub fn render_eye(waves: &Waveforms, wire: usize, window: &EyeWindow) -> Result<EyeDiagram> {
    if wire >= waves.n() {
        return Err(Error::param(format!("wire {} out of range", wire + 1)));
    }
    let ui = window.unit_interval();
    let samples = &waves.rx[wire];
    let first = (0..waves.len())
        .find(|&k| waves.time(k) >= window.warmup)
        .unwrap_or(waves.len());
    let folded: Vec<(f64, f64)> = (first..waves.len())
        .map(|k| {
            (
                ((waves.time(k) - window.latency) / ui).rem_euclid(2.0),
                samples[k],
            )
        })
        .collect();

    let mut csv = String::from("phase_ui,volts\n");
    for (p, v) in &folded {
        let _ = writeln!(csv, "{p:.6},{v:.9e}");
    }

    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let (mut lo, mut hi) = folded
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(_, v)| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let x = |p: f64| M + p / 2.0 * (W - 2.0 * M);
    let y = |v: f64| H - M - (v - lo) / (hi - lo) * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for tick in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{tick:.1}</text>"#,
            x(tick),
            H - M + 16.0
        );
    }
    for v in [lo + pad, 0.0, hi - pad] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            M - 4.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">time (UI)</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">V - Vref (wire {})</text>"#,
        H / 2.0,
        H / 2.0,
        wire + 1
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        y(0.0),
        W - M,
        y(0.0)
    );

    let mut trace = String::new();
    let mut last_phase = f64::INFINITY;
    for &(p, v) in &folded {
        if p < last_phase && !trace.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="steelblue" stroke-opacity="0.4" points="{}"/>"#,
                trace.trim_end()
            );
            trace.clear();
        }
        let _ = write!(trace, "{:.2},{:.2} ", x(p), y(v));
        last_phase = p;
    }
    if !trace.is_empty() {
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-opacity="0.4" points="{}"/>"#,
            trace.trim_end()
        );
    }
    svg.push_str("</svg>\n");

    Ok(EyeDiagram {
        svg,
        csv,
        rows: folded.len(),
    })
}
