//! Time-domain simulation of cascaded lossless multiconductor lines.
//!
//! Each segment is decomposed into modes with unit characteristic impedance
//! (see [`crate::bundle`]); every mode is a Branin two-port whose port
//! voltages are driven by the delayed wave `v + i` leaving the opposite
//! port. At each step the terminals (driver side, inter-segment junctions,
//! receiver side) are solved as small nodal systems in which each line end
//! appears as a Norton source with conductance `Z_c⁻¹`.

mod engine;
mod history;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use engine::{simulate_link, DcSolution, Engine, LinkRun, Waveforms};

use crate::bundle::{BundleFile, CouplingMatrices};
use crate::error::{Error, Result};
use crate::fom::Levels;
use crate::stimulus::StimulusSpec;
use crate::termination::{realize_network, reduce_network, NetworkFile, ReductionPolicy, TerminationNetwork};

/// Samples per unit interval used when no timestep is given.
pub const DEFAULT_STEPS_PER_UI: f64 = 64.0;
/// Default driver edge time (s).
pub const DEFAULT_RISE_TIME: f64 = 10e-12;

/// Physical length of a segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentLength {
    Uniform(f64),
    /// One length per wire; only valid for uncoupled bundles.
    PerWire(Vec<f64>),
}

impl SegmentLength {
    pub fn max(&self) -> f64 {
        match self {
            SegmentLength::Uniform(l) => *l,
            SegmentLength::PerWire(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub bundle: CouplingMatrices,
    pub length: SegmentLength,
}

impl Segment {
    pub fn uniform(bundle: CouplingMatrices, length: f64) -> Self {
        Segment {
            bundle,
            length: SegmentLength::Uniform(length),
        }
    }
}

/// Ideal trapezoidal source behind a series resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Driver {
    pub series_resistance: f64,
    pub levels: Levels,
    pub rise_time: f64,
}

impl Default for Driver {
    fn default() -> Self {
        Driver {
            series_resistance: 0.0,
            levels: Levels::default(),
            rise_time: DEFAULT_RISE_TIME,
        }
    }
}

impl Driver {
    pub fn with_resistance(series_resistance: f64) -> Self {
        Driver {
            series_resistance,
            ..Driver::default()
        }
    }
}

/// A complete link: drivers and line segments from driver to receiver, plus the
/// receiver termination.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub segments: Vec<Segment>,
    /// One driver per wire.
    pub drivers: Vec<Driver>,
    pub termination: TerminationNetwork,
    pub stimulus: StimulusSpec,
    /// Defaults to one unit interval / 64.
    pub timestep: Option<f64>,
    /// Defaults to warmup plus one PRBS period plus two unit intervals.
    pub duration: Option<f64>,
}

impl LinkSpec {
    pub fn n(&self) -> usize {
        self.termination.n()
    }

    pub fn timestep(&self) -> f64 {
        self.timestep
            .unwrap_or(self.stimulus.unit_interval() / DEFAULT_STEPS_PER_UI)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.segments.is_empty() {
            return Err(Error::validation("link", "at least one segment is required"));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if s.bundle.n() != n {
                return Err(Error::validation(
                    "link",
                    format!(
                        "segment {} has {} wires but the termination has {n}",
                        k + 1,
                        s.bundle.n()
                    ),
                ));
            }
            match &s.length {
                SegmentLength::Uniform(l) if !(*l >= 0.0 && l.is_finite()) => {
                    return Err(Error::validation(
                        "link",
                        format!("segment {} length {l} invalid", k + 1),
                    ));
                }
                SegmentLength::PerWire(v) => {
                    if v.len() != n || v.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                        return Err(Error::validation(
                            "link",
                            format!("segment {} needs {n} non-negative per-wire lengths", k + 1),
                        ));
                    }
                    if !s.bundle.is_uncoupled() {
                        return Err(Error::validation(
                            "link",
                            format!("segment {}: per-wire lengths need an uncoupled bundle", k + 1),
                        ));
                    }
                }
                _ => {}
            }
        }
        if self.drivers.len() != n {
            return Err(Error::validation(
                "link",
                format!("{} drivers for {n} wires", self.drivers.len()),
            ));
        }
        for d in &self.drivers {
            if !(d.series_resistance >= 0.0 && d.series_resistance.is_finite()) {
                return Err(Error::validation("drivers", "series resistance must be >= 0"));
            }
        }
        self.stimulus.validate()?;
        let dt = self.timestep();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("link", "timestep must be positive"));
        }
        Ok(())
    }

    /// The coupled bundle the termination is designed for: the segment with
    /// the greatest length.
    pub fn main_bundle(&self) -> &CouplingMatrices {
        let mut best = &self.segments[0];
        for s in &self.segments[1..] {
            if s.length.max() > best.length.max() {
                best = s;
            }
        }
        &best.bundle
    }

    /// Copy of the link with an uncoupled segment of `length` at both ends,
    /// modelling breakout regions. Its velocity is the main bundle's mean
    /// modal velocity. A zero length returns the link unchanged.
    pub fn with_uncoupled_ends(&self, length: f64, impedance: f64) -> Result<Self> {
        if !(length >= 0.0 && length.is_finite()) {
            return Err(Error::param(format!("uncoupled length {length} must be >= 0")));
        }
        let mut out = self.clone();
        if length == 0.0 {
            return Ok(out);
        }
        let (basis, _) = crate::bundle::characteristic_impedance(self.main_bundle())?;
        let v = basis.velocities.iter().sum::<f64>() / basis.velocities.len() as f64;
        let u = CouplingMatrices::uncoupled(self.n(), impedance, v)?;
        out.segments.insert(0, Segment::uniform(u.clone(), length));
        out.segments.push(Segment::uniform(u, length));
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: LinkFile = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        file.resolve(&base)
    }
}

/// Reference to a file (relative to the link file) or an inline object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FileOrInline<T> {
    Path(String),
    Inline(T),
}

/// Segment length in a link file: one value or one per wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthField {
    Uniform(f64),
    PerWire(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub bundle: FileOrInline<BundleFile>,
    pub length_m: LengthField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverRecord {
    #[serde(default)]
    pub rs_ohms: f64,
    #[serde(default)]
    pub v_low: f64,
    #[serde(default = "one")]
    pub v_high: f64,
    #[serde(default = "default_rise")]
    pub rise_s: f64,
}

fn one() -> f64 {
    1.0
}

fn default_rise() -> f64 {
    DEFAULT_RISE_TIME
}

/// Terminations computed from the link's main bundle instead of listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratedTermination {
    /// Realized characteristic admittance, optionally reduced by cutoffs.
    Matched {
        vref: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff_self: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff_cross: Option<f64>,
    },
    /// The same resistor from every wire to the reference.
    Uniform { vref: f64, ohms: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TerminationRecord {
    Path(String),
    Inline(NetworkFile),
    Generated(GeneratedTermination),
}

/// On-disk link description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    pub segments: Vec<SegmentRecord>,
    pub drivers: DriverRecord,
    pub termination: TerminationRecord,
    pub stimulus: StimulusSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestep_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl LinkFile {
    pub fn resolve(&self, base: &Path) -> Result<LinkSpec> {
        let path = |p: &str| -> PathBuf { base.join(p) };
        let mut segments = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            let bundle = match &s.bundle {
                FileOrInline::Path(p) => CouplingMatrices::from_file(&path(p))?,
                FileOrInline::Inline(b) => b.clone().try_into()?,
            };
            let length = match &s.length_m {
                LengthField::Uniform(l) => SegmentLength::Uniform(*l),
                LengthField::PerWire(v) => SegmentLength::PerWire(v.clone()),
            };
            segments.push(Segment { bundle, length });
        }
        if segments.is_empty() {
            return Err(Error::validation("link", "at least one segment is required"));
        }
        let n = segments[0].bundle.n();
        let d = &self.drivers;
        let driver = Driver {
            series_resistance: d.rs_ohms,
            levels: Levels {
                low: d.v_low,
                high: d.v_high,
            },
            rise_time: d.rise_s,
        };
        let termination = match &self.termination {
            TerminationRecord::Path(p) => TerminationNetwork::from_file(&path(p))?,
            TerminationRecord::Inline(f) => f.clone().try_into()?,
            TerminationRecord::Generated(g) => {
                let partial = LinkSpec {
                    segments: segments.clone(),
                    drivers: vec![],
                    termination: TerminationNetwork::new(n, 0.0, vec![])?,
                    stimulus: self.stimulus.clone(),
                    timestep: None,
                    duration: None,
                };
                generate_termination(partial.main_bundle(), g)?
            }
        };
        let spec = LinkSpec {
            segments,
            drivers: vec![driver; n],
            termination,
            stimulus: self.stimulus.clone(),
            timestep: self.timestep_s,
            duration: self.duration_s,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Builds a generated termination for a bundle.
pub fn generate_termination(
    bundle: &CouplingMatrices,
    g: &GeneratedTermination,
) -> Result<TerminationNetwork> {
    match *g {
        GeneratedTermination::Uniform { vref, ohms } => {
            TerminationNetwork::uniform_self(bundle.n(), vref, ohms)
        }
        GeneratedTermination::Matched {
            vref,
            cutoff_self,
            cutoff_cross,
        } => {
            let (basis, _) = crate::bundle::characteristic_impedance(bundle)?;
            let full = realize_network(&basis.zc, vref)?;
            match (cutoff_self, cutoff_cross) {
                (None, None) => Ok(full),
                (s, c) => reduce_network(
                    &full,
                    ReductionPolicy::new(s.unwrap_or(f64::INFINITY), c.unwrap_or(f64::INFINITY)),
                ),
            }
        }
    }
}

#[cfg(test)]
mod tests;
