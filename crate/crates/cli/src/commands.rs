use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use xtalk_core::bundle::characteristic_impedance;
use xtalk_core::eye::{eye_measure, render_eye, EyeReport, EyeWindow};
use xtalk_core::fom::{bundle_fom, bundle_fom_sampled, code_table, Levels};
use xtalk_core::linalg::spd_inverse;
use xtalk_core::mtl::{simulate_link, Engine, LinkSpec, Waveforms};
use xtalk_core::stimulus::{pattern_assign, streams_csv, PatternMode};
use xtalk_core::termination::{
    conductance_histogram, histogram_csv, network_admittance, realize_network, reduce_network,
    ReductionPolicy, TerminationNetwork,
};
use xtalk_core::CouplingMatrices;

use crate::{
    BitsArgs, EyeArgs, FomArgs, InputError, Pattern, ReduceArgs, SimArgs, SweepArgs, SweepMode, SynthArgs,
};

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn require_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(input_error(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn require_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(input_error(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(input_error(format!("{name} must be positive, got {x}")))
    }
}

fn load_bundle(path: &Path) -> Result<CouplingMatrices> {
    CouplingMatrices::from_file(path).with_context(|| format!("reading bundle {}", path.display()))
}

fn load_link(path: &Path, seed: Option<u32>) -> Result<LinkSpec> {
    let mut spec = LinkSpec::load(path).with_context(|| format!("reading link {}", path.display()))?;
    if let Some(s) = seed {
        spec.stimulus.seed = s;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct ImpedanceFile {
    n: usize,
    name: String,
    #[serde(rename = "Zc")]
    zc: Vec<Vec<f64>>,
    velocities_m_per_s: Vec<f64>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    require_input(&a.lc)?;
    let zc_path = a.zc.clone().unwrap_or_else(|| a.output.with_extension("zc.json"));
    for out in [Some(&a.output), Some(&zc_path), a.histogram.as_ref()]
        .into_iter()
        .flatten()
    {
        require_output(out)?;
    }
    if !a.vref.is_finite() {
        return Err(input_error("--vref must be finite"));
    }
    for (name, c) in [
        ("--cutoff-self", a.cutoff_self),
        ("--cutoff-cross", a.cutoff_cross),
    ] {
        if let Some(c) = c {
            positive(name, c)?;
        }
    }

    let bundle = load_bundle(&a.lc)?;
    let (basis, _) = characteristic_impedance(&bundle)?;
    let mut net = realize_network(&basis.zc, a.vref)?;
    log::info!("realized {} elements", net.len());
    if a.cutoff_self.is_some() || a.cutoff_cross.is_some() {
        let policy = ReductionPolicy::new(
            a.cutoff_self.unwrap_or(f64::INFINITY),
            a.cutoff_cross.unwrap_or(f64::INFINITY),
        );
        net = reduce_network(&net, policy)?;
        log::info!("kept {} elements after cutoffs", net.len());
    }

    write_json(&a.output, &net.to_file_format())?;
    write_json(
        &zc_path,
        &ImpedanceFile {
            n: bundle.n(),
            name: bundle.name().to_string(),
            zc: basis.zc.row_iter().map(|r| r.iter().copied().collect()).collect(),
            velocities_m_per_s: basis.velocities.iter().copied().collect(),
        },
    )?;
    if let Some(h) = &a.histogram {
        write(h, &histogram_csv(&conductance_histogram(&net, a.bins)))?;
    }
    Ok(())
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    require_input(&a.network)?;
    require_output(&a.output)?;
    positive("--cutoff-self", a.cutoff_self)?;
    positive("--cutoff-cross", a.cutoff_cross)?;
    let net = TerminationNetwork::from_file(&a.network)
        .with_context(|| format!("reading network {}", a.network.display()))?;
    let reduced = reduce_network(&net, ReductionPolicy::new(a.cutoff_self, a.cutoff_cross))?;
    write_json(&a.output, &reduced.to_file_format())
}

fn parse_levels(s: &str) -> Result<Levels> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parse = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| input_error(format!("bad level `{p}` in --levels")))
    };
    match parts.as_slice() {
        [lo, hi] => Ok(Levels {
            low: parse(lo)?,
            high: parse(hi)?,
        }),
        _ => Err(input_error("--levels expects `low,high`")),
    }
}

pub fn fom(a: FomArgs) -> Result<()> {
    require_input(&a.lc)?;
    if let Some(n) = &a.network {
        require_input(n)?;
    }
    require_output(&a.output)?;
    if let Some(c) = &a.codes {
        require_output(c)?;
        if a.samples.is_some() {
            return Err(input_error(
                "--codes needs exhaustive enumeration; drop --samples",
            ));
        }
    }
    let levels = parse_levels(&a.levels)?;

    let bundle = load_bundle(&a.lc)?;
    let y = match &a.network {
        Some(path) => {
            let net = TerminationNetwork::from_file(path)
                .with_context(|| format!("reading network {}", path.display()))?;
            if net.n() != bundle.n() {
                return Err(input_error(format!(
                    "network has {} wires, bundle has {}",
                    net.n(),
                    bundle.n()
                )));
            }
            network_admittance(&net)
        }
        None => {
            let (basis, _) = characteristic_impedance(&bundle)?;
            spd_inverse("Zc", &basis.zc)?
        }
    };

    match a.samples {
        Some(k) => write_json(&a.output, &bundle_fom_sampled(&y, a.vref, levels, k, a.seed)?)?,
        None => write_json(&a.output, &bundle_fom(&y, a.vref, levels)?)?,
    }
    if let Some(c) = &a.codes {
        write(c, &code_table(&y, a.vref, levels)?.to_csv())?;
    }
    Ok(())
}

pub fn sim(a: SimArgs) -> Result<()> {
    require_input(&a.link)?;
    require_output(&a.output)?;
    let spec = load_link(&a.link, a.seed)?;
    let run = simulate_link(&spec)?;
    write(&a.output, &run.waves.to_csv())
}

pub fn eye(a: EyeArgs) -> Result<()> {
    require_input(&a.waves)?;
    require_input(&a.link)?;
    for out in [Some(&a.output), a.svg.as_ref(), a.folded.as_ref()]
        .into_iter()
        .flatten()
    {
        require_output(out)?;
    }
    let spec = load_link(&a.link, a.seed)?;
    let text = std::fs::read_to_string(&a.waves).with_context(|| format!("reading {}", a.waves.display()))?;
    let waves = Waveforms::from_csv(&text).with_context(|| format!("parsing {}", a.waves.display()))?;
    if waves.n() != spec.n() {
        return Err(input_error(format!(
            "waveforms have {} wires, link has {}",
            waves.n(),
            spec.n()
        )));
    }
    if waves.is_empty() {
        return Err(input_error("waveform file has no samples"));
    }

    let engine = Engine::build(&spec)?;
    let streams = engine.streams(waves.time(waves.len() - 1))?;
    let window = EyeWindow {
        data_rate: spec.stimulus.data_rate,
        latency: a.latency.unwrap_or_else(|| engine.nominal_delay()),
        warmup: engine.warmup(),
    };
    let report = eye_measure(&waves, &streams, &window)?;
    write_json(&a.output, &report)?;

    if a.svg.is_some() || a.folded.is_some() {
        let wire = match a.wire {
            Some(w) if (1..=spec.n()).contains(&w) => w - 1,
            Some(w) => return Err(input_error(format!("--wire {w} outside 1..={}", spec.n()))),
            None => worst_wire(&report),
        };
        let diagram = render_eye(&waves, wire, &window)?;
        if let Some(p) = &a.svg {
            write(p, &diagram.svg)?;
        }
        if let Some(p) = &a.folded {
            write(p, &diagram.csv)?;
        }
    }
    Ok(())
}

fn worst_wire(report: &EyeReport) -> usize {
    let mut best = 0;
    for (i, w) in report.per_wire.iter().enumerate() {
        if w.eye_v < report.per_wire[best].eye_v {
            best = i;
        }
    }
    best
}

enum SweepPoint {
    Rs(f64),
    Cutoff(Option<(f64, f64)>),
    Uncoupled(f64),
}

fn parse_number(token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| input_error(format!("bad sweep value `{token}`")))
}

fn parse_points(mode: SweepMode, values: &str) -> Result<Vec<(String, SweepPoint)>> {
    let mut out = Vec::new();
    for token in values.split(',').map(str::trim) {
        if token.is_empty() {
            return Err(input_error("empty value in --values"));
        }
        let point = match mode {
            SweepMode::Rs => {
                let x = parse_number(token)?;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(input_error(format!("source resistance {x} must be >= 0")));
                }
                SweepPoint::Rs(x)
            }
            SweepMode::Uncoupled => {
                let x = parse_number(token)?;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(input_error(format!("uncoupled length {x} must be >= 0")));
                }
                SweepPoint::Uncoupled(x)
            }
            SweepMode::Cutoff if token.eq_ignore_ascii_case("inf") => SweepPoint::Cutoff(None),
            SweepMode::Cutoff => {
                let (s, c) = token
                    .split_once('/')
                    .ok_or_else(|| input_error(format!("cutoff `{token}` is not `inf` or `SELF/CROSS`")))?;
                let (s, c) = (parse_number(s)?, parse_number(c)?);
                positive("self cutoff", s)?;
                positive("cross cutoff", c)?;
                SweepPoint::Cutoff(Some((s, c)))
            }
        };
        out.push((token.to_string(), point));
    }
    Ok(out)
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    require_input(&a.link)?;
    require_output(&a.output)?;
    let points = parse_points(a.mode, &a.values)?;
    let mut base = load_link(&a.link, a.seed)?;
    if let Some(p) = a.pattern {
        base.stimulus.mode = match p {
            Pattern::Worst => PatternMode::Worst,
            Pattern::Best => PatternMode::Best,
            Pattern::Random => PatternMode::Random,
        };
    }
    let full = match a.mode {
        SweepMode::Cutoff => {
            let (basis, _) = characteristic_impedance(base.main_bundle())?;
            Some(realize_network(&basis.zc, base.termination.reference_voltage())?)
        }
        _ => None,
    };

    let reports: Vec<xtalk_core::Result<EyeReport>> = points
        .par_iter()
        .map(|(_, point)| {
            let spec = match *point {
                SweepPoint::Rs(rs) => {
                    let mut s = base.clone();
                    s.drivers.iter_mut().for_each(|d| d.series_resistance = rs);
                    s
                }
                SweepPoint::Cutoff(cut) => {
                    let full = full.as_ref().expect("full network for cutoff sweep");
                    let mut s = base.clone();
                    s.termination = match cut {
                        None => full.clone(),
                        Some((sc, cc)) => reduce_network(full, ReductionPolicy::new(sc, cc))?,
                    };
                    s
                }
                SweepPoint::Uncoupled(len) => base.with_uncoupled_ends(len, 50.0)?,
            };
            xtalk_core::eye::measure_run(&simulate_link(&spec)?)
        })
        .collect();

    let mut csv = String::from("value,wire,eye_v,min_v,avg_v,max_v\n");
    for ((label, _), report) in points.iter().zip(reports) {
        let report = report.with_context(|| format!("sweep point {label}"))?;
        for w in &report.per_wire {
            let _ = writeln!(
                csv,
                "{label},{},{:.6},{:.6},{:.6},{:.6}",
                w.wire, w.eye_v, report.min_v, report.avg_v, report.max_v
            );
        }
    }
    write(&a.output, &csv)
}

pub fn bits(a: BitsArgs) -> Result<()> {
    require_input(&a.link)?;
    require_output(&a.output)?;
    let spec = load_link(&a.link, a.seed)?;
    let streams = pattern_assign(&spec.stimulus, spec.n())?;
    write(&a.output, &streams_csv(&streams))
}
