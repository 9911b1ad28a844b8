use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::history::History;
use super::{LinkSpec, SegmentLength};
use crate::bundle::{characteristic_impedance, ModalBasis};
use crate::error::{Error, Result};
use crate::fom::LogicCode;
use crate::stimulus::{cycle, pattern_assign, source_waveform, SourceWaveform, StimulusSpec};
use crate::termination::network_admittance;

/// Receiver-node voltages relative to the reference supply, plus the
/// currents launched into the first segment at the driver side.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveforms {
    pub dt: f64,
    pub start_time: f64,
    /// `rx[wire][sample]`, volts relative to the reference voltage.
    pub rx: Vec<Vec<f64>>,
    /// `tx_current[wire][sample]`, amperes into the line.
    pub tx_current: Vec<Vec<f64>>,
}

impl Waveforms {
    pub fn n(&self) -> usize {
        self.rx.len()
    }

    pub fn len(&self) -> usize {
        self.rx.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    /// Index of the sample nearest to time `t`, if in range.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time) / self.dt).round();
        (k >= 0.0 && (k as usize) < self.len()).then_some(k as usize)
    }

    /// CSV `time_s,w1,...,wn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s");
        for i in 1..=self.n() {
            out.push_str(&format!(",w{i}"));
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!("{:.6e}", self.time(k)));
            for w in &self.rx {
                out.push_str(&format!(",{:.9e}", w[k]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV produced by [`Waveforms::to_csv`]. Currents are not
    /// part of the file and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::validation("waveforms", msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"time_s") || cols.len() < 2 {
            return Err(bad("header must be time_s,w1,...".into()));
        }
        let n = cols.len() - 1;
        let mut times = Vec::new();
        let mut rx = vec![Vec::new(); n];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(bad(format!("row {} has {} fields", row + 2, fields.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", row + 2)))
            };
            times.push(parse(fields[0])?);
            for (w, f) in fields[1..].iter().enumerate() {
                rx[w].push(parse(f)?);
            }
        }
        if times.len() < 2 {
            return Err(bad("need at least two samples".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        Ok(Waveforms {
            dt,
            start_time: times[0],
            rx,
            tx_current: vec![Vec::new(); n],
        })
    }
}

/// Steady-state solution with every line replaced by an ideal connection.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    pub node_voltages: DVector<f64>,
    /// Current flowing from each driver into its wire (A).
    pub wire_currents: DVector<f64>,
}

struct SegmentModel {
    basis: ModalBasis,
    /// Modal delays in units of the timestep.
    delay_steps: Vec<f64>,
    delays: Vec<f64>,
}

/// Nodal system of one terminal with some node voltages imposed.
struct NodalSystem {
    g: DMatrix<f64>,
    free: Vec<usize>,
    fixed: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl NodalSystem {
    fn new(g: DMatrix<f64>, fixed: Vec<usize>, what: &str) -> Result<Self> {
        let n = g.nrows();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        let chol =
            if free.is_empty() {
                None
            } else {
                let gff = DMatrix::from_fn(free.len(), free.len(), |a, b| g[(free[a], free[b])]);
                Some(Cholesky::new(gff).ok_or_else(|| {
                    Error::Singular(format!("{what} nodal matrix is not positive definite"))
                })?)
            };
        Ok(NodalSystem { g, free, fixed, chol })
    }

    /// Solves `G v = j` for the free nodes; `v` must already hold the imposed
    /// voltages at the fixed nodes.
    fn solve(&self, j: &DVector<f64>, v: &mut DVector<f64>) {
        let Some(chol) = &self.chol else { return };
        let mut rhs = DVector::from_fn(self.free.len(), |a, _| {
            let r = self.free[a];
            let mut x = j[r];
            for &k in &self.fixed {
                x -= self.g[(r, k)] * v[k];
            }
            x
        });
        chol.solve_mut(&mut rhs);
        for (a, &r) in self.free.iter().enumerate() {
            v[r] = rhs[a];
        }
    }
}

/// A link ready to simulate: modal data per segment and factored terminal
/// systems. Runs do not mutate the engine, so one engine can serve several
/// runs (also from different threads).
pub struct Engine {
    n: usize,
    dt: f64,
    segments: Vec<SegmentModel>,
    terminals: Vec<NodalSystem>,
    drivers: Vec<super::Driver>,
    driver_g: Vec<f64>,
    y_net: DMatrix<f64>,
    g_self: Vec<f64>,
    vref: f64,
    dc: NodalSystem,
    stimulus: StimulusSpec,
    duration: Option<f64>,
}

impl Engine {
    /// Decomposes every segment and factors the terminal systems.
    pub fn build(spec: &LinkSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n();
        let dt = spec.timestep();

        let mut segments = Vec::new();
        for (idx, seg) in spec.segments.iter().enumerate() {
            if seg.length.max() == 0.0 {
                continue;
            }
            let (basis, _) = characteristic_impedance(&seg.bundle)?;
            let delays: Vec<f64> = match &seg.length {
                SegmentLength::Uniform(l) => basis.delays(*l),
                SegmentLength::PerWire(lengths) => (0..n)
                    .map(|k| {
                        let col = basis.mv.column(k);
                        let wire = col.iamax();
                        lengths[wire] * basis.m_val[k].sqrt()
                    })
                    .collect(),
            };
            for (k, &tau) in delays.iter().enumerate() {
                if tau < dt {
                    return Err(Error::validation(
                        "link",
                        format!(
                            "segment {} mode {} delay {tau:.3e} s is shorter than the timestep {dt:.3e} s",
                            idx + 1,
                            k + 1
                        ),
                    ));
                }
            }
            let delay_steps = delays.iter().map(|t| t / dt).collect();
            segments.push(SegmentModel {
                basis,
                delay_steps,
                delays,
            });
        }
        if segments.is_empty() {
            return Err(Error::validation("link", "all segments have zero length"));
        }

        let driver_g: Vec<f64> = spec
            .drivers
            .iter()
            .map(|d| {
                if d.series_resistance > 0.0 {
                    1.0 / d.series_resistance
                } else {
                    0.0
                }
            })
            .collect();
        let fixed_tx: Vec<usize> = (0..n)
            .filter(|&i| spec.drivers[i].series_resistance == 0.0)
            .collect();
        let y_net = network_admittance(&spec.termination);
        let g_self = spec.termination.self_conductances();

        let mut terminals = Vec::with_capacity(segments.len() + 1);
        let tx = &segments[0].basis.yc + DMatrix::from_diagonal(&DVector::from_vec(driver_g.clone()));
        terminals.push(NodalSystem::new(tx, fixed_tx.clone(), "driver-side")?);
        for w in segments.windows(2) {
            let g = &w[0].basis.yc + &w[1].basis.yc;
            terminals.push(NodalSystem::new(g, vec![], "junction")?);
        }
        let rx = &segments[segments.len() - 1].basis.yc + &y_net;
        terminals.push(NodalSystem::new(rx, vec![], "receiver-side")?);

        let dc_g = &y_net + DMatrix::from_diagonal(&DVector::from_vec(driver_g.clone()));
        let dc = NodalSystem::new(dc_g, fixed_tx, "DC")?;

        Ok(Engine {
            n,
            dt,
            segments,
            terminals,
            drivers: spec.drivers.clone(),
            driver_g,
            y_net,
            g_self,
            vref: spec.termination.reference_voltage(),
            dc,
            stimulus: spec.stimulus.clone(),
            duration: spec.duration,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn reference_voltage(&self) -> f64 {
        self.vref
    }

    pub fn unit_interval(&self) -> f64 {
        self.stimulus.unit_interval()
    }

    /// Per-mode delays (s) of the `k`-th non-empty segment.
    pub fn modal_delays(&self, k: usize) -> &[f64] {
        &self.segments[k].delays
    }

    pub fn basis(&self, k: usize) -> &ModalBasis {
        &self.segments[k].basis
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Sum over segments of the slowest mode's delay.
    pub fn total_delay(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.delays.iter().copied().fold(0.0, f64::max))
            .sum()
    }

    /// Sum over segments of the mean modal delay; the default eye latency.
    pub fn nominal_delay(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.delays.iter().sum::<f64>() / s.delays.len() as f64)
            .sum()
    }

    /// Time excluded from eye analysis: two link delays plus eight UI.
    pub fn warmup(&self) -> f64 {
        2.0 * self.total_delay() + 8.0 * self.unit_interval()
    }

    pub fn default_duration(&self) -> f64 {
        self.warmup() + (self.stimulus.period_bits() + 2) as f64 * self.unit_interval()
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.default_duration())
    }

    /// Transmitted bit streams, long enough for `duration`.
    pub fn streams(&self, duration: f64) -> Result<Vec<Vec<bool>>> {
        let periods = pattern_assign(&self.stimulus, self.n)?;
        let nbits = (duration / self.unit_interval()).ceil() as usize + 2;
        Ok(periods.iter().map(|p| cycle(p, nbits)).collect())
    }

    /// Driver source waveforms for the given streams.
    pub fn sources(&self, streams: &[Vec<bool>]) -> Result<Vec<SourceWaveform>> {
        streams
            .iter()
            .zip(&self.drivers)
            .map(|(bits, d)| source_waveform(bits.clone(), self.stimulus.data_rate, d.rise_time, d.levels))
            .collect()
    }

    /// Runs the link's own stimulus for `duration` seconds.
    pub fn run_transient(&self, duration: f64) -> Result<Waveforms> {
        let streams = self.streams(duration)?;
        let sources = self.sources(&streams)?;
        self.run_with_sources(&sources, duration)
    }

    /// Steady state for a logic code on the drivers.
    pub fn dc_solve(&self, code: &LogicCode) -> Result<DcSolution> {
        if code.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: code.len(),
            });
        }
        let vs: Vec<f64> = code
            .bits()
            .iter()
            .zip(&self.drivers)
            .map(|(&b, d)| d.levels.level(b))
            .collect();
        self.dc_with_sources(&vs)
    }

    fn dc_with_sources(&self, vs: &[f64]) -> Result<DcSolution> {
        let n = self.n;
        let j = DVector::from_fn(n, |i, _| self.driver_g[i] * vs[i] + self.g_self[i] * self.vref);
        let mut v = DVector::from_fn(n, |i, _| vs[i]);
        self.dc.solve(&j, &mut v);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("DC solution is not finite".into()));
        }
        let g_self = DVector::from_vec(self.g_self.clone());
        let wire_currents = &self.y_net * &v - g_self * self.vref;
        Ok(DcSolution {
            node_voltages: v,
            wire_currents,
        })
    }

    /// Simulates from a DC steady state until `t_end`. The time grid is
    /// aligned to multiples of `dt` and starts just before the sources'
    /// first edge.
    pub fn run_with_sources(&self, sources: &[SourceWaveform], t_end: f64) -> Result<Waveforms> {
        let n = self.n;
        if sources.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: sources.len(),
            });
        }
        let dt = self.dt;
        let lead = sources.iter().map(|s| -s.quiet_until()).fold(0.0, f64::max);
        let k0 = (lead / dt).ceil();
        let t0 = -k0 * dt;
        if t_end <= t0 || t_end.is_nan() {
            return Err(Error::param("duration must be positive"));
        }
        let steps = ((t_end - t0) / dt).floor() as usize + 1;

        // DC initial state: every segment carries the same node voltages and
        // wire currents; the near port sends v_m + i_m, the far port v_m - i_m.
        let vs0: Vec<f64> = sources.iter().map(|s| s.value(t0)).collect();
        let dc = self.dc_with_sources(&vs0)?;
        let mut near_hist = Vec::with_capacity(self.segments.len());
        let mut far_hist = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let vm = &seg.basis.mi * &dc.node_voltages;
            let im = seg.basis.mv.transpose() * &dc.wire_currents;
            near_hist.push(
                (0..n)
                    .map(|k| History::new(vm[k] + im[k], seg.delay_steps[k]))
                    .collect::<Vec<_>>(),
            );
            far_hist.push(
                (0..n)
                    .map(|k| History::new(vm[k] - im[k], seg.delay_steps[k]))
                    .collect::<Vec<_>>(),
            );
        }

        let nseg = self.segments.len();
        let mut e_near = vec![DVector::<f64>::zeros(n); nseg];
        let mut e_far = vec![DVector::<f64>::zeros(n); nseg];
        let mut volts = vec![DVector::<f64>::zeros(n); nseg + 1];
        let mut j = DVector::<f64>::zeros(n);
        let mut rx = vec![Vec::with_capacity(steps); n];
        let mut tx_current = vec![Vec::with_capacity(steps); n];
        let mut vs = vec![0.0; n];

        for step in 0..steps {
            let t = t0 + step as f64 * dt;
            for (s, seg) in self.segments.iter().enumerate() {
                for k in 0..n {
                    let q = seg.delay_steps[k];
                    e_near[s][k] = far_hist[s][k].delayed(step, q);
                    e_far[s][k] = near_hist[s][k].delayed(step, q);
                }
            }
            for (i, src) in sources.iter().enumerate() {
                vs[i] = src.value(t);
            }

            for (term, sys) in self.terminals.iter().enumerate() {
                j.fill(0.0);
                let v = &mut volts[term];
                if term == 0 {
                    for i in 0..n {
                        j[i] = self.driver_g[i] * vs[i];
                        v[i] = vs[i];
                    }
                }
                if term == nseg {
                    for i in 0..n {
                        j[i] += self.g_self[i] * self.vref;
                    }
                }
                // Norton injection M_iᵀ E of each line end meeting here.
                if term > 0 {
                    j.gemv_tr(1.0, &self.segments[term - 1].basis.mi, &e_far[term - 1], 1.0);
                }
                if term < nseg {
                    j.gemv_tr(1.0, &self.segments[term].basis.mi, &e_near[term], 1.0);
                }
                sys.solve(&j, v);
            }

            for i in 0..n {
                let x = volts[nseg][i];
                if !x.is_finite() {
                    return Err(Error::NonFinite { step, wire: i + 1 });
                }
                rx[i].push(x - self.vref);
            }
            let seg0 = &self.segments[0].basis;
            let itx = &seg0.yc * &volts[0] - seg0.mi.transpose() * &e_near[0];
            for i in 0..n {
                tx_current[i].push(itx[i]);
            }

            for (s, seg) in self.segments.iter().enumerate() {
                let vm_near = &seg.basis.mi * &volts[s];
                let vm_far = &seg.basis.mi * &volts[s + 1];
                for k in 0..n {
                    near_hist[s][k].push(2.0 * vm_near[k] - e_near[s][k]);
                    far_hist[s][k].push(2.0 * vm_far[k] - e_far[s][k]);
                }
            }
        }

        Ok(Waveforms {
            dt,
            start_time: t0,
            rx,
            tx_current,
        })
    }
}

/// A finished simulation of a link's own stimulus.
#[derive(Debug, Clone)]
pub struct LinkRun {
    pub waves: Waveforms,
    pub streams: Vec<Vec<bool>>,
    /// Default sampling latency (nominal link delay), s.
    pub latency: f64,
    pub warmup: f64,
    pub data_rate: f64,
}

/// Builds and runs a link for its configured (or default) duration.
pub fn simulate_link(spec: &LinkSpec) -> Result<LinkRun> {
    let engine = Engine::build(spec)?;
    let duration = engine.duration();
    let window = engine.warmup() + spec.stimulus.period_bits() as f64 * engine.unit_interval();
    if duration < window {
        return Err(Error::validation(
            "link",
            format!("duration {duration:.3e} s is shorter than warmup plus one PRBS period ({window:.3e} s)"),
        ));
    }
    let streams = engine.streams(duration)?;
    let sources = engine.sources(&streams)?;
    let waves = engine.run_with_sources(&sources, duration)?;
    Ok(LinkRun {
        waves,
        streams,
        latency: engine.nominal_delay(),
        warmup: engine.warmup(),
        data_rate: spec.stimulus.data_rate,
    })
}
