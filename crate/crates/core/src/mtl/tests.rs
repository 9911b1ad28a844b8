use super::*;
use crate::bundle::characteristic_impedance;
use crate::fixtures::{pair_bundle, scalar_50, stripline_velocity, DATA_RATE, LINK_LENGTH};
use crate::fom::LogicCode;
use crate::stimulus::{source_waveform, PatternMode, SourceWaveform};
use crate::termination::realize_network;

fn link(bundle: CouplingMatrices, net: TerminationNetwork, rs: f64) -> LinkSpec {
    let n = bundle.n();
    LinkSpec {
        segments: vec![Segment::uniform(bundle, LINK_LENGTH)],
        drivers: vec![Driver::with_resistance(rs); n],
        termination: net,
        stimulus: StimulusSpec::new(DATA_RATE, PatternMode::Random),
        timestep: None,
        duration: None,
    }
}

fn matched_pair(rs: f64) -> LinkSpec {
    let bundle = pair_bundle().unwrap();
    let (basis, _) = characteristic_impedance(&bundle).unwrap();
    let net = realize_network(&basis.zc, 0.5).unwrap();
    link(bundle, net, rs)
}

fn step_up(delay: f64) -> SourceWaveform {
    let ui = 1.0 / DATA_RATE;
    let nbits = (delay / ui).ceil() as usize;
    let mut bits = vec![false; nbits];
    bits.push(true);
    source_waveform(bits, DATA_RATE, DEFAULT_RISE_TIME, Levels::default()).unwrap()
}

fn last(w: &[f64]) -> f64 {
    *w.last().unwrap()
}

#[test]
fn pair_modal_delays() {
    let e = Engine::build(&matched_pair(0.0)).unwrap();
    let expected = LINK_LENGTH / stripline_velocity();
    assert!((expected - 587.05e-12).abs() < 0.1e-12);
    for &tau in e.modal_delays(0) {
        assert!((tau - expected).abs() / expected < 1e-9);
    }
}

#[test]
fn single_mode_has_length_over_velocity_delay() {
    let net = TerminationNetwork::uniform_self(1, 0.0, 50.0).unwrap();
    let e = Engine::build(&link(scalar_50().unwrap(), net, 0.0)).unwrap();
    assert_eq!(e.modal_delays(0).len(), 1);
    assert!((e.modal_delays(0)[0] - LINK_LENGTH / stripline_velocity()).abs() < 1e-18);
    let b = e.basis(0);
    assert!((b.zc[(0, 0)] - 50.0).abs() < 1e-9);
}

#[test]
fn matched_line_delays_without_reflection() {
    let net = TerminationNetwork::uniform_self(1, 0.0, 50.0).unwrap();
    let e = Engine::build(&link(scalar_50().unwrap(), net, 0.0)).unwrap();
    let tau = e.modal_delays(0)[0];
    let src = step_up(0.0);
    let w = e.run_with_sources(&[src], 6.0 * tau).unwrap();
    let rx = &w.rx[0];
    // Nothing arrives before one delay.
    for (k, &v) in rx.iter().enumerate() {
        if w.time(k) < tau - DEFAULT_RISE_TIME {
            assert!(v.abs() < 1e-12);
        }
        if w.time(k) > tau + DEFAULT_RISE_TIME {
            assert!((v - 1.0).abs() < 1e-3, "t={} v={v}", w.time(k));
        }
    }
    // Source current settles at 1 V / 50 Ω with no returning reflection.
    for k in 0..w.len() {
        if w.time(k) > DEFAULT_RISE_TIME {
            assert!((w.tx_current[0][k] - 0.02).abs() < 0.02e-3);
        }
    }
}

#[test]
fn series_resistance_divider() {
    let net = TerminationNetwork::uniform_self(1, 0.0, 50.0).unwrap();
    let e = Engine::build(&link(scalar_50().unwrap(), net, 50.0)).unwrap();
    let tau = e.modal_delays(0)[0];
    let w = e.run_with_sources(&[step_up(0.0)], 4.0 * tau).unwrap();
    assert!((last(&w.rx[0]) - 0.5).abs() < 1e-12);
}

#[test]
fn pair_cancellation_currents_and_crosstalk() {
    let e = Engine::build(&matched_pair(0.0)).unwrap();
    let tau = e.modal_delays(0)[0];
    // Wire 1 switches 0 -> 1 while wire 2 holds 1: code (0,1) then (1,1).
    let sources = [step_up(tau), SourceWaveform::constant(1.0)];
    let t_switch = sources[0].bits().len() as f64 / DATA_RATE - 1.0 / DATA_RATE;
    let w = e.run_with_sources(&sources, t_switch + 4.0 * tau).unwrap();
    let before = w.index_at(t_switch - 2.0 * DEFAULT_RISE_TIME).unwrap();
    assert!((w.tx_current[0][before] + 12.5e-3).abs() < 0.005 * 12.5e-3);
    assert!((w.tx_current[1][before] - 12.5e-3).abs() < 0.005 * 12.5e-3);
    let n = w.len() - 1;
    assert!((w.tx_current[0][n] - 6.0e-3).abs() < 0.005 * 6.0e-3);
    assert!((w.tx_current[1][n] - 6.0e-3).abs() < 0.005 * 6.0e-3);
    // Victim stays at its level (relative to vref) while the aggressor switches.
    let dev = w.rx[1].iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    assert!(dev < 0.01, "victim deviation {dev}");
}

#[test]
fn dc_solve_pair() {
    let e = Engine::build(&matched_pair(0.0)).unwrap();
    let dc = e.dc_solve(&LogicCode::new(vec![true, false])).unwrap();
    assert_eq!(dc.node_voltages.as_slice(), &[1.0, 0.0]);
    assert!((dc.wire_currents[0] - 12.5e-3).abs() < 1e-12);
    assert!((dc.wire_currents[1] + 12.5e-3).abs() < 1e-12);
    assert!(matches!(
        e.dc_solve(&LogicCode::new(vec![true])),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn settles_to_dc_solution() {
    // Moderately matched pair: 50 Ω terminations, 25 Ω drivers.
    let spec = link(
        pair_bundle().unwrap(),
        TerminationNetwork::uniform_self(2, 0.5, 50.0).unwrap(),
        25.0,
    );
    let e = Engine::build(&spec).unwrap();
    let tau = e.total_delay();
    let sources = [step_up(0.0), SourceWaveform::constant(0.0)];
    let w = e.run_with_sources(&sources, 10.0 * tau).unwrap();
    let dc = e.dc_solve(&LogicCode::new(vec![true, false])).unwrap();
    for i in 0..2 {
        let want = dc.node_voltages[i] - 0.5;
        assert!((last(&w.rx[i]) - want).abs() < 1e-3, "wire {i}");
    }
}

#[test]
fn uncoupled_bundle_equals_single_lines() {
    let n = 3;
    let v = stripline_velocity();
    let bundle = CouplingMatrices::uncoupled(n, 50.0, v).unwrap();
    let net = TerminationNetwork::uniform_self(n, 0.3, 75.0).unwrap();
    let mut spec = link(bundle, net, 10.0);
    spec.duration = Some(30e-9);
    let multi = Engine::build(&spec).unwrap();
    let streams = multi.streams(30e-9).unwrap();
    let sources = multi.sources(&streams).unwrap();
    let wm = multi.run_with_sources(&sources, 30e-9).unwrap();

    let single = link(
        CouplingMatrices::uncoupled(1, 50.0, v).unwrap(),
        TerminationNetwork::uniform_self(1, 0.3, 75.0).unwrap(),
        10.0,
    );
    let single = Engine::build(&single).unwrap();
    for i in 0..n {
        let ws = single.run_with_sources(&sources[i..=i], 30e-9).unwrap();
        assert_eq!(ws.len(), wm.len());
        let err = ws.rx[0]
            .iter()
            .zip(&wm.rx[i])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "wire {i}: {err}");
    }
}

#[test]
fn splitting_a_segment_changes_little() {
    // Ramp corners falling between samples give an interpolation error of
    // order dt·slope, so this compares at a fine timestep.
    let mut whole = matched_pair(5.0);
    whole.timestep = Some(1.0 / DATA_RATE / 1024.0);
    let mut split = whole.clone();
    let b = split.segments[0].bundle.clone();
    split.segments = vec![
        Segment::uniform(b.clone(), 0.5 * LINK_LENGTH),
        Segment::uniform(b, 0.5 * LINK_LENGTH),
    ];
    let a = simulate_link(&whole).unwrap();
    let c = simulate_link(&split).unwrap();
    let err = a
        .waves
        .rx
        .iter()
        .zip(&c.waves.rx)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "max difference {err}");
}

#[test]
fn wire_count_mismatch() {
    let mut spec = matched_pair(0.0);
    spec.termination = TerminationNetwork::uniform_self(3, 0.5, 50.0).unwrap();
    assert!(matches!(Engine::build(&spec), Err(Error::Validation { .. })));
}

#[test]
fn segment_shorter_than_timestep_is_rejected() {
    let mut spec = matched_pair(0.0);
    spec.segments[0].length = SegmentLength::Uniform(1e-5);
    assert!(matches!(Engine::build(&spec), Err(Error::Validation { .. })));
}

#[test]
fn waveform_csv_round_trip() {
    let mut spec = matched_pair(0.0);
    spec.duration = None;
    let run = simulate_link(&spec).unwrap();
    let csv = run.waves.to_csv();
    assert!(csv.starts_with("time_s,w1,w2\n"));
    let back = Waveforms::from_csv(&csv).unwrap();
    assert_eq!(back.len(), run.waves.len());
    for (a, b) in back.rx.iter().zip(&run.waves.rx) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn deterministic() {
    let spec = matched_pair(1.67);
    let a = simulate_link(&spec).unwrap();
    let b = simulate_link(&spec).unwrap();
    assert_eq!(a.waves, b.waves);
}

#[test]
fn symmetric_pair_keeps_modes_pure() {
    let unmatched = TerminationNetwork::uniform_self(2, 0.5, 50.0).unwrap();
    let e = Engine::build(&link(pair_bundle().unwrap(), unmatched, 10.0)).unwrap();
    let bits = crate::stimulus::prbs(7, 0x7f).unwrap();
    let t_end = 10e-9;
    let source = |levels| source_waveform(bits.clone(), DATA_RATE, DEFAULT_RISE_TIME, levels).unwrap();
    let even = [source(Levels::default()), source(Levels::default())];
    // The inverted wire mirrors its partner about vref at all times,
    // including before the first bit.
    let odd = [source(Levels::default()), source(Levels::default().swapped())];
    for (sources, sign) in [(even, 1.0), (odd, -1.0)] {
        let w = e.run_with_sources(&sources, t_end).unwrap();
        let asym = w.rx[0]
            .iter()
            .zip(&w.rx[1])
            .map(|(a, b)| (a - sign * b).abs())
            .fold(0.0, f64::max);
        assert!(asym <= 1e-9, "sign {sign}: {asym}");
    }
}

#[test]
fn matched_pair_receives_delayed_source() {
    let spec = matched_pair(0.0);
    let e = Engine::build(&spec).unwrap();
    let tau = e.modal_delays(0)[0];
    let streams = e.streams(e.duration()).unwrap();
    let sources = e.sources(&streams).unwrap();
    let w = e.run_with_sources(&sources, e.duration()).unwrap();
    for (i, src) in sources.iter().enumerate() {
        for k in 0..w.len() {
            let want = src.value(w.time(k) - tau) - 0.5;
            assert!((w.rx[i][k] - want).abs() < 0.01, "wire {i} t={}", w.time(k));
        }
    }
}
