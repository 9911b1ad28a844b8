use nalgebra::DMatrix;
use proptest::prelude::*;

use xtalk_core::bundle::{characteristic_impedance, lc_from_admittance};
use xtalk_core::eye::{eye_measure, EyeWindow};
use xtalk_core::fom::{bundle_fom, wire_currents, Levels, LogicCode};
use xtalk_core::linalg::rel_frobenius;
use xtalk_core::mtl::Waveforms;
use xtalk_core::stimulus::{pattern_assign, prbs, PatternMode, StimulusSpec};
use xtalk_core::termination::{
    conductance_histogram, network_admittance, realize_network, reduce_network, Element, ElementKind,
    ReductionPolicy, TerminationNetwork,
};
use xtalk_core::CouplingMatrices;

/// Random physical bundle: SPD inductance, diagonally dominant Maxwellian
/// capacitance.
fn bundle_strategy() -> impl Strategy<Value = CouplingMatrices> {
    (2usize..=12).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(0.0f64..1.0, n * n),
            prop::collection::vec(0.1f64..1.0, n),
        )
            .prop_map(|(n, a, cpl, margin)| {
                let a = DMatrix::from_vec(n, n, a);
                let l = (&a * a.transpose() * 0.3 + DMatrix::identity(n, n)) * 2.5e-7;
                let mut c = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        // Coupling falls off with distance, like a real bundle.
                        let x = -cpl[i * n + j] * 30e-12 / (j - i) as f64;
                        c[(i, j)] = x;
                        c[(j, i)] = x;
                    }
                }
                for i in 0..n {
                    let off: f64 = (0..n).filter(|&j| j != i).map(|j| -c[(i, j)]).sum();
                    c[(i, i)] = off + margin[i] * 100e-12;
                }
                CouplingMatrices::new("random", l, c).unwrap()
            })
    })
}

/// Random network with every self term present and a random subset of
/// cross terms.
fn network_strategy() -> impl Strategy<Value = TerminationNetwork> {
    (2usize..=10).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(20.0f64..2000.0, n),
            prop::collection::vec(prop::option::weighted(0.6, 50.0f64..50_000.0), n * n),
        )
            .prop_map(|(n, selfs, cross)| {
                let mut elements: Vec<Element> = selfs
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| Element {
                        kind: ElementKind::SelfTerm(i),
                        resistance: r,
                    })
                    .collect();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if let Some(r) = cross[i * n + j] {
                            elements.push(Element {
                                kind: ElementKind::Cross(i, j),
                                resistance: r,
                            });
                        }
                    }
                }
                TerminationNetwork::new(n, 0.5, elements).unwrap()
            })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zc_satisfies_telegrapher_identities(b in bundle_strategy()) {
        let (basis, _) = characteristic_impedance(&b).unwrap();
        let zcz = &basis.zc * b.c() * &basis.zc;
        prop_assert!(rel_frobenius(&zcz, b.l()) <= 1e-9);
        let zc_c = &basis.zc * b.c();
        let lc = b.l() * b.c();
        prop_assert!(rel_frobenius(&(&zc_c * &zc_c), &lc) <= 1e-9);
    }

    #[test]
    fn scaling_law(b in bundle_strategy(), alpha in 0.1f64..10.0) {
        let (base, _) = characteristic_impedance(&b).unwrap();
        let scaled = CouplingMatrices::new("scaled", b.l() * alpha, b.c() / alpha).unwrap();
        let (s, _) = characteristic_impedance(&scaled).unwrap();
        prop_assert!(rel_frobenius(&s.zc, &(&base.zc * alpha)) <= 1e-9);
        for k in 0..b.n() {
            prop_assert!((s.m_val[k] - base.m_val[k]).abs() <= 1e-9 * base.m_val[k]);
        }
    }

    #[test]
    fn permutation_equivariance((b, perm) in bundle_strategy().prop_flat_map(|b| { let n = b.n(); (Just(b), permutation(n)) })) {
        let (base, _) = characteristic_impedance(&b).unwrap();
        let (p, _) = characteristic_impedance(&b.permuted(&perm).unwrap()).unwrap();
        let n = b.n();
        let expected = DMatrix::from_fn(n, n, |i, j| base.zc[(perm[i], perm[j])]);
        prop_assert!(rel_frobenius(&p.zc, &expected) <= 1e-9);
    }

    #[test]
    fn decomposition_is_deterministic(b in bundle_strategy()) {
        let (a, ta) = characteristic_impedance(&b).unwrap();
        let (c, tc) = characteristic_impedance(&b).unwrap();
        prop_assert_eq!(a.zc, c.zc);
        prop_assert_eq!(ta.m_vec, tc.m_vec);
    }

    #[test]
    fn termination_round_trip(net in network_strategy()) {
        let y = network_admittance(&net);
        let zc = y.clone().try_inverse().unwrap();
        let back = realize_network(&zc, net.reference_voltage()).unwrap();
        prop_assert_eq!(back.len(), net.len());
        for (a, b) in back.elements().iter().zip(net.elements()) {
            prop_assert_eq!(a.kind, b.kind);
            prop_assert!((a.resistance - b.resistance).abs() <= 1e-8 * b.resistance);
        }
        let bins = conductance_histogram(&net, 16);
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), net.len());
    }

    #[test]
    fn tightening_cutoffs_never_adds(net in network_strategy(), s in 20.0f64..3000.0, c in 50.0f64..60_000.0, fs in 0.1f64..1.0, fc in 0.1f64..1.0) {
        let loose = reduce_network(&net, ReductionPolicy::new(s, c));
        let tight = reduce_network(&net, ReductionPolicy::new(s * fs, c * fc));
        if let (Ok(l), Ok(t)) = (loose, tight) {
            prop_assert!(t.len() <= l.len());
            for e in t.elements() {
                prop_assert!(l.elements().contains(e));
            }
        }
    }

    #[test]
    fn fom_from_zc_matches_realized_network(net in network_strategy()) {
        // A homogeneous bundle whose ideal termination is `net`.
        let b = lc_from_admittance("random", &network_admittance(&net), 1.7e8).unwrap();
        let (basis, _) = characteristic_impedance(&b).unwrap();
        let yc = basis.zc.clone().try_inverse().unwrap();
        let realized = realize_network(&basis.zc, 0.5).unwrap();
        prop_assert_eq!(realized.len(), net.len());
        let a = bundle_fom(&yc, 0.5, Levels::default()).unwrap();
        let c = bundle_fom(&network_admittance(&realized), 0.5, Levels::default()).unwrap();
        for (x, y) in [
            (a.avg_bundle_current, c.avg_bundle_current),
            (a.max_bundle_current, c.max_bundle_current),
            (a.max_wire_current, c.max_wire_current),
            (a.avg_power, c.avg_power),
        ] {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn fom_complement_symmetry(net in network_strategy()) {
        let y = network_admittance(&net);
        let levels = Levels { low: 0.0, high: 1.0 };
        let a = bundle_fom(&y, 0.5, levels).unwrap();
        let b = bundle_fom(&y, 0.5, levels.swapped()).unwrap();
        prop_assert!((a.avg_bundle_current - b.avg_bundle_current).abs() <= 1e-12);
        prop_assert!((a.max_bundle_current - b.max_bundle_current).abs() <= 1e-12);
        prop_assert!((a.max_wire_current - b.max_wire_current).abs() <= 1e-12);
        prop_assert!((a.avg_power - b.avg_power).abs() <= 1e-12);
    }

    #[test]
    fn bundle_current_flows_through_self_resistors(net in network_strategy(), vref in 0.0f64..1.0) {
        let y = network_admittance(&net);
        let g = net.self_conductances();
        let n = net.n();
        for index in 0..(1u64 << n) {
            let code = LogicCode::from_index(index, n);
            let i = wire_currents(&y, &code, vref, Levels::default()).unwrap();
            let v = code.voltages(Levels::default());
            let supply: f64 = (0..n).map(|k| g[k] * (v[k] - vref)).sum();
            prop_assert!((i.sum() - supply).abs() <= 1e-12);
        }
    }

    #[test]
    fn eye_scales_and_ignores_offset(noise in prop::collection::vec(-0.2f64..0.2, 127 * 8), alpha in 0.1f64..10.0, offset in -2.0f64..2.0) {
        let bits = prbs(7, 0x7f).unwrap();
        let per_ui = 8;
        let ui = 62.5e-12;
        let base: Vec<f64> = bits
            .iter()
            .flat_map(|&b| std::iter::repeat_n(if b { 0.5 } else { -0.5 }, per_ui))
            .zip(&noise)
            .map(|(x, n)| x + n)
            .collect();
        let waves = |rx: Vec<f64>| Waveforms { dt: ui / per_ui as f64, start_time: 0.0, rx: vec![rx], tx_current: vec![vec![]] };
        let window = EyeWindow { data_rate: 1.0 / ui, latency: 0.0, warmup: 0.0 };
        let streams = [bits.clone()];
        let e0 = eye_measure(&waves(base.clone()), &streams, &window).unwrap();
        let e1 = eye_measure(&waves(base.iter().map(|x| x * alpha).collect()), &streams, &window).unwrap();
        let e2 = eye_measure(&waves(base.iter().map(|x| x + offset).collect()), &streams, &window).unwrap();
        prop_assert!((e1.min_v - alpha * e0.min_v).abs() <= 1e-12 * alpha.max(1.0));
        prop_assert!((e2.min_v - e0.min_v).abs() <= 1e-12);
    }

    #[test]
    fn patterns_are_deterministic(order in 3u32..=12, seed in 1u32..u32::MAX, n in 1usize..16) {
        for mode in [PatternMode::Worst, PatternMode::Best, PatternMode::Random] {
            let mut spec = StimulusSpec::new(16e9, mode);
            spec.prbs_order = order;
            spec.seed = seed;
            let a = pattern_assign(&spec, n);
            let b = pattern_assign(&spec, n);
            prop_assert_eq!(a.is_ok(), b.is_ok());
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn prbs_autocorrelation() {
    for order in 3..=12 {
        let s = prbs(order, 1).unwrap();
        let p = s.len();
        assert_eq!(p, (1 << order) - 1);
        let x: Vec<f64> = s.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        for lag in 1..p {
            let r: f64 = (0..p).map(|k| x[k] * x[(k + lag) % p]).sum::<f64>() / p as f64;
            assert!((r + 1.0 / p as f64).abs() < 1e-12, "order {order} lag {lag}");
        }
    }
}
