//! Shared inputs for the criterion benchmarks in `benches/`.

use xtalk_core::bundle::characteristic_impedance;
use xtalk_core::fixtures::{twelve_wire_bundle, DATA_RATE, LINK_LENGTH};
use xtalk_core::mtl::{Driver, LinkSpec, Segment};
use xtalk_core::stimulus::{PatternMode, StimulusSpec};
use xtalk_core::termination::realize_network;

/// The 12-wire link with its full cancellation network, random pattern.
pub fn twelve_wire_link() -> LinkSpec {
    let bundle = twelve_wire_bundle().expect("fixture");
    let (basis, _) = characteristic_impedance(&bundle).expect("fixture decomposes");
    let termination = realize_network(&basis.zc, 0.5).expect("fixture is realizable");
    LinkSpec {
        segments: vec![Segment::uniform(bundle, LINK_LENGTH)],
        drivers: vec![Driver::with_resistance(1.67); 12],
        termination,
        stimulus: StimulusSpec::new(DATA_RATE, PatternMode::Random),
        timestep: None,
        duration: None,
    }
}
