//! Crosstalk-cancelling termination synthesis for coupled transmission-line
//! bundles, with a lossless multiconductor link simulator and eye analysis.

pub mod bundle;
pub mod error;
pub mod eye;
pub mod fixtures;
pub mod fom;
pub mod linalg;
pub mod mtl;
pub mod stimulus;
pub mod termination;

/// m/s
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Version of the JSON/CSV file layouts written and read by this crate.
pub const SCHEMA_VERSION: &str = "1";

pub use bundle::{characteristic_impedance, BundleFile, CouplingMatrices, ModalBasis};
pub use error::{Error, Result};
pub use eye::{eye_measure, render_eye, EyeReport, EyeWindow};
pub use fom::{bundle_fom, bundle_fom_sampled, FomReport, Levels, LogicCode};
pub use mtl::{simulate_link, Driver, Engine, LinkSpec, Segment, Waveforms};
pub use stimulus::{pattern_assign, prbs, PatternMode, StimulusSpec};
pub use termination::{realize_network, reduce_network, ReductionPolicy, TerminationNetwork};
