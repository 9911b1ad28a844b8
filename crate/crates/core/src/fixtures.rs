//! Shipped reference bundles and the 12-wire termination value list.
//!
//! The 6- and 12-wire bundles are synthetic stand-ins for a measured
//! stackup: homogeneous stripline (`v = c/√3`) with coupling chosen to match
//! known odd/even impedances or a known termination list.

use nalgebra::DMatrix;

use crate::bundle::{lc_from_admittance, lc_from_impedance, CouplingMatrices};
use crate::error::Result;
use crate::termination::{network_admittance, Element, ElementKind, TerminationNetwork};
use crate::SPEED_OF_LIGHT;

/// Propagation velocity in a homogeneous εr = 3 dielectric.
pub fn stripline_velocity() -> f64 {
    SPEED_OF_LIGHT / 3f64.sqrt()
}

/// Link length used throughout the experiments: 4 inches.
pub const LINK_LENGTH: f64 = 0.1016;

/// Data rate of the experiments, 16 Gb/s.
pub const DATA_RATE: f64 = 16e9;

/// Value assigned to the unlisted (NA) entries when a complete network is
/// needed.
pub const NA_FILL_OHMS: f64 = 250e3;

/// One entry of the 12-wire list. Wires are 1-based, `i == j` is a self
/// resistor. `ohms` is `None` where the list has no value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub i: usize,
    pub j: usize,
    pub ohms: Option<f64>,
    /// Not in the original list. Filled in from the bundle's
    /// mirror/rotation symmetry, or for R6_7 by analogy with R1_2 and R11_12.
    pub reconstructed: bool,
}

const fn e(i: usize, j: usize, ohms: f64) -> TableEntry {
    TableEntry {
        i,
        j,
        ohms: Some(ohms),
        reconstructed: false,
    }
}

const fn na(i: usize, j: usize) -> TableEntry {
    TableEntry {
        i,
        j,
        ohms: None,
        reconstructed: false,
    }
}

const fn r(i: usize, j: usize, ohms: Option<f64>) -> TableEntry {
    TableEntry {
        i,
        j,
        ohms,
        reconstructed: true,
    }
}

#[rustfmt::skip]
pub const TWELVE_WIRE_LIST: [TableEntry; 78] = [
    e(1, 1, 110.85721), e(1, 2, 663.03745), e(1, 3, 252.17476), e(1, 4, 284.86464),
    e(1, 5, 17371.75169), e(1, 6, 2017.01452), e(1, 7, 20628.10818), e(1, 8, 15324.10950),
    e(1, 9, 79597.11234), na(1, 10), na(1, 11), na(1, 12),
    e(2, 2, 110.85727), e(2, 3, 17371.80328), e(2, 4, 284.86474), e(2, 5, 252.17483),
    e(2, 6, 20628.38651), e(2, 7, 2017.00556), na(2, 8), e(2, 9, 79606.24676),
    e(2, 10, 15323.60895), na(2, 11), na(2, 12),
    r(3, 3, Some(224.54736)), r(3, 4, Some(642.15035)), r(3, 5, None), r(3, 6, Some(249.31422)),
    r(3, 7, Some(17101.09114)), r(3, 8, Some(568.14056)), r(3, 9, Some(14788.58366)), r(3, 10, None),
    r(3, 11, Some(15318.32199)), r(3, 12, None),
    e(4, 4, 1417.93431), e(4, 5, 642.15035), e(4, 6, 284.48164), e(4, 7, 284.48160),
    e(4, 8, 14789.49541), e(4, 9, 2108.17695), e(4, 10, 14789.61216), e(4, 11, 79603.82438),
    e(4, 12, 79601.53980),
    e(5, 5, 224.54736), e(5, 6, 17101.09114), e(5, 7, 249.31422), na(5, 8),
    e(5, 9, 14788.58366), e(5, 10, 568.14056), na(5, 11), e(5, 12, 15318.32199),
    r(6, 6, Some(1942.00554)), r(6, 7, Some(663.05)), r(6, 8, Some(249.30967)), r(6, 9, Some(284.48133)),
    r(6, 10, Some(17101.36652)), r(6, 11, Some(2016.97112)), r(6, 12, Some(20628.62871)),
    e(7, 7, 1942.00554), e(7, 8, 17101.36652), e(7, 9, 284.48133), e(7, 10, 249.30967),
    e(7, 11, 20628.62871), e(7, 12, 2016.97112),
    e(8, 8, 224.59869), e(8, 9, 642.13988), na(8, 10), e(8, 11, 252.17010),
    e(8, 12, 17372.40969),
    r(9, 9, Some(1417.93431)), r(9, 10, Some(642.13988)), r(9, 11, Some(284.86474)), r(9, 12, Some(284.86464)),
    e(10, 10, 224.59879), e(10, 11, 17372.18870), e(10, 12, 252.17002),
    e(11, 11, 110.84691), e(11, 12, 663.07539),
    e(12, 12, 110.84690),
];

fn element(entry: &TableEntry, ohms: f64) -> Element {
    let kind = if entry.i == entry.j {
        ElementKind::SelfTerm(entry.i - 1)
    } else {
        ElementKind::Cross(entry.i - 1, entry.j - 1)
    };
    Element {
        kind,
        resistance: ohms,
    }
}

/// The 66 listed resistors, reference voltage 0.
pub fn twelve_wire_list() -> Result<TerminationNetwork> {
    let elements = TWELVE_WIRE_LIST
        .iter()
        .filter_map(|t| t.ohms.map(|o| element(t, o)))
        .collect();
    TerminationNetwork::new(12, 0.0, elements)
}

/// All 78 positions, with NA entries filled by [`NA_FILL_OHMS`].
pub fn twelve_wire_full_list() -> Result<TerminationNetwork> {
    let elements = TWELVE_WIRE_LIST
        .iter()
        .map(|t| element(t, t.ohms.unwrap_or(NA_FILL_OHMS)))
        .collect();
    TerminationNetwork::new(12, 0.0, elements)
}

/// Single 50 Ω line.
pub fn scalar_50() -> Result<CouplingMatrices> {
    Ok(CouplingMatrices::uncoupled(1, 50.0, stripline_velocity())?.with_name("scalar-50"))
}

/// Coupled pair with `Z_odd = 40 Ω`, `Z_even = 83.33 Ω`.
pub fn pair_bundle() -> Result<CouplingMatrices> {
    let (z_even, z_odd) = (250.0 / 3.0, 40.0);
    let zs = 0.5 * (z_even + z_odd);
    let zm = 0.5 * (z_even - z_odd);
    let zc = DMatrix::from_row_slice(2, 2, &[zs, zm, zm, zs]);
    lc_from_impedance("pair", &zc, stripline_velocity())
}

/// Three independent layers of two wires, each pair at 47 Ω odd / 55 Ω even.
pub fn six_wire_bundle() -> Result<CouplingMatrices> {
    let mut zc = DMatrix::zeros(6, 6);
    for layer in 0..3 {
        let a = 2 * layer;
        zc[(a, a)] = 51.0;
        zc[(a + 1, a + 1)] = 51.0;
        zc[(a, a + 1)] = 4.0;
        zc[(a + 1, a)] = 4.0;
    }
    lc_from_impedance("six-wire", &zc, stripline_velocity())
}

/// Strongly coupled 12-wire bundle whose ideal termination is the full
/// 78-element list (NA entries at 250 kΩ).
pub fn twelve_wire_bundle() -> Result<CouplingMatrices> {
    let y = network_admittance(&twelve_wire_full_list()?);
    lc_from_admittance("twelve-wire", &y, stripline_velocity())
}
