//! Resistive termination networks that realize a characteristic admittance.
//!
//! A symmetric admittance `Y` with non-positive off-diagonal entries is
//! realized by a cross resistor `-1/Y_ij` between every coupled pair and a
//! self resistor `1/Σ_j Y_ij` from each wire to the reference supply.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, spd_inverse};

/// Cross admittances above this value would need a negative resistor.
pub const REALIZABLE_TOL: f64 = 1e-12;
/// Row-sum conductances at or below this value get no self resistor.
pub const SELF_OMIT_TOL: f64 = 1e-15;

/// Where a resistor sits. Wire indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Wire to reference supply.
    SelfTerm(usize),
    /// Wire to wire, `i < j`.
    Cross(usize, usize),
}

impl ElementKind {
    fn sort_key(&self) -> (usize, usize) {
        match *self {
            ElementKind::SelfTerm(i) => (i, i),
            ElementKind::Cross(i, j) => (i, j),
        }
    }

    pub fn is_self(&self) -> bool {
        matches!(self, ElementKind::SelfTerm(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    /// Ω, strictly positive.
    pub resistance: f64,
}

impl Element {
    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance
    }
}

/// Self and cross resistors plus the reference supply voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationNetwork {
    n: usize,
    reference_voltage: f64,
    elements: Vec<Element>,
}

impl TerminationNetwork {
    /// Validates the element list and stores it in canonical order
    /// (row-major over the upper triangle, self element first in each row).
    pub fn new(n: usize, reference_voltage: f64, mut elements: Vec<Element>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("network", "n must be at least 1"));
        }
        if !reference_voltage.is_finite() {
            return Err(Error::validation("network", "reference voltage must be finite"));
        }
        for e in &elements {
            let (i, j) = e.kind.sort_key();
            if j >= n || i > j {
                return Err(Error::validation(
                    "network",
                    format!("element ({}, {}) out of range for {n} wires", i + 1, j + 1),
                ));
            }
            if matches!(e.kind, ElementKind::Cross(a, b) if a >= b) {
                return Err(Error::validation("network", "cross element needs i < j"));
            }
            if !(e.resistance > 0.0 && e.resistance.is_finite()) {
                return Err(Error::validation(
                    "network",
                    format!(
                        "resistance {} at ({}, {}) must be positive and finite",
                        e.resistance,
                        i + 1,
                        j + 1
                    ),
                ));
            }
        }
        elements.sort_by_key(|e| e.kind.sort_key());
        for w in elements.windows(2) {
            if w[0].kind == w[1].kind {
                let (i, j) = w[0].kind.sort_key();
                return Err(Error::validation(
                    "network",
                    format!("duplicate element at ({}, {})", i + 1, j + 1),
                ));
            }
        }
        Ok(TerminationNetwork {
            n,
            reference_voltage,
            elements,
        })
    }

    /// `n` resistors of equal value from each wire to the reference.
    pub fn uniform_self(n: usize, reference_voltage: f64, ohms: f64) -> Result<Self> {
        let elements = (0..n)
            .map(|i| Element {
                kind: ElementKind::SelfTerm(i),
                resistance: ohms,
            })
            .collect();
        Self::new(n, reference_voltage, elements)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reference_voltage(&self) -> f64 {
        self.reference_voltage
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn count_self(&self) -> usize {
        self.elements.iter().filter(|e| e.kind.is_self()).count()
    }

    pub fn count_cross(&self) -> usize {
        self.len() - self.count_self()
    }

    pub fn self_resistance(&self, wire: usize) -> Option<f64> {
        self.elements
            .iter()
            .find(|e| e.kind == ElementKind::SelfTerm(wire))
            .map(|e| e.resistance)
    }

    pub fn cross_resistance(&self, i: usize, j: usize) -> Option<f64> {
        let kind = ElementKind::Cross(i.min(j), i.max(j));
        self.elements
            .iter()
            .find(|e| e.kind == kind)
            .map(|e| e.resistance)
    }

    /// Conductance of each wire's self resistor (0 when absent).
    pub fn self_conductances(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for e in &self.elements {
            if let ElementKind::SelfTerm(i) = e.kind {
                g[i] = e.conductance();
            }
        }
        g
    }

    /// Wires with no resistive path to the reference node.
    pub fn floating_wires(&self) -> Vec<usize> {
        let mut grounded = vec![false; self.n];
        for e in &self.elements {
            if let ElementKind::SelfTerm(i) = e.kind {
                grounded[i] = true;
            }
        }
        // Propagate reachability through cross resistors until stable.
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.elements {
                if let ElementKind::Cross(i, j) = e.kind {
                    if grounded[i] != grounded[j] {
                        grounded[i] = true;
                        grounded[j] = true;
                        changed = true;
                    }
                }
            }
        }
        (0..self.n).filter(|&i| !grounded[i]).collect()
    }

    /// Wires with no incident resistor at all.
    pub fn isolated_wires(&self) -> Vec<usize> {
        let mut touched = vec![false; self.n];
        for e in &self.elements {
            match e.kind {
                ElementKind::SelfTerm(i) => touched[i] = true,
                ElementKind::Cross(i, j) => {
                    touched[i] = true;
                    touched[j] = true;
                }
            }
        }
        (0..self.n).filter(|&i| !touched[i]).collect()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_file_format(&self) -> NetworkFile {
        NetworkFile {
            n: self.n,
            vref: self.reference_voltage,
            elements: self
                .elements
                .iter()
                .map(|e| match e.kind {
                    ElementKind::SelfTerm(i) => ElementRecord {
                        kind: RecordKind::SelfTerm,
                        i: i + 1,
                        j: None,
                        ohms: e.resistance,
                    },
                    ElementKind::Cross(i, j) => ElementRecord {
                        kind: RecordKind::Cross,
                        i: i + 1,
                        j: Some(j + 1),
                        ohms: e.resistance,
                    },
                })
                .collect(),
        }
    }
}

/// On-disk network description with 1-based wire indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub vref: f64,
    pub elements: Vec<ElementRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    #[serde(rename = "self")]
    SelfTerm,
    Cross,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub kind: RecordKind,
    pub i: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    pub ohms: f64,
}

impl TryFrom<NetworkFile> for TerminationNetwork {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let mut elements = Vec::with_capacity(file.elements.len());
        for r in &file.elements {
            if r.i == 0 {
                return Err(Error::validation("network", "wire indices are 1-based"));
            }
            let kind = match (r.kind, r.j) {
                (RecordKind::SelfTerm, None) => ElementKind::SelfTerm(r.i - 1),
                (RecordKind::SelfTerm, Some(j)) if j == r.i => ElementKind::SelfTerm(r.i - 1),
                (RecordKind::Cross, Some(j)) if j >= 1 && j != r.i => {
                    ElementKind::Cross(r.i.min(j) - 1, r.i.max(j) - 1)
                }
                _ => {
                    return Err(Error::validation(
                        "network",
                        format!("malformed element record at wire {}", r.i),
                    ))
                }
            };
            elements.push(Element {
                kind,
                resistance: r.ohms,
            });
        }
        TerminationNetwork::new(file.n, file.vref, elements)
    }
}

/// Cutoffs for dropping high-valued resistors; comparisons are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionPolicy {
    pub self_cutoff: f64,
    pub cross_cutoff: f64,
}

impl ReductionPolicy {
    pub fn new(self_cutoff: f64, cross_cutoff: f64) -> Self {
        ReductionPolicy {
            self_cutoff,
            cross_cutoff,
        }
    }

    /// Cross cutoff at twice the self cutoff: a cross resistor can see twice
    /// the voltage of a self resistor when its wires switch out of phase.
    pub fn factor_of_two(self_cutoff: f64) -> Self {
        Self::new(self_cutoff, 2.0 * self_cutoff)
    }
}

/// Realizes `Z_c⁻¹` as self and cross resistors.
pub fn realize_network(zc: &DMatrix<f64>, reference_voltage: f64) -> Result<TerminationNetwork> {
    let zc = check_symmetric("Zc", zc)?;
    let y = spd_inverse("Zc", &zc)?;
    realize_admittance(&y, reference_voltage)
}

/// Realizes an admittance matrix directly.
pub fn realize_admittance(y: &DMatrix<f64>, reference_voltage: f64) -> Result<TerminationNetwork> {
    let y = check_symmetric("Y", y)?;
    let n = y.nrows();
    let mut elements = Vec::new();
    for i in 0..n {
        let row_sum: f64 = y.row(i).sum();
        if row_sum > SELF_OMIT_TOL {
            elements.push(Element {
                kind: ElementKind::SelfTerm(i),
                resistance: 1.0 / row_sum,
            });
        } else if row_sum < -SELF_OMIT_TOL {
            return Err(Error::NonRealizable {
                i: i + 1,
                j: i + 1,
                value: row_sum,
            });
        } else {
            log::warn!(
                "wire {} needs no self termination; it is referenced only through cross resistors",
                i + 1
            );
        }
        for j in (i + 1)..n {
            let yij = y[(i, j)];
            if yij > REALIZABLE_TOL {
                return Err(Error::NonRealizable {
                    i: i + 1,
                    j: j + 1,
                    value: yij,
                });
            }
            if yij < -REALIZABLE_TOL {
                elements.push(Element {
                    kind: ElementKind::Cross(i, j),
                    resistance: -1.0 / yij,
                });
            }
        }
    }
    let net = TerminationNetwork::new(n, reference_voltage, elements)?;
    for w in net.floating_wires() {
        log::warn!("wire {} has no resistive path to the reference supply", w + 1);
    }
    Ok(net)
}

/// Nodal admittance of the network with the reference node eliminated.
pub fn network_admittance(net: &TerminationNetwork) -> DMatrix<f64> {
    let n = net.n();
    let mut y = DMatrix::zeros(n, n);
    for e in net.elements() {
        let g = e.conductance();
        match e.kind {
            ElementKind::SelfTerm(i) => y[(i, i)] += g,
            ElementKind::Cross(i, j) => {
                y[(i, i)] += g;
                y[(j, j)] += g;
                y[(i, j)] -= g;
                y[(j, i)] -= g;
            }
        }
    }
    y
}

/// Keeps self resistors `<= self_cutoff` and cross resistors `<= cross_cutoff`.
pub fn reduce_network(net: &TerminationNetwork, policy: ReductionPolicy) -> Result<TerminationNetwork> {
    if !(policy.self_cutoff > 0.0 && policy.cross_cutoff > 0.0) {
        return Err(Error::param("cutoffs must be positive"));
    }
    let kept = net
        .elements()
        .iter()
        .filter(|e| {
            let cutoff = if e.kind.is_self() {
                policy.self_cutoff
            } else {
                policy.cross_cutoff
            };
            e.resistance <= cutoff
        })
        .copied()
        .collect();
    let reduced = TerminationNetwork::new(net.n(), net.reference_voltage(), kept)?;
    if let Some(&w) = reduced.isolated_wires().first() {
        return Err(Error::IsolatedWire(w + 1));
    }
    Ok(reduced)
}

/// One histogram bin: geometric bin center (S) and element count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub siemens: f64,
    pub count: usize,
}

/// Histogram of element conductances over `bins` log-spaced bins spanning
/// the smallest to the largest conductance.
pub fn conductance_histogram(net: &TerminationNetwork, bins: usize) -> Vec<HistogramBin> {
    let g: Vec<f64> = net.elements().iter().map(Element::conductance).collect();
    if g.is_empty() || bins == 0 {
        return Vec::new();
    }
    let mut lo = g.iter().copied().fold(f64::INFINITY, f64::min).ln();
    let mut hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max).ln();
    if hi - lo < 1e-12 {
        lo -= std::f64::consts::LN_2;
        hi += std::f64::consts::LN_2;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in g {
        let pos = ((x.ln() - lo) / width).floor();
        let idx = if pos < 0.0 {
            0
        } else {
            (pos as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            siemens: (lo + (k as f64 + 0.5) * width).exp(),
            count,
        })
        .collect()
}

/// CSV rendering `siemens,count`.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("siemens,count\n");
    for b in bins {
        out.push_str(&format!("{:.6e},{}\n", b.siemens, b.count));
    }
    out
}
