//! Switching-current and power figures of merit over all logic codes.
//!
//! For a code with driven levels `v`, the launched wire currents are
//! `I = Y (v - vref·1)`. Cross-resistor currents cancel in the bundle sum, so
//! `1ᵀI` is the current returned through the reference supply.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::check_symmetric;

/// Largest bundle enumerated exhaustively.
pub const ENUMERATION_CAP: usize = 20;

const CHUNK: u64 = 1 << 12;

/// Logic-low and logic-high driver voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub low: f64,
    pub high: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Levels { low: 0.0, high: 1.0 }
    }
}

impl Levels {
    pub fn level(&self, bit: bool) -> f64 {
        if bit {
            self.high
        } else {
            self.low
        }
    }

    pub fn swing(&self) -> f64 {
        (self.high - self.low).abs()
    }

    pub fn swapped(&self) -> Self {
        Levels {
            low: self.high,
            high: self.low,
        }
    }
}

/// One logic state of the bundle; bit `i` drives wire `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogicCode {
    bits: Vec<bool>,
}

impl LogicCode {
    pub fn new(bits: Vec<bool>) -> Self {
        LogicCode { bits }
    }

    /// Code number `index` with wire 1 as the least significant bit.
    pub fn from_index(index: u64, n: usize) -> Self {
        LogicCode {
            bits: (0..n).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn complement(&self) -> Self {
        LogicCode {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn voltages(&self, levels: Levels) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.bits.iter().map(|&b| levels.level(b)))
    }
}

/// Figure-of-merit summary; currents in A, power in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomReport {
    pub avg_bundle_current: f64,
    pub max_bundle_current: f64,
    pub max_wire_current: f64,
    pub avg_power: f64,
    pub n_codes: u64,
}

/// Monte Carlo estimate for bundles beyond the enumeration cap. The maxima
/// are sample maxima, hence lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomEstimate {
    pub report: FomReport,
    pub avg_bundle_current_stderr: f64,
    pub avg_power_stderr: f64,
    pub seed: u64,
}

fn check_y(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric("Y", y)
}

/// Wire currents for one code.
pub fn wire_currents(y: &DMatrix<f64>, code: &LogicCode, vref: f64, levels: Levels) -> Result<DVector<f64>> {
    if code.len() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            found: code.len(),
        });
    }
    let y = check_y(y)?;
    let dv = code.voltages(levels).add_scalar(-vref);
    Ok(y * dv)
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    sum_abs_bundle: f64,
    sum_power: f64,
    max_bundle: f64,
    max_wire: f64,
}

impl Partial {
    fn merge(self, o: Partial) -> Partial {
        Partial {
            sum_abs_bundle: self.sum_abs_bundle + o.sum_abs_bundle,
            sum_power: self.sum_power + o.sum_power,
            max_bundle: self.max_bundle.max(o.max_bundle),
            max_wire: self.max_wire.max(o.max_wire),
        }
    }
}

/// Evaluates one code into `current`; returns (bundle current, power).
#[inline]
fn eval_code(y: &DMatrix<f64>, dv: &[f64], current: &mut [f64]) -> (f64, f64) {
    let n = dv.len();
    for (i, out) in current.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..n {
            acc += y[(i, j)] * dv[j];
        }
        *out = acc;
    }
    let bundle: f64 = current.iter().sum();
    let power: f64 = current.iter().zip(dv).map(|(i, v)| i * v).sum();
    (bundle, power)
}

fn fill_dv(index: u64, lo: f64, hi: f64, dv: &mut [f64]) {
    for (i, d) in dv.iter_mut().enumerate() {
        *d = if (index >> i) & 1 == 1 { hi } else { lo };
    }
}

/// Exhaustive figures of merit over all `2^n` codes.
///
/// Codes are processed in fixed-size chunks whose partial sums are reduced in
/// chunk order, so the result does not depend on the thread count.
pub fn bundle_fom(y: &DMatrix<f64>, vref: f64, levels: Levels) -> Result<FomReport> {
    let y = check_y(y)?;
    let n = y.nrows();
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let total = 1u64 << n;
    let (lo, hi) = (levels.low - vref, levels.high - vref);
    let chunks = total.div_ceil(CHUNK);

    let partials: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut dv = vec![0.0; n];
            let mut cur = vec![0.0; n];
            let mut p = Partial::default();
            for index in (c * CHUNK)..((c + 1) * CHUNK).min(total) {
                fill_dv(index, lo, hi, &mut dv);
                let (bundle, power) = eval_code(&y, &dv, &mut cur);
                p.sum_abs_bundle += bundle.abs();
                p.sum_power += power;
                p.max_bundle = p.max_bundle.max(bundle.abs());
                p.max_wire = cur.iter().fold(p.max_wire, |m, x| m.max(x.abs()));
            }
            p
        })
        .collect();
    let p = partials.into_iter().fold(Partial::default(), Partial::merge);

    Ok(FomReport {
        avg_bundle_current: p.sum_abs_bundle / total as f64,
        max_bundle_current: p.max_bundle,
        max_wire_current: p.max_wire,
        avg_power: p.sum_power / total as f64,
        n_codes: total,
    })
}

/// Seeded Monte Carlo estimate over `samples` uniformly drawn codes.
pub fn bundle_fom_sampled(
    y: &DMatrix<f64>,
    vref: f64,
    levels: Levels,
    samples: u64,
    seed: u64,
) -> Result<FomEstimate> {
    if samples < 2 {
        return Err(Error::param("need at least 2 samples"));
    }
    let y = check_y(y)?;
    let n = y.nrows();
    let (lo, hi) = (levels.low - vref, levels.high - vref);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dv = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let (mut s1, mut s2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
    let (mut max_bundle, mut max_wire) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        for d in dv.iter_mut() {
            *d = if rng.random::<bool>() { hi } else { lo };
        }
        let (bundle, power) = eval_code(&y, &dv, &mut cur);
        let b = bundle.abs();
        s1 += b;
        s2 += b * b;
        p1 += power;
        p2 += power * power;
        max_bundle = max_bundle.max(b);
        max_wire = cur.iter().fold(max_wire, |m, x| m.max(x.abs()));
    }
    let k = samples as f64;
    let stderr = |s: f64, ss: f64| {
        let mean = s / k;
        ((ss / k - mean * mean).max(0.0) * k / (k - 1.0) / k).sqrt()
    };
    Ok(FomEstimate {
        report: FomReport {
            avg_bundle_current: s1 / k,
            max_bundle_current: max_bundle,
            max_wire_current: max_wire,
            avg_power: p1 / k,
            n_codes: samples,
        },
        avg_bundle_current_stderr: stderr(s1, s2),
        avg_power_stderr: stderr(p1, p2),
        seed,
    })
}

/// Per-code wire currents, one row per code index.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeTable {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl CodeTable {
    /// CSV with header `code,i1..in`, currents in A.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("code");
        for i in 1..=self.n {
            out.push_str(&format!(",i{i}"));
        }
        out.push('\n');
        for (code, row) in self.rows.iter().enumerate() {
            out.push_str(&code.to_string());
            for x in row {
                out.push_str(&format!(",{x:.9e}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn code_table(y: &DMatrix<f64>, vref: f64, levels: Levels) -> Result<CodeTable> {
    let y = check_y(y)?;
    let n = y.nrows();
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let (lo, hi) = (levels.low - vref, levels.high - vref);
    let rows = (0..(1u64 << n))
        .into_par_iter()
        .map(|index| {
            let mut dv = vec![0.0; n];
            let mut cur = vec![0.0; n];
            fill_dv(index, lo, hi, &mut dv);
            eval_code(&y, &dv, &mut cur);
            cur
        })
        .collect();
    Ok(CodeTable { n, rows })
}
