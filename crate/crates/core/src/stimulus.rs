//! PRBS bit streams, per-wire pattern assignment and trapezoidal sources.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::Levels;

/// Offset step (bits) between wires in the random pattern.
pub const RANDOM_OFFSET_STEP: usize = 17;

/// Feedback taps of a maximal-length Fibonacci LFSR for each order 3..=31.
/// `[a, b, c, d]` means `x^a + x^b (+ x^c + x^d) + 1`; zeros are unused.
const TAPS: [[u32; 4]; 29] = [
    [3, 2, 0, 0],
    [4, 3, 0, 0],
    [5, 3, 0, 0],
    [6, 5, 0, 0],
    [7, 6, 0, 0],
    [8, 6, 5, 4],
    [9, 5, 0, 0],
    [10, 7, 0, 0],
    [11, 9, 0, 0],
    [12, 6, 4, 1],
    [13, 4, 3, 1],
    [14, 5, 3, 1],
    [15, 14, 0, 0],
    [16, 15, 13, 4],
    [17, 14, 0, 0],
    [18, 11, 0, 0],
    [19, 6, 2, 1],
    [20, 17, 0, 0],
    [21, 19, 0, 0],
    [22, 21, 0, 0],
    [23, 18, 0, 0],
    [24, 23, 22, 17],
    [25, 22, 0, 0],
    [26, 6, 2, 1],
    [27, 5, 2, 1],
    [28, 25, 0, 0],
    [29, 27, 0, 0],
    [30, 6, 4, 1],
    [31, 28, 0, 0],
];

/// One period (`2^order - 1` bits) of the maximal-length sequence.
///
/// Bit `k-1` of `seed` holds the output `k` steps before the first emitted
/// bit; each new bit is the XOR of the outputs `a`, `b`, ... steps back.
pub fn prbs(order: u32, seed: u32) -> Result<Vec<bool>> {
    if !(3..=31).contains(&order) {
        return Err(Error::param(format!("PRBS order {order} outside 3..=31")));
    }
    let mask = (1u32 << order) - 1;
    let mut state = seed & mask;
    if state == 0 {
        return Err(Error::param(
            "PRBS seed must have a non-zero bit within the register",
        ));
    }
    let taps = TAPS[(order - 3) as usize];
    let period = (1usize << order) - 1;
    let mut out = Vec::with_capacity(period);
    for _ in 0..period {
        let mut bit = 0;
        for &t in taps.iter().filter(|&&t| t != 0) {
            bit ^= (state >> (t - 1)) & 1;
        }
        state = ((state << 1) | bit) & mask;
        out.push(bit == 1);
    }
    Ok(out)
}

/// Relationship between the wires' bit streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternMode {
    /// Every wire carries the same stream (in phase, even-mode-like).
    Worst,
    /// Alternate wires are inverted (odd-mode-like).
    Best,
    /// Wire `i` starts `17·i` bits into the period.
    Random,
}

impl std::str::FromStr for PatternMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst" => Ok(PatternMode::Worst),
            "best" => Ok(PatternMode::Best),
            "random" => Ok(PatternMode::Random),
            other => Err(Error::param(format!("unknown pattern mode `{other}`"))),
        }
    }
}

fn default_order() -> u32 {
    7
}

fn default_seed() -> u32 {
    u32::MAX
}

/// Stimulus block of a link description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    #[serde(rename = "data_rate_bps")]
    pub data_rate: f64,
    #[serde(default = "default_order")]
    pub prbs_order: u32,
    /// Initial register contents; the default (all ones) is masked to the order.
    #[serde(default = "default_seed")]
    pub seed: u32,
    pub mode: PatternMode,
    /// Extra per-wire inversion, XOR-ed with the mode's own inversion.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invert: Vec<bool>,
    /// Extra per-wire offsets in bits, added to the mode's own offsets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offsets: Vec<usize>,
}

impl StimulusSpec {
    pub fn new(data_rate: f64, mode: PatternMode) -> Self {
        StimulusSpec {
            data_rate,
            prbs_order: default_order(),
            seed: default_seed(),
            mode,
            invert: Vec::new(),
            offsets: Vec::new(),
        }
    }

    pub fn unit_interval(&self) -> f64 {
        1.0 / self.data_rate
    }

    pub fn period_bits(&self) -> usize {
        (1usize << self.prbs_order) - 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data_rate > 0.0 && self.data_rate.is_finite()) {
            return Err(Error::validation("stimulus", "data rate must be positive"));
        }
        if !(3..=31).contains(&self.prbs_order) {
            return Err(Error::validation(
                "stimulus",
                format!("PRBS order {} outside 3..=31", self.prbs_order),
            ));
        }
        Ok(())
    }
}

/// One PRBS period per wire, arranged according to the stimulus mode.
pub fn pattern_assign(spec: &StimulusSpec, n: usize) -> Result<Vec<Vec<bool>>> {
    spec.validate()?;
    for (name, len) in [("invert", spec.invert.len()), ("offsets", spec.offsets.len())] {
        if len != 0 && len != n {
            return Err(Error::validation(
                "stimulus",
                format!("`{name}` has {len} entries for {n} wires"),
            ));
        }
    }
    let base = prbs(spec.prbs_order, spec.seed)?;
    let period = base.len();
    Ok((0..n)
        .map(|i| {
            let (mode_offset, mode_invert) = match spec.mode {
                PatternMode::Worst => (0, false),
                PatternMode::Best => (0, i % 2 == 1),
                PatternMode::Random => (i * RANDOM_OFFSET_STEP, false),
            };
            let offset = mode_offset + spec.offsets.get(i).copied().unwrap_or(0);
            let invert = mode_invert ^ spec.invert.get(i).copied().unwrap_or(false);
            (0..period)
                .map(|b| base[(b + offset) % period] ^ invert)
                .collect()
        })
        .collect())
}

/// Repeats a periodic stream out to `len` bits.
pub fn cycle(stream: &[bool], len: usize) -> Vec<bool> {
    stream.iter().copied().cycle().take(len).collect()
}

/// CSV export `wire,bit_index,bit` with 1-based wires.
pub fn streams_csv(streams: &[Vec<bool>]) -> String {
    let mut out = String::from("wire,bit_index,bit\n");
    for (w, s) in streams.iter().enumerate() {
        for (k, &b) in s.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", w + 1, k, b as u8));
        }
    }
    out
}

/// Piecewise-linear driver voltage: one level per bit, with a linear ramp of
/// `rise_time` centered on each bit boundary where the level changes. Before
/// the first bit the source idles at the low level; after the last bit it
/// holds the last level.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceWaveform {
    bits: Vec<bool>,
    bit_period: f64,
    rise_time: f64,
    levels: Levels,
}

pub fn source_waveform(
    bits: Vec<bool>,
    data_rate: f64,
    rise_time: f64,
    levels: Levels,
) -> Result<SourceWaveform> {
    if !(data_rate > 0.0 && data_rate.is_finite()) {
        return Err(Error::param("data rate must be positive"));
    }
    let bit_period = 1.0 / data_rate;
    if !(rise_time >= 0.0 && rise_time < bit_period) {
        return Err(Error::param(format!(
            "rise time {rise_time:e} s must be in [0, bit period {bit_period:e} s)"
        )));
    }
    Ok(SourceWaveform {
        bits,
        bit_period,
        rise_time,
        levels,
    })
}

impl SourceWaveform {
    /// A source that stays at `volts` forever.
    pub fn constant(volts: f64) -> Self {
        SourceWaveform {
            bits: Vec::new(),
            bit_period: 1.0,
            rise_time: 0.0,
            levels: Levels {
                low: volts,
                high: volts,
            },
        }
    }

    fn level_at_bit(&self, k: i64) -> f64 {
        if k < 0 || self.bits.is_empty() {
            return self.levels.low;
        }
        let k = (k as usize).min(self.bits.len() - 1);
        self.levels.level(self.bits[k])
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = t / self.bit_period;
        let boundary = x.round();
        let tb = boundary * self.bit_period;
        let half = 0.5 * self.rise_time;
        let b = boundary as i64;
        if (t - tb).abs() < half {
            let from = self.level_at_bit(b - 1);
            let to = self.level_at_bit(b);
            from + (to - from) * (t - (tb - half)) / self.rise_time
        } else {
            self.level_at_bit(x.floor() as i64)
        }
    }

    /// Time before which the source is constant.
    pub fn quiet_until(&self) -> f64 {
        -0.5 * self.rise_time
    }

    pub fn bit_period(&self) -> f64 {
        self.bit_period
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn levels(&self) -> Levels {
        self.levels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct simulation of the recurrence a[t] = a[t-3] ^ a[t-2].
    fn order3_oracle() -> Vec<u8> {
        let mut a = vec![1u8, 1, 1]; // a[-3], a[-2], a[-1]
        for t in 3..10 {
            a.push(a[t - 3] ^ a[t - 2]);
        }
        a[3..].to_vec()
    }

    #[test]
    fn order3_matches_recurrence() {
        let oracle = order3_oracle();
        assert_eq!(oracle, vec![0, 0, 1, 0, 1, 1, 1]);
        let got: Vec<u8> = prbs(3, 0b111).unwrap().into_iter().map(u8::from).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn prbs7_balance() {
        let s = prbs(7, 0x7f).unwrap();
        assert_eq!(s.len(), 127);
        assert_eq!(s.iter().filter(|&&b| b).count(), 64);
    }

    #[test]
    fn orders_are_maximal_length() {
        for order in 3..=18u32 {
            let s = prbs(order, 1).unwrap();
            let ones = s.iter().filter(|&&b| b).count();
            assert_eq!(ones, 1 << (order - 1), "order {order}");
            // No proper divisor of 2^order - 1 may be a period.
            let p = s.len();
            for d in (1..p).filter(|&d| p.is_multiple_of(d)) {
                assert!(
                    (0..p).any(|k| s[k] != s[(k + d) % p]),
                    "order {order} period divides {d}"
                );
            }
        }
    }

    #[test]
    fn zero_seed_rejected() {
        assert!(prbs(7, 0).is_err());
        assert!(prbs(7, 0x80).is_err()); // bit outside the register
        assert!(prbs(2, 1).is_err());
    }

    #[test]
    fn modes() {
        let mut spec = StimulusSpec::new(16e9, PatternMode::Worst);
        let s = pattern_assign(&spec, 2).unwrap();
        assert_eq!(s[0], s[1]);
        spec.mode = PatternMode::Best;
        let s = pattern_assign(&spec, 2).unwrap();
        assert!(s[0].iter().zip(&s[1]).all(|(a, b)| a != b));
        spec.mode = PatternMode::Random;
        spec.prbs_order = 3;
        let a = pattern_assign(&spec, 3).unwrap();
        let b = pattern_assign(&spec, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_ne!(a[1], a[2]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn extra_masks_apply() {
        let mut spec = StimulusSpec::new(16e9, PatternMode::Worst);
        spec.invert = vec![false, true];
        let s = pattern_assign(&spec, 2).unwrap();
        assert!(s[0].iter().zip(&s[1]).all(|(a, b)| a != b));
        spec.invert = vec![true];
        assert!(pattern_assign(&spec, 2).is_err());
    }

    #[test]
    fn single_one_bit() {
        let w = source_waveform(vec![true], 16e9, 10e-12, Levels::default()).unwrap();
        assert_eq!(w.value(-6e-12), 0.0);
        assert!((w.value(0.0) - 0.5).abs() < 1e-12);
        assert!((w.value(-2.5e-12) - 0.25).abs() < 1e-12);
        assert_eq!(w.value(5e-12), 1.0);
        assert_eq!(w.value(31.25e-12), 1.0);
        assert_eq!(w.value(62.0e-12), 1.0);
    }

    #[test]
    fn all_zero_is_constant() {
        let w = source_waveform(vec![false; 8], 16e9, 10e-12, Levels::default()).unwrap();
        for k in -10..600 {
            assert_eq!(w.value(k as f64 * 1e-12), 0.0);
        }
    }

    #[test]
    fn alternating_train() {
        let bits: Vec<bool> = (0..16).map(|k| k % 2 == 1).collect();
        let w = source_waveform(bits, 16e9, 10e-12, Levels::default()).unwrap();
        let ui = 62.5e-12;
        for k in 1..15 {
            let center = (k as f64 + 0.5) * ui;
            assert_eq!(w.value(center), (k % 2) as f64);
            // Plateau extends to within rise/2 of both boundaries.
            assert_eq!(w.value(center + 0.5 * ui - 5.01e-12), (k % 2) as f64);
            let mid = w.value((k + 1) as f64 * ui);
            assert!((mid - 0.5).abs() < 1e-9);
        }
        // Period of the train is 2 UI = 125 ps.
        for j in 0..100 {
            let t = 2.0 * ui + j as f64 * 1.25e-12;
            assert!((w.value(t) - w.value(t + 125e-12)).abs() < 1e-9);
        }
    }

    #[test]
    fn rise_time_must_fit() {
        assert!(source_waveform(vec![true], 16e9, 62.5e-12, Levels::default()).is_err());
        assert!(source_waveform(vec![true], 16e9, 0.0, Levels::default()).is_ok());
    }

    #[test]
    fn csv_export() {
        let csv = streams_csv(&[vec![true, false]]);
        assert_eq!(csv, "wire,bit_index,bit\n1,0,1\n1,1,0\n");
    }
}
