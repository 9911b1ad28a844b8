/// Ring buffer of one port's outgoing wave samples, read back at a
/// fractional delay with linear interpolation. Indices before the first
/// stored sample return the initial (DC) value.
#[derive(Debug, Clone)]
pub(crate) struct History {
    init: f64,
    buf: Vec<f64>,
    len: usize,
}

impl History {
    pub(crate) fn new(init: f64, delay_steps: f64) -> Self {
        let cap = delay_steps.ceil() as usize + 2;
        History {
            init,
            buf: vec![init; cap],
            len: 0,
        }
    }

    pub(crate) fn push(&mut self, value: f64) {
        let cap = self.buf.len();
        self.buf[self.len % cap] = value;
        self.len += 1;
    }

    fn get(&self, index: i64) -> f64 {
        if index < 0 {
            return self.init;
        }
        let index = index as usize;
        debug_assert!(index < self.len && index + self.buf.len() > self.len);
        self.buf[index % self.buf.len()]
    }

    /// Value at step `step - delay_steps`; requires `delay_steps >= 1`.
    pub(crate) fn delayed(&self, step: usize, delay_steps: f64) -> f64 {
        let p = step as f64 - delay_steps;
        let base = p.floor();
        let frac = p - base;
        let i0 = base as i64;
        if frac == 0.0 {
            self.get(i0)
        } else {
            (1.0 - frac) * self.get(i0) + frac * self.get(i0 + 1)
        }
    }
}
