//! Online confirmation of local extrema on a lightly smoothed series.
//!
//! A candidate `j` is confirmed once its centered moving average is no worse
//! than every smoothed value in `[j - n_p, j)` and strictly better than every
//! one in `(j, j + n_p]`. The first sample is never a candidate. The reported
//! index is the raw extremum inside that neighborhood.

/// Width of the centered moving average.
pub const SMOOTH_WIDTH: usize = 5;
const HALF: usize = SMOOTH_WIDTH / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

impl ExtremumKind {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            ExtremumKind::Min => a < b,
            ExtremumKind::Max => a > b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extremum {
    /// Raw sample index of the extremum.
    pub index: usize,
    /// Index of the sample whose arrival confirmed it.
    pub confirmed_at: usize,
}

#[derive(Debug, Clone)]
pub struct ExtremumDetector {
    kind: ExtremumKind,
    n_p: usize,
    raw: Vec<f64>,
    smooth: Vec<f64>,
    next: usize,
}

impl ExtremumDetector {
    pub fn new(kind: ExtremumKind, n_p: usize) -> Self {
        Self { kind, n_p, raw: Vec::new(), smooth: Vec::new(), next: 1 }
    }

    /// Only candidates at or after `from` are considered.
    pub fn starting_at(kind: ExtremumKind, n_p: usize, from: usize) -> Self {
        Self { next: from.max(1), ..Self::new(kind, n_p) }
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Skips candidates before `from`.
    pub fn skip_to(&mut self, from: usize) {
        self.next = self.next.max(from);
    }

    /// Feeds one sample; returns the next confirmed extremum, if any.
    pub fn push(&mut self, x: f64) -> Option<Extremum> {
        self.raw.push(x);
        // smoothed value i is final once raw[i + HALF] exists
        while self.smooth.len() + HALF < self.raw.len() {
            let i = self.smooth.len();
            let lo = i.saturating_sub(HALF);
            let hi = i + HALF;
            let window = &self.raw[lo..=hi];
            self.smooth.push(window.iter().sum::<f64>() / window.len() as f64);
        }
        while self.next + self.n_p < self.smooth.len() {
            let j = self.next;
            self.next += 1;
            let sj = self.smooth[j];
            let left_ok = (j.saturating_sub(self.n_p)..j).all(|i| !self.kind.better(self.smooth[i], sj));
            let right_ok = ((j + 1)..=(j + self.n_p)).all(|i| self.kind.better(sj, self.smooth[i]));
            if left_ok && right_ok {
                let lo = j.saturating_sub(self.n_p);
                let hi = j + self.n_p;
                let mut best = lo;
                for i in lo..=hi {
                    if self.kind.better(self.raw[i], self.raw[best]) {
                        best = i;
                    }
                }
                return Some(Extremum { index: best, confirmed_at: self.raw.len() - 1 });
            }
        }
        None
    }
}
