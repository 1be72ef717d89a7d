//! Deterministic accumulation of sample moments.
//!
//! Ensembles are cut into fixed-size chunks independent of the thread count;
//! each chunk is reduced sequentially and chunk results are merged in index
//! order with compensated (Neumaier) summation, so reports are bit-identical
//! however many worker threads run.

use rayon::prelude::*;

/// Paths per accumulation chunk.
pub const CHUNK_SIZE: usize = 2048;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Count, sum and sum of squares of a sample, plus the number of nonzero
/// observations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub nonzero: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        if x != 0.0 {
            self.nonzero += 1;
        }
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.nonzero += other.nonzero;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance, clamped at zero.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let s = self.sum.value();
        ((self.sum_sq.value() - s * s / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Runs `per_item` over `items` in fixed chunks, each chunk filling `width`
/// accumulators, and merges chunks in order.
pub fn accumulate<T, F>(items: &[T], width: usize, per_item: F) -> Vec<Moments>
where
    T: Sync,
    F: Fn(&T, &mut [Moments]) + Sync,
{
    let partials: Vec<Vec<Moments>> = items
        .par_chunks(CHUNK_SIZE)
        .map(|chunk| {
            let mut acc = vec![Moments::default(); width];
            for item in chunk {
                per_item(item, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}
