//! Mergeable running moments for Monte Carlo estimates.

use crate::C64;

/// Welford accumulator for a real-valued statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. parallel combination.
    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningMean {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Complex mean with standard error `sqrt(E|x - mean|² / n)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexRunningMean {
    re: RunningMean,
    im: RunningMean,
}

impl ComplexRunningMean {
    pub fn push(&mut self, z: C64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn count(&self) -> u64 {
        self.re.count()
    }

    pub fn mean(&self) -> C64 {
        C64::new(self.re.mean(), self.im.mean())
    }

    pub fn stderr(&self) -> f64 {
        self.re.stderr().hypot(self.im.stderr())
    }
}

/// Merge accumulators left to right. The order is fixed by the caller, so the
/// result is independent of which thread produced each partial.
pub fn merge_in_order<'a, T, I>(parts: I) -> T
where
    T: Default + Clone + 'a + Mergeable,
    I: IntoIterator<Item = &'a T>,
{
    let mut acc = T::default();
    for p in parts {
        acc.merge_from(p);
    }
    acc
}

pub trait Mergeable {
    fn merge_from(&mut self, other: &Self);
}

impl Mergeable for RunningMean {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
}

impl Mergeable for ComplexRunningMean {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let acc: RunningMean = std::iter::repeat_n(2.5, 10).collect();
        assert_eq!(acc.mean(), 2.5);
        assert_eq!(acc.stderr(), 0.0);
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let whole: RunningMean = xs.iter().copied().collect();
            let mut left: RunningMean = xs[..split].iter().copied().collect();
            let right: RunningMean = xs[split..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - whole.mean()).abs() < 1e-9);
            prop_assert!((left.variance() - whole.variance()).abs() < 1e-6 * whole.variance().max(1.0));
        }
    }
}
