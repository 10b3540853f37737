//! Compensated summation.

/// Neumaier's variant of Kahan summation.
///
/// Also accumulates `sum |x_i|`, which callers use to scale error bounds.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    abs_sum: f64,
    terms: usize,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs_sum += x.abs();
        self.terms += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Rounding error of the summation itself (not of the terms):
    /// `2 eps |s| + O(n eps^2) sum |x_i|` for Neumaier summation.
    pub fn rounding_bound(&self) -> f64 {
        let eps = f64::EPSILON;
        2.0 * eps * self.value().abs() + 2.0 * (self.terms as f64) * eps * eps * self.abs_sum
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        s.extend(iter);
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let s: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
        assert_eq!(s.terms(), 4);
        let naive: f64 = [1.0, 1e100, 1.0, -1e100].iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn many_small_terms() {
        let s = compensated_sum(std::iter::repeat_n(0.1, 1_000_000));
        assert!((s - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn empty_is_zero() {
        let s = CompensatedSum::new();
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.rounding_bound(), 0.0);
    }
}
