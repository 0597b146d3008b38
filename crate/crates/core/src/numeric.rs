//! Small numeric helpers shared by the aggregation code.

/// Neumaier-compensated running sum.
///
/// Callers feed values in a fixed order (ascending publication id) so the
/// result never depends on how the work was scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// `ceil(fraction * n)` robust to binary representation error in `fraction`
/// (0.1 * 30 is 3.0000000000000004 in f64 and must still give 3).
///
/// Never returns less than 1 for `n >= 1` and `fraction > 0`, never more than `n`.
pub fn ceil_fraction(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let x = fraction * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn ceil_fraction_matches_integer_decile() {
        for n in 1..=1000 {
            assert_eq!(ceil_fraction(0.1, n), (n + 9) / 10, "n = {n}");
        }
    }

    #[test]
    fn ceil_fraction_edges() {
        assert_eq!(ceil_fraction(0.1, 0), 0);
        assert_eq!(ceil_fraction(0.5, 3), 2);
        assert_eq!(ceil_fraction(1.0, 7), 7);
        assert_eq!(ceil_fraction(1e-6, 7), 1);
    }
}
