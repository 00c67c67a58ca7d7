//! Finite unions of half-open rational intervals on the half-line.

use num_traits::Zero;

use crate::arith::Rat;

/// Normalized union of half-open intervals: sorted, pairwise disjoint, with
/// touching spans merged and empty spans dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalSet {
    spans: Vec<(Rat, Rat)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { spans: Vec::new() }
    }

    pub fn from_spans(mut spans: Vec<(Rat, Rat)>) -> Self {
        spans.retain(|(a, b)| a < b);
        spans.sort_by(|x, y| x.0.cmp(&y.0));
        let mut merged: Vec<(Rat, Rat)> = Vec::with_capacity(spans.len());
        for (a, b) in spans {
            match merged.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }
        IntervalSet { spans: merged }
    }

    pub fn interval(a: Rat, b: Rat) -> Self {
        Self::from_spans(vec![(a, b)])
    }

    pub fn spans(&self) -> &[(Rat, Rat)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn measure(&self) -> Rat {
        self.spans
            .iter()
            .fold(Rat::zero(), |acc, (a, b)| acc + (b - a))
    }

    pub fn contains_point(&self, x: &Rat) -> bool {
        let idx = self.spans.partition_point(|(a, _)| a <= x);
        idx > 0 && x < &self.spans[idx - 1].1
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut spans = self.spans.clone();
        spans.extend(other.spans.iter().cloned());
        IntervalSet::from_spans(spans)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a1, b1) = &self.spans[i];
            let (a2, b2) = &other.spans[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if b1 <= b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { spans: out }
    }

    pub fn minus(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for (a, b) in &self.spans {
            let mut cur = a.clone();
            for (oa, ob) in &other.spans {
                if ob <= &cur {
                    continue;
                }
                if oa >= b {
                    break;
                }
                if oa > &cur {
                    out.push((cur.clone(), oa.clone()));
                }
                cur = ob.clone();
                if &cur >= b {
                    break;
                }
            }
            if &cur < b {
                out.push((cur, b.clone()));
            }
        }
        IntervalSet::from_spans(out)
    }

    pub fn sym_diff(&self, other: &IntervalSet) -> IntervalSet {
        self.minus(other).union(&other.minus(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn set(spans: &[(i64, i64)]) -> IntervalSet {
        IntervalSet::from_spans(spans.iter().map(|&(a, b)| (rat(a, 1), rat(b, 1))).collect())
    }

    #[test]
    fn normalization_merges_and_drops() {
        let s = IntervalSet::from_spans(vec![
            (rat(3, 1), rat(3, 1)),
            (rat(0, 1), rat(1, 1)),
            (rat(1, 1), rat(2, 1)),
            (rat(5, 1), rat(6, 1)),
        ]);
        assert_eq!(s.spans().len(), 2);
        assert_eq!(s.measure(), rat(3, 1));
    }

    #[test]
    fn set_algebra() {
        let a = set(&[(0, 4), (6, 8)]);
        let b = set(&[(2, 7)]);
        assert_eq!(a.intersect(&b), set(&[(2, 4), (6, 7)]));
        assert_eq!(a.union(&b), set(&[(0, 8)]));
        assert_eq!(a.minus(&b), set(&[(0, 2), (7, 8)]));
        assert_eq!(b.minus(&a), set(&[(4, 6)]));
        assert_eq!(a.sym_diff(&b), set(&[(0, 2), (4, 6), (7, 8)]));
        assert_eq!(
            a.sym_diff(&b).measure(),
            a.measure() + b.measure() - rat(2, 1) * a.intersect(&b).measure()
        );
    }

    #[test]
    fn subtraction_edge_cases() {
        let a = set(&[(0, 10)]);
        let b = set(&[(0, 2), (3, 4), (9, 12)]);
        assert_eq!(a.minus(&b), set(&[(2, 3), (4, 9)]));
        assert_eq!(a.minus(&a), IntervalSet::empty());
        assert_eq!(IntervalSet::empty().minus(&a), IntervalSet::empty());
        assert_eq!(a.minus(&IntervalSet::empty()), a);
        let inner = set(&[(4, 5)]);
        assert_eq!(a.minus(&inner), set(&[(0, 4), (5, 10)]));
    }

    #[test]
    fn point_membership() {
        let a = set(&[(0, 1), (2, 5)]);
        assert!(a.contains_point(&rat(0, 1)));
        assert!(!a.contains_point(&rat(1, 1)));
        assert!(a.contains_point(&rat(9, 2)));
        assert!(!a.contains_point(&rat(5, 1)));
        assert!(!a.contains_point(&rat(-1, 1)));
    }
}
