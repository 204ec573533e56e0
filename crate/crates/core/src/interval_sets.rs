//! Bounded intervals with independently open/closed ends, and elementary sets
//! (finite unions of pairwise disjoint intervals) kept in minimal form.
//!
//! Every set operation goes through one routine: collect all endpoints, sample
//! membership at each endpoint and on each open gap between consecutive
//! endpoints, then read maximal runs back as intervals. Runs are maximal, so
//! the output is always the minimal decomposition.

use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{fmt_rational, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    /// Fails when `lo > hi`, or when `lo == hi` with an open end (the interval
    /// would be empty).
    pub fn new(lo: Rational, hi: Rational, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInterval(format!(
                "lower end {} exceeds upper end {}",
                fmt_rational(&lo),
                fmt_rational(&hi)
            )));
        }
        if lo == hi && !(lo_closed && hi_closed) {
            return Err(Error::InvalidInterval(format!(
                "degenerate interval at {} must be closed on both ends",
                fmt_rational(&lo)
            )));
        }
        Ok(Interval { lo, hi, lo_closed, hi_closed })
    }

    pub fn closed(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn open(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    pub fn closed_open(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(lo, hi, true, false)
    }

    pub fn open_closed(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(lo, hi, false, true)
    }

    /// Open interval with `lo < hi` already established by the caller.
    pub(crate) fn open_unchecked(lo: Rational, hi: Rational) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn singleton(c: Rational) -> Self {
        Interval { lo: c.clone(), hi: c, lo_closed: true, hi_closed: true }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn infimum(&self) -> &Rational {
        &self.lo
    }

    pub fn supremum(&self) -> &Rational {
        &self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_closed(&self) -> bool {
        self.lo_closed && self.hi_closed
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let above = if self.lo_closed { *t >= self.lo } else { *t > self.lo };
        let below = if self.hi_closed { *t <= self.hi } else { *t < self.hi };
        above && below
    }

    /// Closed hull `[lo, hi]`.
    pub fn closure(&self) -> Interval {
        Interval { lo: self.lo.clone(), hi: self.hi.clone(), lo_closed: true, hi_closed: true }
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        let (lo, lo_closed) = if self.lo > other.lo {
            (&self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (&other.lo, other.lo_closed)
        } else {
            (&self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (&self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (&other.hi, other.hi_closed)
        } else {
            (&self.hi, self.hi_closed && other.hi_closed)
        };
        lo < hi || (lo == hi && lo_closed && hi_closed)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_singleton() {
            return write!(f, "{{{}}}", fmt_rational(&self.lo));
        }
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            fmt_rational(&self.lo),
            fmt_rational(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Finite union of pairwise disjoint bounded intervals, stored as its minimal
/// decomposition sorted by lower end.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ElementarySet {
    components: Vec<Interval>,
}

impl ElementarySet {
    pub fn empty() -> Self {
        ElementarySet { components: Vec::new() }
    }

    pub fn from_interval(i: Interval) -> Self {
        ElementarySet { components: vec![i] }
    }

    /// Minimal decomposition of a union of pairwise disjoint intervals.
    /// Adjacent pieces are merged; overlapping ones are rejected.
    pub fn normalize(intervals: &[Interval]) -> Result<Self> {
        for (i, a) in intervals.iter().enumerate() {
            for b in &intervals[i + 1..] {
                if a.intersects(b) {
                    return Err(Error::OverlappingComponents(a.to_string(), b.to_string()));
                }
            }
        }
        let points = endpoints(intervals.iter());
        Ok(Self::from_membership(&points, |t| intervals.iter().any(|i| i.contains(t))))
    }

    /// Components known to be sorted, disjoint and not adjacent.
    pub(crate) fn from_sorted_unchecked(components: Vec<Interval>) -> Self {
        ElementarySet { components }
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, t: &Rational) -> bool {
        // components are sorted and disjoint
        let idx = self.components.partition_point(|c| c.hi < *t);
        self.components[idx..].iter().take(2).any(|c| c.contains(t))
    }

    /// Sorted, deduplicated endpoints of all components.
    pub fn endpoints(&self) -> Vec<Rational> {
        endpoints(self.components.iter())
    }

    pub fn infimum(&self) -> Option<&Rational> {
        self.components.first().map(|c| &c.lo)
    }

    pub fn supremum(&self) -> Option<&Rational> {
        self.components.last().map(|c| &c.hi)
    }

    /// Total length (Lebesgue measure).
    pub fn length(&self) -> Rational {
        self.components.iter().fold(Rational::zero(), |acc, c| acc + c.length())
    }

    pub fn union(&self, other: &ElementarySet) -> ElementarySet {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersect(&self, other: &ElementarySet) -> ElementarySet {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &ElementarySet) -> ElementarySet {
        self.combine(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &ElementarySet) -> bool {
        self.difference(other).is_empty()
    }

    /// `hull \ self`; requires `self ⊆ hull`.
    pub fn complement_in(&self, hull: &Interval) -> Result<ElementarySet> {
        let hull_set = ElementarySet::from_interval(hull.clone());
        if !self.is_subset_of(&hull_set) {
            return Err(Error::NotContained { set: self.to_string(), hull: hull.to_string() });
        }
        Ok(hull_set.difference(self))
    }

    fn combine(&self, other: &ElementarySet, op: impl Fn(bool, bool) -> bool) -> ElementarySet {
        let points = endpoints(self.components.iter().chain(other.components.iter()));
        Self::from_membership(&points, |t| op(self.contains(t), other.contains(t)))
    }

    /// Reads a set back from membership at `points` (sorted, unique) and at
    /// the midpoints of the gaps between them. Membership outside
    /// `[points[0], points[last]]` is taken to be false.
    pub(crate) fn from_membership(points: &[Rational], member: impl Fn(&Rational) -> bool) -> Self {
        // slots: point 0, gap 0, point 1, gap 1, ..., point k
        let n = points.len();
        if n == 0 {
            return Self::empty();
        }
        let two = Rational::from_integer(2.into());
        let mut slots = Vec::with_capacity(2 * n - 1);
        for i in 0..n {
            slots.push(member(&points[i]));
            if i + 1 < n {
                let mid = (&points[i] + &points[i + 1]) / &two;
                slots.push(member(&mid));
            }
        }
        let mut components = Vec::new();
        let mut s = 0;
        while s < slots.len() {
            if !slots[s] {
                s += 1;
                continue;
            }
            let start = s;
            while s + 1 < slots.len() && slots[s + 1] {
                s += 1;
            }
            let end = s;
            let lo = points[start / 2].clone();
            let lo_closed = start % 2 == 0;
            let (hi, hi_closed) =
                if end % 2 == 0 { (points[end / 2].clone(), true) } else { (points[end / 2 + 1].clone(), false) };
            components.push(Interval { lo, hi, lo_closed, hi_closed });
            s += 1;
        }
        ElementarySet { components }
    }
}

/// Open intervals `(lo/den, hi/den)` with integer ends, sorted and pairwise
/// disjoint; a compact carrier for large self-similar sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct GridSet {
    pub den: i128,
    pub comps: Vec<(i128, i128)>,
}

impl GridSet {
    pub fn at(&self, n: i128) -> Rational {
        Rational::new(n.into(), self.den.into())
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let idx = self.comps.partition_point(|c| self.at(c.1) <= *t);
        self.comps.get(idx).is_some_and(|c| self.at(c.0) < *t)
    }

    pub fn to_set(&self) -> ElementarySet {
        let d = self.den;
        let reduced = |n: i128| {
            let g = match (i64::try_from(n), i64::try_from(d)) {
                (Ok(a), Ok(b)) => num_integer::Integer::gcd(&a, &b) as i128,
                _ => num_integer::Integer::gcd(&n, &d),
            };
            Rational::new_raw((n / g).into(), (d / g).into())
        };
        let comps = self.comps.iter().map(|(lo, hi)| Interval::open_unchecked(reduced(*lo), reduced(*hi))).collect();
        ElementarySet::from_sorted_unchecked(comps)
    }
}

fn endpoints<'a>(it: impl Iterator<Item = &'a Interval>) -> Vec<Rational> {
    let mut pts: Vec<Rational> = it.flat_map(|c| [c.lo.clone(), c.hi.clone()]).collect();
    pts.sort();
    pts.dedup();
    pts
}

impl fmt::Display for ElementarySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("∅");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn co(a: Rational, b: Rational) -> Interval {
        Interval::closed_open(a, b).unwrap()
    }

    #[test]
    fn empty_and_reversed_intervals_are_rejected() {
        assert!(Interval::new(int(1), int(0), true, true).is_err());
        assert!(Interval::open(int(1), int(1)).is_err());
        assert!(Interval::closed(int(1), int(1)).unwrap().is_singleton());
    }

    #[test]
    fn normalize_merges_adjacent_pieces() {
        let s = ElementarySet::normalize(&[co(int(0), int(1)), Interval::closed(int(1), int(2)).unwrap()]).unwrap();
        assert_eq!(s.to_string(), "[0,2]");

        let s = ElementarySet::normalize(&[
            Interval::open(int(0), int(1)).unwrap(),
            Interval::open(int(2), int(3)).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.to_string(), "(0,1) (2,3)");
    }

    #[test]
    fn normalize_fills_a_hole_with_a_singleton() {
        let s = ElementarySet::normalize(&[
            co(int(0), int(1)),
            Interval::open_closed(int(1), int(2)).unwrap(),
            Interval::singleton(int(1)),
        ])
        .unwrap();
        assert_eq!(s.to_string(), "[0,2]");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn normalize_rejects_overlap() {
        let err = ElementarySet::normalize(&[Interval::closed(int(0), int(1)).unwrap(), Interval::singleton(int(1))]);
        assert!(matches!(err, Err(Error::OverlappingComponents(..))));
    }

    #[test]
    fn set_operations() {
        let a = ElementarySet::from_interval(Interval::closed(int(0), int(2)).unwrap());
        let b = ElementarySet::from_interval(Interval::closed(int(1), int(3)).unwrap());
        assert_eq!(a.intersect(&b).to_string(), "[1,2]");
        let hole = ElementarySet::from_interval(Interval::open(int(1), int(2)).unwrap());
        assert_eq!(a.difference(&hole).to_string(), "[0,1] {2}");
        let left = ElementarySet::from_interval(co(int(0), int(1)));
        let point = ElementarySet::from_interval(Interval::singleton(int(1)));
        assert_eq!(left.union(&point).to_string(), "[0,1]");
    }

    #[test]
    fn membership() {
        let s = ElementarySet::from_interval(co(int(0), int(1)));
        assert!(!s.contains(&int(1)));
        assert!(s.contains(&int(0)));
        let s = ElementarySet::normalize(&[
            Interval::open(int(0), int(1)).unwrap(),
            Interval::open(int(2), int(3)).unwrap(),
        ])
        .unwrap();
        assert!(!s.contains(&int(2)));
        assert!(s.contains(&rat(5, 2)));
    }

    #[test]
    fn complement_within_hull() {
        let unit = Interval::closed(int(0), int(1)).unwrap();
        let mid = ElementarySet::from_interval(Interval::open(rat(1, 3), rat(2, 3)).unwrap());
        assert_eq!(mid.complement_in(&unit).unwrap().to_string(), "[0,1/3] [2/3,1]");
        assert_eq!(ElementarySet::empty().complement_in(&unit).unwrap().to_string(), "[0,1]");
        let ends = ElementarySet::normalize(&[Interval::singleton(int(0)), Interval::singleton(int(1))]).unwrap();
        assert_eq!(ends.complement_in(&unit).unwrap().to_string(), "(0,1)");
        let outside = ElementarySet::from_interval(Interval::closed(int(0), int(2)).unwrap());
        assert!(matches!(outside.complement_in(&unit), Err(Error::NotContained { .. })));
    }
}
