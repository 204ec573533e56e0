//! Gauges, tagged partitions, δ-fine systems, a constructive Cousin lemma
//! and Riemann-Stieltjes sums.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::functions::{merge_sorted, PiecewiseFunction};
use crate::interval_sets::Interval;
use crate::scalar::{fmt_rational, int, to_f64, Rational, Scalar};

/// Positive step baseline plus finitely many point overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct Gauge {
    breakpoints: Vec<Rational>,
    plateaus: Vec<Rational>,
    point_values: Vec<Rational>,
    overrides: BTreeMap<Rational, Rational>,
}

impl Gauge {
    /// Baseline with `plateaus[i]` on `(bp[i], bp[i+1])`; at a breakpoint the
    /// baseline is the smaller neighbouring plateau.
    pub fn step(breakpoints: Vec<Rational>, plateaus: Vec<Rational>) -> Result<Self> {
        if breakpoints.len() < 2 || plateaus.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidGauge("need m+1 breakpoints for m plateaus".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGauge("breakpoints must increase".into()));
        }
        let m = breakpoints.len();
        let point_values = (0..m)
            .map(|i| match (i.checked_sub(1).map(|k| &plateaus[k]), plateaus.get(i)) {
                (Some(l), Some(r)) => l.min(r).clone(),
                (Some(v), None) | (None, Some(v)) => v.clone(),
                (None, None) => unreachable!(),
            })
            .collect();
        Self::with_point_values(breakpoints, plateaus, point_values)
    }

    pub fn with_point_values(
        breakpoints: Vec<Rational>,
        plateaus: Vec<Rational>,
        point_values: Vec<Rational>,
    ) -> Result<Self> {
        if breakpoints.len() < 2
            || plateaus.len() + 1 != breakpoints.len()
            || point_values.len() != breakpoints.len()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidGauge("malformed baseline".into()));
        }
        if let Some(v) = plateaus.iter().chain(&point_values).find(|v| !v.is_positive()) {
            return Err(Error::InvalidGauge(format!("gauge value {} is not positive", fmt_rational(v))));
        }
        Ok(Gauge { breakpoints, plateaus, point_values, overrides: BTreeMap::new() })
    }

    pub fn constant(lo: Rational, hi: Rational, delta: Rational) -> Result<Self> {
        Self::step(vec![lo, hi], vec![delta])
    }

    /// Baseline from intervals tiling a hull, each with a plateau value.
    pub fn from_entries(entries: &[(Interval, Rational)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidGauge("empty baseline".into()));
        }
        let mut pts: Vec<Rational> = entries.iter().flat_map(|(i, _)| [i.lo().clone(), i.hi().clone()]).collect();
        pts.sort();
        pts.dedup();
        if pts.len() < 2 {
            return Err(Error::InvalidGauge("baseline hull has zero length".into()));
        }
        let two = int(2);
        let lookup = |t: &Rational| -> Result<Rational> {
            let hits: Vec<&Rational> = entries.iter().filter(|(i, _)| i.contains(t)).map(|(_, v)| v).collect();
            match hits.as_slice() {
                [v] => Ok((*v).clone()),
                [] => Err(Error::InvalidGauge(format!("baseline undefined at {}", fmt_rational(t)))),
                _ => Err(Error::InvalidGauge(format!("baseline defined twice at {}", fmt_rational(t)))),
            }
        };
        let plateaus = pts.windows(2).map(|w| lookup(&((&w[0] + &w[1]) / &two))).collect::<Result<Vec<_>>>()?;
        let point_values = pts.iter().map(lookup).collect::<Result<Vec<_>>>()?;
        Self::with_point_values(pts, plateaus, point_values)
    }

    /// Sets `δ(at) = min(baseline(at), value)`.
    pub fn with_override(mut self, at: Rational, value: Rational) -> Result<Self> {
        if !value.is_positive() {
            return Err(Error::InvalidGauge(format!("override at {} is not positive", fmt_rational(&at))));
        }
        let v = match self.overrides.remove(&at) {
            Some(old) => old.min(value),
            None => value,
        };
        self.overrides.insert(at, v);
        Ok(self)
    }

    pub fn hull(&self) -> (&Rational, &Rational) {
        (&self.breakpoints[0], self.breakpoints.last().unwrap())
    }

    pub fn overrides(&self) -> &BTreeMap<Rational, Rational> {
        &self.overrides
    }

    fn baseline(&self, t: &Rational) -> &Rational {
        let (lo, hi) = self.hull();
        if t <= lo {
            return &self.point_values[0];
        }
        if t >= hi {
            return self.point_values.last().unwrap();
        }
        match self.breakpoints.binary_search(t) {
            Ok(i) => &self.point_values[i],
            Err(i) => &self.plateaus[i - 1],
        }
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let base = self.baseline(t);
        match self.overrides.get(t) {
            Some(o) if o < base => o.clone(),
            _ => base.clone(),
        }
    }

    /// Smallest baseline value.
    pub fn min_plateau(&self) -> Rational {
        self.plateaus.iter().chain(&self.point_values).min().unwrap().clone()
    }

    /// Pointwise minimum of two gauges over the union of their hulls.
    pub fn min(&self, other: &Gauge) -> Gauge {
        let bps = merge_sorted(&self.breakpoints, &other.breakpoints);
        let two = int(2);
        let plateaus = bps
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / &two;
                self.baseline(&mid).min(other.baseline(&mid)).clone()
            })
            .collect();
        let point_values = bps.iter().map(|t| self.baseline(t).min(other.baseline(t)).clone()).collect();
        let mut g = Gauge { breakpoints: bps, plateaus, point_values, overrides: self.overrides.clone() };
        for (p, v) in &other.overrides {
            g = g.with_override(p.clone(), v.clone()).expect("positive override");
        }
        g
    }

    /// True when `self(t) <= other(t)` at every point (checked on all
    /// breakpoints, plateau midpoints and override points).
    pub fn refines(&self, other: &Gauge) -> bool {
        let bps = merge_sorted(&self.breakpoints, &other.breakpoints);
        let two = int(2);
        let mut probes: Vec<Rational> = bps.windows(2).map(|w| (&w[0] + &w[1]) / &two).collect();
        probes.extend(bps);
        probes.extend(self.overrides.keys().cloned());
        probes.extend(other.overrides.keys().cloned());
        probes.iter().all(|t| self.eval(t) <= other.eval(t))
    }
}

impl Gauge {
    /// Gauge on `[a, b]` equal to `self` on `[a, c)` and `right` on `(c, b]`,
    /// with `δ(c)` the smaller of the two; `self` must end where `right` starts.
    pub fn glue(&self, right: &Gauge) -> Result<Gauge> {
        let c = self.hull().1.clone();
        if &c != right.hull().0 {
            return Err(Error::InvalidGauge("glued gauges must share an endpoint".into()));
        }
        let mut bps = self.breakpoints.clone();
        bps.extend(right.breakpoints[1..].iter().cloned());
        let mut plateaus = self.plateaus.clone();
        plateaus.extend(right.plateaus.iter().cloned());
        let mut point_values = self.point_values.clone();
        let at_c = point_values.pop().unwrap().min(right.point_values[0].clone());
        point_values.push(at_c);
        point_values.extend(right.point_values[1..].iter().cloned());
        let mut g = Gauge::with_point_values(bps, plateaus, point_values)?;
        for (p, v) in self.overrides.iter().chain(&right.overrides) {
            g = g.with_override(p.clone(), v.clone())?;
        }
        Ok(g)
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items = Vec::new();
        let m = self.breakpoints.len();
        for i in 0..m {
            items.push(format!("{{{}}}:{}", fmt_rational(&self.breakpoints[i]), fmt_rational(&self.point_values[i])));
            if i + 1 < m {
                items.push(format!(
                    "({},{}):{}",
                    fmt_rational(&self.breakpoints[i]),
                    fmt_rational(&self.breakpoints[i + 1]),
                    fmt_rational(&self.plateaus[i])
                ));
            }
        }
        write!(f, "gauge{{ base: {}", items.join(", "))?;
        for (p, v) in &self.overrides {
            write!(f, "; at {}: {}", fmt_rational(p), fmt_rational(v))?;
        }
        f.write_str(" }")
    }
}

/// Nodes `α_0 < … < α_m` with tags `ξ_j ∈ [α_{j-1}, α_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedPartition {
    nodes: Vec<Rational>,
    tags: Vec<Rational>,
}

impl TaggedPartition {
    pub fn new(nodes: Vec<Rational>, tags: Vec<Rational>) -> Result<Self> {
        if nodes.len() < 2 || tags.len() + 1 != nodes.len() {
            return Err(Error::InvalidPartition("need m+1 nodes and m tags, m >= 1".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("nodes must increase".into()));
        }
        for (j, tag) in tags.iter().enumerate() {
            if tag < &nodes[j] || tag > &nodes[j + 1] {
                return Err(Error::InvalidPartition(format!(
                    "tag {} outside [{},{}]",
                    fmt_rational(tag),
                    fmt_rational(&nodes[j]),
                    fmt_rational(&nodes[j + 1])
                )));
            }
        }
        Ok(TaggedPartition { nodes, tags })
    }

    pub fn nodes(&self) -> &[Rational] {
        &self.nodes
    }

    pub fn tags(&self) -> &[Rational] {
        &self.tags
    }

    /// `ν(P)`.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = (&Rational, &Rational, &Rational)> {
        self.nodes.windows(2).zip(&self.tags).map(|(w, t)| (&w[0], &w[1], t))
    }

    pub fn mesh(&self) -> Rational {
        self.nodes.windows(2).map(|w| &w[1] - &w[0]).max().unwrap()
    }

    pub fn is_delta_fine(&self, gauge: &Gauge) -> bool {
        self.items().all(|(lo, hi, tag)| fits(lo, hi, tag, gauge))
    }

    /// Concatenation of a partition of `[a,c]` and one of `[c,b]`.
    pub fn concat(&self, other: &TaggedPartition) -> Result<Self> {
        if self.nodes.last() != other.nodes.first() {
            return Err(Error::InvalidPartition("partitions do not abut".into()));
        }
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes[1..].iter().cloned());
        let mut tags = self.tags.clone();
        tags.extend(other.tags.iter().cloned());
        TaggedPartition::new(nodes, tags)
    }

    /// Splits at `c`, which must be a node or the tag of the cell containing it.
    pub fn split_at(&self, c: &Rational) -> Result<(TaggedPartition, TaggedPartition)> {
        let (lo, hi) = (&self.nodes[0], self.nodes.last().unwrap());
        if c <= lo || c >= hi {
            return Err(Error::InvalidPartition("split point must be interior".into()));
        }
        let k = self.nodes.partition_point(|x| x < c);
        if &self.nodes[k] == c {
            let left = TaggedPartition::new(self.nodes[..=k].to_vec(), self.tags[..k].to_vec())?;
            let right = TaggedPartition::new(self.nodes[k..].to_vec(), self.tags[k..].to_vec())?;
            return Ok((left, right));
        }
        let j = k - 1;
        if &self.tags[j] != c {
            return Err(Error::InvalidPartition(format!("{} is neither a node nor the tag of its cell", fmt_rational(c))));
        }
        let mut ln = self.nodes[..k].to_vec();
        ln.push(c.clone());
        let mut rn = vec![c.clone()];
        rn.extend(self.nodes[k..].iter().cloned());
        let left = TaggedPartition::new(ln, self.tags[..=j].to_vec())?;
        let right = TaggedPartition::new(rn, self.tags[j..].to_vec())?;
        Ok((left, right))
    }

    pub fn as_system(&self) -> DeltaFineSystem {
        DeltaFineSystem {
            items: self.items().map(|(lo, hi, t)| (lo.clone(), hi.clone(), t.clone())).collect(),
        }
    }
}

fn fits(lo: &Rational, hi: &Rational, tag: &Rational, gauge: &Gauge) -> bool {
    let d = gauge.eval(tag);
    &(tag - &d) < lo && hi < &(tag + &d)
}

/// Tagged items `([β_j, γ_j], ξ_j)` with `β_1 ≤ ξ_1 ≤ γ_1 ≤ β_2 ≤ …`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaFineSystem {
    items: Vec<(Rational, Rational, Rational)>,
}

impl DeltaFineSystem {
    pub fn new(items: Vec<(Rational, Rational, Rational)>) -> Result<Self> {
        let mut prev: Option<&Rational> = None;
        for (b, g, x) in &items {
            if !(b <= x && x <= g && b < g) || prev.is_some_and(|p| p > b) {
                return Err(Error::InvalidPartition(format!(
                    "item ([{},{}], {}) breaks the ordering chain",
                    fmt_rational(b),
                    fmt_rational(g),
                    fmt_rational(x)
                )));
            }
            prev = Some(g);
        }
        Ok(DeltaFineSystem { items })
    }

    pub fn items(&self) -> &[(Rational, Rational, Rational)] {
        &self.items
    }

    pub fn is_delta_fine(&self, gauge: &Gauge) -> bool {
        self.items.iter().all(|(b, g, x)| fits(b, g, x, gauge))
    }
}

/// Result of the Cousin construction with the deepest bisection level used.
#[derive(Clone, Debug)]
pub struct CousinOutcome {
    pub partition: TaggedPartition,
    pub max_depth: u32,
}

/// δ-fine partition of `[lo, hi]` by deterministic bisection. Intervals are
/// processed left to right; the tag preference is left end, right end, then
/// midpoint (admissible when half the length is below `δ(mid)`).
pub fn cousin_partition(gauge: &Gauge, lo: &Rational, hi: &Rational) -> Result<TaggedPartition> {
    cousin_with_depth(gauge, lo, hi).map(|o| o.partition)
}

pub fn cousin_with_depth(gauge: &Gauge, lo: &Rational, hi: &Rational) -> Result<CousinOutcome> {
    if lo >= hi {
        return Err(Error::InvalidPartition("hull must have positive length".into()));
    }
    let two = int(2);
    let mut nodes = vec![lo.clone()];
    let mut tags = Vec::new();
    let mut max_depth = 0;
    let mut stack = vec![(lo.clone(), hi.clone(), 0u32)];
    while let Some((u, v, depth)) = stack.pop() {
        max_depth = max_depth.max(depth);
        let len = &v - &u;
        let mid = (&u + &v) / &two;
        let tag = if len < gauge.eval(&u) {
            Some(u.clone())
        } else if len < gauge.eval(&v) {
            Some(v.clone())
        } else if &len / &two < gauge.eval(&mid) {
            Some(mid.clone())
        } else {
            None
        };
        match tag {
            Some(t) => {
                tags.push(t);
                nodes.push(v);
            }
            None => {
                if depth >= 4096 {
                    return Err(Error::InvalidGauge("bisection depth exceeded".into()));
                }
                stack.push((mid.clone(), v, depth + 1));
                stack.push((u, mid, depth + 1));
            }
        }
    }
    Ok(CousinOutcome { partition: TaggedPartition::new(nodes, tags)?, max_depth })
}

/// A random δ-fine partition of `[lo, hi]`. Split points are drawn from the
/// eighths of the current interval and tags from a pool of candidate points
/// (ends, midpoint, four random sixteenths, override points). Every point of
/// `forced_nodes` becomes a node; every point of `forced_tags` tags the
/// intervals containing it.
pub fn random_fine_partition<R: Rng + ?Sized>(
    gauge: &Gauge,
    lo: &Rational,
    hi: &Rational,
    rng: &mut R,
    forced_nodes: &[Rational],
    forced_tags: &[Rational],
) -> Result<TaggedPartition> {
    sample_fine(gauge, lo, hi, rng, forced_nodes, forced_tags, true)
}

/// The sampler on integer grid coordinates where possible (`use_grid`),
/// otherwise in rational arithmetic throughout; both give the same partition.
fn sample_fine<R: Rng + ?Sized>(
    gauge: &Gauge,
    lo: &Rational,
    hi: &Rational,
    rng: &mut R,
    forced_nodes: &[Rational],
    forced_tags: &[Rational],
    use_grid: bool,
) -> Result<TaggedPartition> {
    if lo >= hi {
        return Err(Error::InvalidPartition("hull must have positive length".into()));
    }
    let grid = if use_grid { Grid::new(gauge, lo, hi, forced_nodes, forced_tags) } else { None };
    let mut nodes = vec![lo.clone()];
    let mut tags = Vec::new();
    let mut stack = match &grid {
        Some(gr) => vec![Cell::Grid(0, gr.den, 0)],
        None => vec![Cell::Exact(lo.clone(), hi.clone(), 0)],
    };
    let inside = |p: &Rational, u: &Rational, v: &Rational| p > u && p < v;
    while let Some(cell) = stack.pop() {
        let depth = match &cell {
            Cell::Grid(_, _, d) | Cell::Exact(_, _, d) => *d,
        };
        if depth > 4096 {
            return Err(Error::InvalidGauge("random refinement depth exceeded".into()));
        }
        if let (Cell::Grid(u, v, _), Some(gr)) = (&cell, &grid) {
            let (u, v) = (*u, *v);
            let len = v - u;
            if len % 16 != 0 {
                stack.push(Cell::Exact(gr.point(u), gr.point(v), depth));
                continue;
            }
            let split_at = |s: i128, stack: &mut Vec<Cell>| {
                stack.push(Cell::Grid(s, v, depth + 1));
                stack.push(Cell::Grid(u, s, depth + 1));
            };
            if let Some(&p) = gr.forced_nodes.iter().find(|p| **p > u && **p < v) {
                split_at(p, &mut stack);
                continue;
            }
            if let Some(&p) = gr.forced_tags.iter().find(|p| **p >= u && **p <= v) {
                if gr.fits(u, v, p) {
                    tags.push(gr.point(p));
                    nodes.push(gr.point(v));
                } else if p > u && p < v {
                    split_at(p, &mut stack);
                } else {
                    let k = rng.gen_range(1..8i64) as i128;
                    split_at(u + len / 8 * k, &mut stack);
                }
                continue;
            }
            let mut candidates: Vec<i128> = [0, 8, 16]
                .into_iter()
                .chain((0..4).map(|_| rng.gen_range(1..16)))
                .map(|k: i64| u + len / 16 * k as i128)
                .collect();
            let from = gr.overrides.partition_point(|(m, _)| *m < u);
            candidates.extend(gr.overrides[from..].iter().take_while(|(m, _)| *m <= v).map(|(m, _)| *m));
            candidates.retain(|c| gr.fits(u, v, *c));
            let settle = !candidates.is_empty() && (depth > 48 || rng.gen_bool(0.6));
            if settle {
                let pick = rng.gen_range(0..candidates.len());
                tags.push(gr.point(candidates.swap_remove(pick)));
                nodes.push(gr.point(v));
            } else {
                let k = rng.gen_range(1..8i64) as i128;
                split_at(u + len / 8 * k, &mut stack);
            }
            continue;
        }
        let Cell::Exact(u, v, _) = cell else { unreachable!("grid cells need a grid") };
        let len = &v - &u;
        let split_at = |s: Rational, stack: &mut Vec<Cell>| {
            stack.push(Cell::Exact(s.clone(), v.clone(), depth + 1));
            stack.push(Cell::Exact(u.clone(), s, depth + 1));
        };
        if let Some(p) = forced_nodes.iter().find(|p| inside(p, &u, &v)) {
            split_at(p.clone(), &mut stack);
            continue;
        }
        if let Some(p) = forced_tags.iter().find(|p| *p >= &u && *p <= &v) {
            if fits(&u, &v, p, gauge) {
                tags.push(p.clone());
                nodes.push(v);
            } else if inside(p, &u, &v) {
                split_at(p.clone(), &mut stack);
            } else {
                let k = rng.gen_range(1..8i64);
                split_at(&u + &len * Rational::new(k.into(), 8.into()), &mut stack);
            }
            continue;
        }
        let mut candidates: Vec<Rational> = [0, 8, 16]
            .into_iter()
            .chain((0..4).map(|_| rng.gen_range(1..16)))
            .map(|k: i64| &u + &len * Rational::new(k.into(), 16.into()))
            .collect();
        candidates.extend(gauge.overrides().range(u.clone()..=v.clone()).map(|(p, _)| p.clone()));
        candidates.retain(|c| fits(&u, &v, c, gauge));
        let settle = !candidates.is_empty() && (depth > 48 || rng.gen_bool(0.6));
        if settle {
            let pick = rng.gen_range(0..candidates.len());
            tags.push(candidates.swap_remove(pick));
            nodes.push(v);
        } else {
            let k = rng.gen_range(1..8i64);
            split_at(&u + &len * Rational::new(k.into(), 8.into()), &mut stack);
        }
    }
    // nodes are produced left to right and every tag lies in its cell
    Ok(TaggedPartition { nodes, tags })
}

enum Cell {
    Grid(i128, i128, u32),
    Exact(Rational, Rational, u32),
}

/// Integer coordinates `m ↦ lo + (hi − lo)·m/den` for the random sampler,
/// with the gauge translated into thresholds: `x < δ(t)` for a grid distance
/// `x` iff `x ≤ threshold`. Forced points and override points inside the
/// hull are grid points.
struct Grid {
    lo: Rational,
    scale: Rational,
    den: i128,
    /// `lo` and `hi − lo` as i128 fractions when they fit.
    small: Option<(i128, i128, i128, i128)>,
    /// Gauge breakpoints as `(floor, is_grid_point)`.
    breakpoints: Vec<(i128, bool)>,
    plateaus: Vec<i128>,
    point_values: Vec<i128>,
    overrides: Vec<(i128, i128)>,
    forced_nodes: Vec<i128>,
    forced_tags: Vec<i128>,
}

impl Grid {
    fn new(gauge: &Gauge, lo: &Rational, hi: &Rational, forced_nodes: &[Rational], forced_tags: &[Rational]) -> Option<Grid> {
        let width = hi - lo;
        let within = |p: &&Rational| *p >= lo && *p <= hi;
        let mut base: i128 = 1;
        for p in forced_nodes.iter().chain(forced_tags).chain(gauge.overrides.keys()).filter(within) {
            let d: i128 = ((p - lo) / &width).denom().try_into().ok()?;
            base = base.checked_mul(d / num_integer::gcd(base, d))?;
            if base > 1 << 60 {
                return None;
            }
        }
        let den = base << (120 - (128 - base.leading_zeros()));
        let scale = &width / Rational::from_integer(den.into());
        let parts = |r: &Rational| Some((r.numer().to_i128()?, r.denom().to_i128()?));
        let small = match (parts(lo), parts(&width)) {
            (Some((ln, ld)), Some((wn, wd))) if [ln, ld, wn, wd].iter().all(|x| x.abs() < 1 << 30) => Some((ln, ld, wn, wd)),
            _ => None,
        };
        let mut gr = Grid {
            lo: lo.clone(),
            scale,
            den,
            small,
            breakpoints: Vec::new(),
            plateaus: Vec::new(),
            point_values: Vec::new(),
            overrides: Vec::new(),
            forced_nodes: Vec::new(),
            forced_tags: Vec::new(),
        };
        gr.breakpoints = gauge.breakpoints.iter().map(|b| gr.locate(b)).collect();
        gr.plateaus = gauge.plateaus.iter().map(|d| gr.threshold(d)).collect();
        gr.point_values = gauge.point_values.iter().map(|d| gr.threshold(d)).collect();
        let exact = |gr: &Grid, p: &Rational| gr.locate(p).0;
        gr.overrides = gauge.overrides.iter().filter(|(p, _)| within(p)).map(|(p, d)| (exact(&gr, p), gr.threshold(d))).collect();
        gr.forced_nodes = forced_nodes.iter().filter(within).map(|p| exact(&gr, p)).collect();
        gr.forced_tags = forced_tags.iter().filter(within).map(|p| exact(&gr, p)).collect();
        Some(gr)
    }

    fn point(&self, m: i128) -> Rational {
        self.point_native(m).unwrap_or_else(|| &self.lo + &self.scale * Rational::from_integer(m.into()))
    }

    /// `lo + w·m/den` in i128 when the ends are small rationals.
    fn point_native(&self, m: i128) -> Option<Rational> {
        let (ln, ld, wn, wd) = self.small?;
        let g = num_integer::gcd(m, self.den);
        let (p, q) = (m / g, self.den / g);
        let num = ln.checked_mul(wd)?.checked_mul(q)?.checked_add(wn.checked_mul(p)?.checked_mul(ld)?)?;
        let den = ld.checked_mul(wd)?.checked_mul(q)?;
        let g = num_integer::gcd(num, den);
        Some(Rational::new_raw((num / g).into(), (den / g).into()))
    }

    fn locate(&self, x: &Rational) -> (i128, bool) {
        let q = (x - &self.lo) / &self.scale;
        let fl = q.floor().to_integer();
        let fl = fl.to_i128().unwrap_or(if fl.is_negative() { -self.den - 1 } else { 2 * self.den + 1 });
        (fl, q.is_integer())
    }

    /// Largest integer strictly below `δ/scale`.
    fn threshold(&self, delta: &Rational) -> i128 {
        let c: num_bigint::BigInt = (delta / &self.scale).ceil().to_integer() - 1;
        c.to_i128().unwrap_or(i128::MAX)
    }

    /// Number of gauge breakpoints strictly below `m`, and whether `m` is one.
    fn rank(&self, m: i128) -> (usize, bool) {
        // a breakpoint off the grid lies in (fl, fl + 1)
        let i = self.breakpoints.partition_point(|(fl, _)| *fl < m);
        (i, self.breakpoints.get(i).is_some_and(|b| *b == (m, true)))
    }

    fn threshold_at(&self, m: i128) -> i128 {
        let base = match self.rank(m) {
            (i, true) => self.point_values[i],
            (0, false) => self.point_values[0],
            (i, false) if i == self.breakpoints.len() => *self.point_values.last().unwrap(),
            (i, false) => self.plateaus[i - 1],
        };
        match self.overrides.binary_search_by_key(&m, |(p, _)| *p) {
            Ok(k) => base.min(self.overrides[k].1),
            Err(_) => base,
        }
    }

    fn fits(&self, u: i128, v: i128, tag: i128) -> bool {
        let t = self.threshold_at(tag);
        tag - u <= t && v - tag <= t
    }
}

/// `S(df, g, P) = Σ [f(α_j) − f(α_{j−1})] g(ξ_j)`.
pub fn rs_sum_df_g(f: &PiecewiseFunction, g: &PiecewiseFunction, p: &TaggedPartition) -> Scalar {
    p.items().map(|(lo, hi, tag)| (f.eval(hi) - f.eval(lo)) * g.eval(tag)).sum()
}

/// `S(f, dg, P) = Σ f(ξ_j) [g(α_j) − g(α_{j−1})]`.
pub fn rs_sum_f_dg(f: &PiecewiseFunction, g: &PiecewiseFunction, p: &TaggedPartition) -> Scalar {
    p.items().map(|(lo, hi, tag)| f.eval(tag) * (g.eval(hi) - g.eval(lo))).sum()
}

/// `Σ [f(γ_j) − f(β_j)] g(ξ_j)` over a δ-fine system.
pub fn system_sum_df_g(f: &PiecewiseFunction, g: &PiecewiseFunction, s: &DeltaFineSystem) -> Scalar {
    s.items().iter().map(|(b, c, x)| (f.eval(c) - f.eval(b)) * g.eval(x)).sum()
}

/// Floating-point copy of a piecewise function for screening sums. The piece
/// containing a point is chosen exactly: points within rounding distance of
/// a breakpoint are evaluated in rational arithmetic.
pub(crate) struct FloatView<'a> {
    f: &'a PiecewiseFunction,
    breakpoints: Vec<f64>,
    coeffs: Vec<Option<Vec<f64>>>,
}

impl<'a> FloatView<'a> {
    pub(crate) fn new(f: &'a PiecewiseFunction) -> Self {
        FloatView {
            f,
            breakpoints: f.breakpoints().iter().map(to_f64).collect(),
            coeffs: f.pieces().iter().map(|p| p.as_poly().map(|q| q.coeffs().iter().map(to_f64).collect())).collect(),
        }
    }

    pub(crate) fn eval(&self, t: &Rational, tf: f64) -> f64 {
        let i = self.breakpoints.partition_point(|b| *b < tf);
        let near = |k: usize| self.breakpoints.get(k).is_some_and(|b| (b - tf).abs() <= 1e-9 * (1.0 + tf.abs()));
        if i == 0 || i == self.breakpoints.len() || near(i - 1) || near(i) {
            return self.f.eval(t).to_f64();
        }
        match &self.coeffs[i - 1] {
            Some(c) => c.iter().rev().fold(0.0, |acc, x| acc * tf + x),
            None => self.f.pieces()[i - 1].eval_f64(tf),
        }
    }
}

/// `S(df, g, P)` in floating point with a bound on its rounding error.
pub(crate) fn screened_sum(f: &FloatView, g: &FloatView, p: &TaggedPartition, nodes: &[f64], tags: &[f64]) -> (f64, f64) {
    let fv: Vec<f64> = p.nodes.iter().zip(nodes).map(|(t, tf)| f.eval(t, *tf)).collect();
    let mut sum = 0.0;
    let mut mass = 0.0;
    for (j, (tag, tf)) in p.tags.iter().zip(tags).enumerate() {
        let term = (fv[j + 1] - fv[j]) * g.eval(tag, *tf);
        sum += term;
        mass += term.abs() + fv[j].abs();
    }
    (sum, 1e-9 * (1.0 + mass))
}
