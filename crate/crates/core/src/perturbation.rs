//! Robustness regions and their algebra.
//!
//! A [`Region`] is a compact subset of `R^d` given in one of four closed forms.
//! Expansion by `gamma` is the Minkowski sum with the closed `gamma` ball; it
//! is always returned in closed form, while [`Region::expanded`] keeps a lazy
//! `Expanded` node (with nesting collapsed) for callers that want the base.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{Ball, BoundingBox, Vector};

/// Quantization step for point identities.
pub const KEY_QUANTUM: f64 = 1e-12;

/// Rejection sampling gives up once this many attempts were made at an
/// acceptance rate below [`MIN_ACCEPTANCE`].
pub const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-6;

/// Identity of a point: coordinates quantized at [`KEY_QUANTUM`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointKey(Vec<i64>);

impl PointKey {
    pub fn of(p: &Vector) -> Self {
        PointKey(p.coords().iter().map(|c| (c / KEY_QUANTUM).round() as i64).collect())
    }
}

/// A compact perturbation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr", into = "RegionRepr")]
pub enum Region {
    FinitePoints(Vec<Vector>),
    Ball(Ball),
    UnionOfBalls(Vec<Ball>),
    /// Lazy Minkowski sum `base + B(0, gamma)`; `base` is never `Expanded`.
    Expanded {
        base: Box<Region>,
        gamma: f64,
    },
}

/// Serialized form, validated on the way in.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionRepr {
    FinitePoints { points: Vec<Vector> },
    Ball { center: Vector, radius: f64 },
    UnionOfBalls { balls: Vec<Ball> },
    Expanded { base: Box<RegionRepr>, gamma: f64 },
}

impl TryFrom<RegionRepr> for Region {
    type Error = Error;
    fn try_from(r: RegionRepr) -> Result<Self> {
        match r {
            RegionRepr::FinitePoints { points } => Region::finite_points(points),
            RegionRepr::Ball { center, radius } => Region::ball(center, radius),
            RegionRepr::UnionOfBalls { balls } => {
                let balls = balls.into_iter().map(|b| Ball::new(b.center, b.radius)).collect::<Result<Vec<_>>>()?;
                Region::union_of_balls(balls)
            }
            RegionRepr::Expanded { base, gamma } => Region::expanded(Region::try_from(*base)?, gamma),
        }
    }
}

impl From<Region> for RegionRepr {
    fn from(r: Region) -> Self {
        match r {
            Region::FinitePoints(points) => RegionRepr::FinitePoints { points },
            Region::Ball(b) => RegionRepr::Ball { center: b.center, radius: b.radius },
            Region::UnionOfBalls(balls) => RegionRepr::UnionOfBalls { balls },
            Region::Expanded { base, gamma } => RegionRepr::Expanded { base: Box::new((*base).into()), gamma },
        }
    }
}

fn check_same_dim(points: impl Iterator<Item = usize>) -> Result<usize> {
    let mut dim = None;
    for d in points {
        match dim {
            None => dim = Some(d),
            Some(e) => check_dim(e, d)?,
        }
    }
    dim.ok_or_else(|| invalid("region", "must be nonempty"))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid("gamma", format!("{gamma} is not a finite positive number")))
    }
}

impl Region {
    pub fn finite_points(points: Vec<Vector>) -> Result<Self> {
        check_same_dim(points.iter().map(Vector::dim))?;
        Ok(Region::FinitePoints(points))
    }

    pub fn singleton(p: Vector) -> Self {
        Region::FinitePoints(vec![p])
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        Ok(Region::Ball(Ball::new(center, radius)?))
    }

    pub fn union_of_balls(balls: Vec<Ball>) -> Result<Self> {
        check_same_dim(balls.iter().map(Ball::dim))?;
        Ok(Region::UnionOfBalls(balls))
    }

    /// Lazy expansion; `Expanded(Expanded(b, g1), g2)` becomes `Expanded(b, g1 + g2)`.
    pub fn expanded(base: Region, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(match base {
            Region::Expanded { base, gamma: g } => Region::Expanded { base, gamma: g + gamma },
            other => Region::Expanded { base: Box::new(other), gamma },
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::FinitePoints(p) => p[0].dim(),
            Region::Ball(b) => b.dim(),
            Region::UnionOfBalls(b) => b[0].dim(),
            Region::Expanded { base, .. } => base.dim(),
        }
    }

    /// Closed-form `gamma`-expansion: `{p : dist(p, self) <= gamma}`.
    pub fn expand(&self, gamma: f64) -> Result<Region> {
        check_gamma(gamma)?;
        Ok(match self {
            Region::FinitePoints(pts) if pts.len() == 1 => Region::Ball(Ball { center: pts[0].clone(), radius: gamma }),
            Region::FinitePoints(pts) => {
                Region::UnionOfBalls(pts.iter().map(|p| Ball { center: p.clone(), radius: gamma }).collect())
            }
            Region::Ball(b) => Region::Ball(Ball { center: b.center.clone(), radius: b.radius + gamma }),
            Region::UnionOfBalls(bs) => Region::UnionOfBalls(
                bs.iter().map(|b| Ball { center: b.center.clone(), radius: b.radius + gamma }).collect(),
            ),
            Region::Expanded { base, gamma: g } => base.expand(g + gamma)?,
        })
    }

    /// Expansion that accepts `gamma = 0` as the identity.
    pub fn expand_or_keep(&self, gamma: f64) -> Result<Region> {
        if gamma == 0.0 {
            Ok(self.clone())
        } else {
            self.expand(gamma)
        }
    }

    /// Closed form of the region (resolves a lazy `Expanded` node).
    pub fn normalized(&self) -> Region {
        match self {
            Region::Expanded { base, gamma } => base.expand(*gamma).expect("validated gamma"),
            other => other.clone(),
        }
    }

    /// Distance from `p` to the region (0 inside).
    pub fn distance_to(&self, p: &Vector) -> Result<f64> {
        check_dim(self.dim(), p.dim())?;
        Ok(self.distance_unchecked(p))
    }

    fn distance_unchecked(&self, p: &Vector) -> f64 {
        match self {
            Region::FinitePoints(pts) => pts.iter().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min),
            Region::Ball(b) => b.distance_to(p),
            Region::UnionOfBalls(bs) => bs.iter().map(|b| b.distance_to(p)).fold(f64::INFINITY, f64::min),
            Region::Expanded { base, gamma } => (base.distance_unchecked(p) - gamma).max(0.0),
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, p: &Vector) -> Result<bool> {
        check_dim(self.dim(), p.dim())?;
        Ok(self.contains_unchecked(p))
    }

    fn contains_unchecked(&self, p: &Vector) -> bool {
        match self {
            Region::FinitePoints(pts) => pts.iter().any(|q| q == p),
            Region::Ball(b) => b.contains(p),
            Region::UnionOfBalls(bs) => bs.iter().any(|b| b.contains(p)),
            Region::Expanded { base, gamma } => base.distance_unchecked(p) <= *gamma,
        }
    }

    /// Diameter; exact for points, balls and expansions of them, and the
    /// pairwise upper bound `max |c_i - c_j| + r_i + r_j` for unions.
    pub fn diameter(&self) -> f64 {
        match self {
            Region::FinitePoints(pts) => {
                let mut best = 0.0f64;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        best = best.max(a.dist(b));
                    }
                }
                best
            }
            Region::Ball(b) => 2.0 * b.radius,
            Region::UnionOfBalls(bs) => {
                let mut best = 0.0f64;
                for (i, a) in bs.iter().enumerate() {
                    for b in &bs[i..] {
                        best = best.max(a.center.dist(&b.center) + a.radius + b.radius);
                    }
                }
                best
            }
            Region::Expanded { base, gamma } => base.diameter() + 2.0 * gamma,
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            Region::FinitePoints(pts) => {
                pts[1..].iter().fold(BoundingBox::of_point(&pts[0]), |acc, p| acc.union(&BoundingBox::of_point(p)))
            }
            Region::Ball(b) => b.bounding_box(),
            Region::UnionOfBalls(bs) => {
                bs[1..].iter().fold(bs[0].bounding_box(), |acc, b| acc.union(&b.bounding_box()))
            }
            Region::Expanded { base, gamma } => base.bounding_box().inflate(*gamma),
        }
    }

    /// Exact `(min, max)` of `<w, x> + b` over the region.
    pub fn linear_extrema(&self, w: &Vector, b: f64) -> Result<(f64, f64)> {
        check_dim(self.dim(), w.dim())?;
        let wn = w.norm();
        let ball = |c: &Vector, r: f64| {
            let v = w.dot(c) + b;
            (v - wn * r, v + wn * r)
        };
        let fold = |it: &mut dyn Iterator<Item = (f64, f64)>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, c)| (lo.min(a), hi.max(c)))
        };
        Ok(match self {
            Region::FinitePoints(pts) => fold(&mut pts.iter().map(|p| ball(p, 0.0))),
            Region::Ball(bl) => ball(&bl.center, bl.radius),
            Region::UnionOfBalls(bs) => fold(&mut bs.iter().map(|bl| ball(&bl.center, bl.radius))),
            Region::Expanded { base, gamma } => {
                let (lo, hi) = base.linear_extrema(w, b)?;
                (lo - wn * gamma, hi + wn * gamma)
            }
        })
    }

    /// Exact `(min, max)` of `||x - c||` over the region.
    pub fn center_distance_extrema(&self, c: &Vector) -> Result<(f64, f64)> {
        check_dim(self.dim(), c.dim())?;
        let ball = |bl: &Ball| {
            let d = bl.center.dist(c);
            ((d - bl.radius).max(0.0), d + bl.radius)
        };
        let fold = |it: &mut dyn Iterator<Item = (f64, f64)>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
        };
        Ok(match self {
            Region::FinitePoints(pts) => fold(&mut pts.iter().map(|p| {
                let d = p.dist(c);
                (d, d)
            })),
            Region::Ball(bl) => ball(bl),
            Region::UnionOfBalls(bs) => fold(&mut bs.iter().map(ball)),
            Region::Expanded { base, gamma } => {
                let (lo, hi) = base.center_distance_extrema(c)?;
                ((lo - gamma).max(0.0), hi + gamma)
            }
        })
    }

    /// Whether the region has positive Lebesgue measure.
    pub fn has_positive_measure(&self) -> bool {
        match self {
            Region::FinitePoints(_) => false,
            Region::Ball(b) => b.radius > 0.0,
            Region::UnionOfBalls(bs) => bs.iter().any(|b| b.radius > 0.0),
            Region::Expanded { .. } => true,
        }
    }

    /// The finitely many points of a measure-zero region, `None` otherwise.
    pub fn atoms(&self) -> Option<Vec<Vector>> {
        match self {
            Region::FinitePoints(p) => Some(p.clone()),
            _ if self.has_positive_measure() => None,
            Region::Ball(b) => Some(vec![b.center.clone()]),
            Region::UnionOfBalls(bs) => Some(bs.iter().map(|b| b.center.clone()).collect()),
            Region::Expanded { .. } => None,
        }
    }

    /// `n` Lebesgue-uniform points by rejection from the bounding box.
    pub fn uniform_sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vector>> {
        let mut sampler = RegionSampler::new(self)?;
        (0..n).map(|_| sampler.sample(rng)).collect()
    }

    /// Uniform sample of the region for a one-sided search: points of a
    /// measure-zero region are enumerated, otherwise `n` uniform draws plus
    /// the defining points (centers, atoms) are returned.
    pub fn probe_points<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vector>> {
        if let Some(atoms) = self.atoms() {
            return Ok(atoms);
        }
        let mut pts = self.uniform_sample(n, rng)?;
        match self.normalized() {
            Region::Ball(b) => pts.push(b.center),
            Region::UnionOfBalls(bs) => pts.extend(bs.into_iter().map(|b| b.center)),
            _ => {}
        }
        Ok(pts)
    }
}

/// Rejection sampler for a positive-measure region.
#[derive(Clone, Debug)]
pub struct RegionSampler<'a> {
    region: &'a Region,
    bbox: BoundingBox,
    attempts: u64,
    accepted: u64,
}

impl<'a> RegionSampler<'a> {
    pub fn new(region: &'a Region) -> Result<Self> {
        if !region.has_positive_measure() {
            return Err(Error::ZeroMeasure);
        }
        Ok(Self { region, bbox: region.bounding_box(), attempts: 0, accepted: 0 })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vector> {
        loop {
            self.attempts += 1;
            let p = self.bbox.sample(rng);
            if self.region.contains_unchecked(&p) {
                self.accepted += 1;
                return Ok(p);
            }
            if self.attempts >= MAX_REJECTION_ATTEMPTS && (self.accepted as f64) < MIN_ACCEPTANCE * self.attempts as f64
            {
                return Err(Error::LowAcceptance { attempts: self.attempts, accepted: self.accepted });
            }
        }
    }

    /// Observed acceptance rate so far.
    pub fn acceptance(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Assignment of robustness regions to points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionFamily {
    assignments: BTreeMap<PointKey, (Vector, Region)>,
    /// Off-support points get `B(x, default_radius)` when set.
    default_radius: Option<f64>,
}

impl RegionFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Family where every point `x` gets `B(x, radius)`.
    pub fn uniform_balls(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid("radius", "must be finite and nonnegative"));
        }
        Ok(Self { assignments: BTreeMap::new(), default_radius: Some(radius) })
    }

    pub fn with_default_radius(mut self, radius: Option<f64>) -> Self {
        self.default_radius = radius;
        self
    }

    pub fn insert(&mut self, anchor: Vector, region: Region) -> Result<()> {
        check_dim(region.dim(), anchor.dim())?;
        self.assignments.insert(PointKey::of(&anchor), (anchor, region));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn default_radius(&self) -> Option<f64> {
        self.default_radius
    }

    /// Region of `x`, falling back to the default ball.
    pub fn region_for(&self, x: &Vector) -> Result<Region> {
        if let Some((_, r)) = self.assignments.get(&PointKey::of(x)) {
            return Ok(r.clone());
        }
        match self.default_radius {
            Some(0.0) => Ok(Region::singleton(x.clone())),
            Some(rad) => Region::ball(x.clone(), rad),
            None => Err(Error::MissingRegion(x.clone())),
        }
    }

    /// Borrowing lookup for explicitly assigned points.
    pub fn assigned(&self, x: &Vector) -> Option<&Region> {
        self.assignments.get(&PointKey::of(x)).map(|(_, r)| r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector, &Region)> {
        self.assignments.values().map(|(a, r)| (a, r))
    }

    /// Anchors whose assigned region does not contain them.
    pub fn anchors_outside(&self) -> Vec<Vector> {
        self.iter().filter(|(a, r)| !r.contains_unchecked(a)).map(|(a, _)| a.clone()).collect()
    }

    /// The family `x -> U_x^gamma`; `gamma = 0` returns a copy.
    pub fn expand(&self, gamma: f64) -> Result<RegionFamily> {
        if gamma == 0.0 {
            return Ok(self.clone());
        }
        check_gamma(gamma)?;
        let assignments = self
            .assignments
            .iter()
            .map(|(k, (a, r))| Ok((k.clone(), (a.clone(), r.expand(gamma)?))))
            .collect::<Result<_>>()?;
        Ok(RegionFamily { assignments, default_radius: self.default_radius.map(|d| d + gamma) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn b(c: [f64; 2], r: f64) -> Ball {
        Ball::new(c.into(), r).unwrap()
    }

    #[test]
    fn expand_examples() {
        let r = Region::ball([0.0, 0.0].into(), 1.0).unwrap();
        assert_eq!(r.expand(0.5).unwrap(), Region::ball([0.0, 0.0].into(), 1.5).unwrap());

        let p = Region::singleton([0.0, 0.0].into());
        assert_eq!(p.expand(2.0).unwrap(), Region::ball([0.0, 0.0].into(), 2.0).unwrap());

        let u = Region::union_of_balls(vec![b([0.0, 0.0], 1.0), b([3.0, 0.0], 1.0)]).unwrap();
        let probe = Vector::from([1.7, 0.0]);
        assert!(!u.contains(&probe).unwrap());
        let e = u.expand(1.0).unwrap();
        assert_eq!(e, Region::union_of_balls(vec![b([0.0, 0.0], 2.0), b([3.0, 0.0], 2.0)]).unwrap());
        assert!(e.contains(&probe).unwrap());
    }

    #[test]
    fn expand_rejects_nonpositive_gamma() {
        let r = Region::singleton([0.0].into());
        assert!(r.expand(0.0).is_err());
        assert!(r.expand(-1.0).is_err());
        assert!(Region::expanded(r, f64::NAN).is_err());
    }

    #[test]
    fn contains_examples() {
        let r = Region::ball([0.0, 0.0].into(), 1.0).unwrap();
        assert!(r.contains(&[1.0, 0.0].into()).unwrap());
        assert!(!r.contains(&[1.0 + 1e-6, 0.0].into()).unwrap());
        let e =
            Region::expanded(Region::finite_points(vec![[0.0, 0.0].into(), [4.0, 0.0].into()]).unwrap(), 1.0).unwrap();
        assert!(e.contains(&[3.2, 0.0].into()).unwrap());
        assert!(r.contains(&[0.0].into()).is_err());
    }

    #[test]
    fn nested_expansion_collapses() {
        let base = Region::singleton([1.0, 1.0].into());
        let e = Region::expanded(Region::expanded(base.clone(), 0.5).unwrap(), 0.25).unwrap();
        match &e {
            Region::Expanded { base: inner, gamma } => {
                assert_eq!(**inner, base);
                assert_eq!(*gamma, 0.75);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(Region::ball([0.0, 0.0].into(), 2.0).unwrap().diameter(), 4.0);
        let p = Region::finite_points(vec![[0.0, 0.0].into(), [3.0, 4.0].into()]).unwrap();
        assert_eq!(p.diameter(), 5.0);
        let u = Region::union_of_balls(vec![b([0.0, 0.0], 1.0), b([10.0, 0.0], 1.0)]).unwrap();
        assert_eq!(u.diameter(), 12.0);
        assert_eq!(p.expand(0.5).unwrap().diameter(), 6.0);
    }

    #[test]
    fn sample_ball_mean() {
        let r = Region::ball([0.0, 0.0].into(), 1.0).unwrap();
        let mut rng = rng_from_seed(1);
        let pts = r.uniform_sample(10_000, &mut rng).unwrap();
        for axis in 0..2 {
            let m: f64 = pts.iter().map(|p| p.coords()[axis]).sum::<f64>() / pts.len() as f64;
            assert!(m.abs() < 0.05, "axis {axis} mean {m}");
        }
        assert!(pts.iter().all(|p| r.contains(p).unwrap()));
    }

    #[test]
    fn sample_union_split() {
        let r = Region::union_of_balls(vec![b([0.0, 0.0], 1.0), b([10.0, 0.0], 1.0)]).unwrap();
        let mut rng = rng_from_seed(2);
        let pts = r.uniform_sample(10_000, &mut rng).unwrap();
        let second = pts.iter().filter(|p| p.coords()[0] > 5.0).count() as f64 / 1e4;
        assert!((second - 0.5).abs() < 0.02, "{second}");
    }

    #[test]
    fn sample_zero_measure_rejected() {
        let mut rng = rng_from_seed(3);
        let r = Region::ball([5.0, 5.0].into(), 0.0).unwrap();
        assert_eq!(r.uniform_sample(1, &mut rng).unwrap_err(), Error::ZeroMeasure);
        let p = Region::singleton([0.0].into());
        assert_eq!(p.uniform_sample(1, &mut rng).unwrap_err(), Error::ZeroMeasure);
    }

    #[test]
    fn sample_low_acceptance_aborts() {
        // a tiny ball far from a big one: the bounding box is mostly empty
        let r = Region::union_of_balls(vec![
            Ball::new([0.0, 0.0, 0.0].into(), 1e-3).unwrap(),
            Ball::new([1e3, 1e3, 1e3].into(), 1e-3).unwrap(),
        ])
        .unwrap();
        let mut rng = rng_from_seed(4);
        assert!(matches!(r.uniform_sample(1, &mut rng), Err(Error::LowAcceptance { .. })));
    }

    #[test]
    fn linear_extrema_match_enumeration() {
        let w = Vector::from([1.0, -2.0]);
        let base = Region::finite_points(vec![[0.0, 0.0].into(), [1.0, 1.0].into()]).unwrap();
        let (lo, hi) = base.linear_extrema(&w, 0.5).unwrap();
        assert_eq!((lo, hi), (-0.5, 0.5));
        let e = Region::expanded(base, 1.0).unwrap();
        let (lo2, hi2) = e.linear_extrema(&w, 0.5).unwrap();
        let s5 = 5f64.sqrt();
        assert!((lo2 - (-0.5 - s5)).abs() < 1e-12 && (hi2 - (0.5 + s5)).abs() < 1e-12);
        assert_eq!(e.normalized().linear_extrema(&w, 0.5).unwrap(), (lo2, hi2));
    }

    #[test]
    fn center_distance_extrema_ball() {
        let r = Region::ball([3.0, 0.0].into(), 1.0).unwrap();
        assert_eq!(r.center_distance_extrema(&[0.0, 0.0].into()).unwrap(), (2.0, 4.0));
        assert_eq!(r.center_distance_extrema(&[3.5, 0.0].into()).unwrap(), (0.0, 1.5));
    }

    #[test]
    fn family_lookup_and_expand() {
        let mut fam = RegionFamily::new();
        let x = Vector::from([1.0, 2.0]);
        fam.insert(x.clone(), Region::ball(x.clone(), 0.5).unwrap()).unwrap();
        assert!(fam.region_for(&[1.0 + 1e-14, 2.0].into()).is_ok());
        assert_eq!(fam.region_for(&[0.0, 0.0].into()).unwrap_err(), Error::MissingRegion([0.0, 0.0].into()));
        let e = fam.expand(0.25).unwrap();
        assert_eq!(e.region_for(&x).unwrap(), Region::ball(x.clone(), 0.75).unwrap());
        assert!(fam.anchors_outside().is_empty());

        let dflt = RegionFamily::uniform_balls(0.0).unwrap();
        assert_eq!(dflt.region_for(&x).unwrap(), Region::singleton(x.clone()));
        assert_eq!(dflt.expand(1.0).unwrap().region_for(&x).unwrap(), Region::ball(x, 1.0).unwrap());
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let r = Region::expanded(Region::union_of_balls(vec![b([0.0, 0.0], 1.0), b([2.0, 0.0], 0.5)]).unwrap(), 0.25)
            .unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: Region = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<Region>(r#"{"kind":"finite_points","points":[]}"#).is_err());
        assert!(serde_json::from_str::<Region>(r#"{"kind":"ball","center":[0.0],"radius":-1.0}"#).is_err());
    }
}
