//! Euclidean primitives: points, closed balls, axis-aligned boxes, uniform
//! sphere sampling, and the two covering constructions used by the lower-bound
//! and covering modules (randomized greedy sphere nets, grid ball covers).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::perturbation::Region;
use crate::rng::rng_from_seed;

/// Absolute tolerance for exact-geometry assertions.
pub const GEOM_TOL: f64 = 1e-9;

/// A point of `R^d` with `d >= 1` finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("coords", "a vector needs at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid("coords", format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        Self(vec![0.0; d])
    }

    /// The `axis`-th canonical basis vector of `R^d`.
    pub fn basis(d: usize, axis: usize) -> Self {
        let mut v = Self::zeros(d);
        v.0[axis] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, t: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * t).collect())
    }

    /// `self + t * dir`
    pub fn add_scaled(&self, dir: &Vector, t: f64) -> Vector {
        debug_assert_eq!(self.dim(), dir.dim());
        Vector(self.0.iter().zip(&dir.0).map(|(a, b)| a + t * b).collect())
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    /// Euclidean distance without a dimension check.
    pub fn dist(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// Convenience literal constructor; panics on an empty or non-finite array.
impl<const N: usize> From<[f64; N]> for Vector {
    fn from(a: [f64; N]) -> Self {
        Vector::new(a.to_vec()).expect("invalid vector literal")
    }
}

/// Euclidean distance `||a - b||`.
pub fn distance(a: &Vector, b: &Vector) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.dist(b))
}

/// Infimum of the distance from `p` to the points of `region`.
pub fn point_to_region_distance(p: &Vector, region: &Region) -> Result<f64> {
    region.distance_to(p)
}

/// Closed Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid("radius", format!("{radius} is not a finite nonnegative number")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, p: &Vector) -> bool {
        self.center.dist(p) <= self.radius
    }

    pub fn distance_to(&self, p: &Vector) -> f64 {
        (self.center.dist(p) - self.radius).max(0.0)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            lo: self.center.coords().iter().map(|c| c - self.radius).collect(),
            hi: self.center.coords().iter().map(|c| c + self.radius).collect(),
        }
    }

    /// Whether the two closed balls share at least one point.
    pub fn intersects(&self, other: &Ball) -> bool {
        self.center.dist(&other.center) <= self.radius + other.radius
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn of_point(p: &Vector) -> Self {
        Self { lo: p.coords().to_vec(), hi: p.coords().to_vec() }
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn inflate(&self, by: f64) -> BoundingBox {
        BoundingBox { lo: self.lo.iter().map(|a| a - by).collect(), hi: self.hi.iter().map(|a| a + by).collect() }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        Vector(self.lo.iter().zip(&self.hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect())
    }
}

/// Uniform point on the unit sphere `S^{d-1}` (normalized Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if let Some(u) = Vector(g).normalized() {
            return u;
        }
    }
}

/// Uniform point in the closed ball (direction times `radius * U^{1/d}`).
pub fn sample_in_ball<R: Rng + ?Sized>(ball: &Ball, rng: &mut R) -> Vector {
    let d = ball.dim();
    let u = sample_unit_sphere(d, rng);
    let t = ball.radius * rng.random::<f64>().powf(1.0 / d as f64);
    ball.center.add_scaled(&u, t)
}

/// Tuning knobs for [`greedy_sphere_cover`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyCoverOptions {
    /// Stop the greedy phase after `rejection_factor * centers` consecutive rejections.
    pub rejection_factor: usize,
    /// Fresh probes used to certify maximality after each greedy phase.
    pub certificate_probes: usize,
    /// Upper bound on greedy/certify rounds.
    pub max_rounds: usize,
}

impl Default for GreedyCoverOptions {
    fn default() -> Self {
        Self { rejection_factor: 10_000, certificate_probes: 10_000, max_rounds: 16 }
    }
}

/// Outcome of the probabilistic maximality check of a greedy net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalityCertificate {
    pub probes: usize,
    /// Probes of the final batch that were farther than `mesh` from every center.
    pub uncovered: usize,
    pub rounds: usize,
}

impl MaximalityCertificate {
    pub fn passed(&self) -> bool {
        self.uncovered == 0
    }
}

/// A greedy `mesh`-separated net of the sphere of radius `sphere_radius`
/// centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCover {
    pub sphere_radius: f64,
    pub mesh: f64,
    pub centers: Vec<Vector>,
    pub certificate: MaximalityCertificate,
}

impl SphereCover {
    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    /// Index of the nearest center (lowest index on exact ties).
    pub fn nearest(&self, p: &Vector) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = c.dist(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn sample_sphere<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        sample_unit_sphere(self.dim(), rng).scale(self.sphere_radius)
    }
}

/// Randomized greedy `mesh`-net of the sphere `S^{d-1}` of the given radius,
/// with the default [`GreedyCoverOptions`].
pub fn greedy_sphere_cover(d: usize, sphere_radius: f64, mesh: f64, seed: u64) -> Result<SphereCover> {
    greedy_sphere_cover_with(d, sphere_radius, mesh, seed, GreedyCoverOptions::default())
}

pub fn greedy_sphere_cover_with(
    d: usize,
    sphere_radius: f64,
    mesh: f64,
    seed: u64,
    opts: GreedyCoverOptions,
) -> Result<SphereCover> {
    if d < 2 {
        return Err(invalid("d", "sphere covers need d >= 2"));
    }
    if !(sphere_radius.is_finite() && sphere_radius > 0.0) {
        return Err(invalid("sphere_radius", "must be positive"));
    }
    if !(mesh.is_finite() && mesh > 0.0) {
        return Err(invalid("mesh", "must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let draw = |rng: &mut crate::rng::LabRng| sample_unit_sphere(d, rng).scale(sphere_radius);
    let mut centers = vec![draw(&mut rng)];

    // Every point of the sphere is within 2R of the first center.
    if mesh >= 2.0 * sphere_radius {
        return Ok(SphereCover {
            sphere_radius,
            mesh,
            centers,
            certificate: MaximalityCertificate { probes: 0, uncovered: 0, rounds: 0 },
        });
    }

    let far = |centers: &[Vector], p: &Vector| centers.iter().all(|c| c.dist(p) > mesh);
    let mut rounds = 0;
    let mut uncovered;
    loop {
        rounds += 1;
        let mut streak = 0usize;
        while streak < opts.rejection_factor * centers.len() {
            let p = draw(&mut rng);
            if far(&centers, &p) {
                centers.push(p);
                streak = 0;
            } else {
                streak += 1;
            }
        }
        // Certification batch: uncovered probes are themselves valid greedy picks.
        uncovered = 0;
        for _ in 0..opts.certificate_probes {
            let p = draw(&mut rng);
            if far(&centers, &p) {
                centers.push(p);
                uncovered += 1;
            }
        }
        if uncovered == 0 || rounds >= opts.max_rounds {
            break;
        }
    }
    Ok(SphereCover {
        sphere_radius,
        mesh,
        centers,
        certificate: MaximalityCertificate { probes: opts.certificate_probes, uncovered, rounds },
    })
}

/// Largest grid admitted by [`cover_compact_by_balls`].
pub const MAX_GRID_NODES: u64 = 20_000_000;

const GRID_SHRINK: f64 = 1.0 - 1e-6;

/// Grid pitch used by [`cover_compact_by_balls`] in dimension `d`.
pub fn grid_pitch(ball_radius: f64, d: usize) -> f64 {
    ball_radius * 2.0 / (d as f64).sqrt() * GRID_SHRINK
}

/// The constant `C` in `count <= C * (diam / ball_radius + 1)^d` for the grid cover.
pub fn grid_constant(d: usize) -> f64 {
    let per_axis = ((d as f64).sqrt() / (2.0 * GRID_SHRINK)).max(2.0);
    per_axis.powi(d as i32)
}

/// Upper bound on the number of balls returned by [`cover_compact_by_balls`].
pub fn grid_cover_bound(diameter: f64, ball_radius: f64, d: usize) -> f64 {
    grid_constant(d) * (diameter / ball_radius + 1.0).powi(d as i32)
}

/// Covers `target` by closed balls of radius `ball_radius`.
///
/// Nodes of an axis-aligned grid of pitch `ball_radius * 2/sqrt(d) * (1 - 1e-6)`
/// anchored at the lower corner of the bounding box are kept when they lie
/// within half a cell diagonal of the target. Every point of the target is then
/// within `ball_radius` of a kept node. Centers need not lie in the target.
pub fn cover_compact_by_balls(target: &Region, ball_radius: f64) -> Result<Vec<Ball>> {
    if !(ball_radius.is_finite() && ball_radius > 0.0) {
        return Err(invalid("ball_radius", "must be positive"));
    }
    let d = target.dim();
    let pitch = grid_pitch(ball_radius, d);
    let keep = pitch * (d as f64).sqrt() / 2.0;
    let bbox = target.bounding_box();
    let counts: Vec<u64> = bbox.lo.iter().zip(&bbox.hi).map(|(l, h)| ((h - l) / pitch).ceil() as u64 + 1).collect();
    let total = counts.iter().try_fold(1u64, |acc, &c| acc.checked_mul(c));
    match total {
        Some(t) if t <= MAX_GRID_NODES => {}
        _ => return Err(invalid("ball_radius", format!("grid cover would need more than {MAX_GRID_NODES} nodes"))),
    }

    let mut balls = Vec::new();
    let mut idx = vec![0u64; d];
    loop {
        let node = Vector(idx.iter().zip(&bbox.lo).map(|(&k, l)| l + k as f64 * pitch).collect());
        if target.distance_to(&node)? <= keep {
            balls.push(Ball { center: node, radius: ball_radius });
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(balls);
            }
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0].into(), &[0.0, 0.0].into()).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0].into(), &[3.0, 4.0].into()).unwrap(), 5.0);
        let d = distance(&[1.0, 1.0, 1.0].into(), &[2.0, 3.0, 5.0].into()).unwrap();
        assert!((d - 21f64.sqrt()).abs() < 1e-12);
        assert!((d - 4.5826).abs() < 1e-4);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let err = distance(&[0.0].into(), &[0.0, 1.0].into()).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn vector_rejects_empty_and_nan() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    #[test]
    fn point_to_region_examples() {
        let ball = Region::ball([0.0, 0.0].into(), 1.0).unwrap();
        assert_eq!(point_to_region_distance(&[0.0, 0.0].into(), &ball).unwrap(), 0.0);
        assert_eq!(point_to_region_distance(&[3.0, 0.0].into(), &ball).unwrap(), 2.0);
        let pts = Region::finite_points(vec![[0.0, 0.0].into(), [1.0, 1.0].into()]).unwrap();
        let d = point_to_region_distance(&[2.0, 2.0].into(), &pts).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    fn assert_separated(cover: &SphereCover) {
        for (i, a) in cover.centers.iter().enumerate() {
            assert!((a.norm() - cover.sphere_radius).abs() <= 1e-9 * cover.sphere_radius);
            for b in &cover.centers[i + 1..] {
                assert!(a.dist(b) > cover.mesh);
            }
        }
    }

    #[test]
    fn sphere_cover_coarse_mesh() {
        let cover = greedy_sphere_cover(2, 1.0, 1.9, 3).unwrap();
        assert!(cover.centers.len() >= 2);
        assert_separated(&cover);
        assert!(cover.certificate.passed());
    }

    #[test]
    fn sphere_cover_circle_count_window() {
        for seed in 0..5 {
            let cover = greedy_sphere_cover(2, 1.0, 0.5, seed).unwrap();
            let n = cover.centers.len();
            assert!((7..=12).contains(&n), "seed {seed}: {n} centers");
            assert_separated(&cover);
            assert!(cover.certificate.passed());
        }
    }

    /// Brute-force oracle: for random triples on S^2, a dense Fibonacci
    /// lattice always contains a point farther than 1 from all three, so no
    /// three points form a 1-cover and a maximal 1-net needs at least four.
    #[test]
    fn sphere_cover_s2_needs_four() {
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let lattice: Vec<Vector> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                Vector::from([rho * th.cos(), rho * th.sin(), z])
            })
            .collect();
        let mut rng = rng_from_seed(11);
        for _ in 0..300 {
            let tri: Vec<Vector> = (0..3).map(|_| sample_unit_sphere(3, &mut rng)).collect();
            assert!(lattice.iter().any(|p| tri.iter().all(|t| t.dist(p) > 1.0)));
        }
        let cover = greedy_sphere_cover(3, 1.0, 1.0, 5).unwrap();
        assert!(cover.centers.len() >= 4);
        assert_separated(&cover);
        let mut rng = rng_from_seed(12);
        for _ in 0..10_000 {
            let p = sample_unit_sphere(3, &mut rng);
            assert!(cover.centers.iter().any(|c| c.dist(&p) <= 1.0));
        }
    }

    #[test]
    fn sphere_cover_rejects_d1() {
        assert!(greedy_sphere_cover(1, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn sphere_cover_is_deterministic() {
        let a = greedy_sphere_cover(3, 2.0, 0.8, 42).unwrap();
        let b = greedy_sphere_cover(3, 2.0, 0.8, 42).unwrap();
        assert_eq!(a, b);
    }

    fn assert_covers(target: &Region, balls: &[Ball], probes: usize, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for p in target.uniform_sample(probes, &mut rng).unwrap() {
            let best = balls.iter().map(|b| b.center.dist(&p)).fold(f64::INFINITY, f64::min);
            assert!(best <= balls[0].radius, "probe {p:?} uncovered ({best})");
        }
    }

    #[test]
    fn grid_cover_single_point() {
        let target = Region::ball([0.0, 0.0].into(), 0.0).unwrap();
        let balls = cover_compact_by_balls(&target, 1.0).unwrap();
        assert_eq!(balls.len(), 1);
    }

    #[test]
    fn grid_cover_interval() {
        let target = Region::ball([0.0].into(), 1.0).unwrap();
        let balls = cover_compact_by_balls(&target, 0.5).unwrap();
        assert!(balls.len() <= 5, "{} balls", balls.len());
        // dense deterministic probe of [-1, 1]
        for k in 0..=20_000 {
            let x = -1.0 + 2.0 * k as f64 / 20_000.0;
            let p = Vector::from([x]);
            assert!(balls.iter().any(|b| b.contains(&p)), "{x} uncovered");
        }
    }

    #[test]
    fn grid_cover_two_disks() {
        let target = Region::union_of_balls(vec![
            Ball::new([0.0, 0.0].into(), 1.0).unwrap(),
            Ball::new([5.0, 0.0].into(), 1.0).unwrap(),
        ])
        .unwrap();
        let balls = cover_compact_by_balls(&target, 0.5).unwrap();
        assert!(balls.len() <= 50, "{} balls", balls.len());
        assert_covers(&target, &balls, 10_000, 9);
    }

    #[test]
    fn grid_cover_count_bound_holds() {
        let mut rng = rng_from_seed(1);
        for d in 1..=3 {
            for _ in 0..5 {
                let r: f64 = rng.random_range(0.1..2.0);
                let rho: f64 = rng.random_range(0.05..0.6);
                let target = Region::ball(Vector::zeros(d), r).unwrap();
                let balls = cover_compact_by_balls(&target, rho).unwrap();
                assert!(balls.len() as f64 <= grid_cover_bound(target.diameter(), rho, d));
                assert_covers(&target, &balls, 2_000, 3);
            }
        }
    }

    #[test]
    fn sample_in_ball_stays_inside() {
        let mut rng = rng_from_seed(0);
        let b = Ball::new([1.0, -2.0, 0.5].into(), 0.7).unwrap();
        for _ in 0..1000 {
            assert!(b.center.dist(&sample_in_ball(&b, &mut rng)) <= 0.7 + 1e-12);
        }
    }
}
