//! Seeded random instances shared by the experiments and the acceptance suite.
//!
//! Tolerant tasks are planar, finite-support distributions whose atoms carry
//! mixed region types. Their classes hold halfplanes and spheres of radius at
//! least one, which are `alpha`-regular for every `alpha <= 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cover::{build_v_balls, build_v_grid, SandwichTriple};
use crate::error::{invalid, Result};
use crate::geometry::{sample_unit_sphere, Ball, Vector};
use crate::model::{DiscreteDistribution, FiniteClass, Hypothesis, Label, LabeledExample};
use crate::perturbation::{Region, RegionFamily};
use crate::rng::{rng_from_seed, seed_derive_indexed, LabRng};

/// Shape parameters for [`random_tolerant_task`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskShape {
    pub atoms: usize,
    pub linear_hypotheses: usize,
    pub sphere_hypotheses: usize,
    /// Atoms lie in `[-box_half_width, box_half_width]^2`.
    pub box_half_width: f64,
    /// Largest region radius before expansion.
    pub region_scale: f64,
    /// Probability that an atom's teacher label is flipped.
    pub label_noise: f64,
}

impl Default for TaskShape {
    fn default() -> Self {
        Self {
            atoms: 8,
            linear_hypotheses: 48,
            sphere_hypotheses: 16,
            box_half_width: 5.0,
            region_scale: 0.6,
            label_noise: 0.15,
        }
    }
}

/// A finite-support task with its family and finite class.
#[derive(Clone, Debug, PartialEq)]
pub struct TolerantTask {
    pub family: RegionFamily,
    pub dist: DiscreteDistribution,
    pub class: FiniteClass,
}

/// Smallest sphere radius in generated classes.
pub const MIN_SPHERE_RADIUS: f64 = 1.0;

fn uniform_point(rng: &mut LabRng, half: f64) -> Vector {
    Vector::from([rng.random_range(-half..=half), rng.random_range(-half..=half)])
}

/// A random region around `x`: a few points, a ball, or a union of two balls.
pub fn random_region(x: &Vector, scale: f64, rng: &mut LabRng) -> Result<Region> {
    let jitter = |rng: &mut LabRng| x.add_scaled(&sample_unit_sphere(2, rng), scale * rng.random::<f64>());
    match rng.random_range(0..3) {
        0 => {
            let k = rng.random_range(1..=3);
            let mut pts = vec![x.clone()];
            pts.extend((1..k).map(|_| jitter(rng)));
            Region::finite_points(pts)
        }
        1 => Region::ball(x.clone(), scale * rng.random_range(0.2..=1.0)),
        _ => {
            let other = jitter(rng);
            Region::union_of_balls(vec![
                Ball::new(x.clone(), scale * rng.random_range(0.2..=0.7))?,
                Ball::new(other, scale * rng.random_range(0.2..=0.7))?,
            ])
        }
    }
}

/// Halfplanes and spheres placed to cut through the atom box.
pub fn random_regular_class(shape: &TaskShape, rng: &mut LabRng) -> Result<FiniteClass> {
    let half = shape.box_half_width;
    let mut hs = Vec::with_capacity(shape.linear_hypotheses + shape.sphere_hypotheses);
    for _ in 0..shape.linear_hypotheses {
        let w = sample_unit_sphere(2, rng);
        hs.push(Hypothesis::linear(w, rng.random_range(-half..=half))?);
    }
    for _ in 0..shape.sphere_hypotheses {
        let radius = rng.random_range(MIN_SPHERE_RADIUS..=MIN_SPHERE_RADIUS + half);
        let inside = if rng.random::<bool>() { Label::Pos } else { Label::Neg };
        hs.push(Hypothesis::sphere(uniform_point(rng, half), radius, inside)?);
    }
    FiniteClass::new(hs)
}

/// Atoms labeled by a class member, each label flipped with probability
/// `label_noise`, masses drawn from a flat Dirichlet.
pub fn random_tolerant_task(shape: &TaskShape, seed: u64) -> Result<TolerantTask> {
    if shape.atoms == 0 || shape.linear_hypotheses + shape.sphere_hypotheses == 0 {
        return Err(invalid("shape", "needs at least one atom and one hypothesis"));
    }
    if !(0.0..=0.5).contains(&shape.label_noise) {
        return Err(invalid("label_noise", "must lie in [0, 0.5]"));
    }
    let mut rng = rng_from_seed(seed);
    let class = random_regular_class(shape, &mut rng)?;
    let teacher = class.get(rng.random_range(0..class.len())).clone();
    let mut family = RegionFamily::new();
    let mut atoms = Vec::with_capacity(shape.atoms);
    let mut masses: Vec<f64> = (0..shape.atoms).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    for mass in masses {
        let x = uniform_point(&mut rng, shape.box_half_width);
        if family.assigned(&x).is_some() {
            continue;
        }
        family.insert(x.clone(), random_region(&x, shape.region_scale, &mut rng)?)?;
        let mut y = teacher.predict(&x)?;
        if rng.random::<f64>() < shape.label_noise {
            y = y.flip();
        }
        atoms.push((LabeledExample::new(x, y), mass));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.iter_mut().for_each(|a| a.1 /= total);
    Ok(TolerantTask { family, dist: DiscreteDistribution::new(atoms)?, class })
}

/// One randomized loss-sandwich case.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichCase {
    pub triple: SandwichTriple,
    pub hypothesis: Hypothesis,
    pub example: LabeledExample,
}

/// A random base region around the origin, a grid or union-of-balls triple,
/// and a regular hypothesis whose boundary passes between the lower and
/// upper shells more often than not.
pub fn random_sandwich_case(balls: bool, seed: u64) -> Result<SandwichCase> {
    let mut rng = rng_from_seed(seed);
    let origin = Vector::zeros(2);
    let base = if rng.random::<bool>() {
        Region::finite_points(vec![origin.clone(), uniform_point(&mut rng, 0.5)])?
    } else {
        Region::ball(origin.clone(), rng.random_range(0.1..=0.4))?
    };
    let r = rng.random_range(0.3..=0.8);
    let alpha = r * rng.random_range(0.2..=0.5);
    let triple = if balls { build_v_balls(&base, r, alpha)? } else { build_v_grid(&base, r, alpha)? };
    // distance from the origin to the boundary, around the outer shell
    let (_, reach) = base.center_distance_extrema(&origin)?;
    let t = reach + rng.random_range((r - 2.0 * alpha).max(0.0)..=r + alpha);
    let u = sample_unit_sphere(2, &mut rng);
    let hypothesis = if rng.random::<bool>() {
        Hypothesis::linear(u.scale(-1.0), t)?
    } else {
        let radius = rng.random_range(MIN_SPHERE_RADIUS..=3.0);
        Hypothesis::sphere(u.scale(t + radius), radius, Label::Neg)?
    };
    let y = if rng.random_range(0..4) == 0 { Label::Neg } else { Label::Pos };
    Ok(SandwichCase { triple, hypothesis, example: LabeledExample::new(origin, y) })
}

/// Seeds for `count` independent instances under a label.
pub fn instance_seeds(master: u64, label: &str, count: usize) -> Vec<u64> {
    (0..count).map(|i| seed_derive_indexed(master, label, i as u64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::robust_loss_distribution;

    #[test]
    fn tasks_are_reproducible_and_valid() {
        let shape = TaskShape::default();
        let a = random_tolerant_task(&shape, 11).unwrap();
        let b = random_tolerant_task(&shape, 11).unwrap();
        assert_eq!(a, b);
        assert!(!a.dist.is_empty() && a.dist.len() <= shape.atoms);
        let sum: f64 = a.dist.atoms().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for h in a.class.hypotheses() {
            let l = robust_loss_distribution(h, &a.family, &a.dist).unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn region_types_are_mixed() {
        let mut rng = rng_from_seed(4);
        let x = Vector::zeros(2);
        let mut kinds = [0usize; 3];
        for _ in 0..300 {
            match random_region(&x, 0.5, &mut rng).unwrap() {
                Region::FinitePoints(_) => kinds[0] += 1,
                Region::Ball(_) => kinds[1] += 1,
                Region::UnionOfBalls(_) => kinds[2] += 1,
                Region::Expanded { .. } => unreachable!(),
            }
        }
        assert!(kinds.iter().all(|&k| k > 50), "{kinds:?}");
    }

    #[test]
    fn sandwich_cases_vary_losses() {
        let mut seen = [false; 2];
        for s in 0..200 {
            let c = random_sandwich_case(false, s).unwrap();
            let upper = c.hypothesis.robust_violation(&c.triple.upper, c.example.y).unwrap();
            seen[upper as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }
}
