//! Distributional checks at significance `1e-3`.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use tolrerm_core::rerm::inflation_floor;
use tolrerm_core::rng::{rng_from_seed, seed_derive_indexed};
use tolrerm_core::stats::{ks_critical_1e3, ks_statistic};
use tolrerm_core::tasks::{random_tolerant_task, TaskShape};
use tolrerm_core::{tolrerm, Ball, Region, RermOracle, Vector};

#[test]
fn inflation_radius_is_uniform() {
    let task = random_tolerant_task(&TaskShape::default(), 5).unwrap();
    let oracle = RermOracle::ExhaustiveFinite(task.class.clone());
    let (eps, delta, gamma) = (0.3, 0.2, 0.8);
    let lo = inflation_floor(eps, delta, gamma);
    let rs: Vec<f64> = (0..4_000)
        .map(|i| {
            tolrerm(&oracle, &task.family, &task.dist, eps, delta, gamma, 1, seed_derive_indexed(42, "ks", i))
                .unwrap()
                .r_used
        })
        .collect();
    assert!(rs.iter().all(|r| (lo..=gamma).contains(r)));
    let d = ks_statistic(&rs, |x| ((x - lo) / (gamma - lo)).clamp(0.0, 1.0));
    assert!(d < ks_critical_1e3(rs.len()), "KS statistic {d}");
}

#[test]
fn ks_rejects_a_shifted_distribution() {
    let xs: Vec<f64> = (0..4_000).map(|i| (i as f64 / 4_000.0).powi(2)).collect();
    assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) > ks_critical_1e3(xs.len()));
}

/// Counts over grid cells that lie inside one ball; equal areas, so equal
/// expected counts under Lebesgue-uniform sampling.
fn chi_square_on_inner_cells(region: &Region, balls: &[Ball], n: usize, cells: usize, seed: u64) -> (f64, usize) {
    let bb = region.bounding_box();
    let (w, h) = ((bb.hi[0] - bb.lo[0]) / cells as f64, (bb.hi[1] - bb.lo[1]) / cells as f64);
    let corner = |i: usize, j: usize| Vector::from([bb.lo[0] + i as f64 * w, bb.lo[1] + j as f64 * h]);
    let inner: Vec<bool> = (0..cells * cells)
        .map(|c| {
            let (i, j) = (c % cells, c / cells);
            balls.iter().any(|b| {
                [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].iter().all(|&(a, c)| b.contains(&corner(a, c)))
            })
        })
        .collect();
    let mut counts = vec![0usize; cells * cells];
    for p in region.uniform_sample(n, &mut rng_from_seed(seed)).unwrap() {
        let i = (((p.coords()[0] - bb.lo[0]) / w) as usize).min(cells - 1);
        let j = (((p.coords()[1] - bb.lo[1]) / h) as usize).min(cells - 1);
        counts[j * cells + i] += 1;
    }
    let kept: Vec<f64> = counts.iter().zip(&inner).filter(|(_, &k)| k).map(|(&c, _)| c as f64).collect();
    let expected = kept.iter().sum::<f64>() / kept.len() as f64;
    (kept.iter().map(|c| (c - expected).powi(2) / expected).sum(), kept.len() - 1)
}

#[test]
fn overlapping_union_is_sampled_uniformly() {
    let balls =
        vec![Ball::new(Vector::from([0.0, 0.0]), 1.0).unwrap(), Ball::new(Vector::from([1.2, 0.3]), 0.8).unwrap()];
    let region = Region::union_of_balls(balls.clone()).unwrap();
    let (stat, dof) = chi_square_on_inner_cells(&region, &balls, 200_000, 12, 3);
    let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(1.0 - 1e-3);
    assert!(stat < critical, "chi-square {stat} over {dof} dof, critical {critical}");
}

#[test]
fn per_ball_mixture_fails_the_same_test() {
    // picking a ball at random and sampling inside it overweights the overlap
    let balls =
        vec![Ball::new(Vector::from([0.0, 0.0]), 1.0).unwrap(), Ball::new(Vector::from([0.5, 0.0]), 1.0).unwrap()];
    let union = Region::union_of_balls(balls.clone()).unwrap();
    let mut rng = rng_from_seed(8);
    let mut mixed = Vec::new();
    for i in 0..200_000 {
        let b = &balls[i % 2];
        mixed.extend(Region::ball(b.center.clone(), b.radius).unwrap().uniform_sample(1, &mut rng).unwrap());
    }
    // the overlap is about 52% of the union by area but draws about 69% of the mixture
    let in_both = mixed.iter().filter(|p| balls.iter().all(|b| b.contains(p))).count() as f64 / mixed.len() as f64;
    let uniform = union.uniform_sample(200_000, &mut rng).unwrap();
    let in_both_uniform =
        uniform.iter().filter(|p| balls.iter().all(|b| b.contains(p))).count() as f64 / uniform.len() as f64;
    assert!(in_both - in_both_uniform > 0.05, "{in_both} vs {in_both_uniform}");
}
