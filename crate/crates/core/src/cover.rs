//! Sandwich regions `U^{r-alpha} ⊆ V^r ⊆ U^r` and their loss audit.
//!
//! Two middles are built. The finite one keeps the grid nodes of an
//! `alpha/2` cover of `U^r` that lie in `U^r`; it sandwiches the loss of
//! `alpha`-regular hypotheses. The union-of-balls one keeps the `alpha/2`
//! balls of a cover of `U^{r-alpha}` that meet it; it sandwiches the sets
//! themselves, hence the loss of every hypothesis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{cover_compact_by_balls, grid_constant, Ball, Vector};
use crate::model::{regularity_check, Hypothesis, LabeledExample, RegularityCertificate};
use crate::perturbation::Region;
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SandwichKind {
    /// Finite grid points inside `U^r`.
    FinitePoints,
    /// Union of `alpha/2` balls meeting `U^{r-alpha}`.
    UnionOfBalls,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichTriple {
    pub kind: SandwichKind,
    pub lower: Region,
    pub middle: Region,
    pub upper: Region,
    pub alpha: f64,
    pub r: f64,
}

impl SandwichTriple {
    /// Number of points or balls in the middle region.
    pub fn middle_count(&self) -> usize {
        match &self.middle {
            Region::FinitePoints(p) => p.len(),
            Region::UnionOfBalls(b) => b.len(),
            _ => 1,
        }
    }
}

/// The constant `C` in `|V^r| <= C (diam(U^r)/alpha + 1)^d` for the grid middles.
pub fn sandwich_constant(d: usize) -> f64 {
    grid_constant(d) * 2f64.powi(d as i32)
}

/// Count bound `C (diam(base)/alpha + 2r/alpha + 1)^d`.
pub fn sandwich_count_bound(base: &Region, r: f64, alpha: f64) -> f64 {
    let d = base.dim();
    sandwich_constant(d) * ((base.diameter() + 2.0 * r) / alpha + 1.0).powi(d as i32)
}

fn check_alpha_r(alpha: f64, r: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha", "must be finite and positive"));
    }
    if !(r.is_finite() && alpha < r) {
        return Err(invalid("alpha", format!("alpha = {alpha} must be smaller than r = {r}")));
    }
    Ok(())
}

fn check_count(triple: &SandwichTriple, base: &Region) -> Result<()> {
    let bound = sandwich_count_bound(base, triple.r, triple.alpha);
    if triple.middle_count() as f64 > bound {
        return Err(Error::AuditFailure(format!("middle has {} elements, bound is {bound}", triple.middle_count())));
    }
    Ok(())
}

/// Finite middle: grid nodes of an `alpha/2` cover of `U^r` that lie in `U^r`.
pub fn build_v_grid(base: &Region, r: f64, alpha: f64) -> Result<SandwichTriple> {
    check_alpha_r(alpha, r)?;
    let upper = base.expand(r)?;
    let lower = base.expand_or_keep(r - alpha)?;
    let mut nodes = Vec::new();
    for ball in cover_compact_by_balls(&upper, alpha / 2.0)? {
        if upper.contains(&ball.center)? {
            nodes.push(ball.center);
        }
    }
    if nodes.is_empty() {
        return Err(Error::AuditFailure("no grid node inside the inflated region".into()));
    }
    let triple = SandwichTriple {
        kind: SandwichKind::FinitePoints,
        lower,
        middle: Region::FinitePoints(nodes),
        upper,
        alpha,
        r,
    };
    check_count(&triple, base)?;
    Ok(triple)
}

/// Union-of-balls middle: `alpha/2` balls covering `U^{r-alpha}`, each meeting it.
pub fn build_v_balls(base: &Region, r: f64, alpha: f64) -> Result<SandwichTriple> {
    check_alpha_r(alpha, r)?;
    let upper = base.expand(r)?;
    let lower = base.expand_or_keep(r - alpha)?;
    let mut balls: Vec<Ball> = Vec::new();
    for ball in cover_compact_by_balls(&lower, alpha / 2.0)? {
        if lower.distance_to(&ball.center)? <= ball.radius {
            balls.push(ball);
        }
    }
    let triple = SandwichTriple {
        kind: SandwichKind::UnionOfBalls,
        lower,
        middle: Region::union_of_balls(balls)?,
        upper,
        alpha,
        r,
    };
    check_count(&triple, base)?;
    Ok(triple)
}

/// A failed inequality in the loss sandwich.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichViolation {
    pub hypothesis: usize,
    pub example: usize,
    /// Losses on lower, middle and upper.
    pub losses: [u8; 3],
    /// Whether the hypothesis passed its regularity certificate.
    pub certified_regular: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: Vec<SandwichViolation>,
    /// Regularity certificates at `alpha` (finite middles only).
    pub certificates: Vec<Option<RegularityCertificate>>,
}

impl SandwichReport {
    /// Violations not excused by a failed regularity certificate.
    pub fn unexplained(&self) -> Vec<&SandwichViolation> {
        self.violations.iter().filter(|v| v.certified_regular).collect()
    }

    pub fn passed(&self) -> bool {
        self.unexplained().is_empty()
    }
}

/// Probes used by [`sandwich_audit`] for each regularity certificate.
pub const REGULARITY_PROBES: usize = 2_000;

/// Checks `l(lower) <= l(middle) <= l(upper)` for every hypothesis and label.
/// Regions belong to the triple; each example contributes its label.
pub fn sandwich_audit(
    triple: &SandwichTriple,
    hypotheses: &[Hypothesis],
    examples: &[LabeledExample],
    seed: u64,
) -> Result<SandwichReport> {
    let certificates: Vec<Option<RegularityCertificate>> = match triple.kind {
        SandwichKind::UnionOfBalls => vec![None; hypotheses.len()],
        SandwichKind::FinitePoints => {
            let bbox = triple.upper.bounding_box();
            let center = Vector::new(bbox.lo.iter().zip(&bbox.hi).map(|(l, h)| 0.5 * (l + h)).collect())?;
            let domain = Ball::new(center, 0.5 * triple.upper.diameter() + triple.alpha)?;
            hypotheses
                .par_iter()
                .map(|h| regularity_check(h, triple.alpha, REGULARITY_PROBES, &domain, seed).map(Some))
                .collect::<Result<_>>()?
        }
    };
    let pairs: Vec<(usize, usize)> =
        (0..hypotheses.len()).flat_map(|i| (0..examples.len()).map(move |j| (i, j))).collect();
    let found: Vec<Option<SandwichViolation>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let h = &hypotheses[i];
            let y = examples[j].y;
            let losses = [
                h.robust_violation(&triple.lower, y)? as u8,
                h.robust_violation(&triple.middle, y)? as u8,
                h.robust_violation(&triple.upper, y)? as u8,
            ];
            let ok = losses[0] <= losses[1] && losses[1] <= losses[2];
            Ok((!ok).then(|| SandwichViolation {
                hypothesis: i,
                example: j,
                losses,
                certified_regular: certificates[i].as_ref().is_none_or(|c| c.passed()),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(SandwichReport { checked: pairs.len(), violations: found.into_iter().flatten().collect(), certificates })
}

/// Set-inclusion probes: uniform points of the lower region must lie in the
/// middle, and uniform points of the middle must lie in the upper region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub lower_probes: usize,
    pub middle_probes: usize,
    pub lower_escapes: usize,
    pub middle_escapes: usize,
}

impl InclusionReport {
    pub fn passed(&self) -> bool {
        self.lower_escapes == 0 && self.middle_escapes == 0
    }
}

pub fn inclusion_probe_audit(triple: &SandwichTriple, probes: usize, seed: u64) -> Result<InclusionReport> {
    let mut rng = rng_from_seed(seed);
    let lower_pts = if triple.lower.has_positive_measure() {
        triple.lower.uniform_sample(probes, &mut rng)?
    } else {
        triple.lower.atoms().unwrap_or_default()
    };
    let middle_pts = if triple.middle.has_positive_measure() {
        triple.middle.uniform_sample(probes, &mut rng)?
    } else {
        triple.middle.atoms().unwrap_or_default()
    };
    let mut rep = InclusionReport {
        lower_probes: lower_pts.len(),
        middle_probes: middle_pts.len(),
        lower_escapes: 0,
        middle_escapes: 0,
    };
    for p in &lower_pts {
        rep.lower_escapes += !triple.middle.contains(p)? as usize;
    }
    for p in &middle_pts {
        rep.middle_escapes += !triple.upper.contains(p)? as usize;
    }
    Ok(rep)
}

/// A lookup table that flips one point of the lower region not on the
/// middle grid: it is robustly wrong on `U^{r-alpha}` but correct on every
/// middle point, and it is not `alpha`-regular.
pub fn non_regular_counterexample(triple: &SandwichTriple, y: crate::model::Label) -> Result<Hypothesis> {
    let Region::FinitePoints(nodes) = &triple.middle else {
        return Err(invalid("triple", "the counterexample needs a finite middle"));
    };
    let d = triple.lower.dim();
    // a fractional offset smaller than the pitch never lands on another node
    let offset = Vector::basis(d, 0).scale(triple.alpha * 0.123_456_7);
    let candidates = nodes.iter().map(|n| n.add(&offset));
    let flip = candidates
        .into_iter()
        .find(|p| triple.lower.contains(p).unwrap_or(false) && !nodes.contains(p))
        .ok_or_else(|| Error::AuditFailure("no lower point off the grid".into()))?;
    Hypothesis::table(d, vec![(flip, y.flip())], y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    #[test]
    fn grid_interval_example() {
        let base = Region::singleton([0.0].into());
        let t = build_v_grid(&base, 1.0, 0.5).unwrap();
        let Region::FinitePoints(nodes) = &t.middle else { panic!() };
        assert!(nodes.iter().all(|p| p.coords()[0].abs() <= 1.0));
        for k in 0..=10_000 {
            let x = -1.0 + 2.0 * k as f64 / 10_000.0;
            let best = nodes.iter().map(|n| (n.coords()[0] - x).abs()).fold(f64::INFINITY, f64::min);
            assert!(best <= 0.25 + 1e-12, "x = {x}: {best}");
        }
    }

    #[test]
    fn grid_count_bound() {
        let base = Region::ball([0.0, 0.0].into(), 0.5).unwrap();
        let t = build_v_grid(&base, 0.5, 0.2).unwrap();
        assert!(t.middle_count() as f64 <= 121.0 * sandwich_constant(2));
        assert!(build_v_grid(&base, 0.5, 0.5).is_err());
        assert!(build_v_grid(&base, 0.5, 0.7).is_err());
    }

    fn probe_inclusions(t: &SandwichTriple, n: usize, seed: u64) {
        let rep = inclusion_probe_audit(t, n, seed).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn balls_inclusions() {
        let base = Region::singleton([0.0, 0.0].into());
        let t = build_v_balls(&base, 1.0, 0.4).unwrap();
        probe_inclusions(&t, 10_000, 1);
        let mut rng = rng_from_seed(2);
        for p in Region::ball([0.0, 0.0].into(), 0.6).unwrap().uniform_sample(2000, &mut rng).unwrap() {
            assert!(t.middle.contains(&p).unwrap());
        }
    }

    #[test]
    fn balls_two_clusters() {
        let base = Region::finite_points(vec![[0.0, 0.0].into(), [10.0, 0.0].into()]).unwrap();
        let t = build_v_balls(&base, 1.0, 0.5).unwrap();
        let Region::UnionOfBalls(balls) = &t.middle else { panic!() };
        for b in balls {
            let near_a = b.center.dist(&[0.0, 0.0].into()) <= 1.0;
            let near_b = b.center.dist(&[10.0, 0.0].into()) <= 1.0;
            assert!(near_a ^ near_b);
        }
        let left: Vec<_> = balls.iter().filter(|b| b.center.coords()[0] < 5.0).collect();
        let right: Vec<_> = balls.iter().filter(|b| b.center.coords()[0] >= 5.0).collect();
        assert!(!left.is_empty() && !right.is_empty());
        assert!(left.iter().all(|a| right.iter().all(|b| !a.intersects(b))));
    }

    #[test]
    fn balls_alpha_near_r() {
        let base = Region::singleton([0.0, 0.0].into());
        let t = build_v_balls(&base, 1.0, 1.0 - 1e-9).unwrap();
        assert!(t.middle.contains(&[0.0, 0.0].into()).unwrap());
        probe_inclusions(&t, 2000, 3);
    }

    #[test]
    fn constant_hypothesis_passes() {
        let base = Region::ball([0.0, 0.0].into(), 0.3).unwrap();
        let t = build_v_grid(&base, 0.6, 0.2).unwrap();
        let ex = vec![LabeledExample::new([0.0, 0.0].into(), Label::Pos)];
        let rep = sandwich_audit(&t, &[Hypothesis::constant(2, Label::Pos)], &ex, 0).unwrap();
        assert!(rep.violations.is_empty() && rep.passed());
    }

    #[test]
    fn boundary_between_shells() {
        // boundary at distance 0.9 from the anchor: between r - alpha = 0.8 and r = 1
        let base = Region::singleton([0.0, 0.0].into());
        let t = build_v_grid(&base, 1.0, 0.2).unwrap();
        let h = Hypothesis::linear([-1.0, 0.0].into(), 0.9).unwrap();
        let ex = vec![LabeledExample::new([0.0, 0.0].into(), Label::Pos)];
        assert!(!h.robust_violation(&t.lower, Label::Pos).unwrap());
        assert!(h.robust_violation(&t.upper, Label::Pos).unwrap());
        let rep = sandwich_audit(&t, &[h], &ex, 0).unwrap();
        assert!(rep.violations.is_empty());
        assert!(rep.certificates[0].as_ref().unwrap().passed());
    }

    #[test]
    fn negative_control_is_caught() {
        let base = Region::ball([0.0, 0.0].into(), 0.3).unwrap();
        let t = build_v_grid(&base, 0.6, 0.2).unwrap();
        let h = non_regular_counterexample(&t, Label::Pos).unwrap();
        let ex = vec![LabeledExample::new([0.0, 0.0].into(), Label::Pos)];
        let rep = sandwich_audit(&t, &[h], &ex, 0).unwrap();
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].losses, [1, 0, 1]);
        assert!(!rep.violations[0].certified_regular);
        assert!(rep.passed());
    }
}
