//! Robust ERM oracles, the tolerant algorithm that runs them on a randomly
//! inflated family, and the OPT profile `r -> min_h l_{U^r}(h, S)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_unit_sphere, Vector};
use crate::model::{
    robust_loss_distribution, BoundedLinearClass, DiscreteDistribution, FiniteClass, Hypothesis, LabeledExample,
};
use crate::perturbation::{Region, RegionFamily};
use crate::rng::{derived_rng, rng_from_seed, LabRng};

/// How the argmin over the class is realized.
#[derive(Clone, Debug, PartialEq)]
pub enum RermOracle {
    /// True argmin over a finite class, ties to the lowest index.
    ExhaustiveFinite(FiniteClass),
    /// Best of a generated candidate set; approximate, and reported as such.
    LinearCandidates { class: BoundedLinearClass, candidate_budget: usize, seed: u64 },
}

/// What an oracle call returned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RermOutput {
    pub hypothesis: Hypothesis,
    /// Position in the class or candidate list.
    pub index: usize,
    pub violations: usize,
    pub achieved_loss: f64,
    pub candidates: usize,
    /// Whether `achieved_loss` is the minimum over the whole class.
    pub exact: bool,
}

/// Regions of the sample points under `family` inflated by `r`.
fn sample_regions(family: &RegionFamily, sample: &[LabeledExample], r: f64) -> Result<Vec<Region>> {
    sample.iter().map(|ex| family.region_for(&ex.x)?.expand_or_keep(r)).collect()
}

fn violations_on(h: &Hypothesis, regions: &[Region], sample: &[LabeledExample]) -> Result<usize> {
    let mut count = 0;
    for (reg, ex) in regions.iter().zip(sample) {
        count += h.robust_violation(reg, ex.y)? as usize;
    }
    Ok(count)
}

/// Argmin of the violation count, ties to the lowest index.
fn argmin(hs: &[Hypothesis], regions: &[Region], sample: &[LabeledExample]) -> Result<(usize, usize)> {
    let counts: Vec<usize> = hs.par_iter().map(|h| violations_on(h, regions, sample)).collect::<Result<_>>()?;
    let (idx, best) = counts.iter().enumerate().min_by_key(|&(i, &c)| (c, i)).ok_or(Error::EmptyClass)?;
    Ok((idx, *best))
}

/// `argmin_h l_{U^r}(h, S)`; `r = 0` uses the family as given.
pub fn rerm_solve(oracle: &RermOracle, family: &RegionFamily, sample: &[LabeledExample], r: f64) -> Result<RermOutput> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid("r", "must be finite and nonnegative"));
    }
    let regions = sample_regions(family, sample, r)?;
    let (hs, exact) = match oracle {
        RermOracle::ExhaustiveFinite(class) => (class.hypotheses().to_vec(), true),
        RermOracle::LinearCandidates { class, candidate_budget, seed } => {
            (linear_candidates(class, &regions, *candidate_budget, *seed)?, false)
        }
    };
    let (index, violations) = argmin(&hs, &regions, sample)?;
    Ok(RermOutput {
        hypothesis: hs[index].clone(),
        index,
        violations,
        achieved_loss: violations as f64 / sample.len() as f64,
        candidates: hs.len(),
        exact,
    })
}

/// Unit normal orthogonal to `pts[i] - pts[0]`, obtained by Gram-Schmidt
/// from a random start; `None` for degenerate configurations.
fn normal_through(pts: &[&Vector], rng: &mut LabRng) -> Option<Vector> {
    let d = pts[0].dim();
    let mut basis: Vec<Vector> = Vec::new();
    for p in &pts[1..] {
        let mut v = p.sub(pts[0]);
        for q in &basis {
            v = v.add_scaled(q, -v.dot(q));
        }
        basis.push(v.normalized()?);
    }
    let mut w = sample_unit_sphere(d, rng);
    for q in &basis {
        w = w.add_scaled(q, -w.dot(q));
    }
    w.normalized()
}

/// Candidate set for the bounded linear class: hyperplanes through `d`
/// region centers in both orientations, offset sweeps of those along their
/// normal, and random class members. Everything is filtered to `|b| <= W`.
pub fn linear_candidates(
    class: &BoundedLinearClass,
    regions: &[Region],
    budget: usize,
    seed: u64,
) -> Result<Vec<Hypothesis>> {
    if budget == 0 {
        return Err(Error::EmptyClass);
    }
    let d = class.dim;
    let mut rng = rng_from_seed(seed);
    let anchors: Vec<Vector> = regions.iter().map(region_center).collect();
    let spread = regions.iter().map(Region::diameter).fold(0.0, f64::max) / 2.0;
    let w_bound = class.w_bound;
    let mut out: Vec<Hypothesis> = Vec::with_capacity(budget);
    let push = |out: &mut Vec<Hypothesis>, w: &Vector, b: f64| {
        if out.len() < budget && b.abs() <= w_bound {
            out.push(Hypothesis::Linear { w: w.clone(), b });
        }
    };

    let through = budget * 2 / 5;
    let sweep_steps = [-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0];
    let mut tries = 0;
    while out.len() < through + budget / 3 && tries < 4 * budget && !anchors.is_empty() {
        tries += 1;
        let pick: Vec<&Vector> = (0..d).map(|_| &anchors[rng.random_range(0..anchors.len())]).collect();
        let Some(w) = normal_through(&pick, &mut rng) else { continue };
        let b = -w.dot(pick[0]);
        for sign in [1.0, -1.0] {
            let ws = w.scale(sign);
            push(&mut out, &ws, sign * b);
            if spread > 0.0 {
                for s in sweep_steps {
                    push(&mut out, &ws, sign * b + s * spread);
                }
            }
        }
    }
    while out.len() < budget {
        let h = class.random(&mut rng);
        out.push(h);
    }
    Ok(out)
}

fn region_center(r: &Region) -> Vector {
    match r.normalized() {
        Region::FinitePoints(p) => p[0].clone(),
        Region::Ball(b) => b.center,
        Region::UnionOfBalls(bs) => bs[0].center.clone(),
        Region::Expanded { .. } => unreachable!("normalized regions are closed form"),
    }
}

/// Output of one tolerant run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolRermOutput {
    pub hypothesis: Hypothesis,
    pub r_used: f64,
    pub achieved_loss: f64,
    pub exact: bool,
}

/// Lower end of the inflation interval, `eps * delta * gamma / 7`.
pub fn inflation_floor(eps: f64, delta: f64, gamma: f64) -> f64 {
    eps * delta * gamma / 7.0
}

fn check_tolerance_params(eps: f64, delta: f64, gamma: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid("eps", "must lie in (0, 1]"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta", "must lie in (0, 1]"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", "must be finite and positive"));
    }
    Ok(())
}

/// Draws `r ~ U[eps*delta*gamma/7, gamma]` and, independently, `S ~ D^n`,
/// then returns the robust ERM on `U^r`. The two draws use separate
/// substreams derived from `seed` under the labels `"r"` and `"S"`.
#[allow(clippy::too_many_arguments)]
pub fn tolrerm(
    oracle: &RermOracle,
    family: &RegionFamily,
    dist: &DiscreteDistribution,
    eps: f64,
    delta: f64,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<TolRermOutput> {
    check_tolerance_params(eps, delta, gamma)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let lo = inflation_floor(eps, delta, gamma);
    let r_used = derived_rng(seed, "r").random_range(lo..=gamma);
    let sample = dist.sample(n, &mut derived_rng(seed, "S"));
    let out = rerm_solve(oracle, family, &sample, r_used)?;
    Ok(TolRermOutput { hypothesis: out.hypothesis, r_used, achieved_loss: out.achieved_loss, exact: out.exact })
}

/// `min_h l_U(h, D)` over a finite class, with the minimizing index.
pub fn best_in_class(class: &FiniteClass, family: &RegionFamily, dist: &DiscreteDistribution) -> Result<(usize, f64)> {
    let losses: Vec<f64> =
        class.hypotheses().par_iter().map(|h| robust_loss_distribution(h, family, dist)).collect::<Result<_>>()?;
    let mut best = (0, f64::INFINITY);
    for (i, l) in losses.into_iter().enumerate() {
        if l < best.1 {
            best = (i, l);
        }
    }
    Ok(best)
}

/// `OPT_S^r` on a grid of inflation radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptProfile {
    pub r_grid: Vec<f64>,
    pub opt_values: Vec<f64>,
}

impl OptProfile {
    pub fn is_monotone(&self) -> bool {
        self.opt_values.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn opt_profile(
    oracle: &RermOracle,
    family: &RegionFamily,
    sample: &[LabeledExample],
    r_grid: &[f64],
) -> Result<OptProfile> {
    if r_grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || r_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("r_grid", "must be increasing and nonnegative"));
    }
    let opt_values = r_grid
        .iter()
        .map(|&r| rerm_solve(oracle, family, sample, r).map(|o| o.achieved_loss))
        .collect::<Result<Vec<_>>>()?;
    let profile = OptProfile { r_grid: r_grid.to_vec(), opt_values };
    if matches!(oracle, RermOracle::ExhaustiveFinite(_)) && !profile.is_monotone() {
        return Err(Error::AuditFailure("OPT profile decreased under inflation".into()));
    }
    Ok(profile)
}

/// Outcome of the inflation-gap audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationGapReport {
    pub trials: usize,
    pub alpha: f64,
    /// Fraction of draws with `OPT^r - OPT^{r-alpha} <= eps/3`.
    pub frequency: f64,
    pub frequency_sigma: f64,
    pub target_frequency: f64,
    pub mean_gap: f64,
    pub mean_gap_sigma: f64,
    /// `alpha / (gamma - alpha)`.
    pub gap_bound: f64,
}

impl InflationGapReport {
    /// Both checks at the `3 sigma` level.
    pub fn passed(&self) -> bool {
        self.frequency >= self.target_frequency - 3.0 * self.frequency_sigma
            && self.mean_gap <= self.gap_bound + 3.0 * self.mean_gap_sigma
    }
}

/// Draws `r ~ U[alpha, gamma]` with `alpha = eps*delta*gamma/7` and records
/// the gap `OPT^r - OPT^{r-alpha}` of the supplied profile.
pub fn inflation_gap_audit<F>(
    profile: F,
    eps: f64,
    delta: f64,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<InflationGapReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_tolerance_params(eps, delta, gamma)?;
    if trials < 100 {
        return Err(invalid("trials", "at least 100 trials are required"));
    }
    let alpha = inflation_floor(eps, delta, gamma);
    let mut rng = derived_rng(seed, "inflation-gap/r");
    let rs: Vec<f64> = (0..trials).map(|_| rng.random_range(alpha..=gamma)).collect();
    let gaps: Vec<f64> =
        rs.par_iter().map(|&r| Ok(profile(r)? - profile((r - alpha).max(0.0))?)).collect::<Result<_>>()?;
    let n = trials as f64;
    let hits = gaps.iter().filter(|&&g| g <= eps / 3.0 + 1e-12).count() as f64;
    let frequency = hits / n;
    let mean_gap = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(InflationGapReport {
        trials,
        alpha,
        frequency,
        frequency_sigma: (frequency * (1.0 - frequency) / n).sqrt(),
        target_frequency: 1.0 - delta / 2.0,
        mean_gap,
        mean_gap_sigma: (var / n).sqrt(),
        gap_bound: alpha / (gamma - alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn ex(x: [f64; 2], y: Label) -> LabeledExample {
        LabeledExample::new(x.into(), y)
    }

    fn two_point_setup() -> (FiniteClass, RegionFamily, Vec<LabeledExample>) {
        // boundary x1 = 0; balls of radius 1 centred at +-2 are 1 away from it
        let class = FiniteClass::new(vec![Hypothesis::linear([1.0, 0.0].into(), 0.0).unwrap()]).unwrap();
        let fam = RegionFamily::uniform_balls(1.0).unwrap();
        let s = vec![ex([2.0, 0.0], Label::Pos), ex([-2.0, 0.0], Label::Neg)];
        (class, fam, s)
    }

    #[test]
    fn realizable_sample_has_zero_loss() {
        let class =
            FiniteClass::new(vec![Hypothesis::constant(2, Label::Neg), Hypothesis::constant(2, Label::Pos)]).unwrap();
        let fam = RegionFamily::uniform_balls(0.01).unwrap();
        let s = vec![ex([0.0, 0.0], Label::Pos), ex([1.0, 1.0], Label::Pos)];
        let out = rerm_solve(&RermOracle::ExhaustiveFinite(class), &fam, &s, 0.0).unwrap();
        assert_eq!((out.index, out.violations), (1, 0));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let h = Hypothesis::constant(1, Label::Pos);
        let class = FiniteClass::new(vec![h.clone(), h.clone(), h]).unwrap();
        let fam = RegionFamily::uniform_balls(0.0).unwrap();
        let s = vec![LabeledExample::new([0.0].into(), Label::Neg)];
        let out = rerm_solve(&RermOracle::ExhaustiveFinite(class), &fam, &s, 0.3).unwrap();
        assert_eq!(out.index, 0);
        assert_eq!(out.achieved_loss, 1.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        let (class, fam, _) = two_point_setup();
        let o = RermOracle::ExhaustiveFinite(class);
        assert_eq!(rerm_solve(&o, &fam, &[], 0.0).unwrap_err(), Error::EmptySample);
    }

    #[test]
    fn crossing_profile_jumps_at_margin() {
        // the crossing radius solves distance-to-hyperplane = radius + r, r = 1
        let (class, fam, s) = two_point_setup();
        let o = RermOracle::ExhaustiveFinite(class);
        let p = opt_profile(&o, &fam, &s, &[0.0, 0.5, 0.99, 1.0, 1.01, 2.0]).unwrap();
        // closed extrema: at r = 1 the positive ball touches the boundary (still +1),
        // the negative ball touches it too and is charged
        assert_eq!(p.opt_values, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0]);
        assert!(p.is_monotone());
    }

    #[test]
    fn tolrerm_interval_endpoints() {
        let (class, fam, s) = two_point_setup();
        let d = DiscreteDistribution::uniform(s).unwrap();
        let o = RermOracle::ExhaustiveFinite(class);
        for seed in 0..200 {
            let out = tolrerm(&o, &fam, &d, 1.0, 1.0, 0.7, 5, seed).unwrap();
            assert!((0.1..=0.7).contains(&out.r_used), "{}", out.r_used);
        }
        assert!(tolrerm(&o, &fam, &d, 0.0, 1.0, 0.7, 5, 0).is_err());
        assert!(tolrerm(&o, &fam, &d, 1.0, 1.5, 0.7, 5, 0).is_err());
    }

    #[test]
    fn tolrerm_is_deterministic() {
        let (class, fam, s) = two_point_setup();
        let d = DiscreteDistribution::uniform(s).unwrap();
        let o = RermOracle::ExhaustiveFinite(class);
        assert_eq!(
            tolrerm(&o, &fam, &d, 0.5, 0.5, 0.5, 7, 42).unwrap(),
            tolrerm(&o, &fam, &d, 0.5, 0.5, 0.5, 7, 42).unwrap()
        );
    }

    #[test]
    fn inflation_gap_constant_profile() {
        let rep = inflation_gap_audit(|_| Ok(0.3), 0.1, 0.1, 1.0, 500, 1).unwrap();
        assert_eq!(rep.frequency, 1.0);
        assert_eq!(rep.mean_gap, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn inflation_gap_staircase_mean_gap() {
        // a single jump of height 1/2 at c: E[gap] = (1/2) alpha / (gamma - alpha)
        let (eps, delta, gamma) = (1.0, 1.0, 1.0);
        let alpha = inflation_floor(eps, delta, gamma);
        let c = 0.5;
        let rep = inflation_gap_audit(|r| Ok(if r >= c { 0.5 } else { 0.0 }), eps, delta, gamma, 100_000, 3).unwrap();
        let expected = 0.5 * alpha / (gamma - alpha);
        assert!((rep.mean_gap - expected).abs() <= 3.0 * rep.mean_gap_sigma + 1e-12, "{rep:?}");
        assert!(rep.passed());
    }

    #[test]
    fn inflation_gap_needs_enough_trials() {
        assert!(inflation_gap_audit(|_| Ok(0.0), 0.1, 0.1, 1.0, 99, 0).is_err());
    }

    #[test]
    fn linear_candidates_respect_bound_and_separate() {
        let class = BoundedLinearClass::new(3.0, 2).unwrap();
        let fam = RegionFamily::uniform_balls(0.2).unwrap();
        let s = vec![
            ex([1.0, 0.5], Label::Pos),
            ex([1.5, -0.5], Label::Pos),
            ex([-1.0, 0.2], Label::Neg),
            ex([-1.2, -0.7], Label::Neg),
        ];
        let o = RermOracle::LinearCandidates { class, candidate_budget: 2000, seed: 5 };
        let out = rerm_solve(&o, &fam, &s, 0.1).unwrap();
        assert_eq!(out.violations, 0);
        assert!(!out.exact);
        let regions = sample_regions(&fam, &s, 0.1).unwrap();
        let cands = linear_candidates(&class, &regions, 2000, 5).unwrap();
        assert_eq!(cands.len(), 2000);
        for h in &cands {
            assert!(class.contains(h));
            assert!(violations_on(h, &regions, &s).unwrap() >= out.violations);
        }
    }
}
