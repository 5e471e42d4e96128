//! Robust loss classes and exhaustive shattering search.
//!
//! A loss pattern on a sample of at most 64 examples is a `u64` whose bit `i`
//! is the robust loss on example `i`. Search runs over precomputed loss
//! matrices, so every VC number is exact for the finite class at hand.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Ball, Vector};
use crate::model::{robust_loss_point, FiniteClass, Hypothesis, Label, LabeledExample};
use crate::perturbation::{PointKey, Region, RegionFamily};
use crate::rng::{rng_from_seed, seed_derive_indexed};
use crate::stats::{binomial, sauer_bound};

/// Largest sample or universe handled by the bitmask representation.
pub const MAX_BITS: usize = 63;
/// Default cap on the number of subsets one search may scan.
pub const DEFAULT_SUBSET_BUDGET: u64 = 1_000_000;
/// Multiplier in the audited polynomial bound `C |T|^v`.
pub const C_AUDIT: f64 = 2.0;

/// The robust loss function `(x, y) -> 1[some point of U(x) is not labeled y]`.
#[derive(Clone, Debug)]
pub struct LossHypothesis {
    pub base: Hypothesis,
    pub family: RegionFamily,
}

impl LossHypothesis {
    pub fn new(base: Hypothesis, family: RegionFamily) -> Self {
        Self { base, family }
    }

    pub fn eval(&self, ex: &LabeledExample) -> Result<u8> {
        robust_loss_point(&self.base, &self.family.region_for(&ex.x)?, ex)
    }
}

fn check_len(n: usize, what: &'static str) -> Result<()> {
    if n > MAX_BITS {
        return Err(invalid(what, format!("at most {MAX_BITS} elements supported, got {n}")));
    }
    Ok(())
}

/// Loss bitmask of each hypothesis on examples with explicit regions.
pub fn loss_matrix_with(class: &FiniteClass, cases: &[(Region, LabeledExample)]) -> Result<Vec<u64>> {
    check_len(cases.len(), "sample")?;
    class
        .hypotheses()
        .par_iter()
        .map(|h| {
            let mut row = 0u64;
            for (i, (region, ex)) in cases.iter().enumerate() {
                if robust_loss_point(h, region, ex)? == 1 {
                    row |= 1 << i;
                }
            }
            Ok(row)
        })
        .collect()
}

fn cases_of(family: &RegionFamily, sample: &[LabeledExample]) -> Result<Vec<(Region, LabeledExample)>> {
    sample.iter().map(|ex| Ok((family.region_for(&ex.x)?, ex.clone()))).collect()
}

/// Robust loss bitmask of each hypothesis on the sample.
pub fn loss_matrix(class: &FiniteClass, family: &RegionFamily, sample: &[LabeledExample]) -> Result<Vec<u64>> {
    loss_matrix_with(class, &cases_of(family, sample)?)
}

/// Plain 0-1 loss bitmask of each hypothesis, computed from predictions only.
pub fn zero_one_matrix(class: &FiniteClass, sample: &[LabeledExample]) -> Result<Vec<u64>> {
    check_len(sample.len(), "sample")?;
    class
        .hypotheses()
        .iter()
        .map(|h| {
            let mut row = 0u64;
            for (i, ex) in sample.iter().enumerate() {
                if h.predict(&ex.x)? != ex.y {
                    row |= 1 << i;
                }
            }
            Ok(row)
        })
        .collect()
}

/// Prediction bitmask (bit set for `Pos`) of each hypothesis on the points.
pub fn labeling_matrix(class: &FiniteClass, points: &[Vector]) -> Result<Vec<u64>> {
    check_len(points.len(), "points")?;
    class
        .hypotheses()
        .iter()
        .map(|h| {
            let mut row = 0u64;
            for (i, p) in points.iter().enumerate() {
                if h.predict(p)? == Label::Pos {
                    row |= 1 << i;
                }
            }
            Ok(row)
        })
        .collect()
}

/// The exact set of robust-loss vectors the class realizes on the sample.
pub fn loss_patterns(class: &FiniteClass, family: &RegionFamily, sample: &[LabeledExample]) -> Result<BTreeSet<u64>> {
    Ok(loss_matrix(class, family, sample)?.into_iter().collect())
}

/// Number of distinct restrictions of `rows` to `mask`.
fn count_on(rows: &[u64], mask: u64) -> usize {
    let mut v: Vec<u64> = rows.iter().map(|r| r & mask).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn shatters(rows: &[u64], mask: u64) -> bool {
    let m = mask.count_ones();
    rows.len() >= 1usize << m && count_on(rows, mask) == 1usize << m
}

/// Next larger integer with the same popcount.
fn next_same_popcount(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

fn masks_of_size(n: usize, m: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << n;
    let first = if m == 0 { 0 } else { (1u64 << m) - 1 };
    let mut cur = Some(first);
    std::iter::from_fn(move || {
        let x = cur?;
        if x >= limit || (m == 0 && x != 0) {
            return None;
        }
        cur = if m == 0 { None } else { Some(next_same_popcount(x)) };
        Some(x)
    })
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Outcome of a shattering scan on a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub sample: Vec<LabeledExample>,
    pub achieved_patterns: usize,
    pub shattered: bool,
    /// First hypothesis index realizing each pattern.
    pub witness_map: Option<BTreeMap<u64, usize>>,
    /// Subsets `S` (as bitmasks) with some hypothesis at loss 0 on `S` and 1 off `S`.
    pub realized_subsets: Vec<u64>,
}

fn report_from_rows(sample: &[LabeledExample], rows: &[u64]) -> ShatterReport {
    let full = if sample.is_empty() { 0 } else { u64::MAX >> (64 - sample.len()) };
    let mut witness = BTreeMap::new();
    for (i, &r) in rows.iter().enumerate() {
        witness.entry(r).or_insert(i);
    }
    let realized_subsets = witness.keys().map(|p| !p & full).collect::<BTreeSet<_>>().into_iter().collect();
    ShatterReport {
        sample: sample.to_vec(),
        achieved_patterns: witness.len(),
        shattered: witness.len() == 1usize << sample.len(),
        witness_map: Some(witness),
        realized_subsets,
    }
}

pub fn shatter_report(class: &FiniteClass, family: &RegionFamily, sample: &[LabeledExample]) -> Result<ShatterReport> {
    Ok(report_from_rows(sample, &loss_matrix(class, family, sample)?))
}

/// Robust shattering with balls `B(x, r)`: each subset `S` of the candidate
/// must be realized with loss 0 exactly on `S` and 1 off it.
pub fn vball_shatter_check(class: &FiniteClass, r: f64, candidate: &[LabeledExample]) -> Result<ShatterReport> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid("r", "must be finite and nonnegative"));
    }
    let cases = candidate
        .iter()
        .map(|ex| {
            let region = if r == 0.0 { Region::singleton(ex.x.clone()) } else { Region::ball(ex.x.clone(), r)? };
            Ok((region, ex.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_rows(candidate, &loss_matrix_with(class, &cases)?))
}

/// Lower and certified upper bounds on a VC dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcEstimate {
    /// Size of the largest shattered subset found.
    pub dimension_lower: usize,
    /// Present when the search proves that nothing larger is shattered.
    pub dimension_upper: Option<usize>,
    pub scanned: u64,
    /// Universe indices of a largest shattered subset.
    pub witness: Vec<usize>,
    pub budget_exhausted: bool,
}

impl VcEstimate {
    pub fn certified(&self) -> Option<usize> {
        self.dimension_upper.filter(|&u| u == self.dimension_lower)
    }
}

/// Exhaustive VC search over a loss (or labeling) matrix on `n` elements.
/// Shattering is hereditary, so sizes are scanned upward and the search
/// stops at the first size with no shattered subset.
pub fn vc_from_matrix(rows: &[u64], n: usize, max_m: usize, budget: u64) -> Result<VcEstimate> {
    check_len(n, "universe")?;
    let mut distinct = rows.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let cap = (usize::BITS - 1 - distinct.len().max(1).leading_zeros()) as usize;
    let top = max_m.min(n);
    let mut est = VcEstimate {
        dimension_lower: 0,
        dimension_upper: None,
        scanned: 0,
        witness: Vec::new(),
        budget_exhausted: false,
    };
    if distinct.is_empty() {
        return Err(Error::EmptyClass);
    }
    for m in 1..=top {
        if m > cap {
            est.dimension_upper = Some(est.dimension_lower);
            return Ok(est);
        }
        let count = binomial(n as u64, m as u64);
        if est.scanned.saturating_add(count) > budget {
            est.budget_exhausted = true;
            return Ok(est);
        }
        let masks: Vec<u64> = masks_of_size(n, m).collect();
        match masks.par_iter().position_first(|&mask| shatters(&distinct, mask)) {
            Some(pos) => {
                est.scanned += pos as u64 + 1;
                est.dimension_lower = m;
                est.witness = bits(masks[pos]);
            }
            None => {
                est.scanned += count;
                est.dimension_upper = Some(m - 1);
                return Ok(est);
            }
        }
    }
    if est.dimension_lower == n || est.dimension_lower == cap {
        est.dimension_upper = Some(est.dimension_lower);
    }
    Ok(est)
}

/// Robust VC dimension of the loss class on subsets of `universe`. The
/// largest shattered witness is re-verified by direct loss evaluation.
pub fn robust_vc_search(
    class: &FiniteClass,
    family: &RegionFamily,
    universe: &[LabeledExample],
    max_m: usize,
    budget: u64,
) -> Result<VcEstimate> {
    let cases = cases_of(family, universe)?;
    let rows = loss_matrix_with(class, &cases)?;
    let est = vc_from_matrix(&rows, universe.len(), max_m, budget)?;
    verify_witness(class, &cases, &rows, &est.witness)?;
    Ok(est)
}

fn verify_witness(
    class: &FiniteClass,
    cases: &[(Region, LabeledExample)],
    rows: &[u64],
    witness: &[usize],
) -> Result<()> {
    let mask: u64 = witness.iter().map(|&i| 1u64 << i).sum();
    let mut seen = BTreeMap::new();
    for (h, &r) in rows.iter().enumerate() {
        seen.entry(r & mask).or_insert(h);
    }
    if seen.len() != 1usize << witness.len() {
        return Err(Error::AuditFailure("witness set is not shattered".into()));
    }
    for (pattern, &h) in &seen {
        for &i in witness {
            let (region, ex) = &cases[i];
            let loss = robust_loss_point(class.get(h), region, ex)?;
            if loss as u64 != pattern >> i & 1 {
                return Err(Error::AuditFailure(format!("hypothesis {h} disagrees with its pattern on example {i}")));
            }
        }
    }
    Ok(())
}

/// Sauer and correspondence checks on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleAudit {
    /// Universe indices of the sample.
    pub sample: Vec<usize>,
    /// `|T|` for `T` the union of the sample's regions.
    pub t_size: usize,
    /// VC dimension of the class on `T`, certified exhaustively.
    pub v: usize,
    pub achieved_patterns: usize,
    pub labelings_t: usize,
    /// `sum_{i <= v} C(|T|, i)`.
    pub sauer_value: u64,
    /// `C_AUDIT |T|^v`.
    pub bound_value: f64,
    /// Pairs of hypotheses with distinct loss patterns.
    pub distinct_pattern_pairs: u64,
    /// Labelings of `T` that map to more than one loss pattern.
    pub correspondence_violations: usize,
}

impl SampleAudit {
    pub fn sauer_ok(&self) -> bool {
        self.achieved_patterns <= self.labelings_t
            && self.labelings_t as u64 <= self.sauer_value
            && self.sauer_value as f64 <= self.bound_value
    }
}

/// Audit one sample whose regions are finite point sets.
pub fn audit_sample(
    class: &FiniteClass,
    family: &RegionFamily,
    universe: &[LabeledExample],
    sample: &[usize],
) -> Result<SampleAudit> {
    let picked: Vec<LabeledExample> = sample.iter().map(|&i| universe[i].clone()).collect();
    let cases = cases_of(family, &picked)?;
    let mut t: Vec<Vector> = Vec::new();
    let mut keys = BTreeSet::new();
    for (region, _) in &cases {
        let atoms =
            region.atoms().ok_or_else(|| invalid("family", "correspondence audit needs finite point regions"))?;
        for p in atoms {
            if keys.insert(PointKey::of(&p)) {
                t.push(p);
            }
        }
    }
    let losses = loss_matrix_with(class, &cases)?;
    let labels = labeling_matrix(class, &t)?;
    let v = vc_from_matrix(&labels, t.len(), t.len(), u64::MAX)?
        .certified()
        .ok_or_else(|| Error::AuditFailure("VC on T not certified".into()))?;

    let mut by_labeling: HashMap<u64, BTreeSet<u64>> = HashMap::new();
    let mut group: HashMap<u64, u64> = HashMap::new();
    for (&l, &p) in labels.iter().zip(&losses) {
        by_labeling.entry(l).or_default().insert(p);
        *group.entry(p).or_default() += 1;
    }
    let n = losses.len() as u64;
    let same: u64 = group.values().map(|g| g * g).sum();
    Ok(SampleAudit {
        sample: sample.to_vec(),
        t_size: t.len(),
        v,
        achieved_patterns: group.len(),
        labelings_t: by_labeling.len(),
        sauer_value: sauer_bound(t.len() as u64, v as u64),
        bound_value: C_AUDIT * (t.len() as f64).powi(v as i32),
        distinct_pattern_pairs: (n * n - same) / 2,
        correspondence_violations: by_labeling.values().filter(|ps| ps.len() > 1).count(),
    })
}

/// Audit every subset of each size in `sizes`, or `per_size` random subsets
/// when there are more than that.
pub fn sauer_audit(
    class: &FiniteClass,
    family: &RegionFamily,
    universe: &[LabeledExample],
    sizes: &[usize],
    per_size: usize,
    seed: u64,
) -> Result<Vec<SampleAudit>> {
    check_len(universe.len(), "universe")?;
    let n = universe.len();
    let mut samples: Vec<Vec<usize>> = Vec::new();
    for &m in sizes {
        if m > n {
            return Err(invalid("sizes", format!("size {m} exceeds universe of {n}")));
        }
        if binomial(n as u64, m as u64) <= per_size as u64 {
            samples.extend(masks_of_size(n, m).map(bits));
        } else {
            let mut rng = rng_from_seed(seed_derive_indexed(seed, "sauer/size", m as u64));
            for _ in 0..per_size {
                let mut s = sample_indices(&mut rng, n, m).into_vec();
                s.sort_unstable();
                samples.push(s);
            }
        }
    }
    samples.par_iter().map(|s| audit_sample(class, family, universe, s)).collect()
}

/// Instance families for the overhead audit, indexed by ordinary VC dimension.
pub fn overhead_instance(d: usize, k: usize, seed: u64) -> Result<(FiniteClass, RegionFamily, Vec<LabeledExample>)> {
    if k == 0 {
        return Err(invalid("k", "must be positive"));
    }
    let spacing = 0.3;
    let offsets = |center: &Vector| -> Vec<Vector> {
        (0..k)
            .map(|j| {
                let shift = (j as f64 - (k as f64 - 1.0) / 2.0) * spacing;
                center.add_scaled(&Vector::basis(center.dim(), 0), shift)
            })
            .collect()
    };
    let mut rng = rng_from_seed(seed_derive_indexed(seed, "overhead/universe", (d * 100 + k) as u64));
    let (class, xs): (FiniteClass, Vec<Vector>) = match d {
        1 | 2 => {
            // six grid points and six random points on [0, 12]
            let mut xs: Vec<Vector> = (0..6).map(|i| Vector::from([1.0 + 2.0 * i as f64])).collect();
            xs.extend((0..6).map(|_| Vector::from([12.0 * rand::Rng::random::<f64>(&mut rng)])));
            let grid: Vec<f64> = (0..=280).map(|i| -1.0 + 0.05 * i as f64).collect();
            let hs = if d == 1 {
                grid.iter().map(|&t| Hypothesis::linear(Vector::from([1.0]), -t)).collect::<Result<Vec<_>>>()?
            } else {
                let mut hs = Vec::new();
                for (a, &lo) in grid.iter().enumerate().step_by(4) {
                    for &hi in grid[a + 1..].iter().step_by(4) {
                        hs.push(Hypothesis::sphere(Vector::from([(lo + hi) / 2.0]), (hi - lo) / 2.0, Label::Pos)?);
                    }
                }
                hs
            };
            (FiniteClass::new(hs)?, xs)
        }
        3 => {
            let mut xs: Vec<Vector> = Vec::new();
            for i in 0..3 {
                for j in 0..2 {
                    xs.push(Vector::from([2.0 * i as f64, 3.0 * j as f64]));
                }
            }
            xs.extend((0..6).map(|_| {
                Vector::from([4.0 * rand::Rng::random::<f64>(&mut rng), 3.0 * rand::Rng::random::<f64>(&mut rng)])
            }));
            let center = Vector::from([2.0, 1.5]);
            let class = crate::model::BoundedLinearClass::new(4.0, 2)?.grid_net_2d(48, 33)?;
            let shifted = class
                .hypotheses()
                .iter()
                .map(|h| match h {
                    Hypothesis::Linear { w, b } => Hypothesis::linear(w.clone(), b - w.dot(&center)),
                    other => Ok(other.clone()),
                })
                .collect::<Result<Vec<_>>>()?;
            (FiniteClass::new(shifted)?, xs)
        }
        _ => return Err(invalid("d", "overhead instances exist for d in {1, 2, 3}")),
    };
    let mut family = RegionFamily::new();
    let mut universe = Vec::new();
    for (i, x) in xs.into_iter().enumerate() {
        family.insert(x.clone(), Region::finite_points(offsets(&x))?)?;
        universe.push(LabeledExample::new(x, if i % 2 == 0 { Label::Pos } else { Label::Neg }));
    }
    Ok((class, family, universe))
}

/// One row of the overhead table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub d: usize,
    pub k: usize,
    pub vc_lower: usize,
    pub vc_upper: Option<usize>,
    /// `sum_{i <= d} C(k m, i)` at `m = vc_upper` (or `vc_lower` when uncertified).
    pub bound_value: u64,
    /// `C_AUDIT (k m)^d` at the same `m`.
    pub poly_bound: f64,
    pub pass: bool,
}

pub fn overhead_audit(d_grid: &[usize], k_grid: &[usize], seed: u64) -> Result<Vec<OverheadRow>> {
    let mut rows = Vec::new();
    for &d in d_grid {
        for &k in k_grid {
            let (class, family, universe) = overhead_instance(d, k, seed)?;
            let est = robust_vc_search(&class, &family, &universe, universe.len(), DEFAULT_SUBSET_BUDGET)?;
            let m = est.dimension_upper.unwrap_or(est.dimension_lower);
            let km = (k * m) as u64;
            let bound_value = sauer_bound(km, d as u64);
            let pass = est.dimension_upper.is_some() && (1u64 << m) <= bound_value;
            rows.push(OverheadRow {
                d,
                k,
                vc_lower: est.dimension_lower,
                vc_upper: est.dimension_upper,
                bound_value,
                poly_bound: C_AUDIT * (km as f64).powi(d as i32),
                pass,
            });
        }
    }
    Ok(rows)
}

/// Pattern counts for union-of-balls regions against the ball-region class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionBallsCheck {
    pub m: usize,
    pub ball_examples: usize,
    pub patterns_union: usize,
    pub patterns_balls: usize,
    /// Robust VC with single balls, restricted to the ball examples.
    pub v_ball: usize,
    pub sauer_value: u64,
}

impl UnionBallsCheck {
    pub fn passed(&self) -> bool {
        self.patterns_union <= self.patterns_balls && self.patterns_balls as u64 <= self.sauer_value
    }
}

/// `sample[i]` has region `∪_j B(centers[i][j], r)`. The union loss is the OR
/// of the ball losses, so its patterns are bounded by ball patterns on the
/// `sum_i k_i` ball examples, which Sauer bounds through the ball VC.
pub fn union_of_balls_audit(
    class: &FiniteClass,
    r: f64,
    sample: &[(LabeledExample, Vec<Vector>)],
) -> Result<UnionBallsCheck> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid("r", "must be finite and positive"));
    }
    let mut union_cases = Vec::new();
    let mut ball_cases = Vec::new();
    for (ex, centers) in sample {
        let balls = centers.iter().map(|c| Ball::new(c.clone(), r)).collect::<Result<Vec<_>>>()?;
        for b in &balls {
            ball_cases.push((Region::Ball(b.clone()), LabeledExample::new(b.center.clone(), ex.y)));
        }
        union_cases.push((Region::union_of_balls(balls)?, ex.clone()));
    }
    let union_rows = loss_matrix_with(class, &union_cases)?;
    let ball_rows = loss_matrix_with(class, &ball_cases)?;
    let v_ball = vc_from_matrix(&ball_rows, ball_cases.len(), ball_cases.len(), u64::MAX)?
        .certified()
        .ok_or_else(|| Error::AuditFailure("ball VC not certified".into()))?;
    let distinct = |rows: &[u64]| rows.iter().collect::<BTreeSet<_>>().len();
    Ok(UnionBallsCheck {
        m: sample.len(),
        ball_examples: ball_cases.len(),
        patterns_union: distinct(&union_rows),
        patterns_balls: distinct(&ball_rows),
        v_ball,
        sauer_value: sauer_bound(ball_cases.len() as u64, v_ball as u64),
    })
}
