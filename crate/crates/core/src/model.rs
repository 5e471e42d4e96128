//! Hypotheses, classes, finite-support distributions and the robust loss.
//!
//! Every (hypothesis, region) pair is decided in closed form:
//! linear functions through their extrema over the region, sphere boundaries
//! through the extrema of the distance to the sphere center, and lookup tables
//! through their finitely many non-default entries.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{sample_in_ball, sample_unit_sphere, Ball, Vector, GEOM_TOL};
use crate::perturbation::{PointKey, Region, RegionFamily};
use crate::rng::{rng_from_seed, LabRng};

/// Binary label, serialized as `1` / `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    /// `Pos` iff `value >= 0`.
    pub fn of_score(value: f64) -> Label {
        if value >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(invalid("label", format!("{other} is not +1 or -1"))),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.sign()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vector,
    pub y: Label,
}

impl LabeledExample {
    pub fn new(x: Vector, y: Label) -> Self {
        Self { x, y }
    }
}

/// Finite lookup table with a default label.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable {
    dim: usize,
    entries: BTreeMap<PointKey, (Vector, Label)>,
    default: Label,
}

impl LookupTable {
    pub fn new(dim: usize, entries: Vec<(Vector, Label)>, default: Label) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let mut map = BTreeMap::new();
        for (x, y) in entries {
            check_dim(dim, x.dim())?;
            map.insert(PointKey::of(&x), (x, y));
        }
        Ok(Self { dim, entries: map, default })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn default_label(&self) -> Label {
        self.default
    }

    pub fn lookup(&self, x: &Vector) -> Label {
        self.entries.get(&PointKey::of(x)).map_or(self.default, |(_, y)| *y)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vector, Label)> {
        self.entries.values().map(|(x, y)| (x, *y))
    }

    /// Entries whose label differs from the default.
    pub fn exceptions(&self) -> impl Iterator<Item = &Vector> {
        self.entries.values().filter(|(_, y)| *y != self.default).map(|(x, _)| x)
    }
}

/// A binary classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRepr", into = "HypothesisRepr")]
pub enum Hypothesis {
    /// `Pos` iff `<w, x> + b >= 0`.
    Linear {
        w: Vector,
        b: f64,
    },
    /// `inside` on the closed ball `B(center, radius)`, the other label outside.
    SphereBoundary {
        center: Vector,
        radius: f64,
        inside: Label,
    },
    Table(LookupTable),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TableEntry {
    x: Vector,
    y: Label,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum HypothesisRepr {
    Linear { w: Vector, b: f64 },
    SphereBoundary { center: Vector, radius: f64, inside: Label },
    Table { dim: usize, entries: Vec<TableEntry>, default: Label },
}

impl TryFrom<HypothesisRepr> for Hypothesis {
    type Error = Error;
    fn try_from(r: HypothesisRepr) -> Result<Self> {
        match r {
            HypothesisRepr::Linear { w, b } => Hypothesis::linear(w, b),
            HypothesisRepr::SphereBoundary { center, radius, inside } => Hypothesis::sphere(center, radius, inside),
            HypothesisRepr::Table { dim, entries, default } => Ok(Hypothesis::Table(LookupTable::new(
                dim,
                entries.into_iter().map(|e| (e.x, e.y)).collect(),
                default,
            )?)),
        }
    }
}

impl From<Hypothesis> for HypothesisRepr {
    fn from(h: Hypothesis) -> Self {
        match h {
            Hypothesis::Linear { w, b } => HypothesisRepr::Linear { w, b },
            Hypothesis::SphereBoundary { center, radius, inside } => {
                HypothesisRepr::SphereBoundary { center, radius, inside }
            }
            Hypothesis::Table(t) => HypothesisRepr::Table {
                dim: t.dim,
                default: t.default,
                entries: t.entries.into_values().map(|(x, y)| TableEntry { x, y }).collect(),
            },
        }
    }
}

impl Hypothesis {
    pub fn linear(w: Vector, b: f64) -> Result<Self> {
        if w.norm() == 0.0 {
            return Err(invalid("w", "normal vector must be nonzero"));
        }
        if !b.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        Ok(Hypothesis::Linear { w, b })
    }

    pub fn sphere(center: Vector, radius: f64, inside: Label) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("radius", "must be finite and positive"));
        }
        Ok(Hypothesis::SphereBoundary { center, radius, inside })
    }

    pub fn table(dim: usize, entries: Vec<(Vector, Label)>, default: Label) -> Result<Self> {
        Ok(Hypothesis::Table(LookupTable::new(dim, entries, default)?))
    }

    /// The constant classifier in dimension `dim`.
    pub fn constant(dim: usize, label: Label) -> Self {
        Hypothesis::Table(LookupTable::new(dim, Vec::new(), label).expect("dim >= 1"))
    }

    pub fn dim(&self) -> usize {
        match self {
            Hypothesis::Linear { w, .. } => w.dim(),
            Hypothesis::SphereBoundary { center, .. } => center.dim(),
            Hypothesis::Table(t) => t.dim,
        }
    }

    pub fn predict(&self, x: &Vector) -> Result<Label> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &Vector) -> Label {
        match self {
            Hypothesis::Linear { w, b } => Label::of_score(w.dot(x) + b),
            Hypothesis::SphereBoundary { center, radius, inside } => {
                if center.dist(x) <= *radius {
                    *inside
                } else {
                    inside.flip()
                }
            }
            Hypothesis::Table(t) => t.lookup(x),
        }
    }

    /// Whether some point of `region` is classified differently from `y`.
    pub fn robust_violation(&self, region: &Region, y: Label) -> Result<bool> {
        check_dim(self.dim(), region.dim())?;
        Ok(match self {
            Hypothesis::Linear { w, b } => {
                let (lo, hi) = region.linear_extrema(w, *b)?;
                match y {
                    Label::Pos => lo < 0.0,
                    Label::Neg => hi >= 0.0,
                }
            }
            Hypothesis::SphereBoundary { center, radius, inside } => {
                let (dmin, dmax) = region.center_distance_extrema(center)?;
                if y == *inside {
                    dmax > *radius
                } else {
                    dmin <= *radius
                }
            }
            Hypothesis::Table(t) => match region.atoms() {
                Some(atoms) => atoms.iter().any(|a| t.lookup(a) != y),
                // a positive-measure region contains points outside the table
                None => {
                    t.default != y || t.entries.values().any(|(x, l)| *l != y && region.contains(x).unwrap_or(false))
                }
            },
        })
    }
}

/// Robust loss of `h` at `ex` with perturbation set `region`, as 0 or 1.
pub fn robust_loss_point(h: &Hypothesis, region: &Region, ex: &LabeledExample) -> Result<u8> {
    check_dim(region.dim(), ex.x.dim())?;
    Ok(h.robust_violation(region, ex.y)? as u8)
}

/// Number of examples of `sample` on which `h` is not robustly correct.
pub fn robust_violations(h: &Hypothesis, family: &RegionFamily, sample: &[LabeledExample]) -> Result<usize> {
    let mut count = 0;
    for ex in sample {
        let region = family.region_for(&ex.x)?;
        count += robust_loss_point(h, &region, ex)? as usize;
    }
    Ok(count)
}

/// Empirical robust loss `(1/n) sum_i l_U(h, (x_i, y_i))`.
pub fn robust_loss_sample(h: &Hypothesis, family: &RegionFamily, sample: &[LabeledExample]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(robust_violations(h, family, sample)? as f64 / sample.len() as f64)
}

/// Exact expected robust loss under a finite-support distribution.
pub fn robust_loss_distribution(h: &Hypothesis, family: &RegionFamily, dist: &DiscreteDistribution) -> Result<f64> {
    let mut total = 0.0;
    for (ex, p) in dist.atoms() {
        let region = family.region_for(&ex.x)?;
        total += p * robust_loss_point(h, &region, ex)? as f64;
    }
    Ok(total)
}

/// Sampled witness search: returns a point of `region` misclassified
/// relative to `y`, if one is found among `n` probes. It can miss witnesses
/// but never reports a false one.
pub fn search_witness<R: Rng + ?Sized>(
    h: &Hypothesis,
    region: &Region,
    y: Label,
    n: usize,
    rng: &mut R,
) -> Result<Option<Vector>> {
    check_dim(h.dim(), region.dim())?;
    Ok(region.probe_points(n, rng)?.into_iter().find(|p| h.predict_unchecked(p) != y))
}

/// Finite-support labeled distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(LabeledExample, f64)>", into = "Vec<(LabeledExample, f64)>")]
pub struct DiscreteDistribution {
    atoms: Vec<(LabeledExample, f64)>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<(LabeledExample, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("atoms", "distribution needs at least one atom"));
        }
        if let Some((_, p)) = atoms.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("atoms", format!("probability {p} is not positive")));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("atoms", format!("probabilities sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// Uniform over the given examples; repeated examples accumulate mass.
    pub fn uniform(examples: Vec<LabeledExample>) -> Result<Self> {
        let n = examples.len() as f64;
        let p = 1.0 / n;
        let atoms: Vec<_> = examples.into_iter().map(|e| (e, p)).collect();
        if atoms.is_empty() {
            return Err(invalid("atoms", "distribution needs at least one atom"));
        }
        // 1/n summed n times can drift by a few ulps; renormalize the last atom.
        let mut atoms = atoms;
        let head: f64 = atoms[..atoms.len() - 1].iter().map(|(_, p)| p).sum();
        atoms.last_mut().expect("nonempty").1 = 1.0 - head;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&LabeledExample, f64)> {
        self.atoms.iter().map(|(e, p)| (e, *p))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> Vec<LabeledExample> {
        self.atoms.iter().map(|(e, _)| e.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.x.dim()
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<LabeledExample> {
        let idx = WeightedIndex::new(self.atoms.iter().map(|(_, p)| *p)).expect("validated weights");
        (0..n).map(|_| self.atoms[idx.sample(rng)].0.clone()).collect()
    }
}

impl TryFrom<Vec<(LabeledExample, f64)>> for DiscreteDistribution {
    type Error = Error;
    fn try_from(v: Vec<(LabeledExample, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscreteDistribution> for Vec<(LabeledExample, f64)> {
    fn from(d: DiscreteDistribution) -> Self {
        d.atoms
    }
}

/// Nonempty finite hypothesis class, in a fixed enumeration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Hypothesis>", into = "Vec<Hypothesis>")]
pub struct FiniteClass {
    hypotheses: Vec<Hypothesis>,
}

impl FiniteClass {
    pub fn new(hypotheses: Vec<Hypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::EmptyClass);
        }
        check_same_dims(&hypotheses)?;
        Ok(Self { hypotheses })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, i: usize) -> &Hypothesis {
        &self.hypotheses[i]
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn dim(&self) -> usize {
        self.hypotheses[0].dim()
    }
}

fn check_same_dims(hs: &[Hypothesis]) -> Result<()> {
    let d = hs[0].dim();
    hs.iter().try_for_each(|h| check_dim(d, h.dim()))
}

impl TryFrom<Vec<Hypothesis>> for FiniteClass {
    type Error = Error;
    fn try_from(v: Vec<Hypothesis>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FiniteClass> for Vec<Hypothesis> {
    fn from(c: FiniteClass) -> Self {
        c.hypotheses
    }
}

/// Linear classifiers whose decision boundary is within `w_bound` of the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedLinearClass {
    pub w_bound: f64,
    pub dim: usize,
}

impl BoundedLinearClass {
    pub fn new(w_bound: f64, dim: usize) -> Result<Self> {
        if !(w_bound.is_finite() && w_bound > 0.0) {
            return Err(invalid("w_bound", "must be finite and positive"));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        Ok(Self { w_bound, dim })
    }

    /// Membership test `|b| / ||w|| <= W` (with relative slack `GEOM_TOL`).
    pub fn contains(&self, h: &Hypothesis) -> bool {
        match h {
            Hypothesis::Linear { w, b } => w.dim() == self.dim && b.abs() / w.norm() <= self.w_bound * (1.0 + GEOM_TOL),
            _ => false,
        }
    }

    /// Uniform direction and offset `b ~ U[-W, W]` with a unit normal.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Hypothesis {
        let w = sample_unit_sphere(self.dim, rng);
        let b = rng.random_range(-self.w_bound..=self.w_bound);
        Hypothesis::Linear { w, b }
    }

    /// `n` random members.
    pub fn random_net(&self, n: usize, seed: u64) -> FiniteClass {
        let mut rng = rng_from_seed(seed);
        FiniteClass::new((0..n).map(|_| self.random(&mut rng)).collect()).expect("n >= 1")
    }

    /// Planar grid: `angles` equally spaced unit normals times `offsets`
    /// equally spaced values of `b` in `[-W, W]`.
    pub fn grid_net_2d(&self, angles: usize, offsets: usize) -> Result<FiniteClass> {
        if self.dim != 2 || angles == 0 || offsets < 2 {
            return Err(invalid("grid", "needs d = 2, angles >= 1, offsets >= 2"));
        }
        let mut hs = Vec::with_capacity(angles * offsets);
        for a in 0..angles {
            let th = std::f64::consts::TAU * a as f64 / angles as f64;
            let w = Vector::from([th.cos(), th.sin()]);
            for o in 0..offsets {
                let b = -self.w_bound + 2.0 * self.w_bound * o as f64 / (offsets - 1) as f64;
                hs.push(Hypothesis::Linear { w: w.clone(), b });
            }
        }
        FiniteClass::new(hs)
    }
}

/// Result of a probe-based regularity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub alpha: f64,
    pub probes: usize,
    pub domain: Ball,
    pub failures: Vec<Vector>,
}

impl RegularityCertificate {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A closed ball of radius `alpha` that contains `x` and on which `h` is
/// constant, or `None` when no such ball exists (linear and sphere
/// boundaries) or none was found (tables).
pub fn regularity_witness(h: &Hypothesis, x: &Vector, alpha: f64) -> Result<Option<Ball>> {
    check_dim(h.dim(), x.dim())?;
    let d = x.dim();
    let witness = match h {
        Hypothesis::Linear { w, b } => {
            // slide the ball away from the boundary on x's side
            let u = w.scale(1.0 / w.norm());
            let side = if w.dot(x) + b >= 0.0 { 1.0 } else { -1.0 };
            Some(Ball { center: x.add_scaled(&u, side * alpha), radius: alpha })
        }
        Hypothesis::SphereBoundary { center, radius, .. } => {
            let off = x.sub(center);
            let t = off.norm();
            let dir = off.normalized().unwrap_or_else(|| Vector::basis(d, 0));
            if t <= *radius {
                // must fit inside the closed ball of radius R
                (alpha <= *radius)
                    .then(|| Ball { center: center.add_scaled(&dir, (t - alpha).max(0.0)), radius: alpha })
            } else {
                Some(Ball { center: x.add_scaled(&dir, alpha), radius: alpha })
            }
        }
        Hypothesis::Table(t) => {
            if t.lookup(x) != t.default {
                None
            } else {
                table_avoiding_ball(t, x, alpha)
            }
        }
    };
    // numeric verification of the analytic witness
    Ok(witness.filter(|ball| {
        ball.center.dist(x) <= alpha * (1.0 + GEOM_TOL) + GEOM_TOL && constant_on_ball(h, ball, h.predict_unchecked(x))
    }))
}

fn constant_on_ball(h: &Hypothesis, ball: &Ball, label: Label) -> bool {
    let slack = GEOM_TOL * (1.0 + ball.radius);
    match h {
        Hypothesis::Linear { w, b } => {
            let v = w.dot(&ball.center) + b;
            let r = w.norm() * ball.radius;
            match label {
                Label::Pos => v - r >= -slack * w.norm(),
                Label::Neg => v + r < 0.0,
            }
        }
        Hypothesis::SphereBoundary { center, radius, inside } => {
            let dc = ball.center.dist(center);
            if label == *inside {
                dc + ball.radius <= radius + slack
            } else {
                dc - ball.radius > *radius - slack
            }
        }
        Hypothesis::Table(t) => t.default == label && t.exceptions().all(|e| ball.center.dist(e) > ball.radius),
    }
}

fn table_avoiding_ball(t: &LookupTable, x: &Vector, alpha: f64) -> Option<Ball> {
    let d = x.dim();
    let mut dirs: Vec<Vector> = Vec::new();
    for e in t.exceptions() {
        if let Some(u) = x.sub(e).normalized() {
            dirs.push(u);
        }
    }
    for axis in 0..d {
        dirs.push(Vector::basis(d, axis));
        dirs.push(Vector::basis(d, axis).scale(-1.0));
    }
    let mut rng = rng_from_seed(0x7ab1e);
    dirs.extend((0..32).map(|_| sample_unit_sphere(d, &mut rng)));
    for u in &dirs {
        for s in [1.0, 0.5, 0.0] {
            let center = x.add_scaled(u, s * alpha);
            if t.exceptions().all(|e| center.dist(e) > alpha) {
                return Some(Ball { center, radius: alpha });
            }
        }
    }
    None
}

/// Checks `alpha`-regularity of `h` at `probes` uniform points of `domain`
/// (plus the table entries for lookup tables).
pub fn regularity_check(
    h: &Hypothesis,
    alpha: f64,
    probes: usize,
    domain: &Ball,
    seed: u64,
) -> Result<RegularityCertificate> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha", "must be finite and positive"));
    }
    check_dim(h.dim(), domain.dim())?;
    let mut rng: LabRng = rng_from_seed(seed);
    let mut pts: Vec<Vector> = (0..probes).map(|_| sample_in_ball(domain, &mut rng)).collect();
    if let Hypothesis::Table(t) = h {
        pts.extend(t.entries().map(|(x, _)| x.clone()));
    }
    let mut failures = Vec::new();
    for p in &pts {
        if regularity_witness(h, p, alpha)?.is_none() {
            failures.push(p.clone());
        }
    }
    Ok(RegularityCertificate { alpha, probes: pts.len(), domain: domain.clone(), failures })
}
