//! Subset families and the relative isoperimetric inequalities.
//!
//! Each check takes the maximum of a ratio `Q(A) / normalizer(A)` over a
//! family of finite sets inside `B = B(x, f R)` (`f` the ball factor, 3 by
//! default) for every `δ` on a grid and keeps the maximising set as witness.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet, WeightedGraph};
use crate::potential::{annulus_resistance, effective_resistance, extreme_exit_time, ExitProfile};
use crate::spectral::{inverse_lambda, lambda_min, nash_parameters};
use crate::volume::dyadic_radii;

/// Exhaustive enumeration refuses to produce more sets than this.
pub const ENUMERATION_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exhaustive,
    Subball,
    Annulus,
    BfsRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyBudget {
    pub max_exhaustive_size: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for FamilyBudget {
    fn default() -> Self {
        FamilyBudget {
            max_exhaustive_size: 12,
            samples: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFamily {
    pub center: VertexId,
    pub radius: usize,
    pub ball_factor: usize,
    pub members: Vec<VertexSet>,
    pub provenance: Vec<Provenance>,
    pub seed: u64,
    /// Size cap of the exhaustive part.
    pub exhaustive_cap: usize,
}

impl SubsetFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }

    /// The sub-family of members contained in `ball`.
    pub fn restricted_to(&self, ball: &VertexSet) -> SubsetFamily {
        let (members, provenance) = self
            .members
            .iter()
            .zip(&self.provenance)
            .filter(|(a, _)| a.is_subset(ball))
            .map(|(a, p)| (a.clone(), *p))
            .unzip();
        SubsetFamily {
            members,
            provenance,
            ..self.clone()
        }
    }
}

/// Every connected set containing `root`, inside `allowed` (if given), with at
/// most `max_size` vertices, in a fixed order.
pub fn connected_subsets_containing(
    g: &WeightedGraph,
    root: VertexId,
    max_size: usize,
    allowed: Option<&VertexSet>,
) -> Result<Vec<VertexSet>> {
    g.check_vertex(root)?;
    let allowed_mask = allowed.map(|a| g.mask(a));
    let ok = |v: VertexId| allowed_mask.as_ref().is_none_or(|m| m[v]);
    if max_size == 0 || !ok(root) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut current = vec![root];
    let mut excluded = HashSet::new();
    let cand: BTreeSet<VertexId> = g.neighbors(root).map(|(y, _)| y).filter(|&y| y != root && ok(y)).collect();
    grow(g, &ok, max_size, &mut current, cand, &mut excluded, &mut out)?;
    Ok(out)
}

fn grow(
    g: &WeightedGraph,
    ok: &dyn Fn(VertexId) -> bool,
    max_size: usize,
    current: &mut Vec<VertexId>,
    mut cand: BTreeSet<VertexId>,
    excluded: &mut HashSet<VertexId>,
    out: &mut Vec<VertexSet>,
) -> Result<()> {
    out.push(VertexSet::new(current.iter().copied()));
    if out.len() > ENUMERATION_LIMIT {
        return Err(Error::BudgetTooLarge(ENUMERATION_LIMIT));
    }
    if current.len() == max_size {
        return Ok(());
    }
    let mut newly_excluded = Vec::new();
    while let Some(v) = cand.pop_first() {
        let mut next = cand.clone();
        for (u, _) in g.neighbors(v) {
            if ok(u) && !current.contains(&u) && u != v && !cand.contains(&u) && !excluded.contains(&u) {
                next.insert(u);
            }
        }
        current.push(v);
        grow(g, ok, max_size, current, next, excluded, out)?;
        current.pop();
        excluded.insert(v);
        newly_excluded.push(v);
    }
    for v in newly_excluded {
        excluded.remove(&v);
    }
    Ok(())
}

/// The test family for `(x, R)`: exhaustive small connected sets through `x`,
/// sub-balls, annuli and random BFS-grown connected sets, all inside
/// `B(x, f R)`.
pub fn subset_families(
    g: &WeightedGraph,
    x: VertexId,
    radius: usize,
    ball_factor: usize,
    budget: &FamilyBudget,
) -> Result<SubsetFamily> {
    if radius == 0 || ball_factor == 0 {
        return Err(Error::InvalidParameter("radius and ball factor must be positive".into()));
    }
    g.check_vertex(x)?;
    let outer_r = ball_factor * radius;
    g.guard(x, outer_r)?;
    let big = g.ball(x, outer_r);

    let mut seen: HashSet<VertexSet> = HashSet::new();
    let mut members = Vec::new();
    let mut provenance = Vec::new();
    let mut push = |a: VertexSet, p: Provenance| {
        if !a.is_empty() && seen.insert(a.clone()) {
            members.push(a);
            provenance.push(p);
        }
    };

    for a in connected_subsets_containing(g, x, budget.max_exhaustive_size, Some(&big))? {
        push(a, Provenance::Exhaustive);
    }
    for y in g.ball(x, radius).iter() {
        for r in 1..=2 * radius {
            let b = g.ball(y, r);
            if b.is_subset(&big) {
                push(b, Provenance::Subball);
            }
        }
    }
    let cuts = dyadic_radii(1, outer_r.saturating_sub(1));
    for &r1 in &cuts {
        for r2 in [2 * r1, outer_r] {
            if r2 > r1 && r2 <= outer_r {
                let ann = VertexSet::new(
                    g.ball(x, r2).iter().filter(|&v| g.distance(x, v) >= r1),
                );
                push(ann, Provenance::Annulus);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let starts = g.ball(x, radius).into_vec();
    let inside = g.mask(&big);
    for _ in 0..budget.samples {
        let s = starts[rng.random_range(0..starts.len())];
        let target = rng.random_range(1..=big.len());
        let mut set = vec![s];
        let mut in_set = HashSet::from([s]);
        let mut frontier: Vec<VertexId> = Vec::new();
        let mut in_frontier = HashSet::new();
        let mut add_frontier = |v: VertexId, in_set: &HashSet<VertexId>, frontier: &mut Vec<VertexId>| {
            for (u, _) in g.neighbors(v) {
                if inside[u] && !in_set.contains(&u) && in_frontier.insert(u) {
                    frontier.push(u);
                }
            }
        };
        add_frontier(s, &in_set, &mut frontier);
        while set.len() < target && !frontier.is_empty() {
            let i = rng.random_range(0..frontier.len());
            let v = frontier.swap_remove(i);
            set.push(v);
            in_set.insert(v);
            add_frontier(v, &in_set, &mut frontier);
        }
        push(VertexSet::new(set), Provenance::BfsRandom);
    }

    Ok(SubsetFamily {
        center: x,
        radius,
        ball_factor,
        members,
        provenance,
        seed: budget.seed,
        exhaustive_cap: budget.max_exhaustive_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub delta: f64,
    pub member: usize,
    pub set: VertexSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<VertexSet>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub exhaustive: usize,
    pub max_exhaustive_size: usize,
    pub subballs: usize,
    pub annuli: usize,
    pub random: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashParams {
    pub a: f64,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check_name: String,
    pub graph_id: String,
    pub center: VertexId,
    pub radius: usize,
    pub ball_factor: usize,
    /// The scale the ratios are divided by (`E(x, R)`, `Ē(B)`, …).
    pub normalizer: f64,
    pub ball_measure: f64,
    pub delta_grid: Vec<f64>,
    pub worst_constant: Vec<f64>,
    pub witnesses: Vec<Witness>,
    pub coverage: Coverage,
    pub pass: bool,
    pub q: f64,
    pub beta: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash: Option<Vec<NashParams>>,
}

impl InequalityReport {
    pub fn constant_at(&self, delta: f64) -> Option<f64> {
        self.delta_grid
            .iter()
            .position(|&d| (d - delta).abs() < 1e-12)
            .map(|i| self.worst_constant[i])
    }
}

pub fn graph_id(g: &WeightedGraph) -> String {
    let meta = g.meta();
    format!("{}{}", meta.family, serde_json::Value::Object(meta.params.clone()))
}

/// `0.1, 0.2, …, 1.5`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=15).map(|i| i as f64 / 10.0).collect()
}

/// Parses `start:stop:step`.
pub fn parse_delta_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidParameter(format!("delta grid {text:?}: {e}")))?;
    match parts.as_slice() {
        [single] => Ok(vec![*single]),
        [start, stop, step] if *step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err(Error::InvalidParameter(format!("delta grid {text:?}"))),
    }
}

fn coverage(family: &SubsetFamily) -> Coverage {
    Coverage {
        exhaustive: family.count(Provenance::Exhaustive),
        max_exhaustive_size: family.exhaustive_cap,
        subballs: family.count(Provenance::Subball),
        annuli: family.count(Provenance::Annulus),
        random: family.count(Provenance::BfsRandom),
    }
}

struct Scored {
    /// `(Q, μ(A) or other weight, inner set)` per member.
    q: Vec<(f64, Option<VertexSet>)>,
}

/// Maximises `q(A) / (norm · w(A)^δ)` for every δ.
fn maximise(
    family: &SubsetFamily,
    scored: &Scored,
    weight: impl Fn(usize, &Option<VertexSet>) -> f64,
    exponent_offset: impl Fn(usize, &Option<VertexSet>, f64) -> f64,
    normalizer: f64,
    deltas: &[f64],
) -> (Vec<f64>, Vec<Witness>) {
    let mut worst = Vec::with_capacity(deltas.len());
    let mut witnesses = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (q, inner)) in scored.q.iter().enumerate() {
            let denom = normalizer * weight(i, inner).powf(delta) * exponent_offset(i, inner, delta);
            let ratio = q / denom;
            if ratio > best.0 {
                best = (ratio, i);
            }
        }
        worst.push(best.0);
        witnesses.push(Witness {
            delta,
            member: best.1,
            set: family.members[best.1].clone(),
            inner: scored.q[best.1].1.clone(),
            ratio: best.0,
        });
    }
    (worst, witnesses)
}

struct Context {
    ball_measure: f64,
    e_xr: f64,
}

fn context(g: &WeightedGraph, family: &SubsetFamily, profile: &ExitProfile) -> Result<Context> {
    if profile.center != family.center {
        return Err(Error::InvalidParameter("profile and family have different centres".into()));
    }
    if profile.r_max() < family.radius {
        return Err(Error::BeyondProfile {
            requested: family.radius as f64,
            available: profile.r_max() as f64,
        });
    }
    Ok(Context {
        ball_measure: g.set_measure(&g.ball(family.center, family.ball_factor * family.radius)),
        e_xr: profile.table[family.radius],
    })
}

#[allow(clippy::too_many_arguments)]
fn report(
    name: &str,
    g: &WeightedGraph,
    family: &SubsetFamily,
    normalizer: f64,
    ball_measure: f64,
    deltas: &[f64],
    worst: Vec<f64>,
    witnesses: Vec<Witness>,
    profile: &ExitProfile,
) -> InequalityReport {
    let pass = worst.iter().all(|c| c.is_finite() && *c > 0.0);
    InequalityReport {
        check_name: name.into(),
        graph_id: graph_id(g),
        center: family.center,
        radius: family.radius,
        ball_factor: family.ball_factor,
        normalizer,
        ball_measure,
        delta_grid: deltas.to_vec(),
        worst_constant: worst,
        witnesses,
        coverage: coverage(family),
        pass,
        q: profile.q,
        beta: profile.beta,
        seed: family.seed,
        nash: None,
    }
}

fn per_member<T: Send>(
    family: &SubsetFamily,
    f: impl Fn(&VertexSet) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    family.members.par_iter().map(f).collect()
}

/// `Ē(A) ≤ C E(x, R) (μ(A)/μ(B))^δ`.
pub fn check_e(
    g: &WeightedGraph,
    family: &SubsetFamily,
    profile: &ExitProfile,
    deltas: &[f64],
) -> Result<InequalityReport> {
    let ctx = context(g, family, profile)?;
    let q = per_member(family, |a| Ok((extreme_exit_time(g, a)?.0, None)))?;
    let scored = Scored { q };
    let mu = |i: usize, _: &Option<VertexSet>| g.set_measure(&family.members[i]) / ctx.ball_measure;
    let (worst, wit) = maximise(family, &scored, mu, |_, _, _| 1.0, ctx.e_xr, deltas);
    Ok(report("E", g, family, ctx.e_xr, ctx.ball_measure, deltas, worst, wit, profile))
}

/// `λ(A)⁻¹ ≤ C E(x, R) (μ(A)/μ(B))^δ`, with the Nash constants implied by
/// each fitted pair.
pub fn check_fk(
    g: &WeightedGraph,
    family: &SubsetFamily,
    profile: &ExitProfile,
    deltas: &[f64],
) -> Result<InequalityReport> {
    let ctx = context(g, family, profile)?;
    let q = per_member(family, |a| Ok((inverse_lambda(g, a)?, None)))?;
    let scored = Scored { q };
    let mu = |i: usize, _: &Option<VertexSet>| g.set_measure(&family.members[i]) / ctx.ball_measure;
    let (worst, wit) = maximise(family, &scored, mu, |_, _, _| 1.0, ctx.e_xr, deltas);
    let nash = deltas
        .iter()
        .zip(&worst)
        .map(|(&delta, &c)| {
            let k = c * ctx.e_xr / ctx.ball_measure.powf(delta);
            let (a, c) = nash_parameters(k, delta);
            NashParams { a, c, delta }
        })
        .collect();
    let mut rep = report("FK", g, family, ctx.e_xr, ctx.ball_measure, deltas, worst, wit, profile);
    rep.nash = Some(nash);
    Ok(rep)
}

/// Inner sets `D ⊆ A` for the resistance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerBudget {
    /// All nonempty subsets of `A` are used when `|A|` is at most this.
    pub exhaustive_cap: usize,
    /// Upper bound on singletons plus sub-balls per set beyond the cap.
    pub max_structured: usize,
}

impl Default for InnerBudget {
    fn default() -> Self {
        InnerBudget {
            exhaustive_cap: 8,
            max_structured: 64,
        }
    }
}

pub fn inner_sets(g: &WeightedGraph, a: &VertexSet, budget: &InnerBudget) -> Vec<VertexSet> {
    let m = a.members();
    if m.len() <= budget.exhaustive_cap {
        return (1u32..(1 << m.len()))
            .map(|mask| VertexSet::new((0..m.len()).filter(|i| mask >> i & 1 == 1).map(|i| m[i])))
            .collect();
    }
    let mut out: Vec<VertexSet> = Vec::new();
    let mut seen = HashSet::new();
    let centres = crate::graph::sample_evenly(m.len(), budget.max_structured / 2);
    for &i in &centres {
        let y = m[i];
        for r in 1.. {
            let b = g.ball(y, r);
            if !b.is_subset(a) {
                break;
            }
            let whole = b.len() == a.len();
            if seen.insert(b.clone()) {
                out.push(b);
            }
            if whole {
                break;
            }
        }
    }
    if seen.insert(a.clone()) {
        out.push(a.clone());
    }
    out.truncate(budget.max_structured.max(1));
    out
}

/// `max_{D} ρ(D, Γ \ A) μ(D)` and the maximising `D`.
fn best_inner(g: &WeightedGraph, a: &VertexSet, inner: &InnerBudget) -> Result<(f64, VertexSet)> {
    g.guard_set(a)?;
    let outside = g.complement(a);
    let mut best = (f64::NEG_INFINITY, VertexSet::empty());
    for d in inner_sets(g, a, inner) {
        let v = effective_resistance(g, &d, &outside)? * g.set_measure(&d);
        if v > best.0 {
            best = (v, d);
        }
    }
    Ok(best)
}

/// `ρ(D, A) μ(D) ≤ C E(x, R) (μ(A)/μ(B))^δ`, with `ρ(D, A)` the resistance
/// from `D` to the complement of `A`.
pub fn check_rho(
    g: &WeightedGraph,
    family: &SubsetFamily,
    profile: &ExitProfile,
    deltas: &[f64],
    inner: &InnerBudget,
) -> Result<InequalityReport> {
    let ctx = context(g, family, profile)?;
    let q = per_member(family, |a| {
        let (v, d) = best_inner(g, a, inner)?;
        Ok((v, Some(d)))
    })?;
    let scored = Scored { q };
    let mu = |i: usize, _: &Option<VertexSet>| g.set_measure(&family.members[i]) / ctx.ball_measure;
    let (worst, wit) = maximise(family, &scored, mu, |_, _, _| 1.0, ctx.e_xr, deltas);
    Ok(report("rho", g, family, ctx.e_xr, ctx.ball_measure, deltas, worst, wit, profile))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcycleReport {
    pub delta: f64,
    pub sets: usize,
    /// Best constants in `Ē(A) ≤ C μ(A)^δ`, `λ⁻¹(A) ≤ C μ(A)^δ` and
    /// `ρ(D, A) μ(D) ≤ C μ(A)^δ`.
    pub c_exit: f64,
    pub c_lambda: f64,
    pub c_rho: f64,
    pub exit_over_lambda: f64,
    pub exit_over_rho: f64,
    pub lambda_over_rho: f64,
}

/// The three constants of the fixed-scale equivalence and their ratios.
pub fn check_pcycle(
    g: &WeightedGraph,
    sets: &[VertexSet],
    delta: f64,
    inner: &InnerBudget,
) -> Result<PcycleReport> {
    let rows: Vec<(f64, f64, f64)> = sets
        .par_iter()
        .map(|a| {
            let scale = g.set_measure(a).powf(delta);
            let e = extreme_exit_time(g, a)?.0 / scale;
            let l = inverse_lambda(g, a)? / scale;
            let r = best_inner(g, a, inner)?.0 / scale;
            Ok((e, l, r))
        })
        .collect::<Result<_>>()?;
    let c_exit = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let c_lambda = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let c_rho = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(PcycleReport {
        delta,
        sets: sets.len(),
        c_exit,
        c_lambda,
        c_rho,
        exit_over_lambda: c_exit / c_lambda,
        exit_over_rho: c_exit / c_rho,
        lambda_over_rho: c_lambda / c_rho,
    })
}

/// The three normalised forms with `B = B(x, 2R)`: `Ē(A)/Ē(B)`,
/// `λ⁻¹(A)/λ⁻¹(B)` against `(μ(A)/μ(B))^δ`, and
/// `ρ(D, A)/ρ(x, R, 2R)` against `(μ(A)/μ(D))^δ (μ(D)/μ(B))^{δ−1}`.
/// Members not contained in `B(x, 2R)` are dropped.
pub fn check_equivalent_forms(
    g: &WeightedGraph,
    family: &SubsetFamily,
    profile: &ExitProfile,
    deltas: &[f64],
    inner: &InnerBudget,
) -> Result<[InequalityReport; 3]> {
    let x = family.center;
    let r = family.radius;
    g.guard(x, 2 * r)?;
    let b = g.ball(x, 2 * r);
    let fam = family.restricted_to(&b);
    if fam.is_empty() {
        return Err(Error::EmptySet);
    }
    let mu_b = g.set_measure(&b);
    let mu = |i: usize, _: &Option<VertexSet>| g.set_measure(&fam.members[i]) / mu_b;

    let ee_b = extreme_exit_time(g, &b)?.0;
    let q = per_member(&fam, |a| Ok((extreme_exit_time(g, a)?.0, None)))?;
    let (w, wit) = maximise(&fam, &Scored { q }, mu, |_, _, _| 1.0, ee_b, deltas);
    let fke = report("FKE", g, &fam, ee_b, mu_b, deltas, w, wit, profile);

    let il_b = inverse_lambda(g, &b)?;
    let q = per_member(&fam, |a| Ok((inverse_lambda(g, a)?, None)))?;
    let (w, wit) = maximise(&fam, &Scored { q }, mu, |_, _, _| 1.0, il_b, deltas);
    let fkll = report("fkll", g, &fam, il_b, mu_b, deltas, w, wit, profile);

    let rho_ann = annulus_resistance(g, x, r, 2 * r)?;
    let q = per_member(&fam, |a| {
        g.guard_set(a)?;
        let outside = g.complement(a);
        // per δ the best D differs, so keep every candidate's value; the
        // maximisation below picks over (A, D) pairs
        let mut all = Vec::new();
        for d in inner_sets(g, a, inner) {
            all.push((effective_resistance(g, &d, &outside)?, d));
        }
        Ok(all)
    })?;
    let mut worst = Vec::new();
    let mut wits = Vec::new();
    for &delta in deltas {
        let mut best = (f64::NEG_INFINITY, 0, VertexSet::empty());
        for (i, cands) in q.iter().enumerate() {
            let mu_a = g.set_measure(&fam.members[i]);
            for (rho, d) in cands {
                let mu_d = g.set_measure(d);
                let rhs = (mu_a / mu_d).powf(delta) * (mu_d / mu_b).powf(delta - 1.0);
                let ratio = rho / rho_ann / rhs;
                if ratio > best.0 {
                    best = (ratio, i, d.clone());
                }
            }
        }
        worst.push(best.0);
        wits.push(Witness {
            delta,
            member: best.1,
            set: fam.members[best.1].clone(),
            inner: Some(best.2),
            ratio: best.0,
        });
    }
    let fkrr = report("FKrr", g, &fam, rho_ann, mu_b, deltas, worst, wits, profile);
    Ok([fke, fkll, fkrr])
}

/// Largest over smallest `Ĉ(δ)` across reports (typically three dyadic radii).
pub fn stability_ratio(reports: &[InequalityReport], delta: f64) -> Option<f64> {
    let cs: Vec<f64> = reports.iter().filter_map(|r| r.constant_at(delta)).collect();
    if cs.len() != reports.len() || cs.is_empty() {
        return None;
    }
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    Some(hi / lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub check_name: String,
    pub tested: usize,
    pub violations: usize,
    /// Largest `lhs / rhs`.
    pub worst_ratio: f64,
    pub worst_index: usize,
}

/// `λ(B) ρ(A, Γ \ B) μ(A) ≤ 1` for pairs `A ⊆ B`.
pub fn check_llrv(g: &WeightedGraph, pairs: &[(VertexSet, VertexSet)]) -> Result<LemmaReport> {
    let mut outer: Vec<&VertexSet> = pairs.iter().map(|p| &p.1).collect();
    outer.sort_unstable();
    outer.dedup();
    let lambdas: Vec<f64> = outer
        .par_iter()
        .map(|b| Ok(lambda_min(g, b)?.value))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| {
            if !a.is_subset(b) {
                return Err(Error::InvalidParameter("inner set not contained in outer".into()));
            }
            let lam = lambdas[outer.binary_search(&b).expect("outer set indexed")];
            let rho = effective_resistance(g, a, &g.complement(b))?;
            Ok(lam * rho * g.set_measure(a))
        })
        .collect::<Result<_>>()?;
    Ok(lemma_report("llrv", &ratios, 1.0 + 1e-9))
}

/// `λ⁻¹(A) ≤ Ē(A)` for every set.
pub fn check_lebar(g: &WeightedGraph, sets: &[VertexSet]) -> Result<LemmaReport> {
    let ratios: Vec<f64> = sets
        .par_iter()
        .map(|a| Ok(inverse_lambda(g, a)? / extreme_exit_time(g, a)?.0))
        .collect::<Result<_>>()?;
    Ok(lemma_report("lebar", &ratios, 1.0 + 1e-9))
}

fn lemma_report(name: &str, ratios: &[f64], limit: f64) -> LemmaReport {
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, &r) in ratios.iter().enumerate() {
        if r > worst.0 {
            worst = (r, i);
        }
    }
    LemmaReport {
        check_name: name.into(),
        tested: ratios.len(),
        violations: ratios.iter().filter(|&&r| !(r <= limit)).count(),
        worst_ratio: worst.0,
        worst_index: worst.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::lattice_box;
    use crate::potential::exit_profile;

    #[test]
    fn enumeration_on_a_line() {
        let g = lattice_box(1, 21).unwrap();
        let o = g.root().unwrap();
        let window = VertexSet::new(o - 2..=o + 2);
        let sets = connected_subsets_containing(&g, o, 3, Some(&window)).unwrap();
        let mut got: Vec<Vec<i64>> = sets
            .iter()
            .map(|s| s.iter().map(|v| v as i64 - o as i64).collect())
            .collect();
        got.sort();
        let mut want = vec![
            vec![0],
            vec![-1, 0],
            vec![0, 1],
            vec![-1, 0, 1],
            vec![-2, -1, 0],
            vec![0, 1, 2],
        ];
        want.sort();
        assert_eq!(got, want);
        let one = connected_subsets_containing(&g, o, 1, None).unwrap();
        assert_eq!(one, vec![VertexSet::singleton(o)]);
    }

    #[test]
    fn family_is_deterministic_and_inside_the_ball() {
        let g = lattice_box(2, 41).unwrap();
        let o = g.root().unwrap();
        let budget = FamilyBudget {
            max_exhaustive_size: 4,
            samples: 30,
            seed: 11,
        };
        let f1 = subset_families(&g, o, 3, 3, &budget).unwrap();
        let f2 = subset_families(&g, o, 3, 3, &budget).unwrap();
        assert_eq!(f1, f2);
        let big = g.ball(o, 9);
        assert!(f1.members.iter().all(|a| a.is_subset(&big) && !a.is_empty()));
        assert!(f1.count(Provenance::Exhaustive) > 0);
        assert!(f1.count(Provenance::Subball) > 0);
        assert!(f1.count(Provenance::Annulus) > 0);
        assert!(f1.count(Provenance::BfsRandom) > 0);
    }

    #[test]
    fn fk_below_e_and_witnesses_reproduce() {
        let g = lattice_box(2, 41).unwrap();
        let o = g.root().unwrap();
        let budget = FamilyBudget {
            max_exhaustive_size: 4,
            samples: 20,
            seed: 1,
        };
        let fam = subset_families(&g, o, 2, 3, &budget).unwrap();
        let prof = exit_profile(&g, o, 2, 1.0).unwrap();
        let deltas = default_delta_grid();
        let e = check_e(&g, &fam, &prof, &deltas).unwrap();
        let fk = check_fk(&g, &fam, &prof, &deltas).unwrap();
        for i in 0..deltas.len() {
            assert!(fk.worst_constant[i] <= e.worst_constant[i] + 1e-9);
        }
        let w = &e.witnesses[4];
        let mu_b = g.set_measure(&g.ball(o, 6));
        let ratio = extreme_exit_time(&g, &w.set).unwrap().0
            / (prof.table[2] * (g.set_measure(&w.set) / mu_b).powf(w.delta));
        assert!((ratio - e.worst_constant[4]).abs() <= 1e-9 * ratio);
        assert!(fk.nash.as_ref().unwrap().len() == deltas.len());
    }

    #[test]
    fn single_point_constants() {
        let g = lattice_box(1, 21).unwrap();
        let o = g.root().unwrap();
        let rep = check_pcycle(&g, &[VertexSet::singleton(o)], 0.5, &InnerBudget::default()).unwrap();
        let expected = 1.0 / 2f64.sqrt();
        assert!((rep.c_exit - expected).abs() < 1e-14);
        assert!((rep.c_lambda - expected).abs() < 1e-14);
        // ρ({o}, Γ \ {o}) μ(o) = (1/2) · 2
        assert!((rep.c_rho - expected).abs() < 1e-14);
    }

    #[test]
    fn inner_sets_are_exhaustive_for_small_sets() {
        let g = lattice_box(1, 21).unwrap();
        let a = VertexSet::new([9, 10, 11]);
        assert_eq!(inner_sets(&g, &a, &InnerBudget::default()).len(), 7);
    }

    #[test]
    fn delta_grid_parsing() {
        assert_eq!(parse_delta_grid("0.1:1.5:0.1").unwrap(), default_delta_grid());
        assert_eq!(parse_delta_grid("0.5").unwrap(), vec![0.5]);
        assert!(parse_delta_grid("1:0:0.1").is_err());
    }
}
