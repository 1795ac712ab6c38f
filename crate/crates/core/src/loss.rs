//! Multi-label losses over pooled scores and the exact backward pass through
//! pooling, the linear heads, the activation, the mean aggregation and the
//! embedding lookups.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::{Neighbor, NodeRef};
use crate::params::{Head, ParameterSet};
use crate::real::Real;
use crate::scorer::{score_entity, ScoreBundle, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Bce,
    /// False-negative aware: every negative term is scaled by `beta * (p - p^2)`.
    Fna { beta: f64 },
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// `ln σ(x)`.
#[inline]
pub fn log_sigmoid<F: Real>(x: F) -> F {
    -softplus(-x)
}

/// `ln(1 - σ(x))`.
#[inline]
pub fn log_one_minus_sigmoid<F: Real>(x: F) -> F {
    -softplus(x)
}

pub fn sigmoid_probs<F: Real>(pooled: &[F]) -> Vec<F> {
    pooled.iter().map(|&x| sigmoid(x)).collect()
}

/// Loss and derivative with respect to one pooled score.
#[inline]
fn logit_term<F: Real>(x: F, positive: bool, kind: LossKind) -> (F, F) {
    let p = sigmoid(x);
    if positive {
        return (softplus(-x), p - F::one());
    }
    match kind {
        LossKind::Bce => (softplus(x), p),
        LossKind::Fna { beta } => {
            let beta = F::lit(beta);
            let q = F::one() - p;
            let weight = beta * p * q;
            let nll = softplus(x);
            let dweight = beta * (q - p) * p * q;
            (weight * nll, dweight * nll + weight * p)
        }
    }
}

/// Sum of per-type terms. `positives` must be sorted; entries equal to `-inf`
/// (fully masked columns) carry no information and are skipped.
fn total_loss<F: Real>(pooled: &[F], positives: &[u32], kind: LossKind) -> F {
    let mut pos = positives.iter().peekable();
    let mut loss = F::zero();
    for (i, &x) in pooled.iter().enumerate() {
        let is_pos = pos.next_if(|&&t| t as usize == i).is_some();
        if x == F::neg_infinity() {
            continue;
        }
        loss += logit_term(x, is_pos, kind).0;
    }
    loss
}

pub fn bce_loss<F: Real>(pooled: &[F], positives: &[u32]) -> F {
    total_loss(pooled, positives, LossKind::Bce)
}

pub fn fna_loss<F: Real>(pooled: &[F], positives: &[u32], beta: f64) -> F {
    total_loss(pooled, positives, LossKind::Fna { beta })
}

pub fn loss_value<F: Real>(pooled: &[F], positives: &[u32], kind: LossKind) -> F {
    total_loss(pooled, positives, kind)
}

/// Embedding rows touched by a forward pass, keyed by row id.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows<F> {
    dim: usize,
    rows: BTreeMap<u32, Vec<F>>,
}

impl<F: Real> SparseRows<F> {
    pub fn new(dim: usize) -> Self {
        SparseRows { dim, rows: BTreeMap::new() }
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [F] {
        let dim = self.dim;
        self.rows.entry(id).or_insert_with(|| vec![F::zero(); dim])
    }

    pub fn get(&self, id: u32) -> Option<&[F]> {
        self.rows.get(&id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[F])> {
        self.rows.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = u32> + '_ {
        self.rows.keys().copied()
    }

    fn add_assign(&mut self, other: &SparseRows<F>) {
        for (id, g) in other.iter() {
            for (a, &b) in self.row_mut(id).iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.rows.values().all(|r| r.iter().all(|x| x.is_finite()))
    }
}

/// Dense gradients for the classifier heads, sparse ones for embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<F> {
    pub head: Head<F>,
    pub agg_head: Option<Head<F>>,
    pub entity: SparseRows<F>,
    pub relation: SparseRows<F>,
    pub types: SparseRows<F>,
}

impl<F: Real> GradientSet<F> {
    pub fn zeros_like(params: &ParameterSet<F>) -> Self {
        let (l, k) = (params.num_types(), params.dim);
        GradientSet {
            head: Head::zeros(l, k),
            agg_head: params.agg_head.as_ref().map(|_| Head::zeros(l, k)),
            entity: SparseRows::new(k),
            relation: SparseRows::new(k),
            types: SparseRows::new(k),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet<F>) {
        add_head(&mut self.head, &other.head);
        if let (Some(a), Some(b)) = (self.agg_head.as_mut(), other.agg_head.as_ref()) {
            add_head(a, b);
        }
        self.entity.add_assign(&other.entity);
        self.relation.add_assign(&other.relation);
        self.types.add_assign(&other.types);
    }

    /// Names the first tensor holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        let head_ok = |h: &Head<F>| h.weight.as_slice().iter().all(|x| x.is_finite());
        let bias_ok = |h: &Head<F>| h.bias.iter().all(|x| x.is_finite());
        if !head_ok(&self.head) {
            return Err(Error::NonFiniteGradient("W"));
        }
        if !bias_ok(&self.head) {
            return Err(Error::NonFiniteGradient("b"));
        }
        if let Some(h) = &self.agg_head {
            if !head_ok(h) || !bias_ok(h) {
                return Err(Error::NonFiniteGradient("aggregation head"));
            }
        }
        if !self.entity.is_finite() {
            return Err(Error::NonFiniteGradient("entity embeddings"));
        }
        if !self.relation.is_finite() {
            return Err(Error::NonFiniteGradient("relation embeddings"));
        }
        if !self.types.is_finite() {
            return Err(Error::NonFiniteGradient("type embeddings"));
        }
        Ok(())
    }
}

fn add_head<F: Real>(a: &mut Head<F>, b: &Head<F>) {
    for (x, &y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
        *x += y;
    }
    for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
        *x += y;
    }
}

pub fn backward<F: Real>(
    params: &ParameterSet<F>,
    bundle: &ScoreBundle<F>,
    positives: &[u32],
    kind: LossKind,
) -> (F, GradientSet<F>) {
    let mut grads = GradientSet::zeros_like(params);
    let loss = backward_into(params, bundle, positives, kind, &mut grads);
    (loss, grads)
}

/// Adds this entity's gradients into `grads` and returns its loss.
pub fn backward_into<F: Real>(
    params: &ParameterSet<F>,
    bundle: &ScoreBundle<F>,
    positives: &[u32],
    kind: LossKind,
    grads: &mut GradientSet<F>,
) -> F {
    let num_types = params.num_types();
    let k = params.dim;
    let alpha = bundle.alpha;

    // d loss / d pooled
    let mut loss = F::zero();
    let mut d_pooled = vec![F::zero(); num_types];
    let mut pos = positives.iter().peekable();
    for (i, dp) in d_pooled.iter_mut().enumerate() {
        let is_pos = pos.next_if(|&&t| t as usize == i).is_some();
        if !bundle.live[i] {
            continue;
        }
        let (l, d) = logit_term(bundle.pooled[i], is_pos, kind);
        loss += l;
        *dp = d;
    }

    let offset = bundle.neighbor_offset();
    let m = bundle.reps.rows();
    let mut d_reps = vec![F::zero(); m * k];
    let mut d_agg = vec![F::zero(); k];
    let mut g_row = vec![F::zero(); num_types];
    let mut act = vec![F::zero(); k];
    let mut d_act = vec![F::zero(); k];

    for j in 0..bundle.num_candidates() {
        // d pooled_i / d x_ji = w_ji * (1 + alpha * (x_ji - pooled_i))
        let mut any = false;
        for i in 0..num_types {
            let w = bundle.weights.get(j, i);
            g_row[i] = if w > F::zero() && d_pooled[i] != F::zero() {
                any = true;
                d_pooled[i] * w * (F::one() + alpha * (bundle.candidate_scores.get(j, i) - bundle.pooled[i]))
            } else {
                F::zero()
            };
        }
        if !any {
            continue;
        }
        let is_agg = j < offset;
        let z: &[F] = if is_agg {
            bundle.aggregate.as_deref().unwrap_or(&[])
        } else {
            bundle.reps.row(j - offset)
        };
        for (a, &zc) in act.iter_mut().zip(z) {
            *a = crate::scorer::activate(zc, bundle.use_activation);
        }
        let (head, grad_head) = match (is_agg, params.agg_head.as_ref(), grads.agg_head.as_mut()) {
            (true, Some(h), Some(g)) => (h, g),
            _ => (&params.head, &mut grads.head),
        };
        d_act.iter_mut().for_each(|x| *x = F::zero());
        for (i, &g) in g_row.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            grad_head.bias[i] += g;
            for ((dw, &a), (da, &w)) in grad_head
                .weight
                .row_mut(i)
                .iter_mut()
                .zip(&act)
                .zip(d_act.iter_mut().zip(head.weight.row(i)))
            {
                *dw += g * a;
                *da += g * w;
            }
        }
        let target: &mut [F] = if is_agg { &mut d_agg } else { &mut d_reps[(j - offset) * k..(j - offset + 1) * k] };
        for ((t, &da), &zc) in target.iter_mut().zip(&d_act).zip(z) {
            if !bundle.use_activation || zc > F::zero() {
                *t += da;
            }
        }
    }

    if offset == 1 && m > 0 {
        let inv = F::one() / F::lit(m as f64);
        for j in 0..m {
            for (d, &a) in d_reps[j * k..(j + 1) * k].iter_mut().zip(&d_agg) {
                *d += a * inv;
            }
        }
    }

    let neighbors = bundle.sources[offset..].iter().filter_map(|s| match s {
        crate::scorer::Source::Neighbor(nb) => Some(nb),
        crate::scorer::Source::Aggregation => None,
    });
    for (j, nb) in neighbors.enumerate() {
        let d = &d_reps[j * k..(j + 1) * k];
        scatter_neighbor(grads, nb, d);
    }
    loss
}

fn scatter_neighbor<F: Real>(grads: &mut GradientSet<F>, nb: &Neighbor, d: &[F]) {
    let target = match nb.target {
        NodeRef::Entity(e) => grads.entity.row_mut(e),
        NodeRef::Type(t) => grads.types.row_mut(t),
    };
    for (g, &x) in target.iter_mut().zip(d) {
        *g += x;
    }
    let rel = grads.relation.row_mut(nb.relation);
    if nb.inverted {
        for (g, &x) in rel.iter_mut().zip(d) {
            *g += x;
        }
    } else {
        for (g, &x) in rel.iter_mut().zip(d) {
            *g -= x;
        }
    }
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Finite-difference gradient of the forward loss for every scalar the forward
/// pass reads: both heads in full and every referenced embedding row.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_oracle(
    params: &ParameterSet<f64>,
    entity: u32,
    sampled: &[Neighbor],
    positives: &[u32],
    opts: &ScoreOptions,
    mask: Option<&[u32]>,
    kind: LossKind,
    step: f64,
) -> Result<GradientSet<f64>> {
    let mut work = params.clone();
    let eval = |p: &ParameterSet<f64>| -> Result<f64> {
        let b = score_entity(p, entity, sampled, opts, mask)?;
        Ok(loss_value(&b.pooled, positives, kind))
    };
    eval(&work)?;

    let probe = |work: &mut ParameterSet<f64>, slot: fn(&mut ParameterSet<f64>, usize) -> &mut f64, idx: usize| {
        let x0 = *slot(work, idx);
        let d = central_difference(
            |x| {
                *slot(work, idx) = x;
                eval(work).unwrap_or(f64::NAN)
            },
            x0,
            step,
        );
        *slot(work, idx) = x0;
        d
    };

    let mut grads = GradientSet::zeros_like(params);
    let (l, k) = (params.num_types(), params.dim);
    for idx in 0..l * k {
        grads.head.weight.as_mut_slice()[idx] = probe(&mut work, |p, i| &mut p.head.weight.as_mut_slice()[i], idx);
    }
    for idx in 0..l {
        grads.head.bias[idx] = probe(&mut work, |p, i| &mut p.head.bias[i], idx);
    }
    if let Some(agg) = grads.agg_head.as_mut() {
        for idx in 0..l * k {
            agg.weight.as_mut_slice()[idx] =
                probe(&mut work, |p, i| &mut p.agg_head.as_mut().unwrap().weight.as_mut_slice()[i], idx);
        }
        for idx in 0..l {
            agg.bias[idx] = probe(&mut work, |p, i| &mut p.agg_head.as_mut().unwrap().bias[i], idx);
        }
    }

    for nb in sampled {
        let base = match nb.target {
            NodeRef::Entity(e) => e as usize * k,
            NodeRef::Type(t) => t as usize * k,
        };
        for c in 0..k {
            let d = match nb.target {
                NodeRef::Entity(_) => probe(&mut work, |p, i| &mut p.entity.as_mut_slice()[i], base + c),
                NodeRef::Type(_) => probe(&mut work, |p, i| &mut p.types.as_mut_slice()[i], base + c),
            };
            match nb.target {
                NodeRef::Entity(e) => grads.entity.row_mut(e)[c] = d,
                NodeRef::Type(t) => grads.types.row_mut(t)[c] = d,
            }
        }
        let base = nb.relation as usize * k;
        for c in 0..k {
            let d = probe(&mut work, |p, i| &mut p.relation.as_mut_slice()[i], base + c);
            grads.relation.row_mut(nb.relation)[c] = d;
        }
    }
    Ok(grads)
}
