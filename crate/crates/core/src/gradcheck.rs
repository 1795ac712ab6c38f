//! Randomized comparison of [`backward`] against central finite differences,
//! everything in `f64`.

use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::{Neighbor, NodeRef, HAS_TYPE_ID};
use crate::loss::{backward, finite_diff_oracle, GradientSet, LossKind, SparseRows};
use crate::params::{Head, Matrix, ParameterSet};
use crate::scorer::{score_entity, ScoreOptions};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckCase {
    pub seed: u64,
    pub loss: LossKind,
    pub use_agg2t: bool,
    pub mask: bool,
    pub use_activation: bool,
    pub separate_heads: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseReport {
    pub case: GradcheckCase,
    pub dim: usize,
    pub num_types: usize,
    pub num_sampled: usize,
    pub max_rel_err: f64,
    pub worst_tensor: &'static str,
    pub checked: usize,
}

/// `|analytic - numeric| / max(|numeric|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-8)
}

/// Every combination of loss, aggregation, mask, activation and head sharing, for
/// `seeds_per_combo` seeds each.
pub fn default_suite(seeds_per_combo: u64) -> Vec<GradcheckCase> {
    let mut cases = Vec::new();
    let mut seed = 0;
    for loss in [LossKind::Bce, LossKind::Fna { beta: 4.0 }] {
        for use_agg2t in [true, false] {
            for mask in [false, true] {
                for use_activation in [true, false] {
                    for separate_heads in [false, true] {
                        if separate_heads && !use_agg2t {
                            continue;
                        }
                        for _ in 0..seeds_per_combo {
                            cases.push(GradcheckCase { seed, loss, use_agg2t, mask, use_activation, separate_heads });
                            seed += 1;
                        }
                    }
                }
            }
        }
    }
    cases
}

struct Instance {
    params: ParameterSet<f64>,
    sampled: Vec<Neighbor>,
    positives: Vec<u32>,
}

/// k ≤ 5, L ≤ 4, m ≤ 3, parameters uniform on [-0.8, 0.8].
fn instance(case: &GradcheckCase) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ 0x6772_6164);
    let dim = rng.gen_range(2..=5);
    let num_types = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=3);
    let (num_entities, num_relations) = (5, 4);
    let dist = Uniform::new_inclusive(-0.8, 0.8);
    let mut params = ParameterSet::zeros(num_entities, num_relations, num_types, dim, case.separate_heads);
    let mut fill = |xs: &mut [f64]| xs.iter_mut().for_each(|x| *x = dist.sample(&mut rng));
    fill(params.entity.as_mut_slice());
    fill(params.relation.as_mut_slice());
    fill(params.types.as_mut_slice());
    fill(params.head.weight.as_mut_slice());
    fill(&mut params.head.bias);
    if let Some(h) = params.agg_head.as_mut() {
        fill(h.weight.as_mut_slice());
        fill(&mut h.bias);
    }

    let mut sampled = Vec::with_capacity(m);
    for _ in 0..m {
        let nb = match rng.gen_range(0..3) {
            0 => Neighbor::forward(rng.gen_range(1..num_relations as u32), NodeRef::Entity(rng.gen_range(1..5))),
            1 => Neighbor::inverse(rng.gen_range(1..num_relations as u32), NodeRef::Entity(rng.gen_range(1..5))),
            _ => Neighbor::forward(HAS_TYPE_ID, NodeRef::Type(rng.gen_range(0..num_types as u32))),
        };
        sampled.push(nb);
    }
    let mut positives: Vec<u32> = (0..num_types as u32).filter(|_| rng.gen_bool(0.4)).collect();
    for nb in &sampled {
        if let (true, NodeRef::Type(t)) = (nb.is_type_edge(), nb.target) {
            positives.push(t);
        }
    }
    positives.sort_unstable();
    positives.dedup();
    Instance { params, sampled, positives }
}

pub fn run_case(case: &GradcheckCase, step: f64) -> Result<CaseReport> {
    let Instance { params, sampled, positives } = instance(case);
    let opts = ScoreOptions { alpha: 0.5, use_agg2t: case.use_agg2t, use_activation: case.use_activation };
    let mask = case.mask.then_some(positives.as_slice());
    let bundle = score_entity(&params, 0, &sampled, &opts, mask)?;
    let (_, analytic) = backward(&params, &bundle, &positives, case.loss);
    let numeric = finite_diff_oracle(&params, 0, &sampled, &positives, &opts, mask, case.loss, step)?;

    let mut worst = (0.0f64, "none");
    let mut checked = 0usize;
    let mut compare = |name: &'static str, a: &[f64], n: &[f64]| {
        for (&x, &y) in a.iter().zip(n) {
            let err = relative_error(x, y);
            checked += 1;
            if err > worst.0 || err.is_nan() {
                worst = (err, name);
            }
        }
    };
    compare_heads(&mut compare, "W", "b", &analytic.head, &numeric.head);
    if let (Some(a), Some(n)) = (&analytic.agg_head, &numeric.agg_head) {
        compare_heads(&mut compare, "W_agg", "b_agg", a, n);
    }
    compare_rows(&mut compare, "entity", &analytic.entity, &numeric.entity);
    compare_rows(&mut compare, "relation", &analytic.relation, &numeric.relation);
    compare_rows(&mut compare, "type", &analytic.types, &numeric.types);
    extra_rows_are_absent(&analytic, &numeric);

    Ok(CaseReport {
        case: *case,
        dim: params.dim,
        num_types: params.num_types(),
        num_sampled: sampled.len(),
        max_rel_err: worst.0,
        worst_tensor: worst.1,
        checked,
    })
}

fn compare_heads(
    compare: &mut impl FnMut(&'static str, &[f64], &[f64]),
    w: &'static str,
    b: &'static str,
    a: &Head<f64>,
    n: &Head<f64>,
) {
    compare(w, a.weight.as_slice(), n.weight.as_slice());
    compare(b, &a.bias, &n.bias);
}

fn compare_rows(
    compare: &mut impl FnMut(&'static str, &[f64], &[f64]),
    name: &'static str,
    analytic: &SparseRows<f64>,
    numeric: &SparseRows<f64>,
) {
    for (id, row) in numeric.iter() {
        let zeros = Matrix::<f64>::zeros(1, row.len());
        let a = analytic.get(id).unwrap_or(zeros.row(0));
        compare(name, a, row);
    }
}

fn extra_rows_are_absent(analytic: &GradientSet<f64>, numeric: &GradientSet<f64>) {
    debug_assert!(analytic.entity.keys().all(|k| numeric.entity.get(k).is_some()));
    debug_assert!(analytic.relation.keys().all(|k| numeric.relation.get(k).is_some()));
    debug_assert!(analytic.types.keys().all(|k| numeric.types.get(k).is_some()));
}
