//! Parameter initialization and Adam with lazy sparse updates for embedding rows.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::Vocab;
use crate::loss::{GradientSet, SparseRows};
use crate::params::{Head, Matrix, ParameterSet};
use crate::real::Real;

/// Embeddings and classifier weights i.i.d. uniform on `[-10/k, 10/k]`; biases zero.
pub fn init_params<F: Real>(vocab: &Vocab, dim: usize, seed: u64, separate_heads: bool) -> ParameterSet<F> {
    init_params_with_shape(vocab.num_entities(), vocab.num_relations(), vocab.num_types(), dim, seed, separate_heads)
}

pub fn init_params_with_shape<F: Real>(
    num_entities: usize,
    num_relations: usize,
    num_types: usize,
    dim: usize,
    seed: u64,
    separate_heads: bool,
) -> ParameterSet<F> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut params = ParameterSet::zeros(num_entities, num_relations, num_types, dim, separate_heads);
    let bound = 10.0 / dim as f64;
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |m: &mut Matrix<F>| {
        for x in m.as_mut_slice() {
            *x = F::lit(dist.sample(&mut rng));
        }
    };
    fill(&mut params.entity);
    fill(&mut params.relation);
    fill(&mut params.types);
    fill(&mut params.head.weight);
    if let Some(h) = params.agg_head.as_mut() {
        fill(&mut h.weight);
    }
    params
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments<F> {
    first: Matrix<F>,
    second: Matrix<F>,
}

impl<F: Real> Moments<F> {
    fn like(m: &Matrix<F>) -> Self {
        Moments { first: Matrix::zeros(m.rows(), m.cols()), second: Matrix::zeros(m.rows(), m.cols()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct HeadMoments<F> {
    weight: Moments<F>,
    bias: Moments<F>,
}

impl<F: Real> HeadMoments<F> {
    fn like(h: &Head<F>) -> Self {
        HeadMoments { weight: Moments::like(&h.weight), bias: Moments::like(&Matrix::zeros(1, h.bias.len())) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub step: u64,
    entity: Moments<F>,
    relation: Moments<F>,
    types: Moments<F>,
    head: HeadMoments<F>,
    agg_head: Option<HeadMoments<F>>,
}

/// Bias-corrected coefficients for step `t` (1-based).
#[derive(Debug, Clone, Copy)]
pub struct StepScalars<F> {
    beta1: F,
    beta2: F,
    lr: F,
    eps: F,
    correction1: F,
    correction2: F,
}

impl<F: Real> StepScalars<F> {
    pub fn new(config: &AdamConfig, t: u64) -> Self {
        let t = t as i32;
        StepScalars {
            beta1: F::lit(config.beta1),
            beta2: F::lit(config.beta2),
            lr: F::lit(config.lr),
            eps: F::lit(config.eps),
            correction1: F::lit(1.0 - config.beta1.powi(t)),
            correction2: F::lit(1.0 - config.beta2.powi(t)),
        }
    }
}

/// One Adam update of `param` in place.
pub fn adam_update<F: Real>(param: &mut [F], first: &mut [F], second: &mut [F], grad: &[F], s: &StepScalars<F>) {
    let one = F::one();
    for (((p, m), v), &g) in param.iter_mut().zip(first.iter_mut()).zip(second.iter_mut()).zip(grad) {
        *m = s.beta1 * *m + (one - s.beta1) * g;
        *v = s.beta2 * *v + (one - s.beta2) * g * g;
        let m_hat = *m / s.correction1;
        let v_hat = *v / s.correction2;
        *p -= s.lr * m_hat / (v_hat.sqrt() + s.eps);
    }
}

impl<F: Real> AdamState<F> {
    pub fn new(params: &ParameterSet<F>, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            entity: Moments::like(&params.entity),
            relation: Moments::like(&params.relation),
            types: Moments::like(&params.types),
            head: HeadMoments::like(&params.head),
            agg_head: params.agg_head.as_ref().map(HeadMoments::like),
        }
    }

    /// Heads are updated densely; embedding rows only where `grads` has an entry.
    /// Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParameterSet<F>, grads: &GradientSet<F>) -> Result<()> {
        grads.check_finite()?;
        self.step += 1;
        let s = StepScalars::new(&self.config, self.step);
        update_head(&mut params.head, &mut self.head, &grads.head, &s);
        if let (Some(h), Some(m), Some(g)) = (params.agg_head.as_mut(), self.agg_head.as_mut(), grads.agg_head.as_ref()) {
            update_head(h, m, g, &s);
        }
        update_rows(&mut params.entity, &mut self.entity, &grads.entity, &s);
        update_rows(&mut params.relation, &mut self.relation, &grads.relation, &s);
        update_rows(&mut params.types, &mut self.types, &grads.types, &s);
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<F: Real>(params: &mut ParameterSet<F>, state: &mut AdamState<F>, grads: &GradientSet<F>) -> Result<()> {
    state.step(params, grads)
}

fn update_head<F: Real>(head: &mut Head<F>, moments: &mut HeadMoments<F>, grad: &Head<F>, s: &StepScalars<F>) {
    adam_update(
        head.weight.as_mut_slice(),
        moments.weight.first.as_mut_slice(),
        moments.weight.second.as_mut_slice(),
        grad.weight.as_slice(),
        s,
    );
    adam_update(
        &mut head.bias,
        moments.bias.first.as_mut_slice(),
        moments.bias.second.as_mut_slice(),
        &grad.bias,
        s,
    );
}

fn update_rows<F: Real>(table: &mut Matrix<F>, moments: &mut Moments<F>, grads: &SparseRows<F>, s: &StepScalars<F>) {
    for (id, g) in grads.iter() {
        let r = id as usize;
        adam_update(table.row_mut(r), moments.first.row_mut(r), moments.second.row_mut(r), g, s);
    }
}
