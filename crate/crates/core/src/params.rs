use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::NodeRef;
use crate::real::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn map<G: Real>(&self, f: impl Fn(F) -> G) -> Matrix<G> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Linear classifier `W·x + b` mapping a k-vector to L type scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<F> {
    /// L×k.
    pub weight: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> Head<F> {
    pub fn zeros(num_types: usize, dim: usize) -> Self {
        Head { weight: Matrix::zeros(num_types, dim), bias: vec![F::zero(); num_types] }
    }

    pub fn num_types(&self) -> usize {
        self.bias.len()
    }

    /// `out = W·x + b`.
    pub fn apply(&self, x: &[F], out: &mut [F]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.weight.row(i), x) + self.bias[i];
        }
    }

    pub fn map<G: Real>(&self, f: impl Fn(F) -> G + Copy) -> Head<G> {
        Head { weight: self.weight.map(f), bias: self.bias.iter().map(|&x| f(x)).collect() }
    }
}

/// All trainable tensors. The inverse of a relation reuses its row with a flipped sign.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<F> {
    pub dim: usize,
    pub entity: Matrix<F>,
    pub relation: Matrix<F>,
    /// Embeddings of type nodes used as neighbors; unrelated to the classifier rows.
    pub types: Matrix<F>,
    pub head: Head<F>,
    /// Present only when the aggregated row is scored by its own classifier.
    pub agg_head: Option<Head<F>>,
}

impl<F: Real> ParameterSet<F> {
    pub fn zeros(num_entities: usize, num_relations: usize, num_types: usize, dim: usize, separate_heads: bool) -> Self {
        ParameterSet {
            dim,
            entity: Matrix::zeros(num_entities, dim),
            relation: Matrix::zeros(num_relations, dim),
            types: Matrix::zeros(num_types, dim),
            head: Head::zeros(num_types, dim),
            agg_head: separate_heads.then(|| Head::zeros(num_types, dim)),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    pub fn num_types(&self) -> usize {
        self.head.num_types()
    }

    /// Classifier used for the aggregated candidate row.
    pub fn aggregation_head(&self) -> &Head<F> {
        self.agg_head.as_ref().unwrap_or(&self.head)
    }

    pub fn node_embedding(&self, node: NodeRef) -> &[F] {
        match node {
            NodeRef::Entity(e) => self.entity.row(e as usize),
            NodeRef::Type(t) => self.types.row(t as usize),
        }
    }

    pub fn is_finite(&self) -> bool {
        let head_ok = |h: &Head<F>| {
            h.weight.as_slice().iter().chain(&h.bias).all(|x| x.is_finite())
        };
        [&self.entity, &self.relation, &self.types]
            .iter()
            .all(|m| m.as_slice().iter().all(|x| x.is_finite()))
            && head_ok(&self.head)
            && self.agg_head.as_ref().is_none_or(head_ok)
    }

    pub fn cast<G: Real>(&self) -> ParameterSet<G> {
        let f = |x: F| G::lit(x.as_f64());
        ParameterSet {
            dim: self.dim,
            entity: self.entity.map(f),
            relation: self.relation.map(f),
            types: self.types.map(f),
            head: self.head.map(f),
            agg_head: self.agg_head.as_ref().map(|h| h.map(f)),
        }
    }
}

#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
