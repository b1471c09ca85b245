use indexmap::IndexMap;

use super::graph::{Gradients, Graph, Var};
use super::{Scalar, TensorError};

/// Dense row-major array with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E> {
    shape: Vec<usize>,
    data: Vec<E>,
    requires_grad: bool,
    grad: Option<Vec<E>>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<E: Scalar> Tensor<E> {
    pub fn new(shape: Vec<usize>, data: Vec<E>) -> Result<Self, TensorError> {
        if numel(&shape) != data.len() {
            return Err(TensorError::DataLength { shape, len: data.len() });
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Tensor { shape, data: vec![E::zero(); n], requires_grad: false, grad: None }
    }

    pub fn full(shape: Vec<usize>, value: E) -> Self {
        let n = numel(&shape);
        Tensor { shape, data: vec![value; n], requires_grad: false, grad: None }
    }

    pub fn scalar(value: E) -> Self {
        Tensor { shape: vec![], data: vec![value], requires_grad: false, grad: None }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self, TensorError> {
        Tensor::new(shape, data.iter().map(|&v| E::from_f64_lossy(v)).collect())
    }

    pub fn with_requires_grad(mut self, on: bool) -> Self {
        self.requires_grad = on;
        self
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    pub fn grad(&self) -> Option<&[E]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<E>) -> Result<(), TensorError> {
        if grad.len() != self.data.len() {
            return Err(TensorError::DataLength { shape: self.shape.clone(), len: grad.len() });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self, TensorError> {
        if numel(&shape) != self.data.len() {
            return Err(TensorError::DataLength { shape, len: self.data.len() });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Element conversion; gradient state is dropped.
    pub fn cast<F: Scalar>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| F::from_f64_lossy(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: None,
        }
    }

    /// Rows `indices` of the leading axis, stacked in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, TensorError> {
        let lead = *self.shape.first().ok_or_else(|| TensorError::Rank { op: "select_rows", shape: self.shape.clone() })?;
        let row = self.data.len() / lead.max(1);
        let mut data = Vec::with_capacity(row * indices.len());
        for &i in indices {
            if i >= lead {
                return Err(TensorError::Index { op: "select_rows", index: i, bound: lead });
            }
            data.extend_from_slice(&self.data[i * row..(i + 1) * row]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor::new(shape, data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<E> {
    params: IndexMap<String, Tensor<E>>,
}

/// Graph handles for every tensor of a [`ParamSet`], in insertion order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: IndexMap<String, Var>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<Var, TensorError> {
        self.vars.get(name).copied().ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    /// Routes an existing parameter name to a different graph node.
    pub fn replace(&mut self, name: &str, var: Var) -> Result<Var, TensorError> {
        let slot = self.vars.get_mut(name).ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(std::mem::replace(slot, var))
    }
}

impl<E: Scalar> ParamSet<E> {
    pub fn new() -> Self {
        ParamSet { params: IndexMap::new() }
    }

    /// Adds a parameter; the tensor is marked as requiring grad.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<E>) -> Result<(), TensorError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        self.params.insert(name, tensor.with_requires_grad(true));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<E>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<E>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<E>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<E>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Registers every parameter as a leaf of `graph`.
    ///
    /// With `trainable == false` the leaves are constants and no gradient
    /// flows into them (randomized embedding networks).
    pub fn bind(&self, graph: &mut Graph<E>, trainable: bool) -> BoundParams {
        let vars = self
            .params
            .iter()
            .map(|(name, t)| {
                let v = if trainable { graph.leaf(t) } else { graph.constant(t.shape().to_vec(), t.data().to_vec()) };
                (name.clone(), v)
            })
            .collect();
        BoundParams { vars }
    }

    /// Copies leaf gradients out of a backward pass into each tensor's grad buffer.
    pub fn store_grads(&mut self, bound: &BoundParams, grads: &Gradients<E>) -> Result<(), TensorError> {
        for (name, t) in self.params.iter_mut() {
            let v = bound.get(name)?;
            t.set_grad(grads.wrt(v))?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        self.params.values_mut().for_each(Tensor::clear_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_enforced() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.numel(), 6);
        assert_eq!(Tensor::<f32>::scalar(2.0).shape(), &[] as &[usize]);
    }

    #[test]
    fn param_names_unique_and_trainable() {
        let mut ps = ParamSet::<f64>::new();
        ps.insert("w", Tensor::zeros(vec![2, 2])).unwrap();
        assert!(matches!(ps.insert("w", Tensor::zeros(vec![1])), Err(TensorError::DuplicateParam(_))));
        assert!(ps.get("w").unwrap().requires_grad());
        assert_eq!(ps.num_params(), 4);
    }

    #[test]
    fn select_rows_checks_bounds() {
        let t = Tensor::<f64>::from_f64(vec![3, 2], &[0., 1., 2., 3., 4., 5.]).unwrap();
        let s = t.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.data(), &[4., 5., 0., 1.]);
        assert!(t.select_rows(&[3]).is_err());
    }
}
