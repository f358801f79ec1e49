use std::collections::BTreeMap;

use ndarray::{Array2, ArrayD, IxDyn};

use crate::error::{Error, Result};

/// Dense f32 tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn from_matrix(m: &Array2<f64>) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data: m.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::Format(format!(
                "expected a rank-2 tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(Array2::from_shape_vec(
            (self.shape[0], self.shape[1]),
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("shape checked"))
    }

    pub fn to_array(&self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(
            IxDyn(&self.shape),
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("shape invariant")
    }
}

/// Named parameter store. Iteration order is lexicographic by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on a duplicate name.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Format(format!("duplicate tensor name `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn replace(&mut self, name: &str, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.to_string(), tensor)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    /// Tensor values as f64, checking the shape.
    pub fn values(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::TensorShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                got: t.shape.clone(),
            });
        }
        Ok(t.data.iter().map(|&v| v as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut b = WeightBundle::new();
        b.insert("a", Tensor::zeros(&[2])).unwrap();
        assert!(b.insert("a", Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn values_checks_shape_and_presence() {
        let mut b = WeightBundle::new();
        b.insert("w", Tensor::zeros(&[2, 3])).unwrap();
        assert_eq!(b.values("w", &[2, 3]).unwrap().len(), 6);
        match b.values("w", &[3, 2]) {
            Err(Error::TensorShape { name, .. }) => assert_eq!(name, "w"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(b.values("v", &[1]), Err(Error::MissingTensor(_))));
    }

    #[test]
    fn tensor_length_must_match_shape() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
