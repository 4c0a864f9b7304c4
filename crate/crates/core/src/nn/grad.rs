use ndarray::{Array1, Array2};

use super::Mlp;

/// Parameter gradients laid out like an [`Mlp`] (or several, concatenated).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl GradientBundle {
    pub fn new(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Self {
        assert_eq!(weights.len(), biases.len(), "one bias per weight matrix");
        Self { weights, biases }
    }

    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Joins member bundles into one gradient over the whole parameter family.
    pub fn concat(parts: Vec<GradientBundle>) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for p in parts {
            weights.extend(p.weights);
            biases.extend(p.biases);
        }
        Self { weights, biases }
    }

    /// Inverse of [`concat`](Self::concat) for `chunk` layers per part.
    pub fn split(self, chunk: usize) -> Vec<GradientBundle> {
        assert!(chunk > 0 && self.weights.len().is_multiple_of(chunk), "uneven split");
        let mut out = Vec::with_capacity(self.weights.len() / chunk);
        let mut w = self.weights.into_iter();
        let mut b = self.biases.into_iter();
        loop {
            let ws: Vec<_> = w.by_ref().take(chunk).collect();
            if ws.is_empty() {
                break;
            }
            let bs: Vec<_> = b.by_ref().take(chunk).collect();
            out.push(GradientBundle::new(ws, bs));
        }
        out
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.weights.iter().zip(&net.weights).all(|(g, w)| g.dim() == w.dim())
            && self.biases.iter().zip(&net.biases).all(|(g, b)| g.dim() == b.dim())
    }

    /// Values in the same canonical order as [`Mlp::params`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn squared_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &GradientBundle, factor: f64) {
        assert_eq!(self.weights.len(), other.weights.len(), "gradient layouts differ");
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.scaled_add(factor, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.scaled_add(factor, b);
        }
    }
}
