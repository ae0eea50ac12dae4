//! A minimal feed-forward ReLU network used as a perception adapter.
//!
//! The network maps an environment point's coordinates to class scores; the
//! percept is the argmax class, ties broken by the lowest class index. Only
//! evaluation is supported, no training.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major weight matrix, one row per output unit.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("mlp layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },
}

impl MlpNet {
    /// Checks layer shapes against the expected input and output dimensions.
    pub fn validate(&self, input_dim: usize, output_dim: usize) -> Result<(), MlpError> {
        if self.layers.is_empty() {
            return Err(MlpError::Shape {
                layer: 0,
                msg: "network has no layers".into(),
            });
        }
        let mut dim = input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() {
                return Err(MlpError::Shape {
                    layer: i,
                    msg: "empty weight matrix".into(),
                });
            }
            for (r, row) in layer.weights.iter().enumerate() {
                if row.len() != dim {
                    return Err(MlpError::Shape {
                        layer: i,
                        msg: format!("weight row {r} has {} entries, expected {dim}", row.len()),
                    });
                }
            }
            if layer.bias.len() != layer.weights.len() {
                return Err(MlpError::Shape {
                    layer: i,
                    msg: format!(
                        "bias has {} entries, expected {}",
                        layer.bias.len(),
                        layer.weights.len()
                    ),
                });
            }
            dim = layer.weights.len();
        }
        if dim != output_dim {
            return Err(MlpError::Shape {
                layer: self.layers.len() - 1,
                msg: format!("final layer outputs {dim}, expected {output_dim}"),
            });
        }
        Ok(())
    }

    /// Forward pass: ReLU after every layer except the last.
    pub fn eval(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.bias.clone();
            for (o, row) in layer.weights.iter().enumerate() {
                let mut acc = 0.0;
                for (w, xi) in row.iter().zip(&x) {
                    acc += w * xi;
                }
                y[o] += acc;
            }
            if i != last {
                for v in &mut y {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            x = y;
        }
        x
    }

    /// Argmax output class, lowest index on ties.
    pub fn classify(&self, input: &[f64]) -> usize {
        let scores = self.eval(input);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_argmax() {
        // One hidden layer that splits by sign, then identity readout.
        let net = MlpNet {
            layers: vec![
                Layer {
                    weights: vec![vec![-1.0], vec![1.0]],
                    bias: vec![0.0, 0.0],
                },
                Layer {
                    weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    bias: vec![0.0, 0.0],
                },
            ],
        };
        net.validate(1, 2).unwrap();
        assert_eq!(net.classify(&[2.0]), 1);
        assert_eq!(net.classify(&[-3.0]), 0);
        // Tie at zero input: lowest index wins.
        assert_eq!(net.classify(&[0.0]), 0);
    }

    #[test]
    fn shape_errors_are_reported() {
        let net = MlpNet {
            layers: vec![Layer {
                weights: vec![vec![1.0, 2.0]],
                bias: vec![0.0],
            }],
        };
        assert!(net.validate(1, 1).is_err());
        assert!(net.validate(2, 2).is_err());
        net.validate(2, 1).unwrap();
    }
}
