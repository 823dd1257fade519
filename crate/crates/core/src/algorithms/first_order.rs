//! First-order baselines: EXTRA and gradient tracking.

use std::sync::Arc;

use nalgebra::DVector;

use super::ConsensusAlgorithm;
use crate::problems::LocalObjective;
use crate::topology::{neighbor_exchange, MixingMatrix, RoundCounter};
use crate::{Error, Result};

fn check_first_order(
    objectives: &[Arc<dyn LocalObjective>],
    mixing: &MixingMatrix,
    eta: f64,
    initial: Option<&[DVector<f64>]>,
) -> Result<Vec<DVector<f64>>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let n = mixing.node_count();
    if objectives.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: objectives.len() });
    }
    let dim = objectives[0].dim();
    for o in objectives {
        if o.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: o.dim() });
        }
    }
    match initial {
        Some(xs) => {
            if xs.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: xs.len() });
            }
            for x in xs {
                if x.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
                }
            }
            Ok(xs.to_vec())
        }
        None => Ok(vec![DVector::zeros(dim); n]),
    }
}

/// EXTRA: one exchanged combination vector per iteration.
///
/// First step `x^1 = (I + W)/2 x^0 - eta grad f(x^0)`, afterwards
/// `x^{t+1} = (I + W) x^t - (I + W)/2 x^{t-1} - eta (grad f(x^t) - grad f(x^{t-1}))`,
/// exchanged as the single vector `x^t - x^{t-1}/2`.
pub struct Extra {
    objectives: Vec<Arc<dyn LocalObjective>>,
    mixing: MixingMatrix,
    eta: f64,
    x: Vec<DVector<f64>>,
    x_prev: Vec<DVector<f64>>,
    grad_prev: Vec<DVector<f64>>,
    t: u64,
}

impl Extra {
    pub fn new(
        objectives: &[Arc<dyn LocalObjective>],
        mixing: &MixingMatrix,
        eta: f64,
        initial: Option<&[DVector<f64>]>,
    ) -> Result<Self> {
        let x = check_first_order(objectives, mixing, eta, initial)?;
        Ok(Extra {
            objectives: objectives.to_vec(),
            mixing: mixing.clone(),
            eta,
            x_prev: x.clone(),
            grad_prev: Vec::new(),
            x,
            t: 0,
        })
    }
}

impl ConsensusAlgorithm for Extra {
    fn name(&self) -> &'static str {
        "extra"
    }

    fn iterate(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let n = self.x.len();
        if self.t == 0 {
            let grads: Vec<DVector<f64>> = (0..n)
                .map(|i| self.objectives[i].gradient(&self.x[i]))
                .collect();
            let sums = neighbor_exchange(&self.x, &self.mixing, counter)?;
            let mut x_new = Vec::with_capacity(n);
            for i in 0..n {
                x_new.push(0.5 * (&self.x[i] + &sums[i]) - self.eta * &grads[i]);
            }
            self.x_prev = std::mem::replace(&mut self.x, x_new);
            self.grad_prev = grads;
        } else {
            let combo: Vec<DVector<f64>> = (0..n)
                .map(|i| &self.x[i] - 0.5 * &self.x_prev[i])
                .collect();
            let sums = neighbor_exchange(&combo, &self.mixing, counter)?;
            let grads: Vec<DVector<f64>> = (0..n)
                .map(|i| self.objectives[i].gradient(&self.x[i]))
                .collect();
            let mut x_new = Vec::with_capacity(n);
            for i in 0..n {
                let mut xi = &combo[i] + &sums[i];
                xi.axpy(-self.eta, &(&grads[i] - &self.grad_prev[i]), 1.0);
                x_new.push(xi);
            }
            self.x_prev = std::mem::replace(&mut self.x, x_new);
            self.grad_prev = grads;
        }
        self.t += 1;
        Ok(())
    }

    fn node_count(&self) -> usize {
        self.x.len()
    }

    fn position(&self, i: usize) -> &DVector<f64> {
        &self.x[i]
    }

    fn iteration(&self) -> u64 {
        self.t
    }
}

/// Gradient tracking: `x <- W x - eta y`, `y <- W y + grad(x') - grad(x)`,
/// with the tracker seeded at the initial local gradients. Two vector
/// exchanges per iteration.
pub struct GradientTracking {
    objectives: Vec<Arc<dyn LocalObjective>>,
    mixing: MixingMatrix,
    eta: f64,
    x: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
    grad: Vec<DVector<f64>>,
    t: u64,
}

impl GradientTracking {
    pub fn new(
        objectives: &[Arc<dyn LocalObjective>],
        mixing: &MixingMatrix,
        eta: f64,
        initial: Option<&[DVector<f64>]>,
    ) -> Result<Self> {
        let x = check_first_order(objectives, mixing, eta, initial)?;
        let grad: Vec<DVector<f64>> =
            x.iter().zip(objectives).map(|(xi, o)| o.gradient(xi)).collect();
        Ok(GradientTracking {
            objectives: objectives.to_vec(),
            mixing: mixing.clone(),
            eta,
            y: grad.clone(),
            grad,
            x,
            t: 0,
        })
    }

    /// Tracker sum minus gradient sum; zero up to round-off at every step.
    pub fn tracking_gap(&self) -> f64 {
        let dim = self.x[0].len();
        let mut sum = DVector::<f64>::zeros(dim);
        for (y, g) in self.y.iter().zip(&self.grad) {
            sum += y;
            sum -= g;
        }
        sum.norm()
    }
}

impl ConsensusAlgorithm for GradientTracking {
    fn name(&self) -> &'static str {
        "gt"
    }

    fn iterate(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let n = self.x.len();
        let x_sums = neighbor_exchange(&self.x, &self.mixing, counter)?;
        let mut x_new = Vec::with_capacity(n);
        for i in 0..n {
            x_new.push(&x_sums[i] - self.eta * &self.y[i]);
        }
        let y_sums = neighbor_exchange(&self.y, &self.mixing, counter)?;
        for i in 0..n {
            let g_new = self.objectives[i].gradient(&x_new[i]);
            self.y[i] = &y_sums[i] + &g_new - &self.grad[i];
            self.grad[i] = g_new;
        }
        self.x = x_new;
        self.t += 1;
        Ok(())
    }

    fn node_count(&self) -> usize {
        self.x.len()
    }

    fn position(&self, i: usize) -> &DVector<f64> {
        &self.x[i]
    }

    fn iteration(&self) -> u64 {
        self.t
    }
}
