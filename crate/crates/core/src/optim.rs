use crate::net::{DenseNet, Gradients};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Momentum { mu: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn momentum() -> Self {
        Optimizer::Momentum { mu: 0.9 }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "momentum" | "sgd-momentum" => Ok(Optimizer::momentum()),
            "adam" => Ok(Optimizer::adam()),
            other => Err(crate::Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Moment buffers; kept across clustering steps.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    optimizer: Optimizer,
    first: Gradients,
    second: Gradients,
    steps: u64,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, net: &DenseNet) -> Self {
        Self {
            optimizer,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients, lr: f64) {
        self.steps += 1;
        let t = self.steps as i32;
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let params = [
                (&mut layer.weights, &grads.weights[li], 0),
                (&mut layer.bias, &grads.bias[li], 1),
            ];
            for (values, g, which) in params {
                let (m, v) = if which == 0 {
                    (&mut self.first.weights[li], &mut self.second.weights[li])
                } else {
                    (&mut self.first.bias[li], &mut self.second.bias[li])
                };
                match self.optimizer {
                    Optimizer::Sgd => {
                        for (p, gi) in values.iter_mut().zip(g) {
                            *p -= lr * gi;
                        }
                    }
                    Optimizer::Momentum { mu } => {
                        for ((p, gi), mi) in values.iter_mut().zip(g).zip(m.iter_mut()) {
                            *mi = mu * *mi + gi;
                            *p -= lr * *mi;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let c1 = 1.0 - beta1.powi(t);
                        let c2 = 1.0 - beta2.powi(t);
                        for (((p, gi), mi), vi) in
                            values.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
                        {
                            *mi = beta1 * *mi + (1.0 - beta1) * gi;
                            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                            let m_hat = *mi / c1;
                            let v_hat = *vi / c2;
                            *p -= lr * m_hat / (v_hat.sqrt() + eps);
                        }
                    }
                }
            }
        }
    }
}
