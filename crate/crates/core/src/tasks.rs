//! Network shapes and input encodings of the built-in tasks.

use crate::activation::{Activation, ActivationKind, ActivationSpec};
use crate::error::{Error, Result};
use crate::net::{DenseNet, Head, InputQuantizer};
use crate::train::LrSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// 28×28 digit classification.
    Mnist,
    /// `x → x²` on `[-1, 1]`.
    Parabola,
    /// 8×8 patch auto-encoder.
    Autoenc,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(Task::Mnist),
            "parabola" => Ok(Task::Parabola),
            "autoenc" | "autoencoder" => Ok(Task::Autoenc),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Mnist => "mnist",
            Task::Parabola => "parabola",
            Task::Autoenc => "autoenc",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            Task::Mnist => 784,
            Task::Parabola => 1,
            Task::Autoenc => 64,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            Task::Mnist => 10,
            Task::Parabola => 1,
            Task::Autoenc => 64,
        }
    }

    pub fn head(self) -> Head {
        match self {
            Task::Mnist => Head::SoftmaxCrossEntropy,
            Task::Parabola | Task::Autoenc => Head::L2Regression,
        }
    }

    pub fn default_hidden(self) -> Vec<usize> {
        match self {
            Task::Mnist => vec![100, 100],
            Task::Parabola => vec![2],
            Task::Autoenc => vec![32, 16, 32],
        }
    }

    /// Learning-rate schedule used unless overridden. The parabola needs a
    /// large initial rate to leave the symmetric saddle of the small init.
    pub fn default_schedule(self) -> LrSchedule {
        match self {
            Task::Parabola => LrSchedule {
                base: 0.1,
                decay: 0.5,
                decay_every: 4000,
            },
            Task::Mnist | Task::Autoenc => LrSchedule::constant(1e-3),
        }
    }

    pub fn default_steps(self) -> usize {
        20_000
    }

    /// Raw input range.
    pub fn input_range(self) -> (f64, f64) {
        match self {
            Task::Parabola => (-1.0, 1.0),
            Task::Mnist | Task::Autoenc => (0.0, 1.0),
        }
    }

    /// Input quantization levels. 256 levels reproduce 8-bit pixels exactly;
    /// MNIST shares the hidden layers' 32 levels so one table serves all rows.
    pub fn default_input_levels(self) -> usize {
        match self {
            Task::Mnist => 32,
            Task::Parabola => 1024,
            Task::Autoenc => 256,
        }
    }

    pub fn input_quantizer(self, levels: usize) -> Result<InputQuantizer> {
        let (lo, hi) = self.input_range();
        InputQuantizer::new(lo, hi, ActivationSpec::new(ActivationKind::TanhD, levels)?)
    }

    /// Builds the task's network. `levels == None` gives the smooth baseline.
    pub fn network(
        self,
        hidden: &[usize],
        kind: ActivationKind,
        levels: Option<usize>,
        input_levels: usize,
        seed: u64,
    ) -> Result<DenseNet> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer sizes must be positive".into()));
        }
        let activation = match levels {
            Some(l) => Activation::Quantized(ActivationSpec::new(kind, l)?),
            None => Activation::Smooth(kind),
        };
        let mut dims = vec![self.input_dim()];
        dims.extend_from_slice(hidden);
        dims.push(self.output_dim());
        Ok(DenseNet::new(&dims, activation, self.head(), seed)?
            .with_input_quantizer(self.input_quantizer(input_levels)?))
    }
}
