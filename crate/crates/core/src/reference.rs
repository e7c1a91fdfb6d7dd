//! Real-arithmetic reference for compiled models and the conformance harness
//! comparing it with the integer engine.

use crate::error::{Error, Result};
use crate::infer::forward_int_trace;
use crate::lut::{LutHead, LutModel};
use crate::net::DenseNet;
use crate::train::argmax;

/// Per-layer result of the reference forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    /// Level index of every hidden unit.
    pub hidden: Vec<Vec<usize>>,
    /// Pre-activations of every layer.
    pub pre: Vec<Vec<f64>>,
    /// Final-layer values (logits or regression outputs).
    pub output: Vec<f64>,
}

impl ReferenceTrace {
    pub fn class(&self) -> usize {
        argmax(&self.output)
    }
}

/// Exact-sum forward pass of a snapped network (with snapped boundaries) on
/// one raw input.
pub fn reference_forward(net: &DenseNet, raw: &[f64]) -> Result<ReferenceTrace> {
    if raw.len() != net.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: net.input_dim(),
            got: raw.len(),
        });
    }
    let fwd = net.forward_train(raw)?;
    let mut hidden = Vec::new();
    for (layer, z) in net.layers.iter().zip(&fwd.pre) {
        if let Some(spec) = layer.activation.spec() {
            hidden.push(z.iter().map(|&v| spec.quantize(v).0).collect());
        }
    }
    Ok(ReferenceTrace {
        hidden,
        output: fwd.post.last().cloned().unwrap_or_default(),
        pre: fwd.pre,
    })
}

/// Agreement statistics between the integer engine and the reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConformanceReport {
    pub samples: usize,
    pub units: usize,
    pub unit_agreements: usize,
    pub max_deviation: usize,
    /// Disagreements at units whose inputs agreed but whose reference
    /// pre-activation was farther than the rounding band from any boundary.
    pub out_of_band: usize,
    pub argmax_agreements: usize,
    /// Largest |integer output · unit − reference output| (regression heads).
    pub max_output_error: f64,
}

impl ConformanceReport {
    pub fn unit_agreement(&self) -> f64 {
        self.unit_agreements as f64 / self.units.max(1) as f64
    }

    pub fn argmax_agreement(&self) -> f64 {
        self.argmax_agreements as f64 / self.samples.max(1) as f64
    }
}

/// Runs both paths on row-major raw inputs and compares them unit by unit.
pub fn conformance(model: &LutModel, inputs: &[f64]) -> Result<ConformanceReport> {
    let net = model.reference_net()?;
    let dim = net.input_dim();
    if dim == 0 || inputs.len() % dim != 0 {
        return Err(Error::ShapeMismatch {
            expected: dim,
            got: inputs.len() % dim.max(1),
        });
    }
    let unit = model.output_unit();
    let mut report = ConformanceReport::default();
    for raw in inputs.chunks_exact(dim) {
        let reference = reference_forward(&net, raw)?;
        let trace = forward_int_trace(model, &model.quantize_input(raw)?)?;
        report.samples += 1;

        let mut inputs_agree = true;
        let mut hidden_layer = 0;
        for (li, layer) in model.layers.iter().enumerate() {
            let Some(act) = &layer.activation else {
                continue;
            };
            let band = (layer.in_dim as f64 + 2.0) * 0.5 * unit;
            let ints = &trace.hidden[hidden_layer];
            let refs = &reference.hidden[hidden_layer];
            let mut layer_agrees = true;
            for (u, (&a, &b)) in ints.iter().zip(refs).enumerate() {
                report.units += 1;
                let dev = (usize::from(a)).abs_diff(b);
                report.max_deviation = report.max_deviation.max(dev);
                if dev == 0 {
                    report.unit_agreements += 1;
                    continue;
                }
                layer_agrees = false;
                if inputs_agree {
                    let z = reference.pre[li][u];
                    let near = act.boundaries.iter().any(|bd| (z - bd).abs() <= band);
                    if !near {
                        report.out_of_band += 1;
                    }
                }
            }
            inputs_agree &= layer_agrees;
            hidden_layer += 1;
        }

        match model.head {
            LutHead::ArgmaxClassifier => {
                if crate::infer::argmax_int(&trace.sums) == reference.class() {
                    report.argmax_agreements += 1;
                }
            }
            LutHead::FixedPointRegression => {
                report.argmax_agreements += 1;
                for (&s, &z) in trace.sums.iter().zip(&reference.output) {
                    report.max_output_error = report.max_output_error.max((s as f64 * unit - z).abs());
                }
            }
        }
    }
    Ok(report)
}
