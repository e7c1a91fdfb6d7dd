//! Integer-only execution of a [`LutModel`].
//!
//! This module is restricted to integer additions, shifts, comparisons and
//! table lookups. It must not multiply runtime values or touch floating
//! point; `tests/no_multiply_gate.rs` scans this file to enforce that.

use crate::error::{Error, Result};
use crate::lut::{LutHead, LutLayer, LutModel};

/// Result of an integer forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LutOutput {
    /// Winning class and the final-layer sums it was chosen from.
    Class { class: usize, sums: Vec<i64> },
    /// Final-layer sums; real value = sum · dx / 2^s.
    Fixed { sums: Vec<i64>, shift: u32 },
}

/// Level indices of every hidden layer plus the final-layer sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutTrace {
    pub hidden: Vec<Vec<u16>>,
    pub sums: Vec<i64>,
}

fn accumulate(model: &LutModel, weights: &[u16], bias: u16, rows: &[u16]) -> i64 {
    let table = &model.mult_table;
    let mut acc = table[model.bias_row()][usize::from(bias)];
    for (&row, &col) in rows.iter().zip(weights) {
        // Overflow panics in debug builds; compilation proves it cannot happen.
        acc += table[usize::from(row)][usize::from(col)];
    }
    debug_assert!(
        model.acc_bits == 64 || (acc >= i64::from(i32::MIN) && acc <= i64::from(i32::MAX)),
        "accumulator left its 32-bit range"
    );
    acc
}

fn unit_rows(layer: &LutLayer) -> impl Iterator<Item = (&[u16], &u16)> {
    layer
        .weight_index
        .chunks_exact(layer.in_dim)
        .zip(&layer.bias_index)
}

/// Runs every layer, returning hidden level indices and the output sums.
pub fn forward_int_trace(model: &LutModel, input_rows: &[u16]) -> Result<LutTrace> {
    let first = model.layers.first().map_or(0, |l| l.in_dim);
    if input_rows.len() != first {
        return Err(Error::ShapeMismatch {
            expected: first,
            got: input_rows.len(),
        });
    }
    let mut rows: Vec<u16> = input_rows.to_vec();
    let mut hidden = Vec::with_capacity(model.layers.len());
    let mut sums = Vec::new();
    for layer in &model.layers {
        match &layer.activation {
            Some(act) => {
                let last_bin = act.index_table.len() - 1;
                let mut levels = Vec::with_capacity(layer.out_dim);
                let mut next = Vec::with_capacity(layer.out_dim);
                for (weights, &bias) in unit_rows(layer) {
                    let shifted = (accumulate(model, weights, bias, &rows) + act.offset) >> model.s;
                    let bin = if shifted < 0 {
                        0
                    } else {
                        usize::try_from(shifted).map_or(last_bin, |b| b.min(last_bin))
                    };
                    let level = act.index_table[bin];
                    levels.push(level);
                    next.push(act.rows[usize::from(level)]);
                }
                hidden.push(levels);
                rows = next;
            }
            None => {
                sums = unit_rows(layer)
                    .map(|(weights, &bias)| accumulate(model, weights, bias, &rows))
                    .collect();
            }
        }
    }
    Ok(LutTrace { hidden, sums })
}

/// Index of the largest sum; ties go to the lowest index.
pub fn argmax_int(sums: &[i64]) -> usize {
    let mut best = 0;
    for (i, &v) in sums.iter().enumerate() {
        if v > sums[best] {
            best = i;
        }
    }
    best
}

/// Integer forward pass from first-layer row indices to the head output.
pub fn forward_int(model: &LutModel, input_rows: &[u16]) -> Result<LutOutput> {
    let trace = forward_int_trace(model, input_rows)?;
    Ok(match model.head {
        LutHead::ArgmaxClassifier => LutOutput::Class {
            class: argmax_int(&trace.sums),
            sums: trace.sums,
        },
        LutHead::FixedPointRegression => LutOutput::Fixed {
            sums: trace.sums,
            shift: model.s,
        },
    })
}
