//! Compilation of a snapped network into an integer lookup-table model.
//!
//! Every product of an activation level and a codebook center is computed
//! ahead of time, scaled by `2^s / dx` and rounded half away from zero. At
//! run time a unit's input is a sum of table entries; shifting it right by
//! `s` yields the bin of a uniform `dx` grid in activation-input space, and
//! a small per-layer table maps that bin to the output level index.

use crate::activation::{Activation, ActivationGrid, ActivationKind, ActivationSpec};
use crate::clustering::{ClusterMethod, WeightCodebook};
use crate::error::{Error, Result};
use crate::net::{DenseNet, Head, InputQuantizer, Layer};

/// Largest scale exponent considered; keeps `2^s` exact and shifts in range.
pub const MAX_SCALE_EXP: u32 = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LutHead {
    /// Integer argmax over final-layer sums.
    ArgmaxClassifier,
    /// Final-layer sums reported as fixed point with scale `2^s / dx`.
    FixedPointRegression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    /// Activation index table length; defaults to eight bins per level.
    pub table_len: Option<usize>,
    pub acc_bits: u32,
    pub guard_bits: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            table_len: None,
            acc_bits: 64,
            guard_bits: 8,
        }
    }
}

/// Bin-to-level mapping of one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTable {
    pub kind: ActivationKind,
    pub x_origin: f64,
    /// `round(-x_origin · 2^s / dx)`, added to the sum before the shift.
    pub offset: i64,
    /// Level index (in `0..levels`) for each of the `T` bins.
    pub index_table: Vec<u16>,
    /// Mult-table row of each local level.
    pub rows: Vec<u16>,
    pub level_values: Vec<f64>,
    /// Snapped boundaries, kept for the reference path.
    pub boundaries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Codebook column per (unit, input), row-major `out_dim × in_dim`.
    pub weight_index: Vec<u16>,
    pub bias_index: Vec<u16>,
    /// `None` for the linear output layer.
    pub activation: Option<ActivationTable>,
}

impl LutLayer {
    pub fn unit_weights(&self, unit: usize) -> &[u16] {
        &self.weight_index[unit * self.in_dim..(unit + 1) * self.in_dim]
    }
}

/// How raw inputs become first-layer row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    pub lo: f64,
    pub hi: f64,
    pub kind: ActivationKind,
    pub levels: usize,
    /// Mult-table row of each input level.
    pub rows: Vec<u16>,
}

/// An integer-only inference model.
#[derive(Debug, Clone, PartialEq)]
pub struct LutModel {
    /// `(A + 1) × |W|`; the last row is the bias row (activation 1.0).
    pub mult_table: Vec<Vec<i64>>,
    /// Activation value of each of the first `A` rows.
    pub row_levels: Vec<f64>,
    pub s: u32,
    pub acc_bits: u32,
    pub guard_bits: u32,
    pub dx: f64,
    pub codebook_method: ClusterMethod,
    pub input: InputMap,
    pub layers: Vec<LutLayer>,
    pub head: LutHead,
}

impl LutModel {
    pub fn levels_count(&self) -> usize {
        self.row_levels.len()
    }

    pub fn codebook_len(&self) -> usize {
        self.mult_table.first().map_or(0, Vec::len)
    }

    pub fn bias_row(&self) -> usize {
        self.row_levels.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_index.len() + l.bias_index.len()).sum()
    }

    pub fn fan_in_max(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim).max().unwrap_or(0)
    }

    /// Every weight index followed by the layer's bias indices, layer by layer.
    pub fn weight_indices(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weight_index.iter().map(|&i| u32::from(i)));
            out.extend(l.bias_index.iter().map(|&i| u32::from(i)));
        }
        out
    }

    /// Real value represented by one unit of an output sum.
    pub fn output_unit(&self) -> f64 {
        self.dx / 2f64.powi(self.s as i32)
    }

    /// Codebook centers recovered from the bias row.
    pub fn centers(&self) -> Vec<f64> {
        let unit = self.output_unit();
        self.mult_table[self.bias_row()]
            .iter()
            .map(|&e| e as f64 * unit)
            .collect()
    }

    /// Maps raw real inputs to first-layer row indices.
    pub fn quantize_input(&self, raw: &[f64]) -> Result<Vec<u16>> {
        let q = self.input_quantizer()?;
        raw.iter()
            .map(|&x| q.level_index(x).map(|j| self.input.rows[j]))
            .collect()
    }

    pub fn input_quantizer(&self) -> Result<InputQuantizer> {
        InputQuantizer::new(
            self.input.lo,
            self.input.hi,
            ActivationSpec::new(self.input.kind, self.input.levels)?,
        )
    }

    /// Real-valued network with the compiled weights and snapped boundaries.
    pub fn reference_net(&self) -> Result<DenseNet> {
        let centers = self.centers();
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let weights = l.weight_index.iter().map(|&k| centers[usize::from(k)]).collect();
            let bias = l.bias_index.iter().map(|&k| centers[usize::from(k)]).collect();
            let activation = match &l.activation {
                None => Activation::Identity,
                Some(t) => {
                    let spec = ActivationSpec::new(t.kind, t.level_values.len())?;
                    Activation::Quantized(spec.with_boundaries(t.boundaries.clone())?)
                }
            };
            layers.push(Layer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                weights,
                bias,
                activation,
            });
        }
        let head = match self.head {
            LutHead::ArgmaxClassifier => Head::SoftmaxCrossEntropy,
            LutHead::FixedPointRegression => Head::L2Regression,
        };
        Ok(DenseNet {
            layers,
            head,
            input: Some(self.input_quantizer()?),
        })
    }

    /// Checks the structural invariants of a compiled model.
    pub fn validate(&self) -> Result<()> {
        let rows = self.row_levels.len() + 1;
        if self.mult_table.len() != rows {
            return Err(Error::Compile(format!(
                "mult table has {} rows, expected {rows}",
                self.mult_table.len()
            )));
        }
        let width = self.codebook_len();
        if width == 0 || self.mult_table.iter().any(|r| r.len() != width) {
            return Err(Error::Compile("ragged or empty mult table".into()));
        }
        if self.s > MAX_SCALE_EXP || !(self.acc_bits == 32 || self.acc_bits == 64) {
            return Err(Error::Compile(format!(
                "unsupported scale {} / accumulator {}",
                self.s, self.acc_bits
            )));
        }
        let max_entry = self
            .mult_table
            .iter()
            .flatten()
            .map(|e| e.unsigned_abs())
            .max()
            .unwrap_or(0);
        let max_offset = self
            .layers
            .iter()
            .filter_map(|l| l.activation.as_ref().map(|a| a.offset.unsigned_abs()))
            .max()
            .unwrap_or(0);
        let bound = (self.fan_in_max() as u128 + 1) * u128::from(max_entry) + u128::from(max_offset);
        if bound >= 1u128 << (self.acc_bits - 1) {
            return Err(Error::Compile(format!(
                "accumulator bound {bound} exceeds {} bits",
                self.acc_bits
            )));
        }
        if self.input.rows.len() != self.input.levels
            || self.input.rows.iter().any(|&r| usize::from(r) >= rows - 1)
        {
            return Err(Error::Compile("bad input row map".into()));
        }
        let mut expected_in = self.layers.first().map_or(0, |l| l.in_dim);
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim != expected_in
                || l.weight_index.len() != l.in_dim * l.out_dim
                || l.bias_index.len() != l.out_dim
            {
                return Err(Error::Compile(format!("layer {i} has inconsistent shape")));
            }
            if l.weight_index.iter().chain(&l.bias_index).any(|&k| usize::from(k) >= width) {
                return Err(Error::Compile(format!("layer {i} addresses a missing column")));
            }
            let last = i + 1 == self.layers.len();
            match (&l.activation, last) {
                (None, true) => {}
                (Some(t), false) => {
                    let levels = t.level_values.len();
                    if t.index_table.is_empty()
                        || t.rows.len() != levels
                        || t.rows.iter().any(|&r| usize::from(r) >= rows - 1)
                        || t.index_table.iter().any(|&j| usize::from(j) >= levels)
                        || t.index_table.windows(2).any(|w| w[0] > w[1])
                    {
                        return Err(Error::Compile(format!("layer {i} has a bad activation table")));
                    }
                }
                _ => {
                    return Err(Error::Compile(format!(
                        "layer {i}: only hidden layers carry activation tables"
                    )))
                }
            }
            expected_in = l.out_dim;
        }
        Ok(())
    }
}

/// Quantities that bound the accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleBounds {
    pub fan_in_max: usize,
    /// Largest `|activation · center|`, including the bias activation 1.0.
    pub max_abs_product: f64,
    pub dx: f64,
    /// Largest `|x_origin| / dx` over layers.
    pub origin_bins: f64,
}

/// Largest `s` whose table entries cannot overflow an `acc_bits` accumulator,
/// but no smaller than `⌈log2(fan_in_max + 1)⌉ + guard_bits`.
pub fn choose_scale(bounds: &ScaleBounds, acc_bits: u32, guard_bits: u32) -> Result<u32> {
    if !(acc_bits == 32 || acc_bits == 64) {
        return Err(Error::InvalidArgument(format!("acc_bits must be 32 or 64, got {acc_bits}")));
    }
    let terms = bounds.fan_in_max as u128 + 1;
    let floor = (u128::BITS - (terms - 1).leading_zeros()) + guard_bits;
    let limit = 1u128 << (acc_bits - 1);
    for s in (floor..=MAX_SCALE_EXP).rev() {
        let scale = 2f64.powi(s as i32) / bounds.dx;
        let entry = (bounds.max_abs_product * scale).round();
        let offset = (bounds.origin_bins * 2f64.powi(s as i32)).ceil();
        if !entry.is_finite() || entry >= 2f64.powi(100) {
            continue;
        }
        if terms * (entry as u128) + (offset as u128) < limit {
            return Ok(s);
        }
    }
    Err(Error::NoFeasibleScale(format!(
        "even s = {floor} overflows a {acc_bits}-bit accumulator (fan-in {}, max |a·w| {}, dx {}); \
         use a wider accumulator or a smaller network",
        bounds.fan_in_max, bounds.max_abs_product, bounds.dx
    )))
}

/// `round(level · center · 2^s / dx)` for every level row plus the bias row.
pub fn build_mult_table(
    centers: &[f64],
    levels: &[f64],
    s: u32,
    dx: f64,
    acc_bits: u32,
) -> Result<Vec<Vec<i64>>> {
    let scale = 2f64.powi(s as i32);
    let limit = 2f64.powi(acc_bits as i32 - 1);
    levels
        .iter()
        .chain(std::iter::once(&1.0))
        .map(|&a| {
            centers
                .iter()
                .map(|&c| {
                    let v = ((a * c) * scale / dx).round();
                    if !v.is_finite() || v.abs() >= limit {
                        Err(Error::TableOverflow {
                            value: v,
                            bits: acc_bits - 1,
                        })
                    } else {
                        Ok(v as i64)
                    }
                })
                .collect()
        })
        .collect()
}

/// Bin-to-level table of a grid-snapped activation.
pub fn build_activation_index_table(grid: &ActivationGrid) -> Result<Vec<u16>> {
    let table = grid.index_table();
    if table.windows(2).any(|w| w[0] > w[1])
        || table.iter().any(|&j| usize::from(j) >= grid.spec.levels_count())
    {
        return Err(Error::Compile("activation index table is not monotone".into()));
    }
    Ok(table)
}

/// Grids for every hidden layer, all sharing one pitch.
pub fn snap_hidden_layers(net: &DenseNet, table_len: Option<usize>) -> Result<Vec<Option<ActivationGrid>>> {
    let mut grids: Vec<Option<ActivationGrid>> = Vec::with_capacity(net.layers.len());
    let mut primary: Option<ActivationGrid> = None;
    for layer in &net.layers[..net.layers.len() - 1] {
        let spec = match &layer.activation {
            Activation::Quantized(spec) => spec,
            other => {
                return Err(Error::Compile(format!(
                    "hidden activation {:?} is not quantized",
                    other.kind()
                )))
            }
        };
        let t = table_len.unwrap_or(8 * spec.levels_count());
        let grid = match &primary {
            None => spec.snap(t)?,
            Some(p) if p_matches(p, spec) => p.clone(),
            Some(p) => spec.snap_at_pitch(p.dx, t)?,
        };
        if primary.is_none() {
            primary = Some(grid.clone());
        }
        grids.push(Some(grid));
    }
    grids.push(None);
    Ok(grids)
}

fn p_matches(grid: &ActivationGrid, spec: &ActivationSpec) -> bool {
    grid.spec.kind() == spec.kind() && grid.spec.level_values() == spec.level_values()
}

/// Compiles a snapped network into an integer lookup-table model.
pub fn compile_model(
    net: &DenseNet,
    codebook: &WeightCodebook,
    options: &CompileOptions,
) -> Result<LutModel> {
    let last = net.layers.len() - 1;
    if net.layers[last].activation != Activation::Identity {
        return Err(Error::Compile("output layer must be linear".into()));
    }
    let input_q = net
        .input
        .as_ref()
        .ok_or_else(|| Error::Compile("network has no input quantizer".into()))?;
    if codebook.len() > usize::from(u16::MAX) + 1 {
        return Err(Error::Compile(format!("codebook of {} centers is too large", codebook.len())));
    }

    // Every parameter must already be a center.
    let mut offenders = 0;
    let mut first = None;
    let mut indices: Vec<(Vec<u16>, Vec<u16>)> = Vec::with_capacity(net.layers.len());
    for (li, layer) in net.layers.iter().enumerate() {
        let mut lookup = |values: &[f64], base: usize| -> Vec<u16> {
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| match codebook.exact_index(v) {
                    Some(k) => k as u16,
                    None => {
                        offenders += 1;
                        first.get_or_insert((li, base + i));
                        0
                    }
                })
                .collect()
        };
        let w = lookup(&layer.weights, 0);
        let b = lookup(&layer.bias, layer.weights.len());
        indices.push((w, b));
    }
    if let Some((layer, index)) = first {
        return Err(Error::Unsnapped {
            count: offenders,
            layer,
            index,
        });
    }

    let grids = snap_hidden_layers(net, options.table_len)?;
    let dx = grids
        .iter()
        .flatten()
        .map(|g| g.dx)
        .next()
        .unwrap_or(1.0);

    // Mult-table rows: union of input and hidden level sets.
    let mut row_levels: Vec<f64> = input_q.spec.level_values().to_vec();
    for g in grids.iter().flatten() {
        row_levels.extend_from_slice(g.spec.level_values());
    }
    row_levels.sort_by(f64::total_cmp);
    row_levels.dedup();
    if row_levels.len() >= usize::from(u16::MAX) {
        return Err(Error::Compile("too many activation levels".into()));
    }
    let row_of = |v: f64| -> u16 {
        row_levels
            .binary_search_by(|p| p.total_cmp(&v))
            .expect("level present in the union") as u16
    };

    let max_level = row_levels.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let max_center = codebook.centers().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let origin_bins = grids
        .iter()
        .flatten()
        .map(|g| (g.x_origin / g.dx).abs())
        .fold(0.0, f64::max);
    let bounds = ScaleBounds {
        fan_in_max: net.layers.iter().map(|l| l.in_dim).max().unwrap_or(0),
        max_abs_product: max_level * max_center,
        dx,
        origin_bins,
    };
    let s = choose_scale(&bounds, options.acc_bits, options.guard_bits)?;
    let mult_table = build_mult_table(codebook.centers(), &row_levels, s, dx, options.acc_bits)?;
    let scale = 2f64.powi(s as i32);

    let mut layers = Vec::with_capacity(net.layers.len());
    for ((layer, grid), (weight_index, bias_index)) in net.layers.iter().zip(&grids).zip(indices) {
        let activation = match grid {
            None => None,
            Some(g) => Some(ActivationTable {
                kind: g.spec.kind(),
                x_origin: g.x_origin,
                offset: (-g.x_origin * scale / g.dx).round() as i64,
                index_table: build_activation_index_table(g)?,
                rows: g.spec.level_values().iter().map(|&v| row_of(v)).collect(),
                level_values: g.spec.level_values().to_vec(),
                boundaries: g.spec.boundaries().to_vec(),
            }),
        };
        layers.push(LutLayer {
            in_dim: layer.in_dim,
            out_dim: layer.out_dim,
            weight_index,
            bias_index,
            activation,
        });
    }

    let model = LutModel {
        mult_table,
        row_levels: row_levels.clone(),
        s,
        acc_bits: options.acc_bits,
        guard_bits: options.guard_bits,
        dx,
        codebook_method: codebook.method(),
        input: InputMap {
            lo: input_q.lo,
            hi: input_q.hi,
            kind: input_q.spec.kind(),
            levels: input_q.spec.levels_count(),
            rows: input_q.spec.level_values().iter().map(|&v| row_of(v)).collect(),
        },
        layers,
        head: match net.head {
            Head::SoftmaxCrossEntropy => LutHead::ArgmaxClassifier,
            Head::L2Regression => LutHead::FixedPointRegression,
        },
    };
    model.validate()?;
    Ok(model)
}
