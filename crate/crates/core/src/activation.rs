//! Quantized non-linearities.
//!
//! A quantized activation applies an underlying bounded function and rounds
//! the result to one of `L` equally spaced output levels. For inference the
//! same mapping is expressed in input space: `L - 1` boundaries, where
//! boundary `j` is the preimage of the midpoint between levels `j` and
//! `j + 1`. Inputs landing exactly on a boundary take the higher level.
//!
//! The backward pass ignores the plateaus and uses the derivative of the
//! underlying function (straight-through gradient).

use crate::error::{Error, Result};

/// The underlying non-linearity of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    TanhD,
    Relu6D,
    Identity,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::TanhD => x.tanh(),
            ActivationKind::Relu6D => x.clamp(0.0, 6.0),
            ActivationKind::Identity => x,
        }
    }

    /// Derivative of the underlying smooth function, independent of the level count.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::TanhD => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu6D => {
                if x > 0.0 && x < 6.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }

    /// Output range `(gamma_min, gamma_max)`, or `None` for unbounded kinds.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            ActivationKind::TanhD => Some((-1.0, 1.0)),
            ActivationKind::Relu6D => Some((0.0, 6.0)),
            ActivationKind::Identity => None,
        }
    }

    /// Input-space preimage of an output value strictly inside the range.
    fn preimage(self, y: f64) -> f64 {
        match self {
            ActivationKind::TanhD => y.atanh(),
            ActivationKind::Relu6D | ActivationKind::Identity => y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::TanhD => "tanhd",
            ActivationKind::Relu6D => "relu6d",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ActivationKind::TanhD => 1,
            ActivationKind::Relu6D => 2,
            ActivationKind::Identity => 0,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ActivationKind::Identity),
            1 => Some(ActivationKind::TanhD),
            2 => Some(ActivationKind::Relu6D),
            _ => None,
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanhd" | "tanh" => Ok(ActivationKind::TanhD),
            "relu6d" | "relu6" => Ok(ActivationKind::Relu6D),
            "identity" | "linear" => Ok(ActivationKind::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Literal form of the quantized non-linearity: apply the underlying
/// function, then round the output half-up to the nearest of `levels`
/// equally spaced values.
pub fn gamma_d(kind: ActivationKind, input: f64, levels: usize) -> f64 {
    let (gamma_min, gamma_max) = match kind.range() {
        Some(r) => r,
        None => return input,
    };
    let y = kind.apply(input);
    let step = (gamma_max - gamma_min) / (levels - 1) as f64;
    ((y - gamma_min) / step + 0.5).floor() * step + gamma_min
}

/// A quantized activation: `L` output levels and the `L - 1` input-space
/// boundaries separating them.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSpec {
    kind: ActivationKind,
    gamma_min: f64,
    gamma_max: f64,
    step: f64,
    levels: Vec<f64>,
    boundaries: Vec<f64>,
}

impl ActivationSpec {
    /// Builds the quantized form of a bounded non-linearity with `levels_count` levels.
    pub fn new(kind: ActivationKind, levels_count: usize) -> Result<Self> {
        if levels_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 activation levels, got {levels_count}"
            )));
        }
        let (gamma_min, gamma_max) = kind.range().ok_or_else(|| {
            Error::InvalidArgument("identity activation has no quantization levels".into())
        })?;
        let last = (levels_count - 1) as f64;
        let step = (gamma_max - gamma_min) / last;
        // Interpolating between both ends keeps the extremes exact.
        let levels: Vec<f64> = (0..levels_count)
            .map(|j| {
                let t = j as f64 / last;
                gamma_min * (1.0 - t) + gamma_max * t
            })
            .collect();
        let boundaries = levels
            .windows(2)
            .map(|w| kind.preimage(0.5 * (w[0] + w[1])))
            .collect();
        Ok(Self {
            kind,
            gamma_min,
            gamma_max,
            step,
            levels,
            boundaries,
        })
    }

    /// Rebuilds a spec with externally supplied (e.g. snapped) boundaries.
    pub fn with_boundaries(&self, boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() != self.boundaries.len() {
            return Err(Error::ShapeMismatch {
                expected: self.boundaries.len(),
                got: boundaries.len(),
            });
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "boundaries must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            boundaries,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn levels_count(&self) -> usize {
        self.levels.len()
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn level_values(&self) -> &[f64] {
        &self.levels
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Maps an activation input to `(level_index, level_value)`.
    pub fn quantize(&self, x: f64) -> (usize, f64) {
        let j = self.boundaries.partition_point(|&b| b <= x);
        (j, self.levels[j])
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.kind.derivative(x)
    }

    /// Nearest level to an output-space value, rounding half-up.
    pub fn nearest_level(&self, y: f64) -> usize {
        let last = self.levels.len() - 1;
        let scaled = (y - self.gamma_min) * last as f64 / (self.gamma_max - self.gamma_min);
        let j = (scaled + 0.5).floor();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(last)
        }
    }

    /// Moves every boundary onto a uniform grid of `table_len` bins.
    ///
    /// The pitch is chosen to minimize the largest boundary displacement;
    /// among equally good pitches the smallest one wins. Boundaries land on
    /// grid lines `1..table_len`, so inputs clamped into the first or last
    /// bin keep the lowest or highest level.
    pub fn snap(&self, table_len: usize) -> Result<ActivationGrid> {
        let nb = self.boundaries.len();
        if table_len < nb + 1 {
            return Err(Error::InfeasibleTable {
                table_len,
                boundaries: nb,
            });
        }
        let fit = if nb == 1 {
            GridFit {
                dx: 1.0,
                phase: self.boundaries[0],
                offsets: vec![0],
                error: 0.0,
            }
        } else {
            best_grid_fit(&self.boundaries, table_len).ok_or(Error::InfeasibleTable {
                table_len,
                boundaries: nb,
            })?
        };
        let span = *fit.offsets.last().unwrap_or(&0);
        let first_line = 1 + (table_len - 2 - span) / 2;
        let x_origin = fit.phase - first_line as f64 * fit.dx;
        let lines: Vec<usize> = fit.offsets.iter().map(|n| first_line + n).collect();
        let snapped = lines
            .iter()
            .map(|&m| x_origin + m as f64 * fit.dx)
            .collect();
        let spec = self.with_boundaries(snapped)?;
        Ok(ActivationGrid {
            dx: fit.dx,
            x_origin,
            table_len,
            lines,
            max_displacement: fit.error,
            spec,
        })
    }
}

impl ActivationSpec {
    /// Snaps onto a grid with a fixed pitch, choosing only the phase.
    ///
    /// Used when several activation kinds must share one input pitch. The
    /// table is made as long as needed, but never shorter than `min_table_len`.
    pub fn snap_at_pitch(&self, dx: f64, min_table_len: usize) -> Result<ActivationGrid> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidArgument(format!("grid pitch must be positive, got {dx}")));
        }
        let nb = self.boundaries.len();
        let offsets = round_pattern(&self.boundaries, dx, usize::MAX).ok_or(
            Error::InfeasibleTable {
                table_len: min_table_len,
                boundaries: nb,
            },
        )?;
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for (b, &n) in self.boundaries.iter().zip(&offsets) {
            let r = b - n as f64 * dx;
            mn = mn.min(r);
            mx = mx.max(r);
        }
        let span = offsets[nb - 1];
        let table_len = min_table_len.max(span + 2);
        let first_line = 1 + (table_len - 2 - span) / 2;
        let phase = 0.5 * (mn + mx);
        let x_origin = phase - first_line as f64 * dx;
        let lines: Vec<usize> = offsets.iter().map(|n| first_line + n).collect();
        let snapped = lines.iter().map(|&m| x_origin + m as f64 * dx).collect();
        let spec = self.with_boundaries(snapped)?;
        Ok(ActivationGrid {
            dx,
            x_origin,
            table_len,
            lines,
            max_displacement: 0.5 * (mx - mn),
            spec,
        })
    }
}

/// A quantized activation whose boundaries sit on a uniform input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGrid {
    pub dx: f64,
    pub x_origin: f64,
    pub table_len: usize,
    /// Grid line of each boundary, in `1..table_len`.
    pub lines: Vec<usize>,
    pub max_displacement: f64,
    pub spec: ActivationSpec,
}

impl ActivationGrid {
    /// Level index for every bin `[x_origin + t*dx, x_origin + (t+1)*dx)`.
    pub fn index_table(&self) -> Vec<u16> {
        (0..self.table_len)
            .map(|t| self.lines.partition_point(|&m| m <= t) as u16)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct GridFit {
    dx: f64,
    /// Position of the first boundary's grid line.
    phase: f64,
    /// Grid offsets relative to the first boundary.
    offsets: Vec<usize>,
    error: f64,
}

const PITCH_SCAN: usize = 4096;

fn best_grid_fit(boundaries: &[f64], table_len: usize) -> Option<GridFit> {
    let nb = boundaries.len();
    let span = boundaries[nb - 1] - boundaries[0];
    let max_offset = table_len - 2;
    let lo = span / (table_len - 1) as f64;
    let hi = span / (nb.saturating_sub(2).max(1)) as f64;

    let mut candidates: Vec<f64> = (0..=PITCH_SCAN)
        .map(|i| lo * (hi / lo).powf(i as f64 / PITCH_SCAN as f64))
        .collect();
    // Exactly uniform spacings are worth testing directly.
    candidates.extend((nb - 1..=max_offset).map(|k| span / k as f64));

    let mut patterns: Vec<Vec<usize>> = Vec::new();
    for dx in candidates {
        if let Some(offsets) = round_pattern(boundaries, dx, max_offset) {
            if !patterns.contains(&offsets) {
                patterns.push(offsets);
            }
        }
    }

    let mut best: Option<GridFit> = None;
    for offsets in patterns {
        let Some(fit) = chebyshev_fit(boundaries, &offsets, lo, hi) else {
            continue;
        };
        let tol = 1e-12 * span.max(1.0);
        let better = match &best {
            None => true,
            Some(b) => fit.error < b.error - tol || (fit.error <= b.error + tol && fit.dx < b.dx),
        };
        if better {
            best = Some(fit);
        }
    }
    best
}

/// Integer grid offsets obtained by rounding at pitch `dx` with the best phase.
fn round_pattern(boundaries: &[f64], dx: f64, max_offset: usize) -> Option<Vec<usize>> {
    // Residues on the unit circle; the best phase sits opposite the largest gap.
    let mut residues: Vec<f64> = boundaries.iter().map(|b| (b / dx).rem_euclid(1.0)).collect();
    residues.sort_by(f64::total_cmp);
    let n = residues.len();
    let mut gap_start = residues[n - 1];
    let mut largest = residues[0] + 1.0 - residues[n - 1];
    for w in residues.windows(2) {
        if w[1] - w[0] > largest {
            largest = w[1] - w[0];
            gap_start = w[0];
        }
    }
    // Arc covering all residues runs from gap_end to gap_start (+1).
    let gap_end = gap_start + largest;
    let center = 0.5 * (gap_end + gap_start + 1.0);
    let positions: Vec<i64> = boundaries
        .iter()
        .map(|b| (b / dx - center).round() as i64)
        .collect();
    let first = positions[0];
    let mut offsets = Vec::with_capacity(n);
    for (i, p) in positions.iter().enumerate() {
        let off = p - first;
        if off < 0 || (i > 0 && off <= offsets[i - 1] as i64) {
            return None;
        }
        offsets.push(off as usize);
    }
    if offsets[n - 1] > max_offset {
        return None;
    }
    Some(offsets)
}

/// Minimax fit of `boundary_j ≈ phase + offset_j * dx`.
fn chebyshev_fit(boundaries: &[f64], offsets: &[usize], lo: f64, hi: f64) -> Option<GridFit> {
    let spread = |dx: f64| {
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for (b, &n) in boundaries.iter().zip(offsets) {
            let r = b - n as f64 * dx;
            mn = mn.min(r);
            mx = mx.max(r);
        }
        (mn, mx)
    };
    // The half-spread is convex in dx.
    let (mut a, mut b) = (lo * 0.5, hi * 1.5);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let (l1, h1) = spread(m1);
        let (l2, h2) = spread(m2);
        if h1 - l1 <= h2 - l2 {
            b = m2;
        } else {
            a = m1;
        }
    }
    let dx = 0.5 * (a + b);
    let (mn, mx) = spread(dx);
    let error = 0.5 * (mx - mn);
    if !(dx > 0.0) || error > 0.5 * dx * (1.0 + 1e-9) {
        return None;
    }
    Some(GridFit {
        dx,
        phase: 0.5 * (mn + mx),
        offsets: offsets.to_vec(),
        error,
    })
}

/// Activation applied by a layer during training and reference evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    /// Linear output, never quantized.
    Identity,
    /// The underlying smooth function, used for float baselines.
    Smooth(ActivationKind),
    Quantized(ActivationSpec),
}

impl Activation {
    pub fn kind(&self) -> ActivationKind {
        match self {
            Activation::Identity => ActivationKind::Identity,
            Activation::Smooth(kind) => *kind,
            Activation::Quantized(spec) => spec.kind(),
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Smooth(kind) => kind.apply(x),
            Activation::Quantized(spec) => spec.quantize(x).1,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.kind().derivative(x)
    }

    pub fn spec(&self) -> Option<&ActivationSpec> {
        match self {
            Activation::Quantized(spec) => Some(spec),
            _ => None,
        }
    }
}
