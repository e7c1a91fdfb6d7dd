//! Binary model files for training checkpoints and compiled models.
//!
//! Layout (all integers little endian):
//!
//! ```text
//! "QFGE" | version u16 | kind u8 | section count u8
//! section table: count × (id u16, offset u32, length u32)
//! sections, in table order
//! CRC32 of every preceding byte, u32
//! ```
//!
//! `docs/FORMAT.md` describes every section byte by byte.

use std::path::Path;

use crate::activation::{Activation, ActivationKind, ActivationSpec};
use crate::clustering::{ClusterMethod, WeightCodebook};
use crate::error::{Error, Result};
use crate::huffman::{fixed_width, pack_fixed, unpack_fixed, HuffmanCode};
use crate::lut::{ActivationTable, InputMap, LutHead, LutLayer, LutModel};
use crate::net::{DenseNet, Head, InputQuantizer, Layer};

pub const MAGIC: &[u8; 4] = b"QFGE";
pub const VERSION: u16 = 1;

const KIND_CHECKPOINT: u8 = 1;
const KIND_COMPILED: u8 = 2;
const PREAMBLE: usize = 8;
const TABLE_ENTRY: usize = 10;

/// How weight indices are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexEncoding {
    /// Fixed width `ceil(log2 |W|)` bits per index.
    #[default]
    Raw,
    /// Canonical Huffman code over the index marginal.
    Huffman,
}

impl IndexEncoding {
    fn code(self) -> u8 {
        match self {
            IndexEncoding::Raw => 0,
            IndexEncoding::Huffman => 1,
        }
    }
}

impl std::str::FromStr for IndexEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(IndexEncoding::Raw),
            "huffman" | "entropy" => Ok(IndexEncoding::Huffman),
            other => Err(Error::InvalidArgument(format!("unknown index encoding `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionId {
    Header = 1,
    Codebook = 2,
    Indices = 3,
    Parameters = 4,
    MultTable = 5,
    ActivationTables = 6,
}

impl SectionId {
    fn from_code(code: u16) -> Option<Self> {
        Some(match code {
            1 => SectionId::Header,
            2 => SectionId::Codebook,
            3 => SectionId::Indices,
            4 => SectionId::Parameters,
            5 => SectionId::MultTable,
            6 => SectionId::ActivationTables,
            _ => return None,
        })
    }
}

/// A float network, optionally with the codebook it was snapped to.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: DenseNet,
    pub codebook: Option<WeightCodebook>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Checkpoint(Checkpoint),
    Compiled(LutModel),
}

/// Location of one section inside a serialized file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionInfo {
    pub id: SectionId,
    pub offset: usize,
    pub len: usize,
}

// ---------------------------------------------------------------- writing

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len32(&mut self, n: usize) -> Result<()> {
        self.u32(u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))?);
        Ok(())
    }
    fn len16(&mut self, n: usize) -> Result<()> {
        self.u16(u16::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u16")))?);
        Ok(())
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn u16s(&mut self, vs: &[u16]) {
        for &v in vs {
            self.u16(v);
        }
    }
}

fn assemble(kind: u8, sections: Vec<(SectionId, Vec<u8>)>) -> Result<Vec<u8>> {
    let mut out = Out::default();
    out.0.extend_from_slice(MAGIC);
    out.u16(VERSION);
    out.u8(kind);
    out.u8(sections.len() as u8);
    let mut offset = PREAMBLE + TABLE_ENTRY * sections.len();
    for (id, body) in &sections {
        out.u16(*id as u16);
        out.len32(offset)?;
        out.len32(body.len())?;
        offset += body.len();
    }
    for (_, body) in sections {
        out.0.extend_from_slice(&body);
    }
    let crc = crc32fast::hash(&out.0);
    out.u32(crc);
    Ok(out.0)
}

fn write_spec(out: &mut Out, spec: &ActivationSpec) -> Result<()> {
    out.u8(spec.kind().code());
    out.len16(spec.levels_count())?;
    out.f64s(spec.boundaries());
    Ok(())
}

fn write_activation(out: &mut Out, act: &Activation) -> Result<()> {
    match act {
        Activation::Identity => out.u8(0),
        Activation::Smooth(kind) => {
            out.u8(1);
            out.u8(kind.code());
        }
        Activation::Quantized(spec) => {
            out.u8(2);
            write_spec(out, spec)?;
        }
    }
    Ok(())
}

fn write_indices(indices: &[u32], alphabet: usize, encoding: IndexEncoding) -> Result<Vec<u8>> {
    let mut out = Out::default();
    out.u8(encoding.code());
    out.len32(alphabet)?;
    out.len32(indices.len())?;
    match encoding {
        IndexEncoding::Raw => out.0.extend_from_slice(&pack_fixed(indices, alphabet)?),
        IndexEncoding::Huffman => {
            let enc = crate::huffman::entropy_encode_indices(indices, alphabet)?;
            out.0.extend_from_slice(enc.code.lengths());
            out.u64(enc.bit_len);
            out.0.extend_from_slice(&enc.bytes);
        }
    }
    Ok(out.0)
}

/// Serializes a checkpoint. Parameters are stored as codebook indices when
/// every one of them is bit-identical to a center, otherwise as floats.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint, encoding: IndexEncoding) -> Result<Vec<u8>> {
    let net = &ckpt.net;
    let mut header = Out::default();
    header.u8(net.head.code());
    header.len16(net.layers.len())?;
    for l in &net.layers {
        header.len32(l.in_dim)?;
        header.len32(l.out_dim)?;
        write_activation(&mut header, &l.activation)?;
    }
    match &net.input {
        None => header.u8(0),
        Some(q) => {
            header.u8(1);
            header.f64(q.lo);
            header.f64(q.hi);
            write_spec(&mut header, &q.spec)?;
        }
    }
    let mut sections = vec![(SectionId::Header, header.0)];

    let params = net.parameters();
    let mut indices = None;
    if let Some(cb) = &ckpt.codebook {
        let mut body = Out::default();
        body.u8(cb.method().code());
        body.f64(cb.mean);
        body.f64(cb.scale);
        body.len32(cb.len())?;
        body.f64s(cb.centers());
        sections.push((SectionId::Codebook, body.0));
        let assigned = cb.assign(&params);
        let exact = assigned
            .iter()
            .zip(&params)
            .all(|(&k, p)| cb.centers()[k as usize].to_bits() == p.to_bits());
        if exact {
            indices = Some(write_indices(&assigned, cb.len(), encoding)?);
        }
    }
    match indices {
        Some(body) => sections.push((SectionId::Indices, body)),
        None => {
            let mut body = Out::default();
            body.len32(params.len())?;
            body.f64s(&params);
            sections.push((SectionId::Parameters, body.0));
        }
    }
    assemble(KIND_CHECKPOINT, sections)
}

/// Serializes a compiled model; only the reference-path metadata is floating point.
pub fn compiled_to_bytes(model: &LutModel, encoding: IndexEncoding) -> Result<Vec<u8>> {
    model.validate()?;
    let mut header = Out::default();
    header.u8(match model.head {
        LutHead::ArgmaxClassifier => 1,
        LutHead::FixedPointRegression => 2,
    });
    header.u8(model.s as u8);
    header.u8(model.acc_bits as u8);
    header.u8(model.guard_bits as u8);
    header.f64(model.dx);
    header.u8(model.codebook_method.code());
    header.len16(model.layers.len())?;
    for l in &model.layers {
        header.len32(l.in_dim)?;
        header.len32(l.out_dim)?;
        header.u8(u8::from(l.activation.is_some()));
    }
    header.f64(model.input.lo);
    header.f64(model.input.hi);
    header.u8(model.input.kind.code());
    header.len16(model.input.levels)?;
    header.u16s(&model.input.rows);

    let mut codebook = Out::default();
    codebook.len32(model.codebook_len())?;
    for &e in &model.mult_table[model.bias_row()] {
        codebook.i64(e);
    }

    let mut table = Out::default();
    table.len16(model.row_levels.len())?;
    table.f64s(&model.row_levels);
    for row in &model.mult_table[..model.bias_row()] {
        for &e in row {
            table.i64(e);
        }
    }

    let mut acts = Out::default();
    for t in model.layers.iter().filter_map(|l| l.activation.as_ref()) {
        acts.u8(t.kind.code());
        acts.f64(t.x_origin);
        acts.i64(t.offset);
        acts.len32(t.index_table.len())?;
        acts.u16s(&t.index_table);
        acts.len16(t.level_values.len())?;
        acts.u16s(&t.rows);
        acts.f64s(&t.level_values);
        acts.f64s(&t.boundaries);
    }

    let indices = write_indices(&model.weight_indices(), model.codebook_len(), encoding)?;
    assemble(
        KIND_COMPILED,
        vec![
            (SectionId::Header, header.0),
            (SectionId::Codebook, codebook.0),
            (SectionId::MultTable, table.0),
            (SectionId::ActivationTables, acts.0),
            (SectionId::Indices, indices),
        ],
    )
}

pub fn to_bytes(model: &ModelFile, encoding: IndexEncoding) -> Result<Vec<u8>> {
    match model {
        ModelFile::Checkpoint(c) => checkpoint_to_bytes(c, encoding),
        ModelFile::Compiled(m) => compiled_to_bytes(m, encoding),
    }
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>, encoding: IndexEncoding) -> Result<()> {
    std::fs::write(path, to_bytes(model, encoding)?)?;
    Ok(())
}

// ---------------------------------------------------------------- reading

struct In<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Absolute offset of `bytes[0]`, for error messages.
    base: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated: needed {n} bytes at offset {}",
                self.base + self.pos
            ))),
        }
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.arr()?))
    }
    fn usize32(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn usize16(&mut self) -> Result<usize> {
        Ok(usize::from(self.u16()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.check_remaining(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn u16s(&mut self, n: usize) -> Result<Vec<u16>> {
        self.check_remaining(n, 2)?;
        (0..n).map(|_| self.u16()).collect()
    }
    fn i64s(&mut self, n: usize) -> Result<Vec<i64>> {
        self.check_remaining(n, 8)?;
        (0..n).map(|_| self.i64()).collect()
    }
    /// Rejects absurd counts before allocating for them.
    fn check_remaining(&self, n: usize, width: usize) -> Result<()> {
        if n.saturating_mul(width) > self.bytes.len() - self.pos {
            return Err(Error::Format(format!(
                "truncated: {n} items of {width} bytes at offset {}",
                self.base + self.pos
            )));
        }
        Ok(())
    }
    fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
    fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in {what} section",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn kind_from(code: u8) -> Result<ActivationKind> {
    ActivationKind::from_code(code)
        .ok_or_else(|| Error::Format(format!("unknown activation kind {code}")))
}

fn read_spec(r: &mut In<'_>) -> Result<ActivationSpec> {
    let kind = kind_from(r.u8()?)?;
    let levels = r.usize16()?;
    let spec = ActivationSpec::new(kind, levels).map_err(|e| Error::Format(e.to_string()))?;
    let boundaries = r.f64s(levels - 1)?;
    spec.with_boundaries(boundaries).map_err(|e| Error::Format(e.to_string()))
}

fn read_activation(r: &mut In<'_>) -> Result<Activation> {
    match r.u8()? {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Smooth(kind_from(r.u8()?)?)),
        2 => Ok(Activation::Quantized(read_spec(r)?)),
        other => Err(Error::Format(format!("unknown activation mode {other}"))),
    }
}

fn read_indices(r: &mut In<'_>) -> Result<(usize, Vec<u32>)> {
    let encoding = r.u8()?;
    let alphabet = r.usize32()?;
    let count = r.usize32()?;
    let indices = match encoding {
        0 => {
            let bytes = r.rest();
            let needed = (count as u64 * u64::from(fixed_width(alphabet))).div_ceil(8);
            if bytes.len() as u64 != needed {
                return Err(Error::Format(format!(
                    "raw index payload is {} bytes, expected {needed}",
                    bytes.len()
                )));
            }
            unpack_fixed(bytes, count, alphabet)?
        }
        1 => {
            let lengths = r.take(alphabet)?.to_vec();
            let bit_len = r.u64()?;
            let bytes = r.rest();
            if bytes.len() as u64 != bit_len.div_ceil(8) {
                return Err(Error::Format("Huffman payload length mismatch".into()));
            }
            HuffmanCode::from_lengths(lengths)?.decode(bytes, count)?
        }
        other => return Err(Error::Format(format!("unknown index encoding {other}"))),
    };
    Ok((alphabet, indices))
}

/// Validates magic, version and checksum and returns the kind and section table.
pub fn sections(bytes: &[u8]) -> Result<(u8, Vec<SectionInfo>)> {
    if bytes.len() < PREAMBLE + 4 {
        return Err(Error::Format(format!("file of {} bytes is too short", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a QFGE model file".into()));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = In {
        bytes: body,
        pos: 4,
        base: 0,
    };
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let kind = r.u8()?;
    let count = usize::from(r.u8()?);
    let mut table = Vec::with_capacity(count);
    let mut expected = PREAMBLE + TABLE_ENTRY * count;
    for _ in 0..count {
        let code = r.u16()?;
        let id = SectionId::from_code(code)
            .ok_or_else(|| Error::Format(format!("unknown section id {code}")))?;
        let offset = r.usize32()?;
        let len = r.usize32()?;
        if offset != expected || offset + len > body.len() {
            return Err(Error::Format(format!("section {code} has a bad extent")));
        }
        expected += len;
        table.push(SectionInfo { id, offset, len });
    }
    if expected != body.len() {
        return Err(Error::Format("sections do not cover the file".into()));
    }
    Ok((kind, table))
}

fn section<'a>(bytes: &'a [u8], table: &[SectionInfo], id: SectionId) -> Result<Option<In<'a>>> {
    Ok(table.iter().find(|s| s.id == id).map(|s| In {
        bytes: &bytes[s.offset..s.offset + s.len],
        pos: 0,
        base: s.offset,
    }))
}

fn required<'a>(bytes: &'a [u8], table: &[SectionInfo], id: SectionId) -> Result<In<'a>> {
    section(bytes, table, id)?.ok_or_else(|| Error::Format(format!("missing {id:?} section")))
}

fn read_checkpoint(bytes: &[u8], table: &[SectionInfo]) -> Result<Checkpoint> {
    let mut h = required(bytes, table, SectionId::Header)?;
    let head = Head::from_code(h.u8()?).ok_or_else(|| Error::Format("unknown head".into()))?;
    let n = h.usize16()?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let in_dim = h.usize32()?;
        let out_dim = h.usize32()?;
        let activation = read_activation(&mut h)?;
        layers.push(Layer {
            in_dim,
            out_dim,
            weights: Vec::new(),
            bias: Vec::new(),
            activation,
        });
    }
    let input = match h.u8()? {
        0 => None,
        1 => {
            let lo = h.f64()?;
            let hi = h.f64()?;
            let spec = read_spec(&mut h)?;
            Some(InputQuantizer::new(lo, hi, spec).map_err(|e| Error::Format(e.to_string()))?)
        }
        other => return Err(Error::Format(format!("bad input quantizer flag {other}"))),
    };
    h.finish("header")?;
    if layers.is_empty() || layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim) {
        return Err(Error::Format("inconsistent layer dimensions".into()));
    }
    let count: usize = layers.iter().map(|l| (l.in_dim + 1) * l.out_dim).sum();

    let codebook = match section(bytes, table, SectionId::Codebook)? {
        None => None,
        Some(mut c) => {
            let method = ClusterMethod::from_code(c.u8()?)
                .ok_or_else(|| Error::Format("unknown cluster method".into()))?;
            let mean = c.f64()?;
            let scale = c.f64()?;
            let k = c.usize32()?;
            let centers = c.f64s(k)?;
            c.finish("codebook")?;
            let mut cb = WeightCodebook::from_centers(centers, method)
                .map_err(|e| Error::Format(e.to_string()))?;
            cb.mean = mean;
            cb.scale = scale;
            Some(cb)
        }
    };

    let params = if let Some(mut p) = section(bytes, table, SectionId::Parameters)? {
        let n = p.usize32()?;
        let v = p.f64s(n)?;
        p.finish("parameters")?;
        v
    } else {
        let mut s = required(bytes, table, SectionId::Indices)?;
        let cb = codebook
            .as_ref()
            .ok_or_else(|| Error::Format("index payload without a codebook".into()))?;
        let (alphabet, idx) = read_indices(&mut s)?;
        if alphabet != cb.len() {
            return Err(Error::Format("index alphabet differs from codebook size".into()));
        }
        idx.iter().map(|&k| cb.centers()[k as usize]).collect()
    };
    if params.len() != count {
        return Err(Error::Format(format!("{} parameters, expected {count}", params.len())));
    }
    let mut net = DenseNet { layers, head, input };
    let mut it = params.into_iter();
    for l in &mut net.layers {
        l.weights = it.by_ref().take(l.in_dim * l.out_dim).collect();
        l.bias = it.by_ref().take(l.out_dim).collect();
    }
    Ok(Checkpoint { net, codebook })
}

fn read_compiled(bytes: &[u8], table: &[SectionInfo]) -> Result<LutModel> {
    let mut h = required(bytes, table, SectionId::Header)?;
    let head = match h.u8()? {
        1 => LutHead::ArgmaxClassifier,
        2 => LutHead::FixedPointRegression,
        other => return Err(Error::Format(format!("unknown head {other}"))),
    };
    let s = u32::from(h.u8()?);
    let acc_bits = u32::from(h.u8()?);
    let guard_bits = u32::from(h.u8()?);
    let dx = h.f64()?;
    let codebook_method = ClusterMethod::from_code(h.u8()?)
        .ok_or_else(|| Error::Format("unknown cluster method".into()))?;
    let n = h.usize16()?;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        shapes.push((h.usize32()?, h.usize32()?, h.u8()? == 1));
    }
    let lo = h.f64()?;
    let hi = h.f64()?;
    let input_kind = kind_from(h.u8()?)?;
    let levels = h.usize16()?;
    let input = InputMap {
        lo,
        hi,
        kind: input_kind,
        levels,
        rows: h.u16s(levels)?,
    };
    h.finish("header")?;

    let mut c = required(bytes, table, SectionId::Codebook)?;
    let k = c.usize32()?;
    let bias_row = c.i64s(k)?;
    c.finish("codebook")?;

    let mut t = required(bytes, table, SectionId::MultTable)?;
    let a = t.usize16()?;
    let row_levels = t.f64s(a)?;
    let mut mult_table = Vec::with_capacity(a + 1);
    for _ in 0..a {
        mult_table.push(t.i64s(k)?);
    }
    mult_table.push(bias_row);
    t.finish("mult table")?;

    let mut acts = required(bytes, table, SectionId::ActivationTables)?;
    let mut idx_section = required(bytes, table, SectionId::Indices)?;
    let (alphabet, indices) = read_indices(&mut idx_section)?;
    if alphabet != k {
        return Err(Error::Format("index alphabet differs from codebook size".into()));
    }
    let mut it = indices.into_iter();
    let mut layers = Vec::with_capacity(n);
    for (in_dim, out_dim, has_act) in shapes {
        let to_u16 = |v: u32| v as u16;
        let weight_index: Vec<u16> = it.by_ref().take(in_dim * out_dim).map(to_u16).collect();
        let bias_index: Vec<u16> = it.by_ref().take(out_dim).map(to_u16).collect();
        if weight_index.len() != in_dim * out_dim || bias_index.len() != out_dim {
            return Err(Error::Format("index payload shorter than the layers".into()));
        }
        let activation = if has_act {
            let kind = kind_from(acts.u8()?)?;
            let x_origin = acts.f64()?;
            let offset = acts.i64()?;
            let len = acts.usize32()?;
            let index_table = acts.u16s(len)?;
            let lv = acts.usize16()?;
            if lv < 2 {
                return Err(Error::Format("activation table with fewer than 2 levels".into()));
            }
            Some(ActivationTable {
                kind,
                x_origin,
                offset,
                index_table,
                rows: acts.u16s(lv)?,
                level_values: acts.f64s(lv)?,
                boundaries: acts.f64s(lv - 1)?,
            })
        } else {
            None
        };
        layers.push(LutLayer {
            in_dim,
            out_dim,
            weight_index,
            bias_index,
            activation,
        });
    }
    acts.finish("activation tables")?;
    if it.next().is_some() {
        return Err(Error::Format("index payload longer than the layers".into()));
    }
    let model = LutModel {
        mult_table,
        row_levels,
        s,
        acc_bits,
        guard_bits,
        dx,
        codebook_method,
        input,
        layers,
        head,
    };
    model.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(model)
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelFile> {
    let (kind, table) = sections(bytes)?;
    match kind {
        KIND_CHECKPOINT => Ok(ModelFile::Checkpoint(read_checkpoint(bytes, &table)?)),
        KIND_COMPILED => Ok(ModelFile::Compiled(read_compiled(bytes, &table)?)),
        other => Err(Error::Format(format!("unknown model kind {other}"))),
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    from_bytes(&std::fs::read(path)?)
}
