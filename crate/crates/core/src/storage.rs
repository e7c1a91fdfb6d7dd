//! Storage accounting measured on the serialized file itself.

use crate::error::Result;
use crate::format::{compiled_to_bytes, sections, IndexEncoding, SectionId};
use crate::huffman::{empirical_entropy, fixed_width};
use crate::lut::LutModel;

#[derive(Debug, Clone, PartialEq)]
pub struct StorageReport {
    pub encoding: IndexEncoding,
    pub parameter_count: usize,
    pub codebook_len: usize,
    /// Bits of the index bitstream alone.
    pub index_bits: u64,
    pub bits_per_index: f64,
    /// Empirical marginal entropy of the indices, bits per index.
    pub entropy_bits: f64,
    /// Whole index section, including its code-length table.
    pub index_bytes: usize,
    /// Codebook, mult table and activation table sections.
    pub table_bytes: usize,
    /// Everything else: preamble, section table, header and checksum.
    pub header_bytes: usize,
    pub total_bytes: usize,
    /// `total_bytes` over 4 bytes per parameter.
    pub ratio_vs_float32: f64,
    /// `index_bytes` over 4 bytes per parameter.
    pub index_ratio_vs_float32: f64,
}

/// Serializes `model` and breaks the file size down by section.
pub fn estimate_storage(model: &LutModel, encoding: IndexEncoding) -> Result<StorageReport> {
    let bytes = compiled_to_bytes(model, encoding)?;
    let (_, table) = sections(&bytes)?;
    let size = |ids: &[SectionId]| -> usize {
        table.iter().filter(|s| ids.contains(&s.id)).map(|s| s.len).sum()
    };
    let index_bytes = size(&[SectionId::Indices]);
    let table_bytes = size(&[
        SectionId::Codebook,
        SectionId::MultTable,
        SectionId::ActivationTables,
    ]);
    let total_bytes = bytes.len();

    let indices = model.weight_indices();
    let k = model.codebook_len();
    let index_bits = match encoding {
        IndexEncoding::Raw => indices.len() as u64 * u64::from(fixed_width(k)),
        IndexEncoding::Huffman => crate::huffman::entropy_encode_indices(&indices, k)?.bit_len,
    };
    let p = model.parameter_count();
    let float_bytes = 4.0 * p as f64;
    Ok(StorageReport {
        encoding,
        parameter_count: p,
        codebook_len: k,
        index_bits,
        bits_per_index: index_bits as f64 / p.max(1) as f64,
        entropy_bits: empirical_entropy(&indices, k),
        index_bytes,
        table_bytes,
        header_bytes: total_bytes - index_bytes - table_bytes,
        total_bytes,
        ratio_vs_float32: total_bytes as f64 / float_bytes,
        index_ratio_vs_float32: index_bytes as f64 / float_bytes,
    })
}
