//! Fixed-width bit packing and canonical Huffman coding of codebook indices.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Longest codeword allowed; counts are flattened until the code fits.
pub const MAX_CODE_LEN: u8 = 32;

/// MSB-first bit writer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    pending: u32,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 32);
        if width == 0 {
            return;
        }
        let mask = (1u64 << width) - 1;
        self.acc = (self.acc << width) | (value & mask);
        self.pending += width;
        self.bit_len += u64::from(width);
        while self.pending >= 8 {
            self.pending -= 8;
            self.bytes.push((self.acc >> self.pending) as u8);
        }
        self.acc &= (1u64 << self.pending) - 1;
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    /// Flushes the final partial byte (zero padded).
    pub fn finish(mut self) -> (Vec<u8>, u64) {
        if self.pending > 0 {
            self.bytes.push((self.acc << (8 - self.pending)) as u8);
        }
        (self.bytes, self.bit_len)
    }
}

/// MSB-first bit reader.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<u32> {
        let byte = usize::try_from(self.pos / 8).unwrap_or(usize::MAX);
        let b = *self
            .bytes
            .get(byte)
            .ok_or_else(|| Error::Format(format!("bitstream ends at bit {}", self.pos)))?;
        let bit = (b >> (7 - (self.pos % 8))) & 1;
        self.pos += 1;
        Ok(u32::from(bit))
    }

    pub fn read(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }
}

/// Bits per index of the raw fixed-width encoding, `ceil(log2 alphabet)`.
pub fn fixed_width(alphabet: usize) -> u32 {
    if alphabet <= 1 {
        0
    } else {
        usize::BITS - (alphabet - 1).leading_zeros()
    }
}

pub fn pack_fixed(indices: &[u32], alphabet: usize) -> Result<Vec<u8>> {
    check_range(indices, alphabet)?;
    let width = fixed_width(alphabet);
    let mut w = BitWriter::new();
    for &i in indices {
        w.write(u64::from(i), width);
    }
    Ok(w.finish().0)
}

pub fn unpack_fixed(bytes: &[u8], count: usize, alphabet: usize) -> Result<Vec<u32>> {
    let width = fixed_width(alphabet);
    let mut r = BitReader::new(bytes);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let v = r.read(width)? as u32;
        if v as usize >= alphabet {
            return Err(Error::Format(format!("index {v} outside alphabet {alphabet}")));
        }
        out.push(v);
    }
    Ok(out)
}

fn check_range(indices: &[u32], alphabet: usize) -> Result<()> {
    match indices.iter().find(|&&i| i as usize >= alphabet) {
        Some(i) => Err(Error::InvalidArgument(format!("index {i} outside alphabet {alphabet}"))),
        None => Ok(()),
    }
}

/// Empirical marginal entropy in bits per index.
pub fn empirical_entropy(indices: &[u32], alphabet: usize) -> f64 {
    let counts = histogram(indices, alphabet);
    let n = indices.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

pub fn histogram(indices: &[u32], alphabet: usize) -> Vec<u64> {
    let mut counts = vec![0u64; alphabet];
    for &i in indices {
        if let Some(c) = counts.get_mut(i as usize) {
            *c += 1;
        }
    }
    counts
}

/// A canonical prefix code, fully described by its per-symbol lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCode {
    /// Codeword length of each symbol; 0 for unused symbols.
    lengths: Vec<u8>,
    codes: Vec<u32>,
}

impl HuffmanCode {
    /// Optimal code for the given symbol counts (length-limited if needed).
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let used: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
        let mut lengths = vec![0u8; counts.len()];
        match used.len() {
            0 => return Self::from_lengths(lengths),
            1 => {
                lengths[used[0]] = 1;
                return Self::from_lengths(lengths);
            }
            _ => {}
        }
        let mut weights: Vec<u64> = counts.to_vec();
        loop {
            let l = huffman_lengths(&weights, &used);
            if l.iter().all(|&x| x <= MAX_CODE_LEN) {
                for (&sym, &len) in used.iter().zip(&l) {
                    lengths[sym] = len;
                }
                return Self::from_lengths(lengths);
            }
            for &sym in &used {
                weights[sym] = (weights[sym] / 2).max(1);
            }
        }
    }

    /// Rebuilds the canonical code from stored lengths, checking Kraft.
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self> {
        if lengths.iter().any(|&l| l > MAX_CODE_LEN) {
            return Err(Error::Format("codeword longer than 32 bits".into()));
        }
        let kraft: u128 = lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 1u128 << (MAX_CODE_LEN - l))
            .sum();
        if kraft > 1u128 << MAX_CODE_LEN {
            return Err(Error::Format("code lengths violate the Kraft inequality".into()));
        }
        let mut order: Vec<usize> = (0..lengths.len()).filter(|&i| lengths[i] > 0).collect();
        order.sort_by_key(|&i| (lengths[i], i));
        let mut codes = vec![0u32; lengths.len()];
        let mut code = 0u64;
        let mut prev = 0u8;
        for &sym in &order {
            code <<= lengths[sym] - prev;
            codes[sym] = code as u32;
            code += 1;
            prev = lengths[sym];
        }
        Ok(Self { lengths, codes })
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn alphabet(&self) -> usize {
        self.lengths.len()
    }

    pub fn encode(&self, indices: &[u32]) -> Result<(Vec<u8>, u64)> {
        let mut w = BitWriter::new();
        for &i in indices {
            let len = self.lengths.get(i as usize).copied().unwrap_or(0);
            if len == 0 {
                return Err(Error::InvalidArgument(format!("symbol {i} has no codeword")));
            }
            w.write(u64::from(self.codes[i as usize]), u32::from(len));
        }
        Ok(w.finish())
    }

    pub fn decode(&self, bytes: &[u8], count: usize) -> Result<Vec<u32>> {
        // Canonical decoding: per length, the first code and its symbols.
        let max = self.lengths.iter().copied().max().unwrap_or(0);
        let mut per_len = vec![Vec::new(); usize::from(max) + 1];
        let mut order: Vec<usize> = (0..self.lengths.len()).filter(|&i| self.lengths[i] > 0).collect();
        order.sort_by_key(|&i| (self.lengths[i], i));
        for &sym in &order {
            per_len[usize::from(self.lengths[sym])].push(sym as u32);
        }
        let first: Vec<u64> = per_len
            .iter()
            .map(|syms| syms.first().map_or(0, |&s| u64::from(self.codes[s as usize])))
            .collect();

        let mut r = BitReader::new(bytes);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut code = 0u64;
            let mut len = 0usize;
            loop {
                code = (code << 1) | u64::from(r.read_bit()?);
                len += 1;
                if len > usize::from(max) {
                    return Err(Error::Format("invalid Huffman codeword".into()));
                }
                let syms = &per_len[len];
                if !syms.is_empty() && code >= first[len] && code - first[len] < syms.len() as u64 {
                    out.push(syms[(code - first[len]) as usize]);
                    break;
                }
            }
        }
        Ok(out)
    }
}

/// Code lengths of the `used` symbols from a standard Huffman merge.
fn huffman_lengths(weights: &[u64], used: &[usize]) -> Vec<u8> {
    // Nodes: leaves 0..n, then internal nodes; ties broken by node id.
    let n = used.len();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        used.iter().enumerate().map(|(i, &s)| Reverse((weights[s], i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().expect("two nodes");
        let Reverse((wb, b)) = heap.pop().expect("two nodes");
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, next)));
        next += 1;
    }
    (0..n)
        .map(|leaf| {
            let mut depth = 0usize;
            let mut node = leaf;
            while parent[node] != usize::MAX {
                node = parent[node];
                depth += 1;
            }
            depth.min(255) as u8
        })
        .collect()
}

/// Huffman-coded index stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedIndices {
    pub code: HuffmanCode,
    pub count: usize,
    pub bit_len: u64,
    pub bytes: Vec<u8>,
}

impl EncodedIndices {
    /// Bitstream length divided by the number of indices.
    pub fn bits_per_index(&self) -> f64 {
        self.bit_len as f64 / self.count.max(1) as f64
    }

    pub fn decode(&self) -> Result<Vec<u32>> {
        self.code.decode(&self.bytes, self.count)
    }
}

/// Canonical Huffman coding over the empirical marginal of `indices`.
pub fn entropy_encode_indices(indices: &[u32], alphabet: usize) -> Result<EncodedIndices> {
    check_range(indices, alphabet)?;
    let code = HuffmanCode::from_counts(&histogram(indices, alphabet))?;
    let (bytes, bit_len) = code.encode(indices)?;
    Ok(EncodedIndices {
        code,
        count: indices.len(),
        bit_len,
        bytes,
    })
}
