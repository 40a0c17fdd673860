//! Bit-string genomes and the map between bit groups and displacements.
//!
//! A genome is a flat sequence of bits split into fixed-width groups, one
//! group per encoded scalar. Groups are read most-significant bit first and
//! mapped linearly onto `[-radius, +radius]` with `2^B` levels, so both range
//! endpoints are exactly representable and zero is not (for any `B`).
//!
//! Lattice genomes interleave parameters per node in row-major node order:
//! `dx0 dy0 dx1 dy1 ...`.

use crate::error::{Error, Result};
use crate::Vec2;

/// Bit width and half-range of one encoded scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodingSpec {
    pub bits_per_param: u32,
    pub radius: f64,
}

impl EncodingSpec {
    pub const MAX_BITS: u32 = 32;

    pub fn new(bits_per_param: u32, radius: f64) -> Result<Self> {
        let spec = EncodingSpec {
            bits_per_param,
            radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_param == 0 || self.bits_per_param > Self::MAX_BITS {
            return Err(Error::param(
                "bits_per_param",
                format!("must be in 1..={}, got {}", Self::MAX_BITS, self.bits_per_param),
            ));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param(
                "radius",
                format!("must be finite and > 0, got {}", self.radius),
            ));
        }
        Ok(())
    }

    /// Largest unsigned group value, `2^B - 1`.
    pub fn max_level(&self) -> u64 {
        (1u64 << self.bits_per_param) - 1
    }

    /// Distance between adjacent representable values.
    pub fn step(&self) -> f64 {
        2.0 * self.radius / self.max_level() as f64
    }

    pub fn decode_value(&self, v: u64) -> f64 {
        let m = self.max_level() as f64;
        self.radius * (2.0 * v as f64 - m) / m
    }

    /// Nearest level to `x` after clamping to `[-r, r]`; exact ties go to the
    /// lower level.
    pub fn encode_value(&self, x: f64) -> u64 {
        let m = self.max_level() as f64;
        let x = x.clamp(-self.radius, self.radius);
        let continuous = (x / self.radius * m + m) / 2.0;
        let v = (continuous - 0.5).ceil();
        v.clamp(0.0, m) as u64
    }
}

/// A fixed-length bit string split into `bits_per_param`-wide groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Genome {
    bits: Vec<bool>,
    bits_per_param: u32,
}

impl Genome {
    pub fn new(bits: Vec<bool>, bits_per_param: u32) -> Result<Self> {
        if bits_per_param == 0 || bits_per_param > EncodingSpec::MAX_BITS {
            return Err(Error::param(
                "bits_per_param",
                format!("must be in 1..={}, got {bits_per_param}", EncodingSpec::MAX_BITS),
            ));
        }
        if !bits.len().is_multiple_of(bits_per_param as usize) {
            return Err(Error::GenomeLength {
                expected: bits.len().next_multiple_of(bits_per_param as usize),
                actual: bits.len(),
            });
        }
        Ok(Genome {
            bits,
            bits_per_param,
        })
    }

    pub fn zeros(n_params: usize, bits_per_param: u32) -> Self {
        Genome {
            bits: vec![false; n_params * bits_per_param as usize],
            bits_per_param,
        }
    }

    /// Builds a genome from unsigned group values, each written MSB first.
    pub fn from_values(values: &[u64], bits_per_param: u32) -> Self {
        let b = bits_per_param as usize;
        let mut bits = Vec::with_capacity(values.len() * b);
        for &v in values {
            for pos in (0..b).rev() {
                bits.push((v >> pos) & 1 == 1);
            }
        }
        Genome {
            bits,
            bits_per_param,
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits_per_param(&self) -> u32 {
        self.bits_per_param
    }

    pub fn n_params(&self) -> usize {
        self.bits.len() / self.bits_per_param as usize
    }

    /// Unsigned value of every group, MSB first.
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits
            .chunks_exact(self.bits_per_param as usize)
            .map(group_value)
    }

    pub fn hamming(&self, other: &Genome) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

fn group_value(group: &[bool]) -> u64 {
    group.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

pub fn decode_param(group: &[bool], spec: &EncodingSpec) -> Result<f64> {
    if group.len() != spec.bits_per_param as usize {
        return Err(Error::GenomeLength {
            expected: spec.bits_per_param as usize,
            actual: group.len(),
        });
    }
    Ok(spec.decode_value(group_value(group)))
}

/// Decodes a lattice genome into `n_nodes` displacement vectors.
///
/// Vectors longer than the encoding radius are scaled back onto the circle of
/// that radius, so every output has norm `<= radius`.
pub fn decode_genome(g: &Genome, spec: &EncodingSpec, n_nodes: usize) -> Result<Vec<Vec2>> {
    let expected = 2 * n_nodes * spec.bits_per_param as usize;
    if g.bits_per_param != spec.bits_per_param || g.len() != expected {
        return Err(Error::GenomeLength {
            expected,
            actual: g.len(),
        });
    }
    let r = spec.radius;
    let mut values = g.values().map(|v| spec.decode_value(v));
    let mut out = Vec::with_capacity(n_nodes);
    while let (Some(dx), Some(dy)) = (values.next(), values.next()) {
        let norm = dx.hypot(dy);
        if norm > r {
            let s = r / norm;
            out.push([dx * s, dy * s]);
        } else {
            out.push([dx, dy]);
        }
    }
    Ok(out)
}

/// Quantizes displacement vectors into a genome; components are clamped to
/// `[-r, r]` first.
pub fn encode_genome(vectors: &[Vec2], spec: &EncodingSpec) -> Genome {
    let values: Vec<u64> = vectors
        .iter()
        .flat_map(|v| [spec.encode_value(v[0]), spec.encode_value(v[1])])
        .collect();
    Genome::from_values(&values, spec.bits_per_param)
}

/// Mean pairwise normalized Hamming distance, computed from per-position bit
/// counts in `O(n * len)`. Returns 0 for fewer than two genomes or empty
/// genomes.
pub fn mean_pairwise_hamming<'a, I>(genomes: I) -> f64
where
    I: IntoIterator<Item = &'a Genome>,
{
    let mut counts: Vec<u64> = Vec::new();
    let mut n = 0u64;
    for g in genomes {
        if counts.is_empty() {
            counts = vec![0; g.len()];
        }
        for (c, &b) in counts.iter_mut().zip(g.bits()) {
            *c += b as u64;
        }
        n += 1;
    }
    if n < 2 || counts.is_empty() {
        return 0.0;
    }
    let differing: u64 = counts.iter().map(|&c| c * (n - c)).sum();
    let pairs = n * (n - 1) / 2;
    differing as f64 / (pairs as f64 * counts.len() as f64)
}
