// SPDX-License-Identifier: Apache-2.0

//! Packed binary tensors with bipolar (±1) interpretation.
//!
//! Bit `i` of a [`BitVector`] lives in word `i / 64` at bit `i % 64`, which
//! serializes to LSB-first bytes. Bit value 1 encodes +1 and 0 encodes −1.
//! Padding bits past the logical length are always zero, so XOR-popcount over
//! whole words needs no masking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    /// All-zero (all −1) vector of `len` bits.
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("bit vector"));
        }
        Ok(Self {
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut v = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        Ok(v)
    }

    /// Builds a vector from raw words; bits past `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("bit vector"));
        }
        let n = len.div_ceil(WORD_BITS);
        if words.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: words.len(),
            });
        }
        let tail = len % WORD_BITS;
        if tail != 0 {
            words[n - 1] &= (1u64 << tail) - 1;
        }
        Ok(Self { len, words })
    }

    /// Decodes `ceil(len / 8)` LSB-first bytes.
    pub fn from_le_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        let need = len.div_ceil(8);
        if bytes.len() != need {
            return Err(Error::LengthMismatch {
                expected: need,
                actual: bytes.len(),
            });
        }
        let mut words = vec![0u64; len.div_ceil(WORD_BITS)];
        for (i, &byte) in bytes.iter().enumerate() {
            words[i / 8] |= (byte as u64) << ((i % 8) * 8);
        }
        Self::from_words(len, words)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    /// Bipolar value of position `i`.
    #[inline]
    pub fn value(&self, i: usize) -> i8 {
        if self.bit(i) {
            1
        } else {
            -1
        }
    }

    pub fn to_bipolar(&self) -> Vec<i8> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    pub fn complement(&self) -> Self {
        let words = self.words.iter().map(|w| !w).collect();
        Self::from_words(self.len, words).expect("length preserved")
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Copies bits `[start, start + width)` into a new vector of `width` bits,
    /// zero-filling positions past the end of `self`.
    pub fn segment(&self, start: usize, width: usize) -> Result<Self> {
        let mut out = Self::zeros(width)?;
        let end = self.len.min(start + width);
        for i in start..end {
            if self.bit(i) {
                out.set(i - start, true);
            }
        }
        Ok(out)
    }
}

/// Packs a ±1 sequence; +1 becomes bit 1.
pub fn pack_bipolar(values: &[i8]) -> Result<BitVector> {
    let mut v = BitVector::zeros(values.len())?;
    for (i, &x) in values.iter().enumerate() {
        match x {
            1 => v.set(i, true),
            -1 => {}
            other => {
                return Err(Error::NotBipolar {
                    position: i,
                    value: other as i64,
                })
            }
        }
    }
    Ok(v)
}

fn check_same_len(a: &BitVector, b: &BitVector) -> Result<()> {
    if a.len != b.len {
        return Err(Error::LengthMismatch {
            expected: a.len,
            actual: b.len,
        });
    }
    Ok(())
}

pub fn hamming_distance(a: &BitVector, b: &BitVector) -> Result<usize> {
    check_same_len(a, b)?;
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Number of agreeing positions (XNOR popcount).
pub fn hamming_matches(a: &BitVector, b: &BitVector) -> Result<usize> {
    Ok(a.len - hamming_distance(a, b)?)
}

/// Bipolar dot product, `2m - d`.
pub fn bipolar_dot(a: &BitVector, b: &BitVector) -> Result<i64> {
    let m = hamming_matches(a, b)? as i64;
    Ok(2 * m - a.len as i64)
}

/// N rows of equal-length bit vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVector>,
}

impl BitMatrix {
    pub fn new(rows: Vec<BitVector>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("bit matrix"))?;
        let cols = first.len();
        for r in &rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
        }
        Ok(Self { cols, rows })
    }

    pub fn zeros(n: usize, cols: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("bit matrix"));
        }
        Self::new(vec![BitVector::zeros(cols)?; n])
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn row_mut(&mut self, i: usize) -> &mut BitVector {
        &mut self.rows[i]
    }

    /// First `n` rows.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.rows.len() {
            return Err(Error::param(
                "valid_length",
                format!("must be in 1..={}, got {n}", self.rows.len()),
            ));
        }
        Self::new(self.rows[..n].to_vec())
    }
}

/// Dense row-major integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("integer matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    /// Checks every entry fits `bits` under the given signedness.
    pub fn check_range(&self, bits: u8, signed: bool) -> Result<()> {
        let (lo, hi) = int_range(bits, signed)?;
        for (i, &v) in self.data.iter().enumerate() {
            if v < lo || v > hi {
                return Err(Error::OutOfRange {
                    row: i / self.cols,
                    col: i % self.cols,
                    value: v,
                    bits,
                    signed,
                });
            }
        }
        Ok(())
    }
}

/// Inclusive representable range for a `bits`-wide integer.
pub fn int_range(bits: u8, signed: bool) -> Result<(i64, i64)> {
    let max_bits = if signed { 32 } else { 31 };
    if bits == 0 || bits > max_bits || (signed && bits < 2) {
        return Err(Error::param(
            "bits",
            format!("unsupported width {bits} (signed={signed})"),
        ));
    }
    Ok(if signed {
        (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
    } else {
        (0, (1i64 << bits) - 1)
    })
}

/// Integer matrix decomposed into binary slices, LSB first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicedIntMatrix {
    bits: u8,
    signed: bool,
    slices: Vec<BitMatrix>,
}

impl SlicedIntMatrix {
    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn slices(&self) -> &[BitMatrix] {
        &self.slices
    }

    pub fn n_rows(&self) -> usize {
        self.slices[0].n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.slices[0].n_cols()
    }

    /// Weight of slice `s`: `2^s`, with the MSB slice negated when signed.
    pub fn slice_weight(&self, s: usize) -> i64 {
        let w = 1i64 << s;
        if self.signed && s + 1 == self.bits as usize {
            -w
        } else {
            w
        }
    }

    pub fn weights(&self) -> Vec<i64> {
        (0..self.bits as usize).map(|s| self.slice_weight(s)).collect()
    }

    /// Weighted sum of slices.
    pub fn recombine(&self) -> IntMatrix {
        let (rows, cols) = (self.n_rows(), self.n_cols());
        let mut data = vec![0i64; rows * cols];
        for (s, slice) in self.slices.iter().enumerate() {
            let w = self.slice_weight(s);
            for r in 0..rows {
                let row = slice.row(r);
                for c in 0..cols {
                    if row.bit(c) {
                        data[r * cols + c] += w;
                    }
                }
            }
        }
        IntMatrix::new(rows, cols, data).expect("shape preserved")
    }
}

/// Decomposes `m` into `bits` binary slices (two's complement when signed).
pub fn int_to_bit_slices(m: &IntMatrix, bits: u8, signed: bool) -> Result<SlicedIntMatrix> {
    if bits > 16 {
        return Err(Error::param("bits", format!("at most 16 slices, got {bits}")));
    }
    m.check_range(bits, signed)?;
    let mut slices = Vec::with_capacity(bits as usize);
    for s in 0..bits as usize {
        let mut rows = Vec::with_capacity(m.n_rows());
        for r in 0..m.n_rows() {
            let mut v = BitVector::zeros(m.n_cols())?;
            for (c, &x) in m.row(r).iter().enumerate() {
                // Arithmetic shift on i64 yields two's-complement bits.
                if (x >> s) & 1 == 1 {
                    v.set(c, true);
                }
            }
            rows.push(v);
        }
        slices.push(BitMatrix::new(rows)?);
    }
    Ok(SlicedIntMatrix { bits, signed, slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_of(v: &BitVector) -> String {
        (0..v.len()).map(|i| if v.bit(i) { '1' } else { '0' }).collect()
    }

    #[test]
    fn pack_examples() {
        assert_eq!(bits_of(&pack_bipolar(&[1, 1, 1, 1]).unwrap()), "1111");
        assert_eq!(bits_of(&pack_bipolar(&[-1, -1]).unwrap()), "00");
        let v = pack_bipolar(&[1, -1, 1, -1, -1]).unwrap();
        assert_eq!(bits_of(&v), "10100");
        assert_eq!(v.to_le_bytes(), vec![0b0000_0101]);
        assert_eq!(v.to_bipolar(), vec![1, -1, 1, -1, -1]);
    }

    #[test]
    fn pack_rejects_bad_input() {
        assert!(matches!(pack_bipolar(&[]), Err(Error::Empty(_))));
        assert!(matches!(
            pack_bipolar(&[1, 0, -1]),
            Err(Error::NotBipolar { position: 1, value: 0 })
        ));
    }

    #[test]
    fn padding_bits_stay_zero() {
        let v = BitVector::zeros(70).unwrap().complement();
        assert_eq!(v.count_ones(), 70);
        assert_eq!(v.words()[1], (1 << 6) - 1);
        let w = BitVector::from_words(3, vec![u64::MAX]).unwrap();
        assert_eq!(w.words()[0], 0b111);
    }

    #[test]
    fn hamming_examples() {
        let a = BitVector::from_words(64, vec![0xDEAD_BEEF_0123_4567]).unwrap();
        assert_eq!(hamming_matches(&a, &a).unwrap(), 64);
        assert_eq!(hamming_matches(&a, &a.complement()).unwrap(), 0);
        let a = BitVector::from_bits(&[true, false, true, false]).unwrap();
        let b = BitVector::from_bits(&[true, false, false, false]).unwrap();
        assert_eq!(hamming_matches(&a, &b).unwrap(), 3);
        let short = BitVector::zeros(3).unwrap();
        assert!(matches!(hamming_matches(&a, &short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn bipolar_dot_examples() {
        let a = BitVector::from_words(64, vec![0x0F0F_0F0F_0F0F_0F0F]).unwrap();
        assert_eq!(bipolar_dot(&a, &a).unwrap(), 64);
        assert_eq!(bipolar_dot(&a, &a.complement()).unwrap(), -64);
        // 16 disagreements => m = 48
        let b = BitVector::from_words(64, vec![0x0F0F_0F0F_0F0F_0F0F ^ 0xFFFF]).unwrap();
        assert_eq!(hamming_matches(&a, &b).unwrap(), 48);
        assert_eq!(bipolar_dot(&a, &b).unwrap(), 32);
    }

    fn brute_dot(a: &BitVector, b: &BitVector) -> i64 {
        a.to_bipolar()
            .iter()
            .zip(b.to_bipolar())
            .map(|(&x, y)| x as i64 * y as i64)
            .sum()
    }

    #[test]
    fn bipolar_dot_exhaustive_small() {
        for d in 1..=8usize {
            for x in 0u64..(1 << d) {
                for y in 0u64..(1 << d) {
                    let a = BitVector::from_words(d, vec![x]).unwrap();
                    let b = BitVector::from_words(d, vec![y]).unwrap();
                    assert_eq!(bipolar_dot(&a, &b).unwrap(), brute_dot(&a, &b));
                }
            }
        }
    }

    #[test]
    fn slice_examples() {
        let m = IntMatrix::new(1, 2, vec![5, -3]).unwrap();
        let s = int_to_bit_slices(&m, 4, true).unwrap();
        assert_eq!(s.weights(), vec![1, 2, 4, -8]);
        let col = |c: usize| -> Vec<bool> { s.slices().iter().map(|sl| sl.row(0).bit(c)).collect() };
        assert_eq!(col(0), vec![true, false, true, false]);
        assert_eq!(col(1), vec![true, false, true, true]);
        assert_eq!(s.recombine(), m);
    }

    #[test]
    fn slice_rejects_out_of_range_with_coordinates() {
        let m = IntMatrix::new(2, 2, vec![0, 1, 2, 8]).unwrap();
        match int_to_bit_slices(&m, 4, true) {
            Err(Error::OutOfRange { row, col, value, .. }) => {
                assert_eq!((row, col, value), (1, 1, 8));
            }
            other => panic!("unexpected {other:?}"),
        }
        let neg = IntMatrix::new(1, 1, vec![-1]).unwrap();
        assert!(int_to_bit_slices(&neg, 4, false).is_err());
    }

    fn arb_vec_pair(d: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (
            prop::collection::vec(any::<bool>(), d),
            prop::collection::vec(any::<bool>(), d),
        )
    }

    proptest! {
        #[test]
        fn dot_matches_brute_force_d64((a, b) in arb_vec_pair(64)) {
            let a = BitVector::from_bits(&a).unwrap();
            let b = BitVector::from_bits(&b).unwrap();
            prop_assert_eq!(bipolar_dot(&a, &b).unwrap(), brute_dot(&a, &b));
            prop_assert_eq!(
                hamming_matches(&a, &b).unwrap() + hamming_distance(&a, &b).unwrap(),
                64
            );
            prop_assert_eq!(hamming_matches(&a, &b).unwrap(), hamming_matches(&b, &a).unwrap());
        }

        #[test]
        fn byte_round_trip(bits in prop::collection::vec(any::<bool>(), 1..200)) {
            let v = BitVector::from_bits(&bits).unwrap();
            let back = BitVector::from_le_bytes(bits.len(), &v.to_le_bytes()).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn slicing_recombines(
            bits in prop::sample::select(vec![2u8, 4, 8]),
            signed in any::<bool>(),
            seeds in prop::collection::vec(any::<u32>(), 8 * 8),
        ) {
            let (lo, hi) = int_range(bits, signed).unwrap();
            let span = (hi - lo + 1) as u64;
            let data = seeds.iter().map(|&s| lo + (s as u64 % span) as i64).collect();
            let m = IntMatrix::new(8, 8, data).unwrap();
            let sliced = int_to_bit_slices(&m, bits, signed).unwrap();
            prop_assert_eq!(sliced.slices().len(), bits as usize);
            prop_assert_eq!(sliced.recombine(), m);
        }
    }
}
