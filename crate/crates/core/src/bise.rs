//! Bounded integer sequence encoding.
//!
//! Values in `[0, N)` are stored with one of three layouts:
//!
//! * plain: `m = ceil(log2 N)` bits per value;
//! * trit: `N ≤ 3·2^m`; every group of 5 values stores its high parts as
//!   one base-3 number in 8 bits (`3^5 = 243`) followed by the five `m`-bit
//!   low parts;
//! * quint: `N ≤ 5·2^m`; groups of 3 values, high parts as a base-5 number
//!   in 7 bits (`5^3 = 125`) followed by three `m`-bit low parts.
//!
//! Groups have a fixed bit stride, so the bits of value `i` sit at an offset
//! computed from `i` alone and any value decodes in constant time. A
//! trailing partial group is padded with zeros.
//!
//! Bits are packed LSB-first: stream bit `k` is bit `k % 8` of byte `k / 8`,
//! and multi-bit fields are written least significant bit first.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BiseError {
    #[error("range must contain at least one value")]
    EmptyRange,
    #[error("value {value} at index {index} is outside [0, {range_n})")]
    ValueOutOfRange { index: usize, value: u32, range_n: u32 },
    #[error("index {index} out of bounds for {count} values")]
    IndexOutOfBounds { index: usize, count: usize },
    #[error("payload holds {have} bits, layout needs {need}")]
    ShortPayload { have: u64, need: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bits", rename_all = "snake_case")]
pub enum Layout {
    Plain(u8),
    Trit(u8),
    Quint(u8),
}

const POW3: [u32; 5] = [1, 3, 9, 27, 81];
const POW5: [u32; 3] = [1, 5, 25];

fn ceil_log2(n: u32) -> u8 {
    if n <= 1 {
        0
    } else {
        (32 - (n - 1).leading_zeros()) as u8
    }
}

/// Smallest `m` with `base · 2^m ≥ n`.
fn low_bits(base: u32, n: u32) -> u8 {
    let mut m = 0u8;
    while (base as u64) << m < n as u64 {
        m += 1;
    }
    m
}

impl Layout {
    /// Cheapest layout for values in `[0, range_n)`. Powers of two always use
    /// plain bits; otherwise ties prefer plain, then trit, then quint.
    pub fn for_range(range_n: u32) -> Result<Layout, BiseError> {
        if range_n == 0 {
            return Err(BiseError::EmptyRange);
        }
        let plain = Layout::Plain(ceil_log2(range_n));
        if range_n.is_power_of_two() {
            return Ok(plain);
        }
        let candidates = [plain, Layout::Trit(low_bits(3, range_n)), Layout::Quint(low_bits(5, range_n))];
        Ok(candidates.into_iter().min_by_key(|l| l.cost_per_value_x15()).expect("non-empty"))
    }

    /// Bits per value scaled by 15, exact for all three layouts.
    pub fn cost_per_value_x15(&self) -> u32 {
        match *self {
            Layout::Plain(m) => 15 * m as u32,
            Layout::Trit(m) => 3 * (8 + 5 * m as u32),
            Layout::Quint(m) => 5 * (7 + 3 * m as u32),
        }
    }

    pub fn bits_per_value(&self) -> f64 {
        self.cost_per_value_x15() as f64 / 15.0
    }

    /// Values per group.
    pub fn group_len(&self) -> usize {
        match self {
            Layout::Plain(_) => 1,
            Layout::Trit(_) => 5,
            Layout::Quint(_) => 3,
        }
    }

    pub fn group_bits(&self) -> u64 {
        match *self {
            Layout::Plain(m) => m as u64,
            Layout::Trit(m) => 8 + 5 * m as u64,
            Layout::Quint(m) => 7 + 3 * m as u64,
        }
    }

    /// Largest value count the layout can represent plus one.
    pub fn capacity(&self) -> u64 {
        match *self {
            Layout::Plain(m) => 1u64 << m,
            Layout::Trit(m) => 3u64 << m,
            Layout::Quint(m) => 5u64 << m,
        }
    }

    /// Total payload bits for `count` values.
    pub fn payload_bits(&self, count: usize) -> u64 {
        count.div_ceil(self.group_len()) as u64 * self.group_bits()
    }

    pub fn payload_bytes(&self, count: usize) -> usize {
        self.payload_bits(count).div_ceil(8) as usize
    }

    /// Bit span `[start, end)` occupied by values `first..first + len`,
    /// rounded out to whole groups.
    pub fn bit_span(&self, first: usize, len: usize) -> (u64, u64) {
        if len == 0 {
            return (0, 0);
        }
        let g = self.group_len();
        let start = (first / g) as u64 * self.group_bits();
        let end = (first + len).div_ceil(g) as u64 * self.group_bits();
        (start, end)
    }

    /// Tag byte used on the wire: kind in the top two bits, `m` below.
    pub fn to_tag(self) -> u8 {
        match self {
            Layout::Plain(m) => m,
            Layout::Trit(m) => 0x40 | m,
            Layout::Quint(m) => 0x80 | m,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Layout> {
        let m = tag & 0x3f;
        if m > 32 {
            return None;
        }
        match tag >> 6 {
            0 => Some(Layout::Plain(m)),
            1 => Some(Layout::Trit(m)),
            2 => Some(Layout::Quint(m)),
            _ => None,
        }
    }
}

/// LSB-first bit writer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    fill: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, value: u32, bits: u8) {
        if bits == 0 {
            return;
        }
        debug_assert!(bits == 32 || value >> bits == 0);
        self.acc |= (value as u64) << self.fill;
        self.fill += bits as u32;
        while self.fill >= 8 {
            self.bytes.push(self.acc as u8);
            self.acc >>= 8;
            self.fill -= 8;
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 + self.fill as u64
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.fill > 0 {
            self.bytes.push(self.acc as u8);
        }
        self.bytes
    }
}

/// Reads `bits ≤ 32` bits starting at stream bit `offset`.
#[inline]
pub fn read_bits(bytes: &[u8], offset: u64, bits: u8) -> u32 {
    if bits == 0 {
        return 0;
    }
    let byte = (offset / 8) as usize;
    let shift = (offset % 8) as u32;
    let mut word = [0u8; 8];
    let avail = bytes.len().saturating_sub(byte).min(8);
    word[..avail].copy_from_slice(&bytes[byte..byte + avail]);
    let v = u64::from_le_bytes(word) >> shift;
    (v & ((1u64 << bits) - 1)) as u32
}

#[inline]
fn decode_with(bytes: &[u8], layout: Layout, index: usize) -> u32 {
    match layout {
        Layout::Plain(m) => read_bits(bytes, index as u64 * m as u64, m),
        Layout::Trit(m) => {
            let (g, j) = (index / 5, index % 5);
            let base = g as u64 * layout.group_bits();
            let packed = read_bits(bytes, base, 8);
            let high = packed / POW3[j] % 3;
            let low = read_bits(bytes, base + 8 + j as u64 * m as u64, m);
            (high << m) | low
        }
        Layout::Quint(m) => {
            let (g, j) = (index / 3, index % 3);
            let base = g as u64 * layout.group_bits();
            let packed = read_bits(bytes, base, 7);
            let high = packed / POW5[j] % 5;
            let low = read_bits(bytes, base + 7 + j as u64 * m as u64, m);
            (high << m) | low
        }
    }
}

/// Appends the encoding of `values` to `w`; the caller has range-checked them.
fn write_values(w: &mut BitWriter, layout: Layout, values: &[u32]) {
    match layout {
        Layout::Plain(m) => values.iter().for_each(|&v| w.write(v, m)),
        Layout::Trit(m) | Layout::Quint(m) => {
            let (g, pow, packed_bits): (usize, &[u32], u8) = match layout {
                Layout::Trit(_) => (5, &POW3, 8),
                _ => (3, &POW5, 7),
            };
            for chunk in values.chunks(g) {
                let packed: u32 = chunk.iter().zip(pow).map(|(&v, &p)| (v >> m) * p).sum();
                w.write(packed, packed_bits);
                for j in 0..g {
                    let low = chunk.get(j).map_or(0, |&v| v & ((1u32 << m) - 1));
                    w.write(low, m);
                }
            }
        }
    }
}

/// An owned encoded sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiseSequence {
    range_n: u32,
    count: usize,
    layout: Layout,
    payload: Vec<u8>,
}

pub fn encode(values: &[u32], range_n: u32) -> Result<BiseSequence, BiseError> {
    let layout = Layout::for_range(range_n)?;
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v >= range_n) {
        return Err(BiseError::ValueOutOfRange { index, value, range_n });
    }
    let mut w = BitWriter::new();
    write_values(&mut w, layout, values);
    Ok(BiseSequence { range_n, count: values.len(), layout, payload: w.finish() })
}

/// Appends an encoded sequence to an existing writer (used for payload
/// areas that concatenate many sequences on group boundaries).
pub fn encode_into(w: &mut BitWriter, values: &[u32], range_n: u32) -> Result<Layout, BiseError> {
    let layout = Layout::for_range(range_n)?;
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v >= range_n) {
        return Err(BiseError::ValueOutOfRange { index, value, range_n });
    }
    write_values(w, layout, values);
    Ok(layout)
}

impl BiseSequence {
    pub fn range_n(&self) -> u32 {
        self.range_n
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn bit_len(&self) -> u64 {
        self.layout.payload_bits(self.count)
    }

    pub fn view(&self) -> BiseView<'_> {
        BiseView { bytes: &self.payload, layout: self.layout, count: self.count }
    }

    pub fn decode_at(&self, index: usize) -> Result<u32, BiseError> {
        self.view().decode_at(index)
    }

    pub fn decode_all(&self) -> Vec<u32> {
        self.view().decode_all()
    }
}

/// A borrowed sequence inside a larger buffer.
#[derive(Debug, Clone, Copy)]
pub struct BiseView<'a> {
    bytes: &'a [u8],
    layout: Layout,
    count: usize,
}

impl<'a> BiseView<'a> {
    pub fn new(bytes: &'a [u8], layout: Layout, count: usize) -> Result<Self, BiseError> {
        let need = layout.payload_bits(count);
        let have = bytes.len() as u64 * 8;
        if have < need {
            return Err(BiseError::ShortPayload { have, need });
        }
        Ok(BiseView { bytes, layout, count })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    #[inline]
    pub fn decode_at(&self, index: usize) -> Result<u32, BiseError> {
        if index >= self.count {
            return Err(BiseError::IndexOutOfBounds { index, count: self.count });
        }
        Ok(decode_with(self.bytes, self.layout, index))
    }

    /// Decodes `out.len()` consecutive values starting at `first`.
    pub fn decode_run(&self, first: usize, out: &mut [u32]) -> Result<(), BiseError> {
        if first + out.len() > self.count {
            return Err(BiseError::IndexOutOfBounds { index: first + out.len() - 1, count: self.count });
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = decode_with(self.bytes, self.layout, first + k);
        }
        Ok(())
    }

    /// Sequential decode, independent of the random-access path.
    pub fn decode_all(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.count);
        let g = self.layout.group_len();
        let mut pos = 0u64;
        let (m, pow_base, packed_bits) = match self.layout {
            Layout::Plain(m) => (m, 1, 0),
            Layout::Trit(m) => (m, 3, 8),
            Layout::Quint(m) => (m, 5, 7),
        };
        while out.len() < self.count {
            let mut packed = read_bits(self.bytes, pos, packed_bits);
            pos += packed_bits as u64;
            for _ in 0..g {
                let high = if pow_base == 1 { 0 } else { packed % pow_base };
                packed /= pow_base;
                let low = read_bits(self.bytes, pos, m);
                pos += m as u64;
                if out.len() < self.count {
                    out.push((high << m) | low);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Enumerates all three layouts and returns the cheapest by hand.
    fn cheapest_by_enumeration(n: u32) -> (f64, &'static str) {
        let plain = (n as f64).log2().ceil();
        let mut m = 0;
        while 3 * (1u64 << m) < n as u64 {
            m += 1;
        }
        let trit = 8.0 / 5.0 + m as f64;
        let mut q = 0;
        while 5 * (1u64 << q) < n as u64 {
            q += 1;
        }
        let quint = 7.0 / 3.0 + q as f64;
        if n.is_power_of_two() || (plain <= trit && plain <= quint) {
            (plain, "plain")
        } else if trit <= quint {
            (trit, "trit")
        } else {
            (quint, "quint")
        }
    }

    #[test]
    fn layouts_for_small_ranges() {
        assert_eq!(Layout::for_range(8).unwrap(), Layout::Plain(3));
        assert_eq!(Layout::for_range(3).unwrap(), Layout::Trit(0));
        assert_eq!(Layout::for_range(5).unwrap(), Layout::Quint(0));
        assert_eq!(Layout::for_range(1).unwrap(), Layout::Plain(0));
        assert_eq!(Layout::for_range(2).unwrap(), Layout::Plain(1));
        assert_eq!(Layout::for_range(0), Err(BiseError::EmptyRange));
        assert!((Layout::Trit(0).bits_per_value() - 1.6).abs() < 1e-12);
        assert!((Layout::Quint(0).bits_per_value() - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn layout_choice_matches_enumeration() {
        for n in 1..=70_000u32 {
            let l = Layout::for_range(n).unwrap();
            let (bits, kind) = cheapest_by_enumeration(n);
            assert!((l.bits_per_value() - bits).abs() < 1e-9, "N={n}: {l:?} vs {kind}");
            assert!(l.capacity() >= n as u64);
        }
    }

    #[test]
    fn empty_and_single_values() {
        let e = encode(&[], 3).unwrap();
        assert!(e.payload().is_empty());
        assert_eq!(e.decode_at(0), Err(BiseError::IndexOutOfBounds { index: 0, count: 0 }));
        assert_eq!(encode(&[7], 8).unwrap().decode_at(0), Ok(7));
    }

    #[test]
    fn five_trits_fit_a_byte() {
        let seq = encode(&[0, 1, 2, 0, 1], 3).unwrap();
        assert!(seq.bit_len() <= 8);
        assert_eq!(seq.payload(), &[3 + 2 * 9 + 81]);
        assert_eq!(seq.decode_all(), vec![0, 1, 2, 0, 1]);
    }

    #[test]
    fn golden_vectors() {
        // plain 3 bits: 5 = 101, 2 = 010 -> bits LSB-first 101 010 -> 0b010101
        assert_eq!(encode(&[5, 2], 8).unwrap().payload(), &[0b0001_0101]);
        // N=6 -> trit m=1. values 5 = (2<<1)|1, 0, 3 = (1<<1)|1
        // packed trits 2 + 0*3 + 1*9 = 11, lows 1,0,1,0,0
        let seq = encode(&[5, 0, 3], 6).unwrap();
        assert_eq!(seq.layout(), Layout::Trit(1));
        assert_eq!(seq.payload(), &[11, 0b0000_0101]);
        // N=10 -> quint m=1 (10 = 5·2). values 9 = (4<<1)|1, 2 = (1<<1)|0
        // packed 4 + 1*5 = 9 in 7 bits, lows 1,0,0 after
        let seq = encode(&[9, 2], 10).unwrap();
        assert_eq!(seq.layout(), Layout::Quint(1));
        assert_eq!(seq.payload(), &[9 | (1 << 7), 0]);
        assert_eq!(seq.bit_len(), 10);
    }

    #[test]
    fn out_of_range_value_names_index() {
        assert_eq!(
            encode(&[0, 1, 3], 3),
            Err(BiseError::ValueOutOfRange { index: 2, value: 3, range_n: 3 })
        );
    }

    #[test]
    fn large_random_sequence_n33() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let values: Vec<u32> = (0..100_000).map(|_| rng.gen_range(0..33)).collect();
        let seq = encode(&values, 33).unwrap();
        assert_eq!(seq.decode_all(), values);
        assert!(seq.bit_len() as f64 / values.len() as f64 <= 6.0);
    }

    #[test]
    fn strictly_smaller_than_plain_for_non_powers() {
        for n in [3u32, 5, 6, 10, 12, 20, 24, 40, 48] {
            let l = Layout::for_range(n).unwrap();
            assert!(l.payload_bits(10_000) < 10_000 * ceil_log2(n) as u64, "N={n}");
        }
    }

    #[test]
    fn bit_span_covers_whole_groups() {
        let l = Layout::Trit(2);
        assert_eq!(l.bit_span(3, 4), (0, 36));
        assert_eq!(l.bit_span(5, 5), (18, 36));
        assert_eq!(Layout::Plain(3).bit_span(2, 2), (6, 12));
    }

    #[test]
    fn tags_round_trip() {
        for l in [Layout::Plain(0), Layout::Plain(17), Layout::Trit(5), Layout::Quint(12)] {
            assert_eq!(Layout::from_tag(l.to_tag()), Some(l));
        }
        assert_eq!(Layout::from_tag(0xc0), None);
    }

    #[test]
    fn view_rejects_short_payload() {
        assert!(matches!(BiseView::new(&[0], Layout::Plain(3), 3), Err(BiseError::ShortPayload { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_and_random_access(
            n in 1u32..=65_536,
            raw in prop::collection::vec(any::<u32>(), 0..300),
            perm_seed in any::<u64>(),
        ) {
            let values: Vec<u32> = raw.iter().map(|v| v % n).collect();
            let seq = encode(&values, n).unwrap();
            let all = seq.decode_all();
            prop_assert_eq!(&all, &values);
            let bound = values.len() as u64 * ceil_log2(n) as u64 + seq.layout().group_bits();
            prop_assert!(seq.bit_len() <= bound);
            let mut order: Vec<usize> = (0..values.len()).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
            for i in order {
                prop_assert_eq!(seq.decode_at(i).unwrap(), all[i]);
            }
        }

        #[test]
        fn concatenated_sequences_decode_independently(
            a in prop::collection::vec(0u32..7, 0..40),
            b in prop::collection::vec(0u32..100, 1..40),
        ) {
            let mut w = BitWriter::new();
            let la = encode_into(&mut w, &a, 7).unwrap();
            let offset_bits = w.bit_len();
            let lb = encode_into(&mut w, &b, 100).unwrap();
            let bytes = w.finish();
            prop_assert_eq!(offset_bits, la.payload_bits(a.len()));
            // b starts mid-byte; re-read it through a shifted copy
            let shifted: Vec<u8> = {
                let mut out = BitWriter::new();
                let total = bytes.len() as u64 * 8;
                let mut pos = offset_bits;
                while pos < total {
                    let take = (total - pos).min(8) as u8;
                    out.write(read_bits(&bytes, pos, take), take);
                    pos += take as u64;
                }
                out.finish()
            };
            let view = BiseView::new(&shifted, lb, b.len()).unwrap();
            prop_assert_eq!(view.decode_all(), b);
        }
    }
}
