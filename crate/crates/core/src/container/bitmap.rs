/// A bitmap with constant-time rank, built from LSB-first bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankBitmap {
    len: usize,
    words: Vec<u64>,
    /// Set bits before each word.
    cum: Vec<u32>,
}

impl RankBitmap {
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() * 8 >= len);
        let mut words: Vec<u64> = bytes
            .chunks(8)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(w)
            })
            .take(len.div_ceil(64))
            .collect();
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        Self::from_words(words, len)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[i / 64] |= 1 << (i % 64);
        }
        Self::from_words(words, bits.len())
    }

    fn from_words(words: Vec<u64>, len: usize) -> Self {
        let mut cum = Vec::with_capacity(words.len() + 1);
        let mut acc = 0u32;
        for w in &words {
            cum.push(acc);
            acc += w.count_ones();
        }
        cum.push(acc);
        RankBitmap { len, words, cum }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Set bits strictly before `i`.
    #[inline]
    pub fn rank(&self, i: usize) -> usize {
        let (w, b) = (i / 64, i % 64);
        let below = if b == 0 { 0 } else { (self.words[w] & ((1u64 << b) - 1)).count_ones() };
        self.cum[w] as usize + below as usize
    }

    pub fn count_ones(&self) -> usize {
        *self.cum.last().unwrap_or(&0) as usize
    }

    /// LSB-first bytes, `ceil(len / 8)` long.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn heap_bytes(&self) -> usize {
        self.words.len() * 8 + self.cum.len() * 4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rank_matches_prefix_count(bits in prop::collection::vec(any::<bool>(), 0..500)) {
            let bm = RankBitmap::from_bits(&bits);
            let again = RankBitmap::from_bytes(&bm.to_bytes(), bits.len());
            prop_assert_eq!(&bm, &again);
            let mut acc = 0;
            for (i, &b) in bits.iter().enumerate() {
                prop_assert_eq!(bm.rank(i), acc);
                prop_assert_eq!(bm.get(i), b);
                acc += b as usize;
            }
            prop_assert_eq!(bm.count_ones(), acc);
        }
    }

    #[test]
    fn stray_bits_past_len_are_ignored() {
        let bm = RankBitmap::from_bytes(&[0xff], 3);
        assert_eq!(bm.count_ones(), 3);
        assert_eq!(bm.to_bytes(), vec![0b111]);
    }
}
