//! Bloom and counting Bloom filters plus the analytical cardinality
//! estimators used by the two-way Bloomjoin.
//!
//! Hashing uses the double-hashing scheme: two 64-bit hashes are derived
//! from a single keyed mix of the value, and probe `i` lands at
//! `h1 + i*h2 mod m`. Filters with equal `(m, k, seed)` and equal insert
//! multisets are bit-identical, which the sieve layer relies on for
//! deterministic builds.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const BLOOM_MAGIC: &[u8; 4] = b"BSBF";
const COUNTING_MAGIC: &[u8; 4] = b"BSCF";
const FORMAT_VERSION: u32 = 1;

/// splitmix64 finalizer; full-avalanche permutation on u64.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One keyed hash invocation yielding the (h1, h2) pair for double hashing.
/// h2 is forced odd so successive probes never collapse onto one cell.
#[inline]
fn hash_pair(value: i64, seed: u64) -> (u64, u64) {
    let h1 = mix64((value as u64) ^ mix64(seed));
    let h2 = mix64(h1 ^ 0x9e37_79b9_7f4a_7c15) | 1;
    (h1, h2)
}

#[inline]
fn cell(h1: u64, h2: u64, i: u32, m: u64) -> usize {
    (h1.wrapping_add(h2.wrapping_mul(i as u64)) % m) as usize
}

/// Bit-array membership sketch. No false negatives, ever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    m: u64,
    k: u32,
    seed: u64,
    bits: Vec<u8>,
    n_inserted: u64,
}

impl BloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> BloomFilter {
        assert!(m >= 1 && k >= 1);
        BloomFilter {
            m,
            k,
            seed,
            bits: vec![0u8; ((m + 7) / 8) as usize],
            n_inserted: 0,
        }
    }

    /// Sized via [`size_for_target`] for `n` expected insertions at false
    /// positive rate `p`.
    pub fn with_target(n: u64, p: f64, seed: u64) -> BloomFilter {
        let (m, k) = size_for_target(n, p);
        BloomFilter::new(m, k, seed)
    }

    pub fn bits(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    pub fn insert(&mut self, value: i64) {
        let (h1, h2) = hash_pair(value, self.seed);
        for i in 0..self.k {
            let c = cell(h1, h2, i, self.m);
            self.bits[c >> 3] |= 1 << (c & 7);
        }
        self.n_inserted += 1;
    }

    pub fn contains(&self, value: i64) -> bool {
        let (h1, h2) = hash_pair(value, self.seed);
        (0..self.k).all(|i| {
            let c = cell(h1, h2, i, self.m);
            self.bits[c >> 3] & (1 << (c & 7)) != 0
        })
    }

    pub fn set_bit_count(&self) -> u64 {
        self.bits.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// (1 - e^(-k n / m))^k with n = inserts so far.
    pub fn theoretical_fpr(&self) -> f64 {
        let exponent = -(self.k as f64) * (self.n_inserted as f64) / (self.m as f64);
        (1.0 - exponent.exp()).powi(self.k as i32)
    }

    /// Serialized size in bytes, header included.
    pub fn byte_size(&self) -> u64 {
        36 + self.bits.len() as u64
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, BLOOM_MAGIC, self.m, self.k, self.seed, self.n_inserted)?;
        w.write_all(&self.bits)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<BloomFilter> {
        let (m, k, seed, n_inserted) = read_header(r, BLOOM_MAGIC)?;
        let mut bits = vec![0u8; ((m + 7) / 8) as usize];
        r.read_exact(&mut bits)
            .map_err(|_| Error::Format("truncated filter bit array".into()))?;
        Ok(BloomFilter {
            m,
            k,
            seed,
            bits,
            n_inserted,
        })
    }
}

/// Bloom filter with 8-bit saturating counters per cell, enabling deletes.
/// A cell that reaches 255 sticks there and is never decremented, so
/// overflow can only cost tightness, not correctness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingBloomFilter {
    m: u64,
    k: u32,
    seed: u64,
    counters: Vec<u8>,
    n_inserted: u64,
}

impl CountingBloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> CountingBloomFilter {
        assert!(m >= 1 && k >= 1);
        CountingBloomFilter {
            m,
            k,
            seed,
            counters: vec![0u8; m as usize],
            n_inserted: 0,
        }
    }

    pub fn with_target(n: u64, p: f64, seed: u64) -> CountingBloomFilter {
        let (m, k) = size_for_target(n, p);
        CountingBloomFilter::new(m, k, seed)
    }

    pub fn bits(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    pub fn insert(&mut self, value: i64) {
        let (h1, h2) = hash_pair(value, self.seed);
        for i in 0..self.k {
            let c = cell(h1, h2, i, self.m);
            if self.counters[c] < u8::MAX {
                self.counters[c] += 1;
            }
        }
        self.n_inserted += 1;
    }

    pub fn contains(&self, value: i64) -> bool {
        let (h1, h2) = hash_pair(value, self.seed);
        (0..self.k).all(|i| self.counters[cell(h1, h2, i, self.m)] > 0)
    }

    /// Decrements the value's counters. Rejected when the value is not
    /// present; saturated counters are left untouched.
    pub fn delete(&mut self, value: i64) -> Result<()> {
        if !self.contains(value) {
            return Err(Error::Param(format!(
                "delete of value {value} not contained in filter"
            )));
        }
        let (h1, h2) = hash_pair(value, self.seed);
        for i in 0..self.k {
            let c = cell(h1, h2, i, self.m);
            if self.counters[c] < u8::MAX {
                self.counters[c] -= 1;
            }
        }
        Ok(())
    }

    pub fn byte_size(&self) -> u64 {
        36 + self.counters.len() as u64
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(
            w,
            COUNTING_MAGIC,
            self.m,
            self.k,
            self.seed,
            self.n_inserted,
        )?;
        w.write_all(&self.counters)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<CountingBloomFilter> {
        let (m, k, seed, n_inserted) = read_header(r, COUNTING_MAGIC)?;
        let mut counters = vec![0u8; m as usize];
        r.read_exact(&mut counters)
            .map_err(|_| Error::Format("truncated filter counter array".into()))?;
        Ok(CountingBloomFilter {
            m,
            k,
            seed,
            counters,
            n_inserted,
        })
    }
}

fn write_header(
    w: &mut impl Write,
    magic: &[u8; 4],
    m: u64,
    k: u32,
    seed: u64,
    n_inserted: u64,
) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&m.to_le_bytes())?;
    w.write_all(&k.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    w.write_all(&n_inserted.to_le_bytes())?;
    Ok(())
}

// Header layout, little-endian: magic(4) version(4) m(8) k(4) seed(8)
// n_inserted(8) = 36 bytes, then the raw bit/counter array.
fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<(u64, u32, u64, u64)> {
    let mut buf = [0u8; 36];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated filter header".into()))?;
    if &buf[0..4] != magic {
        return Err(Error::Format("bad filter magic".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported filter version {version}")));
    }
    let m = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    let k = u32::from_le_bytes(buf[16..20].try_into().unwrap());
    let seed = u64::from_le_bytes(buf[20..28].try_into().unwrap());
    let n_inserted = u64::from_le_bytes(buf[28..36].try_into().unwrap());
    if m == 0 || k == 0 {
        return Err(Error::Format("filter header with zero m or k".into()));
    }
    Ok((m, k, seed, n_inserted))
}

/// Expected number of set bits after `d` distinct single-hash inserts into
/// an `f`-bit filter: `F(1 - e^(-D/F))`. Models one hash per value; the
/// general filter's `k` is configurable, this estimator is not.
pub fn estimate_bits_set(f: u64, d: u64) -> f64 {
    assert!(f >= 1);
    let f = f as f64;
    f * (1.0 - (-(d as f64) / f).exp())
}

/// Inputs for [`estimate_bloomjoin_cardinality`].
#[derive(Debug, Clone, Copy)]
pub struct BloomjoinCardinalityInputs {
    /// Tuples of T with at least one join partner in S.
    pub sc_t: u64,
    /// Cardinality of T.
    pub c_t: u64,
    /// Distinct join values in T.
    pub d_t: u64,
    /// Distinct join values in S.
    pub d_s: u64,
    /// Filter size in bits.
    pub f: u64,
}

/// Expected size of the filtered tuple stream in a two-way Bloomjoin:
/// `BC = SC_T + bits_S * (1 - e^(-alpha*D_T/F))` with
/// `alpha = 1 - SC_T/C_T`. Assumes a k=1 filter.
pub fn estimate_bloomjoin_cardinality(inputs: &BloomjoinCardinalityInputs) -> Result<f64> {
    let BloomjoinCardinalityInputs { sc_t, c_t, d_t, d_s, f } = *inputs;
    if c_t == 0 {
        return Err(Error::Param(
            "bloomjoin estimate undefined for empty T (C_T = 0)".into(),
        ));
    }
    if sc_t > c_t {
        return Err(Error::Param(format!(
            "semijoin cardinality {sc_t} exceeds cardinality {c_t}"
        )));
    }
    if f == 0 {
        return Err(Error::Param("filter size F must be at least 1".into()));
    }
    let alpha = 1.0 - sc_t as f64 / c_t as f64;
    let bits_s = estimate_bits_set(f, d_s);
    Ok(sc_t as f64 + bits_s * (1.0 - (-alpha * d_t as f64 / f as f64).exp()))
}

/// Standard Bloom sizing: `m = ceil(-n ln p / (ln 2)^2)`,
/// `k = max(1, round((m/n) ln 2))`.
pub fn size_for_target(n: u64, p: f64) -> (u64, u32) {
    assert!(n >= 1, "expected insertions must be at least 1");
    assert!(p > 0.0 && p < 1.0, "target FPR must be in (0, 1)");
    let ln2 = std::f64::consts::LN_2;
    let m = (-(n as f64) * p.ln() / (ln2 * ln2)).ceil() as u64;
    let m = m.max(1);
    let k = ((m as f64 / n as f64) * ln2).round() as i64;
    (m, k.max(1) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn insert_then_contains() {
        let mut f = BloomFilter::new(1024, 3, 1);
        assert!(!f.contains(42));
        f.insert(42);
        assert!(f.contains(42));
    }

    #[test]
    fn empty_filter_contains_nothing() {
        let f = BloomFilter::new(4096, 4, 7);
        for v in -1000..1000 {
            assert!(!f.contains(v));
        }
    }

    #[test]
    fn double_insert_is_bit_idempotent() {
        let mut once = BloomFilter::new(512, 3, 9);
        once.insert(42);
        let mut twice = BloomFilter::new(512, 3, 9);
        twice.insert(42);
        twice.insert(42);
        assert_eq!(once.bits, twice.bits);
        assert_eq!(twice.n_inserted(), 2);
    }

    #[test]
    fn measured_fpr_tracks_theory() {
        // 1..1000 into m=10000, k=7; probe 10^5 absent values.
        let mut f = BloomFilter::new(10_000, 7, 0xfeed);
        for v in 1..=1000 {
            f.insert(v);
        }
        let mut fp = 0u64;
        let probes = 100_000;
        for v in 1_000_001..=1_000_000 + probes {
            if f.contains(v) {
                fp += 1;
            }
        }
        let measured = fp as f64 / probes as f64;
        let theory = f.theoretical_fpr();
        assert!(
            measured >= 0.5 * theory && measured <= 2.0 * theory,
            "measured {measured} vs theoretical {theory}"
        );
    }

    #[test]
    fn set_bit_count_is_bounded() {
        let mut f = BloomFilter::new(1000, 5, 3);
        for v in 0..100 {
            f.insert(v);
        }
        assert!(f.set_bit_count() <= 5 * 100);
        assert!(f.set_bit_count() <= 1000);
    }

    #[test]
    fn measured_bits_match_estimate_for_k1() {
        // Binomial concentration: within 5 sigma of F(1 - e^(-D/F)).
        let f_bits = 10_000u64;
        let d = 5_000u64;
        let mut f = BloomFilter::new(f_bits, 1, 0xabc);
        for v in 0..d as i64 {
            f.insert(v);
        }
        let expected = estimate_bits_set(f_bits, d);
        let q = expected / f_bits as f64;
        let sigma = (f_bits as f64 * q * (1.0 - q)).sqrt();
        let measured = f.set_bit_count() as f64;
        assert!(
            (measured - expected).abs() <= 5.0 * sigma,
            "bits {measured} vs expected {expected} (sigma {sigma})"
        );
    }

    #[test]
    fn estimate_bits_set_examples() {
        assert_eq!(estimate_bits_set(1000, 0), 0.0);
        let v = estimate_bits_set(1000, 500);
        assert!((v - 393.4693402873666).abs() < 1e-9, "got {v}");
        // Monotone in D, bounded by F.
        let mut prev = 0.0;
        for d in [1, 10, 100, 1_000, 10_000, 1_000_000] {
            let b = estimate_bits_set(1000, d);
            assert!(b >= prev && b <= 1000.0);
            prev = b;
        }
        assert!(estimate_bits_set(1000, 1_000_000_000) > 999.999);
    }

    #[test]
    fn bloomjoin_estimate_examples() {
        // All of T matches: alpha = 0, BC = SC_T exactly.
        let all_match = BloomjoinCardinalityInputs {
            sc_t: 200,
            c_t: 200,
            d_t: 200,
            d_s: 150,
            f: 1000,
        };
        assert_eq!(estimate_bloomjoin_cardinality(&all_match).unwrap(), 200.0);

        let mixed = BloomjoinCardinalityInputs {
            sc_t: 100,
            c_t: 200,
            d_t: 200,
            d_s: 150,
            f: 1000,
        };
        let bc = estimate_bloomjoin_cardinality(&mixed).unwrap();
        assert!((bc - 113.25538861038749).abs() < 1e-9, "got {bc}");

        // Large F drives BC down to SC_T.
        let huge_f = BloomjoinCardinalityInputs {
            f: 1 << 40,
            ..mixed
        };
        let bc = estimate_bloomjoin_cardinality(&huge_f).unwrap();
        assert!((bc - 100.0).abs() < 1e-3);

        let empty_t = BloomjoinCardinalityInputs { c_t: 0, ..mixed };
        assert!(estimate_bloomjoin_cardinality(&empty_t).is_err());
    }

    #[test]
    fn bloomjoin_estimate_monotonicity() {
        let base = BloomjoinCardinalityInputs {
            sc_t: 100,
            c_t: 400,
            d_t: 300,
            d_s: 250,
            f: 2000,
        };
        // Non-increasing in F.
        let mut prev = f64::INFINITY;
        for f in [500, 1000, 2000, 4000, 8000, 16000] {
            let bc = estimate_bloomjoin_cardinality(&BloomjoinCardinalityInputs { f, ..base })
                .unwrap();
            assert!(bc <= prev + 1e-12);
            prev = bc;
        }
        // Non-decreasing in alpha*D_T (vary D_T with alpha fixed).
        let mut prev = 0.0;
        for d_t in [50, 100, 200, 400, 800] {
            let bc = estimate_bloomjoin_cardinality(&BloomjoinCardinalityInputs { d_t, ..base })
                .unwrap();
            assert!(bc >= prev - 1e-12);
            prev = bc;
        }
    }

    #[test]
    fn sizing_formula_examples() {
        assert_eq!(size_for_target(1000, 0.01), (9586, 7));
        assert_eq!(size_for_target(1, 0.5), (2, 1));
        // p close to 1 still yields m >= 1, k >= 1.
        let (m, k) = size_for_target(10, 0.999);
        assert!(m >= 1);
        assert_eq!(k, 1);
    }

    #[test]
    fn counting_insert_delete_pairs() {
        let mut f = CountingBloomFilter::new(1024, 4, 11);
        f.insert(5);
        assert!(f.contains(5));
        f.delete(5).unwrap();
        assert!(!f.contains(5));

        f.insert(9);
        f.insert(9);
        f.delete(9).unwrap();
        assert!(f.contains(9));

        assert!(f.delete(12345).is_err());
    }

    #[test]
    fn counting_matches_multiset_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut f = CountingBloomFilter::new(4096, 4, 5);
        let mut oracle: HashMap<i64, u32> = HashMap::new();
        for _ in 0..2000 {
            let v = rng.gen_range(0..50i64);
            let count = oracle.entry(v).or_insert(0);
            if *count > 0 && rng.gen_bool(0.5) {
                f.delete(v).unwrap();
                *count -= 1;
            } else {
                f.insert(v);
                *count += 1;
            }
        }
        for (v, count) in &oracle {
            if *count > 0 {
                assert!(f.contains(*v), "value {v} with count {count} missing");
            }
        }
    }

    #[test]
    fn saturated_cells_stay_saturated() {
        let mut f = CountingBloomFilter::new(8, 1, 1);
        for _ in 0..300 {
            f.insert(7);
        }
        // The cell saturated at 255; deletes must not clear it.
        for _ in 0..300 {
            let _ = f.delete(7);
        }
        assert!(f.contains(7));
    }

    #[test]
    fn serialization_layout_is_stable() {
        let mut f = BloomFilter::new(16, 1, 0);
        f.insert(3);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"BSBF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 16);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 36 + 2);
        // Bit i lives at bit (i % 8) of byte (i / 8).
        let payload = &buf[36..];
        let set: Vec<usize> = (0..16)
            .filter(|i| payload[i / 8] & (1 << (i % 8)) != 0)
            .collect();
        assert_eq!(set.len(), 1);
        let back = BloomFilter::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn counting_serialization_round_trip() {
        let mut f = CountingBloomFilter::new(64, 3, 42);
        for v in 0..10 {
            f.insert(v);
        }
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let back = CountingBloomFilter::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
        // Counting image does not parse as a plain filter.
        assert!(BloomFilter::read_from(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn no_false_negatives(values in proptest::collection::hash_set(any::<i64>(), 1..500)) {
            let mut f = BloomFilter::with_target(values.len() as u64, 0.01, 17);
            for v in &values {
                f.insert(*v);
            }
            for v in &values {
                prop_assert!(f.contains(*v));
            }
        }

        #[test]
        fn determinism_up_to_multiset(mut values in proptest::collection::vec(any::<i64>(), 1..200), seed in any::<u64>()) {
            let mut a = BloomFilter::new(2048, 4, seed);
            for v in &values {
                a.insert(*v);
            }
            // Same multiset, different order.
            values.reverse();
            let mut b = BloomFilter::new(2048, 4, seed);
            for v in &values {
                b.insert(*v);
            }
            prop_assert_eq!(&a, &b);
            let probe: HashSet<i64> = values.iter().map(|v| v ^ 0x55aa).collect();
            for p in probe {
                prop_assert_eq!(a.contains(p), b.contains(p));
            }
        }
    }
}
