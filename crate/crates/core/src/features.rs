//! Reward-record schema, feature extraction and standardization.
//!
//! A [`SlotRewardsRecord`] is the raw observation for one proposed block.
//! [`extract_features`] maps it onto the fixed seven-dimensional
//! [`FeatureVector`] (schema `slot-rewards-v1`), and [`Scaler`] z-scores
//! vectors before they reach a classifier.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_SCHEMA_ID: &str = "slot-rewards-v1";
pub const FEATURE_DIM: usize = 7;
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "attestation_fill",
    "redundant_fraction",
    "ordered_fraction",
    "reward_norm",
    "mean_inclusion_delay_norm",
    "sync_fraction",
    "unaggregated_fraction",
];

pub const MAX_ATTESTATIONS: usize = 128;
pub const SYNC_COMMITTEE_SIZE: u64 = 512;
pub const SLOTS_PER_EPOCH: u64 = 32;
pub const STD_FLOOR: f64 = 1e-12;
/// Default reward normalizer.
pub const DEFAULT_IDEAL_REWARD: Gwei = Gwei(10_000_000);

/// Upper bound of each feature; all lower bounds are zero.
pub const FEATURE_UPPER: [f64; FEATURE_DIM] = [1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0];

pub mod idx {
    pub const FILL: usize = 0;
    pub const REDUNDANT: usize = 1;
    pub const ORDERED: usize = 2;
    pub const REWARD: usize = 3;
    pub const DELAY: usize = 4;
    pub const SYNC: usize = 5;
    pub const UNAGGREGATED: usize = 6;
}

/// Amount in Gwei.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gwei(#[serde(with = "quoted_u64")] pub u64);

/// Beacon API encodes integers as decimal strings; accept either form.
pub(crate) mod quoted_u64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw<'a> {
        Int(u64),
        Str(&'a str),
        Owned(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(v),
            Raw::Str(s) => s.parse().map_err(de::Error::custom),
            Raw::Owned(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// An SSZ bitlist: `len` bits, serialized as `0x`-hex with a trailing
/// delimiter bit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitlist {
    len: usize,
    words: Vec<u64>,
}

impl Bitlist {
    pub fn zeros(len: usize) -> Self {
        Bitlist {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Bitlist::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.set(i);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Bitlist) -> bool {
        self.words.iter().enumerate().all(|(i, w)| {
            let o = other.words.get(i).copied().unwrap_or(0);
            w & !o == 0
        })
    }

    pub fn union_with(&mut self, other: &Bitlist) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        self.len = self.len.max(other.len);
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }

    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.len / 8 + 1];
        for i in 0..self.len {
            if self.get(i) {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes[self.len / 8] |= 1 << (self.len % 8);
        format!("0x{}", hex::encode(bytes))
    }

    pub fn from_hex(s: &str) -> std::result::Result<Self, String> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw).map_err(|e| e.to_string())?;
        let last = *bytes.last().ok_or("empty bitlist")?;
        if last == 0 {
            return Err("bitlist missing delimiter bit".into());
        }
        let len = (bytes.len() - 1) * 8 + (7 - last.leading_zeros() as usize);
        let mut out = Bitlist::zeros(len);
        for i in 0..len {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                out.set(i);
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for Bitlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "Bitlist({s})")
    }
}

impl Serialize for Bitlist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Bitlist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Bitlist::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// 32-byte digest, hex encoded on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Root(pub [u8; 32]);

impl Serialize for Root {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(self.0)))
    }
}

impl<'de> Deserialize<'de> for Root {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = s.strip_prefix("0x").unwrap_or(&s);
        let mut out = [0u8; 32];
        hex::decode_to_slice(raw, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Root(out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttestationSummary {
    #[serde(alias = "slot", with = "quoted_u64")]
    pub att_slot: u64,
    #[serde(alias = "index", with = "quoted_u64")]
    pub committee_index: u64,
    pub aggregation_bits: Bitlist,
    #[serde(alias = "beacon_block_root")]
    pub data_root: Root,
}

impl AttestationSummary {
    /// All-zero aggregation bits: permitted but carries no participation.
    pub fn is_degenerate(&self) -> bool {
        self.aggregation_bits.count_ones() == 0
    }
}

/// Consensus client configuration the block was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Default,
    AllSubnets,
    ProposerFlags,
}

impl ModeTag {
    pub const ALL: [ModeTag; 3] = [ModeTag::Default, ModeTag::AllSubnets, ModeTag::ProposerFlags];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeTag::Default => "default",
            ModeTag::AllSubnets => "all_subnets",
            ModeTag::ProposerFlags => "proposer_flags",
        }
    }
}

impl fmt::Display for ModeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModeTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRewardsRecord {
    #[serde(with = "quoted_u64")]
    pub slot: u64,
    #[serde(with = "quoted_u64")]
    pub proposer_index: u64,
    pub total_reward: Gwei,
    pub attestation_reward: Gwei,
    pub sync_reward: Gwei,
    #[serde(default)]
    pub attestations: Vec<AttestationSummary>,
    #[serde(with = "quoted_u64")]
    pub sync_bits_set: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeTag>,
}

impl SlotRewardsRecord {
    pub fn validate(&self) -> Result<()> {
        let parts = self
            .attestation_reward
            .0
            .checked_add(self.sync_reward.0)
            .ok_or_else(|| Error::schema("attestation_reward", "reward sum overflows"))?;
        if parts > self.total_reward.0 {
            return Err(Error::schema(
                "total_reward",
                format!(
                    "attestation_reward + sync_reward = {parts} exceeds total_reward = {}",
                    self.total_reward.0
                ),
            ));
        }
        if self.attestations.len() > MAX_ATTESTATIONS {
            return Err(Error::schema(
                "attestations",
                format!(
                    "{} attestations exceed the limit of {MAX_ATTESTATIONS}",
                    self.attestations.len()
                ),
            ));
        }
        if self.sync_bits_set > SYNC_COMMITTEE_SIZE {
            return Err(Error::schema(
                "sync_bits_set",
                format!(
                    "{} exceeds sync committee size {SYNC_COMMITTEE_SIZE}",
                    self.sync_bits_set
                ),
            ));
        }
        for (i, att) in self.attestations.iter().enumerate() {
            if att.aggregation_bits.is_empty() {
                return Err(Error::schema(
                    format!("attestations[{i}].aggregation_bits"),
                    "bitlist has no bits",
                ));
            }
            if att.att_slot > self.slot {
                return Err(Error::schema(
                    format!("attestations[{i}].att_slot"),
                    format!("attestation slot {} is after block slot {}", att.att_slot, self.slot),
                ));
            }
        }
        Ok(())
    }
}

/// Fixed-order feature vector, schema `slot-rewards-v1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_DIM] = v.try_into().map_err(|_| Error::DimMismatch {
            expected: FEATURE_DIM,
            got: v.len(),
        })?;
        Ok(FeatureVector(arr))
    }

    /// Checks finiteness and the per-feature ranges of unscaled vectors.
    pub fn check_ranges(&self) -> Result<()> {
        for (i, (&v, &hi)) in self.0.iter().zip(&FEATURE_UPPER).enumerate() {
            if !v.is_finite() || !(0.0..=hi).contains(&v) {
                return Err(Error::schema(FEATURE_NAMES[i], format!("value {v} outside [0, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Maps one block's reward record onto the feature schema.
///
/// Redundancy is order dependent: an attestation is redundant when its set
/// bits are covered by the union of earlier attestations with the same
/// `(att_slot, committee_index, data_root)`. An all-zero attestation is
/// therefore always redundant.
pub fn extract_features(record: &SlotRewardsRecord, ideal_reward: Gwei) -> Result<FeatureVector> {
    if ideal_reward.0 == 0 {
        return Err(Error::schema("ideal_reward", "must be positive"));
    }
    record.validate()?;

    let atts = &record.attestations;
    let n = atts.len();
    let denom = n.max(1) as f64;

    let mut seen: HashMap<(u64, u64, Root), Bitlist> = HashMap::with_capacity(n);
    let mut redundant = 0usize;
    for att in atts {
        let key = (att.att_slot, att.committee_index, att.data_root);
        match seen.get_mut(&key) {
            Some(union) => {
                if att.aggregation_bits.is_subset_of(union) {
                    redundant += 1;
                }
                union.union_with(&att.aggregation_bits);
            }
            None => {
                if att.is_degenerate() {
                    redundant += 1;
                }
                seen.insert(key, att.aggregation_bits.clone());
            }
        }
    }

    let ordered = if n < 2 {
        1.0
    } else {
        let pairs = atts.windows(2).filter(|w| w[0].att_slot >= w[1].att_slot).count();
        pairs as f64 / (n - 1) as f64
    };

    let delay = if n == 0 {
        0.0
    } else {
        let total: u64 = atts.iter().map(|a| record.slot - a.att_slot).sum();
        (total as f64 / n as f64 / SLOTS_PER_EPOCH as f64).min(1.0)
    };

    let unaggregated = atts.iter().filter(|a| a.aggregation_bits.count_ones() == 1).count();

    Ok(FeatureVector([
        n as f64 / MAX_ATTESTATIONS as f64,
        redundant as f64 / denom,
        ordered,
        (record.attestation_reward.0 as f64 / ideal_reward.0 as f64).min(2.0),
        delay,
        record.sync_bits_set as f64 / SYNC_COMMITTEE_SIZE as f64,
        unaggregated as f64 / denom,
    ]))
}

/// Per-dimension z-score standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Scaler {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Sample mean and population standard deviation per dimension, with
    /// standard deviations floored at [`STD_FLOOR`].
    pub fn fit(vectors: &[FeatureVector]) -> Result<Self> {
        Self::fit_rows(vectors.iter().map(|v| v.as_slice()))
    }

    pub fn fit_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let dim = rows
            .clone()
            .next()
            .ok_or_else(|| Error::invalid("cannot fit a scaler on zero vectors"))?
            .len();
        let mut sums = vec![0.0; dim];
        let mut n = 0usize;
        for row in rows.clone() {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (s, &x) in sums.iter_mut().zip(row) {
                *s += x;
            }
            n += 1;
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; dim];
        for row in rows {
            for ((s, &x), m) in sq.iter_mut().zip(row).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        let stds = sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd < STD_FLOOR {
                    STD_FLOOR
                } else {
                    sd
                }
            })
            .collect();
        Ok(Scaler { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() != self.stds.len() {
            return Err(Error::DimMismatch {
                expected: self.means.len(),
                got: self.stds.len(),
            });
        }
        if self.stds.iter().any(|s| !s.is_finite() || *s <= 0.0) || self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("scaler has non-finite or non-positive entries"));
        }
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn transform_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(v.len())?;
        self.check_dim(out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (v[i] - self.means[i]) / self.stds[i];
        }
        Ok(())
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.transform_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        let mut out = [0.0; FEATURE_DIM];
        self.transform_into(v.as_slice(), &mut out)?;
        Ok(FeatureVector(out))
    }

    pub fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        Ok(v.iter()
            .enumerate()
            .map(|(i, x)| x * self.stds[i] + self.means[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn att(slot: u64, index: u64, root: u8, bits: &[bool]) -> AttestationSummary {
        AttestationSummary {
            att_slot: slot,
            committee_index: index,
            aggregation_bits: Bitlist::from_bools(bits),
            data_root: Root([root; 32]),
        }
    }

    fn record(slot: u64, atts: Vec<AttestationSummary>) -> SlotRewardsRecord {
        SlotRewardsRecord {
            slot,
            proposer_index: 7,
            total_reward: Gwei(30_000_000),
            attestation_reward: Gwei(20_000_000),
            sync_reward: Gwei(1_000_000),
            attestations: atts,
            sync_bits_set: 256,
            label: None,
            mode: None,
        }
    }

    const IDEAL: Gwei = Gwei(10_000_000);

    #[test]
    fn empty_block() {
        let mut r = record(100, vec![]);
        r.sync_bits_set = 0;
        r.attestation_reward = Gwei(0);
        r.sync_reward = Gwei(0);
        let f = extract_features(&r, IDEAL).unwrap();
        assert_eq!(f.0, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn full_block_of_distinct_attestations() {
        let atts = (0..128)
            .map(|i| att(99 - (i / 64), i % 64, i as u8, &[true, true, false]))
            .collect();
        let f = extract_features(&record(100, atts), IDEAL).unwrap();
        assert_eq!(f.0[idx::FILL], 1.0);
        assert_eq!(f.0[idx::REDUNDANT], 0.0);
        assert_eq!(f.0[idx::ORDERED], 1.0);
    }

    #[test]
    fn fourth_of_four_is_redundant_subset() {
        // #3 repeats #1's (slot, index, root) with a subset of its bits.
        let atts = vec![
            att(98, 1, 0xaa, &[true, true, false, false]),
            att(98, 2, 0xbb, &[false, false, true, true]),
            att(98, 1, 0xaa, &[true, false, false, false]),
            att(97, 1, 0xcc, &[true, false, false, false]),
        ];
        let f = extract_features(&record(100, atts), IDEAL).unwrap();
        // Oracle: only index 2 is a subset of an earlier same-data union.
        assert_eq!(f.0[idx::REDUNDANT], 0.25);
        // Pairs (98,98) (98,98) (98,97) all non-increasing.
        assert_eq!(f.0[idx::ORDERED], 1.0);
        // Delays 2,2,2,3 -> 9/4/32.
        assert!((f.0[idx::DELAY] - 9.0 / 4.0 / 32.0).abs() < 1e-15);
        // Single-bit attestations: #3 and #4.
        assert_eq!(f.0[idx::UNAGGREGATED], 0.5);
        assert_eq!(f.0[idx::REWARD], 2.0);
        assert_eq!(f.0[idx::SYNC], 0.5);
    }

    #[test]
    fn redundancy_uses_union_of_earlier_bits() {
        let atts = vec![
            att(98, 1, 1, &[true, false, false]),
            att(98, 1, 1, &[false, true, false]),
            att(98, 1, 1, &[true, true, false]),
        ];
        let f = extract_features(&record(100, atts), IDEAL).unwrap();
        assert!((f.0[idx::REDUNDANT] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn different_data_root_is_not_redundant() {
        let atts = vec![att(98, 1, 1, &[true, true]), att(98, 1, 2, &[true, false])];
        let f = extract_features(&record(100, atts), IDEAL).unwrap();
        assert_eq!(f.0[idx::REDUNDANT], 0.0);
    }

    #[test]
    fn ascending_slots_reduce_ordered_fraction() {
        let atts = vec![att(96, 0, 1, &[true]), att(97, 0, 2, &[true]), att(95, 0, 3, &[true])];
        let f = extract_features(&record(100, atts), IDEAL).unwrap();
        assert_eq!(f.0[idx::ORDERED], 0.5);
    }

    #[test]
    fn delay_is_capped() {
        let atts = vec![att(0, 0, 1, &[true])];
        let f = extract_features(&record(1000, atts), IDEAL).unwrap();
        assert_eq!(f.0[idx::DELAY], 1.0);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let mut r = record(100, vec![att(101, 0, 1, &[true])]);
        match extract_features(&r, IDEAL) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "attestations[0].att_slot"),
            other => panic!("unexpected {other:?}"),
        }
        r.attestations.clear();
        r.sync_reward = Gwei(20_000_000);
        match extract_features(&r, IDEAL) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "total_reward"),
            other => panic!("unexpected {other:?}"),
        }
        let mut r = record(100, vec![]);
        r.sync_bits_set = 513;
        assert!(matches!(extract_features(&r, IDEAL), Err(Error::Schema { .. })));
        let r = record(100, (0..129).map(|i| att(99, i, 0, &[true])).collect());
        assert!(matches!(extract_features(&r, IDEAL), Err(Error::Schema { .. })));
        let r = record(100, vec![]);
        assert!(extract_features(&r, Gwei(0)).is_err());
    }

    #[test]
    fn bitlist_hex_round_trip() {
        let b = Bitlist::from_bools(&[true, false, true, true, false, false, false, false, true]);
        let h = b.to_hex();
        assert_eq!(h, "0x0d03");
        assert_eq!(Bitlist::from_hex(&h).unwrap(), b);
        assert_eq!(Bitlist::from_hex("0x01").unwrap().len(), 0);
        assert!(Bitlist::from_hex("0x00").is_err());
    }

    #[test]
    fn record_accepts_quoted_and_plain_integers() {
        let json = r#"{"slot":"100","proposer_index":3,"total_reward":"10","attestation_reward":5,
            "sync_reward":"1","sync_bits_set":"4","extra":"ignored",
            "attestations":[{"slot":"99","index":"2","aggregation_bits":"0x07",
            "data_root":"0x0000000000000000000000000000000000000000000000000000000000000000"}]}"#;
        let r: SlotRewardsRecord = serde_json::from_str(json).unwrap();
        assert_eq!(r.attestations[0].att_slot, 99);
        assert_eq!(r.attestations[0].aggregation_bits.len(), 2);
        assert_eq!(r.attestations[0].aggregation_bits.count_ones(), 2);
    }

    #[test]
    fn scaler_constant_feature_hits_floor() {
        let v = vec![FeatureVector([0.3; FEATURE_DIM]); 5];
        let s = Scaler::fit(&v).unwrap();
        assert!(s.stds.iter().all(|&x| x == STD_FLOOR));
        assert_eq!(s.apply(&v[0]).unwrap().0, [0.0; FEATURE_DIM]);
    }

    #[test]
    fn scaler_two_point_symmetry() {
        let mut a = [0.5; FEATURE_DIM];
        let mut b = [0.5; FEATURE_DIM];
        a[0] = 0.0;
        b[0] = 2.0;
        let s = Scaler::fit(&[FeatureVector(a), FeatureVector(b)]).unwrap();
        assert_eq!(s.means[0], 1.0);
        assert_eq!(s.stds[0], 1.0);
    }

    #[test]
    fn scaler_empty_and_mismatch() {
        assert!(Scaler::fit(&[]).is_err());
        let s = Scaler::identity(3);
        assert!(matches!(
            s.apply(&FeatureVector::default()),
            Err(Error::DimMismatch { expected: 3, got: 7 })
        ));
    }

    #[test]
    fn scaler_identity_and_mean_maps_to_zero() {
        let v = FeatureVector([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        assert_eq!(Scaler::identity(FEATURE_DIM).apply(&v).unwrap(), v);
        let s = Scaler {
            means: v.0.to_vec(),
            stds: vec![0.5; FEATURE_DIM],
        };
        assert_eq!(s.apply(&v).unwrap().0, [0.0; FEATURE_DIM]);
    }

    #[test]
    fn scaled_random_set_is_centered() {
        let mut rng = crate::rng::rng(1, 0);
        let vs: Vec<FeatureVector> = (0..1000)
            .map(|_| FeatureVector(std::array::from_fn(|i| rng.random::<f64>() * FEATURE_UPPER[i])))
            .collect();
        let s = Scaler::fit(&vs).unwrap();
        let scaled: Vec<FeatureVector> = vs.iter().map(|v| s.apply(v).unwrap()).collect();
        for d in 0..FEATURE_DIM {
            let mean = scaled.iter().map(|v| v.0[d]).sum::<f64>() / 1000.0;
            let var = scaled.iter().map(|v| (v.0[d] - mean).powi(2)).sum::<f64>() / 1000.0;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        for v in &vs {
            let back = s.inverse(s.apply(v).unwrap().as_slice()).unwrap();
            for (b, x) in back.iter().zip(&v.0) {
                assert!((b - x).abs() < 1e-12);
            }
        }
    }

    fn arb_att() -> impl Strategy<Value = AttestationSummary> {
        (
            90u64..100,
            0u64..3,
            0u8..2,
            proptest::collection::vec(any::<bool>(), 1..12),
        )
            .prop_map(|(s, i, r, bits)| att(s, i, r, &bits))
    }

    fn arb_record() -> impl Strategy<Value = SlotRewardsRecord> {
        (proptest::collection::vec(arb_att(), 0..40), 0u64..=512).prop_map(|(atts, sync)| {
            let mut r = record(100, atts);
            r.sync_bits_set = sync;
            r
        })
    }

    proptest! {
        #[test]
        fn features_stay_in_range_and_are_pure(r in arb_record()) {
            let a = extract_features(&r, IDEAL).unwrap();
            let b = extract_features(&r, IDEAL).unwrap();
            prop_assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert!(a.check_ranges().is_ok());
        }

        #[test]
        fn appending_duplicate_never_lowers_redundancy(r in arb_record(), pick in any::<prop::sample::Index>()) {
            prop_assume!(!r.attestations.is_empty());
            let before = extract_features(&r, IDEAL).unwrap();
            let mut r2 = r.clone();
            let dup = r.attestations[pick.index(r.attestations.len())].clone();
            r2.attestations.push(dup);
            let after = extract_features(&r2, IDEAL).unwrap();
            prop_assert!(after.0[idx::REDUNDANT] >= before.0[idx::REDUNDANT]);
        }

        #[test]
        fn permutation_only_moves_order_dependent_features(r in arb_record(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut r2 = r.clone();
            r2.attestations.shuffle(&mut crate::rng::rng(seed, 0));
            let a = extract_features(&r, IDEAL).unwrap();
            let b = extract_features(&r2, IDEAL).unwrap();
            for d in [idx::FILL, idx::REWARD, idx::DELAY, idx::SYNC, idx::UNAGGREGATED] {
                prop_assert_eq!(a.0[d], b.0[d]);
            }
        }
    }
}
