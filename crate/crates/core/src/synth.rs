//! Seeded synthetic data: per-client Gaussian feature profiles, optionally
//! rendered as raw reward records. Synthetic only; the default profiles make
//! no claim about how real clients behave.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{LabelScheme, LabeledDataset, DEFAULT_CLIENTS};
use crate::error::{Error, Result};
use crate::features::{
    idx, AttestationSummary, Bitlist, FeatureVector, Gwei, ModeTag, Root, SlotRewardsRecord, FEATURE_DIM,
    FEATURE_UPPER, MAX_ATTESTATIONS, SLOTS_PER_EPOCH, SYNC_COMMITTEE_SIZE,
};
use crate::rng::{self, tags, Rng};

/// Separation used for the "clearly separable" benchmark setting.
pub const SEPARATION_HIGH: f64 = 3.0;

const COMMITTEE_SIZE: usize = 64;
const SYNC_REWARD_PER_BIT: u64 = 1_500;
const FIRST_SLOT: u64 = 9_000_000;

/// Additive change of the three packing-behaviour means under a mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeShift {
    #[serde(default)]
    pub redundant: f64,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub ordered: f64,
}

impl ModeShift {
    fn apply(&self, v: &mut [f64; FEATURE_DIM]) {
        v[idx::REDUNDANT] += self.redundant;
        v[idx::DELAY] += self.delay;
        v[idx::ORDERED] += self.ordered;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub client: String,
    pub feature_means: [f64; FEATURE_DIM],
    pub feature_stds: [f64; FEATURE_DIM],
    /// Missing modes (and `default`, always) have no shift.
    #[serde(default)]
    pub mode_shift: BTreeMap<ModeTag, ModeShift>,
}

impl ClientProfile {
    pub fn shift(&self, mode: ModeTag) -> ModeShift {
        if mode == ModeTag::Default {
            return ModeShift::default();
        }
        self.mode_shift.get(&mode).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub profiles: Vec<ClientProfile>,
    /// Scales every client's distance from the centroid of the default-mode
    /// means; shifted means are scaled the same way.
    pub separation: f64,
    pub per_class: usize,
    pub seed: u64,
}

fn in_range(v: &[f64; FEATURE_DIM]) -> Option<usize> {
    v.iter()
        .zip(FEATURE_UPPER)
        .position(|(&x, hi)| !(x.is_finite() && (0.0..=hi).contains(&x)))
}

impl GeneratorConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: GeneratorConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("generator configs serialize")
    }

    pub fn class_names(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.client.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.len() < 2 {
            return Err(Error::invalid("at least two client profiles are required"));
        }
        if self.per_class == 0 {
            return Err(Error::invalid("per_class must be at least 1"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid(format!(
                "separation {} must be finite and >= 0",
                self.separation
            )));
        }
        let names: BTreeSet<_> = self.profiles.iter().map(|p| p.client.as_str()).collect();
        if names.len() != self.profiles.len() {
            return Err(Error::invalid("client names in profiles must be distinct"));
        }
        for p in &self.profiles {
            if let Some(i) = in_range(&p.feature_means) {
                return Err(Error::invalid(format!(
                    "profile {}: mean of feature {i} out of range",
                    p.client
                )));
            }
            if let Some(i) = p.feature_stds.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(Error::invalid(format!(
                    "profile {}: std of feature {i} must be >= 0",
                    p.client
                )));
            }
        }
        for mode in ModeTag::ALL {
            self.effective_means(mode)?;
        }
        Ok(())
    }

    fn centroid(&self) -> [f64; FEATURE_DIM] {
        let n = self.profiles.len() as f64;
        std::array::from_fn(|i| self.profiles.iter().map(|p| p.feature_means[i]).sum::<f64>() / n)
    }

    /// Per-client sampling means after separation scaling and mode shift.
    pub fn effective_means(&self, mode: ModeTag) -> Result<Vec<[f64; FEATURE_DIM]>> {
        let centroid = self.centroid();
        self.profiles
            .iter()
            .map(|p| {
                let mut m = p.feature_means;
                p.shift(mode).apply(&mut m);
                let out: [f64; FEATURE_DIM] =
                    std::array::from_fn(|i| centroid[i] + self.separation * (m[i] - centroid[i]));
                match in_range(&out) {
                    Some(i) => Err(Error::invalid(format!(
                        "profile {} in mode {mode}: effective mean of feature {i} is {} (outside its range)",
                        p.client, out[i]
                    ))),
                    None => Ok(out),
                }
            })
            .collect()
    }

    /// Target feature vectors per client, in profile order.
    fn sample_targets(&self, mode: ModeTag) -> Result<Vec<Vec<FeatureVector>>> {
        self.validate()?;
        let means = self.effective_means(mode)?;
        let base = rng::derive_seed(self.seed, tags::SYNTH);
        Ok(self
            .profiles
            .iter()
            .zip(means)
            .enumerate()
            .map(|(c, (p, mean))| {
                // Keyed by client only, so a zero shift reproduces samples across modes.
                let mut r = rng::rng(base, c as u64);
                (0..self.per_class)
                    .map(|_| {
                        FeatureVector(std::array::from_fn(|i| {
                            let z: f64 = r.sample(StandardNormal);
                            (mean[i] + p.feature_stds[i] * z).clamp(0.0, FEATURE_UPPER[i])
                        }))
                    })
                    .collect()
            })
            .collect())
    }
}

/// Six clients whose default means sit on distinct corners of a small
/// lattice. Under `all_subnets` every client but teku packs more redundant
/// attestations; nimbus moves onto grandine's default redundancy and delay.
pub fn default_profiles() -> Vec<ClientProfile> {
    const CENTER: [f64; FEATURE_DIM] = [0.6, 0.3, 0.55, 1.0, 0.35, 0.75, 0.3];
    const UNIT: f64 = 0.05;
    // fill, redundant, ordered, reward, delay, sync, unaggregated
    let codes: [[f64; FEATURE_DIM]; 6] = [
        [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, -1.0, 1.0],
        [-1.0, 0.0, -1.0, -1.0, 1.0, 1.0, 0.0],
        [1.0, -1.0, -1.0, 0.0, -1.0, 0.0, -1.0],
        [0.0, -1.0, 1.0, -1.0, -1.0, -1.0, 0.0],
        [-1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0],
    ];
    // (redundant, delay, ordered) in units
    let shifts = [
        (1.5, 0.0, -1.5),
        (1.5, 0.0, 0.0),
        (1.5, 0.0, 1.5),
        (2.0, 2.0, 0.0),
        (1.0, 1.0, 0.0),
        (0.0, 0.0, 0.0),
    ];
    let stds = [0.030, 0.032, 0.028, 0.031, 0.034, 0.029];
    DEFAULT_CLIENTS
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (r, d, o) = shifts[c];
            let mut mode_shift = BTreeMap::new();
            if (r, d, o) != (0.0, 0.0, 0.0) {
                mode_shift.insert(
                    ModeTag::AllSubnets,
                    ModeShift {
                        redundant: r * UNIT,
                        delay: d * UNIT,
                        ordered: o * UNIT,
                    },
                );
            }
            ClientProfile {
                client: name.to_string(),
                feature_means: std::array::from_fn(|i| CENTER[i] + codes[c][i] * UNIT),
                feature_stds: [stds[c]; FEATURE_DIM],
                mode_shift,
            }
        })
        .collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            profiles: default_profiles(),
            separation: 1.0,
            per_class: 1000,
            seed: 0,
        }
    }
}

/// Feature-space dataset: `per_class` vectors per client, tagged with `mode`.
pub fn generate(config: &GeneratorConfig, mode: ModeTag) -> Result<LabeledDataset> {
    let targets = config.sample_targets(mode)?;
    let mut ds = LabeledDataset::empty(LabelScheme::Client, config.class_names());
    for (c, vs) in targets.into_iter().enumerate() {
        ds.labels.extend(std::iter::repeat_n(c, vs.len()));
        ds.vectors.extend(vs);
    }
    ds.modes = vec![mode; ds.len()];
    ds.validate()?;
    Ok(ds)
}

/// Raw reward records whose extracted features approximate the samples
/// [`generate`] would produce with the same config.
pub fn generate_records(config: &GeneratorConfig, mode: ModeTag, ideal_reward: Gwei) -> Result<Vec<SlotRewardsRecord>> {
    let targets = config.sample_targets(mode)?;
    let base = rng::derive_seed(config.seed, tags::RECORDS);
    let mut out = Vec::with_capacity(config.per_class * targets.len());
    for (c, vs) in targets.iter().enumerate() {
        let mut r = rng::rng(base, c as u64);
        for (i, t) in vs.iter().enumerate() {
            let slot = FIRST_SLOT + (c * config.per_class + i) as u64;
            let mut rec = record_for_target(t, slot, ideal_reward, &mut r)?;
            rec.label = Some(config.profiles[c].client.clone());
            rec.mode = Some(mode);
            out.push(rec);
        }
    }
    Ok(out)
}

fn round(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn random_bits(r: &mut Rng, count: usize) -> Bitlist {
    let mut pos: Vec<usize> = (0..COMMITTEE_SIZE).collect();
    pos.shuffle(r);
    let mut b = Bitlist::zeros(COMMITTEE_SIZE);
    pos[..count].iter().for_each(|&i| b.set(i));
    b
}

fn subset_bits(r: &mut Rng, of: &Bitlist) -> Bitlist {
    let mut set: Vec<usize> = (0..of.len()).filter(|&i| of.get(i)).collect();
    let keep = if set.len() <= 2 {
        set.len()
    } else {
        r.random_range(2..=set.len())
    };
    set.shuffle(r);
    let mut b = Bitlist::zeros(of.len());
    set[..keep].iter().for_each(|&i| b.set(i));
    b
}

/// Orders slot values so that about `ascents` adjacent pairs increase.
fn arrange(mut slots: Vec<u64>, ascents: usize) -> Vec<u64> {
    let n = slots.len();
    if n < 2 || ascents == 0 {
        slots.sort_unstable_by(|a, b| b.cmp(a));
        return slots;
    }
    let deal = |sorted: &[u64], m: usize| -> Vec<u64> {
        (0..m).flat_map(|j| sorted.iter().skip(j).step_by(m).copied()).collect()
    };
    if 2 * ascents < n {
        // m non-increasing chains; each boundary between chains is an ascent.
        slots.sort_unstable_by(|a, b| b.cmp(a));
        deal(&slots, ascents + 1)
    } else {
        // m strictly increasing chains; boundaries are non-ascents.
        slots.sort_unstable();
        let mut max_mult = 1;
        let mut run = 1;
        for w in slots.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            max_mult = max_mult.max(run);
        }
        let m = (n - ascents.min(n - 1)).max(max_mult);
        deal(&slots, m)
    }
}

/// Builds one block record whose features land near `target`.
pub fn record_for_target(
    target: &FeatureVector,
    slot: u64,
    ideal_reward: Gwei,
    r: &mut Rng,
) -> Result<SlotRewardsRecord> {
    target.check_ranges()?;
    let t = &target.0;
    let n = round(t[idx::FILL] * MAX_ATTESTATIONS as f64).min(MAX_ATTESTATIONS);
    let n_red = if n == 0 {
        0
    } else {
        round(t[idx::REDUNDANT] * n as f64).min(n)
    };
    let n_base = n - n_red;
    let n_single = round(t[idx::UNAGGREGATED] * n as f64).min(n_base);

    // Keys: one per base attestation. Copies attach to aggregated keys when
    // any exist so they do not inflate the unaggregated share.
    let mut mult = vec![1usize; n_base];
    if n_base > 0 {
        let aggregated: Vec<usize> = (n_single..n_base).collect();
        let pool: Vec<usize> = if aggregated.is_empty() {
            (0..n_base).collect()
        } else {
            aggregated
        };
        for _ in 0..n_red {
            mult[pool[r.random_range(0..pool.len())]] += 1;
        }
    }

    // Inclusion delays: spread around the target mean, then nudged so the
    // attestation-weighted mean matches.
    let max_delay = SLOTS_PER_EPOCH.min(slot.max(1)) as f64;
    let d = (t[idx::DELAY] * SLOTS_PER_EPOCH as f64).clamp(1.0, max_delay);
    let w = (d - 1.0).min(max_delay - d).min(12.0);
    let mut delays: Vec<u64> = (0..n_base)
        .map(|_| (d + r.random_range(-w..=w)).round().clamp(1.0, max_delay) as u64)
        .collect();
    if n_base > 0 {
        let goal = (d * n as f64).round() as i64;
        for _ in 0..4 * n {
            let total: i64 = delays.iter().zip(&mult).map(|(&x, &m)| (x * m as u64) as i64).sum();
            let diff = goal - total;
            if diff == 0 {
                break;
            }
            let up = diff > 0;
            let movable: Vec<usize> = (0..n_base)
                .filter(|&k| {
                    mult[k] as i64 <= diff.abs()
                        && if up {
                            (delays[k] as f64) < max_delay
                        } else {
                            delays[k] > 1
                        }
                })
                .collect();
            let Some(&k) = movable.get(r.random_range(0..movable.len().max(1))) else {
                break;
            };
            if up {
                delays[k] += 1;
            } else {
                delays[k] -= 1;
            }
        }
    }

    let mut attestations = Vec::with_capacity(n);
    if n_base == 0 {
        // Nothing to duplicate: every attestation is an empty aggregate.
        let att_slot = slot - round(d) as u64;
        for i in 0..n {
            attestations.push(AttestationSummary {
                att_slot,
                committee_index: i as u64,
                aggregation_bits: Bitlist::zeros(COMMITTEE_SIZE),
                data_root: root_for(att_slot, i as u64),
            });
        }
    } else {
        let mut committees: BTreeMap<u64, u64> = BTreeMap::new();
        // Per slot value: keys in base order, each with its base bits and copy count.
        let mut by_slot: BTreeMap<u64, Vec<(u64, Bitlist, usize)>> = BTreeMap::new();
        for k in 0..n_base {
            let att_slot = slot - delays[k];
            let ci = committees.entry(att_slot).or_insert(0);
            let bits = if k < n_single {
                random_bits(r, 1)
            } else {
                let c = r.random_range(2..=COMMITTEE_SIZE * 3 / 4);
                random_bits(r, c)
            };
            by_slot.entry(att_slot).or_default().push((*ci, bits, mult[k] - 1));
            *ci += 1;
        }
        let slots: Vec<u64> = by_slot
            .iter()
            .flat_map(|(&s, keys)| std::iter::repeat_n(s, keys.iter().map(|k| k.2 + 1).sum()))
            .collect();
        let ascents = round((1.0 - t[idx::ORDERED]) * (n as f64 - 1.0));
        // Within each slot value, bases come first, so every copy follows its base.
        let mut queues: BTreeMap<u64, Vec<(u64, Bitlist, bool)>> = by_slot
            .into_iter()
            .map(|(s, keys)| {
                let mut q: Vec<_> = keys.iter().map(|(ci, b, _)| (*ci, b.clone(), true)).collect();
                for (ci, b, copies) in &keys {
                    q.extend((0..*copies).map(|_| (*ci, b.clone(), false)));
                }
                q.reverse();
                (s, q)
            })
            .collect();
        for s in arrange(slots, ascents) {
            let (ci, bits, is_base) = queues.get_mut(&s).and_then(Vec::pop).expect("slot multiset matches");
            attestations.push(AttestationSummary {
                att_slot: s,
                committee_index: ci,
                aggregation_bits: if is_base { bits } else { subset_bits(r, &bits) },
                data_root: root_for(s, ci),
            });
        }
    }

    let sync_bits_set = (round(t[idx::SYNC] * SYNC_COMMITTEE_SIZE as f64) as u64).min(SYNC_COMMITTEE_SIZE);
    let attestation_reward = (t[idx::REWARD] * ideal_reward.0 as f64).round() as u64;
    let sync_reward = sync_bits_set * SYNC_REWARD_PER_BIT;
    Ok(SlotRewardsRecord {
        slot,
        proposer_index: r.random_range(0..1_000_000),
        total_reward: Gwei(attestation_reward + sync_reward),
        attestation_reward: Gwei(attestation_reward),
        sync_reward: Gwei(sync_reward),
        attestations,
        sync_bits_set,
        label: None,
        mode: None,
    })
}

fn root_for(att_slot: u64, committee_index: u64) -> Root {
    let mut h = Sha256::new();
    h.update(att_slot.to_le_bytes());
    h.update(committee_index.to_le_bytes());
    Root(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::features::DEFAULT_IDEAL_REWARD;

    fn small(per_class: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            per_class,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_std_reproduces_means() {
        let mut cfg = small(20, 1);
        cfg.profiles
            .iter_mut()
            .for_each(|p| p.feature_stds = [0.0; FEATURE_DIM]);
        let ds = generate(&cfg, ModeTag::Default).unwrap();
        let means = cfg.effective_means(ModeTag::Default).unwrap();
        for (v, &l) in ds.vectors.iter().zip(&ds.labels) {
            assert_eq!(v.0, means[l]);
        }
        // Unit separation leaves the configured means untouched.
        for (m, p) in means.iter().zip(&cfg.profiles) {
            for (a, b) in m.iter().zip(&p.feature_means) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_balanced() {
        let a = generate(&small(50, 7), ModeTag::AllSubnets).unwrap();
        let b = generate(&small(50, 7), ModeTag::AllSubnets).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), vec![50; 6]);
        assert!(a.modes.iter().all(|&m| m == ModeTag::AllSubnets));
        assert_ne!(a, generate(&small(50, 8), ModeTag::AllSubnets).unwrap());
    }

    #[test]
    fn sample_mean_within_three_sigma_bound() {
        let mut p = default_profiles();
        p.truncate(2);
        for q in &mut p {
            q.feature_means[0] = 0.5;
            q.feature_stds[0] = 0.1;
        }
        let cfg = GeneratorConfig {
            profiles: p,
            separation: 1.0,
            per_class: 10_000,
            seed: 3,
        };
        let ds = generate(&cfg, ModeTag::Default).unwrap();
        let mean = ds.vectors[..10_000].iter().map(|v| v.0[0]).sum::<f64>() / 10_000.0;
        assert!((0.497..=0.503).contains(&mean), "{mean}");
    }

    #[test]
    fn zero_shift_client_identical_across_modes() {
        let cfg = small(30, 2);
        let d = generate(&cfg, ModeTag::Default).unwrap();
        let a = generate(&cfg, ModeTag::AllSubnets).unwrap();
        let teku = cfg.profiles.iter().position(|p| p.client == "teku").unwrap();
        let nimbus = cfg.profiles.iter().position(|p| p.client == "nimbus").unwrap();
        let pick = |ds: &LabeledDataset, c: usize| -> Vec<FeatureVector> {
            ds.vectors
                .iter()
                .zip(&ds.labels)
                .filter(|(_, &l)| l == c)
                .map(|(v, _)| *v)
                .collect()
        };
        assert_eq!(pick(&d, teku), pick(&a, teku));
        assert_ne!(pick(&d, nimbus), pick(&a, nimbus));
        // Proposer-flag mode carries no shift at all.
        let p = generate(&cfg, ModeTag::ProposerFlags).unwrap();
        assert_eq!(p.vectors, d.vectors);
    }

    #[test]
    fn nimbus_all_subnets_lands_on_grandine_default() {
        for sep in [0.5, 1.0, SEPARATION_HIGH] {
            let cfg = GeneratorConfig {
                separation: sep,
                ..Default::default()
            };
            let d = cfg.effective_means(ModeTag::Default).unwrap();
            let a = cfg.effective_means(ModeTag::AllSubnets).unwrap();
            let (g, n) = (0, 3);
            for i in [idx::REDUNDANT, idx::DELAY] {
                assert!((a[n][i] - d[g][i]).abs() < 1e-12);
            }
        }
    }

    fn min_pairwise(means: &[[f64; FEATURE_DIM]]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                let d: f64 = (0..FEATURE_DIM).map(|k| (means[i][k] - means[j][k]).powi(2)).sum();
                best = best.min(d.sqrt());
            }
        }
        best
    }

    #[test]
    fn separation_strictly_increases_min_distance() {
        let mut prev = -1.0;
        for sep in [0.25, 0.5, 1.0, 2.0, SEPARATION_HIGH] {
            let cfg = GeneratorConfig {
                separation: sep,
                ..Default::default()
            };
            let d = min_pairwise(&cfg.effective_means(ModeTag::Default).unwrap());
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small(5, 0);
        cfg.profiles[0].feature_means[1] = 1.5;
        assert!(generate(&cfg, ModeTag::Default).is_err());
        let cfg = GeneratorConfig {
            separation: 50.0,
            ..small(5, 0)
        };
        assert!(generate(&cfg, ModeTag::Default).is_err());
        let mut cfg = small(5, 0);
        cfg.profiles.truncate(1);
        assert!(cfg.validate().is_err());
        assert!(GeneratorConfig {
            per_class: 0,
            ..small(5, 0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = small(10, 4);
        let back = GeneratorConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    fn target(v: [f64; FEATURE_DIM]) -> FeatureVector {
        FeatureVector(v)
    }

    #[test]
    fn zero_redundancy_target_has_no_duplicates() {
        let mut r = rng::rng(1, 0);
        let rec = record_for_target(
            &target([0.5, 0.0, 0.5, 1.0, 0.3, 0.8, 0.2]),
            1000,
            DEFAULT_IDEAL_REWARD,
            &mut r,
        )
        .unwrap();
        let mut keys = BTreeSet::new();
        for a in &rec.attestations {
            assert!(keys.insert((a.att_slot, a.committee_index, a.data_root.0)));
        }
        assert_eq!(
            extract_features(&rec, DEFAULT_IDEAL_REWARD).unwrap().0[idx::REDUNDANT],
            0.0
        );
    }

    #[test]
    fn full_fill_gives_128_attestations() {
        let mut r = rng::rng(2, 0);
        let rec = record_for_target(
            &target([1.0, 0.3, 0.5, 1.0, 0.3, 0.8, 0.2]),
            1000,
            DEFAULT_IDEAL_REWARD,
            &mut r,
        )
        .unwrap();
        assert_eq!(rec.attestations.len(), 128);
    }

    #[test]
    fn infeasible_target_rejected() {
        let mut r = rng::rng(3, 0);
        let bad = target([0.5, 1.2, 0.5, 1.0, 0.3, 0.8, 0.2]);
        assert!(record_for_target(&bad, 1000, DEFAULT_IDEAL_REWARD, &mut r).is_err());
    }

    #[test]
    fn extracted_features_track_targets() {
        let cfg = GeneratorConfig {
            per_class: 170,
            seed: 11,
            ..Default::default()
        };
        let targets = cfg.sample_targets(ModeTag::AllSubnets).unwrap();
        let records = generate_records(&cfg, ModeTag::AllSubnets, DEFAULT_IDEAL_REWARD).unwrap();
        assert!(records.len() >= 1000);
        let mut ord_err = 0.0;
        for (rec, t) in records.iter().zip(targets.iter().flatten()) {
            let f = extract_features(rec, DEFAULT_IDEAL_REWARD).unwrap();
            f.check_ranges().unwrap();
            assert!(
                (f.0[idx::REDUNDANT] - t.0[idx::REDUNDANT]).abs() <= 0.05,
                "{:?} vs {:?}",
                f,
                t
            );
            assert!((f.0[idx::FILL] - t.0[idx::FILL]).abs() <= 0.5 / 128.0 + 1e-12);
            assert!((f.0[idx::SYNC] - t.0[idx::SYNC]).abs() <= 0.5 / 512.0 + 1e-12);
            assert!((f.0[idx::REWARD] - t.0[idx::REWARD]).abs() < 1e-6);
            assert!((f.0[idx::DELAY] - t.0[idx::DELAY]).abs() <= 0.05, "{:?} vs {:?}", f, t);
            assert!(
                (f.0[idx::UNAGGREGATED] - t.0[idx::UNAGGREGATED]).abs() <= 0.05,
                "{:?} vs {:?}",
                f,
                t
            );
            ord_err += (f.0[idx::ORDERED] - t.0[idx::ORDERED]).abs();
            assert_eq!(rec.mode, Some(ModeTag::AllSubnets));
            assert!(rec.label.is_some());
        }
        assert!(
            ord_err / (records.len() as f64) < 0.05,
            "{}",
            ord_err / records.len() as f64
        );
    }

    #[test]
    fn records_are_deterministic() {
        let cfg = small(20, 5);
        assert_eq!(
            generate_records(&cfg, ModeTag::Default, DEFAULT_IDEAL_REWARD).unwrap(),
            generate_records(&cfg, ModeTag::Default, DEFAULT_IDEAL_REWARD).unwrap()
        );
    }
}
