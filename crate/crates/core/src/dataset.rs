//! Labeled datasets and the sampling strategies used by the experiments:
//! stratified splits and folds, balanced subsampling, equal-parts merging of
//! two client modes, and the client-by-mode relabeling.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, ModeTag};
use crate::rng::{self, tags};

/// Default client registry, alphabetical. Class index = position.
pub const DEFAULT_CLIENTS: [&str; 6] = ["grandine", "lighthouse", "lodestar", "nimbus", "prysm", "teku"];

pub fn default_class_names() -> Vec<String> {
    DEFAULT_CLIENTS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelScheme {
    /// One class per client.
    #[serde(rename = "six_class")]
    Client,
    /// One class per (client, mode) pair over exactly two modes.
    #[serde(rename = "twelve_class")]
    ClientMode,
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelScheme::Client => "six_class",
            LabelScheme::ClientMode => "twelve_class",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub vectors: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub modes: Vec<ModeTag>,
    pub scheme: LabelScheme,
    pub class_names: Vec<String>,
}

/// Splits `name` into (client, mode) when it carries a mode suffix.
pub fn split_mode_suffix(name: &str) -> Option<(&str, ModeTag)> {
    ModeTag::ALL.into_iter().find_map(|m| {
        name.strip_suffix(m.as_str())
            .and_then(|rest| rest.strip_suffix('_'))
            .filter(|c| !c.is_empty())
            .map(|c| (c, m))
    })
}

pub fn client_mode_name(client: &str, mode: ModeTag) -> String {
    format!("{client}_{mode}")
}

/// Maps client-by-mode class names onto their clients. Returns the client
/// names (first-appearance order) and, per input class, the client index.
pub fn client_collapse_map(class_names: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut clients: Vec<String> = Vec::new();
    let mut map = Vec::with_capacity(class_names.len());
    for name in class_names {
        let (client, _) = split_mode_suffix(name)
            .ok_or_else(|| Error::SchemeMismatch(format!("class `{name}` has no mode suffix")))?;
        let pos = match clients.iter().position(|c| c == client) {
            Some(p) => p,
            None => {
                clients.push(client.to_string());
                clients.len() - 1
            }
        };
        map.push(pos);
    }
    Ok((clients, map))
}

fn validate_client_mode_names(names: &[String]) -> Result<()> {
    let mut modes = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for name in names {
        let (client, mode) = split_mode_suffix(name)
            .ok_or_else(|| Error::SchemeMismatch(format!("twelve_class name `{name}` is not a client_mode pair")))?;
        modes.insert(mode);
        pairs.insert((client.to_string(), mode));
    }
    if modes.len() != 2 {
        return Err(Error::SchemeMismatch(format!(
            "twelve_class needs exactly two modes, found {}",
            modes.len()
        )));
    }
    let clients: BTreeSet<_> = pairs.iter().map(|(c, _)| c.clone()).collect();
    if pairs.len() != names.len() || pairs.len() != clients.len() * 2 {
        return Err(Error::SchemeMismatch(
            "twelve_class names must cover every client in both modes exactly once".into(),
        ));
    }
    Ok(())
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl LabeledDataset {
    pub fn new(
        vectors: Vec<FeatureVector>,
        labels: Vec<usize>,
        modes: Vec<ModeTag>,
        scheme: LabelScheme,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = LabeledDataset {
            vectors,
            labels,
            modes,
            scheme,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn empty(scheme: LabelScheme, class_names: Vec<String>) -> Self {
        LabeledDataset {
            vectors: Vec::new(),
            labels: Vec::new(),
            modes: Vec::new(),
            scheme,
            class_names,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.len() != self.labels.len() || self.vectors.len() != self.modes.len() {
            return Err(Error::invalid(format!(
                "dataset columns differ in length: {} vectors, {} labels, {} modes",
                self.vectors.len(),
                self.labels.len(),
                self.modes.len()
            )));
        }
        if self.class_names.is_empty() {
            return Err(Error::invalid("dataset has no classes"));
        }
        let unique: BTreeSet<_> = self.class_names.iter().collect();
        if unique.len() != self.class_names.len() {
            return Err(Error::invalid("duplicate class names"));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.class_names.len()) {
            return Err(Error::invalid(format!(
                "label {l} out of range for {} classes",
                self.class_names.len()
            )));
        }
        if self.scheme == LabelScheme::ClientMode {
            validate_client_mode_names(&self.class_names)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn mode_counts(&self) -> Vec<(ModeTag, usize)> {
        ModeTag::ALL
            .into_iter()
            .map(|m| (m, self.modes.iter().filter(|&&x| x == m).count()))
            .filter(|(_, c)| *c > 0)
            .collect()
    }

    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            vectors: indices.iter().map(|&i| self.vectors[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            modes: indices.iter().map(|&i| self.modes[i]).collect(),
            scheme: self.scheme,
            class_names: self.class_names.clone(),
        }
    }

    /// Appends `other`'s rows; both must share scheme and classes.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.vectors.extend_from_slice(&other.vectors);
        out.labels.extend_from_slice(&other.labels);
        out.modes.extend_from_slice(&other.modes);
        Ok(out)
    }

    pub fn check_compatible(&self, other: &LabeledDataset) -> Result<()> {
        if self.scheme != other.scheme {
            return Err(Error::SchemeMismatch(format!("{} vs {}", self.scheme, other.scheme)));
        }
        if self.class_names != other.class_names {
            return Err(Error::ClassMismatch(format!(
                "{:?} vs {:?}",
                self.class_names, other.class_names
            )));
        }
        Ok(())
    }

    /// The single mode every row carries, if homogeneous.
    pub fn uniform_mode(&self) -> Option<ModeTag> {
        let first = *self.modes.first()?;
        self.modes.iter().all(|&m| m == first).then_some(first)
    }

    /// Index-level stratified split; returns sorted (train, test) indices.
    pub fn split_indices(&self, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!("test fraction {test_fraction} not in (0, 1)")));
        }
        let by_class = self.indices_by_class();
        for (c, idx) in by_class.iter().enumerate() {
            if idx.len() < 2 {
                return Err(Error::InsufficientClass {
                    class: self.class_names[c].clone(),
                    have: idx.len(),
                    need: 2,
                });
            }
        }
        let mut take: Vec<usize> = by_class
            .iter()
            .map(|idx| round_half_up(idx.len() as f64 * test_fraction).clamp(1, idx.len() - 1))
            .collect();

        // Fix the total by nudging the largest classes first (ties: lower index).
        let target = round_half_up(self.len() as f64 * test_fraction);
        let mut order: Vec<usize> = (0..take.len()).collect();
        order.sort_by(|&a, &b| by_class[b].len().cmp(&by_class[a].len()).then(a.cmp(&b)));
        let mut guard = 0;
        while take.iter().sum::<usize>() != target && guard < 2 {
            let mut moved = false;
            for &c in &order {
                let total: usize = take.iter().sum();
                if total < target && take[c] < by_class[c].len() - 1 {
                    take[c] += 1;
                    moved = true;
                } else if total > target && take[c] > 1 {
                    take[c] -= 1;
                    moved = true;
                }
                if take.iter().sum::<usize>() == target {
                    break;
                }
            }
            if !moved {
                guard += 1;
            }
        }

        let mut rng = rng::rng(seed, tags::SPLIT);
        let mut train = Vec::with_capacity(self.len());
        let mut test = Vec::new();
        for (idx, t) in by_class.iter().zip(&take) {
            let mut idx = idx.clone();
            idx.shuffle(&mut rng);
            test.extend_from_slice(&idx[..*t]);
            train.extend_from_slice(&idx[*t..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

/// Stratified, seed-deterministic train/test split.
///
/// Per class the test share is `round_half_up(n_c * fraction)`, clamped so
/// both sides keep a sample; the total is then corrected toward
/// `round_half_up(n * fraction)` by adjusting the largest classes.
pub fn train_test_split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = ds.split_indices(test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold partition. Each class is shuffled and dealt round-robin
/// across folds, continuing from where the previous class stopped, so every
/// fold holds `floor` or `ceil` of `n_c / k` members of class `c`.
pub fn stratified_kfold(ds: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let by_class = ds.indices_by_class();
    let min_count = by_class.iter().map(Vec::len).filter(|&n| n > 0).min().unwrap_or(0);
    if k < 2 || k > min_count {
        return Err(Error::invalid(format!(
            "fold count {k} outside [2, {min_count}] (smallest class size)"
        )));
    }
    let mut rng = rng::rng(seed, tags::KFOLD);
    let mut tests = vec![Vec::new(); k];
    let mut start = 0;
    for idx in &by_class {
        let mut idx = idx.clone();
        idx.shuffle(&mut rng);
        for (j, i) in idx.iter().enumerate() {
            tests[(start + j) % k].push(*i);
        }
        start = (start + idx.len()) % k;
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; ds.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..ds.len()).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Exactly `per_class` rows of every class, drawn without replacement.
pub fn subsample_balanced(ds: &LabeledDataset, per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let by_class = ds.indices_by_class();
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < per_class {
            return Err(Error::InsufficientClass {
                class: ds.class_names[c].clone(),
                have: idx.len(),
                need: per_class,
            });
        }
    }
    let mut rng = rng::rng(seed, tags::SUBSAMPLE);
    let mut picked = Vec::with_capacity(per_class * by_class.len());
    for idx in by_class {
        let mut idx = idx;
        idx.shuffle(&mut rng);
        picked.extend_from_slice(&idx[..per_class]);
    }
    // Original row order is kept, so a full-count draw is the identity.
    picked.sort_unstable();
    Ok(ds.subset(&picked))
}

/// Per class, takes `min(count_a, count_b)` rows from each input so the
/// result is split evenly between the two sources. Rows from `a` come first,
/// then rows from `b`, each in original order.
pub fn merge_equal_parts(a: &LabeledDataset, b: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    a.check_compatible(b)?;
    let ca = a.indices_by_class();
    let cb = b.indices_by_class();
    let mut rng_a = rng::rng(seed, tags::MERGE);
    let mut rng_b = rng::rng(seed, tags::MERGE + 1000);
    let mut pick_a = Vec::new();
    let mut pick_b = Vec::new();
    for (c, (ia, ib)) in ca.into_iter().zip(cb).enumerate() {
        let m = ia.len().min(ib.len());
        if m == 0 {
            return Err(Error::InsufficientClass {
                class: a.class_names[c].clone(),
                have: 0,
                need: 1,
            });
        }
        let mut ia = ia;
        let mut ib = ib;
        ia.shuffle(&mut rng_a);
        ib.shuffle(&mut rng_b);
        pick_a.extend_from_slice(&ia[..m]);
        pick_b.extend_from_slice(&ib[..m]);
    }
    pick_a.sort_unstable();
    pick_b.sort_unstable();
    a.subset(&pick_a).concat(&b.subset(&pick_b))
}

/// Turns two single-mode client datasets into one client-by-mode dataset:
/// class `2c` is client `c` in `a`'s mode, class `2c + 1` in `b`'s.
pub fn relabel_twelve_class(a: &LabeledDataset, b: &LabeledDataset) -> Result<LabeledDataset> {
    if a.scheme != LabelScheme::Client || b.scheme != LabelScheme::Client {
        return Err(Error::SchemeMismatch("relabeling needs two six_class inputs".into()));
    }
    if a.class_names != b.class_names {
        return Err(Error::ClassMismatch(format!(
            "client registries differ: {:?} vs {:?}",
            a.class_names, b.class_names
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("relabeling needs non-empty inputs"));
    }
    let mode_a = a
        .uniform_mode()
        .ok_or_else(|| Error::invalid("first input mixes modes"))?;
    let mode_b = b
        .uniform_mode()
        .ok_or_else(|| Error::invalid("second input mixes modes"))?;
    if mode_a == mode_b {
        return Err(Error::invalid(format!("both inputs are in mode {mode_a}")));
    }
    let class_names = a
        .class_names
        .iter()
        .flat_map(|c| [client_mode_name(c, mode_a), client_mode_name(c, mode_b)])
        .collect();
    let labels = a
        .labels
        .iter()
        .map(|l| 2 * l)
        .chain(b.labels.iter().map(|l| 2 * l + 1))
        .collect();
    LabeledDataset::new(
        a.vectors.iter().chain(&b.vectors).copied().collect(),
        labels,
        a.modes.iter().chain(&b.modes).copied().collect(),
        LabelScheme::ClientMode,
        class_names,
    )
}

/// Inverse view of [`relabel_twelve_class`]: strips mode suffixes.
pub fn collapse_to_clients(ds: &LabeledDataset) -> Result<LabeledDataset> {
    if ds.scheme != LabelScheme::ClientMode {
        return Err(Error::SchemeMismatch("collapse needs a twelve_class dataset".into()));
    }
    let (clients, map) = client_collapse_map(&ds.class_names)?;
    LabeledDataset::new(
        ds.vectors.clone(),
        ds.labels.iter().map(|&l| map[l]).collect(),
        ds.modes.clone(),
        LabelScheme::Client,
        clients,
    )
}
