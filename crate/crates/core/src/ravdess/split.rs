use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::corpus::LabeledExample;
use super::meta::RavdessMeta;
use super::RavdessError;
use crate::nn::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Per-emotion proportional split at the recording level.
    #[default]
    #[serde(alias = "stratified")]
    StratifiedByEmotion,
    /// Whole actors go to one side only.
    #[serde(alias = "speaker")]
    SpeakerIndependent,
}

/// What a split needs to know about an example.
pub trait SplitKey {
    fn emotion_label(&self) -> usize;
    fn actor(&self) -> u8;
}

impl SplitKey for RavdessMeta {
    fn emotion_label(&self) -> usize {
        self.label()
    }
    fn actor(&self) -> u8 {
        self.actor
    }
}

impl SplitKey for LabeledExample {
    fn emotion_label(&self) -> usize {
        self.label
    }
    fn actor(&self) -> u8 {
        self.meta.actor
    }
}

/// Positions into the input list, each side in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub seed: u64,
    pub ratio: f64,
    pub strategy: SplitStrategy,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratio: f64,
    pub strategy: SplitStrategy,
}

/// Partitions `items` into train and test.
///
/// Items are expected in canonical order (sorted by path), which is how
/// [`scan_corpus`](super::scan_corpus) and the feature cache deliver them.
///
/// * Stratified: each emotion's members are shuffled and the first
///   `ratio * n_e` go to train. Per-class quotas are apportioned by largest
///   remainder so the train total is always `round(ratio * N)`; when the
///   per-class products are whole numbers (as for RAVDESS at 0.75) this is
///   exactly `round(ratio * n_e)` per class.
/// * Speaker independent: actors are shuffled and assigned whole to train
///   until at least `ratio * N` examples are there.
pub fn split_indices<T: SplitKey>(
    items: &[T],
    ratio: f64,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<SplitIndices, RavdessError> {
    if items.is_empty() {
        return Err(RavdessError::EmptyInput);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(RavdessError::InvalidRatio(ratio));
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    match strategy {
        SplitStrategy::StratifiedByEmotion => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, item) in items.iter().enumerate() {
                groups.entry(item.emotion_label()).or_default().push(i);
            }
            let quotas = apportion(groups.values().map(Vec::len), ratio, items.len());
            for (mut members, quota) in groups.into_values().zip(quotas) {
                rng.shuffle(&mut members);
                train.extend_from_slice(&members[..quota]);
            }
        }
        SplitStrategy::SpeakerIndependent => {
            let mut by_actor: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
            for (i, item) in items.iter().enumerate() {
                by_actor.entry(item.actor()).or_default().push(i);
            }
            let mut actors: Vec<u8> = by_actor.keys().copied().collect();
            rng.shuffle(&mut actors);
            let target = ratio * items.len() as f64;
            for actor in actors {
                if train.len() as f64 >= target {
                    break;
                }
                train.extend_from_slice(&by_actor[&actor]);
            }
        }
    }
    train.sort_unstable();
    let mut in_train = vec![false; items.len()];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..items.len()).filter(|&i| !in_train[i]).collect();
    Ok(SplitIndices {
        seed,
        ratio,
        strategy,
        train,
        test,
    })
}

// Largest-remainder apportionment of round(ratio * total) over the groups.
fn apportion(sizes: impl Iterator<Item = usize>, ratio: f64, total: usize) -> Vec<usize> {
    let sizes: Vec<usize> = sizes.collect();
    let target = (ratio * total as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| ratio * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|&q| (q + 1e-9).floor() as usize).collect();
    let mut assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable sort keeps group order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quotas[a] as f64;
        let rb = exact[b] - quotas[b] as f64;
        rb.total_cmp(&ra)
    });
    for &g in order.iter().cycle().take(sizes.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[g] < sizes[g] {
            quotas[g] += 1;
            assigned += 1;
        }
    }
    quotas
}

/// [`split_indices`] applied to owned items.
pub fn split_dataset<T: SplitKey>(
    items: Vec<T>,
    ratio: f64,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<DatasetSplit<T>, RavdessError> {
    let idx = split_indices(&items, ratio, seed, strategy)?;
    let mut in_train = vec![false; items.len()];
    for &i in &idx.train {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (item, is_train) in items.into_iter().zip(in_train) {
        if is_train {
            train.push(item);
        } else {
            test.push(item);
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        seed,
        ratio,
        strategy,
    })
}
