//! Synthetic four-class multi-label benchmark.
//!
//! 8000 samples, 320 integer-valued features, 2000 samples per primary
//! class. Cross memberships: 30% of class 1 also belong to class 2 and
//! vice versa, 20% for classes 2/3 and 25% for classes 3/4. A sample of
//! class c activates 2 of the 20 features in block c (values uniform in
//! 1..=10); a sample owning two classes does this for both blocks. Each of
//! the twelve distractor blocks 5..16 activates 4 of its 20 features for
//! an independent random half of the samples. Everything else is 0.
//! 2000 random samples form the test split.
//!
//! Draw order from the `SYNTHETIC` stream: per-class shuffles (classes in
//! order), owned-class features (samples in order, classes ascending),
//! distractor blocks (block ascending: sample subset, then features per
//! chosen sample in ascending order), finally the train/test permutation.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{rng_for, select_rows, stream, MultiLabelDataset, Split};
use crate::{BinaryMatrix, FeatureMatrix};

pub const SYNTHETIC_SAMPLES: usize = 8000;
pub const SYNTHETIC_DIM: usize = 320;
pub const SYNTHETIC_CLASSES: usize = 4;
pub const SYNTHETIC_TEST: usize = 2000;

const PER_CLASS: usize = 2000;
const BLOCK: usize = 20;
const CLASS_FEATURES: usize = 2;
const DISTRACTOR_FEATURES: usize = 4;
/// (class a, class b, number of each class's samples that also join the other).
const CROSS: [(usize, usize, usize); 3] = [(0, 1, 600), (1, 2, 400), (2, 3, 500)];

pub fn generate_synthetic(seed: u64) -> (MultiLabelDataset, MultiLabelDataset) {
    let mut rng = rng_for(seed, stream::SYNTHETIC);
    let mut labels = BinaryMatrix::zeros(SYNTHETIC_SAMPLES, SYNTHETIC_CLASSES);
    for i in 0..SYNTHETIC_SAMPLES {
        labels[(i, i / PER_CLASS)] = 1;
    }

    // Disjoint slices of each class's shuffled members join the partner classes.
    let mut cursor = [0usize; SYNTHETIC_CLASSES];
    let mut members: Vec<Vec<usize>> = (0..SYNTHETIC_CLASSES)
        .map(|c| (c * PER_CLASS..(c + 1) * PER_CLASS).collect())
        .collect();
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
    }
    for (a, b, count) in CROSS {
        for (from, to) in [(a, b), (b, a)] {
            for &i in &members[from][cursor[from]..cursor[from] + count] {
                labels[(i, to)] = 1;
            }
            cursor[from] += count;
        }
    }

    let mut features = FeatureMatrix::zeros(SYNTHETIC_SAMPLES, SYNTHETIC_DIM);
    for i in 0..SYNTHETIC_SAMPLES {
        for c in 0..SYNTHETIC_CLASSES {
            if labels[(i, c)] == 1 {
                for f in index::sample(&mut rng, BLOCK, CLASS_FEATURES) {
                    features[(i, c * BLOCK + f)] = rng.random_range(1..=10) as f64;
                }
            }
        }
    }
    for block in SYNTHETIC_CLASSES..SYNTHETIC_DIM / BLOCK {
        let mut chosen = index::sample(&mut rng, SYNTHETIC_SAMPLES, SYNTHETIC_SAMPLES / 2).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            for f in index::sample(&mut rng, BLOCK, DISTRACTOR_FEATURES) {
                features[(i, block * BLOCK + f)] = rng.random_range(1..=10) as f64;
            }
        }
    }

    let mut perm: Vec<usize> = (0..SYNTHETIC_SAMPLES).collect();
    perm.shuffle(&mut rng);
    let (test_rows, train_rows) = perm.split_at(SYNTHETIC_TEST);
    let make = |rows: &[usize], split| MultiLabelDataset {
        features: select_rows(&features, rows),
        labels: select_rows(&labels, rows),
        labeled: vec![true; rows.len()],
        feature_names: None,
        label_names: Some((1..=SYNTHETIC_CLASSES).map(|c| format!("class{c}")).collect()),
        split,
    };
    (make(train_rows, Split::Train), make(test_rows, Split::Test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_matches_the_protocol() {
        let (train, test) = generate_synthetic(7);
        assert_eq!((train.len(), test.len()), (6000, 2000));
        assert_eq!((train.dim(), train.classes()), (320, 4));

        let all_labels: Vec<u8> = train.labels.iter().chain(test.labels.iter()).copied().collect();
        let total: usize = all_labels.iter().map(|&v| v as usize).sum();
        // 1 + (600·2 + 400·2 + 500·2) / 8000 = 1.375
        assert_eq!(total, 11_000);
        assert_eq!(total as f64 / 8000.0, 1.375);

        let mut per_class = [0usize; 4];
        let mut pairs = [[0usize; 4]; 4];
        for ds in [&train, &test] {
            for i in 0..ds.len() {
                let row: Vec<usize> = (0..4).filter(|&c| ds.labels[(i, c)] == 1).collect();
                assert!(!row.is_empty() && row.len() <= 2);
                for &c in &row {
                    per_class[c] += 1;
                }
                if let [a, b] = row[..] {
                    pairs[a][b] += 1;
                }
                for j in 0..320 {
                    let v = ds.features[(i, j)];
                    assert!(v.fract() == 0.0 && (0.0..=10.0).contains(&v));
                }
                for c in 0..4 {
                    let block_active = (c * 20..(c + 1) * 20).any(|j| ds.features[(i, j)] != 0.0);
                    assert_eq!(block_active, ds.labels[(i, c)] == 1);
                    let active = (c * 20..(c + 1) * 20).filter(|&j| ds.features[(i, j)] != 0.0).count();
                    assert_eq!(active, if ds.labels[(i, c)] == 1 { 2 } else { 0 });
                }
            }
        }
        assert_eq!(per_class, [2600, 3000, 2900, 2500]);
        assert_eq!((pairs[0][1], pairs[1][2], pairs[2][3]), (1200, 800, 1000));
        assert_eq!(pairs[0][2] + pairs[0][3] + pairs[1][3], 0);

        for block in 4..16 {
            let active = [&train, &test]
                .iter()
                .flat_map(|ds| (0..ds.len()).map(move |i| (ds, i)))
                .filter(|(ds, i)| (block * 20..(block + 1) * 20).any(|j| ds.features[(*i, j)] != 0.0))
                .count();
            assert_eq!(active, 4000);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let (a, _) = generate_synthetic(3);
        let (b, _) = generate_synthetic(3);
        let (c, _) = generate_synthetic(4);
        assert_eq!(a, b);
        assert_ne!(a.features, c.features);
    }
}
