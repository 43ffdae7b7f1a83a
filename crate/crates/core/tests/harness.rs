use nmlsdr::harness::{count_best, wilcoxon_matrix, ResultsTable};
use nmlsdr::metrics::{Metric, MetricsReport};

const METHODS: [&str; 10] = [
    "CCA", "MVMD", "MDDMp", "MDDMf", "wMLDAb", "wMLDAe", "wMLDAc", "wMLDAd", "SSMLDR", "NMLSDR",
];

// HL' means of ten methods on ten benchmark datasets, three decimals.
const HL: [(&str, [f64; 10]); 10] = [
    ("Birds", [0.947, 0.950, 0.950, 0.947, 0.948, 0.949, 0.949, 0.949, 0.949, 0.951]),
    ("Corel", [0.980; 10]),
    ("Emotions", [0.715, 0.771, 0.778, 0.711, 0.696, 0.714, 0.709, 0.717, 0.786, 0.787]),
    ("Enron", [0.941, 0.950, 0.950, 0.942, 0.941, 0.941, 0.941, 0.940, 0.938, 0.950]),
    ("Genbase", [0.989, 0.996, 0.996, 0.988, 0.990, 0.991, 0.988, 0.989, 0.994, 0.997]),
    ("Medical", [0.976, 0.974, 0.974, 0.976, 0.974, 0.975, 0.975, 0.976, 0.966, 0.975]),
    ("Scene", [0.810, 0.899, 0.900, 0.809, 0.810, 0.814, 0.817, 0.810, 0.873, 0.897]),
    ("Tmc2007", [0.914, 0.928, 0.928, 0.912, 0.911, 0.911, 0.911, 0.916, 0.922, 0.929]),
    ("Toy", [0.836, 0.894, 0.894, 0.839, 0.821, 0.831, 0.831, 0.854, 0.861, 0.903]),
    ("Yeast", [0.780, 0.791, 0.790, 0.782, 0.785, 0.783, 0.781, 0.781, 0.793, 0.793]),
];

fn hl_table() -> ResultsTable {
    let mut t = ResultsTable::new();
    for (dataset, row) in HL {
        for (m, v) in METHODS.iter().zip(row) {
            t.push(m, dataset, 0, MetricsReport::from_fn(|_| v));
        }
    }
    t
}

#[test]
fn best_counts_of_hamming_table() {
    let counts: Vec<usize> = count_best(&hl_table(), Metric::HlPrime).unwrap().into_iter().map(|(_, c)| c).collect();
    assert_eq!(counts, vec![2, 2, 3, 2, 1, 1, 1, 2, 2, 8]);
}

#[test]
fn wilcoxon_totals_of_hamming_table() {
    let totals = wilcoxon_matrix(&hl_table(), Metric::HlPrime, 0.05).unwrap();
    let values: Vec<f64> = totals.iter().map(|(_, t)| *t).collect();
    // Cross-checked with scipy.stats.wilcoxon (any zero-handling mode).
    assert_eq!(values, vec![3.0, 7.5, 7.5, 3.0, 3.0, 3.0, 3.0, 3.0, 4.0, 8.0]);
    assert_eq!(values.iter().sum::<f64>(), 45.0);
}
