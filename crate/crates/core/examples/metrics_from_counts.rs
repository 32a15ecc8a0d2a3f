//! Compute the standard evaluation metrics from raw confusion counts.
//! Positive class is "immature".

use hsi_maturity::maturity::{compute_metrics, ConfusionCounts};

fn show(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "undefined".into())
}

fn main() {
    let counts = ConfusionCounts {
        true_pos: 92,
        true_neg: 116,
        false_pos: 6,
        false_neg: 11,
    };
    let m = compute_metrics(&counts);
    println!("n = {}", counts.total());
    println!("accuracy           {}", show(m.accuracy));
    println!("precision          {}", show(m.precision));
    println!("recall             {}", show(m.recall));
    println!("specificity        {}", show(m.specificity));
    println!("balanced accuracy  {}", show(m.balanced_accuracy));

    // degenerate case: a metric with a zero denominator is undefined, not 0
    let no_pos = ConfusionCounts {
        true_pos: 0,
        true_neg: 10,
        false_pos: 0,
        false_neg: 0,
    };
    let m = compute_metrics(&no_pos);
    println!("\nwith no positive samples, recall is {}", show(m.recall));
}
