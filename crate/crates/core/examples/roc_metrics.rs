//! Accuracy, TP/FP rates, ROC and AUROC on hand-made scores, written as CSV
//! and SVG into a temporary directory.

use onbody::eval::plot::roc_chart;
use onbody::eval::{auroc, metrics, pair_statistic, roc, roc_to_csv, PredictionRecord};

fn main() -> onbody::Result<()> {
    let scores = [(0.95, 1, 0), (0.8, 1, 4), (0.7, 0, 4), (0.6, 1, 5), (0.6, 0, 5), (0.4, 1, 1), (0.3, 0, 0), (0.1, 0, 2)];
    let recs: Vec<PredictionRecord> = scores
        .iter()
        .enumerate()
        .map(|(i, &(s, y, z))| PredictionRecord { score_on: s, true_y: y, z, v: i % 5 })
        .collect();
    let m = metrics(&recs, 0.5)?;
    println!("accuracy {:.3}  TP {:?}  FP {:?}", m.overall.accuracy, m.overall.tp_rate, m.overall.fp_rate);
    for (k, r) in &m.by_motion {
        println!("  {k:<13} n {}  accuracy {:.3}", r.n, r.accuracy);
    }
    let curve = roc(&recs)?;
    print!("{}", roc_to_csv(&curve));
    println!("AUROC {:.4}  pair statistic {:.4}", auroc(&curve), pair_statistic(&recs).unwrap_or(f64::NAN));
    let path = std::env::temp_dir().join("onbody_roc.svg");
    onbody::io::write_file(&path, roc_chart(&[("example".into(), curve)]).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}
