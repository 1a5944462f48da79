//! DBSCAN labels plus Local Outlier Factor scores for a tight cluster and a stray point.
use kda::dbscan_lof::{dbscan_flag, fit, DbscanConfig};
use kda::FeatureVector;

fn main() -> kda::Result<()> {
    let raw = [
        [0.0, 0.0],
        [0.3, 0.1],
        [0.1, 0.45],
        [0.5, 0.35],
        [0.2, 0.8],
        [0.7, 0.05],
        [0.65, 0.6],
        [0.9, 0.3],
        [0.4, 0.95],
        [0.85, 0.85],
        [10.0, 10.0],
    ];
    let points: Vec<FeatureVector> =
        raw.iter().enumerate().map(|(i, p)| FeatureVector::new(i as u64, p.to_vec())).collect::<kda::Result<_>>()?;
    let cfg = DbscanConfig { lof_k: 3, ..Default::default() };
    let result = fit(&points, &cfg)?;
    println!("{} cluster(s), {} noise point(s)", result.cluster_count(), result.noise_count());
    for p in &points {
        let v = dbscan_flag(&result, p.source_id, &cfg)?;
        println!("{:>2} {:?} LOF {:>8.4} flag {}", p.source_id, p.values, result.lof(p.source_id).unwrap(), v.flag);
    }
    Ok(())
}
