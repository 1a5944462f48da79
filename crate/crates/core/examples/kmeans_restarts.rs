//! Seeded k-means restarts, the sparse-cluster flag and the Davies-Bouldin index.
use kda::kmeans::{davies_bouldin, kmeans_fit, kmeans_flag, KMeansConfig};
use kda::FeatureVector;

fn main() -> kda::Result<()> {
    let mut points: Vec<FeatureVector> = (0..40)
        .map(|i| FeatureVector::new(i, vec![f64::from(i as u32 % 4), f64::from(i as u32 % 5)]))
        .collect::<kda::Result<_>>()?;
    points.push(FeatureVector::new(40, vec![50.0, 50.0])?);

    let cfg = KMeansConfig { k: 4, seed: 7, ..Default::default() };
    let model = kmeans_fit(&points, &cfg)?;
    for (i, run) in model.runs.iter().enumerate() {
        println!("run {i}: {} steps, SSE {:.3}", run.steps, run.final_sse());
    }
    println!("best run {} with SSE {:.3}, sizes {:?}", model.best_run, model.sse, model.cluster_sizes);
    println!("Davies-Bouldin: {:.4}", davies_bouldin(&model, &points)?);
    let v = kmeans_flag(&model, 40, &cfg)?;
    println!("transaction 40 flagged: {} ({:?})", v.flag, v.evidence);
    Ok(())
}
