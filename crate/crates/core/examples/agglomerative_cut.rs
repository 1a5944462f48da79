//! Average-link dendrogram and singleton detection at a fixed cut.
use kda::agglomerative::{agglo_fit, agglo_flag, cut, AggloConfig};
use kda::FeatureVector;

fn main() -> kda::Result<()> {
    let xs = [0.0, 1.0, 10.0, 11.0, 30.0];
    let points: Vec<FeatureVector> =
        xs.iter().enumerate().map(|(i, &x)| FeatureVector::new(i as u64, vec![x])).collect::<kda::Result<_>>()?;
    let cfg = AggloConfig { cut_clusters: 3, ..Default::default() };
    let tree = agglo_fit(&points, &cfg)?;
    for m in &tree.merges {
        println!("merge {} + {} at height {:.3} (size {})", m.left, m.right, m.height, m.size);
    }
    let clustering = cut(&tree, cfg.cut_clusters)?;
    println!("labels {:?}, sizes {:?}", clustering.labels, clustering.sizes);
    for p in &points {
        println!("{} singleton flag: {}", p.source_id, agglo_flag(&clustering, p.source_id, &cfg)?.flag);
    }
    Ok(())
}
