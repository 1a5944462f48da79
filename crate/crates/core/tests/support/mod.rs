//! Naive reference implementations and random inputs shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::NaiveDate;
use kda::{FeatureVector, Transaction, TxId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `n` points with coordinates in [0, scale).
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Vec<FeatureVector> {
    (0..n)
        .map(|i| FeatureVector::new(i as TxId, (0..dim).map(|_| rng.random::<f64>() * scale).collect()).unwrap())
        .collect()
}

/// Points on a small integer lattice, so duplicates and distance ties occur.
pub fn lattice_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, side: u32) -> Vec<FeatureVector> {
    (0..n)
        .map(|i| {
            FeatureVector::new(i as TxId, (0..dim).map(|_| f64::from(rng.random_range(0..side))).collect()).unwrap()
        })
        .collect()
}

/// LOF straight from the definition, neighborhoods including ties.
pub fn naive_lof(points: &[FeatureVector], k: usize) -> Vec<f64> {
    let n = points.len();
    let d = |a: usize, b: usize| euclid(&points[a].values, &points[b].values);
    let kdist: Vec<f64> = (0..n)
        .map(|p| {
            let mut ds: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| d(p, o)).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds[k - 1]
        })
        .collect();
    let hood = |p: usize| -> Vec<usize> { (0..n).filter(|&o| o != p && d(p, o) <= kdist[p]).collect() };
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let h = hood(p);
            let mut reach = 0.0;
            for &o in &h {
                reach += f64::max(kdist[o], d(p, o));
            }
            if reach == 0.0 {
                f64::INFINITY
            } else {
                h.len() as f64 / reach
            }
        })
        .collect();
    (0..n)
        .map(|p| {
            if lrd[p].is_infinite() {
                return 1.0;
            }
            let h = hood(p);
            let mut s = 0.0;
            for &o in &h {
                s += lrd[o] / lrd[p];
            }
            s / h.len() as f64
        })
        .collect()
}

/// Average-link clustering recomputing every cluster-pair mean distance at
/// every step. Returns (members, height) per merge.
pub fn naive_average_link(points: &[FeatureVector]) -> Vec<(BTreeSet<usize>, f64)> {
    let n = points.len();
    let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in 0..clusters.len() {
                if i == j {
                    continue;
                }
                let (mi, mj) = (*clusters[i].first().unwrap(), *clusters[j].first().unwrap());
                if mi > mj {
                    continue;
                }
                let mut total = 0.0;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        total += euclid(&points[a].values, &points[b].values);
                    }
                }
                let h = total / (clusters[i].len() * clusters[j].len()) as f64;
                let cand = (h, mi, mj, i, j);
                if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                    best = Some(cand);
                }
            }
        }
        let (h, _, _, i, j) = best.unwrap();
        let merged: BTreeSet<usize> = clusters[i].union(&clusters[j]).copied().collect();
        let (lo, hi) = (i.min(j), i.max(j));
        clusters.remove(hi);
        clusters[lo] = merged.clone();
        out.push((merged, h));
    }
    out
}

/// Leaf sets of every merge in an engine dendrogram.
pub fn merge_sets(d: &kda::agglomerative::Dendrogram) -> Vec<(BTreeSet<usize>, f64)> {
    let n = d.leaf_count();
    let mut nodes: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut out = Vec::new();
    for m in &d.merges {
        let s: BTreeSet<usize> = nodes[m.left].union(&nodes[m.right]).copied().collect();
        nodes.push(s.clone());
        out.push((s, m.height));
    }
    out
}

pub fn tx(id: TxId, day: u32, hour: u8, amount: f64, merchant: &str) -> Transaction {
    Transaction {
        id,
        pr_code: 0,
        pan: "P1".into(),
        term_id: format!("T-{merchant}"),
        merchant_id: merchant.into(),
        pos_condition: 0,
        affective_amount: amount,
        trx_date: NaiveDate::from_ymd_opt(2014, 1, 1).unwrap() + chrono::Days::new(u64::from(day)),
        trx_time: hour,
    }
}

/// A random single-customer window of `n` transactions in time order.
pub fn random_window(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transaction> {
    let merchants = ["M1", "M2", "M3", "M4"];
    let mut day = 0;
    (0..n)
        .map(|i| {
            day += rng.random_range(0..3);
            let amount =
                if rng.random_bool(0.05) { rng.random_range(1e6..5e6) } else { rng.random_range(2e4..2e5_f64).round() };
            tx(i as TxId + 1, day, rng.random_range(8..22), amount, merchants[rng.random_range(0..merchants.len())])
        })
        .collect()
}
