mod common;

use std::collections::BTreeSet;

use logdist_core::learn::{agglomerative, kmeans, GmmModel, GmmOptions, Linkage, Point2};
use proptest::prelude::*;

/// Symmetric matrix of continuous draws; exact ties, including ties between
/// averages, have probability zero.
fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..=9).prop_flat_map(|n| {
        prop::collection::vec(1.0f64..10.0, n * (n - 1) / 2).prop_map(move |vals| {
            let mut d = vec![vec![0.0; n]; n];
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    d[i][j] = vals[k];
                    d[j][i] = vals[k];
                    k += 1;
                }
            }
            d
        })
    })
}

fn linkage_value(d: &[Vec<f64>], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| d[i][j]));
    match linkage {
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(0.0, f64::max),
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
    }
}

/// Textbook agglomeration recomputing every linkage from the raw matrix.
fn naive(d: &[Vec<f64>], k: usize, linkage: Linkage) -> BTreeSet<BTreeSet<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let v = linkage_value(d, &clusters[a], &clusters[b], linkage);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let merged = clusters.remove(best.2);
        clusters[best.1].extend(merged);
    }
    clusters.into_iter().map(|c| c.into_iter().collect()).collect()
}

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn agglomerative_matches_naive(d in arb_matrix(), k_frac in 0.0f64..1.0) {
        let n = d.len();
        let k = 1 + (k_frac * n as f64) as usize % n;
        let ids: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let labels = agglomerative(&ids, &d, k, linkage).unwrap();
            prop_assert_eq!(labels.k(), k);
            let got: BTreeSet<BTreeSet<usize>> =
                labels.groups().into_iter().map(|g| g.into_iter().collect()).collect();
            prop_assert_eq!(&got, &naive(&d, k, linkage), "{:?}", linkage);
            // labels are numbered by first appearance
            let mut next = 0;
            for &l in labels.labels() {
                prop_assert!(l <= next);
                if l == next {
                    next += 1;
                }
            }
        }
    }

    #[test]
    fn kmeans_is_a_fixed_point(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..60), seed in 0u64..100) {
        let (assign, centres) = kmeans(&points, 3, seed, 500).unwrap();
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        for (p, &a) in points.iter().zip(&assign) {
            for c in &centres {
                prop_assert!(sq(p, &centres[a]) <= sq(p, c) + 1e-9);
            }
        }
        prop_assert_eq!(kmeans(&points, 3, seed, 500).unwrap().0, assign);
    }

    /// Clusters sit near the corners of a 20-wide square with 20 spread-out
    /// points each, so no component can collapse onto a few points.
    #[test]
    fn gmm_likelihood_never_drops(
        k in 2usize..=4,
        offsets in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 4),
        noise in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 80),
        seed in 0u64..20,
    ) {
        let corners = [(-10.0, -10.0), (10.0, -10.0), (-10.0, 10.0), (10.0, 10.0)];
        let points: Vec<Point2> = noise
            .iter()
            .take(20 * k)
            .enumerate()
            .map(|(i, (dx, dy))| {
                let c = i % k;
                [corners[c].0 + offsets[c].0 + dx, corners[c].1 + offsets[c].1 + dy]
            })
            .collect();
        // ascent is exact only without the covariance floor
        let opts = GmmOptions { k, seed, reg: 0.0, ..Default::default() };
        let fit = GmmModel::fit(&points, &opts).unwrap();
        for w in fit.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        let again = GmmModel::fit(&points, &opts).unwrap();
        prop_assert_eq!(again.model, fit.model);
    }
}
