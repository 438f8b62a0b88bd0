mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcm::calibration::{bhattacharyya, build_pq, percentile_threshold};
use tcm::clustering::{assign_clusters, fit_kmeans, FeatureMatrix, PixelFeatureConfig};
use tcm::evaluation::{score, spearman, Prediction};
use tcm::geom_raster::{rasterize_polygon, AffineGeoTransform, Raster, Rect};
use tcm::matching::{first_crossing_values, kl_divergence, DiscreteDistribution};
use tcm::supervised::{fit_lr, fit_threshold, threshold_accuracy, LrConfig, LrObjective};
use tcm::synthgen::TruthLabel;

fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

proptest! {
    #[test]
    fn kl_is_zero_on_self_and_non_negative((p, q) in (1usize..40).prop_flat_map(|n| (probs(n), probs(n)))) {
        let p = DiscreteDistribution::new(p).unwrap();
        let q = DiscreteDistribution::new(q).unwrap();
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
    }

    #[test]
    fn bc_is_bounded_and_one_on_self(
        p in prop::collection::vec(0.0f64..10.0, 1..200),
        q in prop::collection::vec(0.0f64..10.0, 1..200),
        bins in 1usize..80,
    ) {
        let (hp, hq) = build_pq(&p, &q, bins, None).unwrap();
        let bc = bhattacharyya(&hp, &hq).unwrap();
        prop_assert!((0.0..=1.0).contains(&bc));
        prop_assert!((bhattacharyya(&hp, &hp).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn percentile_bounds_the_requested_share(v in prop::collection::vec(-5.0f64..5.0, 1..300), pct in 1.0f64..100.0) {
        let theta = percentile_threshold(&v, pct).unwrap();
        let below = v.iter().filter(|&&x| x <= theta).count() as f64;
        prop_assert!(below / v.len() as f64 >= pct / 100.0 - 1e-9);
        prop_assert!(v.contains(&theta));
    }

    #[test]
    fn first_crossing_is_monotone(v in prop::collection::vec(0.0f64..3.0, 1..10), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(first_crossing_values(&v, lo).0 <= first_crossing_values(&v, hi).0);
    }

    #[test]
    fn rasterization_matches_point_in_polygon(seed in any::<u64>(), convex in any::<bool>(), h in 4usize..64, w in 4usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let radius = 2.0 + rng.random_range(0.0..30.0);
        let poly = random_star(&mut rng, "p", cx, h as f64 - cy, radius, convex);
        let gt = AffineGeoTransform::north_up(0.0, h as f64, 1.0).unwrap();
        let extent = Rect::new(0.0, 0.0, w as f64, h as f64);
        let rings: Vec<Vec<[f64; 2]>> = poly.rings().map(|r| r.to_vec()).collect();
        let mut expect = vec![false; h * w];
        for row in 0..h {
            for col in 0..w {
                expect[row * w + col] = point_in_rings(&rings, col as f64 + 0.5, h as f64 - row as f64 - 0.5);
            }
        }
        match rasterize_polygon(&poly, &extent, &gt, (h, w)) {
            Ok(mask) => prop_assert_eq!(mask.as_slice(), expect.as_slice()),
            Err(_) => prop_assert!(expect.iter().all(|v| !v)),
        }
    }

    #[test]
    fn kmeans_finds_the_optimal_partition_of_separated_blobs(seed in any::<u64>(), k in 1usize..=3, extra in 0usize..=5, dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = k + extra;
        let points = separated_blobs(&mut rng, n, k, dim);
        let fm = FeatureMatrix::new(n, dim, points.iter().flatten().map(|&v| v as f32).collect()).unwrap();
        let model = fit_kmeans(&fm, k, seed, PixelFeatureConfig::Spectral).unwrap();
        let labels: Vec<usize> = fm.iter_rows().map(|p| model.nearest(p).0).collect();
        let (_, optimal) = exhaustive_kmeans(&points, k);
        prop_assert!(optimal.contains(&canonical(&labels)));
    }

    #[test]
    fn assignment_is_a_nearest_centroid_scan(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Raster::new(16, 16, 3, (0..16 * 16 * 3).map(|_| rng.random_range(0.0f32..255.0).round()).collect()).unwrap();
        let fm = FeatureMatrix::new(256, 3, img.data().to_vec()).unwrap();
        let model = fit_kmeans(&fm, k, seed, PixelFeatureConfig::Spectral).unwrap();
        let map = assign_clusters(&model, &img).unwrap();
        for (px, &label) in img.pixels().zip(&map.labels) {
            let d: Vec<f32> = (0..k)
                .map(|j| model.centroid(j).iter().zip(px).map(|(c, v)| (c - v) * (c - v)).sum())
                .collect();
            let best = (0..k).fold(0, |b, j| if d[j] < d[b] { j } else { b });
            prop_assert_eq!(label as usize, best);
        }
    }

    #[test]
    fn lr_gradient_matches_finite_differences(seed in any::<u64>(), n in 2usize..20, dim in 1usize..5, classes in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let obj = LrObjective::new(x, y, classes, 1e-3).unwrap();
        let params: Vec<f64> = (0..obj.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let numeric = central_difference(|p| obj.loss(p), &params, 1e-5);
        for (a, b) in obj.gradient(&params).iter().zip(&numeric) {
            prop_assert!((a - b).abs() <= 1e-5, "analytic {} numeric {}", a, b);
        }
    }

    #[test]
    fn lr_loss_never_increases(seed in any::<u64>(), n in 4usize..40, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
        let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(1..=5)).collect();
        y[0] = 1;
        y[1] = 2;
        let m = fit_lr(&x, &y, 5, LrConfig { iterations: 100, ..Default::default() }, seed).unwrap();
        prop_assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for row in &x {
            let p = m.predict(row).unwrap();
            prop_assert!((1..=5).contains(&p));
        }
    }

    #[test]
    fn fitted_threshold_beats_a_dense_sweep(seed in any::<u64>(), n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| ((0..4).map(|_| rng.random_range(0.0..2.0)).collect(), rng.random_range(1..=4)))
            .collect();
        let pairs: Vec<(&[f64], usize)> = data.iter().map(|(s, l)| (s.as_slice(), *l)).collect();
        let best = threshold_accuracy(&pairs, fit_threshold(&pairs).unwrap());
        for i in 0..=400 {
            let theta = -0.5 + 3.0 * i as f64 / 400.0;
            prop_assert!(threshold_accuracy(&pairs, theta) <= best);
        }
    }

    #[test]
    fn score_ignores_order_and_mae_zero_iff_exact(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<TruthLabel> = (0..n)
            .map(|i| {
                let idx = rng.random_range(1..=5);
                TruthLabel { footprint_id: format!("f{i}"), label_index: idx, label_year: 2010 + idx as i32 }
            })
            .collect();
        let mut preds: Vec<Prediction> = labels
            .iter()
            .map(|l| {
                let idx = if rng.random_bool(0.7) { l.label_index } else { rng.random_range(1..=5) };
                Prediction { footprint_id: l.footprint_id.clone(), index: idx, year: 2010 + idx as i32 }
            })
            .collect();
        let a = score(&preds, &labels).unwrap();
        preds.reverse();
        let mut shuffled = labels.clone();
        shuffled.rotate_left(n / 2);
        let b = score(&preds, &shuffled).unwrap();
        prop_assert_eq!((a.accuracy, a.mae_years, a.mae_index), (b.accuracy, b.mae_years, b.mae_index));
        prop_assert_eq!(a.mae_years == 0.0, a.accuracy == 1.0);
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(x in prop::collection::vec(-10.0f64..10.0, 2..30), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&y, &x)) {
            prop_assert!((-1.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
