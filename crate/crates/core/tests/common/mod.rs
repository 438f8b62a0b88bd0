//! Independent oracles and random instance builders shared by the
//! integration tests.
#![allow(dead_code)]

use rand::Rng;
use tcm::geom_raster::Polygon;

/// Crossing-number point-in-polygon test over every ring (even-odd).
pub fn point_in_rings(rings: &[Vec<[f64; 2]>], x: f64, y: f64) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let ([xi, yi], [xj, yj]) = (ring[i], ring[j]);
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

/// Star-shaped polygon around `(cx, cy)`: vertices at increasing angles
/// with random radii. With `convex` the radius is constant.
pub fn random_star(
    rng: &mut impl Rng,
    id: &str,
    cx: f64,
    cy: f64,
    max_r: f64,
    convex: bool,
) -> Polygon {
    loop {
        let n = rng.random_range(3..12);
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        let base = rng.random_range(0.3 * max_r..max_r);
        let ring: Vec<[f64; 2]> = angles
            .iter()
            .map(|a| {
                let r = if convex {
                    base
                } else {
                    rng.random_range(0.2 * max_r..max_r)
                };
                [cx + r * a.cos(), cy + r * a.sin()]
            })
            .collect();
        if let Ok(p) = Polygon::new(id, ring, vec![]) {
            if p.area() > 1.0 {
                return p;
            }
        }
    }
}

/// Sum of squared distances of points to their cluster means.
pub fn partition_cost(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            p.iter()
                .zip(&sums[l])
                .map(|(v, s)| (v - s / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Relabels clusters in order of first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Minimum cost over every assignment of the points into exactly `k`
/// nonempty clusters, plus all canonical partitions reaching it.
pub fn exhaustive_kmeans(points: &[Vec<f64>], k: usize) -> (f64, Vec<Vec<usize>>) {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut argbest: Vec<Vec<usize>> = Vec::new();
    let mut labels = vec![0usize; n];
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut used = vec![false; k];
        labels.iter().for_each(|&l| used[l] = true);
        if used.iter().any(|u| !u) {
            continue;
        }
        let cost = partition_cost(points, &labels, k);
        let tol = 1e-9 * (1.0 + best.abs());
        if cost < best - tol {
            best = cost;
            argbest = vec![canonical(&labels)];
        } else if (cost - best).abs() <= tol {
            let can = canonical(&labels);
            if !argbest.contains(&can) {
                argbest.push(can);
            }
        }
    }
    (best, argbest)
}

/// Points drawn around `k` blob centers far apart relative to the blob
/// radius, with every blob nonempty.
pub fn separated_blobs(rng: &mut impl Rng, n: usize, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|b| {
            (0..dim)
                .map(|d| {
                    if d == 0 {
                        10_000.0 * b as f64
                    } else {
                        rng.random_range(-50.0..50.0)
                    }
                })
                .collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            let b = if i < k { i } else { rng.random_range(0..k) };
            centers[b]
                .iter()
                .map(|c| c + rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect()
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Probability vector with strictly positive entries.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub mod cli {
    use std::collections::BTreeMap;
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    pub fn tcm(args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tcm"))
            .args(args)
            .env("TCM_LOG", "error")
            .output()
            .expect("spawn tcm")
    }

    /// Small but complete configuration, written to `dir/config.json`.
    pub fn small_config(dir: &Path) -> PathBuf {
        let path = dir.join("config.json");
        let text = r#"{
  "synth": {"height": 96, "width": 96, "n_footprints": 24},
  "calibration": {"k_grid": [8, 16], "r_grid": [100, 200], "n_random": 40},
  "splits": {"n_repeats": 6}
}"#;
        std::fs::write(&path, text).unwrap();
        path
    }

    /// Every file under `dir` keyed by its relative path.
    pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    walk(root, &path, out);
                } else {
                    out.insert(
                        path.strip_prefix(root).unwrap().to_path_buf(),
                        std::fs::read(&path).unwrap(),
                    );
                }
            }
        }
        let mut out = BTreeMap::new();
        walk(dir, dir, &mut out);
        out
    }

    /// Runs all four commands into `root/w{workers}` and returns the
    /// output snapshot of each command.
    pub fn run_pipeline(
        config: &Path,
        root: &Path,
        workers: usize,
        seed: u64,
    ) -> Vec<BTreeMap<PathBuf, Vec<u8>>> {
        let base = root.join(format!("w{workers}"));
        let data = base.join("data");
        let cfg = config.to_str().unwrap();
        let w = workers.to_string();
        let s = seed.to_string();
        let mut snaps = Vec::new();
        for (cmd, out) in [
            ("generate", data.clone()),
            ("calibrate", base.join("cal")),
            ("detect", base.join("det")),
            ("evaluate", base.join("eval")),
        ] {
            let mut args = vec![
                cmd,
                "--config",
                cfg,
                "--workers",
                &w,
                "--seed",
                &s,
                "--out",
                out.to_str().unwrap(),
            ];
            if cmd != "generate" {
                args.extend(["--data", data.to_str().unwrap()]);
            }
            let o = tcm(&args);
            assert!(
                o.status.success(),
                "{cmd} failed: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            snaps.push(snapshot(&out));
        }
        snaps
    }
}
