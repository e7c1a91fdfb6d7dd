use lutnet::clustering::{
    fit_laplacian_codebook, kmeans_1d, laplacian_levels, subsample, ClusterMethod, KMeans,
    WeightCodebook,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Globally optimal 1-D k-means by dynamic programming over sorted values.
fn dp_kmeans(values: &[f64], k: usize) -> (Vec<f64>, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + v[i];
        s2[i + 1] = s2[i] + v[i] * v[i];
    }
    let cost = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = s1[b] - s1[a];
        s2[b] - s2[a] - s * s / m
    };
    let inf = f64::INFINITY;
    let mut d = vec![vec![inf; n + 1]; k + 1];
    let mut arg = vec![vec![0usize; n + 1]; k + 1];
    d[0][0] = 0.0;
    for c in 1..=k {
        for b in c..=n {
            for a in c - 1..b {
                let val = d[c - 1][a] + cost(a, b);
                if val < d[c][b] {
                    d[c][b] = val;
                    arg[c][b] = a;
                }
            }
        }
    }
    let mut centers = vec![0.0; k];
    let mut b = n;
    for c in (1..=k).rev() {
        let a = arg[c][b];
        centers[c - 1] = (s1[b] - s1[a]) / (b - a) as f64;
        b = a;
    }
    (centers, d[k][n])
}

fn sse(values: &[f64], cb: &WeightCodebook) -> f64 {
    values
        .iter()
        .map(|&v| {
            let c = cb.centers()[cb.nearest(v)];
            (v - c) * (v - c)
        })
        .sum()
}

#[test]
fn lloyd_matches_dp_on_gaussian_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
    let (oracle, oracle_sse) = dp_kmeans(&values, 3);
    let cb = kmeans_1d(&values, 3, 200).unwrap();
    for (c, o) in cb.centers().iter().zip(&oracle) {
        assert!((c - o).abs() < 0.01, "lloyd {c} vs dp {o}");
    }
    for (c, e) in cb.centers().iter().zip([-1.224, 0.0, 1.224]) {
        assert!((c - e).abs() < 0.1, "{c} vs Lloyd-Max {e}");
    }
    let got = sse(&values, &cb);
    assert!(got >= oracle_sse - 1e-9 && got <= oracle_sse * 1.0001);
}

#[test]
fn laplacian_levels_match_closed_form() {
    // The recurrence telescopes to exp(L_i) = N / (N - 2i).
    for n in [3usize, 11, 101, 1001, 4001] {
        let levels = laplacian_levels(n).unwrap();
        assert_eq!(levels.len(), (n - 1) / 2);
        for (i, l) in levels.iter().enumerate() {
            let i = i as f64 + 1.0;
            let exact = -(-2.0 * i / n as f64).ln_1p();
            assert!((l - exact).abs() <= 1e-12 * exact.max(1.0), "N={n} i={i}: {l} vs {exact}");
        }
        let deltas: Vec<f64> = std::iter::once(levels[0])
            .chain(levels.windows(2).map(|w| w[1] - w[0]))
            .collect();
        assert!(deltas.windows(2).all(|w| w[1] > w[0]));
    }
    let l1 = laplacian_levels(1001).unwrap()[0];
    assert!((l1 - 0.0020000).abs() < 1e-6);
}

fn codebook(centers: &[f64]) -> WeightCodebook {
    let mut c = centers.to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup();
    WeightCodebook::from_centers(c, ClusterMethod::KMeans).unwrap()
}

proptest! {
    #[test]
    fn assignment_matches_linear_scan(
        centers in prop::collection::vec(-5.0f64..5.0, 1..16),
        values in prop::collection::vec(-8.0f64..8.0, 1..200),
    ) {
        let cb = codebook(&centers);
        for (&v, &k) in values.iter().zip(&cb.assign(&values)) {
            let mut best = 0;
            for (i, c) in cb.centers().iter().enumerate() {
                if (v - c).abs() < (v - cb.centers()[best]).abs() {
                    best = i;
                }
            }
            prop_assert_eq!(k as usize, best);
        }
    }

    #[test]
    fn lloyd_objective_never_increases(
        values in prop::collection::vec(-3.0f64..3.0, 20..300),
        k in 2usize..8,
    ) {
        let distinct = {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        prop_assume!(distinct >= k);
        let fit = KMeans::new(k).max_iters(50).fit(&values).unwrap();
        for w in fit.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        prop_assert_eq!(fit.codebook.len(), k);
    }

    #[test]
    fn snapping_is_idempotent(
        values in prop::collection::vec(-3.0f64..3.0, 10..200),
        k in 2usize..6,
    ) {
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        prop_assume!(v.len() >= k);
        let cb = kmeans_1d(&values, k, 50).unwrap();
        let mut once = values.clone();
        cb.snap_in_place(&mut once);
        let mut twice = once.clone();
        cb.snap_in_place(&mut twice);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn laplacian_codebook_is_symmetric(
        half in prop::collection::vec(0.01f64..2.0, 5..100),
        n in (1usize..40).prop_map(|h| 2 * h + 1),
    ) {
        let values: Vec<f64> = half.iter().flat_map(|&v| [v, -v]).collect();
        let cb = fit_laplacian_codebook(&values, n).unwrap();
        prop_assert!(cb.mean.abs() < 1e-12);
        let c = cb.centers();
        for i in 0..c.len() {
            prop_assert!((c[i] + c[c.len() - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn subsample_size_and_determinism(n in 1usize..2000, pct in 1u32..=100, seed in any::<u64>()) {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let f = f64::from(pct) / 100.0;
        let a = subsample(&values, f, seed).unwrap();
        prop_assert_eq!(a.len(), ((f * n as f64) - 1e-9).ceil() as usize);
        prop_assert_eq!(a, subsample(&values, f, seed).unwrap());
    }
}

#[test]
fn subsample_two_percent_of_thousand() {
    let values: Vec<f64> = (0..1000).map(f64::from).collect();
    assert_eq!(subsample(&values, 0.02, 1).unwrap().len(), 20);
    let mut all = subsample(&values, 1.0, 1).unwrap();
    all.sort_by(f64::total_cmp);
    assert_eq!(all, values);
}
