use asg_core::contrastive::{nt_xent_loss, LossConfig, ViewLayout};
use asg_core::nn::Tensor;
use asg_core::oracle::nt_xent_brute_force;
use proptest::prelude::*;

/// `(n, d, rows)` for a quadruple layout with `4n` rows of dimension `d`.
fn embeddings() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..5, 2usize..12).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![-1.0f64..-0.05, 0.05f64..1.0], 4 * n * d).prop_map(move |v| (n, d, v))
    })
}

fn loss(n: usize, d: usize, v: Vec<f64>, tau: f64) -> (f64, Tensor<f64>) {
    let z = Tensor::new(vec![4 * n, d], v).unwrap();
    nt_xent_loss(&z, &ViewLayout::quadruple(n), &LossConfig { temperature: tau }).unwrap()
}

proptest! {
    #[test]
    fn matches_brute_force((n, d, v) in embeddings(), tau in 0.05f64..2.0) {
        let z = Tensor::new(vec![4 * n, d], v.clone()).unwrap();
        let (fast, _) = loss(n, d, v, tau);
        let (slow, _) = nt_xent_brute_force(&z, &ViewLayout::quadruple(n), tau);
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs(), "{} vs {}", fast, slow);
    }

    #[test]
    fn invariant_to_row_scaling((n, d, v) in embeddings(), scales in prop::collection::vec(0.01f64..100.0, 16)) {
        let scaled: Vec<f64> = v.chunks(d).enumerate().flat_map(|(i, r)| { let k = scales[i % 16]; r.iter().map(move |x| x * k) }).collect();
        let (a, _) = loss(n, d, v, 0.1);
        let (b, _) = loss(n, d, scaled, 0.1);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn invariant_to_sample_order((n, d, v) in embeddings(), rot in 0usize..8) {
        // the same cyclic shift of samples in every block
        let rot = rot % n;
        let mut permuted = Vec::with_capacity(v.len());
        for block in 0..4 {
            for i in 0..n {
                let src = block * n + (i + rot) % n;
                permuted.extend_from_slice(&v[src * d..(src + 1) * d]);
            }
        }
        let (a, _) = loss(n, d, v, 0.1);
        let (b, _) = loss(n, d, permuted, 0.1);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn gradient_is_orthogonal_to_each_row((n, d, v) in embeddings()) {
        // scale invariance means d/dt L(z_j (1 + t)) = 0
        let (_, grad) = loss(n, d, v.clone(), 0.1);
        for (row, g) in v.chunks(d).zip(grad.data().chunks(d)) {
            let dot: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            let scale = row.iter().map(|x| x * x).sum::<f64>().sqrt() * g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn pairs_layout_matches_brute_force(n in 1usize..6, d in 2usize..8, seed in any::<u64>()) {
        use rand::Rng as _;
        let mut rng = asg_core::rng::rng_from_seed(seed);
        let layout = ViewLayout::pairs(n);
        let z = Tensor::new(vec![2 * n, d], (0..2 * n * d).map(|_| rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()).unwrap();
        let (fast, _) = nt_xent_loss(&z, &layout, &LossConfig::default()).unwrap();
        let (slow, _) = nt_xent_brute_force(&z, &layout, 0.1);
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1e-300));
    }
}

#[test]
fn zero_row_is_rejected() {
    let mut v = vec![1.0; 8];
    v[2] = 0.0;
    v[3] = 0.0;
    let z = Tensor::new(vec![4, 2], v).unwrap();
    assert!(nt_xent_loss(&z, &ViewLayout::quadruple(1), &LossConfig::default()).is_err());
}
