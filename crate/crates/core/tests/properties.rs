use approx::assert_relative_eq;
use proptest::prelude::*;
use tscond::eval::auc;
use tscond::privacy::{histogram, min_distances_c2o, min_distances_o2o, Population};
use tscond::tensor::Tensor;

/// Scores with both classes present.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..40).prop_flat_map(|n| {
        (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(0u8..2, n)).prop_map(|(s, mut l)| {
            l[0] = 0;
            l[1] = 1;
            (s, l)
        })
    })
}

fn brute_auc(s: &[f64], l: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in l.iter().enumerate() {
        for (j, &lj) in l.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                wins += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn rows(n: usize, d: usize) -> impl Strategy<Value = Tensor<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| Tensor::new(vec![n, d, 1], v).unwrap())
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((s, l) in scored()) {
        assert_relative_eq!(auc(&s, &l).unwrap(), brute_auc(&s, &l), epsilon = 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_rescaling((s, l) in scored(), a in 0.1f64..10.0, b in -3.0f64..3.0) {
        let t: Vec<f64> = s.iter().map(|x| (a * x + b).exp()).collect();
        assert_relative_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn negated_scores_flip_auc((s, l) in scored()) {
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert_relative_eq!(auc(&s, &l).unwrap() + auc(&neg, &l).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_counts_every_value(v in prop::collection::vec(0.0f64..100.0, 1..200), bins in 1usize..30) {
        let h = histogram(&v, bins, Population::CondensedToOriginal).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), v.len());
        prop_assert_eq!(h.edges.len(), h.counts.len() + 1);
        prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn o2o_follows_a_row_permutation(x in rows(7, 4), shift in 1usize..7) {
        let (n, d) = (7, 4);
        let mut permuted = vec![0.0; n * d];
        for i in 0..n {
            let src = (i + shift) % n;
            permuted[i * d..(i + 1) * d].copy_from_slice(&x.data()[src * d..(src + 1) * d]);
        }
        let base = min_distances_o2o(&x).unwrap();
        let moved = min_distances_o2o(&Tensor::new(vec![n, d, 1], permuted).unwrap()).unwrap();
        for i in 0..n {
            assert_relative_eq!(moved[i], base[(i + shift) % n], epsilon = 1e-12);
        }
    }

    #[test]
    fn copied_rows_sit_at_distance_zero(x in rows(6, 3), pick in prop::collection::vec(0usize..6, 1..5)) {
        let mut copies = Vec::new();
        for &i in &pick {
            copies.extend_from_slice(&x.data()[i * 3..(i + 1) * 3]);
        }
        let c = Tensor::new(vec![pick.len(), 3, 1], copies).unwrap();
        prop_assert!(min_distances_c2o(&c, &x).unwrap().iter().all(|&d| d == 0.0));
    }
}
