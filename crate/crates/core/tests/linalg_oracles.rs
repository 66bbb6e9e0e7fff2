use arplace::linalg::{least_squares, symmetric_eigen, symmetric_eigen_from, Matrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Matrix::from_fn(n, n, |r, c| 0.5 * (v[r * n + c] + v[c * n + r])))
}

fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

proptest! {
    #[test]
    fn eigenvalues_match_nalgebra(a in (2usize..8).prop_flat_map(symmetric)) {
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        let mut oracle: Vec<f64> = to_na(&a).symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (v, o) in vals.iter().zip(&oracle) {
            prop_assert!((v - o).abs() < 1e-9, "{v} vs {o}");
        }
        // A v = lambda v for every returned pair
        let na = to_na(&a);
        for (i, &l) in vals.iter().enumerate() {
            let v = DVector::from_vec(vecs.column(i));
            prop_assert!((&na * &v - &v * l).norm() < 1e-9);
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn warm_started_eigen_agrees(a in symmetric(5), b in symmetric(5)) {
        let (_, guess) = symmetric_eigen(&b).unwrap();
        let (cold, _) = symmetric_eigen(&a).unwrap();
        let (warm, _) = symmetric_eigen_from(&a, &guess).unwrap();
        for (c, w) in cold.iter().zip(&warm) {
            prop_assert!((c - w).abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_matches_nalgebra_svd(
        (rows, data, rhs) in (6usize..20).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * 4), prop::collection::vec(-3.0f64..3.0, n)))
    ) {
        let a = Matrix::from_fn(rows, 4, |r, c| data[r * 4 + c] + if r == c { 2.0 } else { 0.0 });
        let x = least_squares(&a, &rhs).unwrap();
        let oracle = to_na(&a).svd(true, true).solve(&DVector::from_vec(rhs.clone()), 1e-14).unwrap();
        for (u, v) in x.iter().zip(oracle.iter()) {
            prop_assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }
}

#[test]
fn least_squares_rejects_rank_deficiency() {
    let a = Matrix::from_fn(5, 2, |r, _| r as f64);
    assert!(least_squares(&a, &[1.0; 5]).is_err());
}
