mod common;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sif_core::linalg::{cholesky_downdate, factor_spd, random_orthogonal, triangularize};
use sif_core::model::wrap_angle;
use sif_core::sir::{concatenate, generate_iteration, integrate_with_factor, vector_integrand, SirConfig};
use sif_core::sqrt::WeightedDeviationMatrix;
use sif_core::RngStream;

use common::*;

fn matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_map(move |a| &a * a.transpose() + DMatrix::identity(n, n))
}

proptest! {
    #[test]
    fn spd_factor_reconstructs(p in (1usize..7).prop_flat_map(spd)) {
        let s = factor_spd(&p).unwrap();
        prop_assert!(rel(&(&s * s.transpose()), &p) < 1e-10);
        for i in 0..s.nrows() {
            prop_assert!(s[(i, i)] > 0.0);
            for j in i + 1..s.ncols() {
                prop_assert_eq!(s[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn triangularization_preserves_gram(
        m in (1usize..6, 0usize..12).prop_flat_map(|(r, extra)| matrix(r, r + extra))
    ) {
        let t = triangularize(&m).unwrap();
        let gram = &m * m.transpose();
        prop_assert!((&t * t.transpose() - &gram).norm() <= 1e-10 * gram.norm().max(1e-300));
        for i in 0..t.nrows() {
            prop_assert!(t[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn downdate_matches_refactorization(p in spd(4), x in prop::collection::vec(-0.5f64..0.5, 4)) {
        let l = factor_spd(&p).unwrap();
        let x = DVector::from_vec(x);
        let target = &p - &x * x.transpose();
        if let Ok(direct) = factor_spd(&target) {
            if target.clone().symmetric_eigenvalues().min() > 1e-6 {
                let down = cholesky_downdate(&l, &x).unwrap();
                prop_assert!((down - direct).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn wrap_is_congruent_and_in_range(theta in -100.0f64..100.0) {
        let w = wrap_angle(theta);
        prop_assert!(w > -PI && w <= PI);
        let k = (theta - w) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn sir_points_reproduce_covariance(seed in any::<u64>(), p in spd(4)) {
        let mut rng = RngStream::new(seed, 0);
        let mean = normal_vector(4, &mut rng);
        let s = factor_spd(&p).unwrap();
        let it = generate_iteration(&mean, &s, &mut rng).unwrap();
        let total: f64 = it.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mut scatter = DMatrix::zeros(4, 4);
        for (x, w) in it.points.iter().zip(&it.weights) {
            let d = x - &mean;
            scatter += &d * d.transpose() * *w;
        }
        prop_assert!(rel(&scatter, &p) < 1e-10);
    }

    #[test]
    fn concatenated_set_equals_recursive_estimate(seed in any::<u64>(), n in 1usize..5, iters in 1usize..8) {
        let mut rng = RngStream::new(seed, 1);
        let g = random_gaussian(n, &mut rng);
        let a = normal_vector(n, &mut rng);
        let f = move |x: &DVector<f64>| DVector::from_vec(vec![(a.dot(x)).sin(), x.norm_squared().sqrt()]);
        let factor = g.factor().unwrap();
        let stream = RngStream::new(seed, 2);
        let recursive = integrate_with_factor(
            &vector_integrand(2, &f),
            &g.mean,
            &factor,
            &SirConfig::with_max_iterations(iters),
            &mut stream.clone(),
        )
        .unwrap();
        let mut s = stream.clone();
        let its: Vec<_> = (0..iters).map(|_| generate_iteration(&g.mean, &factor, &mut s).unwrap()).collect();
        let set = concatenate(&its).unwrap();
        prop_assert_eq!(set.len(), iters * 2 * n + 1);
        let flat = set.weighted_sum(&f);
        for i in 0..2 {
            prop_assert!((flat[i] - recursive.value[(i, 0)]).abs() < 1e-12 * recursive.value[(i, 0)].abs().max(1.0));
        }
    }

    #[test]
    fn signed_gram_equals_weighted_scatter(
        seed in any::<u64>(),
        weights in prop::collection::vec(-1.0f64..1.0, 3..9),
    ) {
        let mut rng = RngStream::new(seed, 3);
        let values: Vec<DVector<f64>> = weights.iter().map(|_| normal_vector(3, &mut rng)).collect();
        let center = normal_vector(3, &mut rng);
        let dev = WeightedDeviationMatrix::from_points(&values, &center, &weights);
        let mut expected = DMatrix::zeros(3, 3);
        for (v, w) in values.iter().zip(&weights) {
            let d = v - &center;
            expected += &d * d.transpose() * *w;
        }
        prop_assert!((dev.signed_gram() - &expected).amax() < 1e-10 * expected.amax().max(1.0));
    }

    #[test]
    fn haar_draws_are_orthogonal(seed in any::<u64>(), n in 1usize..8) {
        let q = random_orthogonal(n, &mut RngStream::new(seed, 4)).unwrap();
        prop_assert!((q.transpose() * &q - DMatrix::identity(n, n)).amax() < 1e-12);
    }
}

#[test]
fn wrap_examples() {
    assert_eq!(wrap_angle(0.0), 0.0);
    assert!((wrap_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    assert!((wrap_angle(-3.5 * PI) - PI / 2.0).abs() < 1e-12);
    assert_eq!(wrap_angle(PI), PI);
    assert_eq!(wrap_angle(-PI), PI);
}
