use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::RngCore;
use sdlc_core::geometry::{angle, disagreement_mass, in_disagreement, sample_sphere, tan_theta, unit_at_angle};
use sdlc_core::linalg::{jacobi_eigen, Matrix};
use sdlc_core::{RngStream, Vector};

fn nonzero_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..8).prop_flat_map(|d| {
        let coord = -10.0f64..10.0;
        (prop::collection::vec(coord.clone(), d), prop::collection::vec(coord, d))
    })
    .prop_filter("nonzero inputs", |(u, v)| {
        u.iter().map(|x| x * x).sum::<f64>() > 1e-6 && v.iter().map(|x| x * x).sum::<f64>() > 1e-6
    })
}

proptest! {
    #[test]
    fn angle_is_symmetric((u, v) in nonzero_pair()) {
        let (u, v) = (Vector::new(u).unwrap(), Vector::new(v).unwrap());
        prop_assert_eq!(angle(&u, &v).unwrap(), angle(&v, &u).unwrap());
    }

    #[test]
    fn angle_is_scale_invariant((u, v) in nonzero_pair(), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let (u, v) = (Vector::new(u).unwrap(), Vector::new(v).unwrap());
        let base = angle(&u, &v).unwrap();
        let scaled = angle(&u.scaled(a), &v.scaled(b)).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9, "{base} vs {scaled}");
    }

    #[test]
    fn tan_matches_angle((u, v) in nonzero_pair()) {
        let (u, v) = (Vector::new(u).unwrap(), Vector::new(v).unwrap());
        let th = angle(&u, &v).unwrap();
        prop_assume!(th < FRAC_PI_2 - 1e-3);
        let t = tan_theta(&u, &v).unwrap();
        prop_assert!((t - th.tan()).abs() <= 1e-8 * th.tan().max(1.0), "{t} vs {}", th.tan());
    }

    #[test]
    fn unit_at_angle_hits_the_angle(seed in any::<u64>(), d in 2usize..12, theta in 0.0f64..PI) {
        let mut rng = RngStream::new(seed, 0);
        let u = sample_sphere(d, &mut rng).unwrap();
        let v = unit_at_angle(&u, theta, &mut rng).unwrap();
        prop_assert!(v.is_unit());
        prop_assert!((angle(&u, &v).unwrap() - theta).abs() < 1e-7);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::new(seed, stream).child(3);
        let mut e = RngStream::new(seed, stream).child(3);
        prop_assert_eq!(sample_sphere(5, &mut c).unwrap(), sample_sphere(5, &mut e).unwrap());
    }

    // Checks the eigen-solver against a dense reference implementation.
    #[test]
    fn jacobi_matches_reference(entries in prop::collection::vec(-5.0f64..5.0, 36)) {
        let n = 6;
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (entries[i * n + j] + entries[j * n + i]) / 2.0).collect())
            .collect();
        let ours = jacobi_eigen(&Matrix::from_rows(&sym).unwrap()).unwrap();
        let reference = nalgebra::DMatrix::from_fn(n, n, |i, j| sym[i][j]).symmetric_eigen();
        let mut expected: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.values.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn disagreement_fraction_matches_mass() {
    let mut rng = RngStream::new(2024, 0);
    let d = 6;
    let samples = 1_000_000;
    for theta in [0.3, 1.2, 2.5] {
        let u = sample_sphere(d, &mut rng).unwrap();
        let v = unit_at_angle(&u, theta, &mut rng).unwrap();
        let hits = (0..samples)
            .filter(|_| in_disagreement(&sample_sphere(d, &mut rng).unwrap(), &u, &v))
            .count();
        let p = disagreement_mass(theta);
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let emp = hits as f64 / samples as f64;
        assert!((emp - p).abs() <= 3.0 * se, "theta {theta}: {emp} vs {p} ± {se}");
    }
}

#[test]
fn sphere_samples_are_unit() {
    let mut rng = RngStream::new(1, 1);
    for d in 1..20 {
        for _ in 0..50 {
            assert!(sample_sphere(d, &mut rng).unwrap().is_unit());
        }
    }
}
