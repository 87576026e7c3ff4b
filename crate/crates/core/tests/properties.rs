use proptest::prelude::*;

use steermap::dimbound::{data_matrix, pauli_basis, CorrelatorTable, DataScenario};
use steermap::ensemble::{assemble, homogeneous_basis, special_solution, Ensemble, Povm};
use steermap::lhs_sdp::{decide, LhsConfig};
use steermap::linalg::{
    c, determinant, eig_hermitian, partial_transpose, singular_values, CMatrix, Hermitian, Side,
};
use steermap::separability::{ccnr, ccnr_with, flip_expectation, ppt, swap_value, LocalBasis};
use steermap::steering_map::{build_sigma, cube_zset, mub_zset, sigma_from_model, validate_zset};

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
        CMatrix::from_fn(rows, cols, |i, j| {
            let (re, im) = v[i * cols + j];
            c(re, im)
        })
    })
}

fn hermitian(n: usize) -> impl Strategy<Value = Hermitian> {
    complex_matrix(n, n).prop_map(|m| Hermitian::from_hermitian_part(&m))
}

fn density(n: usize) -> impl Strategy<Value = Hermitian> {
    complex_matrix(n, n).prop_map(move |g| {
        let m = &g * &g.adjoint();
        let h = Hermitian::from_hermitian_part(&m).add(&Hermitian::identity(n).scale(1e-3));
        let t = h.trace_re();
        h.scale(1.0 / t)
    })
}

fn unitary(n: usize) -> impl Strategy<Value = CMatrix> {
    hermitian(n).prop_map(|h| eig_hermitian(&h).vectors)
}

fn orthogonal(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let mut r: Vec<f64> = v[i * n..(i + 1) * n].to_vec();
            r[i] += 2.0;
            for q in &rows {
                let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                for (a, b) in r.iter_mut().zip(q) {
                    *a -= dot * b;
                }
            }
            let norm = r.iter().map(|a| a * a).sum::<f64>().sqrt();
            rows.push(r.into_iter().map(|a| a / norm).collect());
        }
        rows
    })
}

/// Ensemble of `n` projective measurements in random bases on a random state.
fn ensemble(n: usize, d: usize) -> impl Strategy<Value = Ensemble> {
    (density(d * d), prop::collection::vec(unitary(d), n)).prop_map(move |(rho, us)| {
        let povms: Vec<Povm> = us.iter().map(|u| Povm::from_basis(u).unwrap()).collect();
        assemble(&rho, d, &povms).unwrap()
    })
}

/// Mixture of three product states, measured along random bases.
fn separable_ensemble(n: usize) -> impl Strategy<Value = Ensemble> {
    (
        prop::collection::vec((density(2), density(2), 0.05f64..1.0), 3),
        prop::collection::vec(unitary(2), n),
    )
        .prop_map(move |(terms, us)| {
            let total: f64 = terms.iter().map(|t| t.2).sum();
            let rho = terms
                .iter()
                .fold(Hermitian::zeros(4), |acc, (a, b, w)| acc.add_scaled(&a.kron(b), w / total));
            let povms: Vec<Povm> = us.iter().map(|u| Povm::from_basis(u).unwrap()).collect();
            assemble(&rho, 2, &povms).unwrap()
        })
}

fn max_state_diff(a: &Ensemble, b: &Ensemble) -> f64 {
    let p = a.params();
    (0..p.n)
        .flat_map(|x| (0..p.m).map(move |o| (o, x)))
        .map(|(o, x)| a.state(o, x).max_abs_diff(b.state(o, x)))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_reconstructs(h in (2usize..7).prop_flat_map(hermitian)) {
        let n = h.dim();
        let eig = eig_hermitian(&h);
        prop_assert!(eig.reconstruct().max_abs_diff(h.matrix()) < 1e-10);
        let u = &eig.vectors;
        prop_assert!((&u.adjoint() * u).max_abs_diff(&CMatrix::identity(n)) < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn singular_values_match_norms(m in complex_matrix(5, 5)) {
        let sv = singular_values(&m);
        let fro2: f64 = sv.iter().map(|s| s * s).sum();
        prop_assert!((fro2 - m.frobenius_norm().powi(2)).abs() < 1e-9);
        let prod: f64 = sv.iter().product();
        prop_assert!((prod - determinant(&m).unwrap().norm()).abs() < 1e-6 * (1.0 + prod));
    }

    #[test]
    fn determinant_is_multiplicative(a in complex_matrix(8, 8), b in complex_matrix(8, 8)) {
        let lhs = determinant(&(&a * &b)).unwrap();
        let rhs = determinant(&a).unwrap() * determinant(&b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn partial_transpose_is_an_involution(h in hermitian(6)) {
        for side in [Side::A, Side::B] {
            let once = partial_transpose(&h, (2, 3), side).unwrap();
            prop_assert!((once.trace_re() - h.trace_re()).abs() < 1e-12);
            let twice = partial_transpose(&once, (2, 3), side).unwrap();
            prop_assert!(twice.max_abs_diff(h.matrix()) < 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn special_solution_reproduces(e in ensemble(3, 2)) {
        prop_assert!(e.validate().is_valid());
        let w = special_solution(&e);
        prop_assert!(w.max_deviation(&e) < 1e-12);
        let r = w.reproduce();
        prop_assert!(max_state_diff(&r, &e) < 1e-12);
    }

    #[test]
    fn homogeneous_shift_keeps_model_and_sigma(
        e in ensemble(3, 2),
        xs in prop::collection::vec(hermitian(2), 4),
    ) {
        let basis = homogeneous_basis(e.params().index_space());
        prop_assert_eq!(basis.len(), 4);
        let spec = special_solution(&e);
        let shifted = spec.shifted(&basis, &xs).unwrap();
        prop_assert!(shifted.max_deviation(&e) < 1e-12);
        let z = cube_zset();
        let a = sigma_from_model(&z, &spec);
        let b = sigma_from_model(&z, &shifted);
        prop_assert!(a.matrix.max_abs_diff(b.matrix.matrix()) < 1e-12);
    }

    #[test]
    fn homogeneous_shift_mub_scenario(
        e in ensemble(2, 3),
        xs in prop::collection::vec(hermitian(3), 4),
    ) {
        let basis = homogeneous_basis(e.params().index_space());
        prop_assert_eq!(basis.len(), 4);
        let spec = special_solution(&e);
        let shifted = spec.shifted(&basis, &xs).unwrap();
        let z = mub_zset(3).unwrap();
        let a = sigma_from_model(&z, &spec);
        let b = sigma_from_model(&z, &shifted);
        prop_assert!(a.matrix.max_abs_diff(b.matrix.matrix()) < 1e-12);
    }

    #[test]
    fn swap_value_two_ways(e in ensemble(2, 3)) {
        let z = mub_zset(3).unwrap();
        let direct = swap_value(&z, &e).unwrap();
        let via_sigma = flip_expectation(&build_sigma(&z, &e).unwrap()).unwrap();
        prop_assert!((direct - via_sigma).abs() < 1e-12);
    }

    #[test]
    fn ccnr_is_basis_independent(e in ensemble(3, 2), ra in orthogonal(4), rb in orthogonal(4)) {
        let s = build_sigma(&cube_zset(), &e).unwrap();
        let base = ccnr(&s).value;
        let ba = LocalBasis::gell_mann(2).rotated(&ra).unwrap();
        let bb = LocalBasis::gell_mann(2).rotated(&rb).unwrap();
        let v = ccnr_with(&s, &ba, &bb, &Default::default()).unwrap().value;
        prop_assert!((base - v).abs() < 1e-9);
    }

    #[test]
    fn rotated_cube_stays_valid(u in unitary(2)) {
        let z = cube_zset().map_members(|_, m| m.conjugate_by(&u));
        prop_assert!(validate_zset(&z).is_valid());
    }

    #[test]
    fn dimbound_invariant_under_pauli_rotation(
        corr in prop::collection::vec(-1.0f64..1.0, 9),
        marg in prop::collection::vec(-1.0f64..1.0, 6),
        r in orthogonal(3),
    ) {
        let rows: Vec<Vec<f64>> = corr.chunks(3).map(|c| c.to_vec()).collect();
        let t = CorrelatorTable::new(3, 3, rows, marg[..3].to_vec(), marg[3..].to_vec()).unwrap();
        let base = data_matrix(&t, &DataScenario::Cube3x2).unwrap().determinant().unwrap();
        let mut full = vec![vec![0.0; 4]; 4];
        full[0][0] = 1.0;
        for i in 0..3 {
            for j in 0..3 {
                full[i + 1][j + 1] = r[i][j];
            }
        }
        let basis = pauli_basis(&[1, 2, 3]).unwrap().rotated(&full).unwrap();
        let custom = DataScenario::Custom { zset: cube_zset(), basis };
        let rotated = data_matrix(&t, &custom).unwrap().determinant().unwrap();
        prop_assert!((base.abs() - rotated.abs()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separable_states_are_never_detected(e in separable_ensemble(3)) {
        let v = decide(&e, &LhsConfig::default()).unwrap();
        prop_assert!(!v.steerable, "margin {}", v.margin);
        let s = build_sigma(&cube_zset(), &e).unwrap();
        prop_assert!(!ppt(&s).detected);
        prop_assert!(!ccnr(&s).detected);
        prop_assert!(!swap_value(&cube_zset(), &e).map(|v| v < -1e-9).unwrap());
    }

    #[test]
    fn map_detection_implies_lhs_steerable(e in ensemble(3, 2)) {
        let s = build_sigma(&cube_zset(), &e).unwrap();
        let v = decide(&e, &LhsConfig::default()).unwrap();
        if ppt(&s).detected || ccnr(&s).detected {
            prop_assert!(v.steerable);
        }
        if v.steerable {
            if let Some(z) = &v.witness {
                prop_assert!(validate_zset(z).is_valid());
                prop_assert!(swap_value(z, &e).unwrap() < 0.0);
            }
        } else {
            prop_assert!(v.model.min_eigenvalue() >= -1e-8);
            prop_assert!(v.model.max_deviation(&e) < 1e-8);
        }
    }
}
