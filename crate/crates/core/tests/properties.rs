use approx::assert_relative_eq;
use mongeampere::analysis::convergence_rate;
use mongeampere::assembly::{matrix_jump_avg, vector_jump_avg, Assembler, JacobianTerms, ResidualTerms};
use mongeampere::felements::{interpolate, prolongate, FeFunction, FeSpace};
use mongeampere::geometry::{build_uniform_mesh, classify_edges};
use mongeampere::linsolve::{solve, spmv, SparseMatrix};
use mongeampere::tensor::{self, cof2, det2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(n: usize, k: usize) -> FeSpace {
    FeSpace::new(build_uniform_mesh(n).unwrap(), k).unwrap()
}

fn random_coeffs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn f(p: [f64; 2]) -> f64 {
    let r2 = p[0] * p[0] + p[1] * p[1];
    (1.0 + r2) * r2.exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_counts(n in 1usize..12) {
        let m = build_uniform_mesh(n).unwrap();
        let (interior, boundary) = classify_edges(&m);
        prop_assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(m.n_triangles(), 2 * n * n);
        prop_assert_eq!(boundary.len(), 4 * n);
        prop_assert_eq!(interior.len() + boundary.len(), 3 * n * n + 2 * n);
        let area: f64 = (0..m.n_triangles()).map(|t| m.signed_area(t)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cofactor_is_linear_and_expands_det(a in prop::array::uniform4(-5.0f64..5.0), b in prop::array::uniform4(-5.0f64..5.0)) {
        let ma = [[a[0], a[1]], [a[2], a[3]]];
        let mb = [[b[0], b[1]], [b[2], b[3]]];
        let sum = tensor::add(&ma, &mb);
        let lhs = det2(&sum);
        let rhs = det2(&ma) + det2(&mb) + tensor::frobenius(&cof2(&ma), &mb);
        prop_assert!((lhs - rhs).abs() < 1e-10);
        prop_assert_eq!(cof2(&sum), tensor::add(&cof2(&ma), &cof2(&mb)));
    }

    #[test]
    fn jump_product_rule(n_angle in 0.0f64..6.3, e in prop::array::uniform8(-3.0f64..3.0), v in prop::array::uniform4(-3.0f64..3.0)) {
        let n = [n_angle.cos(), n_angle.sin()];
        let ep = [[e[0], e[1]], [e[2], e[3]]];
        let em = [[e[4], e[5]], [e[6], e[7]]];
        let vp = [v[0], v[1]];
        let vm = [v[2], v[3]];
        let (lhs, _) = vector_jump_avg(&n, &tensor::mat_vec(&ep, &vp), &tensor::mat_vec(&em, &vm));
        let (ej, ea) = matrix_jump_avg(&n, &ep, &em);
        let (_, va) = vector_jump_avg(&n, &vp, &vm);
        let (avg_part, _) = vector_jump_avg(&n, &tensor::mat_vec(&ea, &vp), &tensor::mat_vec(&ea, &vm));
        prop_assert!((lhs - avg_part - tensor::dot(&ej, &va)).abs() < 1e-11);
    }

    #[test]
    fn taylor_identity_holds_for_random_fields(seed in any::<u64>(), n in 1usize..4, k in 2usize..4) {
        let s = space(n, k);
        let asm = Assembler::new(&s).unwrap();
        let w = FeFunction::new(&s, random_coeffs(s.n_dofs(), seed)).unwrap();
        let v = FeFunction::new(&s, random_coeffs(s.n_dofs(), seed ^ 0x5555)).unwrap();
        let wv = FeFunction::new(&s, w.coeffs().iter().zip(v.coeffs()).map(|(a, b)| a + b).collect()).unwrap();
        let a_wv = asm.residual(&wv, &f, ResidualTerms::ALL).unwrap();
        let a_w = asm.residual(&w, &f, ResidualTerms::ALL).unwrap();
        let jv = s.restrict_interior(&spmv(&asm.jacobian(&w, JacobianTerms::ALL).unwrap(), v.coeffs()).unwrap());
        let r = asm.remainder(&v).unwrap();
        for i in 0..s.n_interior() {
            let gap = a_wv[i] - a_w[i] - jv[i] - r[i];
            prop_assert!(gap.abs() <= 1e-11 * (1.0 + a_wv[i].abs()));
        }
    }

    #[test]
    fn jacobian_is_linear_in_the_direction(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let s = space(3, 2);
        let asm = Assembler::new(&s).unwrap();
        let w = FeFunction::new(&s, random_coeffs(s.n_dofs(), seed)).unwrap();
        let jac = asm.jacobian(&w, JacobianTerms::ALL).unwrap();
        let x = random_coeffs(s.n_dofs(), seed.wrapping_add(1));
        let y = random_coeffs(s.n_dofs(), seed.wrapping_add(2));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + alpha * b).collect();
        let lhs = spmv(&jac, &combo).unwrap();
        let jx = spmv(&jac, &x).unwrap();
        let jy = spmv(&jac, &y).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - jx[i] - alpha * jy[i]).abs() < 1e-10 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn solve_inverts_spmv(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + rng.gen_range(0.0..1.0)));
            if i + 1 < n {
                trip.push((i, i + 1, rng.gen_range(-1.0..1.0)));
                trip.push((i + 1, i, rng.gen_range(-1.0..1.0)));
            }
        }
        let m = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = spmv(&m, &x).unwrap();
        let y = solve(&m, &b, 1e-12).unwrap();
        for (a, c) in x.iter().zip(&y) {
            prop_assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn prolongation_preserves_point_values(seed in any::<u64>(), ratio in 1usize..4) {
        let coarse = space(2, 2);
        let fine = space(2 * ratio, 2);
        let u = FeFunction::new(&coarse, random_coeffs(coarse.n_dofs(), seed)).unwrap();
        let p = prolongate(&u, &fine).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            prop_assert!((u.evaluate_at(x).value - p.evaluate_at(x).value).abs() < 1e-11);
        }
    }

    #[test]
    fn rates_recover_power_laws(c in 0.01f64..100.0, p in 0.5f64..5.0) {
        let pairs: Vec<(f64, f64)> = (1..6).map(|i| {
            let h = 0.5f64.powi(i);
            (h, c * h.powf(p))
        }).collect();
        for r in convergence_rate(&pairs).unwrap() {
            assert_relative_eq!(r, p, max_relative = 1e-10);
        }
    }
}

#[test]
fn edge_terms_vanish_for_cubic_polynomials_in_p3() {
    let s = space(3, 3);
    let asm = Assembler::new(&s).unwrap();
    let p = interpolate(&s, |x| x[0].powi(3) - 2.0 * x[0] * x[0] * x[1] + x[1].powi(3) + x[0] * x[1]);
    let edge = asm.residual(&p, &|_| 1.0, ResidualTerms::EDGE).unwrap();
    assert!(edge.iter().all(|v| v.abs() < 1e-12));
    assert!(asm.jacobian(&p, JacobianTerms::COFACTOR_JUMP).unwrap().max_abs() < 1e-12);
    assert!(asm.jacobian(&p, JacobianTerms::FLUX_JUMP).unwrap().max_abs() < 1e-12);
}
