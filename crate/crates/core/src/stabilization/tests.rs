use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn dense(m: &CsrMatrix<f64>) -> Vec<Vec<f64>> {
    m.to_dense()
}

/// Random matrix with a structurally symmetric pattern and a full diagonal.
fn random_system(rng: &mut ChaCha8Rng, n: usize) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, rng.gen_range(0.5..4.0)));
        for j in i + 1..n {
            if rng.gen_bool(0.35) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
                t.push((j, i, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

fn random_u(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn stabilizer(method: Method, a: &CsrMatrix<f64>, rng: &mut ChaCha8Rng) -> Stabilizer<f64> {
    let n = a.nrows();
    let geometry = BjkGeometry {
        gamma: (0..n).map(|_| rng.gen_range(1.0..3.0)).collect(),
    };
    Stabilizer::new(method, a.clone(), vec![false; n], Some(geometry)).unwrap()
}

#[test]
fn diffusion_of_two_by_two() {
    let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![-3.0, 4.0]]);
    let d = artificial_diffusion(&a).unwrap();
    assert_eq!(dense(&d), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
}

#[test]
fn diffusion_vanishes_for_nonpositive_off_diagonals() {
    let a = CsrMatrix::from_dense(&[
        vec![2.0, -1.0, 0.0],
        vec![-0.5, 2.0, -1.0],
        vec![0.0, -2.0, 3.0],
    ]);
    let d = artificial_diffusion(&a).unwrap();
    assert!(d.values().iter().all(|&v| v == 0.0));
}

#[test]
fn diffusion_properties_on_random_patterns() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a = random_system(&mut rng, 10);
        let d = dense(&artificial_diffusion(&a).unwrap());
        let ad = dense(&a.add(&artificial_diffusion(&a).unwrap()));
        for i in 0..10 {
            assert!(d[i].iter().sum::<f64>().abs() < 1e-14);
            for j in 0..10 {
                assert_eq!(d[i][j], d[j][i]);
                if i != j {
                    assert!(d[i][j] <= 0.0);
                    assert!(ad[i][j] <= 1e-15);
                }
            }
        }
    }
}

#[test]
fn missing_diagonal_is_reported() {
    let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
    assert!(matches!(artificial_diffusion(&a), Err(Error::MissingDiagonal(0))));
}

#[test]
fn kuzmin_three_node_oracle() {
    // d_02 = -1 is the only coupling; f_02 = -2 and the tie a_02 = a_20 is
    // owned by node 0, so P_0^- = -2, Q_0^- = 0 and alpha_02 = R_0^- = 0.
    let a = CsrMatrix::from_dense(&[
        vec![2.0, -1.0, 1.0],
        vec![-1.0, 2.0, -1.0],
        vec![1.0, -1.0, 2.0],
    ]);
    let alpha = compute_limiters(Method::Kuzmin, &a, &[0.0, 1.0, 2.0], None, &[false; 3]).unwrap();
    let at = |i, j| alpha.values[a.position(i, j).unwrap()];
    assert_eq!(at(0, 2), 0.0);
    assert_eq!(at(2, 0), 0.0);
    assert_eq!(at(0, 1), 1.0);
    assert_eq!(at(1, 2), 1.0);
    let b = assemble_stabilization(Method::Kuzmin, &a, &alpha).unwrap();
    assert_eq!(b, artificial_diffusion(&a).unwrap());
}

/// Straight transcription of the limiter steps on dense matrices.
fn dense_oracle(method: Method, a: &[Vec<f64>], u: &[f64], gamma: &[f64]) -> Vec<Vec<f64>> {
    let n = a.len();
    let pattern = |i: usize, j: usize| i != j && (a[i][j] != 0.0 || a[j][i] != 0.0);
    let d = |i: usize, j: usize| -a[i][j].max(0.0).max(a[j][i]);
    let r = |q: f64, p: f64| if p == 0.0 { 1.0 } else { (q / p).min(1.0) };
    let mut alpha = vec![vec![1.0; n]; n];
    match method {
        Method::Kuzmin => {
            for i in 0..n {
                let owned = |j: usize| a[j][i] < a[i][j] || (a[j][i] == a[i][j] && i < j);
                let (mut pp, mut pm, mut qp, mut qm) = (0.0, 0.0, 0.0, 0.0);
                for j in (0..n).filter(|&j| pattern(i, j)) {
                    let f = d(i, j) * (u[j] - u[i]);
                    if owned(j) {
                        pp += f.max(0.0);
                        pm += f.min(0.0);
                    }
                    qp -= f.min(0.0);
                    qm -= f.max(0.0);
                }
                for j in (0..n).filter(|&j| pattern(i, j) && owned(j)) {
                    let f = d(i, j) * (u[j] - u[i]);
                    let v = if f > 0.0 {
                        r(qp, pp)
                    } else if f < 0.0 {
                        r(qm, pm)
                    } else {
                        1.0
                    };
                    alpha[i][j] = v;
                    alpha[j][i] = v;
                }
            }
        }
        Method::Bjk => {
            let mut bar = vec![vec![1.0; n]; n];
            for i in 0..n {
                let nb: Vec<usize> = (0..n).filter(|&j| pattern(i, j)).collect();
                let pp: f64 = nb.iter().map(|&j| (d(i, j) * (u[j] - u[i])).max(0.0)).sum();
                let pm: f64 = nb.iter().map(|&j| (d(i, j) * (u[j] - u[i])).min(0.0)).sum();
                let q: f64 = nb.iter().map(|&j| gamma[i] * d(i, j)).sum();
                let umax = nb.iter().map(|&j| u[j]).fold(u[i], f64::max);
                let umin = nb.iter().map(|&j| u[j]).fold(u[i], f64::min);
                for &j in &nb {
                    let f = d(i, j) * (u[j] - u[i]);
                    bar[i][j] = if f > 0.0 {
                        r(q * (u[i] - umax), pp)
                    } else if f < 0.0 {
                        r(q * (u[i] - umin), pm)
                    } else {
                        1.0
                    };
                }
            }
            for i in 0..n {
                for j in 0..n {
                    alpha[i][j] = bar[i][j].min(bar[j][i]);
                }
            }
        }
        Method::Muas => {
            for i in 0..n {
                let nb: Vec<usize> = (0..n).filter(|&j| pattern(i, j)).collect();
                let pp: f64 = nb
                    .iter()
                    .filter(|&&j| a[i][j] > 0.0)
                    .map(|&j| a[i][j] * (u[i] - u[j]).max(0.0))
                    .sum();
                let pm: f64 = nb
                    .iter()
                    .filter(|&&j| a[i][j] > 0.0)
                    .map(|&j| a[i][j] * (u[i] - u[j]).min(0.0))
                    .sum();
                let w = |j: usize| a[i][j].abs().max(a[j][i]);
                let qp: f64 = nb.iter().map(|&j| w(j) * (u[j] - u[i]).max(0.0)).sum();
                let qm: f64 = nb.iter().map(|&j| w(j) * (u[j] - u[i]).min(0.0)).sum();
                for &j in &nb {
                    alpha[i][j] = if u[i] > u[j] {
                        r(qp, pp)
                    } else if u[i] < u[j] {
                        r(qm, pm)
                    } else {
                        1.0
                    };
                }
            }
        }
    }
    alpha
}

#[test]
fn limiters_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        // Dense random matrices: every off-diagonal pair is coupled.
        let n = 6;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 3.0 } else { rng.gen_range(-1.0..1.0) })
                    .collect()
            })
            .collect();
        let u = random_u(&mut rng, n);
        let gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..2.0)).collect();
        let m = CsrMatrix::from_dense(&a);
        for method in Method::ALL {
            let st = Stabilizer::new(
                method,
                m.clone(),
                vec![false; n],
                Some(BjkGeometry { gamma: gamma.clone() }),
            )
            .unwrap();
            let got = st.limiters(&u).unwrap();
            let want = dense_oracle(method, &a, &u, &gamma);
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let g = got.values[m.position(i, j).unwrap()];
                    assert!((g - want[i][j]).abs() < 1e-14, "{method} ({i},{j}): {g} vs {}", want[i][j]);
                }
            }
        }
    }
}

#[test]
fn constant_u_and_dirichlet_nodes_give_unit_limiters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_system(&mut rng, 12);
    for method in Method::ALL {
        let st = stabilizer(method, &a, &mut rng);
        let alpha = st.limiters(&[0.7; 12]).unwrap();
        assert!(alpha.values.iter().all(|&v| v == 1.0));

        let gamma = BjkGeometry { gamma: vec![1.5; 12] };
        let all_dirichlet = Stabilizer::new(method, a.clone(), vec![true; 12], Some(gamma)).unwrap();
        let alpha = all_dirichlet.limiters(&random_u(&mut rng, 12)).unwrap();
        assert!(alpha.values.iter().all(|&v| v == 1.0), "{method}");
    }
}

#[test]
fn random_limiter_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..60 {
        let n = 15;
        let a = random_system(&mut rng, n);
        let u = random_u(&mut rng, n);
        for method in Method::ALL {
            let st = stabilizer(method, &a, &mut rng);
            let alpha = st.limiters(&u).unwrap();
            let tp = st.transpose();
            for (k, &v) in alpha.values.iter().enumerate() {
                assert!((0.0..=1.0).contains(&v));
                if method.is_afc() {
                    assert_eq!(v, alpha.values[tp[k]]);
                }
            }
            let b = dense(&st.stabilization_matrix(&alpha).unwrap());
            let full = dense(&a.add(&st.d).add(&st.stabilization_matrix(&alpha).unwrap()));
            for i in 0..n {
                assert!(b[i].iter().sum::<f64>().abs() < 1e-13);
                for j in 0..n {
                    assert!((b[i][j] - b[j][i]).abs() < 1e-13);
                    if method == Method::Muas && i != j {
                        assert!(full[i][j] <= 1e-15);
                    }
                }
            }
            let shifted: Vec<f64> = u.iter().map(|v| v + 0.375).collect();
            let moved = st.limiters(&shifted).unwrap();
            for (x, y) in alpha.values.iter().zip(&moved.values) {
                assert!((x - y).abs() < 1e-10, "{method}");
            }
        }
    }
}

#[test]
fn stabilization_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_system(&mut rng, 9);
    let d = artificial_diffusion(&a).unwrap();
    for method in Method::ALL {
        let ones = LimiterField::ones(method, a.nnz());
        let b = assemble_stabilization(method, &a, &ones).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
        let zeros = LimiterField::constant(method, a.nnz(), 0.0);
        let b = assemble_stabilization(method, &a, &zeros).unwrap();
        for (x, y) in b.values().iter().zip(d.values()) {
            assert!((x - y).abs() < 1e-15, "{method}");
        }
    }
}

#[test]
fn bjk_requires_geometry() {
    let a = CsrMatrix::<f64>::identity(3);
    assert!(matches!(
        compute_limiters(Method::Bjk, &a, &[0.0; 3], None, &[false; 3]),
        Err(Error::MissingGeometry)
    ));
    assert!(matches!(
        compute_limiters(Method::Kuzmin, &a, &[0.0; 2], None, &[false; 3]),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn residual_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_system(&mut rng, 5);
    let st = stabilizer(Method::Kuzmin, &a, &mut rng);
    let u = random_u(&mut rng, 5);
    let rhs = random_u(&mut rng, 5);
    let b = st.stabilization(&u).unwrap();
    let (ad, bd) = (dense(&a), dense(&b));
    let want = (0..5)
        .map(|i| {
            let r: f64 = (0..5).map(|j| (ad[i][j] + bd[i][j]) * u[j]).sum::<f64>() - rhs[i];
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let got = nonlinear_residual(&a, &b, &u, &rhs).unwrap();
    assert!((got - want).abs() < 1e-13);
    let zero = nonlinear_residual(&a, &b, &[0.0; 5], &[0.0; 5]).unwrap();
    assert_eq!(zero, 0.0);
}

#[test]
fn limiters_run_in_exact_arithmetic() {
    let q = |n| Rational64::from_integer(n);
    let a = CsrMatrix::from_dense(&[
        vec![q(2), q(-1), q(1)],
        vec![q(-1), q(2), q(-1)],
        vec![q(1), q(-1), q(2)],
    ]);
    let u = [q(0), q(1), q(2)];
    for method in [Method::Kuzmin, Method::Muas] {
        let st = Stabilizer::new(method, a.clone(), vec![false; 3], None).unwrap();
        let b = st.stabilization(&u).unwrap();
        for i in 0..3 {
            let s = b.row(i).fold(q(0), |s, (_, v)| s + v);
            assert_eq!(s, q(0));
        }
    }
}

#[test]
fn f32_limiters_agree_with_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_system(&mut rng, 8);
    let u = random_u(&mut rng, 8);
    let a32 = a.cast(|v| v as f32);
    let u32: Vec<f32> = u.iter().map(|&v| v as f32).collect();
    let hi = compute_limiters(Method::Muas, &a, &u, None, &[false; 8]).unwrap();
    let lo = compute_limiters(Method::Muas, &a32, &u32, None, &[false; 8]).unwrap();
    for (x, y) in hi.values.iter().zip(&lo.values) {
        assert!((x - f64::from(*y)).abs() < 1e-4);
    }
}
