//! Residual definitions checked against a finite-difference Newton iteration
//! written independently of the solver.

use multisecant::linalg::{solve_linear, DenseMatrix, DenseVector};
use multisecant::problems::{ProblemKind, ProblemSpec, SCALABLE_DIMS};

fn fd_jacobian(p: &mut ProblemSpec, x: &DenseVector, f: &DenseVector) -> DenseMatrix {
    let n = x.dim();
    let cols: Vec<DenseVector> = (0..n)
        .map(|j| {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            p.evaluate(&xp).unwrap().sub(f).scaled(1.0 / h)
        })
        .collect();
    DenseMatrix::from_columns(&cols).unwrap()
}

/// Plain Newton with step halving on ‖F‖.
fn newton(p: &mut ProblemSpec, max_iter: usize) -> (DenseVector, f64) {
    let mut x = p.x0().clone();
    let mut f = p.evaluate(&x).unwrap();
    for _ in 0..max_iter {
        if f.norm() < 1e-12 {
            break;
        }
        let j = fd_jacobian(p, &x, &f);
        let step = solve_linear(&j, &f.scaled(-1.0)).unwrap();
        let mut t = 1.0;
        loop {
            let trial = x.add(&step.scaled(t));
            let ft = p.evaluate(&trial).unwrap();
            if ft.norm() < f.norm() || t < 1e-6 {
                x = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
    }
    let norm = f.norm();
    (x, norm)
}

#[test]
fn trigonometric_has_a_newton_reachable_root() {
    for &n in SCALABLE_DIMS {
        let mut p = ProblemSpec::builtin(ProblemKind::Trigonometric, n).unwrap();
        let (x, norm) = newton(&mut p, 100);
        assert!(norm < 1e-10, "n={n}: ‖F‖ = {norm:e}");
        assert!(x.is_finite());
    }
}

#[test]
fn scalable_families_are_solved_by_newton() {
    for kind in [
        ProblemKind::BrownAlmostLinear,
        ProblemKind::BroydenBanded,
        ProblemKind::BroydenTridiagonal,
        ProblemKind::DiscreteBoundaryValue,
        ProblemKind::DiscreteIntegral,
    ] {
        let mut p = ProblemSpec::builtin(kind, 10).unwrap();
        let (_, norm) = newton(&mut p, 60);
        assert!(norm < 1e-10, "{kind}: ‖F‖ = {norm:e}");
    }
}

#[test]
fn boundary_value_and_integral_families_agree_at_small_h() {
    // Both discretize the same two-point problem, so their Newton roots
    // should be close to each other.
    let mut bv = ProblemSpec::builtin(ProblemKind::DiscreteBoundaryValue, 30).unwrap();
    let mut ie = ProblemSpec::builtin(ProblemKind::DiscreteIntegral, 30).unwrap();
    let (a, _) = newton(&mut bv, 60);
    let (b, _) = newton(&mut ie, 60);
    assert!(a.sub(&b).norm() < 1e-3 * a.norm(), "{:e}", a.sub(&b).norm());
}

#[test]
fn fixed_size_roots() {
    for (kind, n, root) in [
        (ProblemKind::Rosenbrock, 2, vec![1.0, 1.0]),
        (ProblemKind::HelicalValley, 3, vec![1.0, 0.0, 0.0]),
        (ProblemKind::PowellSingular, 4, vec![0.0; 4]),
    ] {
        let mut p = ProblemSpec::builtin(kind, n).unwrap();
        let f = p.evaluate(&DenseVector::from_vec(root)).unwrap();
        assert!(f.norm() < 1e-14, "{kind}");
    }
    let mut p = ProblemSpec::builtin(ProblemKind::PowellBadlyScaled, 2).unwrap();
    let (x, norm) = newton(&mut p, 200);
    assert!(norm < 1e-10);
    assert!((x[0] * x[1] - 1e-4).abs() < 1e-12);
}
