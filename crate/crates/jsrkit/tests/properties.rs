//! Property tests: algebraic laws of the symmetric-power lift, independent
//! verification of the SDP solver, the ordering and scaling laws of the
//! bound family, and decay of emitted certificates at random points.

mod common;

use common::{random_matrix, random_set, rng};
use jsrkit::bounds::{self, BoundOptions, MatrixSet};
use jsrkit::linalg::DenseMatrix;
use jsrkit::lyapunov::SosCertificate;
use jsrkit::sdp::{
    check_solution, export_sdpa, parse_sdpa, solve_feasibility, Constraint, LinearMatrixProgram,
    SolveStatus,
};
use jsrkit::symalg::enumerate_basis;
use rand::Rng;

// --- Symmetric-algebra laws -------------------------------------------------

#[test]
fn lifted_products_factor() {
    common::homomorphism_suite(100, 0x5ea1);
}

#[test]
fn lifted_matrix_acts_as_the_lifted_map() {
    common::defining_identity_suite(100, 0x5ea2);
}

#[test]
fn lifted_vector_norm_is_a_power() {
    common::norm_law_suite(100, 0x5ea3);
}

#[test]
fn lifted_eigenvalues_are_products() {
    common::eigenvalue_law_suite(100, 0x5ea4);
}

#[test]
fn permanent_methods_agree() {
    common::permanent_suite(100, 0x5ea5);
}

#[test]
fn gram_coefficients_match_the_quadratic_form() {
    common::gram_eval_suite(100, 0x5ea6);
}

#[test]
fn inverse_commutes_with_lifting() {
    common::inverse_law_suite(100, 0x5ea7);
}

#[test]
fn eigenvalues_match_characteristic_roots() {
    common::eigensolver_oracle_suite(100, 0x5ea8);
}

// --- SDP solver, checked independently --------------------------------------

/// A program built around a known strictly positive definite solution:
/// pick X = R R^T + I first, then derive every right-hand side from it.
fn program_with_interior_point(
    rng: &mut rand::rngs::StdRng,
    sizes: &[usize],
) -> LinearMatrixProgram {
    let planted: Vec<DenseMatrix> = sizes
        .iter()
        .map(|&s| {
            let r = random_matrix(rng, s);
            r.matmul(&r.transpose()).add(&DenseMatrix::identity(s))
        })
        .collect();
    let n_constraints = rng.gen_range(1..=4);
    let mut constraints: Vec<Constraint> = (0..n_constraints)
        .map(|_| {
            let coeffs: Vec<DenseMatrix> =
                sizes.iter().map(|&s| random_matrix(rng, s).symmetrize()).collect();
            let rhs = coeffs.iter().zip(&planted).map(|(a, x)| a.dot(x)).sum();
            Constraint { coeffs, rhs }
        })
        .collect();
    // Pin the total trace to the planted value: the margin maximization needs
    // the feasible set bounded, and normalization is the caller's job.
    constraints.push(Constraint {
        coeffs: sizes.iter().map(|&s| DenseMatrix::identity(s)).collect(),
        rhs: planted.iter().map(|x| x.trace()).sum(),
    });
    LinearMatrixProgram::feasibility(sizes.to_vec(), constraints)
}

#[test]
fn programs_with_planted_interior_points_are_feasible() {
    let mut rng = rng(0xd1a0);
    for case in 0..20 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=4)).collect();
        let prog = program_with_interior_point(&mut rng, &sizes);
        let sol = solve_feasibility(&prog, 1e-8).unwrap();
        assert!(
            matches!(sol.status, SolveStatus::Feasible),
            "case {case}: planted-interior program classified {:?} (margin {})",
            sol.status,
            sol.phase1_margin
        );
    }
}

#[test]
fn feasible_verdicts_pass_independent_checking() {
    let mut rng = rng(0xd1a1);
    for case in 0..20 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=4)).collect();
        let prog = program_with_interior_point(&mut rng, &sizes);
        let sol = solve_feasibility(&prog, 1e-8).unwrap();
        assert!(matches!(sol.status, SolveStatus::Feasible), "case {case}");
        let report = check_solution(&prog, &sol.blocks).unwrap();
        let rhs_scale = 1.0 + prog.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        assert!(
            report.max_constraint_residual <= 1e-6 * rhs_scale,
            "case {case}: residual {} on rhs scale {rhs_scale}",
            report.max_constraint_residual
        );
        assert!(
            report.min_block_eigenvalue >= -1e-7,
            "case {case}: min eigenvalue {}",
            report.min_block_eigenvalue
        );
    }
}

#[test]
fn feasibility_survives_row_rescaling() {
    let mut rng = rng(0xd1a2);
    for case in 0..10 {
        let sizes: Vec<usize> = vec![rng.gen_range(2..=3)];
        let mut prog = program_with_interior_point(&mut rng, &sizes);
        // Odd cases get an unsatisfiable row: trace(X) = -1 has no PSD
        // solution, so the rescaled program must stay infeasible.
        if case % 2 == 1 {
            prog.constraints
                .push(Constraint { coeffs: vec![DenseMatrix::identity(sizes[0])], rhs: -1.0 });
        }
        let before = solve_feasibility(&prog, 1e-8).unwrap().status;
        let mut rescaled = prog.clone();
        for c in &mut rescaled.constraints {
            let factor = rng.gen_range(0.1..10.0);
            for block in &mut c.coeffs {
                *block = block.scale(factor);
            }
            c.rhs *= factor;
        }
        let after = solve_feasibility(&rescaled, 1e-8).unwrap().status;
        assert_eq!(before, after, "case {case}: status changed under row rescaling");
    }
}

#[test]
fn trace_pinning_keeps_cone_programs_feasible() {
    let mut rng = rng(0xd1a3);
    for case in 0..10 {
        let s = rng.gen_range(2..=4);
        // A homogeneous constraint orthogonal to the identity keeps every
        // multiple of I feasible, whatever the later trace pin demands.
        let mut a = random_matrix(&mut rng, s).symmetrize();
        let shift = a.trace() / s as f64;
        for i in 0..s {
            a.add_to(i, i, -shift);
        }
        let homogeneous = Constraint { coeffs: vec![a], rhs: 0.0 };
        for c in [0.5, 1.0, 10.0] {
            let pin = Constraint { coeffs: vec![DenseMatrix::identity(s)], rhs: c };
            let prog = LinearMatrixProgram::feasibility(vec![s], vec![homogeneous.clone(), pin]);
            let sol = solve_feasibility(&prog, 1e-8).unwrap();
            assert!(
                matches!(sol.status, SolveStatus::Feasible),
                "case {case}: trace pin {c} broke feasibility ({:?})",
                sol.status
            );
        }
    }
}

#[test]
fn sdpa_text_round_trips_exactly() {
    let mut rng = rng(0xd1a4);
    for case in 0..10 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=4)).collect();
        let objective: Vec<DenseMatrix> =
            sizes.iter().map(|&s| random_matrix(&mut rng, s).symmetrize()).collect();
        let constraints: Vec<Constraint> = (0..rng.gen_range(1..=4))
            .map(|_| Constraint {
                coeffs: sizes.iter().map(|&s| random_matrix(&mut rng, s).symmetrize()).collect(),
                rhs: rng.gen_range(-5.0..5.0),
            })
            .collect();
        let prog = LinearMatrixProgram { block_sizes: sizes, objective, constraints };
        let parsed = parse_sdpa(&export_sdpa(&prog)).unwrap();
        assert_eq!(prog.block_sizes, parsed.block_sizes, "case {case}");
        assert_eq!(prog.constraints.len(), parsed.constraints.len(), "case {case}");
        for (a, b) in prog.objective.iter().zip(&parsed.objective) {
            assert_eq!(a.data(), b.data(), "case {case}: objective drifted");
        }
        for (a, b) in prog.constraints.iter().zip(&parsed.constraints) {
            assert_eq!(a.rhs, b.rhs, "case {case}: rhs drifted");
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(x.data(), y.data(), "case {case}: coefficient drifted");
            }
        }
    }
}

// --- Bound-family laws -------------------------------------------------------

#[test]
fn bound_ordering_on_random_sets() {
    common::ordering_suite(10, 0xb0a1, &[2, 4], 1e-4);
}

#[test]
fn quartic_bound_matches_quadratic_bound_of_the_lifted_set() {
    let mut rng = rng(0xb0a2);
    let tol = 1e-5;
    let opts = BoundOptions { bisection_tol: tol, ..BoundOptions::default() };
    for case in 0..5 {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=2);
        let set = random_set(&mut rng, n, m);
        let basis = enumerate_basis(n, 2).unwrap();
        let lifted = MatrixSet::new(
            set.matrices()
                .iter()
                .map(|a| jsrkit::symalg::induced_matrix(a, &basis).unwrap())
                .collect(),
            None,
        )
        .unwrap();
        let quartic = bounds::rho_cq(&set, 4, &opts).unwrap().value;
        let quadratic_of_lift = bounds::rho_sos(&lifted, 2, &opts).unwrap().value;
        assert!(
            (quartic * quartic - quadratic_of_lift).abs() <= 2.0 * tol * (1.0 + quadratic_of_lift),
            "case {case} (n={n}, m={m}): {quartic}^2 vs {quadratic_of_lift}"
        );
    }
}

#[test]
fn bounds_scale_linearly() {
    let mut rng = rng(0xb0a3);
    let tol = 1e-5;
    let opts = BoundOptions { bisection_tol: tol, ..BoundOptions::default() };
    for case in 0..3 {
        let set = random_set(&mut rng, 2, 2);
        let c = rng.gen_range(0.5..3.0);
        let scaled = set.scaled(c);
        for two_d in [2usize, 4] {
            let pairs = [
                (
                    "sos",
                    bounds::rho_sos(&set, two_d, &opts).unwrap().value,
                    bounds::rho_sos(&scaled, two_d, &opts).unwrap().value,
                ),
                (
                    "cq",
                    bounds::rho_cq(&set, two_d, &opts).unwrap().value,
                    bounds::rho_cq(&scaled, two_d, &opts).unwrap().value,
                ),
                (
                    "sr",
                    bounds::rho_sr(&set, two_d, &opts).unwrap(),
                    bounds::rho_sr(&scaled, two_d, &opts).unwrap(),
                ),
            ];
            for (label, base, scaled_value) in pairs {
                assert!(
                    (scaled_value - c * base).abs() <= 2.0 * tol * (1.0 + c * base),
                    "case {case} ({label}, 2d={two_d}): {scaled_value} vs {c} * {base}"
                );
            }
        }
        let (lower, _) = bounds::lower_bound_products(&set, 2, &opts).unwrap();
        let (lower_scaled, _) = bounds::lower_bound_products(&scaled, 2, &opts).unwrap();
        assert!(
            (lower_scaled - c * lower).abs() <= 1e-9 * (1.0 + c * lower),
            "case {case} (lower): {lower_scaled} vs {c} * {lower}"
        );
    }
}

fn unit_radius_pair() -> MatrixSet {
    let a1 = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let a2 = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
    MatrixSet::new(vec![a1, a2], None).unwrap()
}

#[test]
fn quality_factor_sandwiches_the_known_unit_radius() {
    let tol = 1e-5;
    let opts = BoundOptions { bisection_tol: tol, ..BoundOptions::default() };
    let set = unit_radius_pair();
    for d in [1usize, 2] {
        let upper = bounds::rho_sos(&set, 2 * d, &opts).unwrap().value;
        let lower_estimate = bounds::quality_factor(2, 2, d) * upper;
        assert!(
            lower_estimate <= 1.0 + tol,
            "degree 2d={}: quality-scaled bound {lower_estimate} exceeds the known radius 1",
            2 * d
        );
    }
}

#[test]
fn product_bounds_commute_with_lifting() {
    let mut rng = rng(0xb0a4);
    let opts = BoundOptions::default();
    let d = 2usize;
    for case in 0..5 {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=3);
        let set = random_set(&mut rng, n, m);
        let basis = enumerate_basis(n, d).unwrap();
        let lifted = MatrixSet::new(
            set.matrices()
                .iter()
                .map(|a| jsrkit::symalg::induced_matrix(a, &basis).unwrap())
                .collect(),
            None,
        )
        .unwrap();
        for k in 1..=3usize {
            let (base, _) = bounds::lower_bound_products(&set, k, &opts).unwrap();
            let (of_lift, _) = bounds::lower_bound_products(&lifted, k, &opts).unwrap();
            let want = base.powi(d as i32);
            assert!(
                (of_lift - want).abs() <= 1e-6 * (1.0 + want),
                "case {case} (n={n}, m={m}, k={k}): {of_lift} vs {base}^{d}"
            );
        }
    }
}

// --- Certificates ------------------------------------------------------------

fn assert_certificate_decays(set: &MatrixSet, cert: &SosCertificate, seed: u64) {
    let p = cert.p().unwrap();
    let rate = cert.gamma.powi(2 * cert.d as i32);
    let mut rng = rng(seed);
    for point in 0..50 {
        let x = common::random_vector(&mut rng, cert.n);
        let p_x = p.eval(&x).unwrap();
        for (i, a) in set.matrices().iter().enumerate() {
            let p_ax = p.eval(&a.matvec(&x)).unwrap();
            assert!(
                rate * p_x - p_ax >= -1e-7 * (1.0 + p_x.abs()),
                "point {point}, matrix {i}: decay violated ({} vs {p_ax})",
                rate * p_x
            );
        }
    }
}

#[test]
fn emitted_certificates_decay_at_random_points() {
    let opts = BoundOptions::default();
    let pair = unit_radius_pair();
    let mut emitted = 0;
    for two_d in [2usize, 4] {
        let report = bounds::rho_sos(&pair, two_d, &opts).unwrap();
        if let Some(jsrkit::bounds::Certificate::Sos(cert)) = report.certificate {
            assert_certificate_decays(&pair, &cert, 0xce01 + two_d as u64);
            emitted += 1;
        }
    }
    let mut rng = rng(0xce02);
    for case in 0..3 {
        let set = random_set(&mut rng, 2, 2);
        let report = bounds::rho_sos(&set, 2, &opts).unwrap();
        let (lower, _) = bounds::lower_bound_products(&set, 2, &opts).unwrap();
        assert!(
            lower <= report.value + 2.0 * opts.bisection_tol * (1.0 + report.value),
            "case {case}: certified rate {} below the product lower bound {lower}",
            report.value
        );
        if let Some(jsrkit::bounds::Certificate::Sos(cert)) = report.certificate {
            assert_certificate_decays(&set, &cert, 0xce10 + case);
            emitted += 1;
        }
    }
    assert!(emitted >= 4, "too few certificates were emitted to exercise the check");
}

#[test]
fn fixed_points_match_iteration_and_certify() {
    common::fixed_point_suite(5, 0xf1a0);
}
