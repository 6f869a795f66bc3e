//! Randomized cross-checks of the simplex core against brute-force vertex
//! enumeration, plus KKT verification of every optimal solve.

use qhedge_core::linprog::{vertex_enumerate, LinearProgram, Polytope};
use qhedge_core::LpStatus;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Instance {
    lp: LinearProgram,
    poly: Polytope,
    obj: Vec<f64>,
}

/// Random bounded, feasible LP: box-bounded variables, `<=` rows anchored at
/// a known interior point, occasionally one equality row.
fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let d = rng.gen_range(2..=8usize);
    let max_rows = if d <= 6 { 10 } else { 4 };
    let m = rng.gen_range(1..=max_rows);
    let upper: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
    let x0: Vec<f64> = upper.iter().map(|u| rng.gen_range(0.0..*u)).collect();
    let obj: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut lp = LinearProgram::new();
    for j in 0..d {
        lp.add_var(obj[j], 0.0, upper[j]);
    }
    let mut le_rows = Vec::new();
    for _ in 0..m {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at_x0: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
        let rhs = at_x0 + rng.gen_range(0.0..1.0);
        lp.add_le(row.iter().copied().enumerate().collect(), rhs);
        le_rows.push((row, rhs));
    }
    let mut eq_rows = Vec::new();
    if d <= 8 && rng.gen_bool(0.3) {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.0)).collect();
        let rhs: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
        lp.add_eq(row.iter().copied().enumerate().collect(), rhs);
        eq_rows.push((row, rhs));
    }
    let poly = Polytope {
        dim: d,
        eq_rows,
        le_rows,
        lower: vec![0.0; d],
        upper,
    };
    Instance { lp, poly, obj }
}

/// Primal feasibility, dual feasibility and complementary slackness of an
/// optimal solution, at the tolerances the solver promises.
fn check_kkt(inst: &Instance, sol: &qhedge_core::LpSolution) {
    let d = inst.poly.dim;
    let x = &sol.primal;
    for (row, rhs) in &inst.poly.le_rows {
        let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        assert!(v <= rhs + 1e-9, "primal infeasible: {} > {}", v, rhs);
    }
    for (row, rhs) in &inst.poly.eq_rows {
        let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        assert!((v - rhs).abs() <= 1e-8, "eq residual {}", v - rhs);
    }
    for j in 0..d {
        assert!(x[j] >= -1e-9 && x[j] <= inst.poly.upper[j] + 1e-9);
    }
    // reduced costs w.r.t. the returned duals
    for j in 0..d {
        let mut dj = inst.obj[j];
        for (r, (row, _)) in inst.poly.eq_rows.iter().enumerate() {
            dj -= sol.eq_duals[r] * row[j];
        }
        for (r, (row, _)) in inst.poly.le_rows.iter().enumerate() {
            dj -= sol.le_duals[r] * row[j];
        }
        let at_lower = x[j] <= 1e-7;
        let at_upper = x[j] >= inst.poly.upper[j] - 1e-7;
        if at_lower && !at_upper {
            assert!(dj >= -1e-8, "var {} at lower with d_j = {}", j, dj);
        } else if at_upper && !at_lower {
            assert!(dj <= 1e-8, "var {} at upper with d_j = {}", j, dj);
        } else if !at_lower && !at_upper {
            assert!(dj.abs() <= 1e-8, "interior var {} with d_j = {}", j, dj);
        }
    }
    // complementary slackness on <= rows
    for (r, (row, rhs)) in inst.poly.le_rows.iter().enumerate() {
        let slack = rhs - row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        assert!(
            (sol.le_duals[r] * slack).abs() <= 1e-8,
            "row {}: dual {} with slack {}",
            r,
            sol.le_duals[r],
            slack
        );
        assert!(sol.le_duals[r] <= 1e-9, "<= row dual must be nonpositive");
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    // The acceptance suite runs the full 200-instance sweep at up to 10
    // variables; this is the fast in-crate regression.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for trial in 0..80 {
        let inst = random_instance(&mut rng);
        let sol = inst.lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "trial {}", trial);
        check_kkt(&inst, &sol);

        let vertices = vertex_enumerate(&inst.poly).unwrap();
        assert!(!vertices.is_empty(), "trial {}: no vertices found", trial);
        let best = vertices
            .iter()
            .map(|v| v.iter().zip(&inst.obj).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!(
            (sol.objective - best).abs() <= 1e-8,
            "trial {}: simplex {} vs enumeration {}",
            trial,
            sol.objective,
            best
        );
    }
}

#[test]
fn strong_duality_against_explicit_dual() {
    // min c.x, A x <= b, x >= 0 has dual max b.y, A^T y <= c, y <= 0;
    // both sides solved independently must agree.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for trial in 0..60 {
        let d = rng.gen_range(2..=8usize);
        let m = rng.gen_range(1..=8usize);
        let x0: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.5)).collect();
        let obj: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        let mut rows = Vec::new();
        let mut primal = LinearProgram::new();
        for j in 0..d {
            primal.add_var(obj[j], 0.0, f64::INFINITY);
        }
        for _ in 0..m {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(0.0..0.5);
            primal.add_le(row.iter().copied().enumerate().collect(), rhs);
            rows.push((row, rhs));
        }
        let psol = primal.solve().unwrap();
        // objective is positive-coefficient so the primal is bounded below by 0
        assert_eq!(psol.status, LpStatus::Optimal);

        let mut dual = LinearProgram::new();
        for (_, rhs) in &rows {
            dual.add_var(-rhs, f64::NEG_INFINITY, 0.0); // maximize b.y
        }
        for j in 0..d {
            let col: Vec<(usize, f64)> = rows.iter().map(|(row, _)| row[j]).enumerate().collect();
            dual.add_le(col, obj[j]);
        }
        let dsol = dual.solve().unwrap();
        assert_eq!(dsol.status, LpStatus::Optimal);
        assert!(
            (psol.objective + dsol.objective).abs() <= 1e-8,
            "trial {}: primal {} vs dual {}",
            trial,
            psol.objective,
            -dsol.objective
        );
    }
}
