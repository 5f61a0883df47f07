//! Every spectral operator on a tiny grid is checked against an explicit
//! dense DFT matrix, and the semi-implicit step against a dense linear
//! solve. The oracle shares nothing with the library's FFT path.

mod common;

use chlog_core::*;
use common::DenseDft;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &std::sync::Arc<Grid>, seed: u64, amp: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| rng.random_range(-amp..amp))
        .collect();
    Field::from_values(grid, values).unwrap()
}

#[test]
fn transform_matches_dense_dft() {
    let grid = Grid::new(4).unwrap();
    let dft = DenseDft::new(4);
    for seed in 0..5 {
        let field = random_field(&grid, seed, 0.9);
        let spec = field.transform();
        let dense = dft.transform(field.values());
        for (m, mode) in grid.modes().iter().enumerate() {
            let got = spec.coeff(mode.k);
            assert!(
                (got - dense[m]).norm() < 1e-12,
                "seed {seed} mode {:?}: {got} vs {}",
                mode.k,
                dense[m]
            );
        }
    }
}

#[test]
fn inverse_transform_matches_dense_dft() {
    let grid = Grid::new(4).unwrap();
    let dft = DenseDft::new(4);
    let field = random_field(&grid, 3, 0.8);
    let spec = field.transform();
    let dense_coeffs: Vec<_> = grid.modes().iter().map(|m| spec.coeff(m.k)).collect();
    let back = dft.inverse(&dense_coeffs);
    let lib_back = spec.inverse_transform();
    for (a, b) in lib_back.values().iter().zip(&back) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in lib_back.values().iter().zip(field.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn random_symbol_matches_dense_multiplier() {
    let grid = Grid::new(4).unwrap();
    let dft = DenseDft::new(4);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    // Random even symbol (s(k) = s(-k)) so the multiplier maps real fields
    // to real fields, drawn once per conjugate pair.
    let mut symbol_table = vec![f64::NAN; grid.len()];
    for (m, mode) in grid.modes().iter().enumerate() {
        let partner = grid.index_of_mode([-mode.k[0], -mode.k[1]]);
        if symbol_table[m].is_nan() {
            let s = rng.random_range(-3.0..3.0);
            symbol_table[m] = s;
            symbol_table[partner] = s;
        }
    }

    let field = random_field(&grid, 7, 0.9);
    let applied = field
        .transform()
        .apply_symbol(|m| symbol_table[grid.index_of_mode(m.k)])
        .unwrap()
        .inverse_transform();

    let dense_mat = dft.multiplier_matrix(|m| symbol_table[m]);
    let x: Vec<num_complex::Complex64> = field
        .values()
        .iter()
        .map(|&v| num_complex::Complex64::new(v, 0.0))
        .collect();
    let dense = common::matvec(&dense_mat, &x);
    for (a, b) in applied.values().iter().zip(&dense) {
        assert!((a - b.re).abs() < 1e-12);
        assert!(b.im.abs() < 1e-12);
    }
}

#[test]
fn inverse_laplacian_matches_dense_multiplier() {
    let grid = Grid::new(4).unwrap();
    let dft = DenseDft::new(4);
    let mut field = random_field(&grid, 11, 0.5);
    // Make it exactly mean-free.
    let mean = field.mean();
    for v in field.values_mut() {
        *v -= mean;
    }

    let lib = field.inverse_laplacian_meanzero().unwrap();
    let dense_mat = dft.multiplier_matrix(|m| if dft.k_sq[m] == 0.0 { 0.0 } else { 1.0 / dft.k_sq[m] });
    let x: Vec<num_complex::Complex64> = field
        .values()
        .iter()
        .map(|&v| num_complex::Complex64::new(v, 0.0))
        .collect();
    let dense = common::matvec(&dense_mat, &x);
    for (a, b) in lib.values().iter().zip(&dense) {
        assert!((a - b.re).abs() < 1e-12);
    }

    // Composing with -lap returns the mean-free field.
    let minus_lap = lib
        .transform()
        .apply_symbol(|m| m.k_sq)
        .unwrap()
        .inverse_transform();
    for (a, b) in minus_lap.values().iter().zip(field.values()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn galerkin_projection_matches_direct_mode_sum() {
    let grid = Grid::new(16).unwrap();
    let field = random_field(&grid, 13, 0.7);
    let spec = field.transform();
    let projected = spec.galerkin_project(1).unwrap().inverse_transform();

    // Direct sum over the 9 retained modes.
    let mut direct = vec![0.0f64; grid.len()];
    let n = grid.n();
    for k1 in -1i32..=1 {
        for k2 in -1i32..=1 {
            let c = spec.coeff([k1, k2]);
            for i in 0..n {
                for j in 0..n {
                    let dot = k1 as f64 * grid.coords()[i] + k2 as f64 * grid.coords()[j];
                    direct[i * n + j] += (c * num_complex::Complex64::new(0.0, dot).exp()).re;
                }
            }
        }
    }
    for (a, b) in projected.values().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn one_step_matches_dense_linear_solve() {
    let grid = Grid::new(4).unwrap();
    let dft = DenseDft::new(4);
    let params = ModelParams::new(1.0, 1.0, 2.0).unwrap();
    let tau = 0.05;
    let config = SchemeConfig {
        scheme: Scheme::SemiImplicit,
        tau,
        params,
        guard: GuardPolicy::abort(),
    };
    let props = build_propagators(&grid, &config).unwrap();

    for seed in 0..5 {
        let u0 = InitialData::RandomBandlimited { kmax: 1, amp: 0.3 }
            .build(&grid, seed)
            .unwrap();
        let state = SimState::from_field(u0.clone(), 0, tau);
        let (next, _) = step(&state, &config, &props).unwrap();
        let dense = common::dense_semi_implicit_step(&dft, &grid, &u0, tau, &params);
        for (a, b) in next.u.values().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
        }
    }
}
