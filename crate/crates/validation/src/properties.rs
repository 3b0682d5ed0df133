//! Module invariants as seeded property checks. Each entry is a plain function
//! so the same list can run under the test harness and under a stopwatch.

use std::f64::consts::PI;

use faer::Mat;
use fraclap::eigen::{inverse_residual, reconstruction_residual};
use fraclap::evolution::{rescale_section, unrescale_section};
use fraclap::grid::{first_row_dxi, first_row_dxixi};
use fraclap::oracles::{lemma_i1_oracle, lemma_i2_oracle};
use fraclap::special::gamma_fn;
use fraclap::tensor::{eigen_sum_tensor, mode_product, tuple_iter};
use fraclap::{
    build_diff_matrices, factorize, make_grid, phi_p, quad_mass, run_evolution, self_similar_params,
    EvolutionConfig, ExtensionKind, FracLapOperator, FracPOperator, NdArray,
};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use crate::{factor, factors, gaussian, grids, radial, runner};

pub type Check = fn() -> Result<(), String>;

pub const ALL: &[(&str, Check)] = &[
    ("grid_reflection_is_exact", grid_reflection_is_exact),
    ("grid_trig_arguments_in_range", grid_trig_arguments_in_range),
    ("first_rows_are_periodic", first_rows_are_periodic),
    ("arctan_second_derivative_converges", arctan_second_derivative_converges),
    ("factor_invariants_over_sweep", factor_invariants_over_sweep),
    ("factor_repair_is_idempotent", factor_repair_is_idempotent),
    ("mode_products_commute", mode_products_commute),
    ("tuple_iter_is_a_permutation", tuple_iter_is_a_permutation),
    ("eigen_sum_has_one_zero", eigen_sum_has_one_zero),
    ("fraclap_is_linear", fraclap_is_linear),
    ("fraclap_keeps_reflection_symmetry", fraclap_keeps_reflection_symmetry),
    ("fraclap_near_one_is_minus_laplacian", fraclap_near_one_is_minus_laplacian),
    ("plap_p2_matches_fraclap", plap_p2_matches_fraclap),
    ("plap_pointwise_matches_batched", plap_pointwise_matches_batched),
    ("phi_is_odd", phi_is_odd),
    ("plap_positive_at_peak", plap_positive_at_peak),
    ("plap_scaling_contract", plap_scaling_contract),
    ("lemma_closed_forms_chain", lemma_closed_forms_chain),
    ("gamma_reflection", gamma_reflection),
    ("evolution_conserves_mass", evolution_conserves_mass),
    ("rescaling_round_trip", rescaling_round_trip),
    ("exponent_identities", exponent_identities),
];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn field(shape: &[usize], values: &[f64]) -> NdArray {
    let len: usize = shape.iter().product();
    NdArray::new(shape.to_vec(), values[..len].to_vec()).unwrap()
}

/// Shapes with one or two dimensions of 2..=max nodes.
fn small_shape(max: usize) -> impl Strategy<Value = Vec<usize>> {
    vec(2..=max, 1..=2)
}

pub fn grid_reflection_is_exact() -> Result<(), String> {
    runner(24, 1)
        .run(&(2usize..=80, 0.5f64..30.0), |(n, l)| {
            let dm = build_diff_matrices(&make_grid(n, l).unwrap(), ExtensionKind::Even).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let (k, m) = (n - 1 - i, n - 1 - j);
                    if dm.dx[(k, m)] + dm.dx[(i, j)] != 0.0 || dm.dxx[(k, m)] - dm.dxx[(i, j)] != 0.0 {
                        return Err(fail(format!("N={n} entry ({i},{j})")));
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn grid_trig_arguments_in_range() -> Result<(), String> {
    for n in 2..=64 {
        let g = make_grid(n, 1.0).unwrap();
        // cot is evaluated on the upper half and sin^-2 on the computed rows.
        for j in 0..n.div_ceil(2) {
            ensure(g.xi[j] > 0.0 && g.xi[j] <= PI / 2.0, || format!("N={n} xi[{j}]={}", g.xi[j]))?;
        }
        for j in 0..n {
            ensure(g.x[j] == -g.x[n - 1 - j], || format!("N={n} x not antisymmetric at {j}"))?;
        }
    }
    Ok(())
}

pub fn first_rows_are_periodic() -> Result<(), String> {
    for n in 2..=64 {
        for c in [first_row_dxi(n).unwrap(), first_row_dxixi(n).unwrap()] {
            for j in 0..n {
                ensure(c[2 * n + j] == c[j], || format!("N={n} index {}", j + 1))?;
            }
        }
    }
    Ok(())
}

/// Max errors of the scaled first and second derivatives of `u` at `(n, l)`.
pub fn derivative_errors(
    n: usize,
    l: f64,
    u: impl Fn(f64) -> f64,
    du: impl Fn(f64) -> f64,
    d2u: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let g = make_grid(n, l).unwrap();
    let dm = build_diff_matrices(&g, ExtensionKind::Even).unwrap();
    let samples: Vec<f64> = g.x.iter().map(|&x| u(x)).collect();
    let (ux, uxx) = fraclap::grid::differentiate(&dm, &samples, l).unwrap();
    let e1 = g.x.iter().zip(&ux).map(|(&x, v)| (v - du(x)).abs()).fold(0.0, f64::max);
    let e2 = g.x.iter().zip(&uxx).map(|(&x, v)| (v - d2u(x)).abs()).fold(0.0, f64::max);
    (e1, e2)
}

pub fn arctan_errors(n: usize, l: f64) -> (f64, f64) {
    derivative_errors(n, l, f64::atan, |x| 1.0 / (1.0 + x * x), |x| -2.0 * x / (1.0 + x * x).powi(2))
}

pub fn one_minus_gaussian_errors(n: usize, l: f64) -> (f64, f64) {
    derivative_errors(
        n,
        l,
        |x| 1.0 - (-x * x).exp(),
        |x| 2.0 * x * (-x * x).exp(),
        |x| (2.0 - 4.0 * x * x) * (-x * x).exp(),
    )
}

/// Errors below this are treated as the rounding floor.
pub const DERIVATIVE_FLOOR: f64 = 1e-12;

pub fn arctan_second_derivative_converges() -> Result<(), String> {
    let errs: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| arctan_errors(n, 20.0).1).collect();
    for w in errs.windows(2) {
        ensure(w[1] <= w[0] || w[1] <= DERIVATIVE_FLOOR, || format!("errors {errs:?}"))?;
    }
    Ok(())
}

pub fn factor_invariants_over_sweep() -> Result<(), String> {
    for n in [8, 16, 32, 64, 128, 256] {
        let dm = build_diff_matrices(&make_grid(n, 1.0).unwrap(), ExtensionKind::Even).unwrap();
        let f = factor(n);
        let inv = inverse_residual(&f);
        let rec = reconstruction_residual(&dm.dxx, &f);
        ensure(inv <= 1e-10 && rec <= 1e-10, || format!("N={n}: inverse {inv:e}, reconstruction {rec:e}"))?;
        ensure(f.lambda[f.zero_index] == 0.0, || format!("N={n}: zero mode not repaired"))?;
        ensure(f.lambda.iter().filter(|&&l| l < 0.0).count() == n - 1, || format!("N={n}: sign count"))?;
    }
    Ok(())
}

pub fn factor_repair_is_idempotent() -> Result<(), String> {
    for n in [8, 33, 64] {
        let dm = build_diff_matrices(&make_grid(n, 1.0).unwrap(), ExtensionKind::Even).unwrap();
        let a = factorize(&dm.dxx).unwrap();
        let b = factorize(&dm.dxx).unwrap();
        let same = a.lambda.iter().zip(&b.lambda).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("N={n}: lambda differs between runs"))?;
    }
    Ok(())
}

pub fn mode_products_commute() -> Result<(), String> {
    let strategy = (vec(1usize..=5, 2..=3), 1usize..=4, 1usize..=4, vec(-1.0f64..1.0, 400));
    runner(32, 2)
        .run(&strategy, |(shape, ra, rb, pool)| {
            let len: usize = shape.iter().product();
            let u = field(&shape, &pool);
            let a = Mat::from_fn(ra, shape[0], |i, j| pool[len + i * 7 + j]);
            let b = Mat::from_fn(rb, shape[1], |i, j| pool[len + 40 + i * 5 + j]);
            let x = mode_product(a.as_ref(), &mode_product(b.as_ref(), &u, 2).unwrap(), 1).unwrap();
            let y = mode_product(b.as_ref(), &mode_product(a.as_ref(), &u, 1).unwrap(), 2).unwrap();
            let scale = x.max_abs().max(1e-300);
            let d = x.max_abs_diff(&y).unwrap();
            if d > 1e-13 * scale {
                return Err(fail(format!("shape {shape:?}: {d:e}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn tuple_iter_is_a_permutation() -> Result<(), String> {
    runner(48, 3)
        .run(&vec(1usize..=12, 1..=4), |shape| {
            let total: usize = shape.iter().product();
            prop_assume!(total <= 10_000);
            let mut seen = vec![false; total];
            for (tuple, flat) in tuple_iter(&shape) {
                let zero: Vec<usize> = tuple.iter().map(|i| i - 1).collect();
                let u = NdArray::zeros(shape.clone()).unwrap();
                if u.offset(&zero) + 1 != flat || seen[flat - 1] {
                    return Err(fail(format!("shape {shape:?} flat {flat}")));
                }
                seen[flat - 1] = true;
            }
            prop_assert!(seen.iter().all(|&b| b));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn eigen_sum_has_one_zero() -> Result<(), String> {
    runner(16, 4)
        .run(&(vec(2usize..=20, 1..=3), vec(0.3f64..20.0, 3)), |(dims, scales)| {
            let fs = factors(&dims);
            let lambdas: Vec<&[f64]> = fs.iter().map(|f| f.lambda.as_slice()).collect();
            let t = eigen_sum_tensor(&lambdas, &scales[..dims.len()]).unwrap();
            let zero: Vec<usize> = fs.iter().map(|f| f.zero_index).collect();
            let at = t.offset(&zero);
            for (k, &v) in t.data().iter().enumerate() {
                let ok = if k == at { v == 0.0 } else { v < 0.0 };
                if !ok {
                    return Err(fail(format!("dims {dims:?}: entry {k} = {v:e}")));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fraclap_is_linear() -> Result<(), String> {
    let strategy =
        (small_shape(24), 0.05f64..0.95, 0.5f64..10.0, -3.0f64..3.0, -3.0f64..3.0, vec(-1.0f64..1.0, 1200));
    runner(16, 5)
        .run(&strategy, |(shape, s, l, a, b, pool)| {
            let op = FracLapOperator::build(factors(&shape), vec![l; shape.len()], s).unwrap();
            let len: usize = shape.iter().product();
            let u = field(&shape, &pool);
            let v = field(&shape, &pool[len..]);
            let combo = u.map(|x| a * x).axpy(b, &v).unwrap();
            let lhs = op.apply(&combo).unwrap();
            let (ou, ov) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
            let rhs = ou.map(|x| a * x).axpy(b, &ov).unwrap();
            let scale = a.abs() * ou.max_abs() + b.abs() * ov.max_abs();
            let d = lhs.max_abs_diff(&rhs).unwrap();
            if d > 1e-12 * scale {
                return Err(fail(format!("shape {shape:?}, s={s}: {d:e} vs scale {scale:e}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn reflection_defect(u: &NdArray) -> f64 {
    let shape = u.shape().to_vec();
    let mut worst: f64 = 0.0;
    for (tuple, _) in tuple_iter(&shape) {
        let a: Vec<usize> = tuple.iter().map(|i| i - 1).collect();
        let b: Vec<usize> = tuple.iter().zip(&shape).map(|(i, n)| n - i).collect();
        worst = worst.max((u.get(&a) - u.get(&b)).abs());
    }
    worst
}

pub fn fraclap_keeps_reflection_symmetry() -> Result<(), String> {
    let strategy = (small_shape(40), 0.05f64..0.95, 0.5f64..10.0, 0.3f64..3.0, any::<bool>());
    runner(16, 6)
        .run(&strategy, |(shape, s, l, r, lorentz)| {
            let g = grids(&shape, &vec![l; shape.len()]);
            let u = if lorentz { radial(&g, |r2| (1.0 + r2).powf(-r)) } else { radial(&g, |r2| (-r * r2).exp()) };
            let op = FracLapOperator::build(factors(&shape), vec![l; shape.len()], s).unwrap();
            let out = op.apply(&u).unwrap();
            let d = reflection_defect(&out);
            if d > 1e-10 * out.max_abs() {
                return Err(fail(format!("shape {shape:?}, s={s}: {d:e}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fraclap_near_one_is_minus_laplacian() -> Result<(), String> {
    let l = 4.0;
    for shape in [vec![64usize], vec![64, 64]] {
        let g = grids(&shape, &vec![l; shape.len()]);
        let u = gaussian(&g);
        let dxx = build_diff_matrices(&g[0], ExtensionKind::Even).unwrap().dxx;
        let mut lap = NdArray::zeros(shape.clone()).unwrap();
        for j in 1..=shape.len() {
            lap = lap.axpy(1.0 / (l * l), &mode_product(dxx.as_ref(), &u, j).unwrap()).unwrap();
        }
        let op = FracLapOperator::build(factors(&shape), vec![l; shape.len()], 1.0 - 1e-6).unwrap();
        let out = op.apply(&u).unwrap();
        let d = out.axpy(1.0, &lap).unwrap().max_abs();
        ensure(d <= 1e-3 * lap.max_abs(), || format!("shape {shape:?}: {d:e} vs {:e}", lap.max_abs()))?;
    }
    Ok(())
}

pub fn p2_discrepancy(shape: &[usize], l: f64, s: f64, u: &NdArray) -> f64 {
    let lin = FracLapOperator::build(factors(shape), vec![l; shape.len()], s).unwrap().apply(u).unwrap();
    let nl = FracPOperator::build(factors(shape), vec![l; shape.len()], s, 2.0).unwrap().apply_pointwise(u).unwrap();
    nl.max_abs_diff(&lin).unwrap() / lin.max_abs()
}

pub fn plap_p2_matches_fraclap() -> Result<(), String> {
    let strategy = (small_shape(32), prop::sample::select(vec![0.2, 0.5, 0.8]), 0.5f64..10.0, vec(-1.0f64..1.0, 1024));
    runner(12, 7)
        .run(&strategy, |(shape, s, l, pool)| {
            let d = p2_discrepancy(&shape, l, s, &field(&shape, &pool));
            if d > 1e-12 {
                return Err(fail(format!("shape {shape:?}, s={s}: {d:e}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Absolute loop/batch discrepancy on a Gaussian, or `None` on a pole.
pub fn loop_batch_discrepancy(shape: &[usize], l: f64, s: f64, p: f64) -> Option<f64> {
    let op = FracPOperator::build(factors(shape), vec![l; shape.len()], s, p).ok()?;
    let u = gaussian(&grids(shape, &vec![l; shape.len()]));
    let a = op.apply_pointwise(&u).unwrap();
    let b = op.apply_batched(&u).unwrap();
    Some(a.max_abs_diff(&b).unwrap())
}

pub fn plap_pointwise_matches_batched() -> Result<(), String> {
    let strategy = (small_shape(24), 0.05f64..0.95, 1.05f64..4.0, 0.5f64..10.0);
    runner(16, 8)
        .run(&strategy, |(shape, s, p, l)| {
            if let Some(d) = loop_batch_discrepancy(&shape, l, s, p) {
                if d > 1e-13 {
                    return Err(fail(format!("shape {shape:?}, s={s}, p={p}, L={l}: {d:e}")));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn phi_is_odd() -> Result<(), String> {
    runner(256, 9)
        .run(&(-1e6f64..1e6, 1.0f64..10.0), |(t, p)| {
            prop_assert_eq!(phi_p(-t, p).to_bits(), (-phi_p(t, p)).to_bits());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn plap_positive_at_peak() -> Result<(), String> {
    let (n, l, s) = (2000, 20.0, 0.8);
    let g = grids(&[n], &[l]);
    let u = gaussian(&g);
    let mid = fraclap::evolution::mid_node(n);
    for p in [1.1, 1.5, 1.9, 2.0, 2.3] {
        let op = FracPOperator::build(factors(&[n]), vec![l], s, p).unwrap();
        let v = op.apply(&u).unwrap().data()[mid];
        ensure(v > 0.0, || format!("p={p}: value at the peak is {v:e}"))?;
    }
    Ok(())
}

pub fn plap_scaling_contract() -> Result<(), String> {
    let strategy = (small_shape(20), 0.05f64..0.95, 1.05f64..3.0, 0.3f64..20.0, vec(-1.0f64..1.0, 400));
    runner(16, 10)
        .run(&strategy, |(shape, s, p, l, pool)| {
            let u = field(&shape, &pool);
            let unit = match FracPOperator::build(factors(&shape), vec![1.0; shape.len()], s, p) {
                Ok(op) => op.apply_pointwise(&u).unwrap(),
                Err(_) => return Ok(()),
            };
            let scaled = FracPOperator::build(factors(&shape), vec![l; shape.len()], s, p)
                .unwrap()
                .apply_pointwise(&u)
                .unwrap();
            let k = l.powf(-s * p);
            let d = unit.map(|x| x * k).max_abs_diff(&scaled).unwrap();
            if d > 1e-12 * scaled.max_abs() {
                return Err(fail(format!("shape {shape:?}, s={s}, p={p}, L={l}: {d:e}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn lemma_closed_forms_chain() -> Result<(), String> {
    for mu in [-0.5, -1.0, -4.0] {
        for s in [0.2, 0.5, 0.8] {
            let i1 = lemma_i1_oracle(mu, s).unwrap().closed;
            let i2 = lemma_i2_oracle(mu, s).unwrap().closed;
            let chained = i1 / gamma_fn(1.0 + s).unwrap();
            ensure((i2 - chained).abs() <= 1e-12 * i2.abs(), || format!("mu={mu}, s={s}: {i2} vs {chained}"))?;
        }
    }
    Ok(())
}

pub fn gamma_reflection() -> Result<(), String> {
    for k in 1..=9 {
        let x = k as f64 / 10.0;
        let v = gamma_fn(x).unwrap() * gamma_fn(1.0 - x).unwrap() * (PI * x).sin() / PI;
        ensure((v - 1.0).abs() <= 1e-12, || format!("x={x}: {v}"))?;
    }
    Ok(())
}

pub fn evolution_conserves_mass() -> Result<(), String> {
    let runs = [(1usize, 0.5, 2.0, 64usize, 5.0), (1, 0.8, 1.8, 65, 10.0), (2, 0.5, 2.0, 16, 4.0)];
    for (n, s, p, nodes, scale) in runs {
        let cfg = EvolutionConfig {
            n,
            s,
            p,
            nodes,
            scale,
            dt: 1e-3,
            t_end: 0.2,
            snapshot_times: vec![0.1, 0.2],
            memory_budget: fraclap::plap::DEFAULT_MEMORY_BUDGET,
        };
        let g = cfg.grids().unwrap();
        let u0 = gaussian(&g);
        let m0 = quad_mass(&u0, &g).unwrap();
        let snaps = run_evolution(&cfg, &u0).unwrap();
        for snap in &snaps {
            let drift = ((snap.mass - m0) / m0).abs();
            ensure(drift <= 1e-6, || format!("n={n}, s={s}, p={p}: drift {drift:e} at t={}", snap.t))?;
            if p == 2.0 {
                let (lo, hi) = (snap.u.data().iter().copied().fold(f64::INFINITY, f64::min), snap.u.max_abs());
                if lo < -1e-6 * hi {
                    eprintln!("note: n={n}, s={s}: min U = {lo:e} at t={}", snap.t);
                }
            }
        }
    }
    Ok(())
}

pub fn rescaling_round_trip() -> Result<(), String> {
    let strategy = (1usize..=2, 0.1f64..0.9, 1.9f64..2.5, 0.5f64..5.0, 0.1f64..10.0, vec(-25.0f64..25.0, 16));
    runner(64, 11)
        .run(&strategy, |(n, s, p, mass, t, x)| {
            let ss = match self_similar_params(n, s, p) {
                Ok(ss) => ss,
                Err(_) => return Ok(()),
            };
            let u: Vec<f64> = x.iter().map(|v| (-v * v).exp()).collect();
            let (r, v) = rescale_section(&x, &u, mass, t, s, p, &ss);
            let (x2, u2) = unrescale_section(&r, &v, mass, t, s, p, &ss);
            for (a, b) in x.iter().zip(&x2).chain(u.iter().zip(&u2)) {
                if (a - b).abs() > f64::EPSILON * a.abs() {
                    return Err(fail(format!("{a} came back as {b}")));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn exponent_identities() -> Result<(), String> {
    for n in [1usize, 2] {
        for s in [0.2, 0.8] {
            for p in [1.3, 1.7, 2.0, 2.4] {
                if let Ok(ss) = self_similar_params(n, s, p) {
                    ensure(ss.alpha - n as f64 * ss.beta == 0.0, || format!("n={n}, s={s}, p={p}"))?;
                }
            }
            let ss = self_similar_params(n, s, 2.0).unwrap();
            ensure(ss.p_c < ss.p_1 && ss.p_1 < 2.0, || format!("n={n}, s={s}: p_c={}, p_1={}", ss.p_c, ss.p_1))?;
        }
    }
    Ok(())
}
