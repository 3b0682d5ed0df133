//! Acceptance report: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the report is always
//! printed.

use std::f64::consts::PI;
use std::time::Instant;

use fraclap_validation::properties::{self as props, arctan_errors, loop_batch_discrepancy, one_minus_gaussian_errors};
use fraclap_validation::{draw, factor, factors, gaussian, grids, radial};
use fraclap::eigen::condition_number;
use fraclap::evolution::profile_sup_distance;
use fraclap::oracles::{exact_fraclap_algebraic, exact_fraclap_gaussian, lemma_i1_oracle, lemma_i2_oracle};
use fraclap::special::gamma_fn;
use fraclap::{
    constant_c, quad_mass, run_evolution, Error, EvolutionConfig, FracLapOperator, FracPOperator, Grid1D, NdArray,
};
use proptest::collection::vec;
use proptest::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn exact_on_grid(g: &[Grid1D], f: impl Fn(f64) -> f64) -> NdArray {
    radial(g, f)
}

fn gaussian_4d() -> Outcome {
    let dims = [39, 40, 41, 42];
    let scales = [4.7, 4.8, 4.9, 5.0];
    let s = 0.13;
    let g = grids(&dims, &scales);
    let u = gaussian(&g);
    let exact = exact_on_grid(&g, |r2| exact_fraclap_gaussian(s, 4, r2).unwrap());
    let op = FracLapOperator::build(factors(&dims), scales.to_vec(), s).unwrap();
    let start = Instant::now();
    let out = op.apply(&u).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = out.max_abs_diff(&exact).unwrap();
    outcome(
        err <= 5e-9 && secs <= 10.0,
        format!("4-D Gaussian, s=0.13: max error {err:.4e} (limit 5e-9), apply {secs:.3} s (limit 10 s)"),
    )
}

fn half_laplacian_sweep() -> Outcome {
    let n = 128;
    let f = factor(n);
    let mut best_g = (f64::INFINITY, 0.0);
    let mut best_a = (f64::INFINITY, 0.0);
    for k in 1..=60 {
        let l = 0.5 * k as f64;
        let g = grids(&[n], &[l]);
        let op = FracLapOperator::build(vec![f.clone()], vec![l], 0.5).unwrap();
        let eg = op
            .apply(&gaussian(&g))
            .unwrap()
            .max_abs_diff(&exact_on_grid(&g, |r2| exact_fraclap_gaussian(0.5, 1, r2).unwrap()))
            .unwrap();
        let ea = op
            .apply(&radial(&g, |r2| 1.0 / (1.0 + r2)))
            .unwrap()
            .max_abs_diff(&exact_on_grid(&g, |r2| exact_fraclap_algebraic(0.5, 1.0, 1, r2).unwrap()))
            .unwrap();
        if eg < best_g.0 {
            best_g = (eg, l);
        }
        if ea < best_a.0 {
            best_a = (ea, l);
        }
    }
    outcome(
        best_g.0 <= 1e-10 && best_a.0 <= 1e-10,
        format!(
            "half-Laplacian N=128: Gaussian best {:.3e} at L={}, (1+x^2)^-1 best {:.3e} at L={} (limit 1e-10)",
            best_g.0, best_g.1, best_a.0, best_a.1
        ),
    )
}

fn p2_reduction() -> Outcome {
    let strategy = (
        vec(2usize..=32, 1..=2),
        prop::sample::select(vec![0.2, 0.5, 0.8]),
        0.5f64..10.0,
        vec(-1.0f64..1.0, 1024),
    );
    let mut worst: f64 = 0.0;
    for (shape, s, l, pool) in draw(strategy, 20, 31) {
        let len: usize = shape.iter().product();
        let u = NdArray::new(shape.clone(), pool[..len].to_vec()).unwrap();
        worst = worst.max(props::p2_discrepancy(&shape, l, s, &u));
    }
    outcome(worst <= 1e-12, format!("p=2 reduction, 20 random instances: max relative discrepancy {worst:.3e} (limit 1e-12)"))
}

fn loop_batch() -> Outcome {
    let strategy = (vec(2usize..=32, 1..=2), 0.05f64..0.95, 1.05f64..4.0, 0.5f64..10.0);
    let mut worst: f64 = 0.0;
    let mut ran = 0;
    for (shape, s, p, l) in draw(strategy, 20, 41) {
        if let Some(d) = loop_batch_discrepancy(&shape, l, s, p) {
            worst = worst.max(d);
            ran += 1;
        }
    }
    outcome(worst <= 1e-13, format!("loop/batch on {ran} Gaussian instances: max absolute discrepancy {worst:.3e} (limit 1e-13)"))
}

fn plap_2d() -> Outcome {
    let dims = [200, 201];
    let scales = [18.0, 18.1];
    let s = 0.67;
    let g = grids(&dims, &scales);
    let u = gaussian(&g);
    let exact = exact_on_grid(&g, |r2| exact_fraclap_gaussian(s, 2, r2).unwrap());
    let op = FracPOperator::build(factors(&dims), scales.to_vec(), s, 2.0).unwrap();
    let start = Instant::now();
    let out = op.apply_pointwise(&u).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = out.max_abs_diff(&exact).unwrap();
    outcome(
        err <= 1e-11 && secs <= 1800.0,
        format!("2-D p-Laplacian p=2, N=(200,201): max error {err:.4e} (limit 1e-11), loop mode {secs:.1} s (limit 1800 s)"),
    )
}

fn constant_and_poles() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for k in 1..=9 {
            let s = k as f64 / 10.0;
            worst = worst.max((constant_c(n, s, 2.0).unwrap() + 1.0).abs());
        }
    }
    let mut pole_errors = Vec::new();
    for k in 1..=9 {
        let s = k as f64 / 10.0;
        for m in [1.0, 2.0] {
            for (delta, pole) in [(0.0, true), (1e-13, true), (-1e-13, true), (1e-11, false), (-1e-11, false)] {
                let p = 2.0 * (m + delta) / s;
                let got = matches!(constant_c(1, s, p), Err(Error::Pole(_)));
                if got != pole {
                    pole_errors.push(format!("s={s}, sp/2={}", m + delta));
                }
            }
        }
    }
    outcome(
        worst <= 1e-14 && pole_errors.is_empty(),
        format!(
            "constant C(n,s,2): max |C+1| {worst:.3e} (limit 1e-14); pole detection mismatches: {}",
            if pole_errors.is_empty() { "none".to_string() } else { pole_errors.join("; ") }
        ),
    )
}

fn conditioning() -> Outcome {
    let sizes = [100usize, 200, 400, 800];
    let kappas: Vec<f64> = sizes.iter().map(|&n| condition_number(&factor(n).p).unwrap()).collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).log10()).collect();
    let ys: Vec<f64> = kappas.iter().map(|k| k.log10()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let k800 = kappas[3];
    outcome(
        (0.6..=0.9).contains(&slope) && k800 <= 200.0,
        format!("conditioning: log-log slope {slope:.4} (range [0.6, 0.9]), kappa(800) = {k800:.2} (limit 200)"),
    )
}

fn lemmas() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut chain: f64 = 0.0;
    for mu in [-0.5, -1.0, -4.0] {
        for s in [0.2, 0.5, 0.8] {
            let i1 = lemma_i1_oracle(mu, s).unwrap();
            let i2 = lemma_i2_oracle(mu, s).unwrap();
            worst = worst.max(i1.rel_error()).max(i2.rel_error());
            let chained = i1.closed / gamma_fn(1.0 + s).unwrap();
            chain = chain.max(((i2.closed - chained) / i2.closed).abs());
        }
    }
    outcome(
        worst <= 1e-6 && chain <= 1e-12,
        format!("lemma oracles: max quadrature error {worst:.3e} (limit 1e-6), I2 = I1/Gamma(1+s) defect {chain:.3e} (limit 1e-12)"),
    )
}

fn mass() -> Outcome {
    let mut worst1: f64 = 0.0;
    for l in [1.0, 10.0, 100.0] {
        let g = grids(&[1000], &[l]);
        worst1 = worst1.max((quad_mass(&gaussian(&g), &g).unwrap() - PI.sqrt()).abs());
    }
    let mut worst2: f64 = 0.0;
    for l in [1.0, 10.0] {
        let g = grids(&[200, 200], &[l, l]);
        worst2 = worst2.max((quad_mass(&gaussian(&g), &g).unwrap() - PI).abs());
    }
    outcome(
        worst1 <= 1e-12 && worst2 <= 1e-10,
        format!("mass: n=1 N=1000 L in {{1,10,100}} error {worst1:.3e} (limit 1e-12); n=2 N=200 L in {{1,10}} error {worst2:.3e} (limit 1e-10)"),
    )
}

fn evolution() -> Outcome {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/evolution/n1_s0.8_p1.8.cfg"))
        .expect("shipped config");
    let mut cfg: EvolutionConfig = text.parse().unwrap();
    cfg.snapshot_times = vec![1.8, 1.85, 1.9];
    let g = cfg.grids().unwrap();
    let u0 = gaussian(&g);
    let m0 = quad_mass(&u0, &g).unwrap();
    let start = Instant::now();
    let snaps = run_evolution(&cfg, &u0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let dist = profile_sup_distance(&snaps).unwrap();
    let drift = snaps.iter().map(|s| ((s.mass - m0) / m0).abs()).fold(0.0, f64::max);
    outcome(
        dist <= 2e-2 && drift <= 1e-6 && secs <= 1800.0,
        format!(
            "evolution n=1 s=0.8 p=1.8: profile sup-distance {dist:.3e} (limit 2e-2), mass drift {drift:.3e} (limit 1e-6), {secs:.1} s (limit 1800 s)"
        ),
    )
}

fn differentiation() -> Outcome {
    let (a1, a2) = arctan_errors(2000, 100.0);
    let (g1, g2) = one_minus_gaussian_errors(2000, 100.0);
    let mut monotone = true;
    let mut series = Vec::new();
    for f in [arctan_errors as fn(usize, f64) -> (f64, f64), one_minus_gaussian_errors] {
        let errs: Vec<(f64, f64)> = [32, 64, 128, 256].iter().map(|&n| f(n, 20.0)).collect();
        for w in errs.windows(2) {
            let ok = |a: f64, b: f64| b <= a || b <= props::DERIVATIVE_FLOOR;
            monotone &= ok(w[0].0, w[1].0) && ok(w[0].1, w[1].1);
        }
        series.push(errs.iter().map(|e| format!("{:.1e}/{:.1e}", e.0, e.1)).collect::<Vec<_>>().join(" "));
    }
    outcome(
        a1.max(g1) <= 1e-9 && a2.max(g2) <= 1e-8 && monotone,
        format!(
            "differentiation N=2000 L=100: arctan u' {a1:.3e}, u'' {a2:.3e}; 1-exp(-x^2) u' {g1:.3e}, u'' {g2:.3e} (limits 1e-9, 1e-8); L=20 N=32..256 u'/u'': arctan [{}], 1-exp(-x^2) [{}], non-increasing: {monotone}",
            series[0], series[1]
        ),
    )
}

fn property_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, check) in props::ALL {
        if let Err(e) = check() {
            failures.push(format!("{name}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs <= 300.0,
        format!(
            "property suite: {} checks, {} failed, {secs:.1} s (limit 300 s){}",
            props::ALL.len(),
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
        ),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 12] = [
        gaussian_4d,
        half_laplacian_sweep,
        p2_reduction,
        loop_batch,
        plap_2d,
        constant_and_poles,
        conditioning,
        lemmas,
        mass,
        evolution,
        differentiation,
        property_suite,
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (k, criterion) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let o = criterion();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2}: {} [{:.1} s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
