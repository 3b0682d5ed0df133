//! Shared fixtures and seeded property checks for the fraclap workspace.

pub mod properties;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use fraclap::evolution::gaussian_field;
use fraclap::{make_grid, Grid1D, NdArray, SpectralFactor};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// Factorizations are shared between tests of the same binary.
pub fn factor(n: usize) -> Arc<SpectralFactor> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpectralFactor>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().unwrap().get(&n) {
        return f.clone();
    }
    let f = Arc::new(SpectralFactor::for_size(n).expect("factorization"));
    cache.lock().unwrap().insert(n, f.clone());
    f
}

pub fn factors(dims: &[usize]) -> Vec<Arc<SpectralFactor>> {
    dims.iter().map(|&n| factor(n)).collect()
}

pub fn grids(dims: &[usize], scales: &[f64]) -> Vec<Grid1D> {
    dims.iter().zip(scales).map(|(&n, &l)| make_grid(n, l).unwrap()).collect()
}

pub fn gaussian(grids: &[Grid1D]) -> NdArray {
    gaussian_field(grids).unwrap()
}

/// `f(|x|^2)` on the tensor grid.
pub fn radial(grids: &[Grid1D], f: impl Fn(f64) -> f64) -> NdArray {
    let shape = grids.iter().map(|g| g.n).collect();
    NdArray::from_fn(shape, |idx| {
        let r2: f64 = idx.iter().enumerate().map(|(d, &i)| grids[d].x[i].powi(2)).sum();
        f(r2)
    })
    .unwrap()
}

pub fn runner(cases: u32, seed: u8) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

/// Draws `count` values from a strategy with a fixed seed.
pub fn draw<S: Strategy>(strategy: S, count: usize, seed: u8) -> Vec<S::Value> {
    let mut r = runner(1, seed);
    (0..count).map(|_| strategy.new_tree(&mut r).unwrap().current()).collect()
}
