use rand::Rng;

use super::{Real, Tensor};

/// Uniform(-a, a) with `a = sqrt(6 / (fan_in + fan_out))` for a `rows × cols`
/// weight matrix mapping `cols` inputs to `rows` outputs.
pub fn glorot_uniform<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rows, cols, a, rng)
}

/// Uniform(-a, a) entries.
pub fn uniform<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, a: f64, rng: &mut R) -> Tensor<T> {
    let data = (0..rows * cols)
        .map(|_| T::of(rng.gen_range(-a..=a)))
        .collect();
    Tensor::matrix(rows, cols, data).expect("length matches")
}
