//! Test-function families fed to the verifiers.

use gammalab::ScalarField;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SIGMOID_FAMILY_SIZE: usize = 10;

/// Slope and center of the `k`-th sigmoid: slopes spread over `[0.5, 2]`,
/// centers over `[−1, 1]` in a shuffled order so slope and center are not tied.
pub fn sigmoid_parameters(k: usize) -> (f64, f64) {
    let slope = 0.5 + 1.5 * k as f64 / 9.0;
    let center = -1.0 + 2.0 * ((7 * k) % 10) as f64 / 9.0;
    (slope, center)
}

pub fn sigmoid(coords: &[f64], slope: f64, center: f64) -> ScalarField {
    ScalarField::new(coords.iter().map(|x| 1.0 / (1.0 + (-slope * (x - center)).exp())).collect())
        .expect("sigmoid values are finite")
}

pub fn sigmoid_family(coords: &[f64]) -> Vec<ScalarField> {
    (0..SIGMOID_FAMILY_SIZE)
        .map(|k| {
            let (s, c) = sigmoid_parameters(k);
            sigmoid(coords, s, c)
        })
        .collect()
}

/// `count` fields with i.i.d. uniform values in `[lo, hi)`.
pub fn uniform_fields(rng: &mut ChaCha8Rng, n: usize, count: usize, lo: f64, hi: f64) -> Vec<ScalarField> {
    (0..count)
        .map(|_| ScalarField::new((0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("finite"))
        .collect()
}
