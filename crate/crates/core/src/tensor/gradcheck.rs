//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::TensorError;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Perturbation for `(f(x+ε) − f(x−ε)) / 2ε`.
    pub eps: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Tensors with at most this many entries are checked exhaustively.
    pub full_limit: usize,
    /// Coordinates sampled from larger tensors (at least 64).
    pub sampled_coords: usize,
    /// Denominator floor of the relative error, so entries whose true
    /// gradient is ~0 are judged on absolute error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tolerance: 1e-4,
            full_limit: 4096,
            sampled_coords: 64,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Coordinates skipped because a ReLU input changed sign between the
    /// two perturbed evaluations.
    pub skipped_kinks: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params
            .iter()
            .filter(move |p| p.max_rel_error >= self.tolerance)
    }
}

/// Compares the tape gradient of `build`'s scalar output against central
/// finite differences, parameter by parameter. `build` is invoked once per
/// perturbation and must be deterministic.
pub fn gradient_check<F, E>(
    params: &mut ParamStore<f64>,
    mut build: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, E>
where
    F: FnMut(&mut Tape<'_, f64>) -> Result<Var, E>,
    E: From<TensorError>,
{
    let analytic = {
        let mut tape = Tape::with_params(params);
        let loss = build(&mut tape)?;
        tape.backward(loss)?.param_grads(params)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        tolerance: opts.tolerance,
        params: Vec::with_capacity(params.len()),
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).numel();
        let coords: Vec<usize> = if n <= opts.full_limit {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.sampled_coords.max(64).min(n)).into_vec();
            c.sort_unstable();
            c
        };
        let mut entry = ParamCheck {
            name: params.name(id).to_string(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            checked: 0,
            skipped_kinks: 0,
        };
        for j in coords {
            let orig = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = orig + opts.eps;
            let plus = evaluate(params, &mut build);
            params.get_mut(id).data_mut()[j] = orig - opts.eps;
            let minus = evaluate(params, &mut build);
            params.get_mut(id).data_mut()[j] = orig;
            let ((f_plus, sig_plus), (f_minus, sig_minus)) = (plus?, minus?);
            if sig_plus != sig_minus {
                entry.skipped_kinks += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * opts.eps);
            let a = analytic.get(id).data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            entry.checked += 1;
            if rel >= entry.max_rel_error {
                entry.max_rel_error = rel;
                entry.worst_index = j;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        report.params.push(entry);
    }
    Ok(report)
}

fn evaluate<F, E>(params: &ParamStore<f64>, build: &mut F) -> Result<(f64, Vec<bool>), E>
where
    F: FnMut(&mut Tape<'_, f64>) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut tape = Tape::with_params(params);
    let loss = build(&mut tape)?;
    Ok((tape.value(loss).item(), tape.relu_signature()))
}
