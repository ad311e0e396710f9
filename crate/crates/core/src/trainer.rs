//! Full-batch gradient descent on the regularized least-squares loss.
//!
//! The loss sums, per observed rating, the squared prediction error plus
//! lambda_i * (i_u^2 + i_n^2 + mu^2) and lambda_f * (|f_u|^2 + |f_n|^2).
//! Regularization is therefore weighted by each entity's rating count,
//! exactly as the objective is written.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{MatrixEntry, ModelParameters, RatingsMatrix, ScoringConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub final_loss: T,
    pub epochs_run: usize,
    pub converged: bool,
    pub loss_history: Vec<T>,
    pub rmse_train: T,
}

/// Gradients, shaped like the parameters they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub mu: T,
    pub rater_intercepts: Vec<T>,
    pub note_intercepts: Vec<T>,
    pub rater_factors: Vec<T>,
    pub note_factors: Vec<T>,
}

fn check_coverage<T: Scalar>(params: &ModelParameters<T>, matrix: &RatingsMatrix<T>) -> Result<()> {
    for id in &matrix.rater_ids {
        if !params.rater_index.contains_key(id) {
            return Err(Error::UnknownRater(id.clone()));
        }
    }
    for id in &matrix.note_ids {
        if !params.note_index.contains_key(id) {
            return Err(Error::UnknownNote(id.clone()));
        }
    }
    if params.rater_intercepts.len() != params.rater_index.len()
        || params.note_intercepts.len() != params.note_index.len()
    {
        return Err(Error::InvalidInput(
            "parameter vectors do not match index maps".to_string(),
        ));
    }
    Ok(())
}

/// Map matrix ordinals to parameter ordinals (identity when params were
/// built from the same matrix).
fn ordinal_maps<T: Scalar>(
    params: &ModelParameters<T>,
    matrix: &RatingsMatrix<T>,
) -> (Vec<usize>, Vec<usize>) {
    let rows = matrix
        .rater_ids
        .iter()
        .map(|id| params.rater_index[id])
        .collect();
    let cols = matrix
        .note_ids
        .iter()
        .map(|id| params.note_index[id])
        .collect();
    (rows, cols)
}

/// Regularized training loss.
pub fn loss<T: Scalar>(
    params: &ModelParameters<T>,
    matrix: &RatingsMatrix<T>,
    config: &ScoringConfig,
) -> Result<T> {
    check_coverage(params, matrix)?;
    let (rows, cols) = ordinal_maps(params, matrix);
    let lambda_i = T::from_config(config.lambda_i);
    let lambda_f = T::from_config(config.lambda_f);
    let d = params.factor_dimension;

    let mut total = T::zero();
    for e in &matrix.entries {
        let u = rows[e.row];
        let n = cols[e.col];
        let err = e.value - params.predict_at(u, n);
        let i_u = params.rater_intercepts[u];
        let i_n = params.note_intercepts[n];
        let mut f_sq = T::zero();
        for k in 0..d {
            let fu = params.rater_factors[u * d + k];
            let fn_ = params.note_factors[n * d + k];
            f_sq = f_sq + fu * fu + fn_ * fn_;
        }
        total = total
            + err * err
            + lambda_i * (i_u * i_u + i_n * i_n + params.mu * params.mu)
            + lambda_f * f_sq;
    }
    Ok(total)
}

/// Analytic partial derivatives of `loss` with respect to every parameter.
pub fn gradients<T: Scalar>(
    params: &ModelParameters<T>,
    matrix: &RatingsMatrix<T>,
    config: &ScoringConfig,
) -> Result<Gradients<T>> {
    check_coverage(params, matrix)?;
    let (rows, cols) = ordinal_maps(params, matrix);
    let mut g = Gradients {
        mu: T::zero(),
        rater_intercepts: vec![T::zero(); params.rater_intercepts.len()],
        note_intercepts: vec![T::zero(); params.note_intercepts.len()],
        rater_factors: vec![T::zero(); params.rater_factors.len()],
        note_factors: vec![T::zero(); params.note_factors.len()],
    };
    accumulate_gradients(params, matrix, config, &rows, &cols, &mut g);
    Ok(g)
}

fn accumulate_gradients<T: Scalar>(
    params: &ModelParameters<T>,
    matrix: &RatingsMatrix<T>,
    config: &ScoringConfig,
    rows: &[usize],
    cols: &[usize],
    g: &mut Gradients<T>,
) {
    let lambda_i = T::from_config(config.lambda_i);
    let lambda_f = T::from_config(config.lambda_f);
    let two = T::from_config(2.0);
    let d = params.factor_dimension;

    for e in &matrix.entries {
        let u = rows[e.row];
        let n = cols[e.col];
        // err is d(residual^2)/d(prediction) / 2 with sign folded in.
        let err = params.predict_at(u, n) - e.value;
        g.mu = g.mu + two * (err + lambda_i * params.mu);
        g.rater_intercepts[u] =
            g.rater_intercepts[u] + two * (err + lambda_i * params.rater_intercepts[u]);
        g.note_intercepts[n] =
            g.note_intercepts[n] + two * (err + lambda_i * params.note_intercepts[n]);
        for k in 0..d {
            let fu = params.rater_factors[u * d + k];
            let fn_ = params.note_factors[n * d + k];
            g.rater_factors[u * d + k] =
                g.rater_factors[u * d + k] + two * (err * fn_ + lambda_f * fu);
            g.note_factors[n * d + k] =
                g.note_factors[n * d + k] + two * (err * fu + lambda_f * fn_);
        }
    }
}

/// Root mean squared prediction error over a set of matrix entries.
pub fn rmse_entries<T: Scalar>(params: &ModelParameters<T>, entries: &[MatrixEntry<T>]) -> T {
    if entries.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for e in entries {
        let err = e.value - params.predict_at(e.row, e.col);
        sum = sum + err * err;
    }
    (sum / T::from_usize(entries.len()).unwrap()).sqrt()
}

/// Deterministic seeded split of a matrix's entries into a training matrix
/// and held-out entries (both keep the original ordinals). Diagnostic only.
pub fn holdout_split<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    holdout_fraction: f64,
    seed: u64,
) -> (RatingsMatrix<T>, Vec<MatrixEntry<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = matrix.clone();
    train.entries.clear();
    for c in train.ratings_per_rater.iter_mut() {
        *c = 0;
    }
    for c in train.ratings_per_note.iter_mut() {
        *c = 0;
    }
    let mut held = Vec::new();
    for e in &matrix.entries {
        if rng.gen::<f64>() < holdout_fraction {
            held.push(*e);
        } else {
            train.ratings_per_rater[e.row] += 1;
            train.ratings_per_note[e.col] += 1;
            train.entries.push(*e);
        }
    }
    (train, held)
}

fn count_of<T: Scalar>(count: usize) -> T {
    T::from_usize(count.max(1)).unwrap()
}

/// Anchor for the sign convention: the rater with the most ratings, ties
/// broken by lexicographically smallest rater id.
fn anchor_rater<T: Scalar>(matrix: &RatingsMatrix<T>) -> usize {
    let mut best = 0;
    for row in 1..matrix.n_raters() {
        let better = matrix.ratings_per_rater[row] > matrix.ratings_per_rater[best]
            || (matrix.ratings_per_rater[row] == matrix.ratings_per_rater[best]
                && matrix.rater_ids[row] < matrix.rater_ids[best]);
        if better {
            best = row;
        }
    }
    best
}

/// Fit parameters by full-batch gradient descent with a fixed learning rate.
///
/// Each coordinate's step is the summed gradient divided by the number of
/// ratings touching that coordinate (the global intercept by the total
/// entry count). Without this scaling a fixed rate diverges as soon as the
/// matrix holds more than a handful of ratings, since the loss sums per
/// rating; on a single-rating matrix the step reduces to plain gradient
/// descent.
///
/// Deterministic for a fixed seed. Stops when the relative loss improvement
/// over an epoch falls below `convergence_tolerance` or `max_epochs` is
/// reached. Afterward, if the anchor rater's factor is negative in some
/// dimension, that dimension is negated across all raters and notes
/// (loss-invariant).
pub fn train<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    config: &ScoringConfig,
) -> Result<(ModelParameters<T>, TrainReport<T>)> {
    if matrix.is_empty() {
        return Err(Error::EmptyInput("cannot train on an empty matrix"));
    }
    let d = config.factor_dimension.max(1);
    let mut params = ModelParameters::zeros(matrix, d);

    // Zero factor init is a saddle (all factor gradients vanish), so factors
    // start uniform on [-init_scale, init_scale]. Draws are made in f64 so
    // the stream is identical regardless of the scalar type.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for f in params
        .rater_factors
        .iter_mut()
        .chain(params.note_factors.iter_mut())
    {
        let draw: f64 = rng.gen_range(-config.init_scale..=config.init_scale);
        *f = T::from_config(draw);
    }

    let rows: Vec<usize> = (0..matrix.n_raters()).collect();
    let cols: Vec<usize> = (0..matrix.n_notes()).collect();
    let lr = T::from_config(config.learning_rate);
    let tol = T::from_config(config.convergence_tolerance);

    let mut loss_history = Vec::new();
    let mut converged = false;
    let mut epochs_run = 0;

    for epoch in 0..config.max_epochs {
        let current = loss(&params, matrix, config)?;
        if !current.is_finite() {
            return Err(Error::Divergence(epoch));
        }
        loss_history.push(current);
        if let Some(&prev) = loss_history.len().checked_sub(2).map(|i| &loss_history[i]) {
            let improvement = prev - current;
            // A loss increase is never convergence; it either settles
            // (max_epochs) or blows up (divergence above).
            let relative_ok =
                improvement >= T::zero() && (prev == T::zero() || improvement / prev < tol);
            if relative_ok {
                converged = true;
                epochs_run = epoch;
                break;
            }
        }
        let mut g = Gradients {
            mu: T::zero(),
            rater_intercepts: vec![T::zero(); params.rater_intercepts.len()],
            note_intercepts: vec![T::zero(); params.note_intercepts.len()],
            rater_factors: vec![T::zero(); params.rater_factors.len()],
            note_factors: vec![T::zero(); params.note_factors.len()],
        };
        accumulate_gradients(&params, matrix, config, &rows, &cols, &mut g);

        let total = T::from_usize(matrix.entries.len()).unwrap();
        params.mu = params.mu - lr * g.mu / total;
        for (u, (p, gv)) in params
            .rater_intercepts
            .iter_mut()
            .zip(&g.rater_intercepts)
            .enumerate()
        {
            *p = *p - lr * *gv / count_of(matrix.ratings_per_rater[u]);
        }
        for (n, (p, gv)) in params
            .note_intercepts
            .iter_mut()
            .zip(&g.note_intercepts)
            .enumerate()
        {
            *p = *p - lr * *gv / count_of(matrix.ratings_per_note[n]);
        }
        for (i, (p, gv)) in params
            .rater_factors
            .iter_mut()
            .zip(&g.rater_factors)
            .enumerate()
        {
            *p = *p - lr * *gv / count_of(matrix.ratings_per_rater[i / d]);
        }
        for (i, (p, gv)) in params
            .note_factors
            .iter_mut()
            .zip(&g.note_factors)
            .enumerate()
        {
            *p = *p - lr * *gv / count_of(matrix.ratings_per_note[i / d]);
        }
        epochs_run = epoch + 1;
    }

    if !converged {
        // Record the loss at the final parameters so final_loss reflects
        // what was actually returned.
        let final_l = loss(&params, matrix, config)?;
        if !final_l.is_finite() {
            return Err(Error::Divergence(epochs_run));
        }
        loss_history.push(final_l);
    }

    // Sign convention, per dimension.
    let anchor = anchor_rater(matrix);
    for k in 0..d {
        if params.rater_factors[anchor * d + k] < T::zero() {
            for row in 0..matrix.n_raters() {
                params.rater_factors[row * d + k] = -params.rater_factors[row * d + k];
            }
            for col in 0..matrix.n_notes() {
                params.note_factors[col * d + k] = -params.note_factors[col * d + k];
            }
        }
    }

    let report = TrainReport {
        final_loss: *loss_history.last().expect("non-empty history"),
        epochs_run,
        converged,
        loss_history,
        rmse_train: rmse_entries(&params, &matrix.entries),
    };
    Ok((params, report))
}
