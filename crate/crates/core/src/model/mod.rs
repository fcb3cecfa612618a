//! The model contract the tests run against, plus a feedforward network.

mod mlp;
mod train;

pub use mlp::{Dense, Gradients, Head, Mlp, MlpConfig};
pub use train::{fit_count, inverse_frequency_weights, train, AdamConfig, EarlyStopping, EpochRecord, TrainConfig, TrainHistory, Trained};

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A fitted model. `predict` must be deterministic and free of side effects;
/// it may be called concurrently.
pub trait PredictiveModel: Send + Sync {
    /// Expected column count, intercept included.
    fn input_width(&self) -> usize;

    /// 1 for regression, `C` for class probabilities.
    fn output_width(&self) -> usize;

    /// One output row per input row.
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;

    /// `h × (p+1)` weights of the first linear map, when the model has one.
    fn first_layer_weights(&self) -> Option<ArrayView2<'_, f64>> {
        None
    }

    /// Same structure, freshly drawn parameters.
    fn randomized(&self, _seed: u64) -> Result<Box<dyn PredictiveModel>> {
        Err(Error::Unsupported("parameter randomization"))
    }
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for Box<M> {
    fn input_width(&self) -> usize {
        (**self).input_width()
    }
    fn output_width(&self) -> usize {
        (**self).output_width()
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        (**self).predict(x)
    }
    fn first_layer_weights(&self) -> Option<ArrayView2<'_, f64>> {
        (**self).first_layer_weights()
    }
    fn randomized(&self, seed: u64) -> Result<Box<dyn PredictiveModel>> {
        (**self).randomized(seed)
    }
}

/// Wraps a per-row function as a model. Handy for hand-built models.
pub struct RowFnModel<F> {
    input_width: usize,
    output_width: usize,
    f: F,
}

impl<F> RowFnModel<F>
where
    F: Fn(ArrayView1<f64>) -> Vec<f64> + Send + Sync,
{
    pub fn new(input_width: usize, output_width: usize, f: F) -> Self {
        RowFnModel { input_width, output_width, f }
    }
}

impl<F> PredictiveModel for RowFnModel<F>
where
    F: Fn(ArrayView1<f64>) -> Vec<f64> + Send + Sync,
{
    fn input_width(&self) -> usize {
        self.input_width
    }

    fn output_width(&self) -> usize {
        self.output_width
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(self.input_width, x)?;
        let mut out = Array2::zeros((x.nrows(), self.output_width));
        for (i, row) in x.outer_iter().enumerate() {
            let v = (self.f)(row);
            if v.len() != self.output_width {
                return Err(Error::DimensionMismatch { expected: self.output_width, found: v.len() });
            }
            out.row_mut(i).assign(&ArrayView1::from(&v));
        }
        Ok(out)
    }
}

pub(crate) fn check_width(expected: usize, x: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.ncols() });
    }
    Ok(())
}

/// Counts prediction passes made through a borrowed model.
pub struct CountingModel<'a, M: ?Sized> {
    inner: &'a M,
    passes: AtomicUsize,
    rows: AtomicUsize,
}

impl<'a, M: PredictiveModel + ?Sized> CountingModel<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        CountingModel { inner, passes: AtomicUsize::new(0), rows: AtomicUsize::new(0) }
    }

    pub fn passes(&self) -> usize {
        self.passes.load(Ordering::SeqCst)
    }

    pub fn rows(&self) -> usize {
        self.rows.load(Ordering::SeqCst)
    }
}

impl<M: PredictiveModel + ?Sized> PredictiveModel for CountingModel<'_, M> {
    fn input_width(&self) -> usize {
        self.inner.input_width()
    }
    fn output_width(&self) -> usize {
        self.inner.output_width()
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.passes.fetch_add(1, Ordering::SeqCst);
        self.rows.fetch_add(x.nrows(), Ordering::SeqCst);
        self.inner.predict(x)
    }
    fn first_layer_weights(&self) -> Option<ArrayView2<'_, f64>> {
        self.inner.first_layer_weights()
    }
    fn randomized(&self, seed: u64) -> Result<Box<dyn PredictiveModel>> {
        self.inner.randomized(seed)
    }
}
