//! Functions of the marked points `x_1 < ... < x_{2N}`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A real-valued function on configurations of `n_points()` ordered points.
///
/// Limits, decompositions and PDE residuals are written against this trait
/// so they apply equally to basis functions, weights and their combinations.
pub trait Evaluator: Send + Sync {
    fn n_points(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;

    fn n_arcs(&self) -> usize {
        self.n_points() / 2
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Arc<E> {
    fn n_points(&self) -> usize {
        (**self).n_points()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        (**self).eval(x)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn n_points(&self) -> usize {
        (**self).n_points()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        (**self).eval(x)
    }
}

pub(crate) fn check_len(e: &(impl Evaluator + ?Sized), x: &[f64]) -> Result<()> {
    if x.len() != e.n_points() {
        return Err(Error::SizeMismatch { expected: e.n_points(), got: x.len() });
    }
    Ok(())
}

/// Wraps a closure.
pub struct FnEvaluator<F> {
    n_points: usize,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    pub fn new(n_points: usize, f: F) -> Self {
        FnEvaluator { n_points, f }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    fn n_points(&self) -> usize {
        self.n_points
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        (self.f)(x)
    }
}

/// The constant function, which solves the system only at `kappa = 6`.
#[derive(Clone, Copy, Debug)]
pub struct Constant {
    pub n_points: usize,
    pub value: f64,
}

impl Evaluator for Constant {
    fn n_points(&self) -> usize {
        self.n_points
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        Ok(self.value)
    }
}

/// `sum_k a_k F_k`.
#[derive(Clone)]
pub struct Combination {
    n_points: usize,
    terms: Vec<(f64, Arc<dyn Evaluator>)>,
}

impl Combination {
    pub fn new(n_points: usize) -> Self {
        Combination { n_points, terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<(f64, Arc<dyn Evaluator>)>) -> Result<Self> {
        let n_points = terms.first().map(|t| t.1.n_points()).ok_or_else(|| Error::Invalid("empty combination".into()))?;
        let mut c = Combination::new(n_points);
        for (a, f) in terms {
            c = c.with(a, f)?;
        }
        Ok(c)
    }

    pub fn with(mut self, coef: f64, f: Arc<dyn Evaluator>) -> Result<Self> {
        if f.n_points() != self.n_points {
            return Err(Error::SizeMismatch { expected: self.n_points, got: f.n_points() });
        }
        self.terms.push((coef, f));
        Ok(self)
    }

    pub fn terms(&self) -> &[(f64, Arc<dyn Evaluator>)] {
        &self.terms
    }
}

impl Evaluator for Combination {
    fn n_points(&self) -> usize {
        self.n_points
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        let mut s = 0.0;
        for (a, f) in &self.terms {
            if *a != 0.0 {
                s += a * f.eval(x)?;
            }
        }
        Ok(s)
    }
}
