//! Score fields: anything that maps a point to an estimate of `∇ log p`.
//!
//! A field is bound to one noise level when it is constructed (an oracle
//! for `p_α`, or a trained model frozen at a timestep), so evaluation only
//! takes the point.

/// An evaluatable score field `x -> s(x)` on `R^dim`.
///
/// Implementations must be pure: the same input always yields the same
/// output, and concurrent evaluation from several threads is allowed.
pub trait ScoreField: Sync {
    fn dim(&self) -> usize;

    /// Writes `s(x)` into `out` (`out.len() == self.dim()`).
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        out
    }
}

impl<F: ScoreField + ?Sized> ScoreField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).score_into(x, out)
    }
}

impl<F: ScoreField + ?Sized + Send> ScoreField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).score_into(x, out)
    }
}

/// The field `factor * s(x)`, i.e. the score of `factor * u` when `s = ∇u`.
#[derive(Debug, Clone)]
pub struct Scaled<F> {
    pub inner: F,
    pub factor: f64,
}

impl<F: ScoreField> ScoreField for Scaled<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.score_into(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// The field `s(x) + offset` for a constant vector offset.
#[derive(Debug, Clone)]
pub struct Shifted<F> {
    pub inner: F,
    pub offset: Vec<f64>,
}

impl<F: ScoreField> ScoreField for Shifted<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.score_into(x, out);
        out.iter_mut().zip(&self.offset).for_each(|(v, o)| *v += o);
    }
}

/// Adapts a closure into a field.
pub struct FnField<G> {
    dim: usize,
    f: G,
}

impl<G> FnField<G>
where
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: G) -> Self {
        Self { dim, f }
    }
}

impl<G> ScoreField for FnField<G>
where
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrappers_compose() {
        let id = FnField::new(2, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let f = Shifted { inner: Scaled { inner: &id, factor: -2.0 }, offset: vec![1.0, 0.0] };
        assert_eq!(f.score(&[1.0, 3.0]), vec![-1.0, -6.0]);
    }
}
