use super::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-component min-max scaling to `[0, 1]`; constant components become 0.5.
pub fn scale_components<T: Scalar>(e: &Embedding<T>) -> Result<Embedding<T>> {
    if e.is_empty() {
        return Err(Error::Precondition("cannot scale an empty embedding".into()));
    }
    let mut out = e.clone();
    for c in 0..e.n_components {
        let col = e.column(c);
        let lo = col.iter().copied().fold(T::infinity(), T::min);
        let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
        let span = hi - lo;
        if span <= T::zero() {
            out.warnings.push(format!("component {c} is constant; mapped to 0.5"));
            for row in out.coords.iter_mut() {
                row[c] = T::lit(0.5);
            }
        } else {
            for row in out.coords.iter_mut() {
                row[c] = ((row[c] - lo) / span).max(T::zero()).min(T::one());
            }
        }
    }
    Ok(out)
}
