//! Central finite-difference gradient verification.

use super::params::{Gradients, ParamStore};
use crate::error::Result;
use crate::scalar::{lit, Scalar};

/// Compares `analytic` against central differences of `loss` over every
/// parameter coordinate and returns the worst relative error
/// `|a - n| / max(1e-8, |a| + |n|)`.
///
/// `loss` must be deterministic in the parameters.
pub fn fd_check<S: Scalar>(
    params: &ParamStore<S>,
    analytic: &Gradients<S>,
    h: S,
    mut loss: impl FnMut(&ParamStore<S>) -> Result<S>,
) -> Result<S> {
    let mut work = params.clone();
    let mut worst = S::zero();
    let floor = lit::<S>(1e-8);
    for slot in 0..params.n_slots() {
        for k in 0..params.get(slot).len() {
            let orig = params.get(slot).data()[k];
            work.get_mut(slot).data_mut()[k] = orig + h;
            let up = loss(&work)?;
            work.get_mut(slot).data_mut()[k] = orig - h;
            let down = loss(&work)?;
            work.get_mut(slot).data_mut()[k] = orig;
            let numeric = (up - down) / (lit::<S>(2.0) * h);
            let a = analytic.slot(slot)[k];
            let err = (a - numeric).abs() / floor.max(a.abs() + numeric.abs());
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}
