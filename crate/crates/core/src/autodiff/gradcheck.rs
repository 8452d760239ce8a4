use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares the tape gradient of `f` at `x` with central finite differences.
///
/// `f` receives a fresh tape and the leaf holding `x`, and must return a scalar
/// node. Returns `max_i |fd_i - g_i| / max(1, |g_i|)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be > 0, got {eps}"
        )));
    }
    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone())?;
    let out = f(&mut tape, leaf)?;
    let grad = tape.backward(out)?.wrt(&tape, leaf);

    let eval = |point: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(point)?;
        let out = f(&mut tape, leaf)?;
        let v = tape.value(out).item();
        if !v.is_finite() {
            return Err(Error::NonFinite("finite-difference probe".into()));
        }
        Ok(v)
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let g = grad.data()[i];
        worst = worst.max((fd - g).abs() / g.abs().max(1.0));
    }
    Ok(worst)
}
