//! Checks tape gradients against central finite differences, then shows the
//! gradient-reversal layer and `detach` acting on the backward pass.

use loant::autodiff::{finite_diff_check, Tape, Tensor};

fn main() -> loant::Result<()> {
    let x = Tensor::matrix(2, 3, vec![0.3, -1.2, 0.8, 1.5, -0.4, 0.1])?;
    let w = Tensor::matrix(3, 2, vec![0.5, -0.3, 0.2, 0.9, -0.7, 0.4])?;

    // a small network: softmax cross-entropy of tanh(x @ w)
    let targets = Tensor::one_hot(&[1, 0], 2)?;
    let err = finite_diff_check(
        |tape, leaf| {
            let w = tape.constant(w.clone())?;
            let h = tape.matmul(leaf, w)?;
            let h = tape.tanh(h)?;
            tape.softmax_cross_entropy(h, targets.clone())
        },
        &x,
        1e-6,
    )?;
    println!("tanh/matmul/cross-entropy: max relative error {err:.2e}");

    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone())?;
    let reversed = tape.grl(leaf, 0.5)?;
    let frozen = tape.detach(leaf)?;
    let both = tape.add(reversed, frozen)?;
    let loss = tape.sum(both)?;
    let grads = tape.backward(loss)?;
    println!(
        "forward sum {:.3} (twice the input sum), gradient {:?}",
        tape.value(loss).item(),
        grads.wrt(&tape, leaf).data()
    );
    Ok(())
}
