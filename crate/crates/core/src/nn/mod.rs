//! Small dense networks with analytic gradients, Adam, and the gradient
//! balancing rules used by return learning.

mod adam;
mod balance;
pub mod format;
mod grad;
mod mlp;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use balance::{combine_gn, should_early_stop};
pub use grad::GradientBundle;
pub use mlp::{Activation, Mlp, Tape};

/// Input width, `depth` hidden layers of `hidden` units, output width.
pub fn layer_widths(input: usize, hidden: usize, depth: usize, output: usize) -> Vec<usize> {
    let mut widths = Vec::with_capacity(depth + 2);
    widths.push(input);
    widths.extend(std::iter::repeat_n(hidden, depth));
    widths.push(output);
    widths
}
