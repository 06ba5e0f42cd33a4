//! Estimator gradient error against the closed-form bound for linear
//! features.

use adaptive_polyopt::acceptance::gradient_error_bound;

fn main() {
    println!("{}", gradient_error_bound());
}
