//! Finite-difference checks of the hand-written backward passes.

use onbody::nnet::gradcheck::{check_input_gradient, check_param_gradient};
use onbody::nnet::{Conv1d, Dense};
use onbody::rng::{stream, uniform};

fn main() -> onbody::Result<()> {
    let mut rng = stream(1, 0);
    let mut rand_vec = |n: usize| (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect::<Vec<f64>>();

    let conv = Conv1d::init(2, 3, 3, &mut stream(2, 0));
    let (x, len) = (rand_vec(2 * 12), 12);
    let r = rand_vec(3 * conv.out_len(len)?);
    let readout = |y: Vec<f64>| y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
    let mut grads = Conv1d::zeros(2, 3, 3);
    let gx = conv.backward(&x, len, &r, &mut grads, true);
    let a = check_input_gradient(|x| readout(conv.forward(x, len).unwrap()), &x, &gx, 100, 0);
    let b = check_param_gradient(&conv, |c: &Conv1d| readout(c.forward(&x, len).unwrap()), &grads, 100, 1);
    println!("conv1d  input {:.2e}  params {:.2e}", a.max_rel_error, b.max_rel_error);

    let dense = Dense::init(5, 4, &mut stream(3, 0));
    let x = rand_vec(5);
    let r = rand_vec(4);
    let mut grads = Dense::zeros(5, 4);
    let gx = dense.backward(&x, &r, &mut grads);
    let f = |d: &Dense, x: &[f64]| d.forward(x).unwrap().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
    let a = check_input_gradient(|x| f(&dense, x), &x, &gx, 100, 2);
    let b = check_param_gradient(&dense, |d: &Dense| f(d, &x), &grads, 100, 3);
    println!("dense   input {:.2e}  params {:.2e}", a.max_rel_error, b.max_rel_error);
    Ok(())
}
