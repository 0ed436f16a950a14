//! Finite-difference check of every tape operation, plus a short
//! hand-built LSTM unrolled over three steps.

use ndcore::gradcheck::{check, op_suite};
use ndcore::{NdError, Tensor};
use polcov::neural::cells::{lstm_step_tape_full, LstmCellParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), NdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, rep) in op_suite(100, 1e-5, &mut rng)? {
        println!("{name:<24} max rel error {:.2e}", rep.max_rel_error);
    }

    let cell = LstmCellParams::random(4, 3, 0.7, &mut rng);
    let mut inputs = cell.tensors();
    inputs.extend((0..3).map(|_| Tensor::uniform(&[2, 4], -1.0, 1.0, &mut rng)));
    let rep = check(
        &inputs,
        |tape, v| {
            let mut h = tape.constant(Tensor::zeros(&[2, 3]));
            let mut c = tape.constant(Tensor::zeros(&[2, 3]));
            for t in 0..3 {
                (h, c) = lstm_step_tape_full(tape, v[6 + t], h, c, v[0], v[1], v[2], [v[3], v[4], v[5]])
                    .map_err(|e| NdError::InvalidArgument(e.to_string()))?;
            }
            let sq = tape.mul(h, h)?;
            Ok(tape.sum(sq))
        },
        100,
        1e-6,
        &mut rng,
    )?;
    println!("{:<24} max rel error {:.2e}", "lstm, 3 steps", rep.max_rel_error);
    Ok(())
}
