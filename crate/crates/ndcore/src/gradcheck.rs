//! Central finite-difference checks for anything built on a [`Tape`].
//!
//! The numeric side evaluates only the forward pass.

use rand::Rng;

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Compares directional derivatives along `probes` random directions.
///
/// `build` receives a fresh tape and one leaf per input and must return a
/// scalar node.
pub fn check<F, R>(inputs: &[Tensor], build: F, probes: usize, step: f64, rng: &mut R) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>, &[Var]) -> Result<Var>,
    R: Rng + ?Sized,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic_grads: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, x)| grads.wrt(*v).cloned().unwrap_or_else(|| Tensor::zeros(x.shape())))
        .collect();

    let mut report = GradCheckReport {
        probes,
        max_rel_error: 0.0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for _ in 0..probes {
        let dirs: Vec<Tensor> = inputs
            .iter()
            .map(|x| Tensor::uniform(x.shape(), -1.0, 1.0, rng))
            .collect();
        let analytic: f64 = analytic_grads
            .iter()
            .zip(&dirs)
            .map(|(g, d)| g.dot(d).expect("same shape"))
            .sum();
        let shifted = |sign: f64| -> Vec<Tensor> {
            inputs
                .iter()
                .zip(&dirs)
                .map(|(x, d)| x.zip_map(d, "gradcheck", |a, b| a + sign * step * b).expect("same shape"))
                .collect()
        };
        let numeric = (eval(&shifted(1.0))? - eval(&shifted(-1.0))?) / (2.0 * step);
        let err = relative_error(analytic, numeric);
        if err > report.max_rel_error || report.max_rel_error == 0.0 {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}

/// Per-coordinate central difference of a plain function.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + step;
            let hi = f(&work);
            work[i] = x[i] - step;
            let lo = f(&work);
            work[i] = x[i];
            (hi - lo) / (2.0 * step)
        })
        .collect()
}

fn weighted_sum(tape: &mut Tape<'_>, v: Var, weights: &Tensor) -> Result<Var> {
    let w = tape.mul_const(v, weights.clone())?;
    Ok(tape.sum(w))
}

fn away_from_zero(t: Tensor) -> Tensor {
    t.map(|v| if v.abs() < 0.05 { v + 0.1f64.copysign(v) } else { v })
}

/// Runs [`check`] on every differentiable tape op, each reduced to a scalar
/// through a random weighted sum. Returns `(op name, report)` pairs.
pub fn op_suite<R: Rng + ?Sized>(probes: usize, step: f64, rng: &mut R) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut out = Vec::new();
    let m = |rng: &mut R, r: usize, c: usize| Tensor::uniform(&[r, c], -1.0, 1.0, rng);

    macro_rules! unary {
        ($name:expr, $input:expr, $outshape:expr, |$t:ident, $x:ident| $body:expr) => {{
            let input: Tensor = $input;
            let w = Tensor::uniform(&$outshape, -1.0, 1.0, rng);
            let rep = check(
                &[input],
                |$t, v| {
                    let $x = v[0];
                    let y: Var = $body?;
                    weighted_sum($t, y, &w)
                },
                probes,
                step,
                rng,
            )?;
            out.push(($name, rep));
        }};
    }
    macro_rules! binary {
        ($name:expr, $a:expr, $b:expr, $outshape:expr, |$t:ident, $x:ident, $y:ident| $body:expr) => {{
            let a: Tensor = $a;
            let b: Tensor = $b;
            let w = Tensor::uniform(&$outshape, -1.0, 1.0, rng);
            let rep = check(
                &[a, b],
                |$t, v| {
                    let ($x, $y) = (v[0], v[1]);
                    let z: Var = $body?;
                    weighted_sum($t, z, &w)
                },
                probes,
                step,
                rng,
            )?;
            out.push(($name, rep));
        }};
    }

    binary!("add", m(rng, 3, 4), m(rng, 3, 4), [3, 4], |t, a, b| t.add(a, b));
    binary!("sub", m(rng, 3, 4), m(rng, 3, 4), [3, 4], |t, a, b| t.sub(a, b));
    binary!("mul", m(rng, 3, 4), m(rng, 3, 4), [3, 4], |t, a, b| t.mul(a, b));
    binary!("add_row", m(rng, 3, 4), Tensor::uniform(&[4], -1.0, 1.0, rng), [3, 4], |t, a, b| t.add_row(a, b));
    binary!("mul_row", m(rng, 3, 4), Tensor::uniform(&[4], -1.0, 1.0, rng), [3, 4], |t, a, b| t.mul_row(a, b));
    binary!("matmul", m(rng, 3, 5), m(rng, 5, 2), [3, 2], |t, a, b| t.matmul(a, b));
    let mask = m(rng, 3, 4);
    unary!("mul_const", m(rng, 3, 4), [3, 4], |t, x| t.mul_const(x, mask.clone()));
    unary!("scale", m(rng, 3, 4), [3, 4], |t, x| Ok::<Var, crate::NdError>(t.scale(x, -1.7)));
    unary!("sigmoid", m(rng, 3, 4).scale(3.0), [3, 4], |t, x| Ok::<Var, crate::NdError>(t.sigmoid(x)));
    unary!("tanh", m(rng, 3, 4).scale(2.0), [3, 4], |t, x| Ok::<Var, crate::NdError>(t.tanh(x)));
    unary!("relu", away_from_zero(m(rng, 3, 4)), [3, 4], |t, x| Ok::<Var, crate::NdError>(t.relu(x)));
    unary!("softmax_rows", m(rng, 3, 4).scale(3.0), [3, 4], |t, x| t.softmax(x, 1));
    unary!("softmax_cols", m(rng, 3, 4).scale(3.0), [3, 4], |t, x| t.softmax(x, 0));
    unary!("sum", m(rng, 3, 4), [0usize; 0], |t, x| Ok::<Var, crate::NdError>(t.sum(x)));
    unary!("slice_cols", m(rng, 3, 5), [3, 2], |t, x| t.slice_cols(x, 2, 2));
    unary!("slice_rows", m(rng, 5, 3), [2, 3], |t, x| t.slice_rows(x, 1, 2));
    unary!("select_rows", m(rng, 5, 3), [4, 3], |t, x| t.select_rows(x, vec![4, 0, 4, 2]));
    unary!("unfold", m(rng, 2 * 6, 3), [2 * 4, 9], |t, x| t.unfold(x, 2, 6, 3));
    unary!("max_pool_groups", m(rng, 3 * 4, 5), [3, 5], |t, x| t.max_pool_groups(x, 4).map(|p| p.0));
    binary!("concat_rows", m(rng, 2, 3), m(rng, 4, 3), [6, 3], |t, a, b| t.concat_rows(&[a, b]));
    binary!("concat_cols", m(rng, 3, 2), m(rng, 3, 4), [3, 6], |t, a, b| t.concat_cols(&[a, b]));

    // losses are already scalar
    let target = {
        let mut y = Tensor::zeros(&[4, 5]);
        for r in 0..4 {
            let c = rng.gen_range(0..5);
            y.row_mut(r)[c] = 1.0;
        }
        y
    };
    let rep = check(
        &[m(rng, 4, 5).scale(2.0)],
        |t, v| {
            let p = t.softmax(v[0], 1)?;
            t.cross_entropy(p, target.clone())
        },
        probes,
        step,
        rng,
    )?;
    out.push(("cross_entropy", rep));
    let rep = check(
        &[m(rng, 4, 5).scale(2.0)],
        |t, v| t.softmax_cross_entropy(v[0], target.clone()),
        probes,
        step,
        rng,
    )?;
    out.push(("softmax_cross_entropy", rep));
    Ok(out)
}
