//! Central finite-difference gradient checking.

/// Denominator floor, per unit of `max(1, |f(x)|)`. Round-off in a central
/// difference grows with `|f| / h`, so a fixed floor would make the verdict
/// depend on how the loss happens to be scaled.
pub const REL_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel: f64,
    pub floor: f64,
    /// Index, analytic and numeric value of the worst entry.
    pub worst: (usize, f64, f64),
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel <= tol
    }
}

/// Compares `analytic` against `(f(x + h e_i) − f(x − h e_i)) / 2h` for every
/// index of `x`, with the floor scaled by `|f(x)|`.
pub fn check(x: &[f64], analytic: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> GradReport {
    assert_eq!(x.len(), analytic.len(), "gradient length");
    let mut xs = x.to_vec();
    let floor = REL_FLOOR * f(x).abs().max(1.0);
    let mut report = GradReport { checked: 0, max_rel: 0.0, floor, worst: (0, 0.0, 0.0) };
    for i in 0..x.len() {
        xs[i] = x[i] + h;
        let up = f(&xs);
        xs[i] = x[i] - h;
        let down = f(&xs);
        xs[i] = x[i];
        let num = (up - down) / (2.0 * h);
        let e = rel_error(analytic[i], num, floor);
        report.checked += 1;
        if e >= report.max_rel {
            report.max_rel = e;
            report.worst = (i, analytic[i], num);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = [1.0, -2.0, 0.5];
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = check(&x, &g, 1e-5, |x| x.iter().map(|v| v * v).sum());
        assert!(r.passes(1e-8), "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn verdict_does_not_depend_on_loss_scale() {
        let x = [1.0, 1e-7];
        let rel = |c: f64| {
            let g = [2.0 * c, c * (2e-7 + 1e-9)];
            check(&x, &g, 1e-5, |x| c * (x[0] * x[0] + x[1] * x[1])).max_rel
        };
        let (a, b) = (rel(1.0), rel(64.0));
        assert!(a > 1e-5);
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let r = check(&[1.0], &[3.0], 1e-5, |x| x[0] * x[0]);
        assert!(!r.passes(1e-4));
        assert_eq!(r.worst.0, 0);
    }
}

use super::layers::{self, Attention, Block, Conv1d, LayerNorm, Linear};
use super::{segments, ParamLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Checks one layer: `run(params, input, g)` returns the output and, given
/// the output gradient, fills `g` and returns the input gradient. The scalar
/// loss is a fixed random projection of the output.
fn check_layer(
    rng: &mut ChaCha8Rng,
    n_params: usize,
    n_input: usize,
    h: f64,
    run: impl Fn(&[f64], &[f64], Option<(&[f64], &mut [f64])>) -> (Vec<f64>, Vec<f64>),
) -> GradReport {
    let params = gaussian(rng, n_params);
    let input = gaussian(rng, n_input);
    let (y, _) = run(&params, &input, None);
    let proj = gaussian(rng, y.len());
    let mut g = vec![0.0; n_params];
    let (_, dx) = run(&params, &input, Some((&proj, &mut g)));
    let mut x = params.clone();
    x.extend_from_slice(&input);
    let mut analytic = g;
    analytic.extend_from_slice(&dx);
    check(&x, &analytic, h, |x| {
        let (y, _) = run(&x[..n_params], &x[n_params..], None);
        y.iter().zip(&proj).map(|(a, b)| a * b).sum()
    })
}

/// Finite-difference checks of every layer type in isolation, in `f64`.
pub fn layer_suite(seed: u64, h: f64) -> Vec<(&'static str, GradReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut l = ParamLayout::default();
    let lin = Linear::new(&mut l, "lin", 4, 3);
    let rows = 5;
    out.push((
        "linear",
        check_layer(&mut rng, l.total, rows * 4, h, |p, x, bw| {
            let y = lin.forward(p, x, rows);
            let dx = bw.map_or(Vec::new(), |(dy, g)| lin.backward(p, x, dy, rows, g, true));
            (y, dx)
        }),
    ));

    let mut l = ParamLayout::default();
    let conv = Conv1d::new(&mut l, "conv", 3, 4, 3);
    let segs = segments([5, 1, 3]);
    out.push((
        "conv1d",
        check_layer(&mut rng, l.total, 9 * 3, h, |p, x, bw| {
            let (y, cols) = conv.forward(p, x, &segs);
            let dx = bw.map_or(Vec::new(), |(dy, g)| conv.backward(p, &cols, dy, &segs, g));
            (y, dx)
        }),
    ));

    let mut l = ParamLayout::default();
    let ln = LayerNorm::new(&mut l, "ln", 6);
    out.push((
        "layer_norm",
        check_layer(&mut rng, l.total, 4 * 6, h, |p, x, bw| {
            let (y, c) = ln.forward(p, x);
            let dx = bw.map_or(Vec::new(), |(dy, g)| ln.backward(p, &c, dy, g));
            (y, dx)
        }),
    ));

    out.push((
        "gelu",
        check_layer(&mut rng, 0, 12, h, |_, x, bw| {
            (layers::gelu(x), bw.map_or(Vec::new(), |(dy, _)| layers::gelu_backward(x, dy)))
        }),
    ));
    out.push((
        "silu",
        check_layer(&mut rng, 0, 12, h, |_, x, bw| {
            (layers::silu(x), bw.map_or(Vec::new(), |(dy, _)| layers::silu_backward(x, dy)))
        }),
    ));

    let segs = segments([4, 1, 3]);
    out.push((
        "max_pool",
        check_layer(&mut rng, 0, 8 * 3, h, |_, x, bw| {
            let (y, arg) = layers::max_pool(x, &segs, 3);
            (y, bw.map_or(Vec::new(), |(dy, _)| layers::max_pool_backward(&arg, dy, 8, 3)))
        }),
    ));

    let mut l = ParamLayout::default();
    let attn = Attention::new(&mut l, "self", 8, 8, 2);
    let segs = segments([4, 1, 3]);
    out.push((
        "self_attention",
        check_layer(&mut rng, l.total, 8 * 8, h, |p, x, bw| {
            let (y, c) = attn.forward(p, x, &segs, x, &segs);
            let dx = bw.map_or(Vec::new(), |(dy, g)| {
                let (mut a, b) = attn.backward(p, &c, x, &segs, x, &segs, dy, g);
                a.iter_mut().zip(&b).for_each(|(u, v)| *u += v);
                a
            });
            (y, dx)
        }),
    ));

    let mut l = ParamLayout::default();
    let cross = Attention::new(&mut l, "cross", 8, 5, 2);
    let sq = segments([3, 2, 2]);
    let skv = segments([4, 0, 2]);
    let (nq, nk) = (7, 6);
    out.push((
        "cross_attention",
        check_layer(&mut rng, l.total, nq * 8 + nk * 5, h, |p, x, bw| {
            let (xq, xkv) = x.split_at(nq * 8);
            let (y, c) = cross.forward(p, xq, &sq, xkv, &skv);
            let dx = bw.map_or(Vec::new(), |(dy, g)| {
                let (mut a, b) = cross.backward(p, &c, xq, &sq, xkv, &skv, dy, g);
                a.extend(b);
                a
            });
            (y, dx)
        }),
    ));

    let mut l = ParamLayout::default();
    let blk = Block::new(&mut l, "blk", 8, 8, 12, 2);
    let segs = segments([3, 4]);
    out.push((
        "self_block",
        check_layer(&mut rng, l.total, 7 * 8, h, |p, x, bw| {
            let (y, c) = blk.forward(p, x, &segs, None);
            let dx = bw.map_or(Vec::new(), |(dy, g)| blk.backward(p, &c, &segs, None, dy, g).0);
            (y, dx)
        }),
    ));

    let mut l = ParamLayout::default();
    let blk = Block::new(&mut l, "blk", 8, 5, 12, 2);
    let (sq, skv): (Vec<Range<usize>>, _) = (segments([3, 4]), segments([2, 3]));
    out.push((
        "cross_block",
        check_layer(&mut rng, l.total, 7 * 8 + 5 * 5, h, |p, x, bw| {
            let (xq, m) = x.split_at(7 * 8);
            let (y, c) = blk.forward(p, xq, &sq, Some((m, &skv)));
            let dx = bw.map_or(Vec::new(), |(dy, g)| {
                let (mut a, dm) = blk.backward(p, &c, &sq, Some((m, &skv)), dy, g);
                a.extend(dm.unwrap_or_default());
                a
            });
            (y, dx)
        }),
    ));
    out
}

#[cfg(test)]
mod layer_tests {
    use super::*;

    #[test]
    fn every_layer_matches_finite_differences() {
        for (name, r) in layer_suite(11, 1e-5) {
            assert!(r.passes(1e-4), "{name}: {r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn max_pool_ties_go_to_lowest_index() {
        let x = [1.0, 2.0, 1.0, 2.0, 0.0, 2.0];
        let (y, arg) = layers::max_pool(&x, &segments([3]), 2);
        assert_eq!(y, vec![1.0, 2.0]);
        assert_eq!(arg, vec![0, 0]);
        let dx = layers::max_pool_backward(&arg, &[1.0, 1.0], 3, 2);
        assert_eq!(dx, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn attention_rows_are_distributions_and_empty_keys_give_zero() {
        let mut l = ParamLayout::default();
        let a = Attention::new(&mut l, "a", 4, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = gaussian(&mut rng, l.total);
        let xq = gaussian(&mut rng, 5 * 4);
        let xkv = gaussian(&mut rng, 3 * 3);
        let (y, c) = a.forward(&p, &xq, &segments([3, 2]), &xkv, &segments([3, 0]));
        for row in c.probs.chunks(3) {
            assert!(row.iter().all(|v| *v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(y[12..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_key_returns_its_value() {
        let mut l = ParamLayout::default();
        let a = Attention::new(&mut l, "a", 4, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = gaussian(&mut rng, l.total);
        let xq = gaussian(&mut rng, 3 * 4);
        let xkv = gaussian(&mut rng, 3);
        let (_, c) = a.forward(&p, &xq, &segments([3]), &xkv, &segments([1]));
        for r in 0..3 {
            assert_eq!(&c.ctx[r * 4..r * 4 + 4], &c.v[..4]);
        }
    }
}
