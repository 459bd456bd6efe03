//! Central finite-difference gradient checking.

use super::{Graph, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Finite-difference step.
    pub h: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Lower bound on the relative-error denominator. Gradients below this
    /// magnitude are compared in absolute terms, scaled by `1 / floor`.
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            h: 1e-5,
            tol: 1e-5,
            floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max elementwise relative error per parameter.
    pub elementwise: Vec<f64>,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, floor)` per parameter.
    pub blockwise: Vec<f64>,
    pub max_rel_error: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_block_error(&self) -> f64 {
        self.blockwise.iter().copied().fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare reverse-mode gradients of the scalar `f(params)` with central
/// differences. `f` must be deterministic; it is rebuilt on a fresh graph
/// for every perturbation.
pub fn grad_check<F>(
    f: F,
    params: &[Tensor],
    cfg: GradCheck,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |ps: &[Tensor]| -> Result<f64, TensorError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.leaf(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.leaf(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut work: Vec<Tensor> = params.to_vec();
    let mut elementwise = Vec::with_capacity(params.len());
    let mut blockwise = Vec::with_capacity(params.len());
    for (pi, (p, &v)) in params.iter().zip(&vars).enumerate() {
        let analytic = grads.get_or_zeros(v, p);
        let mut worst: f64 = 0.0;
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for i in 0..p.len() {
            let orig = p.data()[i];
            work[pi].data_mut()[i] = orig + cfg.h;
            let plus = eval(&work)?;
            work[pi].data_mut()[i] = orig - cfg.h;
            let minus = eval(&work)?;
            work[pi].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.h);
            let a = analytic.data()[i];
            worst = worst.max(relative_error(a, numeric, cfg.floor));
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        elementwise.push(worst);
        blockwise.push(diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(cfg.floor));
    }
    let max_rel_error = elementwise.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_rel_error <= cfg.tol,
        elementwise,
        blockwise,
        max_rel_error,
        tol: cfg.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::uniform(shape, -1.0, 1.0, rng)
    }

    /// Reduce any tensor to a scalar through a fixed random projection so
    /// that every output element influences the loss.
    fn project(g: &mut Graph, x: Var, seed: u64) -> Result<Var, TensorError> {
        let shape = g.value(x).shape().to_vec();
        let (r, c) = (shape[0], shape[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        let w = g.leaf(Tensor::uniform(&[c, 1], -1.0, 1.0, &mut rng));
        let xw = g.matmul(x, w)?;
        let ones = g.leaf(Tensor::uniform(&[1, r], 0.5, 1.5, &mut rng));
        let s = g.matmul(ones, xw)?;
        g.reshape(s, &[])
    }

    fn check(
        seed: u64,
        params: Vec<Tensor>,
        f: impl Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
    ) {
        let report = grad_check(
            |g, v| {
                let y = f(g, v)?;
                project(g, y, seed)
            },
            &params,
            GradCheck::default(),
        )
        .unwrap();
        assert!(
            report.passed,
            "seed {seed}: max rel err {:e} ({:?})",
            report.max_rel_error, report.elementwise
        );
    }

    const SEEDS: u64 = 100;

    #[test]
    fn matmul_add_mul() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(1..4);
            let k = rng.random_range(1..5);
            let n = rng.random_range(1..5);
            let ps = vec![
                rand_t(&[m, k], &mut rng),
                rand_t(&[k, n], &mut rng),
                rand_t(&[n], &mut rng),
                rand_t(&[m, n], &mut rng),
            ];
            check(seed, ps, |g, v| {
                let ab = g.matmul(v[0], v[1])?;
                let b = g.add(ab, v[2])?;
                g.mul(b, v[3])
            });
        }
    }

    #[test]
    fn nonlinearities() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ps = vec![rand_t(&[2, 5], &mut rng), rand_t(&[2, 5], &mut rng)];
            check(seed, ps, |g, v| {
                let t = g.tanh(v[0])?;
                let s = g.sigmoid(v[1])?;
                let ts = g.mul(t, s)?;
                g.softmax(ts)
            });
        }
    }

    #[test]
    fn concat_slice_reshape_rows() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ps = vec![
                rand_t(&[1, 3], &mut rng),
                rand_t(&[1, 4], &mut rng),
                rand_t(&[2, 7], &mut rng),
            ];
            check(seed, ps, |g, v| {
                let c = g.concat(&[v[0], v[1]])?;
                let st = g.concat_rows(&[c, v[2]])?;
                let sl = g.slice_last(st, 2, 4)?;
                let r = g.reshape(sl, &[4, 3])?;
                g.tanh(r)
            });
        }
    }

    #[test]
    fn gather_and_cross_entropy() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = rng.random_range(3..8);
            let ids: Vec<usize> = (0..4).map(|_| rng.random_range(0..v)).collect();
            let targets: Vec<usize> = (0..4).map(|_| rng.random_range(0..v)).collect();
            let mask = [true, true, rng.random_bool(0.5), true];
            let ps = vec![rand_t(&[v, 3], &mut rng), rand_t(&[3, v], &mut rng)];
            let report = grad_check(
                |g, p| {
                    let e = g.embedding_gather(p[0], &ids)?;
                    let logits = g.matmul(e, p[1])?;
                    g.cross_entropy(logits, &targets, &mask)
                },
                &ps,
                GradCheck::default(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {:?}", report.elementwise);
        }
    }

    #[test]
    fn finite_difference_examples_as_pass_fail() {
        let sig = grad_check(
            |g, v| g.sigmoid(v[0]),
            &[Tensor::scalar(0.0)],
            GradCheck::default(),
        )
        .unwrap();
        assert!(sig.passed);
        let prod = grad_check(
            |g, v| g.mul(v[0], v[1]),
            &[Tensor::scalar(2.0), Tensor::scalar(3.0)],
            GradCheck::default(),
        )
        .unwrap();
        assert!(prod.passed);
    }

    #[test]
    fn detects_wrong_gradient() {
        // A function whose "gradient" is wrong: reshape of a constant copy
        // breaks the dependency, so analytic grad is zero but numeric is not.
        let report = grad_check(
            |g, v| {
                let copy = g.leaf(g.value(v[0]).clone());
                g.tanh(copy)
            },
            &[Tensor::scalar(0.3)],
            GradCheck::default(),
        )
        .unwrap();
        assert!(!report.passed);
    }
}
