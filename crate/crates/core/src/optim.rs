//! Nelder–Mead simplex minimization with dimension-adaptive coefficients.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the best value is at or below this.
    pub target: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Re-seed the simplex around the best point when its values agree to
    /// this absolute spread.
    pub f_spread: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 10_000,
            target: f64::NEG_INFINITY,
            initial_step: 0.5,
            f_spread: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Counter<'a, F> {
    f: &'a F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counter<'_, F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn build_simplex<F: Fn(&[f64]) -> f64>(
    fc: &mut Counter<'_, F>,
    x0: &[f64],
    f0: f64,
    step: f64,
) -> Vec<(Vec<f64>, f64)> {
    let mut simplex = vec![(x0.to_vec(), f0)];
    for k in 0..x0.len() {
        let mut x = x0.to_vec();
        x[k] += step;
        let fx = fc.call(&x);
        simplex.push((x, fx));
    }
    simplex
}

/// Minimizes `f` from `x0`. The simplex is rebuilt around the incumbent
/// (with a shrinking edge) whenever it collapses, until the budget runs out
/// or `target` is reached.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let n = x0.len();
    let mut fc = Counter { f, evals: 0 };
    let f0 = fc.call(x0);
    if n == 0 || f0 <= opts.target || opts.max_evals <= 1 {
        return NelderMeadResult {
            point: x0.to_vec(),
            value: f0,
            evaluations: fc.evals,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut step = opts.initial_step;
    let mut simplex = build_simplex(&mut fc, x0, f0, step);
    let budget_left = |fc: &Counter<'_, F>| fc.evals + n + 2 <= opts.max_evals;

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        if best <= opts.target || !budget_left(&fc) {
            break;
        }
        if simplex[n].1 - best <= opts.f_spread {
            step *= 0.5;
            if step < 1e-9 {
                step = opts.initial_step * 0.1;
            }
            let x = simplex[0].0.clone();
            simplex = build_simplex(&mut fc, &x, best, step);
            continue;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = fc.call(&xr);
        if fr < simplex[0].1 {
            let xe = along(alpha * beta);
            let fe = fc.call(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fcv) = if fr < simplex[n].1 {
                let xc = along(alpha * gamma);
                let v = fc.call(&xc);
                (xc, v)
            } else {
                let xc = along(-gamma);
                let v = fc.call(&xc);
                (xc, v)
            };
            if fcv < simplex[n].1.min(fr) {
                simplex[n] = (xc, fcv);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + delta * (v - b))
                        .collect();
                    let fx = fc.call(&x);
                    *vertex = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    NelderMeadResult {
        point,
        value,
        evaluations: fc.evals,
    }
}
