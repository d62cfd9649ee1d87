//! Nelder-Mead downhill simplex minimizer.

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// True when the spread of objective values across the simplex fell below
    /// tolerance before the iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when `f_worst - f_best <= ftol * |f_best| + fatol`.
    pub ftol: f64,
    pub fatol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            ftol: 1e-8,
            fatol: 1e-8,
        }
    }
}

/// Minimizes `f` starting from `start`, using `steps[i]` as the initial edge along axis `i`.
/// Non-finite objective values are treated as +inf so the simplex walks away from them.
pub fn minimize<F>(f: F, start: &[f64], steps: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    if n == 0 {
        return SimplexResult {
            params: vec![],
            value: f(&[]),
            iterations: 0,
            converged: true,
        };
    }

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        // order vertices best..worst; index ties keep earlier vertices first
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (best, worst) = (vals[0], vals[n]);
        if best.is_finite() && worst - best <= opts.ftol * best.abs() + opts.fatol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }

        let along = |coef: f64, out: &mut Vec<f64>| {
            for j in 0..n {
                out[j] = centroid[j] + coef * (pts[n][j] - centroid[j]);
            }
        };

        along(-1.0, &mut trial);
        let reflected = trial.clone();
        let fr = eval(&reflected);

        if fr < vals[0] {
            along(-2.0, &mut trial);
            let fe = eval(&trial);
            if fe < fr {
                pts[n] = trial.clone();
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }

        // outside contraction if the reflection improved on the worst point, inside otherwise
        let (coef, bound) = if fr < vals[n] { (-0.5, fr) } else { (0.5, vals[n]) };
        along(coef, &mut trial);
        let fc = eval(&trial);
        if fc < bound {
            pts[n] = trial.clone();
            vals[n] = fc;
            continue;
        }

        let anchor = pts[0].clone();
        for i in 1..=n {
            for j in 0..n {
                pts[i][j] = anchor[j] + 0.5 * (pts[i][j] - anchor[j]);
            }
            vals[i] = eval(&pts[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("simplex has n + 1 vertices");
    SimplexResult {
        params: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}
