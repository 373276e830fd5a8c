//! Compact Nelder-Mead simplex minimizer for low-dimensional, cheap
//! objectives (here: two-parameter log-likelihood surfaces).

/// Outcome of a simplex search.
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`, stepping `step` in each coordinate to build the
/// initial simplex. Stops when the simplex function spread falls below
/// `ftol` and its diameter below `xtol`, or after `max_evals` evaluations.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    ftol: f64,
    xtol: f64,
    max_evals: usize,
) -> NmResult {
    let n = x0.len();
    assert!(n >= 1, "dimension must be >= 1");
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= ftol && diameter <= xtol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n].0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = eval(&reflect, &mut evals);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let f_expand = eval(&expand, &mut evals);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = if f_reflect < simplex[n].1 {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + rho * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + rho * (w - c))
                    .collect()
            };
            let f_contract = eval(&contract, &mut evals);
            if f_contract < simplex[n].1.min(f_reflect) {
                simplex[n] = (contract, f_contract);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best_x
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + sigma * (v - b))
                        .collect();
                    let fx = eval(&x, &mut evals);
                    *vertex = (x, fx);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    NmResult {
        x: simplex[0].0.clone(),
        fx: simplex[0].1,
        evaluations: evals,
        converged,
    }
}
