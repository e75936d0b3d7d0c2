//! Minimization of `q' G q - 2 b' q` over the probability simplex for small
//! dimensions.
//!
//! `M <= 2` is solved in closed form. Larger problems run projected gradient
//! with Armijo backtracking from the given start, then every support set is
//! tried with its equality-constrained KKT system and the best feasible point
//! is kept.

/// Supports are enumerated exhaustively up to this dimension.
const MAX_ENUMERATED: usize = 12;
const ARMIJO: f64 = 1e-4;

pub fn objective(gram: &[Vec<f64>], linear: &[f64], q: &[f64]) -> f64 {
    let mut v = 0.0;
    for (i, row) in gram.iter().enumerate() {
        let gq: f64 = row.iter().zip(q).map(|(g, x)| g * x).sum();
        v += q[i] * gq - 2.0 * linear[i] * q[i];
    }
    v
}

fn gradient(gram: &[Vec<f64>], linear: &[f64], q: &[f64]) -> Vec<f64> {
    gram.iter()
        .zip(linear)
        .map(|(row, b)| 2.0 * row.iter().zip(q).map(|(g, x)| g * x).sum::<f64>() - 2.0 * b)
        .collect()
}

/// Euclidean projection onto `{q >= 0, sum q = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

fn solve_two(gram: &[Vec<f64>], linear: &[f64]) -> Vec<f64> {
    // q = (t, 1 - t)
    let curvature = gram[0][0] - 2.0 * gram[0][1] + gram[1][1];
    let slope_at_zero = 2.0 * (gram[0][1] - gram[1][1]) - 2.0 * (linear[0] - linear[1]);
    let scale = gram[0][0].abs() + gram[1][1].abs() + linear[0].abs() + linear[1].abs();
    let eps = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let t = if curvature > eps {
        (-slope_at_zero / (2.0 * curvature)).clamp(0.0, 1.0)
    } else {
        // linear along the edge: compare endpoints, split evenly on a tie
        let value_at_one = curvature + slope_at_zero;
        if value_at_one.abs() <= eps {
            0.5
        } else if value_at_one < 0.0 {
            1.0
        } else {
            0.0
        }
    };
    vec![t, 1.0 - t]
}

/// Solves `[2 G_SS 1; 1' 0] [q; mu] = [2 b_S; 1]` by Gaussian elimination
/// with partial pivoting. `None` when the system is singular.
fn kkt_on_support(gram: &[Vec<f64>], linear: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let dim = k + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    let mut scale: f64 = 0.0;
    for (r, &i) in support.iter().enumerate() {
        for (c, &l) in support.iter().enumerate() {
            a[r][c] = 2.0 * gram[i][l];
            scale = scale.max(a[r][c].abs());
        }
        a[r][k] = 1.0;
        a[r][dim] = 2.0 * linear[i];
    }
    a[k][..k].fill(1.0);
    a[k][dim] = 1.0;
    let tiny = 1e-13 * scale.max(1.0);
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..dim {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    #[allow(clippy::needless_range_loop)]
                    for c in col..=dim {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let mut q = vec![0.0; gram.len()];
    for (r, &i) in support.iter().enumerate() {
        q[i] = a[r][dim] / a[r][r];
    }
    Some(q)
}

fn projected_gradient(gram: &[Vec<f64>], linear: &[f64], start: &[f64], iters: usize) -> Vec<f64> {
    let lipschitz = gram
        .iter()
        .map(|row| 2.0 * row.iter().map(|g| g.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut q = project_to_simplex(start);
    let mut f = objective(gram, linear, &q);
    let mut step = 1.0 / lipschitz;
    let max_step = 1e6 / lipschitz;
    for _ in 0..iters {
        let g = gradient(gram, linear, &q);
        // the projection ignores shifts along the all-ones direction
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let d: Vec<f64> = g.iter().map(|x| x - mean).collect();
        let mut t = (step * 4.0).min(max_step);
        let mut moved = false;
        for _ in 0..60 {
            let cand = project_to_simplex(
                &q.iter().zip(&d).map(|(x, d)| x - t * d).collect::<Vec<_>>(),
            );
            let decrease: f64 = g.iter().zip(&cand).zip(&q).map(|((d, c), x)| d * (c - x)).sum();
            let fc = objective(gram, linear, &cand);
            if fc <= f + ARMIJO * decrease {
                moved = cand != q;
                q = cand;
                f = fc;
                step = t;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    q
}

/// Minimizer of `q' G q - 2 b' q` over the simplex, started from `start`.
pub fn minimize_on_simplex(gram: &[Vec<f64>], linear: &[f64], start: &[f64]) -> Vec<f64> {
    let m = linear.len();
    match m {
        0 => return vec![],
        1 => return vec![1.0],
        2 => return solve_two(gram, linear),
        _ => {}
    }
    let mut best = projected_gradient(gram, linear, start, 10 * m * m);
    let mut best_f = objective(gram, linear, &best);
    if m <= MAX_ENUMERATED {
        let margin = 1e-12 * best_f.abs().max(1e-300);
        for mask in 1usize..(1 << m) {
            let support: Vec<usize> = (0..m).filter(|i| (mask >> i) & 1 == 1).collect();
            let Some(q) = kkt_on_support(gram, linear, &support) else {
                continue;
            };
            if q.iter().any(|&x| x < -1e-12) {
                continue;
            }
            let q = project_to_simplex(&q);
            let fq = objective(gram, linear, &q);
            if fq < best_f - margin {
                best = q;
                best_f = fq;
            }
        }
    }
    best
}
