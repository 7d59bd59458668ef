//! Classical regression baselines: the linear family (ordinary least
//! squares, ridge, lasso/elastic net) and a greedy variance-reduction
//! decision tree, plus exhaustive grid search over hyperparameters.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Penalty attached to a fitted linear model, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    Ridge { alpha: f64 },
    Elastic { alpha: f64, l1_ratio: f64 },
}

/// A fitted linear predictor `y = x . coefficients + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub penalty: Penalty,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.coefficients.len() {
            return Err(Error::ShapeMismatch {
                op: "linear_predict",
                left: format!("{} columns", x.cols()),
                right: format!("{} coefficients", self.coefficients.len()),
            });
        }
        Ok((0..x.rows())
            .map(|i| {
                self.intercept
                    + x.row(i)
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(&v, &c)| v * c)
                        .sum::<f64>()
            })
            .collect())
    }
}

/// Solves `G beta = b` for symmetric positive-definite G via Cholesky.
/// A pivot at or below 1e-12 of the largest diagonal entry is treated as a
/// rank deficiency.
#[allow(clippy::needless_range_loop)]
fn cholesky_solve(g: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = g.rows();
    let max_diag = (0..n).map(|i| g.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(1e-300);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s.is_nan() || s <= tol {
                    return Err(Error::Numeric(format!(
                        "normal equations are rank deficient (pivot {s} at column {i})"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut beta = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * beta[k];
        }
        beta[i] = s / l.get(i, i);
    }
    Ok(beta)
}

fn check_linear_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "linear_fit",
            left: format!("{} feature rows", x.rows()),
            right: format!("{} targets", y.len()),
        });
    }
    if x.rows() <= x.cols() {
        return Err(Error::Domain(format!(
            "linear fit needs more rows than features, got {} rows for {} features",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Least squares through the normal equations on an intercept-augmented
/// design matrix, solved by Cholesky factorization.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    let mut m = fit_normal_equations(x, y, 0.0)?;
    m.penalty = Penalty::None;
    Ok(m)
}

/// Ridge regression: adds `alpha` to the diagonal of the non-intercept block
/// of the normal equations (the intercept is never penalized). The penalty
/// applies to raw, unstandardized features.
pub fn ridge_fit(x: &Matrix, y: &[f64], alpha: f64) -> Result<LinearModel> {
    if alpha < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ridge alpha must be nonnegative, got {alpha}"
        )));
    }
    let mut m = fit_normal_equations(x, y, alpha)?;
    m.penalty = Penalty::Ridge { alpha };
    Ok(m)
}

#[allow(clippy::needless_range_loop)]
fn fit_normal_equations(x: &Matrix, y: &[f64], alpha: f64) -> Result<LinearModel> {
    check_linear_inputs(x, y)?;
    let d = x.cols();
    let p = d + 1; // intercept column first
    let a = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x.get(i, j - 1)
        }
    };
    let mut g = Matrix::zeros(p, p);
    let mut b = vec![0.0; p];
    for j in 0..p {
        for k in j..p {
            let mut s = 0.0;
            for i in 0..x.rows() {
                s += a(i, j) * a(i, k);
            }
            g.set(j, k, s);
            g.set(k, j, s);
        }
        let mut s = 0.0;
        for i in 0..x.rows() {
            s += a(i, j) * y[i];
        }
        b[j] = s;
    }
    for j in 1..p {
        g.set(j, j, g.get(j, j) + alpha);
    }
    let beta = cholesky_solve(&g, &b)?;
    Ok(LinearModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        penalty: Penalty::None,
    })
}

/// Outcome of a coordinate-descent fit: the model, how many full cycles ran,
/// and the penalized objective after each cycle (in standardized space).
#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    pub model: LinearModel,
    pub n_iter: usize,
    pub objective_curve: Vec<f64>,
}

/// Elastic-net regression by cyclic coordinate descent with
/// soft-thresholding.
///
/// Features are standardized internally (population standard deviation) and
/// the target centered; returned coefficients are mapped back to the
/// original units. The objective is
/// `1/(2n) * SSE + alpha * (l1_ratio * |beta|_1 + (1 - l1_ratio)/2 * |beta|_2^2)`
/// in standardized space, so alpha grids are comparable across sample sizes.
/// `l1_ratio` = 1 is the lasso; exact zero coefficients require
/// `l1_ratio > 0`. Iteration stops once the largest coefficient change in a
/// full cycle drops below `tol`; exceeding `max_iter` cycles reports
/// non-convergence with the last observed change.
#[allow(clippy::needless_range_loop)]
pub fn lasso_elastic_fit(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ElasticNetFit> {
    check_linear_inputs(x, y)?;
    if alpha < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "elastic alpha must be nonnegative, got {alpha}"
        )));
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidConfig(format!(
            "l1_ratio must be in [0, 1], got {l1_ratio}"
        )));
    }
    let n = x.rows();
    let d = x.cols();
    let nf = n as f64;

    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    let active: Vec<usize> = (0..d).filter(|&j| stds[j] > 0.0).collect();

    // standardized design, centered target
    let xs = |i: usize, j: usize| (x.get(i, j) - means[j]) / stds[j];
    let yc = |i: usize| y[i] - y_mean;

    // Gram quantities: gram[j][k] = (1/n) sum xs_j xs_k over active columns,
    // c[j] = (1/n) sum xs_j yc.
    let m = active.len();
    let mut gram = Matrix::zeros(m, m);
    let mut c = vec![0.0; m];
    for (aj, &j) in active.iter().enumerate() {
        for (ak, &k) in active.iter().enumerate().skip(aj) {
            let mut s = 0.0;
            for i in 0..n {
                s += xs(i, j) * xs(i, k);
            }
            s /= nf;
            gram.set(aj, ak, s);
            gram.set(ak, aj, s);
        }
        let mut s = 0.0;
        for i in 0..n {
            s += xs(i, j) * yc(i);
        }
        c[aj] = s / nf;
    }
    let y_sq = (0..n).map(|i| yc(i) * yc(i)).sum::<f64>() / nf;

    let soft = |v: f64, lambda: f64| -> f64 {
        if v > lambda {
            v - lambda
        } else if v < -lambda {
            v + lambda
        } else {
            0.0
        }
    };

    let lambda1 = alpha * l1_ratio;
    let lambda2 = alpha * (1.0 - l1_ratio);
    let mut beta = vec![0.0; m];
    let mut objective_curve = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut converged_after = None;

    for cycle in 1..=max_iter {
        let mut max_change = 0.0_f64;
        for j in 0..m {
            // partial residual correlation with coordinate j
            let mut rho = c[j];
            for k in 0..m {
                if k != j {
                    rho -= gram.get(j, k) * beta[k];
                }
            }
            let new = soft(rho, lambda1) / (gram.get(j, j) + lambda2);
            max_change = max_change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        // objective = 1/(2n) SSE + penalty, expanded through the Gram matrix
        let mut quad = 0.0;
        let mut lin = 0.0;
        for j in 0..m {
            lin += c[j] * beta[j];
            for k in 0..m {
                quad += beta[j] * gram.get(j, k) * beta[k];
            }
        }
        let sse_over_n = y_sq - 2.0 * lin + quad;
        let l1 = beta.iter().map(|b| b.abs()).sum::<f64>();
        let l2 = beta.iter().map(|b| b * b).sum::<f64>();
        objective_curve.push(0.5 * sse_over_n + lambda1 * l1 + 0.5 * lambda2 * l2);

        last_change = max_change;
        if max_change < tol {
            converged_after = Some(cycle);
            break;
        }
    }
    let n_iter = match converged_after {
        Some(c) => c,
        None => {
            return Err(Error::NonConvergence {
                max_iter,
                last_change,
            })
        }
    };

    let mut coefficients = vec![0.0; d];
    for (aj, &j) in active.iter().enumerate() {
        coefficients[j] = beta[aj] / stds[j];
    }
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(&b, &mu)| b * mu)
            .sum::<f64>();
    Ok(ElasticNetFit {
        model: LinearModel {
            coefficients,
            intercept,
            penalty: Penalty::Elastic { alpha, l1_ratio },
        },
        n_iter,
        objective_curve,
    })
}

/// A regression tree: leaves carry the mean target of their training rows.
/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }
}

/// Greedy variance-reduction regression tree.
///
/// At each node every feature's candidate thresholds (midpoints of
/// consecutive distinct sorted values) are scored by the summed squared
/// error of the two children; the first strictly best candidate in
/// (feature ascending, threshold ascending) order wins, so ties resolve to
/// the lowest feature index and lowest threshold. Recursion stops at
/// `max_depth` (`None` = unbounded), node purity, `min_samples_leaf`, or
/// when no split strictly reduces the error.
pub fn cart_fit(
    x: &Matrix,
    y: &[f64],
    max_depth: Option<usize>,
    min_samples_leaf: usize,
) -> Result<TreeNode> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "cart_fit",
            left: format!("{} feature rows", x.rows()),
            right: format!("{} targets", y.len()),
        });
    }
    if y.is_empty() {
        return Err(Error::Domain("cannot fit a tree on zero rows".into()));
    }
    if min_samples_leaf == 0 {
        return Err(Error::InvalidConfig(
            "min_samples_leaf must be at least 1".into(),
        ));
    }
    let indices: Vec<usize> = (0..y.len()).collect();
    Ok(grow(x, y, &indices, max_depth, min_samples_leaf))
}

/// Two-pass squared error around the group mean, summed in the order given.
/// Called with ascending row indices it is a canonical score: it depends
/// only on which rows form the group, not on how they were found.
fn group_sse(y: &[f64], ids: &[usize]) -> f64 {
    let m = ids.iter().map(|&i| y[i]).sum::<f64>() / ids.len() as f64;
    ids.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum()
}

/// Prefix-sum sweep over one feature's sorted order, reporting each valid
/// candidate (position, threshold, approximate score) to the callback.
/// Targets are centered at the node mean so the running-sum error stays at
/// the scale of the node's residuals instead of its raw values.
fn sweep_feature(
    x: &Matrix,
    y: &[f64],
    feature: usize,
    sorted: &[usize],
    mean: f64,
    min_leaf: usize,
    mut candidate: impl FnMut(usize, f64, f64),
) {
    let n = sorted.len();
    let sum: f64 = sorted.iter().map(|&i| y[i] - mean).sum();
    let total_sq: f64 = sorted.iter().map(|&i| (y[i] - mean) * (y[i] - mean)).sum();
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    for p in 0..n - 1 {
        let v = y[sorted[p]] - mean;
        left_sum += v;
        left_sq += v * v;
        let a = x.get(sorted[p], feature);
        let b = x.get(sorted[p + 1], feature);
        if a == b {
            continue; // not a boundary between distinct values
        }
        let n_left = p + 1;
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let sse_l = (left_sq - left_sum * left_sum / n_left as f64).max(0.0);
        let right_sum = sum - left_sum;
        let right_sq = total_sq - left_sq;
        let sse_r = (right_sq - right_sum * right_sum / n_right as f64).max(0.0);
        candidate(p, 0.5 * (a + b), sse_l + sse_r);
    }
}

fn grow(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    depth_left: Option<usize>,
    min_leaf: usize,
) -> TreeNode {
    let n = idx.len();
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let leaf = || TreeNode::Leaf { value: mean, n };

    if depth_left == Some(0) || n < 2 * min_leaf {
        return leaf();
    }
    let first = y[idx[0]];
    if idx.iter().all(|&i| y[i] == first) {
        return leaf();
    }
    let total_sse = group_sse(y, idx);

    let orders: Vec<Vec<usize>> = (0..x.cols())
        .map(|feature| {
            let mut sorted = idx.to_vec();
            sorted.sort_by(|&a, &b| {
                x.get(a, feature)
                    .partial_cmp(&x.get(b, feature))
                    .expect("finite features")
            });
            sorted
        })
        .collect();

    // first pass: cheap sweep to bracket the best achievable score
    let mut best_sweep = f64::INFINITY;
    for (feature, sorted) in orders.iter().enumerate() {
        sweep_feature(x, y, feature, sorted, mean, min_leaf, |_, _, score| {
            best_sweep = best_sweep.min(score);
        });
    }
    if !best_sweep.is_finite() {
        return leaf(); // no candidate satisfies min_leaf on both sides
    }

    // second pass: re-score every near-best candidate canonically so that
    // candidates producing the same row partition get bitwise-equal scores
    // and ties genuinely resolve to the lowest feature, lowest threshold
    struct BestSplit {
        score: f64,
        feature: usize,
        threshold: f64,
        left: Vec<usize>,
        right: Vec<usize>,
    }
    let tol = 1e-10 * total_sse.max(f64::MIN_POSITIVE);
    let mut best: Option<BestSplit> = None;
    for (feature, sorted) in orders.iter().enumerate() {
        sweep_feature(x, y, feature, sorted, mean, min_leaf, |p, threshold, score| {
            if score > best_sweep + tol {
                return;
            }
            let mut left = sorted[..=p].to_vec();
            let mut right = sorted[p + 1..].to_vec();
            left.sort_unstable();
            right.sort_unstable();
            let canonical = group_sse(y, &left) + group_sse(y, &right);
            if best.as_ref().is_none_or(|b| canonical < b.score) {
                best = Some(BestSplit {
                    score: canonical,
                    feature,
                    threshold,
                    left,
                    right,
                });
            }
        });
    }

    match best {
        Some(b) if b.score < total_sse => {
            let child_depth = depth_left.map(|d| d - 1);
            TreeNode::Split {
                feature: b.feature,
                threshold: b.threshold,
                left: Box::new(grow(x, y, &b.left, child_depth, min_leaf)),
                right: Box::new(grow(x, y, &b.right, child_depth, min_leaf)),
            }
        }
        _ => leaf(),
    }
}

/// Routes every row of `x` through the tree.
pub fn cart_predict(tree: &TreeNode, x: &Matrix) -> Vec<f64> {
    (0..x.rows()).map(|i| tree.predict_row(x.row(i))).collect()
}

/// One evaluated grid cell: the hyperparameters and either a validation loss
/// or the error that prevented fitting.
#[derive(Debug, Clone)]
pub struct GridCell<P> {
    pub params: P,
    pub val_loss: Option<f64>,
    pub error: Option<String>,
}

/// Exhaustive search outcome. `tie` flags that a later cell matched the
/// winning validation loss exactly (the first cell in grid order wins).
#[derive(Debug, Clone)]
pub struct GridSearchResult<P> {
    pub best_index: usize,
    pub best_params: P,
    pub best_val_loss: f64,
    pub tie: bool,
    pub cells: Vec<GridCell<P>>,
}

/// Evaluates every grid point with the supplied closure (fit on train,
/// return validation MSE) and returns the minimum. Cells that fail or
/// produce a non-finite loss are recorded and skipped; only a grid with no
/// usable cell at all is an error.
pub fn grid_search<P: Clone>(
    grid: &[P],
    mut eval: impl FnMut(&P) -> Result<f64>,
) -> Result<GridSearchResult<P>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid search over an empty grid".into()));
    }
    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    let mut tie = false;
    for (i, params) in grid.iter().enumerate() {
        let cell = match eval(params) {
            Ok(loss) if loss.is_finite() => {
                match best {
                    Some((_, b)) if loss == b => tie = true,
                    Some((_, b)) if loss < b => {
                        best = Some((i, loss));
                        tie = false;
                    }
                    None => {
                        best = Some((i, loss));
                    }
                    _ => {}
                }
                GridCell {
                    params: params.clone(),
                    val_loss: Some(loss),
                    error: None,
                }
            }
            Ok(loss) => GridCell {
                params: params.clone(),
                val_loss: None,
                error: Some(format!("non-finite validation loss {loss}")),
            },
            Err(e) => GridCell {
                params: params.clone(),
                val_loss: None,
                error: Some(e.to_string()),
            },
        };
        cells.push(cell);
    }
    match best {
        Some((best_index, best_val_loss)) => Ok(GridSearchResult {
            best_index,
            best_params: grid[best_index].clone(),
            best_val_loss,
            tie,
            cells,
        }),
        None => {
            let first_err = cells
                .iter()
                .find_map(|c| c.error.clone())
                .unwrap_or_default();
            Err(Error::Numeric(format!(
                "every grid cell failed; first error: {first_err}"
            )))
        }
    }
}
