//! Weight estimation from observed responses.
//!
//! Each node's incoming weights are recovered independently. Inverting the
//! activation on the observed next-step values turns the one-step dynamics
//! into a linear system `X w = Y` per node, and the weights are estimated by
//! minimizing
//!
//! ```text
//! ‖Xw − Y‖₂  +  β‖w‖₁  −  α·H(w)       subject to  ‖w‖∞ ≤ 1,
//! ```
//!
//! where `H(w) = −Σ_j p_j ln p_j` with `p_j = (w_j + 1)/2`. The least-squares
//! term fits the observed transitions, the L1 term prunes spurious edges, and
//! the entropy term counteracts the shrinkage bias on the surviving edges.
//! The objective is convex over the box, so the per-node problems have no
//! spurious local minima.
//!
//! The solver takes damped Newton steps on a lightly smoothed surrogate
//! (both norms smoothed with `smoothMu`), holding bound-pinned coordinates
//! fixed and backtracking along the projection arc, so iterates are always
//! feasible and every accepted step is a strict improvement.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::fcm::{ResponseSet, WeightMatrix};

/// Hyperparameters and solver knobs for [`learn`].
///
/// `alpha` weighs the entropy bonus, `beta` the L1 penalty; both may be 0 to
/// ablate a term. The remaining fields are numerical guards with defaults
/// that suit data on the scale of activation ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub alpha: f64,
    pub beta: f64,
    pub activation: ActivationSpec,
    /// Clamp margin applied before inverting the activation.
    pub clamp_eps: f64,
    /// Floor for (w+1)/2 inside entropy logs.
    pub entropy_floor: f64,
    /// Smoothing constant for the 2-norm and L1 terms.
    pub smooth_mu: f64,
    pub max_iters: usize,
    /// Stop when the projected-gradient ∞-norm falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease falls below this.
    pub obj_tol: f64,
}

impl LearnConfig {
    pub fn new(alpha: f64, beta: f64, activation: ActivationSpec) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            activation,
            clamp_eps: 1e-6,
            entropy_floor: 1e-12,
            smooth_mu: 1e-8,
            max_iters: 10_000,
            grad_tol: 1e-6,
            obj_tol: 1e-9,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0)
            || !self.alpha.is_finite()
            || !self.beta.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "alpha and beta must be finite and nonnegative, got {} and {}",
                self.alpha, self.beta
            )));
        }
        for (name, v) in [
            ("clampEps", self.clamp_eps),
            ("entropyFloor", self.entropy_floor),
            ("smoothMu", self.smooth_mu),
            ("gradTol", self.grad_tol),
            ("objTol", self.obj_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("maxIters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Linear system for one node: `X` holds the predecessor state rows, `Y` the
/// inverse-activated next-step observations of that node.
#[derive(Debug, Clone)]
pub struct NodeSystem {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub node_index: usize,
}

/// Build the linear system for node `i`. For every sequence, rows `0..k-1`
/// become design rows and the node's column at rows `1..k` — pulled back
/// through the activation inverse — becomes the target. Initial vectors are
/// not paired with anything: only transitions observed inside the sequences
/// enter the system, giving `m(k-1)` equations.
pub fn assemble_system(rs: &ResponseSet, i: usize, cfg: &LearnConfig) -> Result<NodeSystem> {
    if i >= rs.n() {
        return Err(Error::DimensionMismatch(format!(
            "node index {i} out of range (n = {})",
            rs.n()
        )));
    }
    let (m, k, n) = (rs.m(), rs.k(), rs.n());
    let rows = m * (k - 1);
    let mut x = Array2::zeros((rows, n));
    let mut y = Array1::zeros(rows);
    for (s, seq) in rs.sequences().iter().enumerate() {
        for t in 0..k - 1 {
            let row = s * (k - 1) + t;
            x.row_mut(row).assign(&seq.row(t));
            y[row] = cfg.activation.activate_inverse(seq[(t + 1, i)], cfg.clamp_eps);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("inverted observations for node {i}")));
    }
    Ok(NodeSystem { x, y, node_index: i })
}

/// Entropy score `−Σ_j p_j ln(max(p_j, floor))` with `p_j = (w_j + 1)/2`.
/// At `w_j = −1` the summand is exactly 0, matching the `p ln p → 0` limit.
pub fn entropy_surrogate(w: &Array1<f64>, floor: f64) -> f64 {
    -w.iter()
        .map(|&wj| {
            let p = (wj + 1.0) / 2.0;
            p * p.max(floor).ln()
        })
        .sum::<f64>()
}

fn check_dims(w: &Array1<f64>, sys: &NodeSystem) -> Result<()> {
    if w.len() != sys.x.ncols() || sys.y.len() != sys.x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs system {}x{} with {} targets",
            w.len(),
            sys.x.nrows(),
            sys.x.ncols(),
            sys.y.len()
        )));
    }
    Ok(())
}

/// The exact objective `‖Xw − Y‖₂ + β‖w‖₁ − α·H(w)` at a feasible point.
pub fn objective(w: &Array1<f64>, sys: &NodeSystem, cfg: &LearnConfig) -> Result<f64> {
    check_dims(w, sys)?;
    if w.iter().any(|&v| v.abs() > 1.0) {
        return Err(Error::InvalidParameter(
            "objective evaluated outside the unit box".into(),
        ));
    }
    let r = sys.x.dot(w) - &sys.y;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    Ok(r.dot(&r).sqrt() + cfg.beta * l1 - cfg.alpha * entropy_surrogate(w, cfg.entropy_floor))
}

/// The solver's smoothed surrogate: both norms are replaced by
/// `√(‖·‖² + smoothMu²)`-style terms so the objective is differentiable
/// everywhere. Differs from [`objective`] by at most `smoothMu·(1 + β·n)`.
pub fn smoothed_objective(w: &Array1<f64>, sys: &NodeSystem, cfg: &LearnConfig) -> Result<f64> {
    check_dims(w, sys)?;
    let mu2 = cfg.smooth_mu * cfg.smooth_mu;
    let r = sys.x.dot(w) - &sys.y;
    let l1: f64 = w.iter().map(|v| (v * v + mu2).sqrt()).sum();
    Ok((r.dot(&r) + mu2).sqrt() + cfg.beta * l1
        - cfg.alpha * entropy_surrogate(w, cfg.entropy_floor))
}

/// Gradient of [`smoothed_objective`].
pub fn objective_gradient(w: &Array1<f64>, sys: &NodeSystem, cfg: &LearnConfig) -> Result<Array1<f64>> {
    check_dims(w, sys)?;
    let mu2 = cfg.smooth_mu * cfg.smooth_mu;
    let r = sys.x.dot(w) - &sys.y;
    let denom = (r.dot(&r) + mu2).sqrt();
    let mut grad = sys.x.t().dot(&r) / denom;
    for (g, &wj) in grad.iter_mut().zip(w) {
        let p = ((wj + 1.0) / 2.0).max(cfg.entropy_floor);
        *g += cfg.beta * wj / (wj * wj + mu2).sqrt() + cfg.alpha * 0.5 * (p.ln() + 1.0);
    }
    Ok(grad)
}

/// Precomputed `XᵀX`, `XᵀY`, `YᵀY` so each solver iteration costs `O(n²)`
/// instead of `O(Mn)` with `M` rows.
struct Gram {
    xtx: Array2<f64>,
    xty: Array1<f64>,
    yty: f64,
}

impl Gram {
    fn new(sys: &NodeSystem) -> Self {
        Self {
            xtx: sys.x.t().dot(&sys.x),
            xty: sys.x.t().dot(&sys.y),
            yty: sys.y.dot(&sys.y),
        }
    }

    /// Smoothed objective value and gradient at `w`.
    ///
    /// The squared residual normally comes from the expanded quadratic form
    /// `wᵀGw − 2wᵀb + YᵀY`, but that expression cancels catastrophically
    /// near an exact fit — its absolute rounding noise sits at roughly
    /// `ε · (|wᵀGw| + |2wᵀb| + YᵀY)`, which swamps a residual many orders of
    /// magnitude smaller and leaves the line search comparing noise against
    /// noise. Once the quadratic form drops below a conservative multiple of
    /// that noise floor the residual is recomputed as `Xw − Y` directly,
    /// which stays accurate to machine precision relative to its own size.
    fn value_grad(&self, w: &Array1<f64>, sys: &NodeSystem, cfg: &LearnConfig) -> (f64, Array1<f64>) {
        let mu2 = cfg.smooth_mu * cfg.smooth_mu;
        let gw = self.xtx.dot(w);
        let wgw = w.dot(&gw);
        let wb2 = 2.0 * w.dot(&self.xty);
        let cancellation_scale = wgw.abs() + wb2.abs() + self.yty;
        let rr_expanded = wgw - wb2 + self.yty;
        let (rr, xtr) = if rr_expanded < 1e-9 * cancellation_scale.max(1.0) {
            let r = sys.x.dot(w) - &sys.y;
            (r.dot(&r), sys.x.t().dot(&r))
        } else {
            (rr_expanded, &gw - &self.xty)
        };
        let denom = (rr + mu2).sqrt();

        let mut value = denom - cfg.alpha * entropy_surrogate(w, cfg.entropy_floor);
        let mut grad = xtr / denom;
        for (g, &wj) in grad.iter_mut().zip(w) {
            let p = ((wj + 1.0) / 2.0).max(cfg.entropy_floor);
            value += cfg.beta * (wj * wj + mu2).sqrt();
            *g += cfg.beta * wj / (wj * wj + mu2).sqrt() + cfg.alpha * 0.5 * (p.ln() + 1.0);
        }
        (value, grad)
    }
}

fn project(w: &mut Array1<f64>) {
    w.mapv_inplace(|v| v.clamp(-1.0, 1.0));
}

/// Solve `H d = rhs` in place for a symmetric positive-definite `H` via
/// Cholesky. Returns `None` when a pivot collapses, signalling the caller to
/// regularize or fall back to the gradient direction.
fn cholesky_solve(mut h: Array2<f64>, mut rhs: Array1<f64>) -> Option<Array1<f64>> {
    let n = rhs.len();
    for j in 0..n {
        let mut diag = h[(j, j)];
        for k in 0..j {
            diag -= h[(j, k)] * h[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        h[(j, j)] = diag;
        for i in j + 1..n {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= h[(i, k)] * h[(j, k)];
            }
            h[(i, j)] = v / diag;
        }
    }
    for i in 0..n {
        let mut v = rhs[i];
        for k in 0..i {
            v -= h[(i, k)] * rhs[k];
        }
        rhs[i] = v / h[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = rhs[i];
        for k in i + 1..n {
            v -= h[(k, i)] * rhs[k];
        }
        rhs[i] = v / h[(i, i)];
    }
    Some(rhs)
}

/// Minimize the smoothed surrogate over the unit box, starting from `w = 0`
/// (feasible, unbiased, and the L1 term's zero). Returns the iterate and the
/// objective value at every accepted step, first entry being the start.
///
/// Steps are damped Newton steps on the free coordinates — the design
/// matrices this sees are often badly conditioned (trajectories that settle
/// into a fixed point yield nearly collinear rows), where bare gradient
/// methods stall hopelessly far from the minimizer. Coordinates pressed
/// against the box with the gradient pointing outward are held at the bound
/// and move along the plain gradient instead; a backtracking Armijo search
/// over the projection arc keeps every accepted step a strict improvement.
///
/// With an active L1 term the smoothing is tightened in stages: at the
/// target `smoothMu` the penalty has essentially no curvature beyond a
/// `smoothMu`-sized sliver around zero, so Newton steps zigzag across the
/// crease and creep, while a heavier smoothing keeps the zero-crossing
/// quadratic. Each stage warm-starts the next and the last stage minimizes
/// exactly the configured surrogate, so only the path changes, not the
/// answer. Tightening the smoothing lowers the surrogate pointwise, which
/// keeps the concatenated trace monotone across stage boundaries.
fn solve_column_traced(sys: &NodeSystem, cfg: &LearnConfig) -> Result<(Array1<f64>, Vec<f64>)> {
    const ARMIJO_C1: f64 = 1e-4;
    const MIN_STEP: f64 = 1e-20;
    const BOUND_EPS: f64 = 1e-12;
    const CONTINUATION_START: f64 = 1e-4;
    const CONTINUATION_SHRINK: f64 = 1e-2;

    let n = sys.x.ncols();
    let gram = Gram::new(sys);
    let mut w = Array1::zeros(n);

    let mut stage_mus = Vec::new();
    if cfg.beta > 0.0 {
        let mut mu = CONTINUATION_START;
        while mu > cfg.smooth_mu {
            stage_mus.push(mu);
            mu *= CONTINUATION_SHRINK;
        }
    }
    stage_mus.push(cfg.smooth_mu);

    let mut trace = Vec::new();
    let mut iters_used = 0;
    for &stage_mu in &stage_mus {
        let scfg = LearnConfig {
            smooth_mu: stage_mu,
            ..cfg.clone()
        };
        let (mut value, mut grad) = gram.value_grad(&w, sys, &scfg);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "objective at the starting point for node {}",
                sys.node_index
            )));
        }
        if trace.is_empty() {
            trace.push(value);
        }

        while iters_used < cfg.max_iters {
            iters_used += 1;
            // Projected-gradient stationarity: how far a unit gradient step
            // actually moves once the box is enforced.
            let pg_inf = w
                .iter()
                .zip(&grad)
                .map(|(&wj, &gj)| (wj - (wj - gj).clamp(-1.0, 1.0)).abs())
                .fold(0.0f64, f64::max);
            if pg_inf < cfg.grad_tol {
                break;
            }

            let direction = newton_direction(&gram, sys, &w, &grad, &scfg, BOUND_EPS);

            // Backtracking Armijo search along the projection arc, trying
            // the full Newton step first.
            let mut gamma = 1.0;
            let mut backtracked = false;
            let accepted = loop {
                let mut w_new = &w + &(gamma * &direction);
                project(&mut w_new);
                let (value_new, grad_new) = gram.value_grad(&w_new, sys, &scfg);
                let slope = grad.dot(&(&w_new - &w));
                if value_new.is_finite() && slope <= 0.0 && value_new <= value + ARMIJO_C1 * slope
                {
                    break Some((w_new, value_new, grad_new));
                }
                gamma *= 0.5;
                backtracked = true;
                if gamma < MIN_STEP {
                    break None;
                }
            };
            let Some((w_new, value_new, grad_new)) = accepted else {
                // No descent step exists at representable sizes; this stage
                // is as good as its surrogate gets (e.g. a dominant L1 term
                // pinning the solution at the origin).
                break;
            };

            let decrease = value - value_new;
            w = w_new;
            grad = grad_new;
            value = value_new;
            trace.push(value);
            // A zero-slope step can pass the Armijo test without moving the
            // value at all (the iterate is converged to float resolution);
            // without this exit the loop would spin to the iteration cap.
            if decrease <= 0.0 {
                break;
            }
            // Declare a stall only when an unshortened step made no
            // progress; a backtracked step is small by construction, and
            // its tiny decrease says nothing about flatness at the current
            // point.
            if !backtracked && decrease < cfg.obj_tol * value.abs().max(1.0) {
                break;
            }
        }
    }
    Ok((w, trace))
}

/// Newton direction for the smoothed surrogate, with bound-pinned
/// coordinates excluded from the curvature solve.
///
/// The Hessian is assembled from the precomputed Gram matrix:
/// the residual term contributes `(G − qqᵀ/(rr+μ²)) / √(rr+μ²)` with
/// `q = Xᵀr`, the smoothed L1 term `β·μ²/(w²+μ²)^{3/2}` on the diagonal,
/// and the entropy term `α/(4p)` on the diagonal while `p` sits above its
/// floor. Rows and columns of coordinates held at a bound are replaced by
/// identity so a single factorization yields the Newton step on the free
/// set and a plain gradient step on the held set. If the factorization
/// collapses, a ridge is added; failing that the direction degrades to the
/// gradient, so the line search always receives a descent direction.
fn newton_direction(
    gram: &Gram,
    sys: &NodeSystem,
    w: &Array1<f64>,
    grad: &Array1<f64>,
    cfg: &LearnConfig,
    bound_eps: f64,
) -> Array1<f64> {
    let n = w.len();
    let mu2 = cfg.smooth_mu * cfg.smooth_mu;
    let gw = gram.xtx.dot(w);
    let wgw = w.dot(&gw);
    let wb2 = 2.0 * w.dot(&gram.xty);
    let cancellation_scale = wgw.abs() + wb2.abs() + gram.yty;
    let rr_expanded = wgw - wb2 + gram.yty;
    let (rr, q) = if rr_expanded < 1e-9 * cancellation_scale.max(1.0) {
        let r = sys.x.dot(w) - &sys.y;
        (r.dot(&r), sys.x.t().dot(&r))
    } else {
        (rr_expanded, &gw - &gram.xty)
    };
    let denom = (rr + mu2).sqrt();

    // Hold coordinates close to a bound with the gradient pushing outward.
    // "Close" scales with how far a projected gradient step still moves:
    // treating only exactly-pinned coordinates as held makes near-bound
    // coordinates flip in and out of the active set and the iterates zigzag
    // along the faces, while an identification margin this size settles the
    // set in a few steps without ever freezing a coordinate the gradient
    // wants to pull back inside.
    let pg_inf = w
        .iter()
        .zip(grad)
        .map(|(&wj, &gj)| (wj - (wj - gj).clamp(-1.0, 1.0)).abs())
        .fold(0.0f64, f64::max);
    let margin = pg_inf.min(1e-3).max(bound_eps);
    let held: Vec<bool> = w
        .iter()
        .zip(grad)
        .map(|(&wj, &gj)| {
            (wj <= -1.0 + margin && gj > 0.0) || (wj >= 1.0 - margin && gj < 0.0)
        })
        .collect();

    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = (gram.xtx[(i, j)] - q[i] * q[j] / (rr + mu2)) / denom;
        }
    }
    for j in 0..n {
        let wj = w[j];
        let mut diag = cfg.beta * mu2 / (wj * wj + mu2).powf(1.5);
        let p = (wj + 1.0) / 2.0;
        if p > cfg.entropy_floor {
            diag += cfg.alpha / (4.0 * p);
        }
        h[(j, j)] += diag;
    }
    for j in 0..n {
        if held[j] {
            for i in 0..n {
                h[(i, j)] = 0.0;
                h[(j, i)] = 0.0;
            }
            h[(j, j)] = 1.0;
        }
    }

    let trace_avg = (0..n).map(|j| h[(j, j)]).sum::<f64>() / n as f64;
    let mut ridge = 0.0;
    for _ in 0..3 {
        let mut reg = h.clone();
        for j in 0..n {
            reg[(j, j)] += ridge;
        }
        if let Some(d) = cholesky_solve(reg, -grad.clone()) {
            if d.iter().all(|v| v.is_finite()) {
                return clamp_direction(d);
            }
        }
        ridge = (ridge * 10.0).max(1e-10 * trace_avg.max(1.0));
    }
    clamp_direction(-grad.clone())
}

/// Cap a search direction's ∞-norm at a few box widths. A nearly singular
/// Hessian (or a huge gradient) can propose steps many orders of magnitude
/// longer than the feasible box, and the line search then burns dozens of
/// halvings walking them back; positive rescaling preserves the direction
/// and its descent property while keeping the first trial step relevant.
fn clamp_direction(mut d: Array1<f64>) -> Array1<f64> {
    const MAX_STEP_INF: f64 = 4.0;
    let inf = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if inf > MAX_STEP_INF {
        d *= MAX_STEP_INF / inf;
    }
    d
}

/// Estimate one node's incoming weights. See [`solve_column_traced`] for the
/// method; only the final iterate is returned.
pub fn solve_column(sys: &NodeSystem, cfg: &LearnConfig) -> Result<Array1<f64>> {
    Ok(solve_column_traced(sys, cfg)?.0)
}

/// Estimate the full weight matrix: assemble and solve the per-node system
/// for every column. Columns share nothing but read-only views of the data,
/// so they are solved in parallel; results are gathered by column index, and
/// the output is identical to a sequential pass.
pub fn learn(rs: &ResponseSet, cfg: &LearnConfig) -> Result<WeightMatrix> {
    cfg.validate()?;
    let columns: Vec<Array1<f64>> = (0..rs.n())
        .into_par_iter()
        .map(|i| solve_column(&assemble_system(rs, i, cfg)?, cfg))
        .collect::<Result<_>>()?;
    let mut w = WeightMatrix::zeros(rs.n());
    for (i, col) in columns.iter().enumerate() {
        w.set_column(i, col)?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationFamily;
    use crate::datagen::{generate_fcm, generate_initials, generate_responses, RandomFcmSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn base_cfg(alpha: f64, beta: f64, spec: ActivationSpec) -> LearnConfig {
        LearnConfig::new(alpha, beta, spec).unwrap()
    }

    fn sigmoid_cfg(alpha: f64, beta: f64, lambda: f64) -> LearnConfig {
        base_cfg(alpha, beta, ActivationSpec::sigmoid(lambda).unwrap())
    }

    /// Dense least-squares oracle: solve XᵀX w = XᵀY by Gaussian elimination
    /// with partial pivoting, then clamp into the box.
    fn clipped_least_squares(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
        let mut a = x.t().dot(x);
        let mut b = x.t().dot(y);
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    a[(r1, col)].abs().partial_cmp(&a[(r2, col)].abs()).unwrap()
                })
                .unwrap();
            if pivot != col {
                for c in 0..n {
                    let tmp = a[(col, c)];
                    a[(col, c)] = a[(pivot, c)];
                    a[(pivot, c)] = tmp;
                }
                b.swap(col, pivot);
            }
            for row in col + 1..n {
                let f = a[(row, col)] / a[(col, col)];
                for c in col..n {
                    a[(row, c)] -= f * a[(col, c)];
                }
                b[row] -= f * b[col];
            }
        }
        let mut w = Array1::zeros(n);
        for row in (0..n).rev() {
            let mut acc = b[row];
            for c in row + 1..n {
                acc -= a[(row, c)] * w[c];
            }
            w[row] = (acc / a[(row, row)]).clamp(-1.0, 1.0);
        }
        w
    }

    /// Small identifiable benchmark: short sequences from many random starts
    /// keep the design rows diverse instead of collapsing onto a fixed point.
    fn identifiable_data(seed: u64) -> (WeightMatrix, ActivationSpec, ResponseSet) {
        let spec = ActivationSpec::sigmoid(1.0).unwrap();
        let map_spec = RandomFcmSpec {
            n: 8,
            density: 0.4,
            activation: spec,
            seed,
            prune_threshold: 0.05,
        };
        let truth = generate_fcm(&map_spec).unwrap();
        let initials = generate_initials(20, 8, ActivationFamily::Sigmoid, seed ^ 0xabcd).unwrap();
        let rs = generate_responses(&truth, &spec, &initials, 3).unwrap();
        (truth, spec, rs)
    }

    #[test]
    fn assembled_system_has_one_row_per_transition() {
        let spec = ActivationSpec::sigmoid(2.0).unwrap();
        let map_spec = RandomFcmSpec {
            n: 5,
            density: 0.5,
            activation: spec,
            seed: 1,
            prune_threshold: 0.05,
        };
        let w = generate_fcm(&map_spec).unwrap();
        let initials = generate_initials(2, 5, ActivationFamily::Sigmoid, 2).unwrap();
        let rs = generate_responses(&w, &spec, &initials, 10).unwrap();
        let sys = assemble_system(&rs, 0, &sigmoid_cfg(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(sys.x.dim(), (18, 5));
        assert_eq!(sys.y.len(), 18);
        // first block is sequence 0's leading rows
        assert_eq!(sys.x.row(0), rs.sequences()[0].row(0));
        assert_eq!(sys.x.row(9), rs.sequences()[1].row(0));
    }

    #[test]
    fn smallest_legal_system_is_one_equation() {
        let spec = ActivationSpec::sigmoid(1.0).unwrap();
        let cfg = base_cfg(0.0, 0.0, spec);
        let init = crate::fcm::StateVector::from_vec(vec![0.3, 0.8]).unwrap();
        let seq = array![[0.4, 0.6], [0.5, 0.7]];
        let rs = ResponseSet::new(vec![init], vec![seq.clone()]).unwrap();
        let sys = assemble_system(&rs, 1, &cfg).unwrap();
        assert_eq!(sys.x.dim(), (1, 2));
        assert_eq!(sys.x.row(0), seq.row(0));
        assert_abs_diff_eq!(
            sys.y[0],
            spec.activate_inverse(0.7, cfg.clamp_eps),
            epsilon = 0.0
        );
    }

    #[test]
    fn noise_free_system_is_consistent() {
        let (truth, _, rs) = identifiable_data(5);
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        for i in 0..rs.n() {
            let sys = assemble_system(&rs, i, &cfg).unwrap();
            let r = sys.x.dot(&truth.column(i)) - &sys.y;
            let max = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max < 1e-9, "node {i} residual {max}");
        }
    }

    #[test]
    fn objective_of_exact_fit_without_penalties_is_zero() {
        let sys = NodeSystem {
            x: array![[1.0]],
            y: array![0.0],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        assert_eq!(objective(&array![0.0], &sys, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn objective_entropy_term_at_origin_is_minus_ln_two_per_node() {
        let sys = NodeSystem {
            x: array![[0.0, 0.0]],
            y: array![0.0],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(1.0, 0.0, 1.0);
        let value = objective(&array![0.0, 0.0], &sys, &cfg).unwrap();
        // H at the origin is 2 * (1/2) ln 2 = ln 2, subtracted with alpha = 1
        assert_abs_diff_eq!(value, -std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn objective_l1_term_is_beta_times_weight() {
        let sys = NodeSystem {
            x: array![[1.0]],
            y: array![0.5],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(0.0, 1.0, 1.0);
        assert_abs_diff_eq!(
            objective(&array![0.5], &sys, &cfg).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn objective_rejects_points_outside_the_box() {
        let sys = NodeSystem {
            x: array![[1.0]],
            y: array![0.0],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        assert!(objective(&array![1.5], &sys, &cfg).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
        let sys = NodeSystem { x, y, node_index: 0 };
        let cfg = sigmoid_cfg(0.3, 0.2, 1.0);
        let h = 1e-6;
        for _ in 0..100 {
            let w = Array1::from_shape_fn(4, |_| rng.random_range(-0.9..0.9));
            let grad = objective_gradient(&w, &sys, &cfg).unwrap();
            let mut fd = Array1::zeros(4);
            for j in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                fd[j] = (smoothed_objective(&wp, &sys, &cfg).unwrap()
                    - smoothed_objective(&wm, &sys, &cfg).unwrap())
                    / (2.0 * h);
            }
            let diff = (&fd - &grad).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = grad.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            assert!(diff / scale < 1e-5, "fd {fd:?} vs analytic {grad:?}");
        }
    }

    #[test]
    fn gradient_vanishes_at_an_exact_fit_without_penalties() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let w_true = array![0.3, -0.2];
        let y = x.dot(&w_true);
        let sys = NodeSystem { x, y, node_index: 0 };
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        let grad = objective_gradient(&w_true, &sys, &cfg).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-6), "grad {grad:?}");
    }

    #[test]
    fn entropy_gradient_component_at_origin() {
        let sys = NodeSystem {
            x: array![[0.0, 0.0]],
            y: array![0.0],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(1.0, 0.0, 1.0);
        let grad = objective_gradient(&array![0.0, 0.0], &sys, &cfg).unwrap();
        let expected = 0.5 * (0.5f64.ln() + 1.0); // ≈ 0.15343
        for g in &grad {
            assert_abs_diff_eq!(*g, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn gram_path_agrees_with_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((7, 5), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(7, |_| rng.random_range(-1.0..1.0));
        let sys = NodeSystem { x, y, node_index: 0 };
        let cfg = sigmoid_cfg(0.2, 0.3, 1.0);
        let gram = Gram::new(&sys);
        for _ in 0..50 {
            let w = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
            let (value, grad) = gram.value_grad(&w, &sys, &cfg);
            assert_abs_diff_eq!(
                value,
                smoothed_objective(&w, &sys, &cfg).unwrap(),
                epsilon = 1e-10
            );
            let direct = objective_gradient(&w, &sys, &cfg).unwrap();
            for (a, b) in grad.iter().zip(&direct) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn solver_matches_least_squares_on_noise_free_data() {
        let (truth, _, rs) = identifiable_data(11);
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        for i in 0..rs.n() {
            let sys = assemble_system(&rs, i, &cfg).unwrap();
            let solved = solve_column(&sys, &cfg).unwrap();
            let oracle = clipped_least_squares(&sys.x, &sys.y);
            let to_oracle = (&solved - &oracle).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let to_truth = (&solved - &truth.column(i))
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(to_oracle < 1e-4, "node {i}: {to_oracle} from least squares");
            assert!(to_truth < 1e-4, "node {i}: {to_truth} from the generator");
        }
    }

    #[test]
    fn entropy_only_solution_is_two_over_e_minus_one() {
        let sys = NodeSystem {
            x: array![[0.0, 0.0, 0.0]],
            y: array![0.0],
            node_index: 0,
        };
        let cfg = sigmoid_cfg(1.0, 0.0, 1.0);
        let w = solve_column(&sys, &cfg).unwrap();
        let expected = 2.0 / std::f64::consts::E - 1.0; // ≈ -0.26424
        for wj in &w {
            assert_abs_diff_eq!(*wj, expected, epsilon = 1e-5);
        }
    }

    #[test]
    fn huge_l1_weight_pins_the_solution_at_the_origin() {
        let (_, _, rs) = identifiable_data(13);
        let mut cfg = sigmoid_cfg(0.0, 1e3, 1.0);
        let sys = assemble_system(&rs, 2, &cfg).unwrap();
        let w = solve_column(&sys, &cfg).unwrap();
        // The smoothed L1 term is flat within ~smoothMu of the origin, so
        // "zero" means zero at the solver's resolution.
        assert!(
            w.iter().all(|&v| v.abs() <= cfg.smooth_mu),
            "expected zeros at solver resolution, got {w:?}"
        );

        // with the entropy bonus switched on the minimizer shifts, but only
        // imperceptibly against an L1 wall this steep
        cfg.alpha = 1.0;
        let w = solve_column(&sys, &cfg).unwrap();
        assert!(w.iter().all(|&v| v.abs() < 1e-3), "got {w:?}");
    }

    #[test]
    fn learn_recovers_generator_weights_from_noise_free_data() {
        let (truth, _, rs) = identifiable_data(17);
        let cfg = sigmoid_cfg(0.0, 0.0, 1.0);
        let learned = learn(&rs, &cfg).unwrap();
        let diff = (learned.weights() - truth.weights())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-3, "worst-case weight error {diff}");
    }

    #[test]
    fn learn_handles_a_single_node_self_loop() {
        let spec = ActivationSpec::sigmoid(1.0).unwrap();
        let truth = WeightMatrix::new(array![[0.6]]).unwrap();
        let initials = generate_initials(6, 1, ActivationFamily::Sigmoid, 3).unwrap();
        let rs = generate_responses(&truth, &spec, &initials, 3).unwrap();
        let learned = learn(&rs, &base_cfg(0.0, 0.0, spec)).unwrap();
        assert_abs_diff_eq!(learned.get(0, 0), 0.6, epsilon = 1e-4);
    }

    #[test]
    fn learn_is_invariant_to_sequence_order() {
        let (_, spec, rs) = identifiable_data(19);
        let cfg = base_cfg(0.05, 0.02, spec);
        let learned = learn(&rs, &cfg).unwrap();

        let mut idx: Vec<usize> = (0..rs.m()).collect();
        idx.reverse();
        let permuted = ResponseSet::new(
            idx.iter().map(|&s| rs.initials()[s].clone()).collect(),
            idx.iter().map(|&s| rs.sequences()[s].clone()).collect(),
        )
        .unwrap();
        let learned_permuted = learn(&permuted, &cfg).unwrap();

        // The objective is a sum over rows, so the minimizer is unchanged;
        // reordering does permute the float summation order inside XᵀX,
        // which shifts the computed iterates by a few ulps of solver
        // accuracy. The bound asserts the invariance to well below any
        // tolerance the learned weights are consumed at.
        let diff = (learned.weights() - learned_permuted.weights())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-6, "weights moved by {diff} under reordering");
    }

    #[test]
    fn parallel_and_sequential_columns_agree_exactly() {
        let (_, spec, rs) = identifiable_data(23);
        let cfg = base_cfg(0.1, 0.05, spec);
        let parallel = learn(&rs, &cfg).unwrap();
        let mut sequential = WeightMatrix::zeros(rs.n());
        for i in 0..rs.n() {
            let sys = assemble_system(&rs, i, &cfg).unwrap();
            sequential.set_column(i, &solve_column(&sys, &cfg).unwrap()).unwrap();
        }
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn solver_objective_is_monotone_across_accepted_steps() {
        let (_, spec, rs) = identifiable_data(29);
        let noisy = crate::datagen::add_noise(
            &rs,
            &crate::datagen::NoiseSpec { mu: 0.0, sigma: 0.05, seed: 4 },
        )
        .unwrap();
        let cfg = base_cfg(0.1, 0.05, spec);
        let sys = assemble_system(&noisy, 0, &cfg).unwrap();
        let (_, trace) = solve_column_traced(&sys, &cfg).unwrap();
        assert!(trace.len() > 1, "solver accepted no steps");
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0], "objective rose: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn solved_weights_never_leave_the_box() {
        let (_, spec, rs) = identifiable_data(37);
        let noisy = crate::datagen::add_noise(
            &rs,
            &crate::datagen::NoiseSpec { mu: 0.05, sigma: 0.2, seed: 8 },
        )
        .unwrap();
        for (alpha, beta) in [(0.0, 0.0), (0.3, 0.0), (0.0, 0.5), (0.29, 0.49)] {
            let cfg = base_cfg(alpha, beta, spec);
            let learned = learn(&noisy, &cfg).unwrap();
            assert!(learned.weights().iter().all(|&v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn raising_beta_never_adds_thresholded_edges() {
        let (_, spec, rs) = identifiable_data(41);
        let noisy = crate::datagen::add_noise(
            &rs,
            &crate::datagen::NoiseSpec { mu: 0.0, sigma: 0.05, seed: 6 },
        )
        .unwrap();
        let cfg0 = base_cfg(0.05, 0.0, spec);
        let sys = assemble_system(&noisy, 3, &cfg0).unwrap();
        let mut last = usize::MAX;
        for beta in [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
            let cfg = LearnConfig { beta, ..cfg0.clone() };
            let w = solve_column(&sys, &cfg).unwrap();
            let nonzero = w.iter().filter(|v| v.abs() > 0.05).count();
            assert!(
                nonzero <= last,
                "beta {beta} grew the edge count {last} -> {nonzero}"
            );
            last = nonzero;
        }
    }

    #[test]
    fn objective_is_convex_on_sampled_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = Array2::from_shape_fn((8, 5), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(8, |_| rng.random_range(-1.0..1.0));
        let sys = NodeSystem { x, y, node_index: 0 };
        let cfg = sigmoid_cfg(0.3, 0.4, 1.0);
        for _ in 0..1000 {
            let w1 = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
            let w2 = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
            let mid = (&w1 + &w2) / 2.0;
            let f1 = objective(&w1, &sys, &cfg).unwrap();
            let f2 = objective(&w2, &sys, &cfg).unwrap();
            let fm = objective(&mid, &sys, &cfg).unwrap();
            assert!(fm <= (f1 + f2) / 2.0 + 1e-9);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let spec = ActivationSpec::sigmoid(1.0).unwrap();
        assert!(LearnConfig::new(-0.1, 0.0, spec).is_err());
        assert!(LearnConfig::new(0.0, -0.1, spec).is_err());
        assert!(LearnConfig::new(f64::NAN, 0.0, spec).is_err());
        let mut cfg = LearnConfig::new(0.1, 0.1, spec).unwrap();
        cfg.grad_tol = 0.0;
        assert!(cfg.validate().is_err());
        cfg.grad_tol = 1e-6;
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
    }
}
