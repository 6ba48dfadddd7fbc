//! Dense strictly convex quadratic programming by the dual active-set
//! method of Goldfarb and Idnani.
//!
//! Problem form:
//!
//! ```text
//!     minimize     1/2 x' G x + g' x
//!     subject to   A_i' x  = b_i   (i < meq)
//!                  A_i' x >= b_i   (i >= meq)
//! ```
//!
//! `G` must be symmetric positive definite; it is factorized once and the
//! factor can be reused across solves that share the Hessian. Constraint
//! rows are sparse (index, coefficient) lists and are normalized on intake.

/// Sparse constraint row: `sum coeff * x >= rhs` (or `=` for equalities).
#[derive(Debug, Clone)]
pub struct QpRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl QpRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|&(_, c)| c * c).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    /// The constraints admit no solution.
    Infeasible,
    /// G is not positive definite.
    NotPositiveDefinite,
    /// Iteration limit hit; numerical trouble.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices of rows active at the solution.
    pub active: Vec<usize>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cholesky factorization in place: A = L L', lower triangle of `a` becomes L.
fn cholesky(a: &mut [f64], n: usize) -> Result<(), QpError> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(QpError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Cholesky factor of the Hessian, reusable across solves.
#[derive(Debug, Clone)]
pub struct QpFactor {
    n: usize,
    g: Vec<f64>,
    l: Vec<f64>,
}

impl QpFactor {
    pub fn new(g: &[f64], n: usize) -> Result<Self, QpError> {
        let mut l = g.to_vec();
        cholesky(&mut l, n)?;
        for i in 0..n {
            for j in i + 1..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, g: g.to_vec(), l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_g(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        forward_solve(&self.l, self.n, &mut x);
        backward_solve(&self.l, self.n, &mut x);
        x
    }

    /// Whitened row normal: L^{-1} (sparse row as dense vector).
    pub fn whiten_row(&self, row: &QpRow) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &(idx, c) in &row.terms {
            v[idx] += c;
        }
        forward_solve(&self.l, self.n, &mut v);
        v
    }

    pub fn objective(&self, lin: &[f64], x: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.g[i * n + j] * x[j];
            }
            quad += x[i] * s;
        }
        0.5 * quad + dot(lin, x)
    }
}

/// Per-row whitened-normal cache. Entries are filled lazily; the cache is
/// only valid for the factor it was built against.
pub type WhitenCache = Vec<Option<Vec<f64>>>;

fn iteration_cap(n: usize, m: usize) -> usize {
    400 + 20 * (n + m)
}

/// Solve the QP. The first `meq` rows are equalities. `cache` must be as
/// long as `rows` and is filled lazily with whitened normals.
pub fn solve_qp(
    factor: &QpFactor,
    lin: &[f64],
    rows: &[QpRow],
    meq: usize,
    cache: &mut WhitenCache,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = factor.n;
    let m = rows.len();
    debug_assert_eq!(lin.len(), n);
    debug_assert_eq!(cache.len(), m);

    let mut x = factor.solve_g(lin);
    for xi in x.iter_mut() {
        *xi = -*xi;
    }

    let norms: Vec<f64> = rows.iter().map(|r| r.norm().max(1e-12)).collect();

    // Active set state: row indices, sign of entry (equalities may enter
    // flipped), multipliers, whitened normals (scaled by sign / norm), and
    // the Gram matrix of active whitened normals.
    let mut active: Vec<usize> = Vec::new();
    let mut lagrange: Vec<f64> = Vec::new();
    let mut wnormals: Vec<Vec<f64>> = Vec::new();
    let mut gram: Vec<f64> = Vec::new();

    let cap = iteration_cap(n, m);
    let mut iterations = 0usize;

    'outer: loop {
        iterations += 1;
        if iterations > cap {
            return Err(QpError::IterationLimit);
        }

        // Most violated constraint, scaled by row norm.
        let mut pick: Option<(usize, f64)> = None;
        let mut severity = tol;
        for (i, row) in rows.iter().enumerate() {
            if active.contains(&i) {
                continue;
            }
            let slack = (row.eval(&x) - row.rhs) / norms[i];
            let (viol, dir) = if i < meq { (slack.abs(), -slack.signum()) } else { (-slack, 1.0) };
            if viol > severity {
                severity = viol;
                pick = Some((i, dir));
            }
        }
        let Some((p, direction)) = pick else {
            let objective = factor.objective(lin, &x);
            return Ok(QpSolution { x, objective, active, iterations });
        };

        if cache[p].is_none() {
            cache[p] = Some(factor.whiten_row(&rows[p]));
        }
        // Whitened entering normal, normalized and sign-adjusted.
        let w_plus: Vec<f64> = cache[p]
            .as_ref()
            .unwrap()
            .iter()
            .map(|v| direction * v / norms[p])
            .collect();
        let rhs_p = direction * rows[p].rhs / norms[p];

        let mut u_plus = 0.0f64;
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(QpError::IterationLimit);
            }

            let k = active.len();
            // Dual direction r = (W'W)^{-1} W' w+.
            let mut r = vec![0.0; k];
            if k > 0 {
                for (q, wq) in wnormals.iter().enumerate() {
                    r[q] = dot(wq, &w_plus);
                }
                let mut gram_copy = gram.clone();
                solve_dense(&mut gram_copy, &mut r, k);
            }
            // Primal direction z = L^{-T}(w+ - W r).
            let mut zhat = w_plus.clone();
            for (q, wq) in wnormals.iter().enumerate() {
                axpy(-r[q], wq, &mut zhat);
            }
            let ztn = dot(&zhat, &w_plus);
            let mut z = zhat;
            backward_solve(&factor.l, n, &mut z);

            // Step to reach the entering constraint along z.
            let slack = direction * rows[p].eval(&x) / norms[p] - rhs_p;
            let t2 = if ztn > 1e-13 { -slack / ztn } else { f64::INFINITY };

            // Step at which an active inequality multiplier hits zero.
            let mut t1 = f64::INFINITY;
            let mut drop_idx: Option<usize> = None;
            for q in 0..k {
                if active[q] < meq {
                    continue;
                }
                if r[q] > 1e-11 {
                    let ratio = lagrange[q] / r[q];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_idx = Some(q);
                    }
                }
            }

            if !t1.is_finite() && !t2.is_finite() {
                return Err(QpError::Infeasible);
            }

            let step = t1.min(t2);
            if step.is_finite() {
                axpy(step, &z, &mut x);
                for (q, u) in lagrange.iter_mut().enumerate() {
                    *u -= step * r[q];
                }
                u_plus += step;
            }

            if t2 <= t1 {
                // Entering constraint reaches equality: add to the active
                // set and refresh the Gram matrix.
                let k_new = k + 1;
                let mut new_gram = vec![0.0; k_new * k_new];
                for a in 0..k {
                    for b in 0..k {
                        new_gram[a * k_new + b] = gram[a * k + b];
                    }
                }
                for a in 0..k {
                    let g_ap = dot(&wnormals[a], &w_plus);
                    new_gram[a * k_new + k] = g_ap;
                    new_gram[k * k_new + a] = g_ap;
                }
                new_gram[k * k_new + k] = dot(&w_plus, &w_plus);
                gram = new_gram;
                wnormals.push(w_plus.clone());
                active.push(p);
                lagrange.push(u_plus);
                continue 'outer;
            }

            // Partial step: drop the blocking constraint and retry.
            let q = drop_idx.expect("partial step requires a blocking row");
            active.remove(q);
            lagrange.remove(q);
            wnormals.remove(q);
            let k_new = k - 1;
            let mut new_gram = vec![0.0; k_new * k_new];
            let mut ai = 0;
            for a in 0..k {
                if a == q {
                    continue;
                }
                let mut bi = 0;
                for b in 0..k {
                    if b == q {
                        continue;
                    }
                    new_gram[ai * k_new + bi] = gram[a * k + b];
                    bi += 1;
                }
                ai += 1;
            }
            gram = new_gram;
        }
    }
}

/// Gaussian elimination with partial pivoting; the solution lands in rhs.
/// Near-singular pivots zero the corresponding component, which in the
/// dual-step context means the direction ignores a degenerate normal.
fn solve_dense(a: &mut [f64], rhs: &mut [f64], k: usize) {
    for col in 0..k {
        let mut pivot = col;
        for r in col + 1..k {
            if a[r * k + col].abs() > a[pivot * k + col].abs() {
                pivot = r;
            }
        }
        if pivot != col {
            for c in 0..k {
                a.swap(col * k + c, pivot * k + c);
            }
            rhs.swap(col, pivot);
        }
        let d = a[col * k + col];
        if d.abs() < 1e-13 {
            continue;
        }
        for r in col + 1..k {
            let f = a[r * k + col] / d;
            if f != 0.0 {
                for c in col..k {
                    a[r * k + c] -= f * a[col * k + c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    for col in (0..k).rev() {
        let d = a[col * k + col];
        if d.abs() < 1e-13 {
            rhs[col] = 0.0;
            continue;
        }
        let mut s = rhs[col];
        for c in col + 1..k {
            s -= a[col * k + c] * rhs[c];
        }
        rhs[col] = s / d;
    }
}
