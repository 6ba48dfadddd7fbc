//! Linear constraint sets over named binary and continuous variables, plus
//! the bound-propagation / enumeration machinery shared by the optimizer
//! presolve and the encoding-exactness checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Identity of a decision variable. Vehicle, lane, cell and step indices are
/// all zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKey {
    /// Lane membership of vehicle j in lane l.
    Gamma { j: usize, l: usize, t: usize },
    /// Vehicle jp is downstream of vehicle j in lane l.
    Rho { j: usize, jp: usize, l: usize, t: usize },
    /// Vehicle j immediately follows vehicle jp in lane l.
    Eta { j: usize, jp: usize, l: usize, t: usize },
    /// Some vehicle k lies between j and jp in lane l.
    Xi { j: usize, jp: usize, k: usize, l: usize, t: usize },
    /// No vehicle lies between j and jp in lane l.
    Delta { j: usize, jp: usize, l: usize, t: usize },
    /// Vehicle j occupies cell c of lane l.
    Phi { j: usize, l: usize, c: usize, t: usize },
    /// Position / speed of vehicle j (standalone encodings only).
    PosX { j: usize, t: usize },
    PosY { j: usize, t: usize },
    /// Subject control inputs.
    Ux { i: usize, t: usize },
    Uy { i: usize, t: usize },
    /// Clamp selector binaries for embedded car-following predictions.
    ClampLo { j: usize, t: usize },
    ClampHi { j: usize, t: usize },
    /// Predicted neighbor speed / position when embedded as variables.
    PredV { j: usize, t: usize },
    PredX { j: usize, t: usize },
    /// Leader-selection binary for embedded spacing minima.
    Pick { j: usize, cand: usize, t: usize },
    /// Embedded spacing variable.
    Spacing { j: usize, t: usize },
    /// Entering flow into cell c of lane l, normalized by capacity.
    FlowIn { l: usize, c: usize, t: usize },
}

impl std::fmt::Display for VarKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            VarKey::Gamma { j, l, t } => write!(f, "gam[j{j},l{l},t{t}]"),
            VarKey::Rho { j, jp, l, t } => write!(f, "rho[j{j},j{jp},l{l},t{t}]"),
            VarKey::Eta { j, jp, l, t } => write!(f, "eta[j{j},j{jp},l{l},t{t}]"),
            VarKey::Xi { j, jp, k, l, t } => write!(f, "xi[j{j},j{jp},k{k},l{l},t{t}]"),
            VarKey::Delta { j, jp, l, t } => write!(f, "dlt[j{j},j{jp},l{l},t{t}]"),
            VarKey::Phi { j, l, c, t } => write!(f, "phi[j{j},l{l},c{c},t{t}]"),
            VarKey::PosX { j, t } => write!(f, "x[j{j},t{t}]"),
            VarKey::PosY { j, t } => write!(f, "y[j{j},t{t}]"),
            VarKey::Ux { i, t } => write!(f, "ux[i{i},t{t}]"),
            VarKey::Uy { i, t } => write!(f, "uy[i{i},t{t}]"),
            VarKey::ClampLo { j, t } => write!(f, "clo[j{j},t{t}]"),
            VarKey::ClampHi { j, t } => write!(f, "chi[j{j},t{t}]"),
            VarKey::PredV { j, t } => write!(f, "pv[j{j},t{t}]"),
            VarKey::PredX { j, t } => write!(f, "px[j{j},t{t}]"),
            VarKey::Pick { j, cand, t } => write!(f, "pick[j{j},c{cand},t{t}]"),
            VarKey::Spacing { j, t } => write!(f, "s[j{j},t{t}]"),
            VarKey::FlowIn { l, c, t } => write!(f, "yin[l{l},c{c},t{t}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub key: VarKey,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "="),
        }
    }
}

/// Affine expression over declared variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn scaled_var(v: usize, c: f64) -> Self {
        Self { terms: vec![(v, c)], constant: 0.0 }
    }

    pub fn push(&mut self, v: usize, c: f64) {
        if c != 0.0 {
            self.terms.push((v, c));
        }
    }

    pub fn add(&mut self, other: &LinExpr, scale: f64) {
        self.constant += scale * other.constant;
        for &(v, c) in &other.terms {
            self.push(v, scale * c);
        }
    }

    /// Merge duplicate variable entries.
    pub fn normalized(mut self) -> Self {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>()
    }
}

/// One affine row: `expr (sense) rhs`. The expression constant is folded
/// into the right-hand side at insertion.
#[derive(Debug, Clone)]
pub struct LinRow {
    pub name: String,
    /// Row family tag, used by the structural census tests.
    pub family: &'static str,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinRow {
    pub fn eval_lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.eval_lhs(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A set of affine rows over declared variables.
#[derive(Debug, Clone, Default)]
pub struct LinearConstraintSet {
    pub vars: Vec<VarInfo>,
    pub rows: Vec<LinRow>,
    pub big_m: f64,
    index: BTreeMap<VarKey, usize>,
}

impl LinearConstraintSet {
    pub fn new(big_m: f64) -> Self {
        Self { big_m, ..Default::default() }
    }

    pub fn add_var(&mut self, key: VarKey, kind: VarKind, lb: f64, ub: f64) -> usize {
        debug_assert!(!self.index.contains_key(&key), "duplicate variable {key}");
        let id = self.vars.len();
        self.vars.push(VarInfo { key, kind, lb, ub });
        self.index.insert(key, id);
        id
    }

    pub fn add_binary(&mut self, key: VarKey) -> usize {
        self.add_var(key, VarKind::Binary, 0.0, 1.0)
    }

    pub fn lookup(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn var(&self, key: VarKey) -> usize {
        self.lookup(key).unwrap_or_else(|| panic!("unknown variable {key}"))
    }

    /// Add `expr (sense) rhs`; the expression constant folds into the rhs.
    pub fn add_row(&mut self, name: String, family: &'static str, expr: LinExpr, sense: Sense, rhs: f64) {
        let expr = expr.normalized();
        self.rows.push(LinRow { name, family, terms: expr.terms, sense, rhs: rhs - expr.constant });
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn family_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.family).or_insert(0) += 1;
        }
        counts
    }

    /// Largest row violation at a full assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max)
    }

    /// Plain-text dump: variables with bounds, then one row per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ vars: {}  rows: {}  bigM: {}", self.vars.len(), self.rows.len(), self.big_m);
        for v in &self.vars {
            let kind = match v.kind {
                VarKind::Binary => "bin",
                VarKind::Continuous => "cont",
            };
            let _ = writeln!(out, "var {} {} [{}, {}]", v.key, kind, v.lb, v.ub);
        }
        for row in &self.rows {
            let mut lhs = String::new();
            for (i, &(v, c)) in row.terms.iter().enumerate() {
                if i == 0 {
                    let _ = write!(lhs, "{:+} {}", c, self.vars[v].key);
                } else {
                    let _ = write!(lhs, " {:+} {}", c, self.vars[v].key);
                }
            }
            let _ = writeln!(out, "{}: {} {} {}", row.name, lhs, row.sense, row.rhs);
        }
        out
    }
}

/// Result of a propagation pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagateOutcome {
    Consistent,
    Infeasible,
}

/// Partial assignment used for bound propagation and exhaustive enumeration
/// of the binary variables.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// Fixed values; `None` means free.
    pub values: Vec<Option<f64>>,
}

impl Assignment {
    pub fn free(set: &LinearConstraintSet) -> Self {
        Self { values: vec![None; set.vars.len()] }
    }

    pub fn fix(&mut self, var: usize, value: f64) {
        self.values[var] = Some(value);
    }

    fn var_range(&self, set: &LinearConstraintSet, var: usize) -> (f64, f64) {
        match self.values[var] {
            Some(v) => (v, v),
            None => (set.vars[var].lb, set.vars[var].ub),
        }
    }

    /// Interval of a row's left-hand side under the current assignment.
    fn row_range(&self, set: &LinearConstraintSet, row: &LinRow) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for &(v, c) in &row.terms {
            let (vlo, vhi) = self.var_range(set, v);
            if c >= 0.0 {
                lo += c * vlo;
                hi += c * vhi;
            } else {
                lo += c * vhi;
                hi += c * vlo;
            }
        }
        (lo, hi)
    }

    /// Propagate all rows to a fixpoint, forcing binaries whose alternative
    /// value cannot satisfy some row. Continuous variables are never forced,
    /// only checked against their interval.
    pub fn propagate(&mut self, set: &LinearConstraintSet, tol: f64) -> PropagateOutcome {
        loop {
            let mut changed = false;
            for row in &set.rows {
                let (lo, hi) = self.row_range(set, row);
                let le_ok = lo <= row.rhs + tol;
                let ge_ok = hi >= row.rhs - tol;
                match row.sense {
                    Sense::Le if !le_ok => return PropagateOutcome::Infeasible,
                    Sense::Ge if !ge_ok => return PropagateOutcome::Infeasible,
                    Sense::Eq if !(le_ok && ge_ok) => return PropagateOutcome::Infeasible,
                    _ => {}
                }
                // Try to force unfixed binaries appearing in this row.
                for &(v, c) in &row.terms {
                    if self.values[v].is_some() || set.vars[v].kind != VarKind::Binary || c == 0.0 {
                        continue;
                    }
                    // Row interval excluding this variable's span.
                    let (vlo, vhi) = (0.0, 1.0);
                    let (lo_wo, hi_wo) = if c >= 0.0 {
                        (lo - c * vlo, hi - c * vhi)
                    } else {
                        (lo - c * vhi, hi - c * vlo)
                    };
                    let fits = |val: f64| -> bool {
                        let lo_v = lo_wo + c * val;
                        let hi_v = hi_wo + c * val;
                        match row.sense {
                            Sense::Le => lo_v <= row.rhs + tol,
                            Sense::Ge => hi_v >= row.rhs - tol,
                            Sense::Eq => lo_v <= row.rhs + tol && hi_v >= row.rhs - tol,
                        }
                    };
                    let zero_ok = fits(0.0);
                    let one_ok = fits(1.0);
                    match (zero_ok, one_ok) {
                        (false, false) => return PropagateOutcome::Infeasible,
                        (true, false) => {
                            self.values[v] = Some(0.0);
                            changed = true;
                        }
                        (false, true) => {
                            self.values[v] = Some(1.0);
                            changed = true;
                        }
                        (true, true) => {}
                    }
                }
            }
            if !changed {
                return PropagateOutcome::Consistent;
            }
        }
    }

    pub fn first_free_binary(&self, set: &LinearConstraintSet) -> Option<usize> {
        (0..set.vars.len())
            .find(|&v| self.values[v].is_none() && set.vars[v].kind == VarKind::Binary)
    }
}

/// Exhaustively enumerate 0/1 completions of `seed` (continuous variables
/// must already be fixed), stopping once more than `limit` solutions are
/// found. Returns the solutions found (up to the limit plus one).
pub fn enumerate_binary_solutions(
    set: &LinearConstraintSet,
    seed: &Assignment,
    tol: f64,
    limit: usize,
) -> Vec<Vec<f64>> {
    for (v, info) in set.vars.iter().enumerate() {
        if info.kind == VarKind::Continuous && seed.values[v].is_none() {
            panic!("continuous variable {} must be fixed before enumeration", info.key);
        }
    }
    let mut solutions = Vec::new();
    let mut stack = vec![seed.clone()];
    while let Some(mut node) = stack.pop() {
        if solutions.len() > limit {
            break;
        }
        if node.propagate(set, tol) == PropagateOutcome::Infeasible {
            continue;
        }
        match node.first_free_binary(set) {
            None => {
                let values: Vec<f64> = node.values.iter().map(|v| v.unwrap()).collect();
                if set.max_violation(&values) <= tol {
                    solutions.push(values);
                }
            }
            Some(v) => {
                let mut zero = node.clone();
                zero.fix(v, 0.0);
                node.fix(v, 1.0);
                stack.push(node);
                stack.push(zero);
            }
        }
    }
    solutions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set() -> LinearConstraintSet {
        // b0 + b1 = 1, b1 <= b2
        let mut set = LinearConstraintSet::new(100.0);
        let b0 = set.add_binary(VarKey::Gamma { j: 0, l: 0, t: 0 });
        let b1 = set.add_binary(VarKey::Gamma { j: 0, l: 1, t: 0 });
        let b2 = set.add_binary(VarKey::Gamma { j: 0, l: 2, t: 0 });
        let mut sum = LinExpr::default();
        sum.push(b0, 1.0);
        sum.push(b1, 1.0);
        set.add_row("one_lane".into(), "sum_gamma", sum, Sense::Eq, 1.0);
        let mut ord = LinExpr::default();
        ord.push(b1, 1.0);
        ord.push(b2, -1.0);
        set.add_row("link".into(), "link", ord, Sense::Le, 0.0);
        set
    }

    #[test]
    fn enumeration_counts_solutions() {
        let set = toy_set();
        let seed = Assignment::free(&set);
        let sols = enumerate_binary_solutions(&set, &seed, 1e-9, 10);
        // (1,0,0), (1,0,1), (0,1,1)
        assert_eq!(sols.len(), 3);
    }

    #[test]
    fn propagation_forces_values() {
        let set = toy_set();
        let mut seed = Assignment::free(&set);
        seed.fix(0, 0.0); // b0 = 0 forces b1 = 1 forces b2 = 1
        assert_eq!(seed.propagate(&set, 1e-9), PropagateOutcome::Consistent);
        assert_eq!(seed.values[1], Some(1.0));
        assert_eq!(seed.values[2], Some(1.0));
    }

    #[test]
    fn dump_mentions_rows_and_vars() {
        let set = toy_set();
        let text = set.dump();
        assert!(text.contains("gam[j0,l1,t0]"));
        assert!(text.contains("one_lane"));
        assert!(text.contains("<="));
    }
}
