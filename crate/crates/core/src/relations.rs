//! Lane-membership, downstream-ordering, immediate-following and
//! cell-membership indicators: evaluated directly from continuous state, and
//! encoded as big-M integer constraints for the optimizer.

use crate::constraints::{Assignment, LinExpr, LinearConstraintSet, Sense, VarKey, VarKind};
use crate::scenario::{Kinematics2D, LaneGeometry};

/// Longitudinal cell grid shared by all lanes. Cells are
/// `[c*len, (c+1)*len)` with the upstream boundary belonging to the lower
/// cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub cell_length: f64,
    pub n_cells: usize,
}

impl CellGrid {
    pub fn extent(&self) -> f64 {
        self.cell_length * self.n_cells as f64
    }

    /// Cell containing x. A coordinate exactly on a cell boundary belongs to
    /// the lower-indexed cell so that membership stays unique.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < 0.0 || x > self.extent() {
            return None;
        }
        let c = (x / self.cell_length).floor() as usize;
        if c > 0 && x <= c as f64 * self.cell_length {
            Some(c - 1)
        } else if c >= self.n_cells {
            Some(self.n_cells - 1)
        } else {
            Some(c)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelationError {
    #[error("lateral position {0} is outside the roadway")]
    OutsideRoadway(f64),
    #[error("longitudinal position {0} is outside the cell grid")]
    OutsideGrid(f64),
    #[error("big-M constant {m} is too small for coordinate range {range}")]
    BigMTooSmall { m: f64, range: f64 },
}

/// All indicator values for one time step, evaluated from continuous state.
///
/// Storage is compressed: a vehicle's lane determines which lane index its
/// gamma/rho/eta bits live on, so only the per-pair relations are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationSnapshot {
    pub step: usize,
    n: usize,
    lane_count: usize,
    lane: Vec<Option<usize>>,
    /// Row-major (j, jp): jp strictly downstream of j in their shared lane.
    downstream: Vec<bool>,
    /// Immediate leader of each vehicle, if any.
    leader: Vec<Option<usize>>,
    cell: Vec<Option<(usize, usize)>>,
}

impl RelationSnapshot {
    pub fn vehicle_count(&self) -> usize {
        self.n
    }

    pub fn lane_of(&self, j: usize) -> Option<usize> {
        self.lane[j]
    }

    pub fn gamma(&self, j: usize, l: usize) -> bool {
        self.lane[j] == Some(l)
    }

    pub fn rho(&self, j: usize, jp: usize, l: usize) -> bool {
        j != jp && self.lane[j] == Some(l) && self.downstream[j * self.n + jp]
    }

    /// jp is strictly downstream of j in their shared lane (any lane).
    pub fn downstream_of(&self, j: usize, jp: usize) -> bool {
        j != jp && self.downstream[j * self.n + jp]
    }

    pub fn eta(&self, j: usize, jp: usize, l: usize) -> bool {
        self.lane[j] == Some(l) && self.leader[j] == Some(jp)
    }

    /// Immediate leader of vehicle j in its own lane.
    pub fn following_leader(&self, j: usize) -> Option<usize> {
        self.leader[j]
    }

    /// Auxiliary product indicator: k lies strictly between j and jp.
    pub fn xi(&self, j: usize, jp: usize, k: usize, l: usize) -> bool {
        self.rho(j, k, l) && self.rho(k, jp, l)
    }

    /// Auxiliary indicator: no vehicle lies between j and jp in lane l.
    pub fn delta_free(&self, j: usize, jp: usize, l: usize) -> bool {
        !(0..self.n).any(|k| k != j && k != jp && self.xi(j, jp, k, l))
    }

    pub fn phi(&self, j: usize, l: usize, c: usize) -> bool {
        self.cell[j] == Some((l, c))
    }

    pub fn cell_of(&self, j: usize) -> Option<(usize, usize)> {
        self.cell[j]
    }

    /// Tracked-vehicle count per (lane, cell).
    pub fn cell_counts(&self, lane_count: usize, n_cells: usize) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0usize; n_cells]; lane_count];
        for c in self.cell.iter().flatten() {
            counts[c.0][c.1] += 1;
        }
        counts
    }
}

/// Lane containing y. Errors when y lies outside the roadway.
pub fn eval_lane_membership(y: f64, geometry: &LaneGeometry) -> Result<usize, RelationError> {
    geometry.lane_of(y).ok_or(RelationError::OutsideRoadway(y))
}

/// Lane on which jp is strictly downstream of j, if any.
pub fn eval_downstream(
    state_j: &Kinematics2D,
    state_jp: &Kinematics2D,
    geometry: &LaneGeometry,
) -> Option<usize> {
    let lane_j = geometry.lane_of(state_j.y)?;
    let lane_jp = geometry.lane_of(state_jp.y)?;
    (lane_j == lane_jp && state_j.x < state_jp.x).then_some(lane_j)
}

/// (lane, cell) containing a full planar state.
pub fn eval_cell_membership(
    state: &Kinematics2D,
    geometry: &LaneGeometry,
    grid: &CellGrid,
) -> Result<(usize, usize), RelationError> {
    let lane = eval_lane_membership(state.y, geometry)?;
    let cell = grid.cell_of(state.x).ok_or(RelationError::OutsideGrid(state.x))?;
    Ok((lane, cell))
}

/// Evaluate lane membership, ordering and following for all vehicles.
pub fn evaluate_snapshot(
    states: &[Kinematics2D],
    geometry: &LaneGeometry,
    step: usize,
) -> RelationSnapshot {
    evaluate_snapshot_impl(states, geometry, None, step)
}

/// As [`evaluate_snapshot`], additionally assigning cell membership.
pub fn evaluate_snapshot_with_cells(
    states: &[Kinematics2D],
    geometry: &LaneGeometry,
    grid: &CellGrid,
    step: usize,
) -> RelationSnapshot {
    evaluate_snapshot_impl(states, geometry, Some(grid), step)
}

fn evaluate_snapshot_impl(
    states: &[Kinematics2D],
    geometry: &LaneGeometry,
    grid: Option<&CellGrid>,
    step: usize,
) -> RelationSnapshot {
    let n = states.len();
    let lane: Vec<Option<usize>> = states.iter().map(|s| geometry.lane_of(s.y)).collect();
    let mut downstream = vec![false; n * n];
    let mut leader: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        let Some(lj) = lane[j] else { continue };
        let mut best: Option<usize> = None;
        for jp in 0..n {
            if j == jp || lane[jp] != Some(lj) {
                continue;
            }
            if states[j].x < states[jp].x {
                downstream[j * n + jp] = true;
                // Immediate leader: smallest downstream x, lowest index on a
                // tie so the relation stays a deterministic partial matching.
                best = match best {
                    None => Some(jp),
                    Some(b) if states[jp].x < states[b].x => Some(jp),
                    other => other,
                };
            }
        }
        leader[j] = best;
    }
    let cell = match grid {
        Some(grid) => states
            .iter()
            .map(|s| {
                let l = geometry.lane_of(s.y)?;
                let c = grid.cell_of(s.x)?;
                Some((l, c))
            })
            .collect(),
        None => vec![None; n],
    };
    RelationSnapshot { step, n, lane_count: geometry.lane_count(), lane, downstream, leader, cell }
}

/// How one vehicle enters the relation encoding.
#[derive(Debug, Clone)]
pub struct RelationVehicle {
    /// Roster index used in variable keys.
    pub index: usize,
    /// Longitudinal position per emitted step.
    pub x: Vec<LinExpr>,
    /// Lateral position per emitted step.
    pub y: Vec<LinExpr>,
    /// Subjects get full planar cell rows and free lane membership;
    /// neighbors keep the stated frozen lane across the horizon.
    pub frozen_lane: Option<usize>,
}

/// Emit the integer reformulation of the indicator logic for the given
/// steps. `steps[k]` is the step index stored in variable keys; positions are
/// taken from each vehicle's k-th expression.
pub fn emit_relation_system(
    set: &mut LinearConstraintSet,
    vehicles: &[RelationVehicle],
    geometry: &LaneGeometry,
    grid: Option<&CellGrid>,
    steps: &[usize],
    m: f64,
) {
    let _ = vehicles.len();
    let lane_count = geometry.lane_count();

    // Declare binaries first, in deterministic key order per family.
    for (k, &t) in steps.iter().enumerate() {
        let _ = k;
        for v in vehicles {
            match v.frozen_lane {
                None => {
                    for l in 0..lane_count {
                        set.add_binary(VarKey::Gamma { j: v.index, l, t });
                    }
                }
                Some(_) => {
                    // Frozen lane membership enters rows as a constant.
                }
            }
        }
        for a in vehicles {
            for b in vehicles {
                if a.index == b.index {
                    continue;
                }
                for l in 0..lane_count {
                    set.add_binary(VarKey::Rho { j: a.index, jp: b.index, l, t });
                    set.add_binary(VarKey::Eta { j: a.index, jp: b.index, l, t });
                    set.add_binary(VarKey::Delta { j: a.index, jp: b.index, l, t });
                    for c in vehicles {
                        if c.index == a.index || c.index == b.index {
                            continue;
                        }
                        set.add_binary(VarKey::Xi { j: a.index, jp: b.index, k: c.index, l, t });
                    }
                }
            }
        }
        if let Some(grid) = grid {
            for v in vehicles {
                let lanes: Vec<usize> = match v.frozen_lane {
                    Some(l) => vec![l],
                    None => (0..lane_count).collect(),
                };
                for &l in &lanes {
                    for c in 0..grid.n_cells {
                        set.add_binary(VarKey::Phi { j: v.index, l, c, t });
                    }
                }
            }
        }
    }

    let gamma_expr = |set: &LinearConstraintSet, v: &RelationVehicle, l: usize, t: usize| -> LinExpr {
        match v.frozen_lane {
            Some(fl) => LinExpr::constant(if fl == l { 1.0 } else { 0.0 }),
            None => LinExpr::var(set.var(VarKey::Gamma { j: v.index, l, t })),
        }
    };

    for (k, &t) in steps.iter().enumerate() {
        // Lane membership: sum to one, and tie decision-linked memberships
        // to the lateral coordinate.
        for v in vehicles {
            if v.frozen_lane.is_some() {
                continue;
            }
            let mut sum = LinExpr::default();
            for l in 0..lane_count {
                sum.push(set.var(VarKey::Gamma { j: v.index, l, t }), 1.0);
            }
            set.add_row(format!("sum_gam[j{},t{}]", v.index, t), "sum_gamma", sum, Sense::Eq, 1.0);
            for l in 0..lane_count {
                let band = geometry.lanes[l];
                let g = set.var(VarKey::Gamma { j: v.index, l, t });
                // gamma = 1 forces lower < y <= upper (closed form with big-M).
                let mut up = v.y[k].clone();
                up.push(g, m);
                set.add_row(format!("lane_up[j{},l{l},t{t}]", v.index), "lane_link", up, Sense::Le, band.upper_y + m);
                let mut lo = v.y[k].clone();
                lo.push(g, -m);
                set.add_row(format!("lane_lo[j{},l{l},t{t}]", v.index), "lane_link", lo, Sense::Ge, band.lower_y - m);
            }
        }

        // Downstream ordering (pairwise), family (57).
        for a in vehicles {
            for b in vehicles {
                if a.index == b.index {
                    continue;
                }
                for l in 0..lane_count {
                    let rho = set.var(VarKey::Rho { j: a.index, jp: b.index, l, t });
                    let ga = gamma_expr(set, a, l, t);
                    let gb = gamma_expr(set, b, l, t);
                    // (57.1) x_b - x_a <= M rho + M(1-ga) + M(1-gb)
                    let mut r1 = b.x[k].clone();
                    r1.add(&a.x[k], -1.0);
                    r1.push(rho, -m);
                    r1.add(&ga, m);
                    r1.add(&gb, m);
                    set.add_row(format!("ord_a[j{},j{},l{l},t{t}]", a.index, b.index), "ord_57_1", r1, Sense::Le, 2.0 * m);
                    // (57.2) x_b - x_a >= M(rho - 1)
                    let mut r2 = b.x[k].clone();
                    r2.add(&a.x[k], -1.0);
                    r2.push(rho, -m);
                    set.add_row(format!("ord_b[j{},j{},l{l},t{t}]", a.index, b.index), "ord_57_2", r2, Sense::Ge, -m);
                    // (57.3) gamma_a >= rho, gamma_b >= rho
                    let mut r3 = ga.clone();
                    r3.push(rho, -1.0);
                    set.add_row(format!("ord_c[j{},j{},l{l},t{t}]", a.index, b.index), "ord_57_3", r3, Sense::Ge, 0.0);
                    let mut r4 = gb.clone();
                    r4.push(rho, -1.0);
                    set.add_row(format!("ord_d[j{},j{},l{l},t{t}]", a.index, b.index), "ord_57_3", r4, Sense::Ge, 0.0);
                }
            }
        }

        // Between indicators (58) and following logic (59).
        for a in vehicles {
            for b in vehicles {
                if a.index == b.index {
                    continue;
                }
                for l in 0..lane_count {
                    let rho_ab = set.var(VarKey::Rho { j: a.index, jp: b.index, l, t });
                    let eta = set.var(VarKey::Eta { j: a.index, jp: b.index, l, t });
                    let dlt = set.var(VarKey::Delta { j: a.index, jp: b.index, l, t });
                    let mut xi_sum = LinExpr::default();
                    for c in vehicles {
                        if c.index == a.index || c.index == b.index {
                            continue;
                        }
                        let xi = set.var(VarKey::Xi { j: a.index, jp: b.index, k: c.index, l, t });
                        let rho_ak = set.var(VarKey::Rho { j: a.index, jp: c.index, l, t });
                        let rho_kb = set.var(VarKey::Rho { j: c.index, jp: b.index, l, t });
                        // (58.1) xi <= rho_ak, (58.2) xi <= rho_kb,
                        // (58.3) xi >= rho_ak + rho_kb - 1
                        let mut x1 = LinExpr::var(xi);
                        x1.push(rho_ak, -1.0);
                        set.add_row(format!("btw_a[j{},j{},k{},l{l},t{t}]", a.index, b.index, c.index), "btw_58_1", x1, Sense::Le, 0.0);
                        let mut x2 = LinExpr::var(xi);
                        x2.push(rho_kb, -1.0);
                        set.add_row(format!("btw_b[j{},j{},k{},l{l},t{t}]", a.index, b.index, c.index), "btw_58_2", x2, Sense::Le, 0.0);
                        let mut x3 = LinExpr::var(xi);
                        x3.push(rho_ak, -1.0);
                        x3.push(rho_kb, -1.0);
                        set.add_row(format!("btw_c[j{},j{},k{},l{l},t{t}]", a.index, b.index, c.index), "btw_58_3", x3, Sense::Ge, -1.0);
                        xi_sum.push(xi, 1.0);
                    }
                    // (59.1) dlt >= eta; (59.2) rho >= eta; (59.3) eta >= rho + dlt - 1
                    let mut f1 = LinExpr::var(dlt);
                    f1.push(eta, -1.0);
                    set.add_row(format!("fol_a[j{},j{},l{l},t{t}]", a.index, b.index), "fol_59_1", f1, Sense::Ge, 0.0);
                    let mut f2 = LinExpr::var(rho_ab);
                    f2.push(eta, -1.0);
                    set.add_row(format!("fol_b[j{},j{},l{l},t{t}]", a.index, b.index), "fol_59_2", f2, Sense::Ge, 0.0);
                    let mut f3 = LinExpr::var(eta);
                    f3.push(rho_ab, -1.0);
                    f3.push(dlt, -1.0);
                    set.add_row(format!("fol_c[j{},j{},l{l},t{t}]", a.index, b.index), "fol_59_3", f3, Sense::Ge, -1.0);
                    // (59.4) sum xi <= (1 - dlt) M; (59.5) 1 - sum xi <= dlt
                    let mut f4 = xi_sum.clone();
                    f4.push(dlt, m);
                    set.add_row(format!("fol_d[j{},j{},l{l},t{t}]", a.index, b.index), "fol_59_4", f4, Sense::Le, m);
                    let mut f5 = xi_sum.clone();
                    f5.push(dlt, 1.0);
                    set.add_row(format!("fol_e[j{},j{},l{l},t{t}]", a.index, b.index), "fol_59_5", f5, Sense::Ge, 1.0);
                }
            }
        }

        // Cell membership (60) plus the one-cell-at-a-time rule (34).
        if let Some(grid) = grid {
            for v in vehicles {
                let lanes: Vec<usize> = match v.frozen_lane {
                    Some(l) => vec![l],
                    None => (0..lane_count).collect(),
                };
                let mut phi_sum = LinExpr::default();
                for &l in &lanes {
                    for c in 0..grid.n_cells {
                        let phi = set.var(VarKey::Phi { j: v.index, l, c, t });
                        phi_sum.push(phi, 1.0);
                        let x_lo = c as f64 * grid.cell_length;
                        let x_hi = (c + 1) as f64 * grid.cell_length;
                        // (60.1)/(60.3): x within the cell band when phi = 1.
                        let mut cx_hi = v.x[k].clone();
                        cx_hi.push(phi, m);
                        set.add_row(format!("cell_xu[j{},l{l},c{c},t{t}]", v.index), "cell_60_x", cx_hi, Sense::Le, x_hi + m);
                        let mut cx_lo = v.x[k].clone();
                        cx_lo.push(phi, -m);
                        set.add_row(format!("cell_xl[j{},l{l},c{c},t{t}]", v.index), "cell_60_x", cx_lo, Sense::Ge, x_lo - m);
                        if v.frozen_lane.is_none() {
                            let band = geometry.lanes[l];
                            let mut cy_hi = v.y[k].clone();
                            cy_hi.push(phi, m);
                            set.add_row(format!("cell_yu[j{},l{l},c{c},t{t}]", v.index), "cell_60_y", cy_hi, Sense::Le, band.upper_y + m);
                            let mut cy_lo = v.y[k].clone();
                            cy_lo.push(phi, -m);
                            set.add_row(format!("cell_yl[j{},l{l},c{c},t{t}]", v.index), "cell_60_y", cy_lo, Sense::Ge, band.lower_y - m);
                        }
                    }
                }
                set.add_row(format!("sum_phi[j{},t{t}]", v.index), "sum_phi", phi_sum, Sense::Eq, 1.0);
            }
        }
    }
}

/// Standalone encoding of the indicator system over symbolic positions: one
/// continuous (x, y) pair per vehicle per step, every indicator a binary.
/// `frozen` neighbors keep their stated lane; subjects (frozen = None) get
/// decision-linked lane and cell membership.
pub fn encode_relations_bigm(
    roster: &[Option<usize>],
    geometry: &LaneGeometry,
    grid: Option<&CellGrid>,
    horizon: usize,
    m: f64,
    roadway_length: f64,
) -> Result<LinearConstraintSet, RelationError> {
    if m < roadway_length {
        return Err(RelationError::BigMTooSmall { m, range: roadway_length });
    }
    let mut set = LinearConstraintSet::new(m);
    let steps: Vec<usize> = (0..horizon).collect();
    let mut vehicles = Vec::with_capacity(roster.len());
    for (j, frozen) in roster.iter().enumerate() {
        let mut xs = Vec::with_capacity(horizon);
        let mut ys = Vec::with_capacity(horizon);
        for &t in &steps {
            let x = set.add_var(VarKey::PosX { j, t }, VarKind::Continuous, 0.0, roadway_length);
            let y = set.add_var(
                VarKey::PosY { j, t },
                VarKind::Continuous,
                geometry.road_lower(),
                geometry.road_upper(),
            );
            xs.push(LinExpr::var(x));
            ys.push(LinExpr::var(y));
        }
        vehicles.push(RelationVehicle { index: j, x: xs, y: ys, frozen_lane: *frozen });
    }
    emit_relation_system(&mut set, &vehicles, geometry, grid, &steps, m);
    Ok(set)
}

/// Fix the standalone encoding's position variables to a concrete state and
/// return the seed assignment.
pub fn seed_from_states(
    set: &LinearConstraintSet,
    states: &[Kinematics2D],
    horizon: usize,
) -> Assignment {
    let mut seed = Assignment::free(set);
    for (j, s) in states.iter().enumerate() {
        for t in 0..horizon {
            if let Some(v) = set.lookup(VarKey::PosX { j, t }) {
                seed.fix(v, s.x);
            }
            if let Some(v) = set.lookup(VarKey::PosY { j, t }) {
                seed.fix(v, s.y);
            }
        }
    }
    seed
}

/// The indicator assignment `eval_*` produces for a single-step encoding,
/// in the encoding's variable order.
pub fn snapshot_assignment(
    set: &LinearConstraintSet,
    snapshot: &RelationSnapshot,
    roster: &[Option<usize>],
    t: usize,
) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let n = snapshot.vehicle_count();
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    for j in 0..n {
        for l in 0..snapshot.lane_count {
            if roster[j].is_none() {
                if let Some(v) = set.lookup(VarKey::Gamma { j, l, t }) {
                    out.push((v, bit(snapshot.gamma(j, l))));
                }
            }
        }
        for jp in 0..n {
            if j == jp {
                continue;
            }
            for l in 0..snapshot.lane_count {
                if let Some(v) = set.lookup(VarKey::Rho { j, jp, l, t }) {
                    out.push((v, bit(snapshot.rho(j, jp, l))));
                }
                if let Some(v) = set.lookup(VarKey::Eta { j, jp, l, t }) {
                    out.push((v, bit(snapshot.eta(j, jp, l))));
                }
                if let Some(v) = set.lookup(VarKey::Delta { j, jp, l, t }) {
                    out.push((v, bit(snapshot.delta_free(j, jp, l))));
                }
                for k in 0..n {
                    if k == j || k == jp {
                        continue;
                    }
                    if let Some(v) = set.lookup(VarKey::Xi { j, jp, k, l, t }) {
                        out.push((v, bit(snapshot.xi(j, jp, k, l))));
                    }
                }
            }
        }
    }
    for j in 0..n {
        for l in 0..snapshot.lane_count {
            let mut c = 0;
            while let Some(v) = set.lookup(VarKey::Phi { j, l, c, t }) {
                out.push((v, bit(snapshot.phi(j, l, c))));
                c += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::enumerate_binary_solutions;

    fn geometry() -> LaneGeometry {
        LaneGeometry::uniform(3, 3.6)
    }

    fn state(x: f64, y: f64) -> Kinematics2D {
        Kinematics2D { x, y, vx: 20.0, vy: 0.0 }
    }

    #[test]
    fn lane_membership_examples() {
        let g = geometry();
        assert_eq!(eval_lane_membership(1.8, &g).unwrap(), 0);
        // Upper bound inclusive: the boundary belongs to the lower lane.
        assert_eq!(eval_lane_membership(3.6, &g).unwrap(), 0);
        assert_eq!(eval_lane_membership(7.21, &g).unwrap(), 2);
        assert!(eval_lane_membership(11.0, &g).is_err());
    }

    #[test]
    fn downstream_examples() {
        let g = geometry();
        assert_eq!(eval_downstream(&state(50.0, 5.0), &state(80.0, 5.0), &g), Some(1));
        assert_eq!(eval_downstream(&state(50.0, 5.0), &state(80.0, 1.8), &g), None);
        // Strict inequality: equal positions are not ordered.
        assert_eq!(eval_downstream(&state(50.0, 5.0), &state(50.0, 5.0), &g), None);
    }

    #[test]
    fn following_chain() {
        let g = geometry();
        let states = [state(10.0, 1.8), state(40.0, 1.8), state(90.0, 1.8)];
        let snap = evaluate_snapshot(&states, &g, 0);
        assert!(snap.eta(0, 1, 0));
        assert!(snap.eta(1, 2, 0));
        assert!(!snap.eta(0, 2, 0));
        assert_eq!(snap.following_leader(0), Some(1));
        assert_eq!(snap.following_leader(2), None);
    }

    #[test]
    fn following_across_lanes_is_empty() {
        let g = geometry();
        let states = [state(10.0, 1.8), state(40.0, 5.4)];
        let snap = evaluate_snapshot(&states, &g, 0);
        for l in 0..3 {
            assert!(!snap.eta(0, 1, l));
            assert!(!snap.eta(1, 0, l));
        }
    }

    #[test]
    fn cell_membership_examples() {
        let grid = CellGrid { cell_length: 40.0, n_cells: 3 };
        assert_eq!(grid.cell_of(95.0), Some(2));
        // Boundary belongs to the lower cell.
        assert_eq!(grid.cell_of(40.0), Some(0));
        assert_eq!(grid.cell_of(121.0), None);
        let g = geometry();
        assert_eq!(
            eval_cell_membership(&state(95.0, 1.8), &g, &grid).unwrap(),
            (0, 2)
        );
    }

    #[test]
    fn snapshot_invariants_on_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = geometry();
        let grid = CellGrid { cell_length: 40.0, n_cells: 10 };
        for _ in 0..200 {
            let n = rng.gen_range(2..=5);
            let states: Vec<Kinematics2D> = (0..n)
                .map(|_| state(rng.gen_range(0.0..400.0), rng.gen_range(0.01..10.79)))
                .collect();
            let snap = evaluate_snapshot_with_cells(&states, &g, &grid, 0);
            for j in 0..n {
                let lanes: usize = (0..3).filter(|&l| snap.gamma(j, l)).count();
                assert_eq!(lanes, 1);
                let cells: usize = (0..3)
                    .flat_map(|l| (0..10).map(move |c| (l, c)))
                    .filter(|&(l, c)| snap.phi(j, l, c))
                    .count();
                assert_eq!(cells, 1);
                // Each vehicle has at most one immediate leader, and eta
                // implies rho.
                for jp in 0..n {
                    for l in 0..3 {
                        if snap.eta(j, jp, l) {
                            assert!(snap.rho(j, jp, l));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn encoding_row_census_two_vehicles_two_lanes() {
        // Hand-derived census for |J| = 2 (both subjects), L = 2, T = 1,
        // C = 2 cells:
        //   sum_gamma: 2 (one per vehicle)
        //   lane_link: 2 vehicles x 2 lanes x 2 rows        = 8
        //   ord_57_1 / ord_57_2: 2 ordered pairs x 2 lanes  = 4 each
        //   ord_57_3: 2 pairs x 2 lanes x 2 rows            = 8
        //   btw_58_*: no third vehicle                      = 0
        //   fol_59_1..5: 2 pairs x 2 lanes x 1 row          = 4 each
        //   cell_60_x: 2 veh x 2 lanes x 2 cells x 2 rows   = 16
        //   cell_60_y: same                                 = 16
        //   sum_phi: 2
        let g = LaneGeometry::uniform(2, 3.6);
        let grid = CellGrid { cell_length: 40.0, n_cells: 2 };
        let set = encode_relations_bigm(&[None, None], &g, Some(&grid), 1, 200.0, 200.0).unwrap();
        let counts = set.family_counts();
        assert_eq!(counts["sum_gamma"], 2);
        assert_eq!(counts["lane_link"], 8);
        assert_eq!(counts["ord_57_1"], 4);
        assert_eq!(counts["ord_57_2"], 4);
        assert_eq!(counts["ord_57_3"], 8);
        assert!(counts.get("btw_58_1").is_none());
        assert_eq!(counts["fol_59_1"], 4);
        assert_eq!(counts["fol_59_2"], 4);
        assert_eq!(counts["fol_59_3"], 4);
        assert_eq!(counts["fol_59_4"], 4);
        assert_eq!(counts["fol_59_5"], 4);
        assert_eq!(counts["cell_60_x"], 16);
        assert_eq!(counts["cell_60_y"], 16);
        assert_eq!(counts["sum_phi"], 2);
        let total: usize = counts.values().sum();
        assert_eq!(total, set.rows.len());
        assert_eq!(set.rows.len(), 2 + 8 + 4 + 4 + 8 + 20 + 32 + 2);
        // Variables: per vehicle 2 pos + 2 gamma + 4 phi; per ordered pair
        // 2 lanes x (rho + eta + delta).
        assert_eq!(set.vars.len(), 2 * (2 + 2 + 4) + 2 * 2 * 3);
    }

    #[test]
    fn encoding_too_small_m_errors() {
        let g = geometry();
        let err = encode_relations_bigm(&[None, None], &g, None, 1, 100.0, 400.0).unwrap_err();
        assert!(matches!(err, RelationError::BigMTooSmall { .. }));
    }

    #[test]
    fn eval_assignment_is_unique_encoding_solution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = geometry();
        let grid = CellGrid { cell_length: 40.0, n_cells: 5 };
        for trial in 0..25 {
            let n = rng.gen_range(2..=4);
            // Mixed roster: vehicle 0 and 1 free (subjects), rest frozen.
            let states: Vec<Kinematics2D> = (0..n)
                .map(|_| state(rng.gen_range(1.0..199.0), rng.gen_range(0.05..10.75)))
                .collect();
            let roster: Vec<Option<usize>> = states
                .iter()
                .enumerate()
                .map(|(j, s)| (j >= 2).then(|| g.lane_of(s.y).unwrap()))
                .collect();
            let set = encode_relations_bigm(&roster, &g, Some(&grid), 1, 200.0, 200.0).unwrap();
            let mut seed = seed_from_states(&set, &states, 1);
            let snap = evaluate_snapshot_with_cells(&states, &g, &grid, 0);
            let solutions = enumerate_binary_solutions(&set, &seed, 1e-6, 2);
            assert_eq!(solutions.len(), 1, "trial {trial}: expected a unique solution");
            for (v, val) in snapshot_assignment(&set, &snap, &roster, 0) {
                assert_eq!(solutions[0][v], val, "trial {trial}: var {}", set.vars[v].key);
            }
            // The eval assignment itself satisfies every row.
            for (v, val) in snapshot_assignment(&set, &snap, &roster, 0) {
                seed.fix(v, val);
            }
            let full: Vec<f64> = seed.values.iter().map(|v| v.unwrap()).collect();
            assert!(set.max_violation(&full) <= 1e-9);
        }
    }

    #[test]
    fn eta_with_vehicle_between_violates_encoding() {
        let g = geometry();
        let states = [state(10.0, 1.8), state(90.0, 1.8), state(40.0, 1.8)];
        let set = encode_relations_bigm(&[None, None, None], &g, None, 1, 200.0, 200.0).unwrap();
        let mut seed = seed_from_states(&set, &states, 1);
        let snap = evaluate_snapshot(&states, &g, 0);
        for (v, val) in snapshot_assignment(&set, &snap, &[None, None, None], 0) {
            seed.fix(v, val);
        }
        // Force eta(0 -> 1) = 1 even though vehicle 2 sits between them.
        let eta = set.var(VarKey::Eta { j: 0, jp: 1, l: 0, t: 0 });
        seed.fix(eta, 1.0);
        let full: Vec<f64> = seed.values.iter().map(|v| v.unwrap()).collect();
        let violated: Vec<&str> = set
            .rows
            .iter()
            .filter(|r| r.violation(&full) > 1e-9)
            .map(|r| r.family)
            .collect();
        assert!(!violated.is_empty());
        assert!(violated.iter().any(|f| f.starts_with("fol_59") || f.starts_with("btw_58")));
    }
}
