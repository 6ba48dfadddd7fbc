//! Runtime checks for the recursive-feasibility conditions, the admissible
//! control interval of a following subject, and the reaction-epoch spacing
//! recursion used as the minimum-spacing oracle.

use crate::micro::CaccCoefficients;
use crate::relations::RelationSnapshot;
use crate::scenario::{LimitSet, VehicleClass, VehicleParams};

/// Upper bound on an HDV's reaction time below which the spacing recursion
/// stays nonnegative under maximum braking.
pub fn reaction_time_bound(v_min: f64, a_min: f64, displacement: f64) -> Result<f64, String> {
    if a_min >= 0.0 {
        return Err(format!("deceleration limit must be negative, got {a_min}"));
    }
    let b = v_min - 5.0 * a_min;
    let disc = b * b - 24.0 * a_min * displacement;
    if disc < 0.0 {
        return Err(format!("negative discriminant {disc}"));
    }
    Ok((-b - disc.sqrt()) / (2.0 * a_min))
}

/// Alternative reaction-time bound implied by requiring the recursion's
/// n = 5 minimum itself to stay nonnegative at the minimum speed
/// (6 a tau^2 + v_min tau + d >= 0). Reported alongside the closed form;
/// the two disagree and both are surfaced without adjudication.
pub fn reaction_time_bound_recursion(v_min: f64, a_min: f64, displacement: f64) -> Result<f64, String> {
    if a_min >= 0.0 {
        return Err(format!("deceleration limit must be negative, got {a_min}"));
    }
    let disc = v_min * v_min - 24.0 * a_min * displacement;
    if disc < 0.0 {
        return Err(format!("negative discriminant {disc}"));
    }
    Ok((-v_min - disc.sqrt()) / (12.0 * a_min))
}

/// Relative-speed threshold for cutting in front of a CACC follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutinThreshold {
    /// Minimum admissible (subject speed - follower speed) in m/s.
    Applicable(f64),
    /// The feasibility argument requires B > 1/2; weaker gains fall outside
    /// the guaranteed regime.
    NotApplicable,
}

pub fn cutin_speed_threshold(a_tilde: f64, delta: f64, coeffs: &CaccCoefficients) -> CutinThreshold {
    if coeffs.b <= 0.5 {
        return CutinThreshold::NotApplicable;
    }
    CutinThreshold::Applicable(a_tilde * delta * (coeffs.b - 0.5) / coeffs.a)
}

/// Braking bound used by the cut-in condition: the subject cannot brake
/// below the speed floor within one step.
pub fn effective_braking(v_prev: f64, delta: f64, limits: &LimitSet) -> f64 {
    limits.a_min.max((limits.v_min - v_prev) / delta)
}

/// Admissible longitudinal control interval for a subject following a
/// predicted leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AdmissibleInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.lo, self.hi)
    }
}

/// Inputs for the admissible-interval computation. Leader quantities are
/// predictions; `*_prev` values are from the previous control step.
#[derive(Debug, Clone, Copy)]
pub struct FollowingState {
    pub x_now: f64,
    pub v_now: f64,
    pub x_prev: f64,
    pub v_prev: f64,
    pub leader_x_prev: f64,
    pub leader_v_prev: f64,
    pub leader_v_now: f64,
    pub length: f64,
    pub reaction_time: f64,
}

/// Safety-margin surplus of the follower at the previous step: actual gap
/// minus the conservative required gap.
pub fn safety_surplus(fs: &FollowingState, limits: &LimitSet) -> f64 {
    let dv = fs.v_prev - limits.v_min;
    let required = fs.length + fs.reaction_time * fs.v_prev - dv * dv / (2.0 * limits.a_min);
    fs.leader_x_prev - fs.x_prev - required
}

/// Admissible control interval: speed-envelope terms on both sides plus the
/// braking-distance cap against the predicted leader.
pub fn admissible_interval(fs: &FollowingState, limits: &LimitSet, delta: f64) -> AdmissibleInterval {
    let lo = limits.a_min.max((limits.v_min - fs.v_now) / delta);
    let a_speed_hi = (limits.v_max - fs.v_now) / delta;

    let a = limits.a_min;
    let dv_prev = fs.v_prev - limits.v_min;
    let surplus = safety_surplus(fs, limits);
    let b_term = dv_prev * dv_prev * delta * delta / (a * a)
        + delta.powi(3) * dv_prev / (-a)
        + 2.25 * delta.powi(4)
        + (2.0 * delta * delta / (-a))
            * (((fs.leader_v_prev + fs.leader_v_now) / 2.0 - limits.v_min) * delta + surplus);
    let a_lo_v = (limits.v_min - fs.v_now) / delta;
    let a_dist_hi = 1.5 * a + a_lo_v - (a / (delta * delta)) * b_term.max(0.0).sqrt();

    AdmissibleInterval { lo, hi: limits.a_max.min(a_speed_hi).min(a_dist_hi) }
}

/// Spacing between an HDV follower and a braking leader across reaction
/// epochs, per the epoch-synchronous recursion: leader and follower both
/// start at `v0` with gap `s0`, the leader holds control `u` every epoch,
/// and the follower reacts one epoch late with unclamped speed adoption.
/// Returns the spacings at n = 0..=n_max epochs.
pub fn spacing_recursion(s0: f64, v0: f64, u: f64, tau: f64, d: f64, n_max: usize) -> Vec<f64> {
    let mut spacings = Vec::with_capacity(n_max + 1);
    // Seed: follower at the origin moving v0, leader s0 ahead at v0.
    let mut x_lead = s0;
    let mut v_lead = v0;
    let mut x_follow = 0.0;
    let mut v_follow = v0;
    spacings.push(s0);
    for _ in 0..n_max {
        let spacing = x_lead - x_follow;
        let x_lead_next = x_lead + tau * v_lead + 0.5 * u * tau * tau;
        let v_lead_next = v_lead + tau * u;
        // Follower: position advances a whole epoch at the held speed, then
        // the speed adopts the Newell value from the epoch-start spacing.
        let x_follow_next = x_follow + tau * v_follow;
        let v_follow_next = (spacing - d) / tau;
        x_lead = x_lead_next;
        v_lead = v_lead_next;
        x_follow = x_follow_next;
        v_follow = v_follow_next;
        spacings.push(x_lead - x_follow);
    }
    spacings
}

/// Closed forms of the first six recursion entries, used as the independent
/// oracle for [`spacing_recursion`].
pub fn spacing_closed_forms(s0: f64, v0: f64, u: f64, tau: f64, d: f64) -> [f64; 7] {
    let ut2 = u * tau * tau;
    let vt = v0 * tau;
    [
        s0,
        s0 + 0.5 * ut2,
        vt + 2.0 * ut2 + d,
        2.0 * vt - s0 + 4.0 * ut2 + 2.0 * d,
        2.0 * vt - s0 + 5.5 * ut2 + 2.0 * d,
        vt + 6.0 * ut2 + d,
        s0 + 6.0 * ut2,
    ]
}

/// Theorem-style feasibility conditions evaluated on one world snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Condition (i): the previous control step solved.
    pub prior_feasible: bool,
    /// Condition (ii): per-neighbor speed-in-envelope bits.
    pub neighbor_speeds_ok: Vec<(usize, bool)>,
    /// Condition (iii): per-HDV reaction bound (vehicle, tau, tau_bar, ok).
    pub hdv_reaction: Vec<(usize, f64, f64, bool)>,
    /// Informational alternative bound per HDV (vehicle, tau_bar_recursion).
    pub hdv_reaction_recursion_bound: Vec<(usize, f64)>,
    /// Condition (iv): per (CACC follower, subject leader) relative-speed
    /// checks (follower, leader, threshold, ok). A `None` threshold flags
    /// gains outside the guaranteed regime.
    pub ncav_cutin: Vec<(usize, usize, Option<f64>, bool)>,
    pub overall: bool,
}

/// World view needed by the feasibility check.
pub struct GuardInputs<'a> {
    pub classes: &'a [VehicleClass],
    pub params: &'a [VehicleParams],
    pub speeds: &'a [f64],
    pub snapshot: &'a RelationSnapshot,
    pub subjects: [usize; 2],
    /// Subject speeds from the previous step (current at t = 0).
    pub prev_subject_speeds: [f64; 2],
    pub limits: &'a LimitSet,
    pub delta: f64,
    pub prior_feasible: bool,
}

pub fn check_theorem1(inputs: &GuardInputs<'_>) -> FeasibilityReport {
    let lim = inputs.limits;
    let mut neighbor_speeds_ok = Vec::new();
    let mut hdv_reaction = Vec::new();
    let mut hdv_reaction_recursion_bound = Vec::new();
    let mut ncav_cutin = Vec::new();
    let mut overall = inputs.prior_feasible;

    for (j, class) in inputs.classes.iter().enumerate() {
        match class {
            VehicleClass::SubjectCav => {}
            VehicleClass::NeighborCav | VehicleClass::Hdv => {
                let v = inputs.speeds[j];
                let ok = (lim.v_min - 1e-9..=lim.v_max + 1e-9).contains(&v);
                neighbor_speeds_ok.push((j, ok));
                overall &= ok;
            }
        }
        if *class == VehicleClass::Hdv {
            let tau = inputs.params[j].reaction_time;
            let d = inputs.params[j].newell_displacement;
            match reaction_time_bound(lim.v_min, lim.a_min, d) {
                Ok(bound) => {
                    let ok = tau <= bound + 1e-12;
                    hdv_reaction.push((j, tau, bound, ok));
                    overall &= ok;
                }
                Err(_) => {
                    hdv_reaction.push((j, tau, f64::NAN, false));
                    overall = false;
                }
            }
            if let Ok(alt) = reaction_time_bound_recursion(lim.v_min, lim.a_min, d) {
                hdv_reaction_recursion_bound.push((j, alt));
            }
        }
        if *class == VehicleClass::NeighborCav {
            if let Some(leader) = inputs.snapshot.following_leader(j) {
                if let Some(slot) = inputs.subjects.iter().position(|&s| s == leader) {
                    let cacc = inputs.params[j].cacc.unwrap_or_default();
                    let coeffs = crate::micro::cacc_coefficients(inputs.delta, cacc.k1, cacc.k2, cacc.time_gap);
                    let a_tilde = effective_braking(inputs.prev_subject_speeds[slot], inputs.delta, lim);
                    match cutin_speed_threshold(a_tilde, inputs.delta, &coeffs) {
                        CutinThreshold::Applicable(threshold) => {
                            let rel = inputs.speeds[leader] - inputs.speeds[j];
                            let ok = rel >= threshold - 1e-9;
                            ncav_cutin.push((j, leader, Some(threshold), ok));
                            overall &= ok;
                        }
                        CutinThreshold::NotApplicable => {
                            ncav_cutin.push((j, leader, None, false));
                            overall = false;
                        }
                    }
                }
            }
        }
    }

    FeasibilityReport {
        prior_feasible: inputs.prior_feasible,
        neighbor_speeds_ok,
        hdv_reaction,
        hdv_reaction_recursion_bound,
        ncav_cutin,
        overall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micro::{CACC_A_CALIBRATED, CACC_B_CALIBRATED};
    use crate::relations::evaluate_snapshot;
    use crate::scenario::{Kinematics2D, LaneGeometry};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reaction_bound_golden() {
        let bound = reaction_time_bound(5.0, -6.0, 5.0).unwrap();
        assert!((bound - 6.59).abs() < 0.01, "bound = {bound}");
        let zero_d = reaction_time_bound(5.0, -6.0, 0.0).unwrap();
        assert_relative_eq!(zero_d, 70.0 / 12.0, epsilon = 1e-9);
        // A normal reaction time satisfies the bound.
        assert!(2.0 <= bound);
    }

    #[test]
    fn reaction_bound_recursion_value() {
        let alt = reaction_time_bound_recursion(5.0, -6.0, 5.0).unwrap();
        assert!((alt - 0.4485).abs() < 0.001, "alt = {alt}");
    }

    #[test]
    fn cutin_threshold_golden() {
        let coeffs = CaccCoefficients { a: CACC_A_CALIBRATED, b: CACC_B_CALIBRATED, c: 0.0 };
        match cutin_speed_threshold(-6.0, 1.0, &coeffs) {
            CutinThreshold::Applicable(th) => assert!((th + 10.33).abs() < 0.01, "th = {th}"),
            CutinThreshold::NotApplicable => panic!("expected applicable"),
        }
        // Zero effective braking requires matching speeds.
        match cutin_speed_threshold(0.0, 1.0, &coeffs) {
            CutinThreshold::Applicable(th) => assert_eq!(th, 0.0),
            CutinThreshold::NotApplicable => panic!("expected applicable"),
        }
    }

    #[test]
    fn cutin_threshold_weak_gain_not_applicable() {
        let coeffs = crate::micro::cacc_coefficients(1.0, 0.01, 0.7, 0.6);
        assert!(coeffs.b <= 0.5, "b = {}", coeffs.b);
        assert_eq!(cutin_speed_threshold(-6.0, 1.0, &coeffs), CutinThreshold::NotApplicable);
    }

    #[test]
    fn cutin_threshold_monotone_in_braking() {
        let coeffs = CaccCoefficients { a: CACC_A_CALIBRATED, b: CACC_B_CALIBRATED, c: 0.0 };
        let mut prev = f64::NEG_INFINITY;
        for a_tilde in [-6.0, -4.0, -2.0, 0.0] {
            let CutinThreshold::Applicable(th) = cutin_speed_threshold(a_tilde, 1.0, &coeffs) else {
                panic!("expected applicable");
            };
            assert!(th >= prev);
            prev = th;
        }
    }

    fn canonical_following(v: f64, gap: f64) -> FollowingState {
        FollowingState {
            x_now: 100.0,
            v_now: v,
            x_prev: 100.0 - v,
            v_prev: v,
            leader_x_prev: 100.0 + gap - 20.0,
            leader_v_prev: 20.0,
            leader_v_now: 20.0,
            length: 5.0,
            reaction_time: 1.0,
        }
    }

    #[test]
    fn interval_speed_envelope_zero_cases() {
        let lim = LimitSet::default();
        let at_max = canonical_following(lim.v_max, 80.0);
        let interval = admissible_interval(&at_max, &lim, 1.0);
        assert!(interval.hi <= 0.0 + 1e-12);
        let at_min = canonical_following(lim.v_min, 80.0);
        let interval = admissible_interval(&at_min, &lim, 1.0);
        assert_relative_eq!(interval.lo, 0.0);
    }

    #[test]
    fn interval_canonical_case_one_step_oracle() {
        let lim = LimitSet::default();
        let fs = canonical_following(20.0, 50.0);
        let interval = admissible_interval(&fs, &lim, 1.0);
        assert!(!interval.is_empty(), "{interval:?}");
        // One forward step at the interval's upper end keeps the
        // conservative gap against the leader advancing at its predicted
        // speed.
        for u in [interval.lo, 0.5 * (interval.lo + interval.hi), interval.hi] {
            let v_next = fs.v_now + u;
            let x_next = fs.x_now + fs.v_now + 0.5 * u;
            let leader_x_now = fs.leader_x_prev + fs.leader_v_prev;
            let leader_x_next = leader_x_now + fs.leader_v_now;
            let dv = v_next - lim.v_min;
            let required = fs.length + fs.reaction_time * v_next - dv * dv / (2.0 * lim.a_min);
            assert!(
                leader_x_next - x_next >= required - 1e-6,
                "u = {u}: gap {} < required {required}",
                leader_x_next - x_next
            );
        }
    }

    #[test]
    fn recursion_matches_closed_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s0 = rng.gen_range(5.0..80.0);
            let v0 = rng.gen_range(5.0..33.0);
            let u = rng.gen_range(-6.0..0.0);
            let tau = rng.gen_range(1.0f64..4.0).round();
            let d = rng.gen_range(2.0..8.0);
            let sim = spacing_recursion(s0, v0, u, tau, d, 6);
            let closed = spacing_closed_forms(s0, v0, u, tau, d);
            for n in 0..=6 {
                assert_relative_eq!(sim[n], closed[n], epsilon = 1e-9, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn recursion_minimum_at_five_epochs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v0 = rng.gen_range(5.0..33.0);
            let tau = rng.gen_range(1.0f64..4.0).round();
            let d = rng.gen_range(2.0..8.0);
            let s0 = v0 * tau + d;
            let sim = spacing_recursion(s0, v0, -6.0, tau, d, 6);
            let min = sim.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                sim[5] <= min + 1e-9,
                "minimum not at n = 5: {sim:?}"
            );
        }
    }

    #[test]
    fn recursion_equilibrium_zero_control() {
        let (s0, v0, tau, d) = (25.0, 20.0, 1.0, 5.0);
        let sim = spacing_recursion(v0 * tau + d, v0, 0.0, tau, d, 6);
        assert_relative_eq!(sim[5], v0 * tau + d, epsilon = 1e-9);
        assert_relative_eq!(sim[6], s0, epsilon = 1e-9);
    }

    #[test]
    fn recursion_negative_spacing_demonstrates_bound() {
        let sim = spacing_recursion(25.0, 20.0, -6.0, 1.0, 5.0, 6);
        assert_relative_eq!(sim[5], -11.0, epsilon = 1e-9);
    }

    #[test]
    fn theorem_check_examples() {
        let geometry = LaneGeometry::uniform(3, 3.6);
        let classes = vec![VehicleClass::SubjectCav, VehicleClass::SubjectCav, VehicleClass::Hdv];
        let mut params = vec![VehicleParams::default(); 3];
        params[2].reaction_time = 2.0;
        let states = vec![
            Kinematics2D { x: 150.0, y: 1.8, vx: 20.0, vy: 0.0 },
            Kinematics2D { x: 100.0, y: 5.4, vx: 20.0, vy: 0.0 },
            Kinematics2D { x: 60.0, y: 1.8, vx: 15.0, vy: 0.0 },
        ];
        let speeds: Vec<f64> = states.iter().map(|s| s.vx).collect();
        let snapshot = evaluate_snapshot(&states, &geometry, 0);
        let lim = LimitSet::default();
        let inputs = GuardInputs {
            classes: &classes,
            params: &params,
            speeds: &speeds,
            snapshot: &snapshot,
            subjects: [0, 1],
            prev_subject_speeds: [20.0, 20.0],
            limits: &lim,
            delta: 1.0,
            prior_feasible: true,
        };
        let report = check_theorem1(&inputs);
        assert!(report.overall, "{report:?}");

        // An HDV reaction time beyond the bound fails condition (iii). With
        // the 5 m/s speed floor the bound is 6.59 s, so 7.0 s violates it.
        let slow_limits = LimitSet { v_min: 5.0, ..lim };
        let mut slow_params = params.clone();
        slow_params[2].reaction_time = 7.0;
        let inputs = GuardInputs { params: &slow_params, limits: &slow_limits, ..inputs };
        let report = check_theorem1(&inputs);
        assert!(!report.overall);
        assert!(report.hdv_reaction.iter().any(|&(_, tau, _, ok)| tau == 7.0 && !ok));
    }

    #[test]
    fn theorem_check_cutin_violation() {
        let geometry = LaneGeometry::uniform(3, 3.6);
        let classes = vec![VehicleClass::SubjectCav, VehicleClass::SubjectCav, VehicleClass::NeighborCav];
        let mut params = vec![VehicleParams::default(); 3];
        params[2].cacc = Some(Default::default());
        // The CACC vehicle follows subject 0, moving 12 m/s faster.
        let states = vec![
            Kinematics2D { x: 150.0, y: 1.8, vx: 18.0, vy: 0.0 },
            Kinematics2D { x: 300.0, y: 5.4, vx: 20.0, vy: 0.0 },
            Kinematics2D { x: 100.0, y: 1.8, vx: 30.0, vy: 0.0 },
        ];
        let speeds: Vec<f64> = states.iter().map(|s| s.vx).collect();
        let snapshot = evaluate_snapshot(&states, &geometry, 0);
        let lim = LimitSet::default();
        let inputs = GuardInputs {
            classes: &classes,
            params: &params,
            speeds: &speeds,
            snapshot: &snapshot,
            subjects: [0, 1],
            prev_subject_speeds: [18.0, 20.0],
            limits: &lim,
            delta: 1.0,
            prior_feasible: true,
        };
        let report = check_theorem1(&inputs);
        assert!(!report.overall);
        let (_, _, threshold, ok) = report.ncav_cutin[0];
        assert!(!ok);
        assert!(threshold.unwrap() > -12.0);
    }

    #[test]
    fn random_recursion_matches_step_simulation() {
        // Cross-check: two equivalent epoch formulations agree exactly.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s0 = rng.gen_range(10.0..60.0);
            let v0 = rng.gen_range(8.0..30.0);
            let u = rng.gen_range(-6.0..8.0);
            let tau = rng.gen_range(1.0f64..3.0).round();
            let d = rng.gen_range(2.0..8.0);
            let sim = spacing_recursion(s0, v0, u, tau, d, 8);
            // Direct two-term recursion: s(n) = s(n-1) - s(n-2)
            //   + 1/2 u tau^2 + v(n-1) tau + d.
            let mut s = vec![sim[0], sim[1]];
            for n in 2..=8 {
                let v_lead_prev = v0 + (n as f64 - 1.0) * tau * u;
                let val = s[n - 1] - s[n - 2] + 0.5 * u * tau * tau + v_lead_prev * tau + d;
                s.push(val);
            }
            for n in 0..=8 {
                assert_relative_eq!(sim[n], s[n], epsilon = 1e-7, max_relative = 1e-9);
            }
        }
    }
}
