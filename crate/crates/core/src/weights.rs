//! Optimality losses and the adaptive weighting strategy, plus the fixed
//! comparison strategies S1/S2/S3.

use serde::{Deserialize, Serialize};

use crate::scenario::{LaneGeometry, Phase};

/// Scenario-level weighting settings. The per-solve [`WeightConfig`] is
/// derived from these each control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSettings {
    /// Control-smoothness weight, constant across strategies.
    pub q_u: f64,
    /// Speed-harmonization weight, constant across strategies.
    pub q_v: f64,
    /// Upstream-flow weight, constant across strategies.
    pub q_y: f64,
    /// Speed-deviation weight used while catching up.
    pub q_w_catchup: f64,
    /// Speed-deviation weight used while platooning.
    pub q_w_platoon: f64,
    /// Adaptive tuning level, applied to both subjects.
    pub alpha: f64,
    /// Optional distinct tuning level for the second subject.
    #[serde(default)]
    pub alpha2: Option<f64>,
    /// Upper clamp for the loss-ratio scaling.
    pub xi_max: f64,
}

impl Default for WeightSettings {
    fn default() -> Self {
        Self {
            q_u: 0.1,
            q_v: 0.1,
            q_y: 0.1,
            q_w_catchup: 0.40,
            q_w_platoon: 0.35,
            alpha: 1.0,
            alpha2: None,
            xi_max: 10.0,
        }
    }
}

impl WeightSettings {
    pub fn alphas(&self) -> [f64; 2] {
        [self.alpha, self.alpha2.unwrap_or(self.alpha)]
    }

    pub fn check(&self) -> Result<(), String> {
        let vals = [
            ("q_u", self.q_u),
            ("q_v", self.q_v),
            ("q_y", self.q_y),
            ("q_w_catchup", self.q_w_catchup),
            ("q_w_platoon", self.q_w_platoon),
            ("alpha", self.alpha),
        ];
        for (name, v) in vals {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("weight {name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.xi_max > 0.0) {
            return Err(format!("xi_max must be positive, got {}", self.xi_max));
        }
        Ok(())
    }
}

/// Objective weights for one optimizer invocation. Immutable for the whole
/// prediction horizon of that solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    pub q_u: f64,
    /// Per-subject speed-deviation weights.
    pub q_w: [f64; 2],
    pub q_y: f64,
    pub q_eta: f64,
    pub q_v: f64,
    pub q_z: f64,
    pub alpha: [f64; 2],
    pub xi_max: f64,
}

impl WeightConfig {
    pub fn check(&self) -> Result<(), String> {
        let vals = [
            ("q_u", self.q_u),
            ("q_w[0]", self.q_w[0]),
            ("q_w[1]", self.q_w[1]),
            ("q_y", self.q_y),
            ("q_eta", self.q_eta),
            ("q_v", self.q_v),
            ("q_z", self.q_z),
        ];
        for (name, v) in vals {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("weight {name} must be finite and nonnegative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Weighting strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Loss-ratio adaptive tuning of the synchronization weight.
    Adaptive,
    /// Balanced fixed weights.
    S1,
    /// Synchronization-dominant fixed weights.
    S2,
    /// Traffic-dominant fixed weights.
    S3,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adaptive" | "adp" => Ok(Strategy::Adaptive),
            "s1" | "s1-bal" => Ok(Strategy::S1),
            "s2" | "s2-syn" => Ok(Strategy::S2),
            "s3" | "s3-trf" => Ok(Strategy::S3),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Per-step loss and weight report, appended to the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub step: usize,
    pub phase: Phase,
    pub d_jw: [f64; 2],
    pub d_jeta: f64,
    pub d_jz: f64,
    pub xi: [f64; 2],
    pub q_eta: f64,
    pub q_z: f64,
}

/// Normalized loss of longitudinal progress: shortfall of the subject's
/// displacement since control start against the maximum-speed displacement.
/// Undefined at t = 0, where the harness uses the phase default weights.
pub fn loss_w(displacement: f64, t: usize, delta: f64, v_max: f64) -> Result<f64, String> {
    if t == 0 {
        return Err("displacement loss is undefined at t = 0".to_string());
    }
    let horizon = v_max * t as f64 * delta;
    Ok(((horizon - displacement) / horizon).clamp(0.0, 1.0))
}

/// Normalized lateral separation of the two subjects: lateral gap over the
/// full road width.
pub fn loss_eta(y1: f64, y2: f64, geometry: &LaneGeometry) -> f64 {
    (y1 - y2).abs() / geometry.road_width()
}

/// Normalized spacing deviation from the desired platoon gap. `x_follow` and
/// `x_lead` are the follower and leader longitudinal positions.
pub fn loss_z(x_follow: f64, x_lead: f64, desired_spacing: f64) -> f64 {
    (x_lead - x_follow - desired_spacing).abs() / desired_spacing
}

/// Scale factor for one subject: ratio of the synchronization loss to the
/// speed loss, clamped to [0, xi_max]. A zero speed loss maps to the clamp
/// value itself.
fn xi_scale(target_loss: f64, speed_loss: f64, xi_max: f64) -> f64 {
    if speed_loss <= 0.0 {
        xi_max
    } else {
        (target_loss / speed_loss).clamp(0.0, xi_max)
    }
}

/// Inputs to one adaptation step.
#[derive(Debug, Clone, Copy)]
pub struct StepLosses {
    pub d_jw: [f64; 2],
    pub d_jeta: f64,
    pub d_jz: f64,
}

/// Compute this step's weight configuration: in the catch-up phase the
/// following reward q_eta is retuned, in the platooning phase the spacing
/// weight q_z; everything else stays at its configured value.
pub fn adapt_weights(phase: Phase, losses: &StepLosses, settings: &WeightSettings) -> (WeightConfig, [f64; 2]) {
    let alphas = settings.alphas();
    let (target_loss, q_w) = match phase {
        Phase::CatchUp => (losses.d_jeta, settings.q_w_catchup),
        Phase::Platooning => (losses.d_jz, settings.q_w_platoon),
    };
    let xi = [
        xi_scale(target_loss, losses.d_jw[0], settings.xi_max),
        xi_scale(target_loss, losses.d_jw[1], settings.xi_max),
    ];
    let tuned: f64 = (0..2).map(|i| alphas[i] * q_w * xi[i]).sum();
    let config = WeightConfig {
        q_u: settings.q_u,
        q_w: [q_w, q_w],
        q_y: settings.q_y,
        q_eta: if phase == Phase::CatchUp { tuned } else { 0.0 },
        q_v: settings.q_v,
        q_z: if phase == Phase::Platooning { tuned } else { 0.0 },
        alpha: alphas,
        xi_max: settings.xi_max,
    };
    (config, xi)
}

/// Fixed weights for the named strategy and phase.
pub fn fixed_strategy(strategy: Strategy, phase: Phase, settings: &WeightSettings) -> WeightConfig {
    // (q_eta, q_w) while catching up; (q_z, q_w) while platooning.
    let (sync_weight, q_w) = match (strategy, phase) {
        (Strategy::S1, Phase::CatchUp) => (0.40, 0.40),
        (Strategy::S1, Phase::Platooning) => (0.35, 0.35),
        (Strategy::S2, Phase::CatchUp) => (0.40, 0.20),
        (Strategy::S2, Phase::Platooning) => (0.35, 0.15),
        (Strategy::S3, Phase::CatchUp) => (0.20, 0.40),
        (Strategy::S3, Phase::Platooning) => (0.15, 0.35),
        (Strategy::Adaptive, _) => panic!("the adaptive strategy has no fixed weights"),
    };
    WeightConfig {
        q_u: settings.q_u,
        q_w: [q_w, q_w],
        q_y: settings.q_y,
        q_eta: if phase == Phase::CatchUp { sync_weight } else { 0.0 },
        q_v: settings.q_v,
        q_z: if phase == Phase::Platooning { sync_weight } else { 0.0 },
        alpha: settings.alphas(),
        xi_max: settings.xi_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn settings() -> WeightSettings {
        WeightSettings::default()
    }

    #[test]
    fn loss_w_examples() {
        // 300 m of progress against a 333.3 m ceiling.
        let loss = loss_w(300.0, 10, 1.0, 33.33).unwrap();
        assert_relative_eq!(loss, (333.3 - 300.0) / 333.3, epsilon = 1e-12);
        assert_eq!(loss_w(33.33 * 10.0, 10, 1.0, 33.33).unwrap(), 0.0);
        assert_eq!(loss_w(0.0, 10, 1.0, 33.33).unwrap(), 1.0);
        assert!(loss_w(10.0, 0, 1.0, 33.33).is_err());
    }

    #[test]
    fn loss_eta_examples() {
        let g = LaneGeometry::uniform(3, 3.6);
        assert_eq!(loss_eta(5.0, 5.0, &g), 0.0);
        assert_relative_eq!(loss_eta(0.0, 10.8, &g), 1.0);
        assert_relative_eq!(loss_eta(1.8, 5.4, &g), 3.6 / 10.8, epsilon = 1e-12);
    }

    #[test]
    fn loss_z_examples() {
        assert_eq!(loss_z(80.0, 100.0, 20.0), 0.0);
        assert_eq!(loss_z(60.0, 100.0, 20.0), 1.0);
        assert_eq!(loss_z(100.0, 100.0, 20.0), 1.0);
    }

    #[test]
    fn adapt_weights_arithmetic() {
        let losses = StepLosses { d_jw: [0.4, 0.4], d_jeta: 0.2, d_jz: 0.0 };
        let (config, xi) = adapt_weights(Phase::CatchUp, &losses, &settings());
        assert_relative_eq!(xi[0], 0.5);
        assert_relative_eq!(config.q_eta, 0.4 * 0.5 * 2.0);
        assert_eq!(config.q_z, 0.0);
    }

    #[test]
    fn zero_speed_loss_maps_to_clamp() {
        let losses = StepLosses { d_jw: [0.0, 0.0], d_jeta: 0.2, d_jz: 0.0 };
        let (config, xi) = adapt_weights(Phase::CatchUp, &losses, &settings());
        assert_eq!(xi, [10.0, 10.0]);
        assert_relative_eq!(config.q_eta, 2.0 * 1.0 * 0.4 * 10.0);
    }

    #[test]
    fn zero_target_loss_gives_zero_weight() {
        let losses = StepLosses { d_jw: [0.3, 0.3], d_jeta: 0.0, d_jz: 0.0 };
        let (config, _) = adapt_weights(Phase::CatchUp, &losses, &settings());
        assert_eq!(config.q_eta, 0.0);
    }

    #[test]
    fn clamping_never_exceeds_bound() {
        for &(target, speed) in &[(1.0, 1e-12), (0.5, 0.001), (0.0, 0.0), (1e9, 1.0)] {
            let xi = xi_scale(target, speed, 10.0);
            assert!((0.0..=10.0).contains(&xi), "xi = {xi}");
        }
    }

    #[test]
    fn monotone_in_losses() {
        let s = settings();
        let base = adapt_weights(
            Phase::CatchUp,
            &StepLosses { d_jw: [0.4, 0.4], d_jeta: 0.2, d_jz: 0.0 },
            &s,
        )
        .0;
        let more_eta = adapt_weights(
            Phase::CatchUp,
            &StepLosses { d_jw: [0.4, 0.4], d_jeta: 0.3, d_jz: 0.0 },
            &s,
        )
        .0;
        let more_speed = adapt_weights(
            Phase::CatchUp,
            &StepLosses { d_jw: [0.6, 0.6], d_jeta: 0.2, d_jz: 0.0 },
            &s,
        )
        .0;
        assert!(more_eta.q_eta >= base.q_eta);
        assert!(more_speed.q_eta <= base.q_eta);
    }

    #[test]
    fn alpha_scale_covariance() {
        let mut s = settings();
        let losses = StepLosses { d_jw: [0.4, 0.4], d_jeta: 0.2, d_jz: 0.0 };
        let single = adapt_weights(Phase::CatchUp, &losses, &s).0;
        s.alpha = 2.0;
        let doubled = adapt_weights(Phase::CatchUp, &losses, &s).0;
        assert_relative_eq!(doubled.q_eta, 2.0 * single.q_eta);
    }

    #[test]
    fn strategy_table_values() {
        let s = settings();
        let w = fixed_strategy(Strategy::S2, Phase::CatchUp, &s);
        assert_eq!((w.q_eta, w.q_w[0]), (0.40, 0.20));
        let w = fixed_strategy(Strategy::S3, Phase::Platooning, &s);
        assert_eq!((w.q_z, w.q_w[0]), (0.15, 0.35));
        let w = fixed_strategy(Strategy::S1, Phase::CatchUp, &s);
        assert_eq!((w.q_eta, w.q_w[0]), (0.40, 0.40));
        assert_eq!(w.q_u, 0.1);
        assert_eq!(w.q_v, 0.1);
    }
}
