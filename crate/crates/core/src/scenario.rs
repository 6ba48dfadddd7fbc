//! Domain types, parameter defaults and scenario validation.
//!
//! Everything downstream (relation logic, dynamics, the optimizer, the
//! closed-loop harness) consumes a [`ValidatedScenario`], which is immutable
//! after construction and safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::weights::WeightSettings;

/// Vehicle classification. Exactly two vehicles per scenario are subject
/// CAVs; the rest are uncontrolled neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    /// Subject CAV under synchronization control.
    SubjectCav,
    /// Neighbor CAV following a CACC scheme; predicted, not controlled.
    NeighborCav,
    /// Human-driven vehicle; predicted with Newell's car-following model.
    Hdv,
}

/// Planar kinematic state. Longitudinal x grows downstream, lateral y grows
/// across lanes. All SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics2D {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Acceleration command for one subject CAV, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput2D {
    pub ux: f64,
    pub uy: f64,
}

/// Gains of the first-order CACC follower model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaccParams {
    /// Gap-error gain (1/s^2).
    pub k1: f64,
    /// Speed-error gain (1/s).
    pub k2: f64,
    /// Desired time gap (s).
    pub time_gap: f64,
}

impl Default for CaccParams {
    fn default() -> Self {
        // Field-calibrated gains for commercially deployed CACC controllers.
        Self { k1: 0.01, k2: 1.6, time_gap: 0.6 }
    }
}

/// Per-vehicle physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Vehicle length plus standstill margin (m).
    pub length: f64,
    /// Reaction time (s). For HDVs this is rounded to an integer multiple of
    /// the control step during validation.
    pub reaction_time: f64,
    /// Minimum stopped spacing of the Newell model (m).
    pub newell_displacement: f64,
    /// CACC gains; present exactly for neighbor CAVs.
    pub cacc: Option<CaccParams>,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { length: 5.0, reaction_time: 1.0, newell_displacement: 5.0, cacc: None }
    }
}

/// Speed and acceleration envelopes shared by all vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSet {
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub vy_max: f64,
    pub ay_max: f64,
}

impl Default for LimitSet {
    fn default() -> Self {
        Self { v_min: 10.0, v_max: 33.33, a_min: -6.0, a_max: 8.0, vy_max: 1.5, ay_max: 1.0 }
    }
}

/// One lane band: lower exclusive, upper inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneBand {
    pub lower_y: f64,
    pub upper_y: f64,
}

/// Contiguous, disjoint lanes ordered by y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub lanes: Vec<LaneBand>,
}

impl LaneGeometry {
    /// Uniform lanes of `width` starting at y = 0.
    pub fn uniform(lane_count: usize, width: f64) -> Self {
        let lanes = (0..lane_count)
            .map(|l| LaneBand { lower_y: l as f64 * width, upper_y: (l + 1) as f64 * width })
            .collect();
        Self { lanes }
    }

    pub fn lane_count(&self) -> usize {
        self.lanes.len()
    }

    pub fn road_lower(&self) -> f64 {
        self.lanes.first().map(|b| b.lower_y).unwrap_or(0.0)
    }

    pub fn road_upper(&self) -> f64 {
        self.lanes.last().map(|b| b.upper_y).unwrap_or(0.0)
    }

    pub fn road_width(&self) -> f64 {
        self.road_upper() - self.road_lower()
    }

    /// Lane containing y, with the band lower bound exclusive and the upper
    /// bound inclusive. The bottom road edge belongs to the first lane.
    pub fn lane_of(&self, y: f64) -> Option<usize> {
        if self.lanes.is_empty() {
            return None;
        }
        if y < self.road_lower() || y > self.road_upper() {
            return None;
        }
        if y <= self.lanes[0].lower_y {
            // y == road_lower: membership would be empty under a strict
            // lower bound; assign the first lane.
            return Some(0);
        }
        self.lanes.iter().position(|b| b.lower_y < y && y <= b.upper_y)
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        let b = &self.lanes[lane];
        0.5 * (b.lower_y + b.upper_y)
    }
}

/// Macroscopic cell-transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtmParams {
    /// Cell capacity (veh/h).
    pub q_max: f64,
    /// Jam density (veh/m).
    pub k_jam: f64,
    /// Congestion wave speed (m/s).
    pub wave_speed: f64,
    /// Boundary inflow demand per lane (veh/h).
    pub inflow: f64,
    /// Initial per-cell flow per lane (veh/h).
    pub initial_flow: f64,
}

impl Default for CtmParams {
    fn default() -> Self {
        Self { q_max: 2000.0, k_jam: 0.12, wave_speed: 6.0, inflow: 0.0, initial_flow: 0.0 }
    }
}

/// Synchronization-complete tolerances and the phase fallback hysteresis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncTolerances {
    /// Spacing tolerance around the desired gap (m).
    pub spacing_tol: f64,
    /// Relative longitudinal speed tolerance (m/s).
    pub speed_tol: f64,
    /// Consecutive steps both tolerances must hold.
    pub hold_steps: usize,
    /// Consecutive steps without the following relation before q2 falls back
    /// to q1. Zero disables the fallback.
    pub fallback_steps: usize,
}

impl Default for SyncTolerances {
    fn default() -> Self {
        Self { spacing_tol: 2.0, speed_tol: 0.5, hold_steps: 3, fallback_steps: 2 }
    }
}

/// One roster entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: u64,
    pub class: VehicleClass,
    pub init: Kinematics2D,
    pub params: VehicleParams,
}

/// Full scenario description as parsed from an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: LaneGeometry,
    /// Roadway extent in x: [0, roadway_length].
    pub roadway_length: f64,
    pub vehicles: Vec<VehicleSpec>,
    pub limits: LimitSet,
    /// Control step (s).
    pub delta_t: f64,
    /// Prediction horizon (steps).
    pub horizon: usize,
    /// Cell length (m).
    pub cell_length: f64,
    pub ctm: CtmParams,
    /// Desired platoon spacing between the subjects (m).
    pub desired_spacing: f64,
    pub weights: WeightSettings,
    /// Monitoring/communication range around each subject (m).
    pub monitoring_range: f64,
    /// Big-M constant for indicator rows (m). Zero means "use the roadway
    /// length".
    pub big_m: f64,
    pub sync: SyncTolerances,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: LaneGeometry::uniform(3, 3.6),
            roadway_length: 800.0,
            vehicles: Vec::new(),
            limits: LimitSet::default(),
            delta_t: 1.0,
            horizon: 5,
            cell_length: 40.0,
            ctm: CtmParams::default(),
            desired_spacing: 20.0,
            weights: WeightSettings::default(),
            monitoring_range: 150.0,
            big_m: 0.0,
            sync: SyncTolerances::default(),
        }
    }
}

/// Controller phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// q1: the subjects are not yet in a car-following relation.
    CatchUp,
    /// q2: one subject immediately follows the other in the same lane.
    Platooning,
}

/// One invariant violation found during validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ValidationIssue(pub String);

/// Every violated invariant, in deterministic order.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ValidationErrors(pub Vec<ValidationIssue>);

impl std::fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenario validation failed with {} issue(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

/// An immutable scenario whose invariants have all been checked. HDV
/// reaction times are rounded to integer multiples of the control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScenario {
    config: ScenarioConfig,
    subjects: [usize; 2],
}

impl ValidatedScenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Roster indices of the two subject CAVs, in roster order.
    pub fn subject_indices(&self) -> [usize; 2] {
        self.subjects
    }

    pub fn vehicles(&self) -> &[VehicleSpec] {
        &self.config.vehicles
    }

    pub fn geometry(&self) -> &LaneGeometry {
        &self.config.geometry
    }

    pub fn limits(&self) -> &LimitSet {
        &self.config.limits
    }

    pub fn delta_t(&self) -> f64 {
        self.config.delta_t
    }

    pub fn big_m(&self) -> f64 {
        if self.config.big_m > 0.0 {
            self.config.big_m
        } else {
            self.config.roadway_length
        }
    }

    pub fn cell_count(&self) -> usize {
        (self.config.roadway_length / self.config.cell_length).ceil() as usize
    }

    /// Reaction delay of a vehicle in whole control steps.
    pub fn reaction_steps(&self, vehicle: usize) -> usize {
        let tau = self.config.vehicles[vehicle].params.reaction_time;
        (tau / self.config.delta_t).round().max(1.0) as usize
    }
}

/// Check every scenario invariant and normalize reaction times. Returns all
/// violations at once rather than stopping at the first.
pub fn validate_scenario(config: &ScenarioConfig) -> Result<ValidatedScenario, ValidationErrors> {
    let mut issues: Vec<ValidationIssue> = Vec::new();
    let mut issue = |msg: String| issues.push(ValidationIssue(msg));

    let lim = &config.limits;
    if !(lim.v_min < lim.v_max) {
        issue(format!("speed limits must satisfy v_min < v_max, got [{}, {}]", lim.v_min, lim.v_max));
    }
    if !(lim.a_min < 0.0 && lim.a_max > 0.0) {
        issue(format!("acceleration limits must satisfy a_min < 0 < a_max, got [{}, {}]", lim.a_min, lim.a_max));
    }
    if !(lim.vy_max > 0.0) {
        issue(format!("lateral speed bound must be positive, got {}", lim.vy_max));
    }
    if !(lim.ay_max > 0.0) {
        issue(format!("lateral acceleration bound must be positive, got {}", lim.ay_max));
    }
    if !(config.delta_t > 0.0) {
        issue(format!("control step must be positive, got {}", config.delta_t));
    }
    if config.horizon == 0 {
        issue("prediction horizon must be at least 1 step".to_string());
    }
    if config.cell_length < config.delta_t * lim.v_max {
        issue(format!(
            "CFL violated: cell length {} < delta*v_max = {}",
            config.cell_length,
            config.delta_t * lim.v_max
        ));
    }
    if !(config.roadway_length > 0.0) {
        issue(format!("roadway length must be positive, got {}", config.roadway_length));
    }
    if !(config.desired_spacing > 0.0) {
        issue(format!("desired spacing must be positive, got {}", config.desired_spacing));
    }
    if !(config.monitoring_range > 0.0) {
        issue(format!("monitoring range must be positive, got {}", config.monitoring_range));
    }
    if config.big_m < 0.0 {
        issue(format!("big-M constant must be nonnegative, got {}", config.big_m));
    }
    if !(config.ctm.q_max > 0.0 && config.ctm.k_jam > 0.0 && config.ctm.wave_speed > 0.0) {
        issue(format!(
            "CTM parameters must be positive: q_max={}, k_jam={}, wave_speed={}",
            config.ctm.q_max, config.ctm.k_jam, config.ctm.wave_speed
        ));
    }

    if config.geometry.lanes.is_empty() {
        issue("lane geometry is empty".to_string());
    }
    for (l, band) in config.geometry.lanes.iter().enumerate() {
        if !(band.upper_y > band.lower_y) {
            issue(format!("lane {} has non-positive width [{}, {}]", l + 1, band.lower_y, band.upper_y));
        }
        if l > 0 {
            let prev = &config.geometry.lanes[l - 1];
            if (band.lower_y - prev.upper_y).abs() > 1e-9 {
                issue(format!(
                    "lanes {} and {} are not contiguous: {} vs {}",
                    l, l + 1, prev.upper_y, band.lower_y
                ));
            }
        }
    }

    if let Err(e) = config.weights.check() {
        issue(e);
    }

    // Per-vehicle checks.
    let mut normalized = config.clone();
    let mut subjects: Vec<usize> = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (idx, v) in config.vehicles.iter().enumerate() {
        let tag = format!("vehicle {} (id {})", idx, v.id);
        if !seen_ids.insert(v.id) {
            issue(format!("{tag}: duplicate id"));
        }
        if v.class == VehicleClass::SubjectCav {
            subjects.push(idx);
        }
        if !v.init.x.is_finite() || !v.init.y.is_finite() || !v.init.vx.is_finite() || !v.init.vy.is_finite() {
            issue(format!("{tag}: non-finite initial state"));
            continue;
        }
        if v.init.x < 0.0 || v.init.x > config.roadway_length {
            issue(format!("{tag}: x = {} outside roadway [0, {}]", v.init.x, config.roadway_length));
        }
        if config.geometry.lane_of(v.init.y).is_none() {
            issue(format!("{tag}: y = {} outside lane bands", v.init.y));
        }
        if v.init.vx < lim.v_min - 1e-9 || v.init.vx > lim.v_max + 1e-9 {
            issue(format!("{tag}: vx = {} outside [{}, {}]", v.init.vx, lim.v_min, lim.v_max));
        }
        if v.init.vy.abs() > lim.vy_max + 1e-9 {
            issue(format!("{tag}: |vy| = {} exceeds bound {}", v.init.vy.abs(), lim.vy_max));
        }
        if !(v.params.length > 0.0) {
            issue(format!("{tag}: vehicle length must be positive, got {}", v.params.length));
        }
        if !(v.params.reaction_time > 0.0) {
            issue(format!("{tag}: reaction time must be positive, got {}", v.params.reaction_time));
        }
        if !(v.params.newell_displacement > 0.0) {
            issue(format!("{tag}: Newell displacement must be positive, got {}", v.params.newell_displacement));
        }
        match v.class {
            VehicleClass::NeighborCav => {
                if v.params.cacc.is_none() {
                    issue(format!("{tag}: neighbor CAV is missing CACC gains"));
                } else {
                    let c = v.params.cacc.unwrap();
                    if !(config.delta_t + c.k2 * c.time_gap > 0.0) {
                        issue(format!("{tag}: CACC gains give a degenerate recursion denominator"));
                    }
                }
            }
            _ => {
                if v.params.cacc.is_some() {
                    issue(format!("{tag}: CACC gains are only meaningful for neighbor CAVs"));
                }
            }
        }
        // HDV reaction time rounds to a whole (positive) number of steps.
        if v.class == VehicleClass::Hdv {
            let k = (v.params.reaction_time / config.delta_t).round();
            if k < 1.0 {
                issue(format!(
                    "{tag}: reaction time {} rounds to zero control steps (delta = {})",
                    v.params.reaction_time, config.delta_t
                ));
            } else {
                normalized.vehicles[idx].params.reaction_time = k * config.delta_t;
            }
        }
    }

    if subjects.len() != 2 {
        issue(format!("scenario must contain exactly 2 subject CAVs, found {}", subjects.len()));
    }

    // Initial safety gaps. Hard collision bound (follower vehicle length)
    // applies to every same-lane pair; the conservative speed-dependent gap
    // applies to subjects behind their immediate leader, since that
    // constraint must hold at t = 0 for the optimizer to start feasible.
    if lim.a_min < 0.0 {
        for (i, vi) in config.vehicles.iter().enumerate() {
            let li = config.geometry.lane_of(vi.init.y);
            for (j, vj) in config.vehicles.iter().enumerate() {
                if i == j {
                    continue;
                }
                let lj = config.geometry.lane_of(vj.init.y);
                if li.is_none() || li != lj {
                    continue;
                }
                // vj downstream of vi
                if vj.init.x > vi.init.x {
                    let gap = vj.init.x - vi.init.x;
                    if gap < vi.params.length - 1e-9 {
                        issue(format!(
                            "initial safety gap violated: vehicle id {} is {:.3} m behind id {} (< length {})",
                            vi.id, gap, vj.id, vi.params.length
                        ));
                    } else if vi.class == VehicleClass::SubjectCav {
                        // Only against the immediate leader.
                        let is_immediate = !config.vehicles.iter().enumerate().any(|(k, vk)| {
                            k != i
                                && k != j
                                && config.geometry.lane_of(vk.init.y) == li
                                && vk.init.x > vi.init.x
                                && vk.init.x < vj.init.x
                        });
                        let bound =
                            crate::micro::safety_gap(vi.init.vx, vi.params.length, vi.params.reaction_time, lim)
                                .unwrap_or(vi.params.length);
                        if is_immediate && gap < bound - 1e-9 {
                            issue(format!(
                                "initial safety gap violated: subject id {} needs {:.3} m behind id {}, has {:.3} m",
                                vi.id, bound, vj.id, gap
                            ));
                        }
                    }
                }
            }
        }
    }

    if issues.is_empty() {
        Ok(ValidatedScenario { config: normalized, subjects: [subjects[0], subjects[1]] })
    } else {
        Err(ValidationErrors(issues))
    }
}

/// Initial controller phase: platooning iff one subject immediately follows
/// the other in the same lane at t = 0.
pub fn initial_phase(scenario: &ValidatedScenario) -> Phase {
    let states: Vec<Kinematics2D> = scenario.vehicles().iter().map(|v| v.init).collect();
    let snapshot = crate::relations::evaluate_snapshot(&states, scenario.geometry(), 0);
    let [a, b] = scenario.subject_indices();
    if snapshot.following_leader(a) == Some(b) || snapshot.following_leader(b) == Some(a) {
        Phase::Platooning
    } else {
        Phase::CatchUp
    }
}

/// Parse a scenario file (TOML, schema documented in `docs/scenario-format.md`).
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, String> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| format!("scenario parse error: {e}"))?;
    Ok(file.into_config())
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario file {}: {e}", path.display()))?;
    parse_scenario_str(&text)
}

pub fn write_scenario(config: &ScenarioConfig, path: &std::path::Path) -> Result<(), String> {
    let file = ScenarioFile::from_config(config);
    let text = toml::to_string_pretty(&file).map_err(|e| format!("scenario serialize error: {e}"))?;
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

// --- file schema -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RoadSection {
    lane_width: f64,
    lane_count: usize,
    length: f64,
    cell_length: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimeSection {
    delta: f64,
    horizon: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ControlSection {
    desired_spacing: f64,
    monitoring_range: f64,
    #[serde(default)]
    big_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct VehicleEntry {
    id: u64,
    class: VehicleClass,
    x: f64,
    y: f64,
    vx: f64,
    #[serde(default)]
    vy: f64,
    #[serde(default = "default_length")]
    length: f64,
    #[serde(default = "default_reaction")]
    reaction_time: f64,
    #[serde(default = "default_displacement")]
    newell_displacement: f64,
    #[serde(default)]
    k1: Option<f64>,
    #[serde(default)]
    k2: Option<f64>,
    #[serde(default)]
    time_gap: Option<f64>,
}

fn default_length() -> f64 {
    5.0
}
fn default_reaction() -> f64 {
    1.0
}
fn default_displacement() -> f64 {
    5.0
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    road: RoadSection,
    time: TimeSection,
    #[serde(default)]
    limits: Option<LimitSet>,
    #[serde(default)]
    ctm: Option<CtmParams>,
    control: ControlSection,
    #[serde(default)]
    weights: Option<WeightSettings>,
    #[serde(default)]
    sync: Option<SyncTolerances>,
    #[serde(rename = "vehicle")]
    vehicles: Vec<VehicleEntry>,
}

impl ScenarioFile {
    fn into_config(self) -> ScenarioConfig {
        let vehicles = self
            .vehicles
            .into_iter()
            .map(|v| {
                let cacc = match v.class {
                    VehicleClass::NeighborCav => Some(CaccParams {
                        k1: v.k1.unwrap_or(0.01),
                        k2: v.k2.unwrap_or(1.6),
                        time_gap: v.time_gap.unwrap_or(0.6),
                    }),
                    _ => None,
                };
                VehicleSpec {
                    id: v.id,
                    class: v.class,
                    init: Kinematics2D { x: v.x, y: v.y, vx: v.vx, vy: v.vy },
                    params: VehicleParams {
                        length: v.length,
                        reaction_time: v.reaction_time,
                        newell_displacement: v.newell_displacement,
                        cacc,
                    },
                }
            })
            .collect();
        ScenarioConfig {
            geometry: LaneGeometry::uniform(self.road.lane_count, self.road.lane_width),
            roadway_length: self.road.length,
            vehicles,
            limits: self.limits.unwrap_or_default(),
            delta_t: self.time.delta,
            horizon: self.time.horizon,
            cell_length: self.road.cell_length,
            ctm: self.ctm.unwrap_or_default(),
            desired_spacing: self.control.desired_spacing,
            weights: self.weights.unwrap_or_default(),
            monitoring_range: self.control.monitoring_range,
            big_m: self.control.big_m,
            sync: self.sync.unwrap_or_default(),
        }
    }

    fn from_config(config: &ScenarioConfig) -> Self {
        let lane_width = config
            .geometry
            .lanes
            .first()
            .map(|b| b.upper_y - b.lower_y)
            .unwrap_or(3.6);
        Self {
            road: RoadSection {
                lane_width,
                lane_count: config.geometry.lane_count(),
                length: config.roadway_length,
                cell_length: config.cell_length,
            },
            time: TimeSection { delta: config.delta_t, horizon: config.horizon },
            limits: Some(config.limits),
            ctm: Some(config.ctm),
            control: ControlSection {
                desired_spacing: config.desired_spacing,
                monitoring_range: config.monitoring_range,
                big_m: config.big_m,
            },
            weights: Some(config.weights.clone()),
            sync: Some(config.sync),
            vehicles: config
                .vehicles
                .iter()
                .map(|v| VehicleEntry {
                    id: v.id,
                    class: v.class,
                    x: v.init.x,
                    y: v.init.y,
                    vx: v.init.vx,
                    vy: v.init.vy,
                    length: v.params.length,
                    reaction_time: v.params.reaction_time,
                    newell_displacement: v.params.newell_displacement,
                    k1: v.params.cacc.map(|c| c.k1),
                    k2: v.params.cacc.map(|c| c.k2),
                    time_gap: v.params.cacc.map(|c| c.time_gap),
                })
                .collect(),
        }
    }
}
