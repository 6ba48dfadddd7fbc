//! Per-lane cell-transmission-model propagation, coupled to tracked
//! vehicles through per-cell membership counts.
//!
//! Flow state is carried in veh/h; a cell's vehicle content is
//! `flow * delta / 3600` plus its tracked count, which is what the density
//! coupling below encodes.

use crate::scenario::CtmParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MacroError {
    #[error("cell {cell} flow became negative ({flow}); CFL or coupling bug")]
    NegativeFlow { cell: usize, flow: f64 },
}

/// Cell-transmission state of one lane.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLane {
    pub cell_length: f64,
    pub q_max: f64,
    pub k_jam: f64,
    pub wave_speed: f64,
    /// Aggregated flow per cell (veh/h).
    pub flow: Vec<f64>,
    /// Tracked-vehicle count per cell.
    pub tracked: Vec<f64>,
}

/// Realized flow quantities for one propagation step.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStep {
    /// Density per cell at the start of the step (veh/m).
    pub density: Vec<f64>,
    /// Sending bound per cell (veh/h).
    pub sending: Vec<f64>,
    /// Receiving bound per cell (veh/h).
    pub receiving: Vec<f64>,
    /// Realized entering flow; index c is the inflow into cell c and the
    /// trailing entry is the outflow across the downstream boundary.
    pub entering: Vec<f64>,
}

impl CellLane {
    pub fn new(n_cells: usize, params: &CtmParams, cell_length: f64) -> Self {
        Self {
            cell_length,
            q_max: params.q_max,
            k_jam: params.k_jam,
            wave_speed: params.wave_speed,
            flow: vec![params.initial_flow; n_cells],
            tracked: vec![0.0; n_cells],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.flow.len()
    }

    /// Vehicle content of the lane: flow-equivalent plus tracked.
    pub fn vehicle_content(&self, delta: f64) -> f64 {
        let flow_veh: f64 = self.flow.iter().map(|f| f * delta / 3600.0).sum();
        flow_veh + self.tracked.iter().sum::<f64>()
    }

    pub fn densities(&self, delta: f64) -> Vec<f64> {
        (0..self.n_cells())
            .map(|c| coupled_density(self.flow[c], self.tracked[c], delta, self.cell_length))
            .collect()
    }
}

/// Cell density from aggregated flow and tracked vehicles: the flow is
/// converted to a per-step vehicle count so the units come out in veh/m, and
/// the coupling reduces to standard CTM density when nothing is tracked.
pub fn coupled_density(flow: f64, tracked: f64, delta: f64, cell_length: f64) -> f64 {
    (flow * delta / 3600.0 + tracked) / cell_length
}

/// One synchronous CTM step for a lane. `inflow_demand` is the upstream
/// boundary demand; `downstream_receiving` is the boundary condition at the
/// downstream end (free outflow when `None`).
pub fn ctm_step(
    lane: &CellLane,
    inflow_demand: f64,
    downstream_receiving: Option<f64>,
    delta: f64,
) -> Result<(CellLane, FlowStep), MacroError> {
    let n = lane.n_cells();
    let density = lane.densities(delta);
    let sending: Vec<f64> = (0..n).map(|c| lane.flow[c].min(lane.q_max)).collect();
    let receiving: Vec<f64> = (0..n)
        .map(|c| (3600.0 * lane.wave_speed * (lane.k_jam - density[c])).max(0.0).min(lane.q_max))
        .collect();

    let mut entering = vec![0.0; n + 1];
    for c in 0..n {
        let upstream = if c == 0 { inflow_demand } else { sending[c - 1] };
        entering[c] = upstream.min(receiving[c]);
    }
    entering[n] = sending[n - 1].min(downstream_receiving.unwrap_or(lane.q_max));

    let mut next = lane.clone();
    for c in 0..n {
        next.flow[c] = lane.flow[c] + entering[c] - entering[c + 1];
        if next.flow[c] < -1e-9 {
            return Err(MacroError::NegativeFlow { cell: c, flow: next.flow[c] });
        }
        next.flow[c] = next.flow[c].max(0.0);
    }
    Ok((next, FlowStep { density, sending, receiving, entering }))
}
