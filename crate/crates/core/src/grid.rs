//! Transmission network model and DC shift-factor (PTDF) matrices.
//!
//! Line flows are linear in nodal injections under the DC approximation:
//! `flow = Hg * g - Hd * d`, where the columns of `Hg` and `Hd` are the PTDF
//! columns of the generator and load buses. The slack bus absorbs any
//! imbalance and has an all-zero PTDF column.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("network is disconnected: bus {0} cannot be reached from the slack bus")]
    DisconnectedNetwork(usize),
    #[error("singular susceptance matrix: line {0} has zero or non-finite reactance")]
    SingularSusceptance(usize),
    #[error("no slack bus designated")]
    NoSlack,
    #[error("multiple slack buses designated: {0:?}")]
    MultipleSlack(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bus reference {bus} in {context}")]
    InvalidBus { bus: usize, context: String },
    #[error("bus ids must be 0..n-1 in order; found id {found} at position {position}")]
    NonContiguousBusIds { position: usize, found: usize },
    #[error("invalid line {index}: {reason}")]
    InvalidLine { index: usize, reason: String },
    #[error("invalid generator {index}: {reason}")]
    InvalidGenerator { index: usize, reason: String },
    #[error("invalid load weights: {0}")]
    InvalidLoadWeights(String),
    #[error("failed to read network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed network file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub is_slack: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance, per unit.
    pub reactance: f64,
    /// Thermal limit, MW.
    pub capacity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Linear cost slope, $/MWh.
    pub marginal_cost: f64,
    /// Upper output limit, MW.
    pub capacity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSite {
    pub bus: usize,
    /// Share of total system demand drawn at this bus.
    pub weight: f64,
}

/// A validated network together with its generator and load shift factors.
///
/// Immutable once built.
#[derive(Clone, Debug)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    loads: Vec<LoadSite>,
    slack: usize,
    ptdf: DMatrix<f64>,
    hg: DMatrix<f64>,
    hd: DMatrix<f64>,
}

/// Builds a network and its shift-factor matrices.
pub fn build_network(
    buses: Vec<Bus>,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    loads: Vec<LoadSite>,
) -> Result<Network, GridError> {
    for (position, bus) in buses.iter().enumerate() {
        if bus.id != position {
            return Err(GridError::NonContiguousBusIds {
                position,
                found: bus.id,
            });
        }
    }
    let slacks: Vec<usize> = buses.iter().filter(|b| b.is_slack).map(|b| b.id).collect();
    let slack = match slacks.as_slice() {
        [] => return Err(GridError::NoSlack),
        [s] => *s,
        _ => return Err(GridError::MultipleSlack(slacks)),
    };
    let n_bus = buses.len();

    for (index, line) in lines.iter().enumerate() {
        for bus in [line.from_bus, line.to_bus] {
            if bus >= n_bus {
                return Err(GridError::InvalidBus {
                    bus,
                    context: format!("line {index}"),
                });
            }
        }
        if line.from_bus == line.to_bus {
            return Err(GridError::InvalidLine {
                index,
                reason: "from_bus equals to_bus".into(),
            });
        }
        if line.reactance == 0.0 || !line.reactance.is_finite() {
            return Err(GridError::SingularSusceptance(index));
        }
        if line.reactance < 0.0 {
            return Err(GridError::InvalidLine {
                index,
                reason: format!("negative reactance {}", line.reactance),
            });
        }
        if !(line.capacity > 0.0) {
            return Err(GridError::InvalidLine {
                index,
                reason: format!("capacity must be positive, got {}", line.capacity),
            });
        }
    }
    for (index, gen) in generators.iter().enumerate() {
        if gen.bus >= n_bus {
            return Err(GridError::InvalidBus {
                bus: gen.bus,
                context: format!("generator {index}"),
            });
        }
        if !(gen.capacity >= 0.0) || !gen.capacity.is_finite() {
            return Err(GridError::InvalidGenerator {
                index,
                reason: format!("capacity must be finite and non-negative, got {}", gen.capacity),
            });
        }
        if !gen.marginal_cost.is_finite() {
            return Err(GridError::InvalidGenerator {
                index,
                reason: "marginal cost must be finite".into(),
            });
        }
    }
    let mut weight_sum = 0.0;
    for (index, load) in loads.iter().enumerate() {
        if load.bus >= n_bus {
            return Err(GridError::InvalidBus {
                bus: load.bus,
                context: format!("load {index}"),
            });
        }
        if !(load.weight >= 0.0) {
            return Err(GridError::InvalidLoadWeights(format!(
                "load {index} has weight {}",
                load.weight
            )));
        }
        weight_sum += load.weight;
    }
    if !loads.is_empty() && (weight_sum - 1.0).abs() > 1e-12 {
        return Err(GridError::InvalidLoadWeights(format!(
            "weights sum to {weight_sum}, expected 1"
        )));
    }

    check_connected(n_bus, &lines, slack)?;
    let ptdf = compute_ptdf(n_bus, &lines, slack)?;

    let n_lines = lines.len();
    let hg = DMatrix::from_fn(n_lines, generators.len(), |l, i| ptdf[(l, generators[i].bus)]);
    let hd = DMatrix::from_fn(n_lines, loads.len(), |l, j| ptdf[(l, loads[j].bus)]);

    Ok(Network {
        buses,
        lines,
        generators,
        loads,
        slack,
        ptdf,
        hg,
        hd,
    })
}

fn check_connected(n_bus: usize, lines: &[Line], slack: usize) -> Result<(), GridError> {
    let mut adjacency = vec![Vec::new(); n_bus];
    for line in lines {
        adjacency[line.from_bus].push(line.to_bus);
        adjacency[line.to_bus].push(line.from_bus);
    }
    let mut seen = vec![false; n_bus];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(bus) = queue.pop_front() {
        for &next in &adjacency[bus] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(bus) => Err(GridError::DisconnectedNetwork(bus)),
        None => Ok(()),
    }
}

/// Line x bus PTDF matrix for injections withdrawn at the slack bus.
fn compute_ptdf(n_bus: usize, lines: &[Line], slack: usize) -> Result<DMatrix<f64>, GridError> {
    let reduced = |bus: usize| -> Option<usize> {
        match bus.cmp(&slack) {
            std::cmp::Ordering::Less => Some(bus),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(bus - 1),
        }
    };
    let n_red = n_bus - 1;
    let mut ptdf = DMatrix::zeros(lines.len(), n_bus);
    if n_red == 0 {
        return Ok(ptdf);
    }

    let mut b_red = DMatrix::<f64>::zeros(n_red, n_red);
    for line in lines {
        let y = 1.0 / line.reactance;
        let (f, t) = (reduced(line.from_bus), reduced(line.to_bus));
        if let Some(f) = f {
            b_red[(f, f)] += y;
        }
        if let Some(t) = t {
            b_red[(t, t)] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b_red[(f, t)] -= y;
            b_red[(t, f)] -= y;
        }
    }
    let lu = b_red.lu();
    // Connectivity was checked, so singularity here means degenerate reactances.
    let inv = lu
        .try_inverse()
        .ok_or(GridError::SingularSusceptance(0))?;

    for (l, line) in lines.iter().enumerate() {
        for bus in 0..n_bus {
            let Some(k) = reduced(bus) else { continue };
            let theta_from = reduced(line.from_bus).map_or(0.0, |f| inv[(f, k)]);
            let theta_to = reduced(line.to_bus).map_or(0.0, |t| inv[(t, k)]);
            ptdf[(l, bus)] = (theta_from - theta_to) / line.reactance;
        }
    }
    Ok(ptdf)
}

impl Network {
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn loads(&self) -> &[LoadSite] {
        &self.loads
    }

    pub fn slack_bus(&self) -> usize {
        self.slack
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    /// Line x generator shift factors.
    pub fn hg(&self) -> &DMatrix<f64> {
        &self.hg
    }

    /// Line x load shift factors.
    pub fn hd(&self) -> &DMatrix<f64> {
        &self.hd
    }

    /// Line x bus shift factors (injection at bus, withdrawal at slack).
    pub fn ptdf(&self) -> &DMatrix<f64> {
        &self.ptdf
    }

    /// Flow on `line` caused by moving one MW from bus `from` to bus `to`.
    pub fn transfer_factor(&self, line: usize, from: usize, to: usize) -> f64 {
        self.ptdf[(line, from)] - self.ptdf[(line, to)]
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.capacity).sum()
    }

    pub fn max_marginal_cost(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.marginal_cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Splits a system-wide demand across load sites by their weights.
    pub fn nodal_demand(&self, total: f64) -> Vec<f64> {
        self.loads.iter().map(|l| l.weight * total).collect()
    }

    /// Rebuilds the same network with a different slack bus.
    pub fn with_slack(&self, slack: usize) -> Result<Network, GridError> {
        let buses = (0..self.buses.len())
            .map(|id| Bus {
                id,
                is_slack: id == slack,
            })
            .collect();
        build_network(
            buses,
            self.lines.clone(),
            self.generators.clone(),
            self.loads.clone(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Network, GridError> {
        let text = std::fs::read_to_string(path)?;
        Network::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Network, GridError> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.into_network()
    }

    pub fn to_file_format(&self) -> NetworkFile {
        NetworkFile {
            name: None,
            buses: self.buses.iter().map(|b| BusRecord { id: b.id }).collect(),
            slack_bus: self.slack,
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    from: l.from_bus,
                    to: l.to_bus,
                    reactance_pu: l.reactance,
                    capacity_mw: l.capacity,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    bus: g.bus,
                    marginal_cost: g.marginal_cost,
                    capacity_mw: g.capacity,
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|l| LoadRecord {
                    bus: l.bus,
                    weight: l.weight,
                })
                .collect(),
        }
    }
}

/// Computes `Hg * g - Hd * d`.
pub fn line_flow(net: &Network, g: &[f64], d: &[f64]) -> Result<Vec<f64>, GridError> {
    if g.len() != net.n_generators() {
        return Err(GridError::DimensionMismatch {
            expected: net.n_generators(),
            got: g.len(),
        });
    }
    if d.len() != net.n_loads() {
        return Err(GridError::DimensionMismatch {
            expected: net.n_loads(),
            got: d.len(),
        });
    }
    let flows = &net.hg * DVector::from_column_slice(g) - &net.hd * DVector::from_column_slice(d);
    Ok(flows.iter().copied().collect())
}

/// On-disk JSON layout of a network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub buses: Vec<BusRecord>,
    pub slack_bus: usize,
    pub lines: Vec<LineRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub loads: Vec<LoadRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: usize,
    pub to: usize,
    pub reactance_pu: f64,
    pub capacity_mw: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub bus: usize,
    pub marginal_cost: f64,
    pub capacity_mw: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoadRecord {
    pub bus: usize,
    pub weight: f64,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network, GridError> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                id: b.id,
                is_slack: b.id == self.slack_bus,
            })
            .collect::<Vec<_>>();
        if self.slack_bus >= buses.len() {
            return Err(GridError::InvalidBus {
                bus: self.slack_bus,
                context: "slack_bus".into(),
            });
        }
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                from_bus: l.from,
                to_bus: l.to,
                reactance: l.reactance_pu,
                capacity: l.capacity_mw,
            })
            .collect();
        let generators = self
            .generators
            .iter()
            .map(|g| Generator {
                bus: g.bus,
                marginal_cost: g.marginal_cost,
                capacity: g.capacity_mw,
            })
            .collect();
        let loads = self
            .loads
            .iter()
            .map(|l| LoadSite {
                bus: l.bus,
                weight: l.weight,
            })
            .collect();
        build_network(buses, lines, generators, loads)
    }
}

/// Networks shipped with the crate.
pub mod builtin {
    use super::{GridError, Network};

    pub const FOUR_BUS_JSON: &str = include_str!("../networks/four_bus.json");
    pub const IEEE39_JSON: &str = include_str!("../networks/ieee39.json");

    /// Four-bus ring with three generators (40/50/60 $/MWh) and one load.
    pub fn four_bus() -> Result<Network, GridError> {
        Network::from_json(FOUR_BUS_JSON)
    }

    /// IEEE 39-bus New England system, DC data, generators priced 30..48 $/MWh.
    pub fn ieee39() -> Result<Network, GridError> {
        Network::from_json(IEEE39_JSON)
    }
}
