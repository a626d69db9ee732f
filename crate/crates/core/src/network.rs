//! Network data model, incidence matrix and JSON ingestion.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_R_EPSILON: f64 = 3.08;

/// Graph plus per-node and per-line physical parameters.
///
/// Nodes are stored supply-first. `node_ids` keeps the identifiers of the
/// source file so reports can name lines the way the file did.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    pub node_ids: Vec<u32>,
    /// Zero-based endpoints `(i_k, j_k)`, in file order.
    pub lines: Vec<(usize, usize)>,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub noise: Vec<f64>,
    pub capacity: Vec<f64>,
    pub supply_count: usize,
}

impl PowerNetwork {
    pub fn node_count(&self) -> usize {
        self.inertia.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// File identifiers of the endpoints of line `k`.
    pub fn line_label(&self, k: usize) -> (u32, u32) {
        let (i, j) = self.lines[k];
        (self.node_ids[i], self.node_ids[j])
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    /// Neighbour lists as `(node, line index)`, in line order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (k, &(i, j)) in self.lines.iter().enumerate() {
            adj[i].push((j, k));
            adj[j].push((i, k));
        }
        adj
    }

    pub fn is_complete(&self) -> bool {
        let n = self.node_count();
        self.line_count() == n * (n - 1) / 2
    }

    /// True when the graph has no cycles.
    pub fn is_tree(&self) -> bool {
        self.line_count() + 1 == self.node_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    pub network: PowerNetwork,
    pub p_max: Vec<f64>,
    pub demand: Vec<f64>,
    pub r_epsilon: f64,
}

impl DispatchProblem {
    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    /// Number of free decision variables, n⁺ − 1.
    pub fn decision_dim(&self) -> usize {
        self.network.supply_count - 1
    }

    /// Full injection vector (supply positive, demand negative) for a decision vector.
    pub fn injections(&self, p_s: &[f64]) -> Vec<f64> {
        let mut p = self.supply_vector(p_s);
        p.extend(self.demand.iter().map(|d| -d));
        p
    }

    /// Supply vector of length n⁺; the last entry closes the power balance.
    pub fn supply_vector(&self, p_s: &[f64]) -> Vec<f64> {
        let mut p = p_s.to_vec();
        p.push(self.total_demand() - p_s.iter().sum::<f64>());
        p
    }

    pub fn validate(&self) -> Result<()> {
        let net = &self.network;
        let n = net.node_count();
        let check_len = |name: &str, len: usize, want: usize| {
            if len != want {
                Err(Error::Validation(format!("{name} has length {len}, expected {want}")))
            } else {
                Ok(())
            }
        };
        check_len("node_ids", net.node_ids.len(), n)?;
        check_len("damping", net.damping.len(), n)?;
        check_len("noise", net.noise.len(), n)?;
        check_len("capacity", net.capacity.len(), net.line_count())?;
        if net.supply_count == 0 || net.supply_count >= n {
            return Err(Error::Validation(
                "need at least one supply node and one demand node".into(),
            ));
        }
        check_len("p_max", self.p_max.len(), net.supply_count)?;
        check_len("demand", self.demand.len(), n - net.supply_count)?;
        for i in 0..n {
            let id = net.node_ids[i];
            if !(net.inertia[i].is_finite() && net.inertia[i] > 0.0) {
                return Err(Error::Validation(format!("node {id}: inertia must be positive")));
            }
            if !(net.damping[i].is_finite() && net.damping[i] >= 0.0) {
                return Err(Error::Validation(format!("node {id}: damping must be nonnegative")));
            }
            if !(net.noise[i].is_finite() && net.noise[i] >= 0.0) {
                return Err(Error::Validation(format!("node {id}: noise must be nonnegative")));
            }
        }
        let mut seen = HashSet::new();
        for (k, &(i, j)) in net.lines.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::Validation(format!("line {}: endpoint out of range", k + 1)));
            }
            if i == j {
                return Err(Error::Validation(format!("line {}: self loop", k + 1)));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                let (a, b) = net.line_label(k);
                return Err(Error::Validation(format!("duplicate line {a}-{b}")));
            }
            if !(net.capacity[k].is_finite() && net.capacity[k] > 0.0) {
                let (a, b) = net.line_label(k);
                return Err(Error::Validation(format!("line {a}-{b}: nonpositive capacity")));
            }
        }
        if !net.is_connected() {
            return Err(Error::Validation("graph is disconnected".into()));
        }
        if self.p_max.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Validation("p_max must be finite and nonnegative".into()));
        }
        if self.demand.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Validation("demand must be strictly positive".into()));
        }
        let supply: f64 = self.p_max.iter().sum();
        let demand = self.total_demand();
        if supply < demand {
            return Err(Error::Validation(format!(
                "total p_max {supply} is below total demand {demand}"
            )));
        }
        if !(self.r_epsilon.is_finite() && self.r_epsilon > 0.0) {
            return Err(Error::Validation("r_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Signed node-by-line incidence matrix.
pub fn incidence_matrix(net: &PowerNetwork) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(net.node_count(), net.line_count());
    for (k, &(i, j)) in net.lines.iter().enumerate() {
        b[(i, k)] = 1.0;
        b[(j, k)] = -1.0;
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Supply,
    Demand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u32,
    pub role: Role,
    pub inertia: f64,
    pub damping: f64,
    pub noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: u32,
    pub to: u32,
    pub capacity: f64,
}

/// On-disk network document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<NodeRecord>,
    pub lines: Vec<LineRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_epsilon: Option<f64>,
}

impl NetworkFile {
    pub fn from_problem(prob: &DispatchProblem) -> Self {
        let net = &prob.network;
        let np = net.supply_count;
        let nodes = (0..net.node_count())
            .map(|i| NodeRecord {
                id: net.node_ids[i],
                role: if i < np { Role::Supply } else { Role::Demand },
                inertia: net.inertia[i],
                damping: net.damping[i],
                noise: net.noise[i],
                p_max: (i < np).then(|| prob.p_max[i]),
                demand: (i >= np).then(|| prob.demand[i - np]),
            })
            .collect();
        let lines = net
            .lines
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let (from, to) = net.line_label(k);
                LineRecord { from, to, capacity: net.capacity[k] }
            })
            .collect();
        NetworkFile { nodes, lines, r_epsilon: Some(prob.r_epsilon) }
    }

    pub fn into_problem(self) -> Result<DispatchProblem> {
        let field = |f: String, m: &str| Error::Field { field: f, message: m.to_string() };
        let mut ids = HashSet::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id == 0 {
                return Err(field(format!("nodes[{idx}].id"), "ids are 1-based"));
            }
            if !ids.insert(node.id) {
                return Err(field(format!("nodes[{idx}].id"), "duplicate node id"));
            }
            match node.role {
                Role::Supply => {
                    if node.p_max.is_none() {
                        return Err(field(format!("nodes[{idx}].p_max"), "required for supply nodes"));
                    }
                    if node.demand.is_some() {
                        return Err(field(format!("nodes[{idx}].demand"), "not allowed on supply nodes"));
                    }
                }
                Role::Demand => {
                    if node.demand.is_none() {
                        return Err(field(format!("nodes[{idx}].demand"), "required for demand nodes"));
                    }
                    if node.p_max.is_some() {
                        return Err(field(format!("nodes[{idx}].p_max"), "not allowed on demand nodes"));
                    }
                }
            }
            for (name, value) in [
                ("inertia", node.inertia),
                ("damping", node.damping),
                ("noise", node.noise),
            ] {
                if !value.is_finite() {
                    return Err(field(format!("nodes[{idx}].{name}"), "must be finite"));
                }
            }
        }
        // supply first, relative order preserved
        let order: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].role == Role::Supply)
            .chain((0..self.nodes.len()).filter(|&i| self.nodes[i].role == Role::Demand))
            .collect();
        let position: HashMap<u32, usize> = order
            .iter()
            .enumerate()
            .map(|(pos, &i)| (self.nodes[i].id, pos))
            .collect();
        let mut lines = Vec::with_capacity(self.lines.len());
        let mut capacity = Vec::with_capacity(self.lines.len());
        for (k, line) in self.lines.iter().enumerate() {
            let from = *position
                .get(&line.from)
                .ok_or_else(|| field(format!("lines[{k}].from"), "unknown node id"))?;
            let to = *position
                .get(&line.to)
                .ok_or_else(|| field(format!("lines[{k}].to"), "unknown node id"))?;
            lines.push((from, to));
            capacity.push(line.capacity);
        }
        let nodes: Vec<&NodeRecord> = order.iter().map(|&i| &self.nodes[i]).collect();
        let supply_count = nodes.iter().filter(|n| n.role == Role::Supply).count();
        let prob = DispatchProblem {
            network: PowerNetwork {
                node_ids: nodes.iter().map(|n| n.id).collect(),
                lines,
                inertia: nodes.iter().map(|n| n.inertia).collect(),
                damping: nodes.iter().map(|n| n.damping).collect(),
                noise: nodes.iter().map(|n| n.noise).collect(),
                capacity,
                supply_count,
            },
            p_max: nodes.iter().filter_map(|n| n.p_max).collect(),
            demand: nodes.iter().filter_map(|n| n.demand).collect(),
            r_epsilon: self.r_epsilon.unwrap_or(DEFAULT_R_EPSILON),
        };
        prob.validate()?;
        Ok(prob)
    }
}

pub fn parse_network(text: &str) -> Result<DispatchProblem> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_problem()
}

pub fn load_network(path: impl AsRef<Path>) -> Result<DispatchProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text)
}

pub fn to_json(prob: &DispatchProblem) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_problem(prob)).expect("network serializes")
}
