use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::GenId;

pub type BusId = u32;
pub type BranchId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    pub from: BusId,
    pub to: BusId,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split equally between both ends.
    #[serde(default)]
    pub b: f64,
}

/// Classical machine: constant EMF `e` behind transient reactance `xd_prime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    /// Inertia coefficient in s^2/rad (p.u. power).
    pub m: f64,
    /// Damping in p.u. power per rad/s.
    #[serde(default)]
    pub d: f64,
    pub xd_prime: f64,
    /// Mechanical power. Ignored for the angle reference machine, whose
    /// input is fixed by the pre-fault equilibrium.
    #[serde(default)]
    pub pm: Option<f64>,
    pub e: f64,
}

/// Constant-impedance load, given as a shunt admittance `g + jb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub b: f64,
}

/// Ideal voltage source at a bus with fixed angle zero. It is emitted as a
/// trace with constant angle and zero speed so that it can take part in
/// generator pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteBus {
    pub id: GenId,
    pub bus: BusId,
    #[serde(default = "one")]
    pub voltage: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    pub buses: Vec<BusId>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub infinite_bus: Option<InfiniteBus>,
}

fn default_base_mva() -> f64 {
    100.0
}

fn default_frequency() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub bus: BusId,
    pub fault_time: f64,
    pub clear_time: f64,
    #[serde(default)]
    pub remove_branches: Vec<BranchId>,
    #[serde(default)]
    pub label: Option<String>,
}

/// Network topology selector for reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology<'a> {
    PreFault,
    /// Pre-fault branches plus a bolted-fault shunt at `bus`.
    FaultOn { bus: BusId },
    /// Pre-fault branches minus the removed ones.
    PostFault { removed: &'a [BranchId] },
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        let buses: BTreeSet<BusId> = self.buses.iter().copied().collect();
        if buses.len() != self.buses.len() {
            return Err(Error::Model("duplicate bus id".into()));
        }
        if !(self.frequency_hz > 0.0) || !(self.base_mva > 0.0) {
            return Err(Error::Model("frequency and base MVA must be positive".into()));
        }
        let mut branch_ids = BTreeSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id) {
                return Err(Error::Model(format!("duplicate branch id {}", br.id)));
            }
            for bus in [br.from, br.to] {
                if !buses.contains(&bus) {
                    return Err(Error::Model(format!("branch {} references unknown bus {bus}", br.id)));
                }
            }
            if br.from == br.to {
                return Err(Error::Model(format!("branch {} is a self loop", br.id)));
            }
            if !(br.r.hypot(br.x) > 0.0) || !br.r.is_finite() || !br.x.is_finite() || !br.b.is_finite() {
                return Err(Error::Model(format!("branch {} has zero or non-finite impedance", br.id)));
            }
        }
        let mut ids = BTreeSet::new();
        for g in &self.generators {
            if !ids.insert(g.id) {
                return Err(Error::Model(format!("duplicate generator id {}", g.id)));
            }
            if !buses.contains(&g.bus) {
                return Err(Error::Model(format!("generator {} references unknown bus {}", g.id, g.bus)));
            }
            if !(g.m > 0.0) || !g.m.is_finite() {
                return Err(Error::Model(format!("generator {} must have M > 0", g.id)));
            }
            if !(g.xd_prime > 0.0) || !(g.e > 0.0) || !g.d.is_finite() {
                return Err(Error::Model(format!("generator {} needs x'd > 0, E > 0 and finite D", g.id)));
            }
        }
        for load in &self.loads {
            if !buses.contains(&load.bus) {
                return Err(Error::Model(format!("load references unknown bus {}", load.bus)));
            }
            if !load.g.is_finite() || !load.b.is_finite() {
                return Err(Error::Model(format!("load at bus {} is not finite", load.bus)));
            }
        }
        match &self.infinite_bus {
            Some(inf) => {
                if !buses.contains(&inf.bus) {
                    return Err(Error::Model(format!("infinite bus references unknown bus {}", inf.bus)));
                }
                if ids.contains(&inf.id) {
                    return Err(Error::Model(format!("infinite bus id {} clashes with a generator", inf.id)));
                }
                if self.generators.iter().any(|g| g.bus == inf.bus) {
                    return Err(Error::Model("a generator cannot sit on the infinite bus".into()));
                }
                if !(inf.voltage > 0.0) {
                    return Err(Error::Model("infinite bus voltage must be positive".into()));
                }
                if self.generators.is_empty() {
                    return Err(Error::Model("at least one generator is required".into()));
                }
            }
            None => {
                if self.generators.len() < 2 {
                    return Err(Error::Model(
                        "at least two generators are required without an infinite bus".into(),
                    ));
                }
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            let is_reference = i == 0 && self.infinite_bus.is_none();
            if !is_reference && !g.pm.is_some_and(f64::is_finite) {
                return Err(Error::Model(format!("generator {} needs a mechanical power pm", g.id)));
            }
        }
        Ok(())
    }

    pub fn bus_index(&self) -> BTreeMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, &b)| (b, i)).collect()
    }

    /// Number of voltage sources kept by the reduction: generators plus the
    /// infinite bus when present.
    pub fn source_count(&self) -> usize {
        self.generators.len() + usize::from(self.infinite_bus.is_some())
    }

    pub fn active_branches<'a>(&'a self, topology: Topology<'a>) -> impl Iterator<Item = &'a Branch> + 'a {
        self.branches.iter().filter(move |br| match topology {
            Topology::PostFault { removed } => !removed.contains(&br.id),
            _ => true,
        })
    }

    /// Checks that every source bus lies in one connected component.
    pub fn check_connected(&self, topology: Topology<'_>) -> Result<()> {
        let index = self.bus_index();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for br in self.active_branches(topology) {
            let a = find(&mut parent, index[&br.from]);
            let b = find(&mut parent, index[&br.to]);
            parent[a] = b;
        }
        let mut source_buses: Vec<BusId> = self.generators.iter().map(|g| g.bus).collect();
        if let Some(inf) = &self.infinite_bus {
            source_buses.push(inf.bus);
        }
        let root = find(&mut parent, index[&source_buses[0]]);
        let stranded: Vec<BusId> = source_buses
            .iter()
            .copied()
            .filter(|b| find(&mut parent, index[b]) != root)
            .collect();
        if stranded.is_empty() {
            Ok(())
        } else {
            Err(Error::Topology(format!("source buses {stranded:?} are disconnected")))
        }
    }

    /// Trace ids in emission order: generators, then the infinite bus.
    pub fn source_ids(&self) -> Vec<GenId> {
        let mut ids: Vec<GenId> = self.generators.iter().map(|g| g.id).collect();
        if let Some(inf) = &self.infinite_bus {
            ids.push(inf.id);
        }
        ids
    }
}

impl FaultSpec {
    /// Zero-duration faults (`clear_time == fault_time`) are accepted and
    /// leave only the post-fault switching.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        if !(self.fault_time >= 0.0) || !self.clear_time.is_finite() {
            return Err(Error::Fault("fault time must be finite and non-negative".into()));
        }
        if self.clear_time < self.fault_time {
            return Err(Error::Fault(format!(
                "clearing time {} precedes fault time {}",
                self.clear_time, self.fault_time
            )));
        }
        if !model.buses.contains(&self.bus) {
            return Err(Error::Fault(format!("faulted bus {} does not exist", self.bus)));
        }
        for id in &self.remove_branches {
            if !model.branches.iter().any(|b| b.id == *id) {
                return Err(Error::Fault(format!("removed branch {id} does not exist")));
            }
        }
        model.check_connected(Topology::PostFault { removed: &self.remove_branches })
    }
}

/// A network case file: the model plus an optional default fault.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseFile {
    #[serde(flatten)]
    pub network: NetworkModel,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
}

impl CaseFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let case: CaseFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        case.network.validate()?;
        if let Some(f) = &case.fault {
            f.validate(&case.network)?;
        }
        Ok(case)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
