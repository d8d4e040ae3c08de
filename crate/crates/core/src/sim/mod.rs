//! Classical multi-machine transient simulator.

pub mod dynamics;
pub mod network;
pub mod oracle;
pub mod reduce;

pub use dynamics::{simulate, solve_equilibrium, Equilibrium, MachineState, SimOptions, SimulationOutput, SwingSystem};
pub use network::{Branch, BranchId, BusId, CaseFile, FaultSpec, Generator, InfiniteBus, Load, NetworkModel, Topology};
pub use oracle::{oracle_from_traces, stability_oracle, OracleVerdict};
pub use reduce::{augmented_admittance, reduce_network, CMatrix, ReducedSystem, FAULT_SHUNT};
