//! Transistor-level simulation of spiking neuron circuits with aging and
//! process variability.

pub mod aging;
pub mod analysis;
pub mod devices;
pub mod error;
pub mod netlist;
pub mod solver;
pub mod units;
pub mod variability;

pub use devices::{MosfetParams, Polarity};
pub use error::{AnalysisError, NetlistError, SolverError};
pub use netlist::{
    apply_delta_vth, build_ah, build_vif, parse_netlist, AhParams, CircuitSpec, DeltaVthMap,
    Netlist, NetlistBuilder, NodeId, VifParams,
};
pub use solver::{
    dc_operating_point, kcl_residual, transient, transient_from, transient_observed, CircuitState,
    Companion, Control, InitialState, Integrator, SolverStats, StepObserver, StepView,
    TransientConfig, Waveform, WaveformRecorder,
};
pub use variability::{
    probit_series, run_monte_carlo, sample_vth_offsets, McConfig, McResult, MismatchParams,
};
