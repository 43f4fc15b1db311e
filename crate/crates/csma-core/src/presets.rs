//! Canonical topologies and parameter sets used by the bundled experiments
//! and the CLI's `reproduce` targets.

use crate::adaptive::{ControllerConfig, StepSchedule};
use crate::error::Result;
use crate::graph::ConflictGraph;
use crate::sim::SimConfig;
use crate::stationary::{LengthExponents, ProtocolParams};

/// The 7-link ad-hoc topology driving the convergence and short-term
/// fairness experiments.
///
/// Its maximal independent sets include {1,3,5}, {2,5,7}, {4,6}, {2,6} and
/// {1,3,6} (1-based), so the base rate vector below sits on a face spanned
/// by an even mix of those five sets.
pub fn adhoc7_graph() -> ConflictGraph {
    ConflictGraph::from_1based_edges(
        7,
        &[
            (1, 2),
            (2, 3),
            (1, 4),
            (2, 4),
            (3, 4),
            (3, 7),
            (4, 7),
            (5, 6),
            (6, 7),
        ],
    )
    .expect("static graph is valid")
}

/// Base arrival-rate direction for the 7-link topology: an even convex
/// combination of five maximal independent sets.
pub fn adhoc7_base_rates() -> Vec<f64> {
    vec![0.4, 0.4, 0.4, 0.2, 0.4, 0.6, 0.2]
}

/// Protocol parameters for the 7-link experiments: attempt probability
/// 1/16, probe length 5, success overhead 10, reference payload 15.
pub fn adhoc7_params() -> ProtocolParams {
    ProtocolParams::uniform(7, 1.0 / 16.0, 5, 10, 15.0)
}

/// Controller settings for the 7-link adaptive runs: updates every 500
/// slots, step size 0.23/(2 + i/100), exponent window [0, 3.5], rate gap
/// 0.005, exponents started at zero.
pub fn adhoc7_controller() -> ControllerConfig {
    ControllerConfig {
        r_min: 0.0,
        r_max: 3.5,
        delta: 0.005,
        schedule: StepSchedule::Harmonic {
            c: 0.23,
            a: 2.0,
            d: 100.0,
        },
        update_period: 500,
        lambda_bar: 1.0,
        initial_r: vec![0.0; 7],
    }
}

/// Simulation config for the 7-link adaptive run at load `rho`, with every
/// queue primed at 300 units of 100 slots each.
pub fn adhoc7_sim(rho: f64, seed: u64, n_slots: u64) -> Result<SimConfig> {
    let graph = adhoc7_graph();
    let lambda: Vec<f64> = adhoc7_base_rates().iter().map(|l| rho * l).collect();
    let mut cfg = SimConfig::new(
        graph,
        adhoc7_params(),
        LengthExponents::uniform(7, 0.0),
        lambda,
    );
    cfg.seed = seed;
    cfg.n_slots = n_slots;
    cfg.packet_slots = 500;
    cfg.initial_queue_slots = 300 * 100;
    cfg.validate()?;
    Ok(cfg)
}

/// Six-link line where each link conflicts with the two nearest links on
/// each side; used for the access-intensity comparison.
pub fn line6_graph() -> ConflictGraph {
    ConflictGraph::line(6, 2).expect("static graph is valid")
}

/// Parameters for the line-network access-intensity runs: p = 1/16,
/// probe and overhead both one slot.
pub fn line6_params() -> ProtocolParams {
    ProtocolParams::uniform(6, 1.0 / 16.0, 1, 1, 15.0)
}

/// Controller for the line-network runs. The exponent window is wide
/// enough for the payloads required at the highest load.
pub fn line6_controller() -> ControllerConfig {
    ControllerConfig {
        r_min: -3.0,
        r_max: 6.0,
        delta: 0.0,
        schedule: StepSchedule::Harmonic {
            c: 0.23,
            a: 2.0,
            d: 100.0,
        },
        update_period: 500,
        lambda_bar: 1.0,
        initial_r: vec![0.0; 6],
    }
}

/// Sixteen-link line with two-hop conflicts for the short-term-throughput
/// windows; payloads fixed, no arrivals.
pub fn line16_graph() -> ConflictGraph {
    ConflictGraph::line(16, 2).expect("static graph is valid")
}

pub fn line16_params() -> ProtocolParams {
    ProtocolParams::uniform(16, 1.0 / 16.0, 5, 10, 15.0)
}

/// 5x5 lattice with nearest-neighbor conflicts.
pub fn lattice25_graph() -> ConflictGraph {
    ConflictGraph::lattice(5, 5).expect("static graph is valid")
}

pub fn lattice25_params() -> ProtocolParams {
    ProtocolParams::uniform(25, 1.0 / 16.0, 5, 10, 15.0)
}

/// Two links that interfere but cannot sense each other: the interference
/// graph is the single edge, the sensing graph is empty.
pub fn hidden_pair_graphs() -> (ConflictGraph, ConflictGraph) {
    (
        ConflictGraph::complete(2).expect("static graph is valid"),
        ConflictGraph::edgeless(2).expect("static graph is valid"),
    )
}

/// Parameters for the hidden-pair experiments: p = 1/64, probe 5,
/// overhead 10.
pub fn hidden_pair_params() -> ProtocolParams {
    ProtocolParams::uniform(2, 1.0 / 64.0, 5, 10, 15.0)
}

/// Controller for the adaptive hidden-pair runs: exponent window capped so
/// the maximal payload is 200 slots, step size 0.14/(2 + i/100).
pub fn hidden_pair_controller(initial_payload_slots: f64) -> ControllerConfig {
    let t0 = 15.0;
    ControllerConfig {
        r_min: 0.0,
        r_max: (200.0f64 / t0).ln(),
        delta: 0.0,
        schedule: StepSchedule::Harmonic {
            c: 0.14,
            a: 2.0,
            d: 100.0,
        },
        update_period: 500,
        lambda_bar: 1.0,
        initial_r: vec![(initial_payload_slots / t0).ln(); 2],
    }
}

/// Fixed-payload simulation on the hidden pair.
pub fn hidden_pair_sim(payload_slots: f64, seed: u64, n_slots: u64) -> Result<SimConfig> {
    let (graph, sensing) = hidden_pair_graphs();
    let params = hidden_pair_params();
    let r = LengthExponents::from_payload_means(params.t0, &[payload_slots, payload_slots]);
    let mut cfg = SimConfig::new(graph, params, r, vec![0.0, 0.0]);
    cfg.sensing = Some(sensing);
    cfg.seed = seed;
    cfg.n_slots = n_slots;
    cfg.validate()?;
    Ok(cfg)
}
