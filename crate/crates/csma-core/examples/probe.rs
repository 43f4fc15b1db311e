use csma_core::adaptive::run_adaptive;
use csma_core::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let paper: [(f64, [f64; 6]); 4] = [
        (0.15, [0.279, 0.386, 0.547, 0.548, 0.387, 0.279]),
        (0.2, [0.526, 0.837, 1.372, 1.371, 0.840, 0.526]),
        (0.25, [1.075, 2.229, 4.735, 4.733, 2.240, 1.072]),
        (0.3, [3.210, 12.94, 52.76, 52.32, 12.91, 3.209]),
    ];
    for (theta, row) in paper {
        let g = presets::line6_graph();
        let params = presets::line6_params();
        let ctrl = presets::line6_controller();
        let mut sim = sim::SimConfig::new(g, params.clone(), LengthExponents(ctrl.initial_r.clone()), vec![theta; 6]);
        sim.seed = 9;
        let (traj, _) = run_adaptive(&sim, &ctrl, 40_000).unwrap();
        let tail = traj.tail_mean_payload(0.3);
        let r_k: Vec<f64> = tail.iter().map(|tp| tp / 15.0).collect();
        let devs: Vec<f64> = r_k.iter().zip(&row).map(|(a, b)| ((a / b - 1.0) * 1000.0).round() / 10.0).collect();
        println!("[{:?}] theta={theta}: R={:?}\n  dev%={devs:?}", t0.elapsed(), r_k.iter().map(|v| (v*1000.0).round()/1000.0).collect::<Vec<_>>());
    }
    // hidden converge case, 100k periods
    let (graph, sensing) = presets::hidden_pair_graphs();
    let ctrl = presets::hidden_pair_controller(40.0);
    let mut sim = sim::SimConfig::new(graph, presets::hidden_pair_params(), LengthExponents(ctrl.initial_r.clone()), vec![0.1, 0.1]);
    sim.sensing = Some(sensing);
    sim.seed = 7;
    let (traj, _) = run_adaptive(&sim, &ctrl, 100_000).unwrap();
    let tail = traj.tail_mean_payload(0.2);
    println!("[{:?}] hidden init=40, 100k periods: tail T^p = {:.2}/{:.2} (band 13.1..21.9)", t0.elapsed(), tail[0], tail[1]);
}
