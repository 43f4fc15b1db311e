//! Slot-level simulation of the CSMA/CA protocol.
//!
//! Each slot, an idle link whose sensed neighborhood is quiet attempts
//! transmission with its attempt probability. Simultaneous attempts by
//! sensing-adjacent links collide and occupy exactly the probe length
//! `gamma`; a lone attempt transmits overhead `tau'` followed by a payload
//! drawn to match the link's mean payload length. Links are saturated with
//! dummy payload unless `dummy_bits` is off, in which case empty queues
//! stay silent and short queues send what they have.
//!
//! A sensing graph that is a strict subgraph of the interference graph
//! models hidden nodes: transmissions then run to their scheduled end and
//! earn payload credit only if no interference neighbor overlapped them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ConflictGraph;
use crate::stationary::{LengthExponents, OnOffDistribution, ProtocolParams};

/// Which overlap corrupts a transmission in hidden-node operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionWindow {
    /// Any overlap with the whole transmission (probe, overhead or payload).
    WholeTransmission,
    /// Only overlap with the payload portion.
    PayloadOnly,
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub graph: ConflictGraph,
    /// Carrier-sensing relation; `None` means identical to the
    /// interference graph (no hidden nodes). Must be a subgraph of it.
    pub sensing: Option<ConflictGraph>,
    pub params: ProtocolParams,
    /// Fixed payload-length exponents (the adaptive runner rewrites these
    /// every period).
    pub r: LengthExponents,
    /// Per-link arrival probabilities; a packet of `packet_slots` slots
    /// arrives at each multiple of `packet_slots` with this probability.
    pub lambda: Vec<f64>,
    /// Packet granularity and controller period, in slots.
    pub packet_slots: u32,
    pub n_slots: u64,
    pub seed: u64,
    /// Keep links saturated by padding payloads with dummy data.
    pub dummy_bits: bool,
    /// Physical slot duration in microseconds (used for windowed metrics).
    pub slot_us: f64,
    pub initial_queue_slots: u64,
    /// When set, per-link throughput is also aggregated over windows of
    /// this many milliseconds.
    pub window_ms: Option<f64>,
    pub collision_window: CollisionWindow,
    /// Record the on-off occupancy histogram (needs 2^K counters; forced
    /// off above 16 links).
    pub track_occupancy: bool,
}

impl SimConfig {
    pub fn new(
        graph: ConflictGraph,
        params: ProtocolParams,
        r: LengthExponents,
        lambda: Vec<f64>,
    ) -> Self {
        let track = graph.num_links() <= 16;
        Self {
            graph,
            sensing: None,
            params,
            r,
            lambda,
            packet_slots: 500,
            n_slots: 1_000_000,
            seed: 0,
            dummy_bits: true,
            slot_us: 9.0,
            initial_queue_slots: 0,
            window_ms: None,
            collision_window: CollisionWindow::PayloadOnly,
            track_occupancy: track,
        }
    }

    pub fn num_links(&self) -> usize {
        self.graph.num_links()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.graph.num_links();
        self.params.validate(k)?;
        self.r.validate(k)?;
        if self.lambda.len() != k {
            return Err(Error::DimensionMismatch {
                what: "arrival probabilities",
                expected: k,
                got: self.lambda.len(),
            });
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(0.0..1.0).contains(&l) {
                return Err(Error::InvalidConfig(format!(
                    "arrival probability lambda[{}] = {l} must lie in [0,1)",
                    i + 1
                )));
            }
        }
        if self.packet_slots == 0 {
            return Err(Error::InvalidConfig("packet_slots must be >= 1".into()));
        }
        if self.n_slots == 0 {
            return Err(Error::InvalidConfig("n_slots must be >= 1".into()));
        }
        if !(self.slot_us > 0.0) {
            return Err(Error::InvalidConfig("slot_us must be positive".into()));
        }
        if let Some(w) = self.window_ms {
            if !(w > 0.0) {
                return Err(Error::InvalidConfig("window_ms must be positive".into()));
            }
        }
        if let Some(sensing) = &self.sensing {
            if sensing.num_links() != k {
                return Err(Error::InvalidConfig(
                    "sensing graph has a different number of links".into(),
                ));
            }
            if !sensing.is_subgraph_of(&self.graph) {
                return Err(Error::InvalidConfig(
                    "sensing edges must be a subset of interference edges".into(),
                ));
            }
        }
        // Payload means below one slot cannot be realized.
        for (i, &ri) in self.r.0.iter().enumerate() {
            if self.params.t0 * ri.exp() < 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "mean payload of link {} is below one slot",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn window_slots(&self) -> Option<u64> {
        self.window_ms
            .map(|ms| ((ms * 1000.0) / self.slot_us).round().max(1.0) as u64)
    }
}

/// Per-link protocol state during a slot.
#[derive(Debug, Clone)]
pub struct LinkState {
    pub active: bool,
    /// Total length `b` of the current packet, in slots.
    pub total_len: u32,
    /// Remaining slots `a`, including the current one.
    pub remaining: u32,
    /// Payload slots at the tail of the transmission (0 for collisions).
    pub payload_len: u32,
    /// Payload length the controller scheduled (differs from
    /// `payload_len` only without dummy bits).
    pub scheduled_payload: u32,
    pub collided: bool,
    /// Hidden-node overlap detected; the transmission earns no credit.
    pub corrupted: bool,
    pub queue_slots: u64,
}

impl LinkState {
    fn idle(queue_slots: u64) -> Self {
        Self {
            active: false,
            total_len: 0,
            remaining: 0,
            payload_len: 0,
            scheduled_payload: 0,
            collided: false,
            corrupted: false,
            queue_slots,
        }
    }

    /// In a payload slot (as opposed to probe/overhead)?
    fn in_payload(&self) -> bool {
        self.active && !self.collided && self.remaining <= self.payload_len
    }

    /// First slot of a transmission?
    fn just_started(&self) -> bool {
        self.active && self.remaining == self.total_len
    }
}

/// Complete simulator state: the chain state `{x, (b_k, a_k)}` plus queues.
#[derive(Debug, Clone)]
pub struct SimState {
    pub slot: u64,
    pub links: Vec<LinkState>,
}

impl SimState {
    pub fn idle(num_links: usize, initial_queue_slots: u64) -> Self {
        Self {
            slot: 0,
            links: vec![LinkState::idle(initial_queue_slots); num_links],
        }
    }

    pub fn onoff_mask(&self) -> u64 {
        let mut mask = 0u64;
        for (k, l) in self.links.iter().enumerate() {
            if l.active {
                mask |= 1 << k;
            }
        }
        mask
    }

    /// Check the chain-state invariants: remaining times within bounds,
    /// collision members pinned to the probe length with synchronized
    /// phases, successful transmissions shaped as overhead plus payload.
    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        let sensing = cfg.sensing.as_ref().unwrap_or(&cfg.graph);
        let active_mask = self.onoff_mask();
        for (k, l) in self.links.iter().enumerate() {
            if !l.active {
                continue;
            }
            if !(1 <= l.remaining && l.remaining <= l.total_len) {
                return Err(Error::InvalidConfig(format!(
                    "link {}: remaining {} outside 1..={}",
                    k + 1,
                    l.remaining,
                    l.total_len
                )));
            }
            if l.collided {
                if l.total_len != cfg.params.gamma || l.payload_len != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "link {}: collision must occupy exactly the probe length",
                        k + 1
                    )));
                }
                let peers = sensing.neighbors_mask(k) & active_mask;
                let mut synced = false;
                let mut m = peers;
                while m != 0 {
                    let j = m.trailing_zeros() as usize;
                    m &= m - 1;
                    if self.links[j].collided && self.links[j].remaining == l.remaining {
                        synced = true;
                    }
                }
                if !synced {
                    return Err(Error::InvalidConfig(format!(
                        "link {}: collision member without a synchronized peer",
                        k + 1
                    )));
                }
            } else if l.payload_len < 1 || l.total_len != cfg.params.tau_prime + l.payload_len {
                return Err(Error::InvalidConfig(format!(
                    "link {}: success must be overhead plus payload",
                    k + 1
                )));
            }
            // Sensing-adjacent simultaneous activity is only legal inside a
            // synchronized collision component.
            let mut m = sensing.neighbors_mask(k) & active_mask;
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                m &= m - 1;
                let peer = &self.links[j];
                if !(l.collided && peer.collided && peer.remaining == l.remaining) {
                    return Err(Error::InvalidConfig(format!(
                        "links {} and {} transmit while sensing each other",
                        k + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-period record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    /// 1-based period index.
    pub period: u32,
    /// Exponents in force during the period.
    pub r: Vec<f64>,
    /// Mean payload lengths in force during the period.
    pub t_payload: Vec<f64>,
    /// Arrived traffic per link divided by the period length.
    pub lambda_emp: Vec<f64>,
    /// Credited payload slots per link divided by the period length.
    pub s_emp: Vec<f64>,
    /// Queue backlog at the period boundary, in slots.
    pub queue_slots: Vec<u64>,
}

/// Aggregated metrics of one run. Identical configs and seeds produce
/// bit-identical metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub num_links: usize,
    pub n_slots: u64,
    pub seed: u64,
    /// Credited payload slots (dummy payload and scheduled-but-truncated
    /// payload included).
    pub payload_slots: Vec<u64>,
    /// Payload slots that served real queued data.
    pub real_payload_slots: Vec<u64>,
    /// Completed non-collided, non-corrupted transmissions.
    pub successful_transmissions: Vec<u64>,
    /// Collision events joined, per link.
    pub link_collisions: Vec<u64>,
    /// Collision components formed.
    pub collision_components: u64,
    pub final_queue_slots: Vec<u64>,
    /// Per link: (start slot, gap to previous successful start).
    pub delay_samples: Vec<Vec<(u64, u64)>>,
    pub periods: Vec<PeriodRecord>,
    /// Slot counts per on-off mask, when tracked.
    pub occupancy: Option<Vec<u64>>,
    /// Per-window, per-link service rates, when windowing is on.
    pub windows: Option<Vec<Vec<f64>>>,
    /// `T^p_k / (1/p_k - 1)` using the exponents in force at the end.
    pub access_intensity: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Metrics {
    /// Credited payload slots divided by the horizon.
    pub fn service_rates(&self) -> Vec<f64> {
        self.payload_slots
            .iter()
            .map(|&p| p as f64 / self.n_slots as f64)
            .collect()
    }

    /// Count, mean and standard deviation of the access-delay samples of
    /// `link`, restricted to samples recorded at or after `from_slot`.
    pub fn delay_stats(&self, link: usize, from_slot: u64) -> Option<(usize, f64, f64)> {
        let samples: Vec<f64> = self.delay_samples[link]
            .iter()
            .filter(|(slot, _)| *slot >= from_slot)
            .map(|&(_, gap)| gap as f64)
            .collect();
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        Some((samples.len(), mean, var.sqrt()))
    }

    /// Total-variation distance between the empirical on-off occupancy and
    /// an analytical distribution.
    pub fn occupancy_tv_distance(&self, dist: &OnOffDistribution) -> Option<f64> {
        let occ = self.occupancy.as_ref()?;
        let total = self.n_slots as f64;
        let mut tv = 0.0;
        for (mask, &count) in occ.iter().enumerate() {
            tv += (count as f64 / total - dist.prob(mask as u64)).abs();
        }
        Some(0.5 * tv)
    }
}

/// Independent ChaCha streams: one per link (attempt coins and payload
/// draws) plus one for arrivals, so adding links does not disturb the
/// draws of existing ones.
pub struct SimRngs {
    attempt: Vec<ChaCha8Rng>,
    arrivals: ChaCha8Rng,
}

impl SimRngs {
    pub fn new(seed: u64, num_links: usize) -> Self {
        let mut arrivals = ChaCha8Rng::seed_from_u64(seed);
        arrivals.set_stream(0);
        let attempt = (0..num_links)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                rng
            })
            .collect();
        Self { attempt, arrivals }
    }
}

/// Draw an integer payload length with mean exactly `mean`: the floor or
/// ceiling of `mean`, weighted by the fractional part.
pub fn sample_payload(mean: f64, rng: &mut impl Rng) -> Result<u32> {
    if !(mean >= 1.0) {
        return Err(Error::Domain(format!(
            "mean payload length {mean} must be at least one slot"
        )));
    }
    let floor = mean.floor();
    let frac = mean - floor;
    let len = if frac > 0.0 && rng.random::<f64>() < frac {
        floor as u32 + 1
    } else {
        floor as u32
    };
    Ok(len)
}

/// Advance the chain by one slot: continuing transmissions count down,
/// finished ones leave, and every link whose sensed neighborhood is clear
/// attempts with its attempt probability. Does not touch queues or
/// metrics; [`run`] drives the full protocol.
pub fn step(state: &mut SimState, cfg: &SimConfig, rngs: &mut SimRngs) -> Result<()> {
    let t_payload: Vec<f64> = cfg.r.0.iter().map(|&r| cfg.params.t0 * r.exp()).collect();
    advance(state, cfg, rngs, &t_payload, &mut |_| {})?;
    state.slot += 1;
    if cfg!(debug_assertions) {
        state.validate(cfg)?;
    }
    Ok(())
}

/// Completion notification surfaced by the transition.
struct Completion {
    link: usize,
    collided: bool,
    corrupted: bool,
    payload_len: u32,
    scheduled_payload: u32,
}

/// Decrement / terminate / attempt. Calls `on_complete` for every link
/// whose transmission ends with this slot, before starting new ones.
fn advance(
    state: &mut SimState,
    cfg: &SimConfig,
    rngs: &mut SimRngs,
    t_payload: &[f64],
    on_complete: &mut dyn FnMut(Completion),
) -> Result<()> {
    let k = cfg.num_links();
    let sensing = cfg.sensing.as_ref().unwrap_or(&cfg.graph);

    // Links continuing into the next slot.
    let mut cont_mask = 0u64;
    for (i, l) in state.links.iter().enumerate() {
        if l.active && l.remaining > 1 {
            cont_mask |= 1 << i;
        }
    }
    // Terminations.
    for (i, l) in state.links.iter().enumerate() {
        if l.active && l.remaining == 1 {
            on_complete(Completion {
                link: i,
                collided: l.collided,
                corrupted: l.corrupted,
                payload_len: l.payload_len,
                scheduled_payload: l.scheduled_payload,
            });
        }
    }
    // Attempts: idle links with a quiet sensed neighborhood, plus links
    // finishing this slot (they may start again immediately).
    let mut attempts = 0u64;
    for i in 0..k {
        let l = &state.links[i];
        let eligible = if l.active {
            debug_assert!(
                l.remaining > 1 || sensing.neighbors_mask(i) & cont_mask == 0,
                "a finishing link cannot have a continuing sensing neighbor"
            );
            l.remaining == 1
        } else {
            sensing.neighbors_mask(i) & cont_mask == 0
        };
        if !eligible {
            continue;
        }
        if !cfg.dummy_bits && state.links[i].queue_slots == 0 {
            continue;
        }
        if rngs.attempt[i].random::<f64>() < cfg.params.p[i] {
            attempts |= 1 << i;
        }
    }
    // Apply countdowns and terminations.
    for l in state.links.iter_mut() {
        if l.active {
            if l.remaining > 1 {
                l.remaining -= 1;
            } else {
                *l = LinkState {
                    queue_slots: l.queue_slots,
                    ..LinkState::idle(0)
                };
            }
        }
    }
    // Start new transmissions; sensing-adjacent simultaneous attempts
    // collide for exactly the probe length.
    for i in 0..k {
        if attempts & (1 << i) == 0 {
            continue;
        }
        let collided = sensing.neighbors_mask(i) & attempts != 0;
        let l = &mut state.links[i];
        if collided {
            l.active = true;
            l.total_len = cfg.params.gamma;
            l.remaining = cfg.params.gamma;
            l.payload_len = 0;
            l.scheduled_payload = 0;
            l.collided = true;
            l.corrupted = true;
        } else {
            let scheduled = sample_payload(t_payload[i], &mut rngs.attempt[i])?;
            let actual = if cfg.dummy_bits {
                scheduled
            } else {
                scheduled
                    .min(l.queue_slots.min(u32::MAX as u64) as u32)
                    .max(1)
            };
            l.active = true;
            l.total_len = cfg.params.tau_prime + actual;
            l.remaining = l.total_len;
            l.payload_len = actual;
            l.scheduled_payload = scheduled;
            l.collided = false;
            l.corrupted = false;
        }
    }
    Ok(())
}

/// Controller hook invoked at every period boundary.
pub(crate) trait PeriodHook {
    fn on_period_end(&mut self, period: u32, lambda_emp: &[f64], s_emp: &[f64], r: &mut [f64]);
}

pub(crate) struct FixedRate;

impl PeriodHook for FixedRate {
    fn on_period_end(&mut self, _: u32, _: &[f64], _: &[f64], _: &mut [f64]) {}
}

/// Run the protocol for `cfg.n_slots` slots with fixed exponents.
pub fn run(cfg: &SimConfig) -> Result<Metrics> {
    run_with_hook(cfg, &mut FixedRate)
}

/// Run with a sensing graph that differs from the interference graph.
/// Degenerates to [`run`] (with a warning in the metrics) if they match.
pub fn run_hidden_node(cfg: &SimConfig) -> Result<Metrics> {
    let mut metrics = run_with_hook(cfg, &mut FixedRate)?;
    let degenerate = match &cfg.sensing {
        Some(s) => *s == cfg.graph,
        None => true,
    };
    if degenerate {
        metrics
            .warnings
            .push("sensing graph equals interference graph; no hidden nodes".into());
    }
    Ok(metrics)
}

pub(crate) fn run_with_hook(cfg: &SimConfig, hook: &mut dyn PeriodHook) -> Result<Metrics> {
    cfg.validate()?;
    let k = cfg.num_links();
    let m = cfg.packet_slots as u64;
    let hidden = match &cfg.sensing {
        Some(s) => *s != cfg.graph,
        None => false,
    };
    let track_occupancy = cfg.track_occupancy && k <= 16;

    let mut r = cfg.r.0.clone();
    let mut t_payload: Vec<f64> = r.iter().map(|&ri| cfg.params.t0 * ri.exp()).collect();

    let mut state = SimState::idle(k, cfg.initial_queue_slots);
    let mut rngs = SimRngs::new(cfg.seed, k);

    let mut payload_slots = vec![0u64; k];
    let mut real_payload_slots = vec![0u64; k];
    let mut successes = vec![0u64; k];
    let mut link_collisions = vec![0u64; k];
    let mut collision_components = 0u64;
    let mut occupancy = track_occupancy.then(|| vec![0u64; 1 << k]);
    let mut last_start: Vec<Option<u64>> = vec![None; k];
    let mut delay_samples: Vec<Vec<(u64, u64)>> = vec![Vec::new(); k];
    let mut periods: Vec<PeriodRecord> = Vec::new();
    let mut period_arrivals = vec![0u64; k];
    let mut period_payload = vec![0u64; k];
    let window_slots = cfg.window_slots();
    let mut windows: Option<Vec<Vec<f64>>> = window_slots.map(|_| Vec::new());
    let mut window_payload = vec![0u64; k];

    // Mutable copy whose exponents track the controller, for validation.
    let mut cfg_now = cfg.clone();

    for t in 0..cfg.n_slots {
        // Arrivals at packet boundaries.
        if t % m == 0 {
            for i in 0..k {
                if cfg.lambda[i] > 0.0 && rngs.arrivals.random::<f64>() < cfg.lambda[i] {
                    state.links[i].queue_slots += m;
                    period_arrivals[i] += m;
                }
            }
        }
        // Account the current slot.
        if let Some(occ) = occupancy.as_mut() {
            occ[state.onoff_mask() as usize] += 1;
        }
        if hidden {
            // Overlap with an interference neighbor corrupts per the
            // configured window rule.
            let active_mask = state.onoff_mask();
            for i in 0..k {
                let l = &state.links[i];
                if !l.active || l.collided || l.corrupted {
                    continue;
                }
                if cfg.graph.neighbors_mask(i) & active_mask != 0 {
                    let in_window = match cfg.collision_window {
                        CollisionWindow::WholeTransmission => true,
                        CollisionWindow::PayloadOnly => l.in_payload(),
                    };
                    if in_window {
                        state.links[i].corrupted = true;
                    }
                }
            }
        }
        for i in 0..k {
            let l = &mut state.links[i];
            if l.just_started() && !l.collided {
                if let Some(prev) = last_start[i] {
                    delay_samples[i].push((t, t - prev));
                }
                last_start[i] = Some(t);
            }
            if l.in_payload() && !hidden {
                payload_slots[i] += 1;
                period_payload[i] += 1;
                window_payload[i] += 1;
                if l.queue_slots > 0 {
                    l.queue_slots -= 1;
                    real_payload_slots[i] += 1;
                }
            }
        }
        // Advance to the next slot, harvesting completions first.
        let mut completions: Vec<Completion> = Vec::new();
        advance(&mut state, &cfg_now, &mut rngs, &t_payload, &mut |c| {
            completions.push(c)
        })?;
        let mut new_collision_links = 0u64;
        for (i, l) in state.links.iter().enumerate() {
            if l.active && l.collided && l.remaining == l.total_len {
                new_collision_links |= 1 << i;
                link_collisions[i] += 1;
            }
        }
        if new_collision_links != 0 {
            let sensing = cfg.sensing.as_ref().unwrap_or(&cfg.graph);
            collision_components += count_components(sensing, new_collision_links) as u64;
        }
        for c in completions {
            if c.collided {
                continue;
            }
            if hidden {
                if !c.corrupted {
                    successes[c.link] += 1;
                    payload_slots[c.link] += c.payload_len as u64;
                    period_payload[c.link] += c.payload_len as u64;
                    window_payload[c.link] += c.payload_len as u64;
                    let l = &mut state.links[c.link];
                    let served = (c.payload_len as u64).min(l.queue_slots);
                    l.queue_slots -= served;
                    real_payload_slots[c.link] += served;
                }
            } else {
                successes[c.link] += 1;
                if c.scheduled_payload > c.payload_len {
                    // Without dummy bits a short queue truncates the
                    // packet, but the scheduled length still counts
                    // toward the empirical service rate.
                    let deficit = (c.scheduled_payload - c.payload_len) as u64;
                    payload_slots[c.link] += deficit;
                    period_payload[c.link] += deficit;
                }
            }
        }
        state.slot = t + 1;
        #[cfg(debug_assertions)]
        state.validate(&cfg_now)?;
        // Windows close on slot boundaries.
        if let (Some(w), Some(ws)) = (window_slots, windows.as_mut()) {
            if (t + 1) % w == 0 {
                ws.push(
                    window_payload
                        .iter()
                        .map(|&c| c as f64 / w as f64)
                        .collect(),
                );
                window_payload.fill(0);
            }
        }
        // Period boundary: empirical rates, then the controller update.
        if (t + 1) % m == 0 {
            let period = ((t + 1) / m) as u32;
            let lambda_emp: Vec<f64> = period_arrivals
                .iter()
                .map(|&a| a as f64 / m as f64)
                .collect();
            let s_emp: Vec<f64> = period_payload
                .iter()
                .map(|&s| s as f64 / m as f64)
                .collect();
            periods.push(PeriodRecord {
                period,
                r: r.clone(),
                t_payload: t_payload.clone(),
                lambda_emp: lambda_emp.clone(),
                s_emp: s_emp.clone(),
                queue_slots: state.links.iter().map(|l| l.queue_slots).collect(),
            });
            hook.on_period_end(period, &lambda_emp, &s_emp, &mut r);
            for (i, &ri) in r.iter().enumerate() {
                t_payload[i] = cfg.params.t0 * ri.exp();
            }
            cfg_now.r = LengthExponents(r.clone());
            period_arrivals.fill(0);
            period_payload.fill(0);
        }
    }

    let access_intensity = (0..k)
        .map(|i| t_payload[i] / (1.0 / cfg.params.p[i] - 1.0))
        .collect();
    Ok(Metrics {
        num_links: k,
        n_slots: cfg.n_slots,
        seed: cfg.seed,
        payload_slots,
        real_payload_slots,
        successful_transmissions: successes,
        link_collisions,
        collision_components,
        final_queue_slots: state.links.iter().map(|l| l.queue_slots).collect(),
        delay_samples,
        periods,
        occupancy,
        windows,
        access_intensity,
        warnings: Vec::new(),
    })
}

fn count_components(g: &ConflictGraph, mask: u64) -> usize {
    let mut seen = 0u64;
    let mut count = 0usize;
    let mut rest = mask;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        let bit = 1u64 << k;
        rest &= rest - 1;
        if seen & bit != 0 {
            continue;
        }
        let mut comp = bit;
        let mut frontier = bit;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= g.neighbors_mask(v) & mask & !comp;
            }
            comp |= next;
            frontier = next;
        }
        seen |= comp;
        if comp.count_ones() > 1 {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::onoff_distribution;

    fn one_link_cfg() -> SimConfig {
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 1.0 / 16.0, 1, 10, 15.0);
        let r = LengthExponents(vec![2.0f64.ln()]);
        SimConfig::new(g, params, r, vec![0.0])
    }

    #[test]
    fn forced_attempt_starts_immediately() {
        // p close to 1: from idle the link is transmitting next slot with
        // a = b = tau' + payload.
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams {
            p: vec![0.999_999_999],
            gamma: 1,
            tau_prime: 10,
            t0: 30.0,
        };
        let cfg = SimConfig::new(g, params, LengthExponents(vec![0.0]), vec![0.0]);
        let mut state = SimState::idle(1, 0);
        let mut rngs = SimRngs::new(7, 1);
        step(&mut state, &cfg, &mut rngs).unwrap();
        let l = &state.links[0];
        assert!(l.active);
        assert_eq!(l.total_len, 40);
        assert_eq!(l.remaining, 40);
        assert_eq!(l.payload_len, 30);
    }

    #[test]
    fn simultaneous_attempts_collide_for_gamma() {
        let g = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams {
            p: vec![0.999_999_999; 2],
            gamma: 4,
            tau_prime: 2,
            t0: 5.0,
        };
        let cfg = SimConfig::new(g, params, LengthExponents(vec![0.0; 2]), vec![0.0; 2]);
        let mut state = SimState::idle(2, 0);
        let mut rngs = SimRngs::new(3, 2);
        step(&mut state, &cfg, &mut rngs).unwrap();
        for l in &state.links {
            assert!(l.active && l.collided);
            assert_eq!(l.total_len, 4);
            assert_eq!(l.remaining, 4);
        }
        // The collision dissolves simultaneously after exactly gamma slots.
        for _ in 0..3 {
            step(&mut state, &cfg, &mut rngs).unwrap();
            assert!(state.links.iter().all(|l| l.active && l.collided));
            assert_eq!(state.links[0].remaining, state.links[1].remaining);
        }
    }

    #[test]
    fn neighbor_of_mid_transmission_link_stays_silent() {
        let g = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams {
            p: vec![0.999_999_999, 1e-12],
            gamma: 1,
            tau_prime: 3,
            t0: 10.0,
        };
        let mut cfg = SimConfig::new(g, params, LengthExponents(vec![0.0; 2]), vec![0.0; 2]);
        let mut state = SimState::idle(2, 0);
        let mut rngs = SimRngs::new(11, 2);
        step(&mut state, &cfg, &mut rngs).unwrap();
        assert!(state.links[0].active && !state.links[1].active);
        // Make link 2 eager; it must stay silent while link 1 transmits.
        cfg.params.p[1] = 0.999_999_999;
        let busy_until = state.links[0].remaining;
        for _ in 1..busy_until {
            step(&mut state, &cfg, &mut rngs).unwrap();
            assert!(state.links[0].active);
            assert!(!state.links[1].active, "blocked neighbor transmitted");
        }
    }

    #[test]
    fn sample_payload_matches_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(sample_payload(30.0, &mut rng).unwrap(), 30);
        let mut sum = 0u64;
        let n = 1_000_000;
        for _ in 0..n {
            sum += sample_payload(17.5, &mut rng).unwrap() as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 17.5).abs() < 0.01, "empirical mean {mean}");
        let mut highs = 0u64;
        for _ in 0..n {
            if sample_payload(30.25, &mut rng).unwrap() == 31 {
                highs += 1;
            }
        }
        let frac = highs as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.005, "P(31) = {frac}");
        assert!(sample_payload(0.5, &mut rng).is_err());
    }

    #[test]
    fn zero_arrivals_without_dummy_bits_stays_silent() {
        let mut cfg = one_link_cfg();
        cfg.dummy_bits = false;
        cfg.n_slots = 20_000;
        let metrics = run(&cfg).unwrap();
        assert_eq!(metrics.payload_slots[0], 0);
        assert_eq!(metrics.successful_transmissions[0], 0);
    }

    #[test]
    fn single_link_rate_approaches_stationary_value() {
        let mut cfg = one_link_cfg();
        cfg.n_slots = 2_000_000;
        cfg.seed = 5;
        let metrics = run(&cfg).unwrap();
        let s = metrics.service_rates()[0];
        assert!((s - 6.0 / 11.0).abs() < 0.01, "rate {s}");
    }

    #[test]
    fn occupancy_histogram_sums_to_horizon() {
        let g = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams::uniform(2, 0.2, 2, 2, 6.0);
        let mut cfg = SimConfig::new(g, params, LengthExponents(vec![0.0; 2]), vec![0.0; 2]);
        cfg.n_slots = 100_000;
        let metrics = run(&cfg).unwrap();
        let occ = metrics.occupancy.as_ref().unwrap();
        assert_eq!(occ.iter().sum::<u64>(), cfg.n_slots);
    }

    #[test]
    fn occupancy_matches_product_form() {
        let g = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams::uniform(2, 0.1, 3, 4, 10.0);
        let r = LengthExponents(vec![0.4, 0.9]);
        let mut cfg = SimConfig::new(g.clone(), params.clone(), r.clone(), vec![0.0; 2]);
        cfg.n_slots = 3_000_000;
        cfg.seed = 12;
        let metrics = run(&cfg).unwrap();
        let dist = onoff_distribution(&g, &params, &r).unwrap();
        let tv = metrics.occupancy_tv_distance(&dist).unwrap();
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_metrics() {
        let mut cfg = one_link_cfg();
        cfg.n_slots = 50_000;
        cfg.lambda = vec![0.3];
        cfg.seed = 99;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 100;
        let c = run(&cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn adding_a_link_preserves_existing_draw_streams() {
        // An isolated extra link must not change link 1's attempt draws:
        // with no conflicts, per-slot behavior of link 1 is identical.
        let g1 = ConflictGraph::edgeless(1).unwrap();
        let p1 = ProtocolParams::uniform(1, 0.05, 1, 4, 9.0);
        let mut c1 = SimConfig::new(g1, p1, LengthExponents(vec![0.2]), vec![0.0]);
        c1.n_slots = 30_000;
        let m1 = run(&c1).unwrap();

        let g2 = ConflictGraph::edgeless(2).unwrap();
        let p2 = ProtocolParams::uniform(2, 0.05, 1, 4, 9.0);
        let mut c2 = SimConfig::new(g2, p2, LengthExponents(vec![0.2, 0.2]), vec![0.0; 2]);
        c2.n_slots = 30_000;
        let m2 = run(&c2).unwrap();
        assert_eq!(m1.payload_slots[0], m2.payload_slots[0]);
        assert_eq!(
            m1.successful_transmissions[0],
            m2.successful_transmissions[0]
        );
    }

    #[test]
    fn no_dummy_bits_serves_only_real_traffic() {
        let mut cfg = one_link_cfg();
        cfg.dummy_bits = false;
        cfg.lambda = vec![0.2];
        cfg.packet_slots = 100;
        cfg.n_slots = 500_000;
        cfg.seed = 21;
        let metrics = run(&cfg).unwrap();
        assert!(metrics.payload_slots[0] > 0);
        // Real service cannot exceed what arrived.
        let arrived: u64 = metrics
            .periods
            .iter()
            .map(|p| (p.lambda_emp[0] * 100.0).round() as u64)
            .sum();
        assert!(metrics.real_payload_slots[0] <= arrived);
        // Scheduled-but-truncated payload is still credited.
        assert!(metrics.payload_slots[0] >= metrics.real_payload_slots[0]);
    }

    #[test]
    fn saturated_run_decrements_queue_only_for_real_data() {
        let mut cfg = one_link_cfg();
        cfg.lambda = vec![0.0];
        cfg.initial_queue_slots = 1000;
        cfg.n_slots = 200_000;
        let metrics = run(&cfg).unwrap();
        assert_eq!(metrics.real_payload_slots[0], 1000);
        assert_eq!(metrics.final_queue_slots[0], 0);
        assert!(metrics.payload_slots[0] > 1000);
    }

    #[test]
    fn hidden_degenerate_mode_warns() {
        let cfg = one_link_cfg();
        let metrics = run_hidden_node(&cfg).unwrap();
        assert_eq!(metrics.warnings.len(), 1);
    }

    #[test]
    fn hidden_pair_overlap_earns_no_credit() {
        // Two hidden links with near-certain attempts overlap constantly;
        // with the whole-transmission rule almost nothing is credited.
        let g = ConflictGraph::complete(2).unwrap();
        let sensing = ConflictGraph::edgeless(2).unwrap();
        let params = ProtocolParams {
            p: vec![0.9, 0.9],
            gamma: 2,
            tau_prime: 1,
            t0: 4.0,
        };
        let mut cfg = SimConfig::new(g, params, LengthExponents(vec![0.0; 2]), vec![0.0; 2]);
        cfg.sensing = Some(sensing);
        cfg.n_slots = 50_000;
        let metrics = run_hidden_node(&cfg).unwrap();
        assert!(metrics.warnings.is_empty());
        let s = metrics.service_rates();
        assert!(s[0] < 0.01 && s[1] < 0.01, "rates {s:?}");
    }

    #[test]
    fn sensing_must_be_subgraph() {
        let g = ConflictGraph::edgeless(2).unwrap();
        let sensing = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams::uniform(2, 0.1, 1, 2, 5.0);
        let mut cfg = SimConfig::new(g, params, LengthExponents(vec![0.5; 2]), vec![0.0; 2]);
        cfg.sensing = Some(sensing);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn state_invariants_hold_along_a_run() {
        let g = ConflictGraph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let params = ProtocolParams::uniform(4, 0.3, 3, 2, 4.0);
        let cfg = SimConfig::new(g, params, LengthExponents(vec![0.3; 4]), vec![0.0; 4]);
        let mut state = SimState::idle(4, 0);
        let mut rngs = SimRngs::new(17, 4);
        for _ in 0..5000 {
            step(&mut state, &cfg, &mut rngs).unwrap();
            state.validate(&cfg).unwrap();
        }
    }
}
