use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcf::DcfParams;
use crate::error::{Error, Result};

/// Points of the empirical MGF grid, in units of one mean off-time.
pub const MGF_GRID: [f64; 11] = [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub dcf: DcfParams,
    pub horizon_slots: u64,
    pub seed: u64,
    #[serde(default)]
    pub warmup_slots: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.dcf.validate()?;
        if self.horizon_slots <= self.warmup_slots {
            return Err(Error::invalid("horizon_slots", "must exceed warmup_slots"));
        }
        Ok(())
    }
}

pub fn node_rng(seed: u64, node: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Idle,
    Success { node: usize },
    Collision { transmitters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub kind: SlotKind,
    /// Slot start (s since the simulator was created).
    pub start: f64,
    pub duration: f64,
    /// Set when the tagged node finished a packet in this slot: the zero-based
    /// attempt it ended on and whether it was dropped.
    pub tagged_packet_end: Option<(u32, bool)>,
}

#[derive(Debug, Clone)]
struct Node {
    stage: u32,
    counter: u64,
    rng: ChaCha8Rng,
}

/// Saturated nodes on a shared channel. Node 0 is the tagged base station,
/// nodes `1..=L` the contending WiFi nodes. Every node holding a zero counter
/// transmits at the start of a slot; all others count down by one per slot,
/// whatever the slot's duration.
#[derive(Debug, Clone)]
pub struct DcfSimulator {
    params: DcfParams,
    nodes: Vec<Node>,
    time: f64,
    slots: u64,
    last_tagged_success_end: f64,
    transmitters: Vec<usize>,
}

impl DcfSimulator {
    pub fn new(params: DcfParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let nodes = (0..=u64::from(params.contenders))
            .map(|id| {
                let mut rng = node_rng(seed, id);
                let counter = rng.gen_range(0..u64::from(params.w0));
                Node {
                    stage: 0,
                    counter,
                    rng,
                }
            })
            .collect();
        Ok(Self {
            params,
            nodes,
            time: 0.0,
            slots: 0,
            last_tagged_success_end: 0.0,
            transmitters: Vec::new(),
        })
    }

    pub fn params(&self) -> &DcfParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    fn window(&self, stage: u32) -> u64 {
        u64::from(self.params.w0) << stage
    }

    pub fn step(&mut self) -> SlotOutcome {
        self.transmitters.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.counter == 0 {
                self.transmitters.push(i);
            }
        }
        let start = self.time;
        let mut tagged_packet_end = None;
        let (kind, duration) = match self.transmitters.len() {
            0 => (SlotKind::Idle, self.params.sigma),
            1 => (
                SlotKind::Success {
                    node: self.transmitters[0],
                },
                self.params.t_s,
            ),
            k => (SlotKind::Collision { transmitters: k }, self.params.t_c),
        };
        let collided = self.transmitters.len() > 1;
        for i in 0..self.nodes.len() {
            if self.nodes[i].counter > 0 {
                self.nodes[i].counter -= 1;
                continue;
            }
            let stage = self.nodes[i].stage;
            let next = if collided && stage + 1 < self.params.max_attempts {
                stage + 1
            } else {
                0
            };
            if i == 0 && next == 0 {
                tagged_packet_end = Some((stage, collided));
            }
            let w = self.window(next);
            let node = &mut self.nodes[i];
            node.stage = next;
            node.counter = node.rng.gen_range(0..w);
        }
        self.time += duration;
        self.slots += 1;
        if kind == (SlotKind::Success { node: 0 }) {
            self.last_tagged_success_end = self.time;
        }
        SlotOutcome {
            kind,
            start,
            duration,
            tagged_packet_end,
        }
    }

    /// Runs until the tagged node's next success and returns the time between
    /// the end of its previous success (or creation) and the start of this one.
    pub fn next_off_time(&mut self) -> f64 {
        let since = self.last_tagged_success_end;
        loop {
            let out = self.step();
            if out.kind == (SlotKind::Success { node: 0 }) {
                return out.start - since;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffTimeStats {
    /// Number of off-time samples (success-to-success gaps of the tagged node).
    pub samples: u64,
    /// Mean off-time (s).
    pub mean: f64,
    /// Standard error of `mean` (s).
    pub std_error: f64,
    /// Tagged-node packets by the zero-based attempt they ended on; a dropped
    /// packet counts on the last attempt. Sums to `packets`.
    pub k_histogram: Vec<u64>,
    pub packets: u64,
    pub dropped: u64,
    /// `(x, (1/n) sum exp(x t_off / mean))` for `x` in [`MGF_GRID`].
    pub empirical_mgf: Vec<[f64; 2]>,
}

impl OffTimeStats {
    pub fn new(samples: &[f64], k_histogram: Vec<u64>, dropped: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n.max(1.0);
        let var = samples.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let empirical_mgf = MGF_GRID
            .iter()
            .map(|&x| {
                let v = samples.iter().map(|t| (x * t / mean).exp()).sum::<f64>() / n;
                [x, v]
            })
            .collect();
        Self {
            samples: samples.len() as u64,
            mean,
            std_error: (var / n.max(1.0)).sqrt(),
            packets: k_histogram.iter().sum(),
            k_histogram,
            dropped,
            empirical_mgf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfSimStats {
    pub config: SimConfig,
    /// Slots after warm-up.
    pub slots: u64,
    /// Attempts per node per slot, pooled over all nodes.
    pub tau: f64,
    /// Fraction of attempts that collided, pooled over all nodes.
    pub p_c: f64,
    pub off_time: OffTimeStats,
}

/// Runs `horizon_slots` slots and measures contention and tagged-node
/// statistics after the warm-up. Also returns the raw off-time samples (s).
pub fn simulate_dcf(config: &SimConfig) -> Result<(DcfSimStats, Vec<f64>)> {
    config.validate()?;
    let mut sim = DcfSimulator::new(config.dcf, config.seed)?;
    let nodes = sim.nodes.len() as u64;
    let mut attempts = 0u64;
    let mut collided = 0u64;
    let mut samples = Vec::new();
    let mut hist = vec![0u64; config.dcf.max_attempts as usize];
    let mut dropped = 0u64;
    let mut prev_end: Option<f64> = None;
    for slot in 0..config.horizon_slots {
        let out = sim.step();
        if slot < config.warmup_slots {
            if out.kind == (SlotKind::Success { node: 0 }) {
                prev_end = Some(out.start + out.duration);
            }
            continue;
        }
        match out.kind {
            SlotKind::Idle => {}
            SlotKind::Success { node } => {
                attempts += 1;
                if node == 0 {
                    if let Some(end) = prev_end {
                        samples.push(out.start - end);
                    }
                    prev_end = Some(out.start + out.duration);
                }
            }
            SlotKind::Collision { transmitters } => {
                attempts += transmitters as u64;
                collided += transmitters as u64;
            }
        }
        if let Some((k, drop)) = out.tagged_packet_end {
            hist[k as usize] += 1;
            dropped += u64::from(drop);
        }
    }
    let slots = config.horizon_slots - config.warmup_slots;
    let stats = DcfSimStats {
        config: *config,
        slots,
        tau: attempts as f64 / (slots * nodes) as f64,
        p_c: if attempts > 0 {
            collided as f64 / attempts as f64
        } else {
            0.0
        },
        off_time: OffTimeStats::new(&samples, hist, dropped),
    };
    Ok((stats, samples))
}

/// Writes samples as consecutive little-endian 64-bit floats.
pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        out.write_all(&s.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid("samples", "file length is not a multiple of 8 bytes"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
