//! The cost analyzer: ideal parallel time, bounded-processor makespans by
//! discrete-event simulation, work and memory accounting, and growth
//! reports that check the modes' claimed asymptotics at desk scale.
//!
//! Time is counted in abstract units: absorbing one payload item (message
//! block or chaining value) costs `a`, every node carries a fixed overhead
//! `b`, and frame bits are free. A node may start absorbing before its
//! later children finish; children's chaining values are consumed in index
//! order.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::coding::{FrameConfig, NodeClass, NodeKind};
use crate::error::{Error, Result};
use crate::exec::{absorb_permutations, frame_total_bits};
use crate::inner::CV_BITS;
use crate::schedule::{AritySchedule, Mode, ModeParams};
use crate::tree::{build_topology, InterleaveLayout, Level, PayloadRef, Topology, BLOCK_BITS};

/// When payload items become available and what they cost to absorb.
#[derive(Clone, Copy, Debug)]
pub struct CostModel {
    /// Time to absorb one message block or chaining value.
    pub absorb_ticks: u64,
    /// Fixed overhead per node, paid after its last absorb step.
    pub node_overhead: u64,
    pub arrival: Arrival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrival {
    /// Every block is available at time 0.
    Stored,
    /// Block `j` (0-based) becomes available at time `j * rate`.
    Streamed { rate: u64 },
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            absorb_ticks: 1,
            node_overhead: 0,
            arrival: Arrival::Stored,
        }
    }
}

impl CostModel {
    pub fn streamed() -> Self {
        CostModel {
            arrival: Arrival::Streamed { rate: 1 },
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.absorb_ticks < 1 {
            return Err(Error::config("absorb time must be at least 1"));
        }
        Ok(())
    }

    fn block_arrival(&self, block: u64) -> u64 {
        match self.arrival {
            Arrival::Stored => 0,
            Arrival::Streamed { rate } => block * rate,
        }
    }
}

/// Completion times of one level's nodes.
enum Times {
    Uniform { value: u64, count: u64, last: u64 },
    Explicit(Vec<u64>),
}

impl Times {
    fn count(&self) -> u64 {
        match self {
            Times::Uniform { count, .. } => *count,
            Times::Explicit(v) => v.len() as u64,
        }
    }

    fn at(&self, index: u64) -> u64 {
        match self {
            Times::Uniform { value, count, last } => {
                if index == *count {
                    *last
                } else {
                    *value
                }
            }
            Times::Explicit(v) => v[index as usize - 1],
        }
    }
}

/// Completion time of a node absorbing `m` items that become available at
/// `avail(i)` (1-based), consumed in index order.
fn node_finish(m: u64, avail: impl Fn(u64) -> u64, a: u64, b: u64) -> u64 {
    let mut finish = 0u64;
    for i in 1..=m {
        finish = finish.max(avail(i)) + a;
    }
    finish + b
}

/// Which message block carries item `i` (1-based) of leaf `j`.
fn leaf_item_block(topology: &Topology, j: u64, i: u64) -> u64 {
    match topology.payload_ref(1, j) {
        PayloadRef::Blocks { start, .. } => start + i - 1,
        PayloadRef::BlocksStrided { first, stride, .. } => first + (i - 1) * stride,
        // A slice arrives with the block that carries it.
        PayloadRef::QwordsStrided { first, stride, .. } => (first + (i - 1) * stride) / 8,
        PayloadRef::Children { .. } => unreachable!("level 1 holds message payloads"),
    }
}

/// Ideal parallel running time: completion of the root with an unbounded
/// processor count, under the exact early-absorption semantics.
pub fn ideal_time(topology: &Topology, cost: &CostModel) -> Result<u64> {
    cost.validate()?;
    let a = cost.absorb_ticks;
    let b = cost.node_overhead;
    let mut below: Option<Times> = None;
    for level_no in 1..=topology.height() {
        let level = topology.level(level_no);
        let times = if level_no == 1 {
            leaf_times(topology, level, cost)
        } else {
            let children = below.as_ref().expect("levels computed bottom-up");
            match (level, children) {
                (
                    Level::Uniform { arity, count, last },
                    Times::Uniform {
                        value: t,
                        last: t_last,
                        ..
                    },
                ) => {
                    // Children of a full node all finished together, so the
                    // cascade costs a per item; only a single-child final
                    // node is paced by the short child instead.
                    let value = b + t + a * arity;
                    let last_time = if *last >= 2 {
                        b + t + a * last
                    } else {
                        b + t_last + a
                    };
                    Times::Uniform {
                        value,
                        count: *count,
                        last: last_time,
                    }
                }
                _ => {
                    let mut out = Vec::with_capacity(level.count() as usize);
                    let mut child = 1u64;
                    for j in 1..=level.count() {
                        let m = level.arity(j);
                        let base = child;
                        out.push(node_finish(m, |i| children.at(base + i - 1), a, b));
                        child += m;
                    }
                    Times::Explicit(out)
                }
            }
        };
        below = Some(times);
    }
    let top = below.expect("at least one level");
    debug_assert_eq!(top.count(), 1);
    Ok(top.at(1))
}

fn leaf_times(topology: &Topology, level: &Level, cost: &CostModel) -> Times {
    let a = cost.absorb_ticks;
    let b = cost.node_overhead;
    match (level, cost.arrival) {
        (Level::Uniform { arity, count, last }, Arrival::Stored) => Times::Uniform {
            value: b + a * arity,
            count: *count,
            last: b + a * last,
        },
        _ => {
            let mut out = Vec::with_capacity(level.count() as usize);
            for j in 1..=level.count() {
                let m = level.arity(j);
                out.push(node_finish(
                    m,
                    |i| cost.block_arrival(leaf_item_block(topology, j, i)),
                    a,
                    b,
                ));
            }
            Times::Explicit(out)
        }
    }
}

/// Number of processors the ideal schedule uses: the nodes that embed
/// message bits, which without kangaroo hopping is the base level.
pub fn count_processors(topology: &Topology) -> u64 {
    topology.level(1).count()
}

/// Total payload items absorbed across all nodes: `n` at the base plus one
/// chaining value per edge above.
pub fn work_blocks(topology: &Topology) -> u64 {
    topology.levels().map(Level::total_items).sum()
}

/// Exact payload bit-length of a node, accounting for the short final
/// message block.
pub fn node_payload_bits(topology: &Topology, level_no: u32, index: u64) -> u64 {
    if level_no > 1 {
        return topology.level(level_no).arity(index) * CV_BITS as u64;
    }
    let msg = topology.message_bits();
    match topology.payload_ref(1, index) {
        PayloadRef::Blocks { start, count } => {
            ((start + count) * BLOCK_BITS).min(msg) - (start * BLOCK_BITS).min(msg)
        }
        PayloadRef::BlocksStrided {
            first,
            stride,
            count,
        } => (0..count)
            .map(|k| {
                let b = first + k * stride;
                ((b + 1) * BLOCK_BITS)
                    .min(msg)
                    .saturating_sub(b * BLOCK_BITS)
            })
            .sum(),
        PayloadRef::QwordsStrided {
            first,
            stride,
            count,
        } => (0..count)
            .map(|k| {
                let q = first + k * stride;
                ((q + 1) * 64).min(msg).saturating_sub(q * 64)
            })
            .sum(),
        PayloadRef::Children { .. } => unreachable!(),
    }
}

fn root_interleave(topology: &Topology) -> Option<(u64, u64)> {
    match topology.layout() {
        InterleaveLayout::Contiguous => None,
        InterleaveLayout::Lanes { lanes, block_bits } => Some((block_bits, lanes)),
        InterleaveLayout::Groups {
            group_size,
            slice_bits,
        } => Some((slice_bits, group_size)),
    }
}

/// Equal-length frame target of a level, when it has one.
fn pad_target_bits(topology: &Topology, level_no: u32, config: &FrameConfig) -> Option<u64> {
    let level = topology.level(level_no);
    if level.count() < 2 {
        return None;
    }
    let full = match (level, topology.layout(), level_no) {
        (Level::Uniform { arity, .. }, _, _) => *arity,
        (_, InterleaveLayout::Lanes { .. }, 1) => level.max_arity(),
        _ => return None,
    };
    let class = if level_no == 1 {
        NodeClass::Leaf
    } else {
        NodeClass::Inner {
            arity: full,
            interleave: None,
        }
    };
    Some(frame_total_bits(
        full * BLOCK_BITS,
        &NodeKind {
            class,
            is_root: false,
        },
        config,
        None,
    ))
}

fn node_frame_bits(
    topology: &Topology,
    level_no: u32,
    index: u64,
    config: &FrameConfig,
    pad: Option<u64>,
) -> u64 {
    let is_root = topology.is_root(level_no, index);
    let class = if level_no == 1 {
        NodeClass::Leaf
    } else {
        NodeClass::Inner {
            arity: topology.level(level_no).arity(index),
            interleave: if is_root {
                root_interleave(topology)
            } else {
                None
            },
        }
    };
    frame_total_bits(
        node_payload_bits(topology, level_no, index),
        &NodeKind { class, is_root },
        config,
        if is_root { None } else { pad },
    )
}

/// Exact permutation-call work: what a conforming implementation spends in
/// the absorbing phases of all nodes, equal-length padding included.
pub fn permutation_work(topology: &Topology) -> u64 {
    let config = FrameConfig::default();
    let mut total = 0u64;
    for level_no in 1..=topology.height() {
        let level = topology.level(level_no);
        let count = level.count();
        let pad = pad_target_bits(topology, level_no, &config);
        match level {
            // Uniform interior nodes all frame alike; only the boundary
            // nodes need separate treatment.
            Level::Uniform { .. } if count > 2 => {
                let first = absorb_permutations(node_frame_bits(topology, level_no, 1, &config, pad));
                let last =
                    absorb_permutations(node_frame_bits(topology, level_no, count, &config, pad));
                total += first * (count - 1) + last;
            }
            _ => {
                for j in 1..=count {
                    total +=
                        absorb_permutations(node_frame_bits(topology, level_no, j, &config, pad));
                }
            }
        }
    }
    total
}

/// Peak live hash states of a sequential highest-node-first run with
/// threshold `d`, simulated on counters alone. Mirrors the execution
/// engine's accounting — one unit per open sponge and per buffered chaining
/// value — without touching a sponge.
pub fn live_states_hnf(topology: &Topology, d: u64) -> u64 {
    let n = topology.n_blocks();
    if n <= 1 {
        return 1;
    }
    match topology.layout() {
        InterleaveLayout::Lanes { lanes, .. } => return lanes.min(n) + 1,
        InterleaveLayout::Groups { group_size, .. } => {
            let qwords = topology.message_bits().div_ceil(64);
            return group_size.min(qwords) + 1;
        }
        InterleaveLayout::Contiguous => {}
    }
    let mut sim = HnfCounter::new(topology, d.max(1));
    for _ in 0..n {
        sim.push_block();
    }
    sim.finish()
}

struct HnfLevel {
    open_items: Option<u64>,
    cap: u64,
    next: u64,
    pending: u64,
}

struct HnfCounter<'a> {
    topology: &'a Topology,
    d: u64,
    levels: Vec<HnfLevel>,
    current: u64,
    peak: u64,
}

impl<'a> HnfCounter<'a> {
    fn new(topology: &'a Topology, d: u64) -> Self {
        HnfCounter {
            topology,
            d,
            levels: Vec::new(),
            current: 0,
            peak: 0,
        }
    }

    fn gain(&mut self) {
        self.current += 1;
        self.peak = self.peak.max(self.current);
    }

    fn ensure_level(&mut self, li: usize) {
        while self.levels.len() <= li {
            let lvl = self.levels.len() as u32 + 1;
            self.levels.push(HnfLevel {
                open_items: None,
                cap: self.topology.level(lvl).arity(1),
                next: 1,
                pending: 0,
            });
        }
    }

    fn advance_cap(&mut self, li: usize) {
        let lv = &mut self.levels[li];
        lv.open_items = None;
        lv.next += 1;
        let meta = self.topology.level(li as u32 + 1);
        lv.cap = if lv.next <= meta.count() {
            meta.arity(lv.next)
        } else {
            u64::MAX
        };
    }

    /// Closes the full node at `li`; the sponge becomes a buffered value.
    fn rollover(&mut self, li: usize) {
        self.advance_cap(li);
        self.ensure_level(li + 1);
        self.levels[li + 1].pending += 1;
    }

    fn absorb_one_pending(&mut self, li: usize) {
        if self.levels[li].open_items.is_none() {
            self.gain();
            self.levels[li].open_items = Some(0);
        }
        self.levels[li].pending -= 1;
        self.current -= 1;
        *self.levels[li].open_items.as_mut().unwrap() += 1;
    }

    fn drain(&mut self) {
        'scan: loop {
            let Some(li) = (0..self.levels.len())
                .rev()
                .find(|&i| self.levels[i].pending >= self.d)
            else {
                return;
            };
            while self.levels[li].pending > 0 {
                if self.levels[li].open_items == Some(self.levels[li].cap) {
                    self.rollover(li);
                    continue 'scan;
                }
                self.absorb_one_pending(li);
            }
        }
    }

    fn push_block(&mut self) {
        self.ensure_level(0);
        if self.levels[0].open_items == Some(self.levels[0].cap) {
            self.rollover(0);
            self.drain();
        }
        if self.levels[0].open_items.is_none() {
            self.gain();
            self.levels[0].open_items = Some(0);
        }
        *self.levels[0].open_items.as_mut().unwrap() += 1;
        self.drain();
    }

    fn finish(mut self) -> u64 {
        let mut li = 0;
        while li < self.levels.len() {
            while self.levels[li].pending > 0 {
                if self.levels[li].open_items == Some(self.levels[li].cap) {
                    self.rollover(li);
                } else {
                    self.absorb_one_pending(li);
                }
            }
            debug_assert!(self.levels[li].open_items.is_some());
            let is_top = li + 1 == self.levels.len();
            if self.levels[li].next == 1 && is_top {
                self.current -= 1; // root closes
                break;
            }
            // Close non-root; the value moves one level up.
            self.levels[li].open_items = None;
            self.ensure_level(li + 1);
            self.levels[li + 1].pending += 1;
            li += 1;
        }
        self.peak
    }
}

/// Processor budget for the makespan simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Processors {
    Bounded(u64),
    Unbounded,
}

/// Event-driven greedy list schedule honoring data dependencies: each
/// absorb step occupies a processor for `a` ticks, plus a final `b`-tick
/// overhead step per node. With unbounded processors this reproduces
/// [`ideal_time`] exactly; with one processor it degenerates to the total
/// sequential cost.
pub fn simulate_makespan(
    topology: &Topology,
    cost: &CostModel,
    processors: Processors,
) -> Result<u64> {
    cost.validate()?;
    if processors == Processors::Bounded(0) {
        return Err(Error::config("at least one processor is needed"));
    }
    let a = cost.absorb_ticks;
    let b = cost.node_overhead;

    let height = topology.height();
    let mut level_offset = vec![0usize; height as usize + 1];
    let mut total_nodes = 0usize;
    for lvl in 1..=height {
        level_offset[lvl as usize] = total_nodes;
        total_nodes += topology.level(lvl).count() as usize;
    }
    let id_of = |lvl: u32, j: u64| level_offset[lvl as usize] + j as usize - 1;

    struct Node {
        level: u32,
        index: u64,
        items: u64,
        done: u64,
        in_flight: bool,
        overhead_pending: bool,
        completion: Option<u64>,
        parent: Option<(usize, u64)>,
    }
    let mut nodes: Vec<Node> = Vec::with_capacity(total_nodes);
    for lvl in 1..=height {
        let level = topology.level(lvl);
        for j in 1..=level.count() {
            nodes.push(Node {
                level: lvl,
                index: j,
                items: level.arity(j),
                done: 0,
                in_flight: false,
                overhead_pending: b > 0,
                completion: None,
                parent: None,
            });
        }
    }
    for lvl in 2..=height {
        let level = topology.level(lvl);
        for j in 1..=level.count() {
            let before = level.items_before(j);
            for pos in 1..=level.arity(j) {
                nodes[id_of(lvl - 1, before + pos)].parent = Some((id_of(lvl, j), pos));
            }
        }
    }

    // Availability of item `i` of `id`; `None` while a child is unfinished.
    let item_avail = |nodes: &Vec<Node>, id: usize, i: u64| -> Option<u64> {
        let node = &nodes[id];
        if node.level == 1 {
            Some(cost.block_arrival(leaf_item_block(topology, node.index, i)))
        } else {
            let before = topology.level(node.level).items_before(node.index);
            nodes[id_of(node.level - 1, before + i)].completion
        }
    };

    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Ev {
        Finish(usize),
        Arrive(usize),
    }
    let mut heap: BinaryHeap<Reverse<(u64, Ev)>> = BinaryHeap::new();
    let mut ready: BTreeSet<(u32, u64, usize)> = BTreeSet::new();
    let mut free = match processors {
        Processors::Bounded(p) => p,
        Processors::Unbounded => u64::MAX,
    };
    let mut makespan = 0u64;

    for (id, node) in nodes.iter().enumerate() {
        if node.level == 1 && node.items > 0 {
            match cost.block_arrival(leaf_item_block(topology, node.index, 1)) {
                0 => {
                    ready.insert((1, node.index, id));
                }
                t => heap.push(Reverse((t, Ev::Arrive(id)))),
            }
        }
    }
    // An empty root (zero-block message) has no absorb steps at all.
    if total_nodes == 1 && nodes[0].items == 0 {
        return Ok(b);
    }

    let mut now = 0u64;
    loop {
        while free > 0 {
            let Some(&key) = ready.iter().next() else { break };
            ready.remove(&key);
            let id = key.2;
            let dur = if nodes[id].done < nodes[id].items { a } else { b };
            nodes[id].in_flight = true;
            free -= 1;
            heap.push(Reverse((now + dur, Ev::Finish(id))));
        }
        let Some(Reverse((t, ev))) = heap.pop() else {
            break;
        };
        now = t;
        match ev {
            Ev::Arrive(id) => {
                if !nodes[id].in_flight && nodes[id].completion.is_none() {
                    ready.insert((nodes[id].level, nodes[id].index, id));
                }
            }
            Ev::Finish(id) => {
                free = free.saturating_add(1);
                nodes[id].in_flight = false;
                if nodes[id].done < nodes[id].items {
                    nodes[id].done += 1;
                } else {
                    nodes[id].overhead_pending = false;
                }
                let absorbed_all = nodes[id].done == nodes[id].items;
                if absorbed_all && nodes[id].overhead_pending {
                    nodes[id].overhead_pending = false;
                    ready.insert((nodes[id].level, nodes[id].index, id));
                    continue;
                }
                if absorbed_all {
                    nodes[id].completion = Some(now);
                    makespan = makespan.max(now);
                    if let Some((parent, pos)) = nodes[id].parent {
                        if nodes[parent].done == pos - 1 && !nodes[parent].in_flight {
                            ready.insert((nodes[parent].level, nodes[parent].index, parent));
                        }
                    }
                    continue;
                }
                match item_avail(&nodes, id, nodes[id].done + 1) {
                    Some(at) if at <= now => {
                        ready.insert((nodes[id].level, nodes[id].index, id));
                    }
                    Some(at) => heap.push(Reverse((at, Ev::Arrive(id)))),
                    None => {} // the child's completion will wake this node
                }
            }
        }
    }
    Ok(makespan)
}

/// Aggregate cost metrics for one message length.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Metrics {
    pub n_blocks: u64,
    pub height: u32,
    pub ideal_time: u64,
    pub processors: u64,
    pub work_blocks: u64,
    pub work_permutations: u64,
    pub sum_level_max_arities: u64,
    /// Sequential live states under highest-node-first with d = 1.
    pub hnf_states_d1: u64,
}

pub fn metrics(topology: &Topology, cost: &CostModel) -> Result<Metrics> {
    Ok(Metrics {
        n_blocks: topology.n_blocks(),
        height: topology.height(),
        ideal_time: ideal_time(topology, cost)?,
        processors: count_processors(topology),
        work_blocks: work_blocks(topology),
        work_permutations: permutation_work(topology),
        sum_level_max_arities: topology.levels().map(Level::max_arity).sum(),
        hnf_states_d1: live_states_hnf(topology, 1),
    })
}

/// One growth-report row: metrics plus the mode's claimed-growth ratios.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GrowthRow {
    pub mode: Mode,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub ratios: Vec<(String, f64)>,
}

/// Evaluates the schedule at each message length and reports the metrics
/// normalized against the mode's claimed growth functions, so bounded
/// ratios over a ladder of `n` witness the asymptotic claims.
pub fn growth_report(
    params: &ModeParams,
    n_list: &[u64],
    cost: &CostModel,
) -> Result<Vec<GrowthRow>> {
    let schedule = AritySchedule::new(params.clone())?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let topology = build_topology(&schedule, n * BLOCK_BITS)?;
        let m = metrics(&topology, cost)?;
        let ratios = claimed_ratios(params, &m);
        rows.push(GrowthRow {
            mode: params.mode()?,
            metrics: m,
            ratios,
        });
    }
    Ok(rows)
}

fn claimed_ratios(params: &ModeParams, m: &Metrics) -> Vec<(String, f64)> {
    let n = m.n_blocks as f64;
    let t = m.ideal_time as f64;
    let h = f64::from(m.height);
    let states = m.hnf_states_d1 as f64;
    let procs = m.processors as f64;
    let lg = n.log2();
    let lglg = lg.max(f64::MIN_POSITIVE).log2();
    let lglglg = lglg.max(f64::MIN_POSITIVE).log2();
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut push = |name: &str, value: f64| out.push((name.to_string(), value));
    match params.mode {
        Some(Mode::M1) => {
            push("time/n", t / n);
            push("states", states);
        }
        Some(Mode::M2S) | Some(Mode::M2L) => {
            let q = params.lanes.unwrap_or(1) as f64;
            push("time*q/n", t * q / n);
            push("states", states);
        }
        Some(Mode::M3) => {
            push("time/log2(n)", t / lg);
            push("states/log2(n)", states / lg);
        }
        Some(Mode::M4S) | Some(Mode::M4L) => {
            let eps = params
                .epsilon
                .map(|e| e.as_f64())
                .or(params.height.map(|h| 1.0 / f64::from(h)))
                .unwrap_or(0.5);
            push("time/n^eps", t / n.powf(eps));
            push("states", states);
        }
        Some(Mode::M5S) | Some(Mode::M5L) => {
            let eps = params.epsilon.map(|e| e.as_f64()).unwrap_or(0.5);
            push(
                "time*loglog(n)/log^(1+eps)(n)",
                t * lglg / lg.powf(1.0 + eps),
            );
            push("states*loglog(n)/log2(n)", states * lglg / lg);
        }
        Some(Mode::M6S) | Some(Mode::M6L) => {
            push("time/log2(n)", t / lg);
            push("states/log2(n/log2(n))", states / (n / lg).log2());
            push("processors*log2(n)/n", procs * lg / n);
        }
        Some(Mode::Wc) => {
            let k = params.fixed_arity.unwrap_or(2) as f64;
            push("time*log2(k)/(k*log2(n))", t * k.log2() / (k * lg));
            push("states*log2(k)/log2(n)", states * k.log2() / lg);
        }
        Some(Mode::B1) => {
            push("height/sqrt(2*log2(n))", h / (2.0 * lg).sqrt());
            push(
                "time/n^(1/sqrt(2*log2(n)))",
                t / n.powf(1.0 / (2.0 * lg).sqrt()),
            );
        }
        Some(Mode::B2) => {
            push("height*loglog(n)/log2(n)", h * lglg / lg);
            push("time*loglog^2(n)/log2^2(n)", t * lglg * lglg / (lg * lg));
        }
        Some(Mode::B3) => {
            push("height*logloglog(n)/log2(n)", h * lglglg / lg);
            push(
                "time*logloglog(n)/(log2(n)*loglog(n))",
                t * lglglg / (lg * lglg),
            );
        }
        None => {}
    }
    out
}

/// Renders rows as aligned text, one line per message length.
pub fn render_text(rows: &[GrowthRow]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>12} {:>7} {:>12} {:>12} {:>14} {:>14} {:>10} {:>8}  ratios",
        "n",
        "height",
        "ideal_time",
        "processors",
        "work_blocks",
        "work_perms",
        "sum_max_u",
        "states"
    );
    for row in rows {
        let m = &row.metrics;
        let ratios: Vec<String> = row
            .ratios
            .iter()
            .map(|(k, v)| format!("{k}={v:.4}"))
            .collect();
        let _ = writeln!(
            out,
            "{:>12} {:>7} {:>12} {:>12} {:>14} {:>14} {:>10} {:>8}  {}",
            m.n_blocks,
            m.height,
            m.ideal_time,
            m.processors,
            m.work_blocks,
            m.work_permutations,
            m.sum_level_max_arities,
            m.hnf_states_d1,
            ratios.join(" ")
        );
    }
    out
}

/// One JSON object per row, newline separated.
pub fn render_json_lines(rows: &[GrowthRow]) -> String {
    rows.iter()
        .map(|row| serde_json::to_string(row).expect("metrics serialize"))
        .collect::<Vec<_>>()
        .join("\n")
}
