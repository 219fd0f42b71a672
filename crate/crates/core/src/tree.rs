//! Tree topologies: the concrete node structure a schedule induces on a
//! message, built either from the whole message or incrementally from a
//! stream, plus the block/slice interleaving maps.
//!
//! A topology records, per level, the arity of every node. Levels with a
//! uniform arity are stored compressed so analyzer runs on multi-million
//! block messages stay cheap.

use crate::error::{Error, Result};
use crate::inner::CV_BITS;
use crate::schedule::{Arity, AritySchedule, LevelArities, Mode, ScheduleKind};

/// Message block width in bits.
pub const BLOCK_BITS: u64 = CV_BITS as u64;

const MAX_LEVELS: u32 = 256;

/// Arities of one level of the tree, base level first. The last node of a
/// level may be smaller than its schedule arity.
#[derive(Clone, Debug)]
pub enum Level {
    Uniform { arity: u64, count: u64, last: u64 },
    Explicit { arities: Vec<u64>, prefix: Vec<u64> },
}

impl Level {
    fn explicit(arities: Vec<u64>) -> Self {
        let mut prefix = Vec::with_capacity(arities.len());
        let mut acc = 0u64;
        for a in &arities {
            prefix.push(acc);
            acc += a;
        }
        Level::Explicit { arities, prefix }
    }

    pub fn count(&self) -> u64 {
        match self {
            Level::Uniform { count, .. } => *count,
            Level::Explicit { arities, .. } => arities.len() as u64,
        }
    }

    /// Arity of node `index` (1-based).
    pub fn arity(&self, index: u64) -> u64 {
        debug_assert!(index >= 1 && index <= self.count());
        match self {
            Level::Uniform { arity, count, last } => {
                if index == *count {
                    *last
                } else {
                    *arity
                }
            }
            Level::Explicit { arities, .. } => arities[index as usize - 1],
        }
    }

    /// Sum of the arities of nodes before `index` (1-based).
    pub fn items_before(&self, index: u64) -> u64 {
        debug_assert!(index >= 1 && index <= self.count());
        match self {
            Level::Uniform { arity, .. } => (index - 1) * arity,
            Level::Explicit { prefix, .. } => prefix[index as usize - 1],
        }
    }

    pub fn total_items(&self) -> u64 {
        match self {
            Level::Uniform { arity, count, last } => arity * (count - 1) + last,
            Level::Explicit { arities, prefix } => {
                prefix.last().copied().unwrap_or(0) + arities.last().copied().unwrap_or(0)
            }
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match self {
            Level::Uniform { arity, count, last } => {
                let (arity, count, last) = (*arity, *count, *last);
                Box::new((1..=count).map(move |j| if j == count { last } else { arity }))
            }
            Level::Explicit { arities, .. } => Box::new(arities.iter().copied()),
        }
    }

    /// Largest arity on the level.
    pub fn max_arity(&self) -> u64 {
        match self {
            Level::Uniform { arity, last, .. } => (*arity).max(*last),
            Level::Explicit { arities, .. } => arities.iter().copied().max().unwrap_or(0),
        }
    }
}

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.count() == other.count() && self.iter().eq(other.iter())
    }
}

/// How level-1 payloads map onto the message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterleaveLayout {
    /// Node `j` covers a contiguous block range.
    Contiguous,
    /// Blocks are dealt round-robin over `lanes` level-1 nodes.
    Lanes { lanes: u64, block_bits: u64 },
    /// 64-bit slices are dealt round-robin inside sibling groups of
    /// `group_size` nodes whose per-node block count equals the group index.
    Groups { group_size: u64, slice_bits: u64 },
}

/// Where a node's payload comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayloadRef {
    /// Contiguous message blocks (0-based indices, half open).
    Blocks { start: u64, count: u64 },
    /// Strided message blocks: `first`, `first + stride`, ...
    BlocksStrided { first: u64, stride: u64, count: u64 },
    /// Strided 64-bit message slices (0-based qword indices).
    QwordsStrided { first: u64, stride: u64, count: u64 },
    /// Chaining values of nodes `start+1 ..= start+count` (1-based) one
    /// level below.
    Children { start: u64, count: u64 },
}

/// The full two-dimensional arity structure for one message length.
#[derive(Clone, Debug)]
pub struct Topology {
    mode: Mode,
    levels: Vec<Level>,
    n_blocks: u64,
    message_bits: u64,
    layout: InterleaveLayout,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.n_blocks == other.n_blocks
            && self.message_bits == other.message_bits
            && self.layout == other.layout
            && self.levels == other.levels
    }
}

impl Topology {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn height(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn level(&self, level: u32) -> &Level {
        &self.levels[level as usize - 1]
    }

    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter()
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_blocks
    }

    pub fn message_bits(&self) -> u64 {
        self.message_bits
    }

    pub fn layout(&self) -> InterleaveLayout {
        self.layout
    }

    pub fn is_root(&self, level: u32, index: u64) -> bool {
        level == self.height() && index == 1
    }

    /// Total node count, which is also the number of inner-function calls
    /// needed to hash the message.
    pub fn node_count(&self) -> u64 {
        self.levels.iter().map(|l| l.count()).sum()
    }

    pub fn payload_ref(&self, level: u32, index: u64) -> PayloadRef {
        let lv = self.level(level);
        if level > 1 {
            return PayloadRef::Children {
                start: lv.items_before(index),
                count: lv.arity(index),
            };
        }
        match self.layout {
            InterleaveLayout::Contiguous => PayloadRef::Blocks {
                start: lv.items_before(index),
                count: lv.arity(index),
            },
            InterleaveLayout::Lanes { lanes, .. } => PayloadRef::BlocksStrided {
                first: index - 1,
                stride: lanes,
                count: lv.arity(index),
            },
            InterleaveLayout::Groups { group_size, .. } => {
                let group = (index - 1) / group_size + 1;
                let pos = (index - 1) % group_size; // 0-based within group
                let start = 8 * group_size * (group - 1) * group / 2;
                let total_qwords = self.message_bits.div_ceil(64);
                let avail = (8 * group_size * group).min(total_qwords - start);
                let count = avail.saturating_sub(pos).div_ceil(group_size);
                PayloadRef::QwordsStrided {
                    first: start + pos,
                    stride: group_size,
                    count,
                }
            }
        }
    }

    /// One line per node: level, index, arity, kind, payload range.
    pub fn export_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode {} blocks {} bits {} height {}",
            self.mode.as_str(),
            self.n_blocks,
            self.message_bits,
            self.height()
        );
        for level in 1..=self.height() {
            let lv = self.level(level);
            for index in 1..=lv.count() {
                let kind = if level == 1 { "leaf" } else { "inner" };
                let payload = match self.payload_ref(level, index) {
                    PayloadRef::Blocks { start, count } => {
                        format!("blocks {}..{}", start, start + count)
                    }
                    PayloadRef::BlocksStrided {
                        first,
                        stride,
                        count,
                    } => format!("blocks {first}+{stride}k x{count}"),
                    PayloadRef::QwordsStrided {
                        first,
                        stride,
                        count,
                    } => format!("qwords {first}+{stride}k x{count}"),
                    PayloadRef::Children { start, count } => {
                        format!("cv {}..{}", start, start + count)
                    }
                };
                let _ = writeln!(
                    out,
                    "{level}\t{index}\t{}\t{kind}\t{payload}",
                    lv.arity(index)
                );
            }
        }
        out
    }
}

/// Builds the topology for a whole message of `message_bits` bits.
///
/// Levels are computed bottom-up with the splitting rule: level `i+1` takes
/// the smallest node count whose arities cover level `i`, the last node
/// receiving the remainder, until a single node remains.
pub fn build_topology(schedule: &AritySchedule, message_bits: u64) -> Result<Topology> {
    let n_blocks = message_bits.div_ceil(BLOCK_BITS);
    let mode = schedule.params().mode()?;
    let layout = layout_for(schedule)?;

    if n_blocks <= 1 {
        return Ok(Topology {
            mode,
            levels: vec![Level::Uniform {
                arity: n_blocks,
                count: 1,
                last: n_blocks,
            }],
            n_blocks,
            message_bits,
            layout: InterleaveLayout::Contiguous,
        });
    }

    let mut levels = Vec::new();
    if let InterleaveLayout::Groups { group_size, .. } = layout {
        levels.push(simd_base_level(message_bits, group_size));
    }

    let mut prev = levels.last().map(Level::count).unwrap_or(n_blocks);
    while prev > 1 || levels.is_empty() {
        let level_no = levels.len() as u32 + 1;
        if level_no > MAX_LEVELS {
            return Err(Error::mode(format!(
                "schedule stalls: no root after {MAX_LEVELS} levels"
            )));
        }
        let level = match schedule.level_arities(level_no, Some(n_blocks))? {
            LevelArities::Uniform(Arity::Unbounded) => Level::Uniform {
                arity: prev,
                count: 1,
                last: prev,
            },
            LevelArities::Uniform(Arity::Finite(u)) => {
                if u < 1 {
                    return Err(Error::mode(format!(
                        "schedule stalls: level {level_no} arity is 0"
                    )));
                }
                let count = prev.div_ceil(u);
                Level::Uniform {
                    arity: u,
                    count,
                    last: prev - (count - 1) * u,
                }
            }
            LevelArities::PerNode(iter) => {
                let mut arities = Vec::new();
                let mut covered = 0u64;
                for a in iter {
                    if a < 1 {
                        return Err(Error::mode(format!(
                            "schedule stalls: level {level_no} arity is 0"
                        )));
                    }
                    if covered + a >= prev {
                        arities.push(prev - covered);
                        covered = prev;
                        break;
                    }
                    arities.push(a);
                    covered += a;
                }
                if covered < prev {
                    return Err(Error::mode(
                        "schedule arities ran out before covering the level",
                    ));
                }
                Level::explicit(arities)
            }
        };
        prev = level.count();
        levels.push(level);
    }

    Ok(Topology {
        mode,
        levels,
        n_blocks,
        message_bits,
        layout,
    })
}

fn layout_for(schedule: &AritySchedule) -> Result<InterleaveLayout> {
    if schedule.is_reduced() {
        return Ok(InterleaveLayout::Contiguous);
    }
    Ok(match schedule.params().interleave()? {
        None => InterleaveLayout::Contiguous,
        Some(il) => match schedule.params().mode()? {
            Mode::M2L => InterleaveLayout::Lanes {
                lanes: il.group_size,
                block_bits: il.block_bits,
            },
            _ => InterleaveLayout::Groups {
                group_size: il.group_size,
                slice_bits: il.block_bits,
            },
        },
    })
}

/// Base level of the grouped mode 4L variant: `group_size` sibling nodes
/// per group, the nodes of group `g` holding `g` blocks' worth of 64-bit
/// slices each. Nodes that receive no slice are pruned. Arities are
/// recorded in block equivalents.
fn simd_base_level(message_bits: u64, group_size: u64) -> Level {
    let total_qwords = message_bits.div_ceil(64);
    let mut arities = Vec::new();
    let mut start = 0u64;
    let mut group = 1u64;
    while start < total_qwords {
        let avail = (8 * group_size * group).min(total_qwords - start);
        for pos in 0..group_size.min(avail) {
            let qwords = (avail - pos).div_ceil(group_size);
            arities.push(qwords.div_ceil(8).max(1));
        }
        start += avail;
        group += 1;
    }
    Level::explicit(arities)
}

/// Incremental topology construction for live schedules.
///
/// Keeps one partially filled node per level; a full node is closed when
/// the next item for its level arrives, so the final node of every level —
/// and the root — are only committed by [`StreamBuilder::finalize`].
pub struct StreamBuilder {
    schedule: AritySchedule,
    levels: Vec<BuilderLevel>,
    blocks: u64,
    message_bits: u64,
    last_block_short: bool,
}

struct BuilderLevel {
    closed: u64,
    fill: u64,
    next_arity: u64,
    arities: Box<dyn Iterator<Item = u64>>,
}

impl BuilderLevel {
    fn new(schedule: &AritySchedule, level: u32) -> Result<Self> {
        let mut arities: Box<dyn Iterator<Item = u64>> =
            match schedule.level_arities(level, None)? {
                LevelArities::Uniform(Arity::Finite(u)) => Box::new(std::iter::repeat(u)),
                LevelArities::Uniform(Arity::Unbounded) => {
                    Box::new(std::iter::repeat(u64::MAX))
                }
                LevelArities::PerNode(it) => it,
            };
        let next_arity = arities
            .next()
            .ok_or_else(|| Error::mode("schedule yields no arities"))?;
        Ok(BuilderLevel {
            closed: 0,
            fill: 0,
            next_arity,
            arities,
        })
    }

    fn advance(&mut self) {
        self.closed += 1;
        self.fill = 0;
        self.next_arity = self.arities.next().expect("infinite arity stream");
    }
}

impl StreamBuilder {
    pub fn new(schedule: AritySchedule) -> Result<Self> {
        if schedule.kind() == ScheduleKind::Stored {
            return Err(Error::mode(format!(
                "mode {} needs the message length; it cannot grow a stream",
                schedule.params().mode()?.as_str()
            )));
        }
        Ok(StreamBuilder {
            schedule,
            levels: Vec::new(),
            blocks: 0,
            message_bits: 0,
            last_block_short: false,
        })
    }

    pub fn blocks_seen(&self) -> u64 {
        self.blocks
    }

    /// Accounts one message block of `bits` bits (1..=512; only the final
    /// block may be short).
    pub fn push_block(&mut self, bits: u32) -> Result<()> {
        if bits == 0 || u64::from(bits) > BLOCK_BITS {
            return Err(Error::mode("block must carry 1..=512 bits"));
        }
        if self.last_block_short {
            return Err(Error::mode("a short block must be the last block"));
        }
        self.last_block_short = u64::from(bits) < BLOCK_BITS;
        self.blocks += 1;
        self.message_bits += u64::from(bits);
        if !self.counts_only() {
            self.push_item(1)?;
        }
        Ok(())
    }

    /// Lane and group layouts are fully determined by the block count, so
    /// the builder only counts for them.
    fn counts_only(&self) -> bool {
        matches!(self.schedule.params().mode(), Ok(Mode::M2L))
            || self.schedule.params().group_size.is_some()
    }

    fn push_item(&mut self, level: u32) -> Result<()> {
        if self.levels.len() < level as usize {
            self.levels.push(BuilderLevel::new(&self.schedule, level)?);
        }
        let lv = &mut self.levels[level as usize - 1];
        if lv.fill == lv.next_arity {
            lv.advance();
            self.push_item(level + 1)?;
        }
        self.levels[level as usize - 1].fill += 1;
        Ok(())
    }

    /// Closes the remaining partial nodes bottom-up and returns the final
    /// topology; identical to [`build_topology`] on the same message.
    pub fn finalize(self) -> Result<Topology> {
        if self.blocks <= 1 || self.counts_only() {
            return build_topology(&self.schedule, self.message_bits);
        }
        let mut counts: Vec<(u64, Option<u64>)> = Vec::new(); // (full nodes, final arity)
        let mut carry = 0u64; // chaining values propagating upward
        let top = self.levels.len();
        for (idx, mut lv) in self.levels.into_iter().enumerate() {
            // Group the open node's items plus everything the flush sent up
            // from below, continuing with this level's arity stream.
            let mut items = lv.fill + carry;
            let mut full = lv.closed;
            let mut cap = lv.next_arity;
            while items > cap {
                full += 1;
                items -= cap;
                cap = lv.arities.next().expect("infinite arity stream");
            }
            debug_assert!(items >= 1);
            let total = full + 1;
            carry = total - lv.closed;
            counts.push((full, Some(items)));
            if total == 1 && idx + 1 == top {
                break;
            }
        }
        // Upper levels that only come into being as the flush cascades.
        let mut prev_total = {
            let (c, l) = *counts.last().expect("at least one level");
            c + u64::from(l.is_some())
        };
        let mut level_no = counts.len() as u32 + 1;
        while prev_total > 1 {
            if level_no > MAX_LEVELS {
                return Err(Error::mode("schedule stalls: no root during finalize"));
            }
            let mut closed = 0u64;
            let mut covered = 0u64;
            let mut last = None;
            match self.schedule.level_arities(level_no, Some(self.blocks))? {
                LevelArities::Uniform(Arity::Unbounded) => last = Some(prev_total),
                LevelArities::Uniform(Arity::Finite(u)) => {
                    if u < 1 {
                        return Err(Error::mode("schedule stalls in finalize"));
                    }
                    let count = prev_total.div_ceil(u);
                    closed = count - 1;
                    last = Some(prev_total - closed * u);
                }
                LevelArities::PerNode(iter) => {
                    for a in iter {
                        if covered + a >= prev_total {
                            last = Some(prev_total - covered);
                            break;
                        }
                        closed += 1;
                        covered += a;
                    }
                }
            }
            prev_total = closed + u64::from(last.is_some());
            counts.push((closed, last));
            level_no += 1;
        }

        // Materialize the levels from the schedule plus the recorded
        // remainders.
        let mut levels = Vec::with_capacity(counts.len());
        for (idx, (closed, last)) in counts.iter().enumerate() {
            let level_no = idx as u32 + 1;
            let level = match self.schedule.level_arities(level_no, Some(self.blocks))? {
                LevelArities::Uniform(Arity::Unbounded) => Level::Uniform {
                    arity: last.unwrap_or(0),
                    count: 1,
                    last: last.unwrap_or(0),
                },
                LevelArities::Uniform(Arity::Finite(u)) => Level::Uniform {
                    arity: u,
                    count: closed + u64::from(last.is_some()),
                    last: last.unwrap_or(u),
                },
                LevelArities::PerNode(iter) => {
                    let mut arities: Vec<u64> = iter.take(*closed as usize).collect();
                    if let Some(l) = last {
                        arities.push(*l);
                    }
                    Level::explicit(arities)
                }
            };
            levels.push(level);
        }
        Ok(Topology {
            mode: self.schedule.params().mode()?,
            levels,
            n_blocks: self.blocks,
            message_bits: self.message_bits,
            layout: layout_for(&self.schedule)?,
        })
    }
}

/// Round-robin lane assignment for mode 2L: block `block_index` (0-based)
/// lands on lane `block_index mod lanes`.
pub fn lane_for_block(lanes: u64, block_index: u64) -> u64 {
    debug_assert!(lanes >= 1);
    block_index % lanes
}

/// Placement of a 64-bit message slice under grouped interleaving.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlicePlacement {
    /// 1-based group index; group `g` holds `group_size` nodes of `g`
    /// blocks each.
    pub group: u64,
    /// 1-based node within the group.
    pub node_in_group: u64,
    /// 1-based slice position within the node.
    pub position: u64,
}

/// Maps 1-based slice index `slice` to its node under grouped round-robin
/// interleaving with `group_size` siblings per group.
pub fn simd_slice_placement(group_size: u64, slice: u64) -> SlicePlacement {
    debug_assert!(group_size >= 1 && slice >= 1);
    let mut group = 1u64;
    let mut start = 0u64; // slices before this group (0-based)
    loop {
        let span = 8 * group_size * group;
        if slice <= start + span {
            let p = slice - start - 1; // 0-based within group
            return SlicePlacement {
                group,
                node_in_group: p % group_size + 1,
                position: p / group_size + 1,
            };
        }
        start += span;
        group += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{ModeParams, Ratio};

    fn sched(params: ModeParams) -> AritySchedule {
        AritySchedule::new(params).unwrap()
    }

    fn arities(t: &Topology) -> Vec<Vec<u64>> {
        t.levels().map(|l| l.iter().collect()).collect()
    }

    fn blocks_topology(schedule: &AritySchedule, n: u64) -> Topology {
        build_topology(schedule, n * BLOCK_BITS).unwrap()
    }

    #[test]
    fn mode4s_figure_topology() {
        let s = sched(ModeParams {
            epsilon: Some(Ratio::new(1, 2).unwrap()),
            ..ModeParams::new(Mode::M4S)
        });
        let t = blocks_topology(&s, 10);
        assert_eq!(arities(&t), vec![vec![4, 4, 2], vec![3]]);
    }

    #[test]
    fn mode6s_figure_topology() {
        let s = sched(ModeParams {
            base: Some(2),
            ..ModeParams::new(Mode::M6S)
        });
        let t = blocks_topology(&s, 16);
        assert_eq!(arities(&t), vec![vec![4, 4, 4, 4], vec![2, 2], vec![2]]);
    }

    #[test]
    fn mode4l_figure_topologies() {
        let h2 = sched(ModeParams {
            height: Some(2),
            ..ModeParams::new(Mode::M4L)
        });
        let t = blocks_topology(&h2, 10);
        assert_eq!(arities(&t), vec![vec![2, 3, 4, 1], vec![4]]);

        let h3 = sched(ModeParams {
            height: Some(3),
            ..ModeParams::new(Mode::M4L)
        });
        let t = blocks_topology(&h3, 14);
        assert_eq!(arities(&t), vec![vec![2, 3, 2, 3, 4], vec![2, 3], vec![2]]);
    }

    #[test]
    fn single_block_message_is_a_leaf_root() {
        for params in [
            ModeParams::new(Mode::M3),
            ModeParams {
                epsilon: Some(Ratio::new(1, 2).unwrap()),
                ..ModeParams::new(Mode::M4S)
            },
            ModeParams {
                chunk_blocks: Some(8),
                ..ModeParams::new(Mode::M1)
            },
        ] {
            let t = build_topology(&sched(params), 512).unwrap();
            assert_eq!(t.height(), 1);
            assert_eq!(t.level(1).count(), 1);
            assert_eq!(t.level(1).arity(1), 1);
        }
    }

    #[test]
    fn empty_message_topology() {
        let t = build_topology(&sched(ModeParams::new(Mode::M3)), 0).unwrap();
        assert_eq!(t.height(), 1);
        assert_eq!(t.n_blocks(), 0);
        assert_eq!(t.level(1).arity(1), 0);
    }

    #[test]
    fn mode6l_ten_blocks() {
        let s = sched(ModeParams {
            base: Some(2),
            ..ModeParams::new(Mode::M6L)
        });
        let t = blocks_topology(&s, 10);
        assert_eq!(arities(&t), vec![vec![2, 2, 3, 3], vec![2, 2], vec![2]]);
    }

    #[test]
    fn mode2l_lane_topology() {
        let s = sched(ModeParams {
            lanes: Some(4),
            ..ModeParams::new(Mode::M2L)
        });
        let t = blocks_topology(&s, 10);
        assert_eq!(arities(&t), vec![vec![3, 3, 2, 2], vec![4]]);
        assert_eq!(
            t.payload_ref(1, 2),
            PayloadRef::BlocksStrided {
                first: 1,
                stride: 4,
                count: 3
            }
        );
    }

    #[test]
    fn ceiling_identity_for_fixed_level_modes() {
        // l_i = ceil(n / (u_1 .. u_i)) for fixed per-level arities.
        for (params, n) in [
            (ModeParams::new(Mode::M3), 1000u64),
            (ModeParams::new(Mode::B2), 1000),
            (
                ModeParams {
                    base: Some(2),
                    ..ModeParams::new(Mode::M6S)
                },
                4096,
            ),
            (
                ModeParams {
                    epsilon: Some(Ratio::new(1, 3).unwrap()),
                    ..ModeParams::new(Mode::M4S)
                },
                2085,
            ),
        ] {
            let s = sched(params);
            let t = blocks_topology(&s, n);
            let mut product = 1u64;
            for level in 1..=t.height() {
                product = product.saturating_mul(s.level_uniform(level, Some(n)).unwrap());
                assert_eq!(
                    t.level(level).count(),
                    n.div_ceil(product),
                    "level {level} of {n} blocks"
                );
            }
        }
    }

    #[test]
    fn conservation_blocks_and_children() {
        for (params, n) in [
            (ModeParams::new(Mode::M3), 999u64),
            (
                ModeParams {
                    height: Some(3),
                    ..ModeParams::new(Mode::M4L)
                },
                500,
            ),
            (
                ModeParams {
                    base: Some(3),
                    epsilon: Some(Ratio::new(1, 2).unwrap()),
                    ..ModeParams::new(Mode::M5L)
                },
                777,
            ),
            (
                ModeParams {
                    base: Some(2),
                    ..ModeParams::new(Mode::M6S)
                },
                321,
            ),
        ] {
            let t = blocks_topology(&sched(params), n);
            assert_eq!(t.level(1).total_items(), n);
            for level in 2..=t.height() {
                assert_eq!(
                    t.level(level).total_items(),
                    t.level(level - 1).count(),
                    "level {level}"
                );
            }
            assert_eq!(t.level(t.height()).count(), 1);
        }
    }

    #[test]
    fn b2_level_sizes_example() {
        let t = blocks_topology(&sched(ModeParams::new(Mode::B2)), 10);
        assert_eq!(arities(&t), vec![vec![2, 2, 2, 2, 2], vec![3, 2], vec![2]]);
        assert_eq!(t.height(), 3);
    }

    #[test]
    fn stream_matches_batch_for_live_modes() {
        let cases = vec![
            ModeParams::new(Mode::M3),
            ModeParams::new(Mode::M1),
            ModeParams::new(Mode::B1),
            ModeParams::new(Mode::B2),
            ModeParams::new(Mode::B3),
            ModeParams {
                fixed_arity: Some(4),
                ..ModeParams::new(Mode::Wc)
            },
            ModeParams {
                height: Some(2),
                ..ModeParams::new(Mode::M4L)
            },
            ModeParams {
                height: Some(4),
                ..ModeParams::new(Mode::M4L)
            },
            ModeParams {
                base: Some(2),
                epsilon: Some(Ratio::new(1, 2).unwrap()),
                ..ModeParams::new(Mode::M5L)
            },
            ModeParams {
                base: Some(2),
                ..ModeParams::new(Mode::M6L)
            },
            ModeParams {
                lanes: Some(3),
                ..ModeParams::new(Mode::M2L)
            },
        ];
        for params in cases {
            let s = sched(params.clone());
            for n in [1u64, 2, 3, 5, 9, 10, 17, 64, 100, 257] {
                let mut builder = StreamBuilder::new(s.clone()).unwrap();
                for _ in 0..n {
                    builder.push_block(512).unwrap();
                }
                let streamed = builder.finalize().unwrap();
                let batch = blocks_topology(&s, n);
                assert_eq!(streamed, batch, "mode {:?} n {n}", params.mode);
            }
        }
    }

    #[test]
    fn stream_rejects_stored_modes() {
        let s = sched(ModeParams {
            epsilon: Some(Ratio::new(1, 2).unwrap()),
            ..ModeParams::new(Mode::M4S)
        });
        assert!(StreamBuilder::new(s).is_err());
    }

    #[test]
    fn prefix_stability_of_live_modes() {
        for params in [
            ModeParams {
                height: Some(3),
                ..ModeParams::new(Mode::M4L)
            },
            ModeParams {
                base: Some(2),
                epsilon: Some(Ratio::new(1, 3).unwrap()),
                ..ModeParams::new(Mode::M5L)
            },
            ModeParams {
                base: Some(2),
                ..ModeParams::new(Mode::M6L)
            },
        ] {
            let s = sched(params);
            for n in [5u64, 20, 100] {
                let small = blocks_topology(&s, n);
                let big = blocks_topology(&s, n + 37);
                for level in 1..=small.height() {
                    let count = small.level(level).count();
                    for j in 1..count {
                        assert_eq!(
                            small.level(level).arity(j),
                            big.level(level).arity(j),
                            "level {level} node {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn stored_modes_reach_a_single_root() {
        // Sampled n up to 2^20: every stored mode terminates with one root.
        let ns: Vec<u64> = (0..=20u32)
            .map(|k| 1u64 << k)
            .chain([3, 7, 100, 999, 12345, 777_777, (1 << 20) - 1])
            .collect();
        for params in [
            ModeParams {
                lanes: Some(4),
                ..ModeParams::new(Mode::M2S)
            },
            ModeParams {
                epsilon: Some(Ratio::new(1, 2).unwrap()),
                ..ModeParams::new(Mode::M4S)
            },
            ModeParams {
                epsilon: Some(Ratio::new(1, 3).unwrap()),
                ..ModeParams::new(Mode::M5S)
            },
            ModeParams {
                base: Some(2),
                ..ModeParams::new(Mode::M6S)
            },
            ModeParams {
                base: Some(5),
                ..ModeParams::new(Mode::M6S)
            },
        ] {
            let s = sched(params.clone());
            for &n in &ns {
                let t = blocks_topology(&s, n);
                assert_eq!(t.level(t.height()).count(), 1, "mode {:?} n {n}", params.mode);
                assert_eq!(t.level(1).total_items(), n);
            }
        }
    }

    #[test]
    fn lane_map_is_round_robin() {
        assert_eq!(lane_for_block(4, 0), 0);
        assert_eq!(lane_for_block(4, 7), 3);
        let lanes: Vec<u64> = (0..9).map(|b| lane_for_block(3, b)).collect();
        assert_eq!(lanes, vec![0, 1, 2, 0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn slice_placement_examples() {
        // Group 1 holds 4 single-block nodes = 32 qwords; slices 1..=32
        // cycle through its nodes.
        for s in 1..=32u64 {
            let p = simd_slice_placement(4, s);
            assert_eq!(p.group, 1);
            assert_eq!(p.node_in_group, (s - 1) % 4 + 1);
        }
        // s_{32+i} opens group 2.
        let p = simd_slice_placement(4, 33);
        assert_eq!(
            p,
            SlicePlacement {
                group: 2,
                node_in_group: 1,
                position: 1
            }
        );
        // s_95 = s_{92+3}: node 3 of group 2, final position.
        let p = simd_slice_placement(4, 95);
        assert_eq!(
            p,
            SlicePlacement {
                group: 2,
                node_in_group: 3,
                position: 16
            }
        );
    }

    #[test]
    fn simd_base_level_prunes_empty_nodes() {
        let s = sched(ModeParams {
            height: Some(2),
            group_size: Some(4),
            ..ModeParams::new(Mode::M4L)
        });
        // 5 blocks = 40 qwords: group 1 takes 32 (four 1-block nodes), the
        // remaining 8 qwords spread over the four 2-block nodes of group 2.
        let t = blocks_topology(&s, 5);
        assert_eq!(t.level(1).count(), 8);
        assert_eq!(
            t.payload_ref(1, 5),
            PayloadRef::QwordsStrided {
                first: 32,
                stride: 4,
                count: 2
            }
        );
        let covered: u64 = (1..=t.level(1).count())
            .map(|j| match t.payload_ref(1, j) {
                PayloadRef::QwordsStrided { count, .. } => count,
                _ => unreachable!(),
            })
            .sum();
        assert_eq!(covered, 40);
    }
}
