//! Parameterizable tree hashing over RawSHAKE256 with Sakura node coding.
//!
//! The crate is organized around the pipeline that turns a message into a
//! digest:
//!
//! - [`schedule`]: arity schedules `u(i, j)` for every mode, from the
//!   classic fixed-fanout trees to the live-streaming schedules whose
//!   arities never consult the message length, plus the processor-reduction
//!   transform.
//! - [`tree`]: topology construction (whole-message and incremental) and
//!   the interleaving maps for lane and SIMD-group layouts.
//! - [`coding`]: the bit-exact Sakura frame serialization of nodes.
//! - [`inner`]: the inner function, RawSHAKE256 on Keccak-f\[1600\], with an
//!   incremental bit-granular absorb interface.
//! - [`exec`]: digest computation over a topology by three strategies
//!   (sequential highest-node-first, stored-content subtree partitioning,
//!   buffered level-wise streaming) with live-state instrumentation.
//! - [`analyze`]: the cost analyzer; ideal parallel time, bounded-processor
//!   makespans by discrete-event simulation, and growth reports.
//!
//! The node wire format and the command-line interface are documented in
//! `docs/format.md` and `docs/cli.md`.

pub mod analyze;
pub mod bits;
pub mod coding;
pub mod error;
pub mod exec;
pub mod inner;
pub mod schedule;
pub mod tree;

pub use bits::BitString;
pub use coding::{decode_node, frame_node, FrameConfig, NodeClass, NodeKind};
pub use error::{Error, Result};
pub use inner::{ChainingValue, Sponge, Squeezer};
pub use schedule::{
    reduce_processors, Arity, AritySchedule, Mode, ModeParams, Ratio, ScheduleKind,
};
pub use exec::{ExecOutput, ExecReport};
pub use tree::{build_topology, StreamBuilder, Topology};

