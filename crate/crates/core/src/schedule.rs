//! Arity schedules: the per-mode rules that fix the fanout of every tree
//! node, plus the processor-reduction transform.
//!
//! Everything here is pure integer/float arithmetic; no hashing. Stored
//! schedules may consult the message length `n`, live schedules never do,
//! which is what makes them usable on unbounded streams. Ceilings are
//! computed in exact integer arithmetic wherever the formula permits; where
//! a real power is unavoidable the double-precision guess is re-checked
//! against the adjacent integer candidates.

use crate::error::{Error, Result};

/// Tree hash modes.
///
/// The `S` family needs the message size up front, the `L` family and the
/// classic modes can run on live streams. `Wc` and `B1`..`B3` are the
/// constant- and increasing-level-arity schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Mode {
    M1,
    M2S,
    M2L,
    M3,
    M4S,
    M5S,
    M6S,
    M4L,
    M5L,
    M6L,
    Wc,
    B1,
    B2,
    B3,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::M1 => "1",
            Mode::M2S => "2S",
            Mode::M2L => "2L",
            Mode::M3 => "3",
            Mode::M4S => "4S",
            Mode::M5S => "5S",
            Mode::M6S => "6S",
            Mode::M4L => "4L",
            Mode::M5L => "5L",
            Mode::M6L => "6L",
            Mode::Wc => "WC",
            Mode::B1 => "B1",
            Mode::B2 => "B2",
            Mode::B3 => "B3",
        }
    }

    pub fn all() -> &'static [Mode] {
        &[
            Mode::M1,
            Mode::M2S,
            Mode::M2L,
            Mode::M3,
            Mode::M4S,
            Mode::M5S,
            Mode::M6S,
            Mode::M4L,
            Mode::M5L,
            Mode::M6L,
            Mode::Wc,
            Mode::B1,
            Mode::B2,
            Mode::B3,
        ]
    }

    /// True when node arities never depend on the message length.
    pub fn is_live(&self) -> bool {
        !matches!(self, Mode::M2S | Mode::M4S | Mode::M5S | Mode::M6S)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        Mode::all()
            .iter()
            .copied()
            .find(|m| m.as_str() == up)
            .ok_or_else(|| Error::config(format!("unknown mode `{s}`")))
    }
}

/// An exact rational in (0, 1), used for the exponent parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::config(format!(
                "exponent must lie strictly between 0 and 1, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// For a unit fraction 1/h, returns h.
    pub fn reciprocal_if_unit(&self) -> Option<u64> {
        (self.num == 1).then_some(self.den)
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    /// Accepts `a/b`, a decimal like `0.25`, or an integer reciprocal is not
    /// implied — `2` is rejected since the exponent must be below one.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u64>();
            let den = b.trim().parse::<u64>();
            if let (Ok(num), Ok(den)) = (num, den) {
                return Ratio::new(num, den);
            }
        } else if let Some(frac) = s.strip_prefix("0.") {
            if !frac.is_empty() && frac.chars().all(|c| c.is_ascii_digit()) && frac.len() <= 9 {
                let num = frac.parse::<u64>().unwrap();
                let den = 10u64.pow(frac.len() as u32);
                return Ratio::new(num, den);
            }
        }
        Err(Error::config(format!("cannot parse exponent `{s}`")))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Interleaving configuration: slice width in bits and sibling group size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct InterleaveParams {
    pub block_bits: u64,
    pub group_size: u64,
}

/// Mode selection plus every tunable the schedules read.
///
/// Fields irrelevant to the selected mode must stay `None`; `validate`
/// enforces each mode's requirements.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct ModeParams {
    pub mode: Option<Mode>,
    /// Exponent parameter for modes 4S, 5S, 5L.
    pub epsilon: Option<Ratio>,
    /// Logarithm base / upper-level arity `c` for modes 5L, 6S, 6L.
    pub base: Option<u64>,
    /// Lane count `q` for modes 2S and 2L.
    pub lanes: Option<u64>,
    /// Chunk size in blocks for mode 1.
    pub chunk_blocks: Option<u64>,
    /// Tree height for mode 4L.
    pub height: Option<u32>,
    /// Constant node arity for mode WC; must be a power of two.
    pub fixed_arity: Option<u64>,
    /// Sequential threshold `d` carried for the execution layer.
    pub threshold: Option<u64>,
    /// Interleave slice width in bits (modes 2L, 4L-with-groups).
    pub interleave_bits: Option<u64>,
    /// Interleave sibling-group size (mode 4L height 2).
    pub group_size: Option<u64>,
}

impl ModeParams {
    pub fn new(mode: Mode) -> Self {
        ModeParams {
            mode: Some(mode),
            ..Default::default()
        }
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or_else(|| Error::config("mode not set"))
    }

    fn require_base(&self) -> Result<u64> {
        match self.base {
            Some(c) if c > 1 => Ok(c),
            Some(c) => Err(Error::config(format!("c must exceed 1, got {c}"))),
            None => Err(Error::config("mode requires parameter c")),
        }
    }

    fn require_lanes(&self) -> Result<u64> {
        match self.lanes {
            Some(q) if q >= 1 => Ok(q),
            Some(_) => Err(Error::config("q must be at least 1")),
            None => Err(Error::config("mode requires parameter q")),
        }
    }

    fn require_epsilon(&self) -> Result<Ratio> {
        self.epsilon
            .ok_or_else(|| Error::config("mode requires parameter epsilon"))
    }

    pub fn chunk(&self) -> u64 {
        self.chunk_blocks.unwrap_or(8)
    }

    pub fn threshold(&self) -> u64 {
        self.threshold.unwrap_or(1).max(1)
    }

    /// The interleave layout implied by the parameters, if any.
    pub fn interleave(&self) -> Result<Option<InterleaveParams>> {
        match self.mode()? {
            Mode::M2L => {
                let q = self.require_lanes()?;
                Ok(Some(InterleaveParams {
                    block_bits: self.interleave_bits.unwrap_or(crate::inner::CV_BITS as u64),
                    group_size: q,
                }))
            }
            Mode::M4L if self.group_size.is_some() => Ok(Some(InterleaveParams {
                block_bits: self.interleave_bits.unwrap_or(64),
                group_size: self.group_size.unwrap(),
            })),
            _ => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        match mode {
            Mode::M1 => {
                if self.chunk() < 1 {
                    return Err(Error::config("B must be at least 1"));
                }
            }
            Mode::M2S => {
                self.require_lanes()?;
            }
            Mode::M2L => {
                let q = self.require_lanes()?;
                if q > 255 {
                    return Err(Error::config(
                        "mode 2L encodes the lane count in one byte; q must be at most 255",
                    ));
                }
            }
            Mode::M3 | Mode::B1 | Mode::B2 | Mode::B3 => {}
            Mode::M4S => {
                let eps = self.require_epsilon()?;
                match eps.reciprocal_if_unit() {
                    Some(h) if h >= 2 => {}
                    _ => {
                        return Err(Error::config(format!(
                            "mode 4S requires epsilon = 1/h for an integer h >= 2, got {}/{}",
                            eps.numer(),
                            eps.denom()
                        )))
                    }
                }
            }
            Mode::M5S => {
                self.require_epsilon()?;
            }
            Mode::M6S | Mode::M6L => {
                self.require_base()?;
            }
            Mode::M5L => {
                self.require_base()?;
                self.require_epsilon()?;
            }
            Mode::M4L => {
                match self.height {
                    Some(h) if h >= 2 => {}
                    _ => return Err(Error::config("mode 4L requires height h >= 2")),
                }
                if let Some(g) = self.group_size {
                    if !(1..=255).contains(&g) {
                        return Err(Error::config("nI must lie in 1..=255"));
                    }
                    if self.height != Some(2) {
                        return Err(Error::config(
                            "interleave groups apply to the height-2 variant of mode 4L",
                        ));
                    }
                }
            }
            Mode::Wc => match self.fixed_arity {
                Some(k) if k >= 2 && k.is_power_of_two() => {}
                _ => {
                    return Err(Error::config(
                        "mode WC requires arity k >= 2 that is a power of two",
                    ))
                }
            },
        }
        if self.group_size.is_some() && mode != Mode::M4L {
            return Err(Error::config("nI only applies to mode 4L"));
        }
        if self.interleave_bits.is_some() && !matches!(mode, Mode::M2L | Mode::M4L) {
            return Err(Error::config("I only applies to modes 2L and 4L"));
        }
        if let Some(il) = self.interleave()? {
            crate::coding::interleave_code(il.block_bits)?;
        }
        Ok(())
    }
}

/// A node fanout: a concrete count, or a node that swallows whatever its
/// level receives (the growing final node of modes 1 and 4L).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Finite(u64),
    Unbounded,
}

/// Whether a schedule needs the message length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Stored,
    Live,
}

/// The arities of one level, either uniform or enumerated per node.
pub enum LevelArities {
    Uniform(Arity),
    PerNode(Box<dyn Iterator<Item = u64>>),
}

/// A resolved arity schedule: `u(i, j)` for every level and node. Produced
/// by [`AritySchedule::new`] from validated parameters, or by
/// [`reduce_processors`].
#[derive(Clone, Debug)]
pub struct AritySchedule {
    repr: Repr,
}

#[derive(Clone, Debug)]
enum Repr {
    Standard(ModeParams),
    Reduced {
        inner: Box<AritySchedule>,
        base_arity: u64,
        reduced_n: u64,
    },
}

impl AritySchedule {
    pub fn new(params: ModeParams) -> Result<Self> {
        params.validate()?;
        Ok(AritySchedule {
            repr: Repr::Standard(params),
        })
    }

    pub fn params(&self) -> &ModeParams {
        match &self.repr {
            Repr::Standard(p) => p,
            Repr::Reduced { inner, .. } => inner.params(),
        }
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self.repr, Repr::Reduced { .. })
    }

    pub fn kind(&self) -> ScheduleKind {
        match &self.repr {
            Repr::Standard(p) => {
                if p.mode.expect("validated").is_live() {
                    ScheduleKind::Live
                } else {
                    ScheduleKind::Stored
                }
            }
            Repr::Reduced { .. } => ScheduleKind::Stored,
        }
    }

    /// Arity of node `(level, index)`, both 1-based. Stored schedules (and
    /// mode 2L's lanes) need `n`.
    pub fn arity(&self, level: u32, index: u64, n: Option<u64>) -> Result<Arity> {
        debug_assert!(level >= 1 && index >= 1);
        match self.level_arities(level, n)? {
            LevelArities::Uniform(a) => Ok(a),
            LevelArities::PerNode(mut it) => it
                .nth(index as usize - 1)
                .map(Arity::Finite)
                .ok_or_else(|| Error::config("node index out of schedule range")),
        }
    }

    /// Uniform finite arity of a level, when the level has one.
    pub fn level_uniform(&self, level: u32, n: Option<u64>) -> Option<u64> {
        match self.level_arities(level, n) {
            Ok(LevelArities::Uniform(Arity::Finite(u))) => Some(u),
            _ => None,
        }
    }

    /// The arities of `level` (1-based, base level first).
    pub fn level_arities(&self, level: u32, n: Option<u64>) -> Result<LevelArities> {
        use LevelArities::{PerNode, Uniform};
        match &self.repr {
            Repr::Reduced {
                inner,
                base_arity,
                reduced_n,
            } => {
                if level == 1 {
                    Ok(Uniform(Arity::Finite(*base_arity)))
                } else {
                    inner.level_arities(level - 1, Some(*reduced_n))
                }
            }
            Repr::Standard(p) => {
                let need_n = |what: &str| {
                    n.ok_or_else(|| {
                        Error::mode(format!("{what} needs the message length in blocks"))
                    })
                };
                match p.mode.expect("validated") {
                    Mode::M1 => Ok(match level {
                        1 => Uniform(Arity::Finite(p.chunk())),
                        _ => Uniform(Arity::Unbounded),
                    }),
                    Mode::M2S => {
                        let q = p.require_lanes()?;
                        Ok(match level {
                            1 => Uniform(Arity::Finite(ceil_div(need_n("mode 2S")?.max(1), q))),
                            _ => Uniform(Arity::Finite(q)),
                        })
                    }
                    Mode::M2L => {
                        let q = p.require_lanes()?;
                        if level == 1 {
                            let n = need_n("mode 2L lane sizing")?;
                            Ok(PerNode(Box::new(lane_arities(n, q))))
                        } else {
                            Ok(Uniform(Arity::Unbounded))
                        }
                    }
                    Mode::M3 => Ok(Uniform(Arity::Finite(2))),
                    Mode::M4S => {
                        let h = p.epsilon.unwrap().reciprocal_if_unit().unwrap();
                        if u64::from(level) > h {
                            return Err(Error::config(format!(
                                "mode 4S has height {h}; level {level} is out of range"
                            )));
                        }
                        Ok(Uniform(Arity::Finite(ceil_root(need_n("mode 4S")?, h))))
                    }
                    Mode::M5S => {
                        let n = need_n("mode 5S")?;
                        let eps = p.epsilon.unwrap().as_f64();
                        Ok(Uniform(Arity::Finite(mode5s_arity(n, eps, level == 1))))
                    }
                    Mode::M6S => {
                        let c = p.base.unwrap();
                        Ok(Uniform(Arity::Finite(if level == 1 {
                            ceil_log(c, need_n("mode 6S")?)
                        } else {
                            c
                        })))
                    }
                    Mode::M4L => {
                        let h = p.height.unwrap();
                        if level > h {
                            return Err(Error::config(format!(
                                "mode 4L has height {h}; level {level} is out of range"
                            )));
                        }
                        if level == h {
                            Ok(Uniform(Arity::Unbounded))
                        } else if level == 1 && p.group_size.is_some() {
                            let g = p.group_size.unwrap();
                            Ok(PerNode(Box::new((1u64..).map(move |j| j.div_ceil(g)))))
                        } else {
                            Ok(PerNode(mode4l_level_iter(h, level)))
                        }
                    }
                    Mode::M5L => {
                        let c = p.base.unwrap();
                        let eps = p.epsilon.unwrap().as_f64();
                        let first = level == 1;
                        Ok(PerNode(Box::new(
                            (1u64..).map(move |j| mode5l_arity(c, eps, j, first)),
                        )))
                    }
                    Mode::M6L => {
                        let c = p.base.unwrap();
                        if level == 1 {
                            Ok(PerNode(Box::new((1u64..).map(move |j| ceil_log(c, c + j)))))
                        } else {
                            Ok(Uniform(Arity::Finite(c)))
                        }
                    }
                    Mode::Wc => Ok(Uniform(Arity::Finite(p.fixed_arity.unwrap()))),
                    Mode::B1 => {
                        let a = 1u64
                            .checked_shl(level)
                            .ok_or_else(|| Error::config("mode B1 level arity overflows"))?;
                        Ok(Uniform(Arity::Finite(a)))
                    }
                    Mode::B2 => Ok(Uniform(Arity::Finite(u64::from(level) + 1))),
                    Mode::B3 => Ok(Uniform(Arity::Finite(u64::from(
                        (level + 3).ilog2(),
                    )))),
                }
            }
        }
    }

    /// Height hint: declared for the fixed-height modes, open-ended
    /// otherwise. The built topology's height is always derived from the
    /// splitting rule itself.
    pub fn height_hint(&self, n: Option<u64>) -> Result<HeightHint> {
        match &self.repr {
            Repr::Reduced { .. } => Ok(HeightHint::UntilSingleNode),
            Repr::Standard(p) => match p.mode.expect("validated") {
                Mode::M4S => Ok(HeightHint::Declared(
                    p.epsilon.unwrap().reciprocal_if_unit().unwrap() as u32,
                )),
                Mode::M4L => Ok(HeightHint::Declared(p.height.unwrap())),
                Mode::M5S => {
                    let n = n.ok_or_else(|| Error::mode("mode 5S height needs n"))?;
                    Ok(HeightHint::Declared(mode5s_height(
                        n,
                        p.epsilon.unwrap().as_f64(),
                    )))
                }
                Mode::M6S => {
                    let n = n.ok_or_else(|| Error::mode("mode 6S height needs n"))?;
                    let c = p.base.unwrap();
                    let u1 = ceil_log(c, n);
                    Ok(HeightHint::Declared(
                        ceil_log(c, ceil_div(n.max(1), u1.max(1))) as u32 + 1,
                    ))
                }
                _ => Ok(HeightHint::UntilSingleNode),
            },
        }
    }
}

/// Declared height or "grow until a single node remains".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeightHint {
    Declared(u32),
    UntilSingleNode,
}

/// Mode 2L deals blocks round-robin over `q` lanes; lane `j` (1-based) ends
/// up with either `floor(n/q)` or one more block. Lanes beyond `n` are
/// dropped.
fn lane_arities(n: u64, q: u64) -> impl Iterator<Item = u64> {
    let lanes = q.min(n).max(1);
    (0..lanes).map(move |j| n / q + u64::from(j < n % q))
}

/// Infinite arity stream for level `i` of the unpruned mode 4L tree of
/// height `h`: level `h-1` runs 2, 3, 4, ..; below, every parent of arity
/// `k` contributes the run 2..=k+1.
fn mode4l_level_iter(h: u32, level: u32) -> Box<dyn Iterator<Item = u64>> {
    assert!(level >= 1 && level < h);
    if level == h - 1 {
        Box::new(2u64..)
    } else {
        Box::new(mode4l_level_iter(h, level + 1).flat_map(|k| 2..=k + 1))
    }
}

/// Arity of node `(level, index)` of the unpruned mode 4L tree of height
/// `h`, by the recursive definition. The root level reports unbounded.
pub fn mode4l_arity(h: u32, level: u32, index: u64) -> Result<Arity> {
    if h < 2 || level < 1 || index < 1 {
        return Err(Error::config("mode 4L arity needs h >= 2, level >= 1, j >= 1"));
    }
    if level > h {
        return Err(Error::config(format!(
            "level {level} is out of range for height {h}"
        )));
    }
    if level == h {
        return Ok(Arity::Unbounded);
    }
    Ok(Arity::Finite(
        mode4l_level_iter(h, level)
            .nth(index as usize - 1)
            .expect("infinite iterator"),
    ))
}

/// Direct (non-recursive) arity computation for the height-4 mode 4L tree.
///
/// Level 3 is `j + 1`. Level 2 locates `j` inside the triangular run
/// structure: with `k1 = floor((-1+sqrt(1+8j))/2)` the run of nodes under
/// the `k1`-th level-3 parent starts at the triangular number `k1(k1+1)/2`,
/// so the arity is `2 + (j mod k1(k1+1)/2)`. Level 1 inverts the two nested
/// run structures: the cumulative number of level-1 nodes under the first
/// `p` level-3 parents is `p(p+4)(p+5)/6`, and within that group the
/// level-2 parents span `(t^2+3t)/2` nodes.
pub fn mode4l_arity_h4_direct(level: u32, index: u64) -> Result<Arity> {
    let j = index;
    if !(1..=4).contains(&level) || j < 1 {
        return Err(Error::config("height-4 direct form needs level in 1..=4, j >= 1"));
    }
    match level {
        4 => Ok(Arity::Unbounded),
        3 => Ok(Arity::Finite(j + 1)),
        2 => {
            if j <= 2 {
                return Ok(Arity::Finite(j + 1));
            }
            // Largest k1 with k1(k1+1)/2 <= j.
            let k1 = inverse_monotone(j, |k| k * (k + 1) / 2);
            let modulus = k1 * (k1 + 1) / 2;
            Ok(Arity::Finite(2 + j % modulus))
        }
        1 => {
            if j <= 2 {
                return Ok(Arity::Finite(j + 1));
            }
            // Group of the level-3 ancestor: largest p with G(p) < j, where
            // G(p) = p(p+4)(p+5)/6 counts level-1 nodes under parents 1..=p.
            let p = inverse_monotone(j - 1, |p| p * (p + 4) * (p + 5) / 6);
            let within = j - p * (p + 4) * (p + 5) / 6;
            // Level-2 parent within the group: smallest t with
            // (t^2+3t)/2 >= within.
            let t = inverse_monotone(within - 1, |t| t * (t + 3) / 2) + 1;
            let consumed = (t - 1) * (t + 2) / 2;
            Ok(Arity::Finite(2 + (within - consumed - 1)))
        }
        _ => unreachable!(),
    }
}

/// Largest `k >= 0` with `f(k) <= target`, for non-decreasing `f`.
fn inverse_monotone(target: u64, f: impl Fn(u64) -> u64) -> u64 {
    let mut k = 0;
    let mut step = 1u64;
    while f(k + step) <= target {
        k += step;
        step = step.saturating_mul(2);
    }
    while step > 0 {
        if f(k + step) <= target {
            k += step;
        }
        step /= 2;
    }
    k
}

/// Maximum number of blocks a pruned height-`h` mode 4L tree with an
/// `x`-ary root can cover: `C(x+h-2, h-1) + C(x+h-1, h)`.
pub fn mode4l_max_blocks(x: u64, h: u32) -> Result<u128> {
    if x < 1 || h < 2 {
        return Err(Error::config("max blocks needs x >= 1, h >= 2"));
    }
    let h = u64::from(h);
    Ok(binomial(x + h - 2, h - 1) + binomial(x + h - 1, h))
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * u128::from(n - i) / u128::from(i + 1);
    }
    out
}

/// The processor-reduction transform: the new base level packs `t_of_n(n)`
/// blocks per node, and the original schedule's tree is built on top of the
/// resulting `ceil(n / T(n))` nodes. Parallel time roughly doubles while
/// the processor count drops to `ceil(n / T(n))`.
///
/// Only schedules with per-level arities can be reworked this way; the
/// per-node live schedules (4L, 5L, 6L) and the lane mode 2L are rejected.
pub fn reduce_processors(
    schedule: &AritySchedule,
    n: u64,
    t_of_n: impl Fn(u64) -> u64,
) -> Result<AritySchedule> {
    if schedule.is_reduced() {
        return Err(Error::config("schedule is already reduced"));
    }
    let mode = schedule.params().mode()?;
    if matches!(mode, Mode::M4L | Mode::M5L | Mode::M6L | Mode::M2L) {
        return Err(Error::config(format!(
            "processor reduction needs per-level arities; mode {} has per-node arities",
            mode.as_str()
        )));
    }
    if n < 1 {
        return Err(Error::config("processor reduction needs n >= 1"));
    }
    let t = t_of_n(n).max(1);
    Ok(AritySchedule {
        repr: Repr::Reduced {
            inner: Box::new(schedule.clone()),
            base_arity: t,
            reduced_n: ceil_div(n, t),
        },
    })
}

pub(crate) fn ceil_div(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

/// Smallest `t >= 0` with `base^t >= x`; exact integer arithmetic.
pub(crate) fn ceil_log(base: u64, x: u64) -> u64 {
    debug_assert!(base > 1);
    if x <= 1 {
        return 0;
    }
    let mut t = 0u64;
    let mut pow = 1u128;
    while pow < u128::from(x) {
        pow = pow.saturating_mul(u128::from(base));
        t += 1;
    }
    t
}

/// Smallest `v >= 1` with `v^h >= n`; this is `ceil(n^(1/h))` computed with
/// an exact integer re-check around the floating-point guess.
pub(crate) fn ceil_root(n: u64, h: u64) -> u64 {
    if n <= 1 {
        return 1;
    }
    let guess = (n as f64).powf(1.0 / h as f64).round() as u64;
    let pow_ge = |v: u64| -> bool {
        let mut acc: u128 = 1;
        for _ in 0..h {
            acc = acc.saturating_mul(u128::from(v));
            if acc >= u128::from(n) {
                return true;
            }
        }
        acc >= u128::from(n)
    };
    let mut v = guess.max(1);
    while !pow_ge(v) {
        v += 1;
    }
    while v > 1 && pow_ge(v - 1) {
        v -= 1;
    }
    v
}

fn mode5s_arity(n: u64, eps: f64, first_level: bool) -> u64 {
    if n <= 2 {
        // log2 log2 n degenerates; any arity >= 2 splits these messages the
        // same way.
        return 2;
    }
    let l2n = (n as f64).log2();
    let value = if first_level {
        l2n.powf(1.0 + eps) / l2n.log2()
    } else {
        l2n.powf(eps)
    };
    ceil_f64(value).max(2)
}

fn mode5s_height(n: u64, eps: f64) -> u32 {
    if n <= 2 {
        return 2;
    }
    let u1 = mode5s_arity(n, eps, true);
    let np = ceil_div(n, u1);
    if np <= 2 {
        return 2;
    }
    let l2 = (np as f64).log2();
    (ceil_f64(l2 / (eps * l2.log2())) as u32).max(1) + 1
}

fn mode5l_arity(c: u64, eps: f64, j: u64, first_level: bool) -> u64 {
    let x = (c + j) as f64;
    let log_c = x.ln() / (c as f64).ln();
    let value = if first_level {
        log_c.powf(1.0 + eps) / x.log2().log2()
    } else {
        log_c.powf(eps)
    };
    ceil_f64(value).max(1)
}

/// Ceiling of a positive float with a guard against the guess straddling an
/// integer by a representation error.
fn ceil_f64(x: f64) -> u64 {
    debug_assert!(x.is_finite() && x > 0.0);
    let mut c = x.ceil();
    if c - x >= 1.0 {
        c -= 1.0;
    }
    c as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(params: ModeParams) -> AritySchedule {
        AritySchedule::new(params).unwrap()
    }

    fn m4s(h: u64) -> ModeParams {
        ModeParams {
            epsilon: Some(Ratio::new(1, h).unwrap()),
            ..ModeParams::new(Mode::M4S)
        }
    }

    fn with_base(mode: Mode, c: u64) -> ModeParams {
        ModeParams {
            base: Some(c),
            ..ModeParams::new(mode)
        }
    }

    #[test]
    fn mode4s_matches_example() {
        // n = 10, eps = 1/2: both levels ceil(sqrt(10)) = 4.
        let s = schedule(m4s(2));
        for level in 1..=2 {
            assert_eq!(
                s.arity(level, 1, Some(10)).unwrap(),
                Arity::Finite(4),
                "level {level}"
            );
        }
        assert_eq!(s.height_hint(Some(10)).unwrap(), HeightHint::Declared(2));
    }

    #[test]
    fn mode4s_rejects_non_unit_epsilon() {
        let params = ModeParams {
            epsilon: Some(Ratio::new(2, 5).unwrap()),
            ..ModeParams::new(Mode::M4S)
        };
        assert!(AritySchedule::new(params).is_err());
    }

    #[test]
    fn mode6s_matches_example() {
        // n = 16, c = 2: u1 = 4, upper levels 2, declared height 3.
        let s = schedule(with_base(Mode::M6S, 2));
        assert_eq!(s.arity(1, 1, Some(16)).unwrap(), Arity::Finite(4));
        assert_eq!(s.arity(2, 1, Some(16)).unwrap(), Arity::Finite(2));
        assert_eq!(s.height_hint(Some(16)).unwrap(), HeightHint::Declared(3));
    }

    #[test]
    fn mode5s_matches_direct_evaluation() {
        // n = 1024, eps = 1/2: u1 = ceil(10^1.5 / log2(10)) = 10,
        // u_i = ceil(sqrt(10)) = 4, h = 6.
        let params = ModeParams {
            epsilon: Some(Ratio::new(1, 2).unwrap()),
            ..ModeParams::new(Mode::M5S)
        };
        let s = schedule(params);
        assert_eq!(s.arity(1, 1, Some(1024)).unwrap(), Arity::Finite(10));
        assert_eq!(s.arity(2, 1, Some(1024)).unwrap(), Arity::Finite(4));
        assert_eq!(s.arity(5, 1, Some(1024)).unwrap(), Arity::Finite(4));
        assert_eq!(s.height_hint(Some(1024)).unwrap(), HeightHint::Declared(6));
    }

    #[test]
    fn mode6l_matches_formula() {
        let s = schedule(with_base(Mode::M6L, 2));
        assert_eq!(s.arity(1, 1, None).unwrap(), Arity::Finite(2)); // ceil(log2 3)
        assert_eq!(s.arity(1, 3, None).unwrap(), Arity::Finite(3)); // ceil(log2 5)
        assert_eq!(s.arity(2, 9, None).unwrap(), Arity::Finite(2));
    }

    #[test]
    fn mode_b_levels() {
        let b1 = schedule(ModeParams::new(Mode::B1));
        assert_eq!(b1.arity(1, 1, None).unwrap(), Arity::Finite(2));
        assert_eq!(b1.arity(5, 1, None).unwrap(), Arity::Finite(32));

        let b2 = schedule(ModeParams::new(Mode::B2));
        assert_eq!(b2.arity(1, 1, None).unwrap(), Arity::Finite(2));
        assert_eq!(b2.arity(3, 1, None).unwrap(), Arity::Finite(4));

        let b3 = schedule(ModeParams::new(Mode::B3));
        // floor(log2(level + 3)): levels 1..=4 give 2, level 5 gives 3.
        assert_eq!(b3.arity(1, 1, None).unwrap(), Arity::Finite(2));
        assert_eq!(b3.arity(4, 1, None).unwrap(), Arity::Finite(2));
        assert_eq!(b3.arity(5, 1, None).unwrap(), Arity::Finite(3));
        assert_eq!(b3.arity(13, 1, None).unwrap(), Arity::Finite(4));
    }

    #[test]
    fn mode2_levels() {
        let params = ModeParams {
            lanes: Some(4),
            ..ModeParams::new(Mode::M2S)
        };
        let s = schedule(params);
        assert_eq!(s.arity(1, 1, Some(10)).unwrap(), Arity::Finite(3));
        assert_eq!(s.arity(2, 1, Some(10)).unwrap(), Arity::Finite(4));

        let params = ModeParams {
            lanes: Some(4),
            ..ModeParams::new(Mode::M2L)
        };
        let s = schedule(params);
        // 10 blocks over 4 lanes: 3, 3, 2, 2.
        let lanes: Vec<u64> = match s.level_arities(1, Some(10)).unwrap() {
            LevelArities::PerNode(it) => it.take(4).collect(),
            _ => panic!("lanes are per-node"),
        };
        assert_eq!(lanes, vec![3, 3, 2, 2]);
    }

    #[test]
    fn mode4l_recursion_unrolls_as_expected() {
        // h = 3, level 1 starts 2,3, 2,3,4, 2,3,4,5.
        let got: Vec<u64> = mode4l_level_iter(3, 1).take(9).collect();
        assert_eq!(got, vec![2, 3, 2, 3, 4, 2, 3, 4, 5]);
        // h = 2, base level is 2, 3, 4, 5, ...
        let got: Vec<u64> = mode4l_level_iter(2, 1).take(4).collect();
        assert_eq!(got, vec![2, 3, 4, 5]);
        assert_eq!(mode4l_arity(3, 3, 1).unwrap(), Arity::Unbounded);
        assert!(mode4l_arity(3, 4, 1).is_err());
    }

    #[test]
    fn mode4l_direct_form_level2_example() {
        // j = 5: k1 = 2, modulus 3, arity 2 + (5 mod 3) = 4.
        assert_eq!(mode4l_arity_h4_direct(2, 5).unwrap(), Arity::Finite(4));
        assert_eq!(mode4l_arity_h4_direct(4, 1).unwrap(), Arity::Unbounded);
    }

    #[test]
    fn mode4l_direct_form_matches_recursion() {
        for level in 1..=3u32 {
            let iter = mode4l_level_iter(4, level);
            for (idx, expected) in iter.take(2000).enumerate() {
                let j = idx as u64 + 1;
                assert_eq!(
                    mode4l_arity_h4_direct(level, j).unwrap(),
                    Arity::Finite(expected),
                    "level {level} j {j}"
                );
            }
        }
    }

    /// Iterated-sum oracle for the maximum block count: the outer index runs
    /// 2..=x+1, inner indices 2..=previous, innermost summand is the index
    /// itself.
    fn max_blocks_brute(x: u64, h: u32) -> u128 {
        fn inner(top: u64, depth: u32) -> u128 {
            if depth == 1 {
                return u128::from(top);
            }
            (2..=top).map(|v| inner(v, depth - 1)).sum()
        }
        (2..=x + 1).map(|v| inner(v, h - 1)).sum()
    }

    #[test]
    fn max_blocks_examples() {
        assert_eq!(mode4l_max_blocks(3, 2).unwrap(), 9);
        assert_eq!(mode4l_max_blocks(1, 2).unwrap(), 2);
        assert_eq!(mode4l_max_blocks(4, 3).unwrap(), 30);
    }

    #[test]
    fn max_blocks_matches_iterated_sum() {
        for h in 2..=6u32 {
            for x in 1..=12u64 {
                assert_eq!(
                    mode4l_max_blocks(x, h).unwrap(),
                    max_blocks_brute(x, h),
                    "x {x} h {h}"
                );
            }
        }
    }

    #[test]
    fn reduced_schedule_levels() {
        // Mode 3 over n = 1024 with T(n) = ceil(log2 n) = 10: base arity 10,
        // ceil(1024/10) = 103 base nodes, binary above.
        let m3 = schedule(ModeParams::new(Mode::M3));
        let red = reduce_processors(&m3, 1024, |n| u64::from(64 - (n - 1).leading_zeros())).unwrap();
        assert_eq!(red.arity(1, 1, Some(1024)).unwrap(), Arity::Finite(10));
        assert_eq!(red.arity(2, 1, Some(1024)).unwrap(), Arity::Finite(2));
        assert_eq!(red.kind(), ScheduleKind::Stored);
    }

    #[test]
    fn reduced_schedule_topologies() {
        use crate::tree::{build_topology, BLOCK_BITS};
        // n = 1024, T = 10: 103 base nodes of 10 blocks, binary above.
        let m3 = schedule(ModeParams::new(Mode::M3));
        let red = reduce_processors(&m3, 1024, |_| 10).unwrap();
        let t = build_topology(&red, 1024 * BLOCK_BITS).unwrap();
        assert_eq!(t.level(1).count(), 103);
        assert_eq!(t.level(1).arity(1), 10);
        assert_eq!(t.level(2).arity(1), 2);

        // n = 4, T = 4: a single base node degenerates to a leaf root.
        let red = reduce_processors(&m3, 4, |_| 4).unwrap();
        let t = build_topology(&red, 4 * BLOCK_BITS).unwrap();
        assert_eq!(t.height(), 1);
        assert_eq!(t.level(1).arity(1), 4);

        // The transform pins the processor count at ceil(n / T(n)).
        for k in 8..=16u32 {
            let n = 1u64 << k;
            let time = 2 * u64::from(k); // mode 3 ideal time
            let red = reduce_processors(&m3, n, |_| time).unwrap();
            let t = build_topology(&red, n * BLOCK_BITS).unwrap();
            assert_eq!(t.level(1).count(), n.div_ceil(time));
        }
    }

    #[test]
    fn reduce_rejects_per_node_schedules() {
        let m4l = schedule(ModeParams {
            height: Some(2),
            ..ModeParams::new(Mode::M4L)
        });
        assert!(reduce_processors(&m4l, 100, |_| 10).is_err());
    }

    #[test]
    fn live_levels_ignore_n() {
        // Prefix stability at the schedule level: u(i, j) computed with no
        // knowledge of n matches itself for any larger message.
        for params in [
            ModeParams::new(Mode::M3),
            ModeParams {
                height: Some(3),
                ..ModeParams::new(Mode::M4L)
            },
            ModeParams {
                base: Some(2),
                epsilon: Some(Ratio::new(1, 2).unwrap()),
                ..ModeParams::new(Mode::M5L)
            },
            with_base(Mode::M6L, 2),
            ModeParams {
                fixed_arity: Some(4),
                ..ModeParams::new(Mode::Wc)
            },
            ModeParams::new(Mode::B2),
        ] {
            let s = schedule(params);
            for level in 1..=2 {
                for j in [1u64, 2, 7, 50] {
                    let blind = s.arity(level, j, None);
                    let informed = s.arity(level, j, Some(1 << 20));
                    match (blind, informed) {
                        (Ok(a), Ok(b)) => assert_eq!(a, b),
                        (a, b) => panic!("unexpected {a:?} vs {b:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn exact_ceil_helpers() {
        assert_eq!(ceil_root(10, 2), 4);
        assert_eq!(ceil_root(16, 2), 4);
        assert_eq!(ceil_root(17, 2), 5);
        assert_eq!(ceil_root(1, 5), 1);
        assert_eq!(ceil_log(2, 16), 4);
        assert_eq!(ceil_log(2, 17), 5);
        assert_eq!(ceil_log(3, 10), 3);
        assert_eq!(ceil_log(2, 1), 0);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1/2".parse::<Ratio>().unwrap(), Ratio::new(1, 2).unwrap());
        assert_eq!("0.25".parse::<Ratio>().unwrap(), Ratio::new(1, 4).unwrap());
        assert!("5/4".parse::<Ratio>().is_err());
        assert!("0".parse::<Ratio>().is_err());
    }
}
