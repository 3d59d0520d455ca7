//! Bit-to-emission mapping for every supported scheme.
//!
//! All schemes obey the same two normalizations: a scheme carrying `B` bits
//! per symbol uses a symbol duration of `B·t_b` and emits `B·M` molecules per
//! symbol on average. Emissions are impulsive at the start of the selected
//! (sub-)slot. Bits inside a symbol are read most-significant first.

use std::fmt;
use std::str::FromStr;

use crate::channel::{EmissionSchedule, SamplingGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Bcsk,
    Ppm,
    Mcpm,
    Mosk,
    Dmosk,
    Mcsk,
    Gmosk,
    Maaf,
    Mssk,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 9] = [
        SchemeKind::Bcsk,
        SchemeKind::Ppm,
        SchemeKind::Mcpm,
        SchemeKind::Mosk,
        SchemeKind::Dmosk,
        SchemeKind::Mcsk,
        SchemeKind::Gmosk,
        SchemeKind::Maaf,
        SchemeKind::Mssk,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Bcsk => "bcsk",
            SchemeKind::Ppm => "ppm",
            SchemeKind::Mcpm => "mcpm",
            SchemeKind::Mosk => "mosk",
            SchemeKind::Dmosk => "dmosk",
            SchemeKind::Mcsk => "mcsk",
            SchemeKind::Gmosk => "gmosk",
            SchemeKind::Maaf => "maaf",
            SchemeKind::Mssk => "mssk",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("scheme.kind", format!("unknown scheme `{s}`")))
    }
}

/// Average emitted molecules per information bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub m: f64,
}

impl PowerBudget {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("M must be positive (got {m})")));
        }
        Ok(Self { m })
    }
}

pub const DEFAULT_ALPHA: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeDescriptor {
    pub kind: SchemeKind,
    /// Constellation order `K` (sub-slots, molecule types or antennas).
    pub order: usize,
    /// Active molecule types per symbol (GMoSK).
    pub active: usize,
    /// Information bits per stream (MaaF).
    pub info_bits: usize,
    /// High-level share of the MCPM concentration split.
    pub alpha: f64,
}

impl SchemeDescriptor {
    pub fn bcsk() -> Self {
        Self::of(SchemeKind::Bcsk, 2)
    }

    pub fn of(kind: SchemeKind, order: usize) -> Self {
        Self {
            kind,
            order,
            active: 1,
            info_bits: 1,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn with_active(mut self, active: usize) -> Self {
        self.active = active;
        self
    }

    pub fn with_info_bits(mut self, info_bits: usize) -> Self {
        self.info_bits = info_bits;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        bits_per_symbol(self).map(|_| ())
    }

    /// Molecule types or antennas used.
    pub fn num_channels(&self) -> usize {
        match self.kind {
            SchemeKind::Bcsk | SchemeKind::Ppm | SchemeKind::Mcpm => 1,
            SchemeKind::Dmosk | SchemeKind::Mcsk => 2,
            SchemeKind::Mosk | SchemeKind::Gmosk | SchemeKind::Mssk => self.order,
            SchemeKind::Maaf => 1 << floor_log2(self.order),
        }
    }

    /// Equal-length time slots per symbol: PPM sub-slots, or the two `t_b`
    /// halves of a staggered dual-type symbol.
    pub fn slots_per_symbol(&self) -> usize {
        match self.kind {
            SchemeKind::Ppm | SchemeKind::Mcpm => self.order,
            SchemeKind::Dmosk | SchemeKind::Mcsk => 2,
            _ => 1,
        }
    }

    /// Label used in reports, e.g. `4-mcpm`.
    pub fn label(&self) -> String {
        match self.kind {
            SchemeKind::Bcsk | SchemeKind::Dmosk | SchemeKind::Mcsk => self.kind.name().to_string(),
            SchemeKind::Gmosk => format!("{}-of-{}-gmosk", self.active, self.order),
            SchemeKind::Maaf => format!("{}-maaf-bi{}", self.order, self.info_bits),
            _ => format!("{}-{}", self.order, self.kind),
        }
    }
}

fn floor_log2(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        (usize::BITS - 1 - k.leading_zeros()) as usize
    }
}

fn exact_log2(k: usize, key: &str) -> Result<usize> {
    if k < 2 || !k.is_power_of_two() {
        return Err(Error::config(
            key,
            format!("order K={k} must be a power of two >= 2"),
        ));
    }
    Ok(floor_log2(k))
}

/// Binomial coefficient, exact for the small orders used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Information bits per symbol.
pub fn bits_per_symbol(scheme: &SchemeDescriptor) -> Result<usize> {
    let b = match scheme.kind {
        SchemeKind::Bcsk => 1,
        SchemeKind::Ppm | SchemeKind::Mosk | SchemeKind::Mssk => {
            exact_log2(scheme.order, "scheme.order")?
        }
        SchemeKind::Mcpm => {
            if !(scheme.alpha > 0.5 && scheme.alpha < 1.0) {
                return Err(Error::config(
                    "scheme.alpha",
                    format!("alpha ∈ (0.5, 1) required (got {})", scheme.alpha),
                ));
            }
            1 + exact_log2(scheme.order, "scheme.order")?
        }
        // one bit per type-stream, two streams per doubled symbol
        SchemeKind::Dmosk | SchemeKind::Mcsk => 2,
        SchemeKind::Gmosk => {
            if scheme.active == 0 || scheme.active >= scheme.order {
                return Err(Error::config(
                    "scheme.active",
                    format!(
                        "GMoSK needs 1 <= K_A < K (K={}, K_A={})",
                        scheme.order, scheme.active
                    ),
                ));
            }
            let c = binomial(scheme.order, scheme.active);
            (u128::BITS - 1 - c.leading_zeros()) as usize
        }
        SchemeKind::Maaf => {
            let frame = maaf_frame_map(scheme.order, scheme.info_bits)?;
            frame.streams() * frame.info_bits
        }
    };
    if b == 0 {
        return Err(Error::config("scheme", "scheme carries no bits per symbol"));
    }
    Ok(b)
}

/// Sampling grid honouring the bit-duration constraint `t_sym = B·t_b`.
/// `samples_per_slot` samples are taken per slot (see
/// [`SchemeDescriptor::slots_per_symbol`]).
pub fn scheme_grid(
    scheme: &SchemeDescriptor,
    t_b: f64,
    samples_per_slot: usize,
    memory: usize,
    tau: f64,
) -> Result<SamplingGrid> {
    let b = bits_per_symbol(scheme)?;
    SamplingGrid::new(
        b as f64 * t_b,
        samples_per_slot * scheme.slots_per_symbol(),
        memory,
        tau,
    )
}

/// Split of a molecule-as-a-frame alphabet into information and stream bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaafFrame {
    pub frame_bits: usize,
    pub info_bits: usize,
    pub stream_bits: usize,
}

impl MaafFrame {
    pub fn streams(&self) -> usize {
        1 << self.stream_bits
    }

    pub fn types_per_stream(&self) -> usize {
        1 << self.info_bits
    }

    /// Molecule type used by `stream` to send `symbol`.
    pub fn channel(&self, stream: usize, symbol: usize) -> usize {
        stream * self.types_per_stream() + symbol
    }
}

/// `⌊log2 K⌋ = b_I + b_F`.
pub fn maaf_frame_map(order: usize, info_bits: usize) -> Result<MaafFrame> {
    let frame_bits = floor_log2(order);
    if order < 2 || info_bits == 0 || info_bits > frame_bits {
        return Err(Error::config(
            "scheme.info_bits",
            format!("b_I={info_bits} outside 1..={frame_bits} for K={order}"),
        ));
    }
    Ok(MaafFrame {
        frame_bits,
        info_bits,
        stream_bits: frame_bits - info_bits,
    })
}

/// Lexicographically ordered `k`-subsets of `0..n`.
pub fn activation_patterns(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            break;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

/// The `2^B` patterns GMoSK actually uses.
pub fn gmosk_patterns(scheme: &SchemeDescriptor) -> Result<Vec<Vec<usize>>> {
    let b = bits_per_symbol(scheme)?;
    let mut p = activation_patterns(scheme.order, scheme.active);
    p.truncate(1 << b);
    Ok(p)
}

pub(crate) fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub(crate) fn index_to_bits(index: usize, width: usize, out: &mut Vec<bool>) {
    for i in (0..width).rev() {
        out.push((index >> i) & 1 == 1);
    }
}

/// Maps `bits` to an emission schedule on `grid`.
pub fn modulate(
    bits: &[bool],
    scheme: &SchemeDescriptor,
    budget: &PowerBudget,
    grid: &SamplingGrid,
) -> Result<EmissionSchedule> {
    let b = bits_per_symbol(scheme)?;
    if !bits.len().is_multiple_of(b) {
        return Err(Error::Usage(format!(
            "{} bits is not a multiple of {b} bits per symbol",
            bits.len()
        )));
    }
    let slots = scheme.slots_per_symbol();
    let ns = grid.samples_per_symbol;
    if !ns.is_multiple_of(slots) {
        return Err(Error::Usage(format!(
            "{ns} samples per symbol cannot be split into {slots} slots"
        )));
    }
    let slot_len = ns / slots;
    let symbols = bits.len() / b;
    let m = budget.m;
    let bm = b as f64 * m;
    let mut x = EmissionSchedule::zeros(scheme.num_channels(), symbols, ns);
    let patterns = if scheme.kind == SchemeKind::Gmosk {
        gmosk_patterns(scheme)?
    } else {
        Vec::new()
    };
    let frame = if scheme.kind == SchemeKind::Maaf {
        Some(maaf_frame_map(scheme.order, scheme.info_bits)?)
    } else {
        None
    };

    for (s, sym) in bits.chunks(b).enumerate() {
        let start = s * ns;
        match scheme.kind {
            SchemeKind::Bcsk => {
                if sym[0] {
                    x.channels[0][start] = 2.0 * m;
                }
            }
            SchemeKind::Ppm => {
                x.channels[0][start + bits_to_index(sym) * slot_len] = bm;
            }
            SchemeKind::Mcpm => {
                let level = if sym[0] { scheme.alpha } else { 1.0 - scheme.alpha };
                x.channels[0][start + bits_to_index(&sym[1..]) * slot_len] = 2.0 * bm * level;
            }
            SchemeKind::Mosk | SchemeKind::Mssk => {
                x.channels[bits_to_index(sym)][start] = bm;
            }
            SchemeKind::Dmosk | SchemeKind::Mcsk => {
                if sym[0] {
                    x.channels[0][start] = 2.0 * m;
                }
                if sym[1] {
                    x.channels[1][start + slot_len] = 2.0 * m;
                }
            }
            SchemeKind::Gmosk => {
                let pattern = &patterns[bits_to_index(sym)];
                let each = bm / scheme.active as f64;
                for &c in pattern {
                    x.channels[c][start] = each;
                }
            }
            SchemeKind::Maaf => {
                let frame = frame.expect("frame computed above");
                let each = frame.info_bits as f64 * m;
                for (stream, chunk) in sym.chunks(frame.info_bits).enumerate() {
                    x.channels[frame.channel(stream, bits_to_index(chunk))][start] = each;
                }
            }
        }
    }
    Ok(x)
}
