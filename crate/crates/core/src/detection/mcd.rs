//! Maximum-count detection for position, type and antenna-index schemes.

use super::{check_stream, Decisions};
use crate::channel::SampleSeries;
use crate::error::{Error, Result};
use crate::modulation::{bits_per_symbol, gmosk_patterns, index_to_bits, maaf_frame_map, SchemeDescriptor};

/// Index of the largest count; ties go to the lowest index.
pub fn argmax(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Channel (0-based) with the most arrivals during symbol `k`.
pub fn mcd_detect(y: &SampleSeries, samples_per_symbol: usize, k: usize) -> Result<usize> {
    let counts = channel_counts(y, samples_per_symbol, k)?;
    Ok(argmax(&counts))
}

fn channel_counts(y: &SampleSeries, samples_per_symbol: usize, k: usize) -> Result<Vec<f64>> {
    let range = k * samples_per_symbol..(k + 1) * samples_per_symbol;
    y.channels
        .iter()
        .map(|ch| {
            ch.get(range.clone())
                .map(|s| s.iter().sum())
                .ok_or_else(|| Error::Usage(format!("symbol {k} is past the end of the series")))
        })
        .collect()
}

fn slot_sums(sym: &[f64], slots: usize) -> Vec<f64> {
    sym.chunks(sym.len() / slots).map(|c| c.iter().sum()).collect()
}

fn check_slots(samples_per_symbol: usize, slots: usize) -> Result<()> {
    if slots == 0 || !samples_per_symbol.is_multiple_of(slots) {
        return Err(Error::Usage(format!(
            "{samples_per_symbol} samples per symbol cannot be split into {slots} slots"
        )));
    }
    Ok(())
}

/// K-PPM: the sub-slot with the most arrivals.
pub fn ppm_detect(y: &[f64], samples_per_symbol: usize, order: usize) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    check_slots(samples_per_symbol, order)?;
    let width = order.trailing_zeros() as usize;
    let mut out = Decisions::with_capacity(s * width);
    for sym in y.chunks(samples_per_symbol) {
        let sums = slot_sums(sym, order);
        let j = argmax(&sums);
        index_to_bits(j, width, &mut out.bits);
        out.stats.extend(std::iter::repeat_n(sums[j], width));
    }
    Ok(out)
}

/// K-MCPM: maximum count over sub-slots picks the position bits, then the
/// winning sub-slot's count against `gamma` decides the concentration bit
/// (emitted first).
pub fn mcpm_two_stage_detect(y: &[f64], samples_per_symbol: usize, order: usize, gamma: f64) -> Result<Decisions> {
    let s = check_stream(y, samples_per_symbol)?;
    check_slots(samples_per_symbol, order)?;
    let width = order.trailing_zeros() as usize;
    let mut out = Decisions::with_capacity(s * (width + 1));
    for sym in y.chunks(samples_per_symbol) {
        let sums = slot_sums(sym, order);
        let j = argmax(&sums);
        out.bits.push(sums[j] > gamma);
        index_to_bits(j, width, &mut out.bits);
        out.stats.extend(std::iter::repeat_n(sums[j], width + 1));
    }
    Ok(out)
}

fn symbols_in(y: &SampleSeries, samples_per_symbol: usize) -> Result<usize> {
    let first = y
        .channels
        .first()
        .ok_or_else(|| Error::Usage("empty sample series".into()))?;
    check_stream(first, samples_per_symbol)
}

/// K-MoSK and MSSK: the molecule type (or antenna) with the most arrivals.
pub fn mosk_detect(y: &SampleSeries, samples_per_symbol: usize) -> Result<Decisions> {
    let s = symbols_in(y, samples_per_symbol)?;
    let width = y.num_channels().trailing_zeros() as usize;
    let mut out = Decisions::with_capacity(s * width);
    for k in 0..s {
        let counts = channel_counts(y, samples_per_symbol, k)?;
        let j = argmax(&counts);
        index_to_bits(j, width, &mut out.bits);
        out.stats.extend(std::iter::repeat_n(counts[j], width));
    }
    Ok(out)
}

/// GMoSK: the used activation pattern with the largest total count.
pub fn gmosk_detect(y: &SampleSeries, samples_per_symbol: usize, scheme: &SchemeDescriptor) -> Result<Decisions> {
    let s = symbols_in(y, samples_per_symbol)?;
    let b = bits_per_symbol(scheme)?;
    let patterns = gmosk_patterns(scheme)?;
    let mut out = Decisions::with_capacity(s * b);
    for k in 0..s {
        let counts = channel_counts(y, samples_per_symbol, k)?;
        let scores: Vec<f64> = patterns
            .iter()
            .map(|p| p.iter().map(|&c| counts[c]).sum())
            .collect();
        let j = argmax(&scores);
        index_to_bits(j, b, &mut out.bits);
        out.stats.extend(std::iter::repeat_n(scores[j], b));
    }
    Ok(out)
}

/// MaaF: independent maximum-count decisions in every parallel stream.
pub fn maaf_detect(y: &SampleSeries, samples_per_symbol: usize, scheme: &SchemeDescriptor) -> Result<Decisions> {
    let s = symbols_in(y, samples_per_symbol)?;
    let frame = maaf_frame_map(scheme.order, scheme.info_bits)?;
    let per = frame.types_per_stream();
    let mut out = Decisions::default();
    for k in 0..s {
        let counts = channel_counts(y, samples_per_symbol, k)?;
        for group in counts.chunks(per).take(frame.streams()) {
            let j = argmax(group);
            index_to_bits(j, frame.info_bits, &mut out.bits);
            out.stats.extend(std::iter::repeat_n(group[j], frame.info_bits));
        }
    }
    Ok(out)
}

/// D-MoSK / MCSK: each type-stream is an on-off stream thresholded at
/// `gamma`. Type A is released at the symbol start and type B half a symbol
/// later; each decision counts `window_slots` half-symbols after its release.
pub fn dual_type_detect(y: &SampleSeries, samples_per_symbol: usize, gamma: f64, window_slots: usize) -> Result<Decisions> {
    let s = symbols_in(y, samples_per_symbol)?;
    check_slots(samples_per_symbol, 2)?;
    if y.num_channels() != 2 {
        return Err(Error::Usage("dual-type detection needs two channels".into()));
    }
    let half = samples_per_symbol / 2;
    let len = s * samples_per_symbol;
    let mut out = Decisions::with_capacity(2 * s);
    for k in 0..s {
        for (c, offset) in [(0, 0), (1, half)] {
            let start = k * samples_per_symbol + offset;
            let end = (start + window_slots * half).min(len);
            let e: f64 = y.channels[c][start..end].iter().sum();
            out.push(e > gamma, e);
        }
    }
    Ok(out)
}
