use std::path::Path;

use crate::beat::{beat_from_f64, fmt_f64, to_f64};
use crate::error::{Error, Result};
use crate::table::{read_table, write_table};

use super::{AlignmentMap, AudioBuffer, LoudnessCurve, TargetCurve};

/// Reads integer PCM (any bit depth) or 32-bit float WAV.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        hound::SampleFormat::Int => {
            let scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
        }
    }
    .map_err(|e| wav_error(path, e))?;
    AudioBuffer::from_interleaved(spec.sample_rate, usize::from(spec.channels), &samples)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes 32-bit float WAV.
pub fn write_wav(audio: &AudioBuffer, path: &Path) -> Result<()> {
    let spec = hound::WavSpec {
        channels: audio.channels().len() as u16,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for i in 0..audio.len() {
        for c in audio.channels() {
            w.write_sample(c[i] as f32).map_err(|e| wav_error(path, e))?;
        }
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

pub fn write_loudness_csv(curve: &LoudnessCurve, path: &Path) -> Result<()> {
    let meta = [
        ("normalized", curve.normalized.to_string()),
        ("block_sec", fmt_f64(curve.block_duration)),
    ];
    let header = ["time_sec".to_string(), "loudness_lu".to_string()];
    let rows = curve
        .block_times
        .iter()
        .zip(&curve.values)
        .map(|(&t, &v)| vec![t, v]);
    write_table(path, &meta, &header, rows)
}

/// Without a `block_sec` line the block length is taken as the hop between
/// the first two blocks.
pub fn read_loudness_csv(path: &Path) -> Result<LoudnessCurve> {
    let table = read_table(path)?;
    table.expect_header(path, &["time_sec", "loudness_lu"])?;
    let normalized = match table.meta("normalized") {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(Error::format(path, format!("bad normalized flag {other:?}"))),
    };
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = table.rows.iter().map(|r| r[1]).collect();
    let block = match table.meta("block_sec") {
        Some(s) => s
            .parse()
            .map_err(|_| Error::format(path, format!("bad block_sec {s:?}")))?,
        None => times.get(1).zip(times.first()).map_or(0.0, |(b, a)| b - a),
    };
    LoudnessCurve::new(times, block, values, normalized).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_alignment_csv(map: &AlignmentMap, path: &Path) -> Result<()> {
    let header = ["score_beat".to_string(), "time_sec".to_string()];
    let rows = map.breakpoints().iter().map(|&(b, s)| vec![to_f64(b), s]);
    write_table(path, &[], &header, rows)
}

pub fn read_alignment_csv(path: &Path) -> Result<AlignmentMap> {
    let table = read_table(path)?;
    table.expect_header(path, &["score_beat", "time_sec"])?;
    let points = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            beat_from_f64(r[0])
                .map(|b| (b, r[1]))
                .ok_or_else(|| Error::format(path, format!("row {}: bad beat {}", i + 1, r[0])))
        })
        .collect::<Result<Vec<_>>>()?;
    AlignmentMap::new(points).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_target_csv(target: &TargetCurve, path: &Path) -> Result<()> {
    let header = ["beat".to_string(), "target".to_string()];
    let rows = target
        .times
        .iter()
        .zip(&target.values)
        .map(|(&b, &v)| vec![to_f64(b), v]);
    write_table(path, &[], &header, rows)
}

pub fn read_target_csv(path: &Path) -> Result<TargetCurve> {
    let table = read_table(path)?;
    table.expect_header(path, &["beat", "target"])?;
    let mut times = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        times.push(
            beat_from_f64(r[0])
                .ok_or_else(|| Error::format(path, format!("row {}: bad beat {}", i + 1, r[0])))?,
        );
        if !r[1].is_finite() {
            return Err(Error::format(path, format!("row {}: non-finite target", i + 1)));
        }
        values.push(r[1]);
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::format(path, "beats must be strictly increasing"));
    }
    Ok(TargetCurve { times, values })
}
