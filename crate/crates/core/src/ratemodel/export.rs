//! Time-tag and histogram interchange.
//!
//! Binary time tags are 9-byte records: the user id (position of the user's
//! stream, one byte) followed by the detection time in ps as a little-endian
//! `u64`. Records are merged across users in time order.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::ratemodel::{CoincidenceReport, TimetagStream, UserStream};

pub const RECORD_BYTES: usize = 9;

fn merged(streams: &TimetagStream) -> Result<Vec<(u64, u8)>> {
    if streams.streams.len() > u8::MAX as usize + 1 {
        return Err(Error::Data("more than 256 users cannot be encoded".into()));
    }
    let mut events: Vec<(u64, u8)> = streams
        .streams
        .iter()
        .enumerate()
        .flat_map(|(id, s)| s.times.iter().map(move |&t| (t, id as u8)))
        .collect();
    events.sort_unstable();
    Ok(events)
}

pub fn write_timetags_binary<W: Write>(streams: &TimetagStream, mut out: W) -> Result<()> {
    let io_err = |e: io::Error| Error::Data(e.to_string());
    for (t, id) in merged(streams)? {
        out.write_all(&[id]).map_err(io_err)?;
        out.write_all(&t.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Reads records written by [`write_timetags_binary`]. `users` names the ids
/// in order.
pub fn read_timetags_binary<R: Read>(
    mut input: R,
    users: &[String],
    duration_ps: u64,
    seed: u64,
) -> Result<TimetagStream> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Data(e.to_string()))?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Data(format!(
            "{} bytes is not a whole number of {RECORD_BYTES}-byte records",
            bytes.len()
        )));
    }
    let mut streams: Vec<UserStream> = users
        .iter()
        .map(|u| UserStream {
            user: u.clone(),
            times: Vec::new(),
        })
        .collect();
    for (n, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let id = record[0] as usize;
        let stream = streams
            .get_mut(id)
            .ok_or_else(|| Error::Data(format!("record {n}: unknown user id {id}")))?;
        let mut t = [0u8; 8];
        t.copy_from_slice(&record[1..]);
        stream.times.push(u64::from_le_bytes(t));
    }
    Ok(TimetagStream {
        duration_ps,
        seed,
        streams,
    })
}

/// One `user<TAB>time_ps` line per detection, merged in time order.
pub fn write_timetags_text<W: Write>(streams: &TimetagStream, mut out: W) -> Result<()> {
    let io_err = |e: io::Error| Error::Data(e.to_string());
    writeln!(out, "user\ttime_ps").map_err(io_err)?;
    for (t, id) in merged(streams)? {
        writeln!(out, "{}\t{t}", streams.streams[id as usize].user).map_err(io_err)?;
    }
    Ok(())
}

/// `link,bin,center_ps,count` rows for every histogram bin.
pub fn write_histograms_text<W: Write>(report: &CoincidenceReport, mut out: W) -> Result<()> {
    let io_err = |e: io::Error| Error::Data(e.to_string());
    writeln!(out, "link,bin,center_ps,count").map_err(io_err)?;
    for h in &report.links {
        let half = h.half_bins as i64;
        for k in -half..=half {
            writeln!(out, "{},{k},{:.0},{}", h.link, h.bin_center(k), h.bin(k)).map_err(io_err)?;
        }
    }
    Ok(())
}
