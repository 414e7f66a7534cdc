use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::{Link, TimetagStream};

/// Cross-correlation histogram of one link.
///
/// Bin `k` (for `k` in `-half_bins..=half_bins`) collects time differences
/// `d` after offsets with `round((d − delay_ps) / bin_width_ps) = k`,
/// rounding half away from zero. Bin 0 is the coincidence peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkHistogram {
    pub link: Link,
    /// Expected peak position, `offset(second) − offset(first)` (ps).
    pub delay_ps: i64,
    pub bin_width_ps: f64,
    pub half_bins: usize,
    pub bins: Vec<u64>,
    /// Counts in the peak bin.
    pub peak_count: u64,
    /// `peak_count / duration` (counts/s).
    pub rate: f64,
}

impl LinkHistogram {
    pub fn bin(&self, k: i64) -> u64 {
        let idx = k + self.half_bins as i64;
        if idx < 0 {
            return 0;
        }
        self.bins.get(idx as usize).copied().unwrap_or(0)
    }

    /// Center of bin `k` on the after-offset time axis (ps).
    pub fn bin_center(&self, k: i64) -> f64 {
        self.delay_ps as f64 + k as f64 * self.bin_width_ps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub duration_s: f64,
    pub window_ps: f64,
    pub links: Vec<LinkHistogram>,
}

impl CoincidenceReport {
    pub fn link(&self, link: &Link) -> Option<&LinkHistogram> {
        self.links.iter().find(|h| &h.link == link)
    }
}

fn check_sorted(user: &str, times: &[u64]) -> Result<()> {
    if let Some(pos) = times.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Data(format!(
            "stream of {user} is not time-sorted at event {}",
            pos + 1
        )));
    }
    Ok(())
}

fn half_bins(span_ps: f64, window_ps: f64) -> usize {
    (span_ps / window_ps).ceil().max(0.0) as usize
}

/// Histogram of `b[j] − a[i] − shift` rounded to bins of `width`.
///
/// Both pointers only move forward, so the sweep is linear in the number of
/// events plus the number of pairs inside the span.
fn correlate(a: &[u64], b: &[u64], shift: i64, width: f64, half: usize) -> Vec<u64> {
    let mut bins = vec![0u64; 2 * half + 1];
    let reach = ((half as f64 + 0.5) * width).ceil() as i64;
    let mut lo = 0usize;
    for &ta in a {
        let centre = ta as i64 + shift;
        while lo < b.len() && (b[lo] as i64) < centre - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && (b[j] as i64) <= centre + reach {
            let d = b[j] as i64 - centre;
            let k = (d as f64 / width).round() as i64;
            if k.unsigned_abs() as usize <= half {
                bins[(k + half as i64) as usize] += 1;
            }
            j += 1;
        }
    }
    bins
}

/// Per-link coincidence histograms for every pair of users in `streams`.
///
/// `offsets` are electronic delays added to each user's detections (ps);
/// users not listed get zero. `span_ps` is the half-width of each histogram.
pub fn count_coincidences(
    streams: &TimetagStream,
    window_ps: f64,
    offsets: &BTreeMap<String, i64>,
    span_ps: f64,
) -> Result<CoincidenceReport> {
    if !(window_ps > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window_ps}")));
    }
    for s in &streams.streams {
        check_sorted(&s.user, &s.times)?;
    }
    let half = half_bins(span_ps, window_ps);
    let duration_s = streams.duration_s();
    let mut sorted: Vec<_> = streams.streams.iter().collect();
    sorted.sort_by(|x, y| x.user.cmp(&y.user));

    let mut links = Vec::new();
    for (i, u) in sorted.iter().enumerate() {
        for v in &sorted[i + 1..] {
            let link = Link::new(u.user.clone(), v.user.clone())?;
            let offset = |name: &str| offsets.get(name).copied().unwrap_or(0);
            let delay_ps = offset(&v.user) - offset(&u.user);
            // (t_v + o_v) − (t_u + o_u) − delay = t_v − t_u
            let bins = correlate(&u.times, &v.times, 0, window_ps, half);
            let peak_count = bins[half];
            links.push(LinkHistogram {
                link,
                delay_ps,
                bin_width_ps: window_ps,
                half_bins: half,
                peak_count,
                rate: if duration_s > 0.0 { peak_count as f64 / duration_s } else { 0.0 },
                bins,
            });
        }
    }
    Ok(CoincidenceReport {
        duration_s,
        window_ps,
        links,
    })
}

/// All pairwise differences on one after-offset time axis, as a single
/// time tagger trace would show them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedHistogram {
    pub bin_width_ps: f64,
    pub half_bins: usize,
    pub bins: Vec<u64>,
    /// Bin index holding each link's expected peak.
    pub peaks: Vec<(Link, i64)>,
}

impl CombinedHistogram {
    pub fn bin(&self, k: i64) -> u64 {
        let idx = k + self.half_bins as i64;
        if idx < 0 {
            return 0;
        }
        self.bins.get(idx as usize).copied().unwrap_or(0)
    }
}

/// Sums every link's differences `(t_v + o_v) − (t_u + o_u)` into bins of
/// `window_ps` centred on multiples of the window.
pub fn combined_histogram(
    streams: &TimetagStream,
    window_ps: f64,
    offsets: &BTreeMap<String, i64>,
    span_ps: f64,
) -> Result<CombinedHistogram> {
    if !(window_ps > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window_ps}")));
    }
    for s in &streams.streams {
        check_sorted(&s.user, &s.times)?;
    }
    let half = half_bins(span_ps, window_ps);
    let mut bins = vec![0u64; 2 * half + 1];
    let mut peaks = Vec::new();
    let mut sorted: Vec<_> = streams.streams.iter().collect();
    sorted.sort_by(|x, y| x.user.cmp(&y.user));
    for (i, u) in sorted.iter().enumerate() {
        for v in &sorted[i + 1..] {
            let offset = |name: &str| offsets.get(name).copied().unwrap_or(0);
            let delay = offset(&v.user) - offset(&u.user);
            // shift the reference so differences are measured from zero
            let part = correlate(&u.times, &v.times, -delay, window_ps, half);
            for (acc, x) in bins.iter_mut().zip(part) {
                *acc += x;
            }
            peaks.push((
                Link::new(u.user.clone(), v.user.clone())?,
                (delay as f64 / window_ps).round() as i64,
            ));
        }
    }
    Ok(CombinedHistogram {
        bin_width_ps: window_ps,
        half_bins: half,
        bins,
        peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratemodel::UserStream;

    fn streams(a: Vec<u64>, b: Vec<u64>, duration_ps: u64) -> TimetagStream {
        TimetagStream {
            duration_ps,
            seed: 0,
            streams: vec![
                UserStream {
                    user: "Alice".into(),
                    times: a,
                },
                UserStream {
                    user: "Bob".into(),
                    times: b,
                },
            ],
        }
    }

    #[test]
    fn inserted_coincidences_land_in_peak() {
        let a: Vec<u64> = (0..25).map(|i| 1_000_000 * i + 17).collect();
        let mut b: Vec<u64> = a.iter().map(|t| t + 100).collect();
        b.push(500_000);
        b.sort_unstable();
        let tags = streams(a, b, 1_000_000_000);
        let report = count_coincidences(&tags, 1024.0, &BTreeMap::new(), 60_000.0).unwrap();
        let h = &report.links[0];
        assert_eq!(h.peak_count, 25);
        assert_eq!(h.bins.iter().sum::<u64>(), 25);
        assert!((h.rate - 25.0 / 1e-3).abs() < 1e-9);
    }

    #[test]
    fn offsets_move_the_expected_peak() {
        let a = vec![1_000_000u64, 2_000_000];
        let b = vec![1_000_000u64, 2_000_000];
        let tags = streams(a, b, 3_000_000);
        let offsets: BTreeMap<String, i64> = [("Bob".to_string(), 10_000)].into_iter().collect();
        let report = count_coincidences(&tags, 1024.0, &offsets, 60_000.0).unwrap();
        let h = &report.links[0];
        assert_eq!(h.delay_ps, 10_000);
        assert_eq!(h.peak_count, 2);
        assert_eq!(h.bin_center(0), 10_000.0);
    }

    #[test]
    fn unsorted_stream_rejected() {
        let tags = streams(vec![5, 3], vec![1], 10);
        assert!(matches!(
            count_coincidences(&tags, 1024.0, &BTreeMap::new(), 1e4),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn half_window_boundary_is_symmetric() {
        // +512 rounds to bin 1, −512 to bin −1
        let tags = streams(vec![10_000], vec![10_512], 20_000);
        let h = count_coincidences(&tags, 1024.0, &BTreeMap::new(), 4096.0).unwrap();
        assert_eq!(h.links[0].bin(1), 1);
        let tags = streams(vec![10_512], vec![10_000], 20_000);
        let h = count_coincidences(&tags, 1024.0, &BTreeMap::new(), 4096.0).unwrap();
        assert_eq!(h.links[0].bin(-1), 1);
    }

    #[test]
    fn brute_force_agreement() {
        // pseudo-random but fixed event lists
        let mut x: u64 = 12345;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) % 2_000_000
        };
        let mut a: Vec<u64> = (0..400).map(|_| next()).collect();
        let mut b: Vec<u64> = (0..300).map(|_| next()).collect();
        a.sort_unstable();
        b.sort_unstable();
        let w = 1024.0;
        let half = 20usize;
        let fast = correlate(&a, &b, 0, w, half);
        let mut slow = vec![0u64; 2 * half + 1];
        for &ta in &a {
            for &tb in &b {
                let k = ((tb as f64 - ta as f64) / w).round() as i64;
                if k.unsigned_abs() as usize <= half {
                    slow[(k + half as i64) as usize] += 1;
                }
            }
        }
        assert_eq!(fast, slow);
    }
}
