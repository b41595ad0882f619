use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bitstring, parse_bitstring};
use crate::error::{Error, Result};

/// One distinct solution returned by an anneal ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    #[serde(with = "bits_as_string")]
    pub bits: Vec<u8>,
    pub energy: f64,
    pub count: u64,
}

mod bits_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::bitstring(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_bitstring(&s).map_err(serde::de::Error::custom)
    }
}

/// Distinct solutions sorted by ascending energy (ties by bitstring), with
/// occurrence counts summing to `total_anneals`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionHistogram {
    entries: Vec<HistogramEntry>,
    total_anneals: u64,
}

impl SolutionHistogram {
    /// Builds a histogram from raw `(bits, energy, count)` entries, merging
    /// duplicate bitstrings.
    pub fn from_entries(entries: impl IntoIterator<Item = HistogramEntry>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u8>, (f64, u64)> = BTreeMap::new();
        for e in entries {
            if !e.energy.is_finite() {
                return Err(Error::invalid("energy", "histogram energies must be finite"));
            }
            let slot = merged.entry(e.bits).or_insert((e.energy, 0));
            if slot.0 != e.energy {
                return Err(Error::invalid("energy", "same bitstring with two energies"));
            }
            slot.1 += e.count;
        }
        let mut entries: Vec<HistogramEntry> = merged
            .into_iter()
            .filter(|(_, (_, c))| *c > 0)
            .map(|(bits, (energy, count))| HistogramEntry { bits, energy, count })
            .collect();
        entries.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits)));
        let total_anneals = entries.iter().map(|e| e.count).sum();
        if total_anneals == 0 {
            return Err(Error::invalid("histogram", "must contain at least one anneal"));
        }
        Ok(Self { entries, total_anneals })
    }

    /// Aggregates raw samples, evaluating each distinct bitstring once.
    pub fn from_samples(samples: impl IntoIterator<Item = Vec<u8>>, energy: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for s in samples {
            *counts.entry(s).or_default() += 1;
        }
        Self::from_entries(counts.into_iter().map(|(bits, count)| HistogramEntry {
            energy: energy(&bits),
            bits,
            count,
        }))
    }

    pub fn entries(&self) -> &[HistogramEntry] {
        &self.entries
    }

    pub fn total_anneals(&self) -> u64 {
        self.total_anneals
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Lowest-energy entry.
    pub fn best(&self) -> &HistogramEntry {
        &self.entries[0]
    }

    pub fn probability(&self, entry: &HistogramEntry) -> f64 {
        entry.count as f64 / self.total_anneals as f64
    }

    /// Order-independent union of two ensembles.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        Self::from_entries(self.entries.iter().chain(&other.entries).cloned())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("histogram serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let total = raw.total_anneals;
        let h = Self::from_entries(raw.entries)?;
        if h.total_anneals != total {
            return Err(Error::Parse("counts do not sum to total_anneals".into()));
        }
        Ok(h)
    }

    /// `bitstring,energy,count,probability` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,energy,count,probability\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                bitstring(&e.bits),
                e.energy,
                e.count,
                self.probability(e)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "bitstring,energy,count,probability" => {}
            _ => return Err(Error::Parse("missing histogram CSV header".into())),
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let err = || Error::Parse(format!("histogram CSV row {}", i + 1));
            if cols.len() != 4 {
                return Err(err());
            }
            entries.push(HistogramEntry {
                bits: parse_bitstring(cols[0])?,
                energy: cols[1].parse().map_err(|_| err())?,
                count: cols[2].parse().map_err(|_| err())?,
            });
        }
        Self::from_entries(entries)
    }
}

/// Fraction of anneals whose energy is within `tol` of `ground_energy`.
/// A negative `tol` is treated as zero.
pub fn success_probability(hist: &SolutionHistogram, ground_energy: f64, tol: f64) -> f64 {
    let limit = ground_energy + tol.max(0.0);
    let hits: u64 = hist.entries.iter().filter(|e| e.energy <= limit).map(|e| e.count).sum();
    hits as f64 / hist.total_anneals as f64
}
