use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered pair of times `t >= t0 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePair {
    pub t: f64,
    pub t0: f64,
}

impl TimePair {
    pub fn new(t: f64, t0: f64) -> Result<Self> {
        if !t.is_finite() || !t0.is_finite() {
            return Err(Error::Param("times must be finite".into()));
        }
        if t0 < 0.0 || t < t0 {
            return Err(Error::TimeOrder(format!("need t >= t0 >= 0, got t={t}, t0={t0}")));
        }
        Ok(Self { t, t0 })
    }
}

/// An ordered triple of times `t >= s >= t0 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTriple {
    pub t: f64,
    pub s: f64,
    pub t0: f64,
}

impl TimeTriple {
    pub fn new(t: f64, s: f64, t0: f64) -> Result<Self> {
        if ![t, s, t0].iter().all(|x| x.is_finite()) {
            return Err(Error::Param("times must be finite".into()));
        }
        if t0 < 0.0 || s < t0 || t < s {
            return Err(Error::TimeOrder(format!(
                "need t >= s >= t0 >= 0, got t={t}, s={s}, t0={t0}"
            )));
        }
        Ok(Self { t, s, t0 })
    }
}

/// Sweep grid: absolute start times, offsets building `s = t0 + ds` and
/// `t = s + dt`, shifts selecting base points, and whether the limiting
/// base point participates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0_values: Vec<f64>,
    pub s_offsets: Vec<f64>,
    pub t_offsets: Vec<f64>,
    pub base_shifts: Vec<f64>,
    pub include_limit_point: bool,
}

/// Built-in grid densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Small,
    Default,
    Dense,
}

impl GridPreset {
    pub fn spec(self) -> GridSpec {
        match self {
            GridPreset::Small => GridSpec {
                t0_values: vec![0.0, 1.0],
                s_offsets: vec![0.0, 1.0],
                t_offsets: vec![0.0, 1.0, 5.0],
                base_shifts: vec![0.0, 1.0],
                include_limit_point: true,
            },
            GridPreset::Default => GridSpec {
                t0_values: vec![0.0, 1.0, 2.0],
                s_offsets: vec![0.0, 0.5, 1.0, 2.0, 5.0],
                t_offsets: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
                base_shifts: vec![0.0, 0.5, 1.0, 2.0, 5.0],
                include_limit_point: true,
            },
            GridPreset::Dense => GridSpec {
                t0_values: vec![0.0, 0.5, 1.0, 1.5, 2.0],
                s_offsets: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0],
                t_offsets: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
                base_shifts: vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
                include_limit_point: true,
            },
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(GridPreset::Small),
            "default" => Ok(GridPreset::Default),
            "dense" => Ok(GridPreset::Dense),
            other => Err(Error::Config(format!("unknown grid preset '{other}'"))),
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridPreset::Default.spec()
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("t0_values", &self.t0_values),
            ("s_offsets", &self.s_offsets),
            ("t_offsets", &self.t_offsets),
        ] {
            if values.is_empty() {
                return Err(Error::EmptyGrid(format!("{name} is empty")));
            }
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Param(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.base_shifts.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Param("base_shifts must be finite and nonnegative".into()));
        }
        if self.base_shifts.is_empty() && !self.include_limit_point {
            return Err(Error::EmptyGrid("no base points selected".into()));
        }
        Ok(())
    }

    /// All `t >= s >= t0` combinations, in deterministic sweep order.
    pub fn triples(&self) -> Vec<TimeTriple> {
        let mut out = Vec::with_capacity(self.t0_values.len() * self.s_offsets.len() * self.t_offsets.len());
        for &t0 in &self.t0_values {
            for &ds in &self.s_offsets {
                let s = t0 + ds;
                for &dt in &self.t_offsets {
                    out.push(TimeTriple { t: s + dt, s, t0 });
                }
            }
        }
        out
    }

    /// Deduplicated ordered pairs harvested from the triples: each triple
    /// contributes (t, t0), (t, s), and (s, t0). Sorted lexicographically.
    pub fn pairs(&self) -> Vec<TimePair> {
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for tr in self.triples() {
            raw.push((tr.t, tr.t0));
            raw.push((tr.t, tr.s));
            raw.push((tr.s, tr.t0));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        raw.dedup();
        raw.into_iter().map(|(t, t0)| TimePair { t, t0 }).collect()
    }

    /// Distinct absolute time values appearing anywhere in the triples, sorted.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for tr in self.triples() {
            out.push(tr.t0);
            out.push(tr.s);
            out.push(tr.t);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}
