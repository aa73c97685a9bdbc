//! JSON documents accepted on input: group presentations, cover maps, Gram
//! matrices, flow boxes and Markov shifts.

use std::f64::consts::TAU;

use locmix_core::cover::{CoverSpec, HGram};
use locmix_core::fuchsian::{GroupPresentation, IdealPoint, PresentationSpec, Side, Word};
use locmix_core::hyperbolic::Point;
use locmix_core::mixing::FlowBox;
use locmix_core::symbolic::{Displacement, MarkovShift, Potential};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Reads a JSON document from a file, or parses it directly when the
/// argument itself starts with `{` or `[`.
pub fn load<T: for<'de> Deserialize<'de>>(source: &str) -> Result<T, CliError> {
    let trimmed = source.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        source.to_string()
    } else {
        std::fs::read_to_string(source).map_err(|e| CliError::Io(format!("{source}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{source}: {e}")))
}

/// An ideal vertex: an integer, a `"p/q"` string, or `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IdealJson {
    Integer(i64),
    Text(String),
}

impl IdealJson {
    pub fn parse(&self) -> Result<IdealPoint, CliError> {
        let bad = || CliError::Validation(format!("invalid ideal point {self:?}"));
        match self {
            IdealJson::Integer(n) => Ok(IdealPoint::integer(*n)),
            IdealJson::Text(s) => {
                let s = s.trim();
                if s == "inf" || s == "∞" {
                    return Ok(IdealPoint::Infinity);
                }
                let (num, den) = s.split_once('/').unwrap_or((s, "1"));
                let num = num.trim().parse().map_err(|_| bad())?;
                let den = den.trim().parse().map_err(|_| bad())?;
                IdealPoint::rational(num, den).ok_or_else(bad)
            }
        }
    }

    pub fn from_point(p: IdealPoint) -> Self {
        match p {
            IdealPoint::Rational { num, den: 1 } => IdealJson::Integer(num),
            other => IdealJson::Text(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideJson {
    pub start: IdealJson,
    pub end: IdealJson,
    /// Pairing word as one-based signed generator indices.
    pub pairing: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupJson {
    pub name: String,
    /// Integer matrices `[a, b, c, d]`.
    pub generators: Vec<[i64; 4]>,
    /// Cusp words as one-based signed generator indices.
    pub cusp_words: Vec<Vec<i64>>,
    pub genus: usize,
    pub sides: Vec<SideJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<[f64; 2]>,
}

fn word(indices: &[i64]) -> Result<Word, CliError> {
    Word::from_signed(indices).ok_or_else(|| CliError::Validation("generator index 0 in word".into()))
}

impl GroupJson {
    pub fn build(&self) -> Result<GroupPresentation, CliError> {
        let sides = self
            .sides
            .iter()
            .map(|s| Ok(Side::new(s.start.parse()?, s.end.parse()?, word(&s.pairing)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let base_point = match self.base_point {
            Some([x, y]) => Some(Point::new(x, y).map_err(|e| CliError::Validation(e.to_string()))?),
            None => None,
        };
        let spec = PresentationSpec {
            name: self.name.clone(),
            generators: self.generators.clone(),
            cusp_words: self.cusp_words.iter().map(|w| word(w)).collect::<Result<_, _>>()?,
            genus: self.genus,
            sides,
            base_point,
        };
        Ok(GroupPresentation::new(spec)?)
    }

    pub fn from_presentation(g: &GroupPresentation) -> Self {
        GroupJson {
            name: g.name().to_string(),
            generators: g
                .generators()
                .iter()
                .map(|m| {
                    let m = m.to_i128().expect("generators have small entries");
                    [m.a as i64, m.b as i64, m.c as i64, m.d as i64]
                })
                .collect(),
            cusp_words: g.cusp_words().iter().map(Word::to_signed).collect(),
            genus: g.genus(),
            sides: g
                .sides()
                .iter()
                .map(|s| SideJson {
                    start: IdealJson::from_point(s.start),
                    end: IdealJson::from_point(s.end),
                    pairing: s.pairing.to_signed(),
                })
                .collect(),
            base_point: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverJson {
    pub d: usize,
    pub phi: Vec<Vec<i64>>,
}

impl CoverJson {
    pub fn build(&self, rank: usize) -> Result<CoverSpec, CliError> {
        if self.phi.len() != self.d {
            return Err(CliError::Validation(format!("d = {} but phi has {} rows", self.d, self.phi.len())));
        }
        Ok(CoverSpec::new(self.phi.clone(), rank)?)
    }
}

/// Parses a cover given as `identity`, `trivial`, a JSON matrix, a
/// `{"d", "phi"}` document or a path to one.
pub fn parse_cover(arg: &str, rank: usize) -> Result<CoverSpec, CliError> {
    match arg.trim() {
        "identity" | "homology" => Ok(CoverSpec::homology(rank)),
        "trivial" => Ok(CoverSpec::trivial(rank)),
        s if s.starts_with('[') => {
            let phi: Vec<Vec<i64>> =
                serde_json::from_str(s).map_err(|e| CliError::Validation(format!("phi: {e}")))?;
            CoverJson { d: phi.len(), phi }.build(rank)
        }
        s => load::<CoverJson>(s)?.build(rank),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramJson {
    pub q: Vec<Vec<f64>>,
}

impl GramJson {
    pub fn build(&self) -> Result<HGram, CliError> {
        Ok(HGram::new(self.q.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxJson {
    pub xrange: [f64; 2],
    pub yrange: [f64; 2],
    /// Direction arc in radians; the full circle when omitted.
    #[serde(default = "full_arc")]
    pub arc: [f64; 2],
    pub sheet: Vec<i64>,
}

fn full_arc() -> [f64; 2] {
    [0.0, TAU]
}

impl BoxJson {
    pub fn build(&self) -> Result<FlowBox, CliError> {
        Ok(FlowBox::new(
            (self.xrange[0], self.xrange[1]),
            (self.yrange[0], self.yrange[1]),
            (self.arc[0], self.arc[1]),
            self.sheet.clone(),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftJson {
    /// State labels.
    pub states: Vec<String>,
    pub transition: Vec<Vec<u8>>,
    /// Roof per edge `r[a][b]`; entries off the transition graph are ignored.
    pub r: Vec<Vec<f64>>,
    /// Displacement per state; omitted means `d = 0`.
    #[serde(default)]
    pub f: Option<Vec<Vec<i64>>>,
    /// Keep only the first `cutoff` states of a truncated countable shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

pub struct ShiftSystem {
    pub labels: Vec<String>,
    pub shift: MarkovShift,
    pub r: Potential,
    pub f: Displacement,
}

impl ShiftSystem {
    pub fn state(&self, label: &str) -> Result<usize, CliError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .or_else(|| label.parse().ok().filter(|&i: &usize| i < self.labels.len()))
            .ok_or_else(|| CliError::Validation(format!("unknown state {label:?}")))
    }
}

impl ShiftJson {
    pub fn build(&self) -> Result<ShiftSystem, CliError> {
        let n = self.cutoff.unwrap_or(self.states.len()).min(self.states.len());
        if self.transition.len() != self.states.len() {
            return Err(CliError::Validation(format!(
                "{} states but {} transition rows",
                self.states.len(),
                self.transition.len()
            )));
        }
        let shift = match self.cutoff {
            Some(c) => MarkovShift::truncate(&self.transition, c)?,
            None => MarkovShift::new(self.transition.clone())?,
        };
        let cut = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().take(n).map(|r| r.iter().take(n).copied().collect()).collect() };
        if self.r.len() != self.states.len() || self.r.iter().any(|row| row.len() != self.states.len()) {
            return Err(CliError::Validation("r must be a square table over the states".into()));
        }
        let r = Potential::new(&shift, cut(&self.r))?;
        let f = match &self.f {
            None => Displacement::none(&shift),
            Some(rows) => {
                if rows.len() != self.states.len() {
                    return Err(CliError::Validation("f must have one row per state".into()));
                }
                let d = rows.first().map_or(0, Vec::len);
                Displacement::new(&shift, rows.iter().take(n).cloned().collect(), d)?
            }
        };
        Ok(ShiftSystem { labels: self.states[..n].to_vec(), shift, r, f })
    }
}
