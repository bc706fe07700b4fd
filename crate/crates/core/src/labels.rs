//! Traffic classes: normal plus every non-empty combination of TCP, UDP and
//! ICMP flood vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackVector {
    T,
    U,
    I,
}

impl AttackVector {
    fn bit(self) -> u8 {
        match self {
            AttackVector::T => 1,
            AttackVector::U => 2,
            AttackVector::I => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    N,
    T,
    U,
    I,
    TU,
    TI,
    UI,
    A,
}

impl TrafficClass {
    /// Class-id order used by datasets, models and reports.
    pub const ALL: [TrafficClass; 8] = [
        TrafficClass::N,
        TrafficClass::T,
        TrafficClass::U,
        TrafficClass::I,
        TrafficClass::TU,
        TrafficClass::TI,
        TrafficClass::UI,
        TrafficClass::A,
    ];

    pub fn id(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TrafficClass::N => "N",
            TrafficClass::T => "T",
            TrafficClass::U => "U",
            TrafficClass::I => "I",
            TrafficClass::TU => "TU",
            TrafficClass::TI => "TI",
            TrafficClass::UI => "UI",
            TrafficClass::A => "A",
        }
    }

    /// Class of a set of simultaneously active vectors; the empty set is normal.
    pub fn from_vectors<I: IntoIterator<Item = AttackVector>>(vectors: I) -> Self {
        let mask = vectors.into_iter().fold(0u8, |m, v| m | v.bit());
        match mask {
            0 => TrafficClass::N,
            1 => TrafficClass::T,
            2 => TrafficClass::U,
            3 => TrafficClass::TU,
            4 => TrafficClass::I,
            5 => TrafficClass::TI,
            6 => TrafficClass::UI,
            _ => TrafficClass::A,
        }
    }

    pub fn vectors(self) -> Vec<AttackVector> {
        [AttackVector::T, AttackVector::U, AttackVector::I]
            .into_iter()
            .filter(|v| self.name().contains(&format!("{v:?}")) || self == TrafficClass::A)
            .collect()
    }

    pub fn is_attack(self) -> bool {
        self != TrafficClass::N
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrafficClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown traffic class `{s}`"))
    }
}

/// Class set used for evaluation: the full taxonomy or normal-vs-attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassMode {
    EightClass,
    TwoClass,
}

impl ClassMode {
    pub fn class_names(self) -> Vec<String> {
        match self {
            ClassMode::EightClass => TrafficClass::names(),
            ClassMode::TwoClass => vec!["N".into(), "Attack".into()],
        }
    }

    /// Maps an 8-class id into this mode's id space.
    pub fn collapse(self, id: usize) -> usize {
        match self {
            ClassMode::EightClass => id,
            ClassMode::TwoClass => usize::from(id != TrafficClass::N.id()),
        }
    }
}

impl FromStr for ClassMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "8class" | "8" => Ok(ClassMode::EightClass),
            "2class" | "2" => Ok(ClassMode::TwoClass),
            other => Err(format!(
                "unknown mode `{other}` (expected 8class or 2class)"
            )),
        }
    }
}
