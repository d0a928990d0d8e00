//! Integer resource vectors shared by topology capacities, request demands
//! and allocation bookkeeping.
//!
//! Quantities are whole units so that reserve/release cycles are exact.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A compute resource dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Cpu,
    Mem,
    Io,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Cpu, Dimension::Mem, Dimension::Io];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Cpu => "cpu",
            Dimension::Mem => "mem",
            Dimension::Io => "io",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// CPU, memory and I/O amounts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: u64,
    pub mem: u64,
    pub io: u64,
}

impl Resources {
    pub const ZERO: Resources = Resources { cpu: 0, mem: 0, io: 0 };

    pub const fn new(cpu: u64, mem: u64, io: u64) -> Self {
        Self { cpu, mem, io }
    }

    pub fn get(&self, dim: Dimension) -> u64 {
        match dim {
            Dimension::Cpu => self.cpu,
            Dimension::Mem => self.mem,
            Dimension::Io => self.io,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn checked_add(&self, other: &Resources) -> Option<Resources> {
        Some(Resources {
            cpu: self.cpu.checked_add(other.cpu)?,
            mem: self.mem.checked_add(other.mem)?,
            io: self.io.checked_add(other.io)?,
        })
    }

    pub fn checked_sub(&self, other: &Resources) -> Option<Resources> {
        Some(Resources {
            cpu: self.cpu.checked_sub(other.cpu)?,
            mem: self.mem.checked_sub(other.mem)?,
            io: self.io.checked_sub(other.io)?,
        })
    }

    /// Component-wise `self - other`, floored at zero.
    pub fn saturating_sub(&self, other: &Resources) -> Resources {
        Resources {
            cpu: self.cpu.saturating_sub(other.cpu),
            mem: self.mem.saturating_sub(other.mem),
            io: self.io.saturating_sub(other.io),
        }
    }

    /// True when every component is `<=` the matching component of `other`.
    pub fn fits_within(&self, other: &Resources) -> bool {
        Dimension::ALL.iter().all(|&d| self.get(d) <= other.get(d))
    }
}

impl std::iter::Sum for Resources {
    fn sum<I: Iterator<Item = Resources>>(iter: I) -> Self {
        iter.fold(Resources::ZERO, |acc, r| Resources { cpu: acc.cpu + r.cpu, mem: acc.mem + r.mem, io: acc.io + r.io })
    }
}
