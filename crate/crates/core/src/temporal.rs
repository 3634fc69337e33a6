//! Cyclic temporal granularities (latent temporal factors) and the mapping
//! from timestamps to their slots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECS_PER_DAY: i64 = 86_400;

/// Which cycle a factor measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    MinuteOfHour,
    HourOfDay,
    /// 0 = Monday .. 6 = Sunday.
    DayOfWeek,
}

impl SlotKind {
    pub fn slot_count(self) -> usize {
        match self {
            SlotKind::MinuteOfHour => 60,
            SlotKind::HourOfDay => 24,
            SlotKind::DayOfWeek => 7,
        }
    }

    /// Containment rank: minute ⊂ hour ⊂ day.
    pub fn default_tsp_rank(self) -> u32 {
        match self {
            SlotKind::MinuteOfHour => 0,
            SlotKind::HourOfDay => 1,
            SlotKind::DayOfWeek => 2,
        }
    }

    fn slot_of_local(self, local: i64) -> usize {
        match self {
            SlotKind::MinuteOfHour => local.div_euclid(60).rem_euclid(60) as usize,
            SlotKind::HourOfDay => local.rem_euclid(SECS_PER_DAY).div_euclid(3600) as usize,
            // 1970-01-01 was a Thursday (slot 3).
            SlotKind::DayOfWeek => (local.div_euclid(SECS_PER_DAY) + 3).rem_euclid(7) as usize,
        }
    }
}

/// One latent temporal factor. Lower `tsp_rank` means finer granularity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalFactorSpec {
    pub name: String,
    pub kind: SlotKind,
    pub tsp_rank: u32,
    /// Fixed offset added to UTC epoch seconds to obtain local time.
    pub utc_offset_secs: i64,
}

impl TemporalFactorSpec {
    pub fn new(kind: SlotKind, utc_offset_secs: i64) -> Self {
        let name = match kind {
            SlotKind::MinuteOfHour => "minute",
            SlotKind::HourOfDay => "hour",
            SlotKind::DayOfWeek => "day",
        };
        TemporalFactorSpec {
            name: name.to_string(),
            kind,
            tsp_rank: kind.default_tsp_rank(),
            utc_offset_secs,
        }
    }

    pub fn hour_of_day(utc_offset_secs: i64) -> Self {
        Self::new(SlotKind::HourOfDay, utc_offset_secs)
    }

    pub fn day_of_week(utc_offset_secs: i64) -> Self {
        Self::new(SlotKind::DayOfWeek, utc_offset_secs)
    }

    pub fn slot_count(&self) -> usize {
        self.kind.slot_count()
    }

    pub fn slot_of(&self, timestamp: i64) -> usize {
        self.kind.slot_of_local(timestamp + self.utc_offset_secs)
    }
}

/// Sorts factors finest-first and rejects duplicate TSP ranks.
pub fn order_by_tsp(mut factors: Vec<TemporalFactorSpec>) -> Result<Vec<TemporalFactorSpec>> {
    if factors.is_empty() {
        return Err(Error::invalid("empty factor set"));
    }
    factors.sort_by_key(|f| f.tsp_rank);
    if factors.windows(2).any(|w| w[0].tsp_rank == w[1].tsp_rank) {
        return Err(Error::invalid("duplicate tsp ranks"));
    }
    Ok(factors)
}

/// Saturday or Sunday in local time.
pub fn is_weekend(timestamp: i64, utc_offset_secs: i64) -> bool {
    SlotKind::DayOfWeek.slot_of_local(timestamp + utc_offset_secs) >= 5
}
