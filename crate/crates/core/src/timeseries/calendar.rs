use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Weekday};
use chrono_tz::Tz;

use super::Timestamp;
use crate::error::{Error, Result};

/// One weekly trading window, minutes after local midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionRule {
    pub weekday: Weekday,
    pub open_minute: u32,
    pub close_minute: u32,
}

/// Identifies one trading session: local date plus rule index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId {
    pub date: NaiveDate,
    pub rule: usize,
}

/// Weekly session rules in a local timezone, plus holidays.
///
/// A continuous calendar (24/7 trading) accepts every interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    timezone: Tz,
    rules: Vec<SessionRule>,
    holidays: BTreeSet<NaiveDate>,
    continuous: bool,
}

impl SessionCalendar {
    pub fn continuous() -> Self {
        Self {
            timezone: Tz::UTC,
            rules: Vec::new(),
            holidays: BTreeSet::new(),
            continuous: true,
        }
    }

    pub fn new(
        timezone: Tz,
        rules: Vec<SessionRule>,
        holidays: impl IntoIterator<Item = NaiveDate>,
    ) -> Result<Self> {
        for r in &rules {
            if r.open_minute >= r.close_minute || r.close_minute > 24 * 60 {
                return Err(Error::InvalidInput(format!(
                    "session rule {:?} must satisfy open < close <= 1440",
                    r
                )));
            }
        }
        for (i, a) in rules.iter().enumerate() {
            for b in &rules[i + 1..] {
                if a.weekday == b.weekday
                    && a.open_minute < b.close_minute
                    && b.open_minute < a.close_minute
                {
                    return Err(Error::InvalidInput(format!(
                        "overlapping session rules on {:?}",
                        a.weekday
                    )));
                }
            }
        }
        Ok(Self {
            timezone,
            rules,
            holidays: holidays.into_iter().collect(),
            continuous: false,
        })
    }

    /// US equities regular hours: weekdays 09:30-16:00 America/New_York.
    pub fn us_equity(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        let rules = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri]
            .into_iter()
            .map(|weekday| SessionRule {
                weekday,
                open_minute: 9 * 60 + 30,
                close_minute: 16 * 60,
            })
            .collect();
        Self::new(chrono_tz::America::New_York, rules, holidays).expect("static rules are valid")
    }

    /// Spot FX: Sunday 17:00 to Friday 17:00 America/New_York, split at
    /// local midnight.
    pub fn fx(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        let mut rules = vec![SessionRule {
            weekday: Weekday::Sun,
            open_minute: 17 * 60,
            close_minute: 24 * 60,
        }];
        for weekday in [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu] {
            rules.push(SessionRule {
                weekday,
                open_minute: 0,
                close_minute: 24 * 60,
            });
        }
        rules.push(SessionRule {
            weekday: Weekday::Fri,
            open_minute: 0,
            close_minute: 17 * 60,
        });
        Self::new(chrono_tz::America::New_York, rules, holidays).expect("static rules are valid")
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    pub fn rules(&self) -> &[SessionRule] {
        &self.rules
    }

    fn local(&self, t: Timestamp) -> (NaiveDate, u32) {
        let utc = DateTime::from_timestamp(t, 0).expect("timestamp in chrono range");
        let local = utc.with_timezone(&self.timezone);
        (local.date_naive(), local.num_seconds_from_midnight())
    }

    /// Session containing the half-open interval `[start, end)`, if any.
    ///
    /// For a continuous calendar the session is the UTC calendar day of
    /// `start`.
    pub fn session_for_interval(&self, start: Timestamp, end: Timestamp) -> Option<SessionId> {
        if end <= start {
            return None;
        }
        if self.continuous {
            let date = DateTime::from_timestamp(start, 0)?.date_naive();
            return Some(SessionId { date, rule: 0 });
        }
        let (start_date, start_sec) = self.local(start);
        let (end_date, end_sec_minus_one) = self.local(end - 1);
        if start_date != end_date || self.holidays.contains(&start_date) {
            return None;
        }
        let end_sec = end_sec_minus_one + 1;
        let weekday = start_date.weekday();
        self.rules
            .iter()
            .position(|r| {
                r.weekday == weekday
                    && start_sec >= r.open_minute * 60
                    && end_sec <= r.close_minute * 60
            })
            .map(|rule| SessionId {
                date: start_date,
                rule,
            })
    }
}
