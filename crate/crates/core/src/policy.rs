//! Daily government policy inputs.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};
use crate::network::{select_network, SuiteLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDay {
    pub date: NaiveDate,
    /// Lockdown flag, 0..=1.
    pub stay_home: u8,
    /// 0..=3.
    pub school_closing: u8,
    /// 0..=3.
    pub workplace_closing: u8,
    /// 0 none, 1..=2 symptomatic only, 3 open testing.
    pub testing_policy: u8,
    /// 1 none, 2 limited, 3 extensive.
    pub contact_tracing: u8,
    /// Country-scale count.
    pub daily_tests: f64,
    /// Country-scale count.
    pub daily_vaccines: f64,
    pub international_open: bool,
    pub internal_travel_open: bool,
}

impl PolicyDay {
    /// A day with no measures at all.
    pub fn unrestricted(date: NaiveDate) -> Self {
        Self {
            date,
            stay_home: 0,
            school_closing: 0,
            workplace_closing: 0,
            testing_policy: 0,
            contact_tracing: 1,
            daily_tests: 0.0,
            daily_vaccines: 0.0,
            international_open: true,
            internal_travel_open: true,
        }
    }

    pub fn lockdown(&self) -> bool {
        self.stay_home > 0
    }

    pub fn network_level(&self) -> Result<SuiteLevel> {
        select_network(self.workplace_closing, self.school_closing, self.stay_home)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: u8| {
            Err(EpiError::InvalidInput(format!(
                "{}: {what} level {v} out of range",
                self.date
            )))
        };
        if self.stay_home > 1 {
            return bad("stay_home", self.stay_home);
        }
        if self.school_closing > 3 {
            return bad("school_closing", self.school_closing);
        }
        if self.workplace_closing > 3 {
            return bad("workplace_closing", self.workplace_closing);
        }
        if self.testing_policy > 3 {
            return bad("testing_policy", self.testing_policy);
        }
        if !(1..=3).contains(&self.contact_tracing) {
            return bad("contact_tracing", self.contact_tracing);
        }
        if !(self.daily_tests >= 0.0 && self.daily_vaccines >= 0.0) {
            return Err(EpiError::InvalidInput(format!(
                "{}: negative test or vaccine count",
                self.date
            )));
        }
        Ok(())
    }
}

pub type PolicyTimeline = Vec<PolicyDay>;

pub fn validate_timeline(timeline: &[PolicyDay]) -> Result<()> {
    if timeline.is_empty() {
        return Err(EpiError::InvalidInput("policy timeline is empty".into()));
    }
    timeline.iter().try_for_each(PolicyDay::validate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrestricted_day_selects_densest_network() {
        let d = PolicyDay::unrestricted(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        d.validate().unwrap();
        assert_eq!(d.network_level().unwrap(), SuiteLevel::Rl);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut d = PolicyDay::unrestricted(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        d.contact_tracing = 0;
        assert!(d.validate().is_err());
        assert!(validate_timeline(&[]).is_err());
    }
}
