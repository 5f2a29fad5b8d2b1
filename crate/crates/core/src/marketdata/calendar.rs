use chrono::{Datelike, Duration, NaiveDate, Weekday};
use std::collections::BTreeSet;

/// Weekend-only calendar with an optional holiday list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BusinessCalendar {
    holidays: BTreeSet<NaiveDate>,
}

impl BusinessCalendar {
    pub fn new<I: IntoIterator<Item = NaiveDate>>(holidays: I) -> Self {
        Self { holidays: holidays.into_iter().collect() }
    }

    pub fn is_business_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&d)
    }

    /// Business days `d` with `start < d <= end`.
    pub fn count_between(&self, start: NaiveDate, end: NaiveDate) -> usize {
        let mut n = 0;
        let mut d = start + Duration::days(1);
        while d <= end {
            if self.is_business_day(d) {
                n += 1;
            }
            d += Duration::days(1);
        }
        n
    }

    pub fn next_business_day(&self, d: NaiveDate) -> NaiveDate {
        let mut d = d + Duration::days(1);
        while !self.is_business_day(d) {
            d += Duration::days(1);
        }
        d
    }
}

/// Third Friday of the given month, the usual monthly index-derivative expiry.
pub fn third_friday(year: i32, month: u32) -> NaiveDate {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let offset = (Weekday::Fri.num_days_from_monday() + 7 - first.weekday().num_days_from_monday()) % 7;
    first + Duration::days(offset as i64 + 14)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn weekday_count_over_four_weeks() {
        let cal = BusinessCalendar::default();
        assert_eq!(cal.count_between(d("2016-11-18"), d("2016-12-16")), 20);
        let with_holiday = BusinessCalendar::new([d("2016-12-08")]);
        assert_eq!(with_holiday.count_between(d("2016-11-18"), d("2016-12-16")), 19);
    }

    #[test]
    fn third_fridays() {
        assert_eq!(third_friday(2016, 12), d("2016-12-16"));
        assert_eq!(third_friday(2016, 7), d("2016-07-15"));
        assert_eq!(third_friday(2017, 9), d("2017-09-15"));
    }
}
