//! Bundled synthetic 24-hour microgrid day.
//!
//! Sizes follow a 180 kW diesel unit, 1000 kW of wind, 1500 kW of rooftop solar
//! and a 300 kWh battery serving roughly 1000 homes. Load peaks in the evening,
//! solar peaks at midday and the import price spikes between 18:00 and 21:00.

use std::path::Path;

use degradesched_core::milp::MicrogridCase;

use crate::error::Result;
use crate::formats::parse_case;

pub const EXAMPLE_DAY_JSON: &str = include_str!("../data/example_day.json");

pub fn example_day() -> Result<MicrogridCase> {
    parse_case(Path::new("<bundled example day>"), EXAMPLE_DAY_JSON)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_day_is_valid() {
        let case = example_day().unwrap();
        assert_eq!(case.horizon(), 24);
        let s = &case.series;
        assert!(s.sell_price.iter().zip(&s.buy_price).all(|(sell, buy)| sell <= buy));
        assert_eq!(case.bess.len(), 1);
        assert_eq!(case.bess[0].e_max, 300.0);
        assert_eq!(case.generators[0].p_max, 180.0);
        let peak = s.buy_price.iter().cloned().fold(0.0, f64::max);
        assert_eq!(s.buy_price.iter().position(|&p| p == peak), Some(19));
    }
}
