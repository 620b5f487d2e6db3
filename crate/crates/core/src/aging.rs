//! Synthetic battery aging oracle.
//!
//! A closed-form stress-factor model produces the ground truth used to train
//! the degradation networks: internal temperature from a Joule-heating proxy,
//! internal resistance rising with wear and cold, and per-cycle SOH loss from
//! multiplicative DOD / SOC / Arrhenius / C-rate / aging factors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joule-heating coefficient on `c_rate^2` (degC).
pub const HEAT_C2: f64 = 6.0;
/// Heating coefficient on `c_rate * dod` (degC).
pub const HEAT_CD: f64 = 2.0;
/// Fresh-cell internal resistance at or above 25 degC (milliohm).
pub const R0_MILLIOHM: f64 = 50.0;
/// Reference per-cycle degradation at DOD 0.5, 25 degC, C/2, fresh cell.
pub const K_REF: f64 = 2.0e-4;
pub const DOD_EXPONENT: f64 = 1.3;
/// Arrhenius activation energy over the gas constant (K).
pub const ACTIVATION_K: f64 = 4000.0;
pub const C_RATE_SLOPE: f64 = 0.3;
pub const SOC_SLOPE: f64 = 0.5;
pub const AGING_ACCEL: f64 = 1.5;
/// SOH at end of life.
pub const SOH_EOL: f64 = 0.8;

const T_REF_K: f64 = 298.15;
const KELVIN: f64 = 273.15;

/// Stress conditions of one (dis)charge cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConditions {
    pub soc_high: f64,
    pub dod: f64,
    /// Ambient temperature, degC.
    pub temp_amb: f64,
    /// Per-hour rate (I / E_max).
    pub c_rate: f64,
    #[serde(default = "fresh_soh")]
    pub soh: f64,
}

fn fresh_soh() -> f64 {
    1.0
}

impl CycleConditions {
    pub fn new(soc_high: f64, dod: f64, temp_amb: f64, c_rate: f64, soh: f64) -> Result<Self> {
        let c = CycleConditions {
            soc_high,
            dod,
            temp_amb,
            c_rate,
            soh,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.soc_high, self.dod, self.temp_amb, self.c_rate, self.soh];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cycle conditions contain a non-finite value"));
        }
        if !(self.dod > 0.0 && self.dod <= self.soc_high && self.soc_high <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < dod <= soc_high <= 1, got dod={} soc_high={}",
                self.dod, self.soc_high
            )));
        }
        if !(-10.0..=50.0).contains(&self.temp_amb) {
            return Err(Error::invalid(format!(
                "ambient temperature {} outside [-10, 50] degC",
                self.temp_amb
            )));
        }
        if !(self.c_rate > 0.0 && self.c_rate <= 4.0) {
            return Err(Error::invalid(format!("c_rate {} outside (0, 4]", self.c_rate)));
        }
        if !(self.soh > SOH_EOL && self.soh <= 1.0) {
            return Err(Error::invalid(format!("soh {} outside (0.8, 1]", self.soh)));
        }
        Ok(())
    }

    fn with_soh(mut self, soh: f64) -> Self {
        self.soh = soh;
        self
    }
}

/// Ground-truth internal state and degradation of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcome {
    /// degC
    pub internal_temp: f64,
    /// milliohm
    pub internal_resistance: f64,
    /// Cycles to reach SOH 0.8 under these conditions from a fresh cell.
    pub elcn: f64,
    /// SOH fraction lost in this cycle.
    pub degradation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgingSample {
    pub conditions: CycleConditions,
    pub outcome: CycleOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub grid: Vec<CycleConditions>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgingDataset {
    pub samples: Vec<AgingSample>,
    pub meta: DatasetMeta,
}

pub fn internal_temperature(cond: &CycleConditions) -> Result<f64> {
    cond.validate()?;
    Ok(heat(cond))
}

fn heat(cond: &CycleConditions) -> f64 {
    cond.temp_amb + HEAT_C2 * cond.c_rate * cond.c_rate + HEAT_CD * cond.c_rate * cond.dod
}

pub fn internal_resistance(cond: &CycleConditions, it: f64) -> Result<f64> {
    cond.validate()?;
    if !(it >= cond.temp_amb) {
        return Err(Error::invalid(format!(
            "internal temperature {} below ambient {}",
            it, cond.temp_amb
        )));
    }
    Ok(resistance(cond.soh, it))
}

fn resistance(soh: f64, it: f64) -> f64 {
    let wear = 1.0 + 4.0 * (1.0 - soh);
    let cold = 1.0 + 0.8 * (25.0 - it).max(0.0) / 25.0;
    R0_MILLIOHM * wear * cold
}

pub fn cycle_degradation(cond: &CycleConditions) -> Result<f64> {
    cond.validate()?;
    Ok(degradation(cond))
}

fn degradation(cond: &CycleConditions) -> f64 {
    let t_k = heat(cond) + KELVIN;
    let soc_avg = cond.soc_high - cond.dod / 2.0;
    K_REF
        * (cond.dod / 0.5).powf(DOD_EXPONENT)
        * (1.0 + SOC_SLOPE * (soc_avg - 0.5))
        * (ACTIVATION_K * (1.0 / T_REF_K - 1.0 / t_k)).exp()
        * (1.0 + C_RATE_SLOPE * (cond.c_rate - 0.5).max(0.0))
        * (1.0 + AGING_ACCEL * (1.0 - cond.soh))
}

/// Cycles to end of life at these stress conditions, evaluated from full health.
pub fn equivalent_life_cycles(cond: &CycleConditions) -> Result<f64> {
    let fresh = cond.with_soh(1.0);
    fresh.validate()?;
    Ok((1.0 - SOH_EOL) / degradation(&fresh))
}

/// Full oracle outcome for one cycle.
pub fn cycle_outcome(cond: &CycleConditions) -> Result<CycleOutcome> {
    cond.validate()?;
    let it = heat(cond);
    Ok(CycleOutcome {
        internal_temp: it,
        internal_resistance: resistance(cond.soh, it),
        elcn: equivalent_life_cycles(cond)?,
        degradation: degradation(cond),
    })
}

/// Cycle a fresh cell at fixed conditions until SOH reaches end of life.
pub fn run_aging_test(initial: &CycleConditions) -> Result<Vec<AgingSample>> {
    initial.validate()?;
    if initial.soh != 1.0 {
        return Err(Error::invalid(format!(
            "aging test must start from soh 1.0, got {}",
            initial.soh
        )));
    }
    let mut samples = Vec::new();
    let mut soh = 1.0;
    while soh > SOH_EOL {
        let cond = initial.with_soh(soh);
        let outcome = cycle_outcome(&cond)?;
        if !(outcome.degradation > 0.0) {
            return Err(Error::Internal(format!(
                "non-positive degradation {} at cycle {}",
                outcome.degradation,
                samples.len()
            )));
        }
        soh -= outcome.degradation;
        samples.push(AgingSample {
            conditions: cond,
            outcome,
        });
    }
    Ok(samples)
}

/// Run one aging test per grid entry and concatenate the results.
///
/// With `noise_sigma > 0` each recorded degradation label is scaled by
/// `1 + eps`, `eps ~ N(0, noise_sigma)`. The generator for grid entry `i` is
/// ChaCha8 seeded with `seed` on stream `i`, so entries are independent of
/// evaluation order.
pub fn generate_dataset(
    grid: &[CycleConditions],
    noise_sigma: f64,
    seed: u64,
) -> Result<AgingDataset> {
    if grid.is_empty() {
        return Err(Error::invalid("aging grid is empty"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    for (index, cond) in grid.iter().enumerate() {
        cond.validate()
            .and_then(|_| {
                if cond.soh == 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("soh must be 1.0 at test start"))
                }
            })
            .map_err(|e| Error::InvalidGridEntry {
                index,
                reason: e.to_string(),
            })?;
    }

    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = Vec::new();
    for (index, cond) in grid.iter().enumerate() {
        let mut test = run_aging_test(cond)?;
        if noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            for s in &mut test {
                let eps: f64 = noise.sample(&mut rng);
                s.outcome.degradation = (s.outcome.degradation * (1.0 + eps)).max(0.0);
            }
        }
        samples.extend(test);
    }

    let row_count = samples.len();
    Ok(AgingDataset {
        samples,
        meta: DatasetMeta {
            grid: grid.to_vec(),
            noise_sigma,
            seed,
            row_count,
        },
    })
}

/// 35 aging-test groups drawn from the SOC x DOD x temperature x C-rate cross product.
///
/// Candidate axes are SOC in {0.6, 0.8, 1.0}, DOD in {0.2, 0.5, 0.8} (clipped to
/// the SOC), temperature in {5, 25, 45} degC and C-rate in {0.5, 1, 2}. The 81
/// lexicographic combinations are thinned to 35 by an even stride.
pub fn default_grid() -> Vec<CycleConditions> {
    const GROUPS: usize = 35;
    let mut all = Vec::with_capacity(81);
    for &soc in &[0.6, 0.8, 1.0] {
        for &dod in &[0.2, 0.5, 0.8_f64] {
            for &temp in &[5.0, 25.0, 45.0] {
                for &c_rate in &[0.5, 1.0, 2.0] {
                    all.push(CycleConditions {
                        soc_high: soc,
                        dod: dod.min(soc),
                        temp_amb: temp,
                        c_rate,
                        soh: 1.0,
                    });
                }
            }
        }
    }
    let last = all.len() - 1;
    (0..GROUPS)
        .map(|i| all[(i * last + (GROUPS - 1) / 2) / (GROUPS - 1)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(soc: f64, dod: f64, temp: f64, c: f64, soh: f64) -> CycleConditions {
        CycleConditions::new(soc, dod, temp, c, soh).unwrap()
    }

    fn nominal() -> CycleConditions {
        cond(0.75, 0.5, 25.0, 0.5, 1.0)
    }

    // Independent evaluation of the closed forms, written out term by term.
    fn oracle_degradation(soc: f64, dod: f64, temp: f64, c: f64, soh: f64) -> f64 {
        let it = temp + 6.0 * c * c + 2.0 * c * dod;
        let arr = (4000.0 * (1.0 / 298.15 - 1.0 / (it + 273.15))).exp();
        let cf = if c > 0.5 { 1.0 + 0.3 * (c - 0.5) } else { 1.0 };
        2.0e-4
            * (2.0 * dod).powf(1.3)
            * (1.0 + 0.5 * (soc - dod / 2.0 - 0.5))
            * arr
            * cf
            * (1.0 + 1.5 * (1.0 - soh))
    }

    #[test]
    fn internal_temperature_examples() {
        let tiny = cond(0.8, 0.5, 25.0, 1e-12, 1.0);
        assert!((internal_temperature(&tiny).unwrap() - 25.0).abs() < 1e-9);
        let c = cond(0.8, 0.5, 25.0, 1.0, 1.0);
        assert!((internal_temperature(&c).unwrap() - 32.0).abs() < 1e-12);
        let c = cond(1.0, 1.0, 40.0, 2.0, 1.0);
        assert!((internal_temperature(&c).unwrap() - 68.0).abs() < 1e-12);
    }

    #[test]
    fn internal_resistance_examples() {
        let fresh = cond(0.8, 0.5, 25.0, 0.5, 1.0);
        assert!((internal_resistance(&fresh, 30.0).unwrap() - 50.0).abs() < 1e-12);
        let worn = cond(0.8, 0.5, 25.0, 0.5, 0.9);
        assert!((internal_resistance(&worn, 30.0).unwrap() - 70.0).abs() < 1e-9);
        let cold = cond(0.8, 0.5, -10.0, 0.5, 1.0);
        assert!((internal_resistance(&cold, 0.0).unwrap() - 90.0).abs() < 1e-9);
        assert!(internal_resistance(&fresh, 20.0).is_err());
    }

    #[test]
    fn degradation_examples() {
        let d = cycle_degradation(&nominal()).unwrap();
        let arr = (4000.0_f64 * (1.0 / 298.15 - 1.0 / 300.15)).exp();
        assert!((arr - 1.0935).abs() < 1e-4);
        assert!((d - 2.19e-4).abs() < 0.01e-4, "{d}");
        assert!((d - oracle_degradation(0.75, 0.5, 25.0, 0.5, 1.0)).abs() < 1e-18);

        let hot = cond(0.75, 0.5, 45.0, 0.5, 1.0);
        let d_hot = cycle_degradation(&hot).unwrap();
        assert!((d_hot - 5.03e-4).abs() < 0.01e-4, "{d_hot}");

        let shallow = cond(0.75, 1e-9, 25.0, 0.5, 1.0);
        assert!(cycle_degradation(&shallow).unwrap() < 1e-14);
    }

    #[test]
    fn elcn_examples() {
        let n = equivalent_life_cycles(&nominal()).unwrap();
        assert!((n - 914.0).abs() < 2.0, "{n}");
        let hot = cond(0.75, 0.5, 45.0, 0.5, 1.0);
        let n_hot = equivalent_life_cycles(&hot).unwrap();
        assert!((n_hot - 398.0).abs() < 1.5, "{n_hot}");
        // evaluated at full health regardless of the sample's SOH
        let worn = cond(0.75, 0.5, 25.0, 0.5, 0.85);
        assert_eq!(equivalent_life_cycles(&worn).unwrap(), n);

        let zero = CycleConditions {
            dod: 0.0,
            ..nominal()
        };
        assert!(equivalent_life_cycles(&zero).is_err());
    }

    #[test]
    fn aging_test_length_matches_integrated_oracle() {
        // dx/dn = d0 (1 + 1.5 x), x = 1 - soh  =>  n = ln(1.3) / (1.5 d0)
        let d0 = oracle_degradation(0.75, 0.5, 25.0, 0.5, 1.0);
        let continuous = (1.3_f64).ln() / (1.5 * d0);
        let run = run_aging_test(&nominal()).unwrap();
        assert!((run.len() as f64 - continuous).abs() < 2.0, "{} vs {continuous}", run.len());
        assert!((780..=820).contains(&run.len()));

        let hot = run_aging_test(&cond(0.75, 0.5, 45.0, 0.5, 1.0)).unwrap();
        assert!(hot.len() < run.len());

        for w in run.windows(2) {
            assert!(w[1].conditions.soh < w[0].conditions.soh);
        }
        assert!(run.iter().all(|s| s.conditions.soh > SOH_EOL));
        let last = run.last().unwrap();
        assert!(last.conditions.soh - last.outcome.degradation <= SOH_EOL);
    }

    #[test]
    fn aging_test_rejects_worn_start() {
        assert!(run_aging_test(&cond(0.75, 0.5, 25.0, 0.5, 0.9)).is_err());
    }

    #[test]
    fn default_grid_has_35_valid_groups() {
        let grid = default_grid();
        assert_eq!(grid.len(), 35);
        for g in &grid {
            g.validate().unwrap();
        }
        let mut dedup = grid.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 35);
        for temp in [5.0, 25.0, 45.0] {
            assert!(grid.iter().any(|g| g.temp_amb == temp));
        }
    }

    #[test]
    fn default_dataset_is_large_enough() {
        let ds = generate_dataset(&default_grid(), 0.0, 7).unwrap();
        assert!(ds.samples.len() >= 20_000, "{}", ds.samples.len());
        assert_eq!(ds.meta.row_count, ds.samples.len());
    }

    #[test]
    fn dataset_is_deterministic() {
        let grid = &default_grid()[..6];
        let a = generate_dataset(grid, 0.0, 3).unwrap();
        let b = generate_dataset(grid, 0.0, 3).unwrap();
        assert_eq!(a, b);
        let a = generate_dataset(grid, 0.02, 3).unwrap();
        let b = generate_dataset(grid, 0.02, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_has_half_normal_mean_deviation() {
        let grid = default_grid();
        let clean = generate_dataset(&grid, 0.0, 11).unwrap();
        let noisy = generate_dataset(&grid, 0.02, 11).unwrap();
        let n = clean.samples.len() as f64;
        let mean_dev: f64 = clean
            .samples
            .iter()
            .zip(&noisy.samples)
            .map(|(c, s)| (s.outcome.degradation / c.outcome.degradation - 1.0).abs())
            .sum::<f64>()
            / n;
        let expected = 0.02 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_dev - expected).abs() < 0.0005, "{mean_dev} vs {expected}");
        // features stay noise-free
        for (c, s) in clean.samples.iter().zip(&noisy.samples) {
            assert_eq!(c.conditions, s.conditions);
            assert_eq!(c.outcome.elcn, s.outcome.elcn);
            assert_eq!(c.outcome.internal_resistance, s.outcome.internal_resistance);
        }
    }

    #[test]
    fn invalid_grid_entry_is_named() {
        let mut grid = default_grid()[..3].to_vec();
        grid[2].dod = 0.9;
        grid[2].soc_high = 0.6;
        match generate_dataset(&grid, 0.0, 1) {
            Err(Error::InvalidGridEntry { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(generate_dataset(&[], 0.0, 1).is_err());
        assert!(generate_dataset(&grid[..2], -0.1, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_cond() -> impl Strategy<Value = CycleConditions> {
            (0.05..1.0f64, 0.01..1.0f64, -10.0..50.0f64, 0.01..4.0f64, 0.801..1.0f64).prop_map(
                |(soc, frac, temp, c, soh)| CycleConditions {
                    soc_high: soc,
                    dod: soc * frac,
                    temp_amb: temp,
                    c_rate: c,
                    soh,
                },
            )
        }

        proptest! {
            #[test]
            fn degradation_monotone(c in arb_cond(), a in 0.0..1.0f64) {
                let d = degradation(&c);
                prop_assert!(d > 0.0);

                let deeper = CycleConditions { dod: c.dod + a * (c.soc_high - c.dod), ..c };
                if deeper.dod > c.dod {
                    prop_assert!(degradation(&deeper) > d);
                }
                let hotter = CycleConditions { temp_amb: c.temp_amb + a * (50.0 - c.temp_amb), ..c };
                if hotter.temp_amb > c.temp_amb {
                    prop_assert!(degradation(&hotter) > d);
                }
                let faster = CycleConditions { c_rate: c.c_rate + a * (4.0 - c.c_rate), ..c };
                prop_assert!(degradation(&faster) >= d);
                let older = CycleConditions { soh: c.soh - a * (c.soh - 0.8001), ..c };
                if older.soh < c.soh {
                    prop_assert!(degradation(&older) > d);
                }
            }

            #[test]
            fn internal_state_bounds(c in arb_cond()) {
                let it = internal_temperature(&c).unwrap();
                prop_assert!(it >= c.temp_amb);
                let fresh = CycleConditions { soh: 1.0, ..c };
                if it >= 25.0 {
                    prop_assert!(internal_resistance(&fresh, it).unwrap() >= R0_MILLIOHM - 1e-12);
                }
                prop_assert!(internal_resistance(&c, it).unwrap() > 0.0);
            }
        }
    }
}
