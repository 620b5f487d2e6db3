use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cbup::AggregatedCycle;
use super::variants::{BdpVariant, Feature, UbdfVariant, BDF};
use crate::aging::{cycle_degradation, CycleConditions};
use crate::error::{Error, Result};
use crate::nn::TrainedNetwork;

/// Inputs further than this fraction of the training range outside it are flagged.
pub const GUARD_BAND: f64 = 0.5;

/// Anything that turns a list of half cycles into an SOH loss.
pub trait DegradationEstimator {
    fn degradation(&self, cycles: &[AggregatedCycle], soh: f64) -> Result<f64>;
}

/// Predicts no degradation at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDegradation;

impl DegradationEstimator for ZeroDegradation {
    fn degradation(&self, _cycles: &[AggregatedCycle], _soh: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Evaluates the synthetic aging oracle directly on each half cycle.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDegradation;

impl DegradationEstimator for OracleDegradation {
    fn degradation(&self, cycles: &[AggregatedCycle], _soh: f64) -> Result<f64> {
        let mut total = 0.0;
        for c in cycles {
            let cond = CycleConditions {
                soc_high: c.soc_top,
                dod: c.dod,
                temp_amb: c.temp_amb,
                c_rate: c.c_rate,
                soh: c.soh,
            };
            total += c.weight * cycle_degradation(&cond)?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeWarning {
    pub cycle: usize,
    pub feature: Feature,
    pub value: f64,
    pub train_min: f64,
    pub train_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UbdfPrediction {
    /// One row per cycle, columns in the UBDF variant's output order.
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<RangeWarning>,
}

/// The composed two-stage quantifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationModel {
    ubdf_variant: UbdfVariant,
    ubdf: TrainedNetwork,
    bdp_variant: BdpVariant,
    bdp: TrainedNetwork,
}

impl DegradationModel {
    pub fn new(
        ubdf_variant: UbdfVariant,
        ubdf: TrainedNetwork,
        bdp_variant: BdpVariant,
        bdp: TrainedNetwork,
    ) -> Result<Self> {
        check_closure(ubdf_variant, bdp_variant)?;
        ubdf.validate()?;
        bdp.validate()?;
        if ubdf.spec.inputs() != BDF.len() || ubdf.spec.outputs() != ubdf_variant.outputs().len() {
            return Err(Error::invalid(format!("{ubdf_variant} network has the wrong shape")));
        }
        if bdp.spec.inputs() != bdp_variant.inputs().len() || bdp.spec.outputs() != 1 {
            return Err(Error::invalid(format!("{bdp_variant} network has the wrong shape")));
        }
        Ok(DegradationModel {
            ubdf_variant,
            ubdf,
            bdp_variant,
            bdp,
        })
    }

    pub fn ubdf_variant(&self) -> UbdfVariant {
        self.ubdf_variant
    }

    pub fn bdp_variant(&self) -> BdpVariant {
        self.bdp_variant
    }

    pub fn ubdf_network(&self) -> &TrainedNetwork {
        &self.ubdf
    }

    pub fn bdp_network(&self) -> &TrainedNetwork {
        &self.bdp
    }

    /// Per-cycle IT/IR/ELCN predictions (whichever the variant produces).
    pub fn predict_ubdf(&self, cycles: &[AggregatedCycle]) -> Result<UbdfPrediction> {
        let mut values = Vec::with_capacity(cycles.len());
        let mut warnings = Vec::new();
        for (i, c) in cycles.iter().enumerate() {
            let x = c.ubdf_features();
            for (j, (&v, s)) in x.iter().zip(&self.ubdf.input_norm.scales).enumerate() {
                let band = GUARD_BAND * (s.max - s.min);
                if v < s.min - band || v > s.max + band {
                    let w = RangeWarning {
                        cycle: i,
                        feature: BDF[j],
                        value: v,
                        train_min: s.min,
                        train_max: s.max,
                    };
                    log::warn!(
                        "cycle {i}: {} = {v} is outside the training range [{}, {}]",
                        w.feature.name(),
                        s.min,
                        s.max
                    );
                    warnings.push(w);
                }
            }
            values.push(self.ubdf.predict(&x)?);
        }
        Ok(UbdfPrediction { values, warnings })
    }

    /// Raw (unclipped, not SOH-scaled) second-stage output per cycle.
    pub fn per_cycle_raw(&self, cycles: &[AggregatedCycle]) -> Result<Vec<f64>> {
        let u = self.predict_ubdf(cycles)?;
        cycles
            .iter()
            .zip(&u.values)
            .map(|(c, uo)| {
                let x = compose_bdp_input(self.ubdf_variant, self.bdp_variant, &c.ubdf_features(), uo);
                Ok(self.bdp.predict(&x)?[0])
            })
            .collect()
    }

    /// Total SOH loss: sum of weight * max(0, bdp output) * soh.
    pub fn predict_degradation(&self, cycles: &[AggregatedCycle], soh: f64) -> Result<f64> {
        if !(soh > 0.8 && soh <= 1.0) {
            return Err(Error::invalid(format!("soh {soh} outside (0.8, 1]")));
        }
        let raw = self.per_cycle_raw(cycles)?;
        Ok(cycles
            .iter()
            .zip(raw)
            .map(|(c, d)| c.weight * d.max(0.0) * soh)
            .sum())
    }

    pub fn closure_checksum(&self) -> String {
        closure_checksum(self.ubdf_variant, self.bdp_variant)
    }
}

impl DegradationEstimator for DegradationModel {
    fn degradation(&self, cycles: &[AggregatedCycle], soh: f64) -> Result<f64> {
        self.predict_degradation(cycles, soh)
    }
}

pub fn check_closure(ubdf: UbdfVariant, bdp: BdpVariant) -> Result<()> {
    if bdp.compatible_with(ubdf) {
        return Ok(());
    }
    let missing: Vec<&str> = bdp
        .unobtainable_inputs()
        .filter(|f| !ubdf.outputs().contains(f))
        .map(Feature::name)
        .collect();
    Err(Error::invalid(format!(
        "{bdp} needs {} which {ubdf} does not produce",
        missing.join(", ")
    )))
}

/// sha256 over the variant ids and the feature wiring between the stages.
pub fn closure_checksum(ubdf: UbdfVariant, bdp: BdpVariant) -> String {
    let names = |fs: &[Feature]| fs.iter().map(|f| f.name()).collect::<Vec<_>>().join(",");
    let text = format!(
        "ubdf={}:{};bdp={}:{}",
        ubdf.id(),
        names(ubdf.outputs()),
        bdp.id(),
        names(bdp.inputs())
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Assemble a BDP input row from observable features and first-stage outputs.
pub(crate) fn compose_bdp_input(
    ubdf: UbdfVariant,
    bdp: BdpVariant,
    bdf: &[f64; 5],
    ubdf_out: &[f64],
) -> Vec<f64> {
    bdp.inputs()
        .iter()
        .map(|f| match BDF.iter().position(|b| b == f) {
            Some(i) => bdf[i],
            None => {
                let k = ubdf.outputs().iter().position(|o| o == f).expect("closure checked");
                ubdf_out[k]
            }
        })
        .collect()
}

/// On-disk form of a [`DegradationModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub ubdf_variant: UbdfVariant,
    pub bdp_variant: BdpVariant,
    pub closure_checksum: String,
    pub ubdf: TrainedNetwork,
    pub bdp: TrainedNetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl From<&DegradationModel> for ModelArtifact {
    fn from(m: &DegradationModel) -> Self {
        ModelArtifact {
            ubdf_variant: m.ubdf_variant,
            bdp_variant: m.bdp_variant,
            closure_checksum: m.closure_checksum(),
            ubdf: m.ubdf.clone(),
            bdp: m.bdp.clone(),
            manifest: None,
        }
    }
}

impl TryFrom<ModelArtifact> for DegradationModel {
    type Error = Error;
    fn try_from(a: ModelArtifact) -> Result<Self> {
        let expected = closure_checksum(a.ubdf_variant, a.bdp_variant);
        if a.closure_checksum != expected {
            return Err(Error::invalid("model artifact closure checksum does not match its variants"));
        }
        DegradationModel::new(a.ubdf_variant, a.ubdf, a.bdp_variant, a.bdp)
    }
}
