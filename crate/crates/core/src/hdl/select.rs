use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{compose_bdp_input, DegradationModel};
use super::variants::{BdpVariant, Feature, UbdfVariant, BDF};
use crate::aging::AgingDataset;
use crate::error::{Error, Result};
use crate::nn::{split_indices, train_split, within, NetworkSpec, TrainConfig, TrainedNetwork, TOLERANCES};

/// One row of an accuracy table: `model_id,tol05,tol10,tol15,tol20`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model_id: String,
    pub accuracy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracy {
    pub ubdf: UbdfVariant,
    pub bdp: BdpVariant,
    pub accuracy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFailure {
    pub model_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// First-stage networks on their own outputs.
    pub ubdf: Vec<AccuracyRow>,
    /// Second-stage networks fed ground-truth features.
    pub bdp: Vec<AccuracyRow>,
    /// Every closure-compatible pair, second stage fed first-stage predictions.
    pub pairs: Vec<PairAccuracy>,
    pub failures: Vec<VariantFailure>,
    pub selected: (UbdfVariant, BdpVariant),
}

impl SelectionReport {
    pub fn selected_accuracy(&self) -> [f64; 4] {
        self.pairs
            .iter()
            .find(|p| (p.ubdf, p.bdp) == self.selected)
            .map(|p| p.accuracy)
            .expect("selected pair is always evaluated")
    }
}

pub struct Selection {
    pub model: DegradationModel,
    pub report: SelectionReport,
}

/// Direct single-stage degradation predictors used for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmarks {
    pub nnbd: TrainedNetwork,
    pub nnbd2: TrainedNetwork,
}

/// Dataset columns in [`Feature`] order plus the degradation label, split once.
pub(crate) struct Prepared {
    rows: Vec<[f64; 9]>,
    train: Vec<usize>,
    val: Vec<usize>,
}

const FEATURES: [Feature; 8] = [
    Feature::Soc,
    Feature::Dod,
    Feature::Temp,
    Feature::CRate,
    Feature::Soh,
    Feature::It,
    Feature::Ir,
    Feature::Elcn,
];
const LABEL: usize = 8;

fn col(f: Feature) -> usize {
    FEATURES.iter().position(|g| *g == f).unwrap()
}

impl Prepared {
    pub(crate) fn new(dataset: &AgingDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let rows: Vec<[f64; 9]> = dataset
            .samples
            .iter()
            .map(|s| {
                let mut r = [0.0; 9];
                for (k, f) in FEATURES.iter().enumerate() {
                    r[k] = f.of_sample(s);
                }
                r[LABEL] = s.outcome.degradation;
                r
            })
            .collect();
        let (train, val) = split_indices(rows.len(), cfg.train_fraction, cfg.seed)?;
        Ok(Prepared { rows, train, val })
    }

    fn matrix(&self, idx: &[usize], features: &[Feature]) -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| features.iter().map(|&f| self.rows[i][col(f)]).collect())
            .collect()
    }

    fn labels(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| vec![self.rows[i][LABEL]]).collect()
    }

    fn bdf(&self, i: usize) -> [f64; 5] {
        let r = &self.rows[i];
        [r[0], r[1], r[2], r[3], r[4]]
    }

    fn fit(&self, inputs: &[Feature], targets: Option<&[Feature]>, spec: &NetworkSpec, cfg: &TrainConfig) -> Result<TrainedNetwork> {
        let mask: Vec<bool> = inputs.iter().map(|f| f.normalized()).collect();
        let (ty, vy) = match targets {
            Some(t) => (self.matrix(&self.train, t), self.matrix(&self.val, t)),
            None => (self.labels(&self.train), self.labels(&self.val)),
        };
        train_split(
            &self.matrix(&self.train, inputs),
            &ty,
            &self.matrix(&self.val, inputs),
            &vy,
            &mask,
            spec,
            cfg,
        )
    }

    /// Fraction of validation rows where every output is within tolerance.
    fn accuracy(&self, preds: &[Vec<f64>], truth: &[Vec<f64>]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, &tol) in out.iter_mut().zip(&TOLERANCES) {
            let hits = preds
                .iter()
                .zip(truth)
                .filter(|(p, t)| p.iter().zip(t.iter()).all(|(a, b)| within(*a, *b, tol)))
                .count();
            *o = hits as f64 / preds.len() as f64;
        }
        out
    }

    fn predict_all(&self, net: &TrainedNetwork, inputs: &[Feature]) -> Result<Vec<Vec<f64>>> {
        self.matrix(&self.val, inputs).iter().map(|x| net.predict(x)).collect()
    }

    fn composed_accuracy(
        &self,
        u: UbdfVariant,
        ubdf_preds: &[Vec<f64>],
        b: BdpVariant,
        bdp: &TrainedNetwork,
    ) -> Result<[f64; 4]> {
        let mut preds = Vec::with_capacity(self.val.len());
        for (&i, uo) in self.val.iter().zip(ubdf_preds) {
            let x = compose_bdp_input(u, b, &self.bdf(i), uo);
            preds.push(bdp.predict(&x)?);
        }
        Ok(self.accuracy(&preds, &self.labels(&self.val)))
    }
}

/// Seed for one network, derived from the run seed and a fixed tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

fn ubdf_tag(v: UbdfVariant) -> u64 {
    100 + v.id() as u64
}

fn bdp_tag(v: BdpVariant) -> u64 {
    200 + v.id() as u64
}

const NNBD_TAG: u64 = 301;
const NNBD2_TAG: u64 = 302;

fn with_seed(cfg: &TrainConfig, tag: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(cfg.seed, tag),
        ..cfg.clone()
    }
}

fn train_ubdf(p: &Prepared, v: UbdfVariant, cfg: &TrainConfig) -> Result<TrainedNetwork> {
    let spec = NetworkSpec::standard(BDF.len(), v.outputs().len());
    p.fit(&BDF, Some(v.outputs()), &spec, &with_seed(cfg, ubdf_tag(v)))
}

fn train_bdp(p: &Prepared, v: BdpVariant, cfg: &TrainConfig) -> Result<TrainedNetwork> {
    let spec = NetworkSpec::standard(v.inputs().len(), 1);
    p.fit(v.inputs(), None, &spec, &with_seed(cfg, bdp_tag(v)))
}

/// Run `jobs` on scoped threads; results come back in job order.
fn parallel<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

/// Train every first- and second-stage variant and pick the best composed pair.
///
/// Pairs are ranked by composed validation accuracy at 15% tolerance, then at
/// 10%, then by lower UBDF id and lower BDP id.
pub fn select_best_combination(dataset: &AgingDataset, cfg: &TrainConfig) -> Result<Selection> {
    let p = Prepared::new(dataset, cfg)?;
    let jobs = UbdfVariant::ALL.len() + BdpVariant::ALL.len();
    let nets = parallel(jobs, |k| {
        if k < UbdfVariant::ALL.len() {
            train_ubdf(&p, UbdfVariant::ALL[k], cfg)
        } else {
            train_bdp(&p, BdpVariant::ALL[k - UbdfVariant::ALL.len()], cfg)
        }
    });
    let mut nets = nets.into_iter();

    let mut failures = Vec::new();
    let mut ubdf_rows = Vec::new();
    let mut ubdf_nets = Vec::new();
    for v in UbdfVariant::ALL {
        match nets.next().unwrap() {
            Ok(net) => {
                let preds = p.predict_all(&net, &BDF)?;
                ubdf_rows.push(AccuracyRow {
                    model_id: v.to_string(),
                    accuracy: p.accuracy(&preds, &p.matrix(&p.val, v.outputs())),
                });
                ubdf_nets.push((v, net, preds));
            }
            Err(e) => failures.push(failed(v.to_string(), e)?),
        }
    }
    let mut bdp_rows = Vec::new();
    let mut bdp_nets = Vec::new();
    for v in BdpVariant::ALL {
        match nets.next().unwrap() {
            Ok(net) => {
                let preds = p.predict_all(&net, v.inputs())?;
                bdp_rows.push(AccuracyRow {
                    model_id: v.to_string(),
                    accuracy: p.accuracy(&preds, &p.labels(&p.val)),
                });
                bdp_nets.push((v, net));
            }
            Err(e) => failures.push(failed(v.to_string(), e)?),
        }
    }

    let mut pairs = Vec::new();
    for (u, _, upreds) in &ubdf_nets {
        for (b, bnet) in &bdp_nets {
            if b.compatible_with(*u) {
                pairs.push(PairAccuracy {
                    ubdf: *u,
                    bdp: *b,
                    accuracy: p.composed_accuracy(*u, upreds, *b, bnet)?,
                });
            }
        }
    }
    let best = best_pair(&pairs)
        .ok_or_else(|| Error::Internal("no compatible variant pair trained successfully".into()))?;
    let selected = (best.ubdf, best.bdp);
    let unet = ubdf_nets.iter().find(|(v, ..)| *v == selected.0).unwrap().1.clone();
    let bnet = bdp_nets.iter().find(|(v, _)| *v == selected.1).unwrap().1.clone();
    let model = DegradationModel::new(selected.0, unet, selected.1, bnet)?;
    Ok(Selection {
        model,
        report: SelectionReport {
            ubdf: ubdf_rows,
            bdp: bdp_rows,
            pairs,
            failures,
            selected,
        },
    })
}

fn failed(model_id: String, e: Error) -> Result<VariantFailure> {
    match e {
        Error::Diverged { .. } => {
            log::warn!("{model_id} excluded: {e}");
            Ok(VariantFailure {
                model_id,
                reason: e.to_string(),
            })
        }
        other => Err(other),
    }
}

/// Argmax at 15%, then 10%, then lowest ids.
pub fn best_pair(pairs: &[PairAccuracy]) -> Option<&PairAccuracy> {
    pairs.iter().min_by(|a, b| {
        b.accuracy[2]
            .total_cmp(&a.accuracy[2])
            .then(b.accuracy[1].total_cmp(&a.accuracy[1]))
            .then(a.ubdf.cmp(&b.ubdf))
            .then(a.bdp.cmp(&b.bdp))
    })
}

/// Train one named pair; returns the model and its composed validation accuracy.
pub fn train_pair(
    dataset: &AgingDataset,
    ubdf: UbdfVariant,
    bdp: BdpVariant,
    cfg: &TrainConfig,
) -> Result<(DegradationModel, PairAccuracy)> {
    super::model::check_closure(ubdf, bdp)?;
    let p = Prepared::new(dataset, cfg)?;
    let mut nets = parallel(2, |k| {
        if k == 0 {
            train_ubdf(&p, ubdf, cfg)
        } else {
            train_bdp(&p, bdp, cfg)
        }
    })
    .into_iter();
    let unet = nets.next().unwrap()?;
    let bnet = nets.next().unwrap()?;
    let upreds = p.predict_all(&unet, &BDF)?;
    let accuracy = p.composed_accuracy(ubdf, &upreds, bdp, &bnet)?;
    let model = DegradationModel::new(ubdf, unet, bdp, bnet)?;
    Ok((model, PairAccuracy { ubdf, bdp, accuracy }))
}

/// NNBD (5-20-10-1) and NNBD2 (5-20-10-10-1) on the same split as the quantifier.
pub fn train_benchmarks(dataset: &AgingDataset, cfg: &TrainConfig) -> Result<Benchmarks> {
    let p = Prepared::new(dataset, cfg)?;
    let specs = [
        (NetworkSpec::new(vec![5, 20, 10, 1])?, NNBD_TAG),
        (NetworkSpec::new(vec![5, 20, 10, 10, 1])?, NNBD2_TAG),
    ];
    let mut nets = parallel(2, |k| p.fit(&BDF, None, &specs[k].0, &with_seed(cfg, specs[k].1))).into_iter();
    Ok(Benchmarks {
        nnbd: nets.next().unwrap()?,
        nnbd2: nets.next().unwrap()?,
    })
}

/// Three-row comparison table (quantifier, NNBD, NNBD2) on the validation split of `cfg`.
pub fn comparison_table(
    dataset: &AgingDataset,
    cfg: &TrainConfig,
    model: &DegradationModel,
    bench: &Benchmarks,
) -> Result<Vec<AccuracyRow>> {
    let p = Prepared::new(dataset, cfg)?;
    let upreds = p.predict_all(model.ubdf_network(), &BDF)?;
    let hdl = p.composed_accuracy(model.ubdf_variant(), &upreds, model.bdp_variant(), model.bdp_network())?;
    let truth = p.labels(&p.val);
    let mut rows = vec![AccuracyRow {
        model_id: "HDL-BDQ".into(),
        accuracy: hdl,
    }];
    for (name, net) in [("NNBD", &bench.nnbd), ("NNBD2", &bench.nnbd2)] {
        rows.push(AccuracyRow {
            model_id: name.into(),
            accuracy: p.accuracy(&p.predict_all(net, &BDF)?, &truth),
        });
    }
    Ok(rows)
}
