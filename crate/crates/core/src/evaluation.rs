//! Positioning error metrics, attack-strength sweeps across the three
//! models, and CSV report artifacts.
//!
//! Fairness rule for sweeps: at every (strength, repeat) cell all models
//! are evaluated on the same perturbed copy of the test set, and every
//! cell's RNG is derived only from the master seed, the attack family, the
//! strength, and the repeat index, so reports replay bit-for-bit.

use crate::attacks::{perturb_dataset, AttackFamily};
use crate::dataset::Dataset;
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::model::{Predictor, TrainedModel};
use crate::rng::derive_seed;
use std::fmt;

/// Root mean squared Euclidean distance between paired positions, meters.
pub fn rmse(truths: &[[f64; 2]], preds: &[[f64; 2]]) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::invalid("rmse: empty input"));
    }
    if truths.len() != preds.len() {
        return Err(Error::invalid(format!(
            "rmse: {} truths vs {} predictions",
            truths.len(),
            preds.len()
        )));
    }
    let mut acc = 0.0;
    for (t, p) in truths.iter().zip(preds) {
        let dx = t[0] - p[0];
        let dy = t[1] - p[1];
        acc += dx * dx + dy * dy;
    }
    Ok((acc / truths.len() as f64).sqrt())
}

/// Which member of the pipeline a result row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    Base,
    Robust,
    Ensemble,
}

impl ModelId {
    pub fn name(self) -> &'static str {
        match self {
            ModelId::Base => "base",
            ModelId::Robust => "robust",
            ModelId::Ensemble => "ensemble",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(ModelId::Base),
            "robust" => Ok(ModelId::Robust),
            "ensemble" => Ok(ModelId::Ensemble),
            other => Err(Error::data(format!("report: unknown model id {other:?}"))),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One sweep measurement: a model's error under one attack strength,
/// aggregated over the repeat realizations seeded from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub model: ModelId,
    pub attack: String,
    pub strength: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    /// Merges sweeps over different attack families into one report.
    pub fn merge(mut self, other: EvalReport) -> EvalReport {
        self.cells.extend(other.cells);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,attack,strength,rmse_mean,rmse_std,n,seed\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.model, c.attack, c.strength, c.rmse_mean, c.rmse_std, c.n, c.seed
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<EvalReport> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("report: empty file"))?;
        if header != "model,attack,strength,rmse_mean,rmse_std,n,seed" {
            return Err(Error::data(format!("report: bad header {header:?}")));
        }
        let mut cells = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::data(format!(
                    "report: line {line_no}: {} fields, expected 7",
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse().map_err(|_| {
                    Error::data(format!(
                        "report: line {line_no}: bad number {:?}",
                        fields[i]
                    ))
                })
            };
            cells.push(EvalCell {
                model: ModelId::parse(fields[0])?,
                attack: fields[1].to_string(),
                strength: num(2)?,
                rmse_mean: num(3)?,
                rmse_std: num(4)?,
                n: fields[5].parse().map_err(|_| {
                    Error::data(format!("report: line {line_no}: bad count {:?}", fields[5]))
                })?,
                seed: fields[6].parse().map_err(|_| {
                    Error::data(format!("report: line {line_no}: bad seed {:?}", fields[6]))
                })?,
            });
        }
        Ok(EvalReport { cells })
    }
}

fn predictions(model: &dyn Predictor, d: &Dataset) -> Result<Vec<[f64; 2]>> {
    d.samples().iter().map(|s| model.predict(&s.rssi)).collect()
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

const FAMILY_TAGS: [(AttackFamily, u64); 2] =
    [(AttackFamily::Spoofing, 0), (AttackFamily::Manipulation, 1)];

fn family_tag(family: AttackFamily) -> u64 {
    FAMILY_TAGS
        .iter()
        .find(|(f, _)| *f == family)
        .map(|(_, t)| *t)
        .unwrap()
}

/// Evaluates all three models at every strength of one attack family.
///
/// Per cell: `repeats` perturbed realizations of the test set are generated
/// from seeds derived from `(master_seed, family, strength, repeat)`, every
/// model is scored on the same realizations, and the cell records the mean
/// and sample standard deviation of the per-realization RMSEs.
pub fn attack_sweep(
    base: &TrainedModel,
    robust: &TrainedModel,
    ensemble: &EnsembleModel,
    d_test: &Dataset,
    family: AttackFamily,
    strengths: &[f64],
    master_seed: u64,
    repeats: usize,
) -> Result<EvalReport> {
    if strengths.is_empty() {
        return Err(Error::invalid("attack sweep: no strengths given"));
    }
    if repeats == 0 {
        return Err(Error::invalid("attack sweep: repeats must be >= 1"));
    }
    if d_test.is_empty() {
        return Err(Error::invalid("attack sweep: empty test set"));
    }
    let truths = d_test.positions();
    let mut cells = Vec::with_capacity(strengths.len() * 3);
    for &strength in strengths {
        family.spec_for(strength, 0).kind.validate()?;
        let cell_seed = derive_seed(master_seed, &[family_tag(family), strength.to_bits()]);
        let mut per_model: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for r in 0..repeats {
            let rep_seed = derive_seed(cell_seed, &[r as u64]);
            let spec = family.spec_for(strength, rep_seed);
            let perturbed = perturb_dataset(d_test, &spec)?;
            let models: [&dyn Predictor; 3] = [base, robust, ensemble];
            for (slot, model) in per_model.iter_mut().zip(models) {
                let preds = predictions(model, &perturbed)?;
                slot.push(rmse(&truths, &preds)?);
            }
        }
        for (values, id) in
            per_model
                .iter()
                .zip([ModelId::Base, ModelId::Robust, ModelId::Ensemble])
        {
            let (mean, std) = mean_and_sample_std(values);
            cells.push(EvalCell {
                model: id,
                attack: family.name().to_string(),
                strength,
                rmse_mean: mean,
                rmse_std: std,
                n: d_test.len(),
                seed: cell_seed,
            });
        }
    }
    Ok(EvalReport { cells })
}

/// One (truth, prediction) pair of one model on one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRecord {
    pub true_x: f64,
    pub true_y: f64,
    pub pred_x: f64,
    pub pred_y: f64,
    pub model: ModelId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatterExport {
    pub records: Vec<ScatterRecord>,
}

impl ScatterExport {
    pub fn merge(mut self, other: ScatterExport) -> ScatterExport {
        self.records.extend(other.records);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_x,true_y,pred_x,pred_y,model\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.true_x, r.true_y, r.pred_x, r.pred_y, r.model
            ));
        }
        out
    }
}

/// Clean-data predictions of one model over the whole test set.
pub fn scatter_export(
    model: &dyn Predictor,
    id: ModelId,
    d_test: &Dataset,
) -> Result<ScatterExport> {
    if d_test.is_empty() {
        return Err(Error::invalid("scatter export: empty test set"));
    }
    let records = d_test
        .samples()
        .iter()
        .map(|s| {
            let p = model.predict(&s.rssi)?;
            Ok(ScatterRecord {
                true_x: s.position[0],
                true_y: s.position[1],
                pred_x: p[0],
                pred_y: p[1],
                model: id,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScatterExport { records })
}

/// Per-model error at one designated strength of each attack family,
/// with the improvement relative to the Base model.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: ModelId,
    pub attack: String,
    pub strength: f64,
    pub rmse_mean: f64,
    /// `(rmse_base − rmse_model) / rmse_base` at the same cell.
    pub improvement_vs_base: f64,
}

/// Projects the report onto reference strengths, one row per model per
/// attack kind present in `references` as `(attack name, strength)`.
pub fn comparison_summary(
    report: &EvalReport,
    references: &[(&str, f64)],
) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &(attack, strength) in references {
        let find = |id: ModelId| -> Result<&EvalCell> {
            report
                .cells
                .iter()
                .find(|c| c.model == id && c.attack == attack && c.strength == strength)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "summary: reference strength {strength} of {attack:?} missing for {id}"
                    ))
                })
        };
        let base_rmse = find(ModelId::Base)?.rmse_mean;
        for id in [ModelId::Base, ModelId::Robust, ModelId::Ensemble] {
            let cell = find(id)?;
            rows.push(SummaryRow {
                model: id,
                attack: attack.to_string(),
                strength,
                rmse_mean: cell.rmse_mean,
                improvement_vs_base: (base_rmse - cell.rmse_mean) / base_rmse,
            });
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("model,attack,strength,rmse_mean,improvement_vs_base\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model, r.attack, r.strength, r.rmse_mean, r.improvement_vs_base
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RssiSample;
    use crate::kan::{self, KanConfig};
    use crate::rng::DetRng;
    use crate::scaler::RobustScalerParams;

    #[test]
    fn rmse_of_identical_inputs_is_zero() {
        let pts = [[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(rmse(&pts, &pts).unwrap(), 0.0);
    }

    #[test]
    fn rmse_three_four_five() {
        assert_eq!(rmse(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap(), 5.0);
    }

    #[test]
    fn rmse_two_pair_hand_case() {
        // Squared errors 9 and 16: sqrt((9+16)/2) = sqrt(12.5).
        let out = rmse(&[[0.0, 0.0], [0.0, 0.0]], &[[3.0, 0.0], [0.0, 4.0]]).unwrap();
        assert!((out - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rmse_matches_brute_force_oracle() {
        let mut rng = DetRng::new(77);
        for _ in 0..1000 {
            let n = 1 + rng.range_usize(40);
            let truths: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    [
                        rng.uniform_range(-50.0, 50.0),
                        rng.uniform_range(-50.0, 50.0),
                    ]
                })
                .collect();
            let preds: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    [
                        rng.uniform_range(-50.0, 50.0),
                        rng.uniform_range(-50.0, 50.0),
                    ]
                })
                .collect();
            // Oracle: accumulate distances one by one, divide, take the root.
            let mut total = 0.0;
            for i in 0..n {
                let d0 = truths[i][0] - preds[i][0];
                let d1 = truths[i][1] - preds[i][1];
                total += d0 * d0 + d1 * d1;
            }
            let oracle = (total / n as f64).sqrt();
            assert!((rmse(&truths, &preds).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_rejects_degenerate_inputs() {
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[[0.0, 0.0]], &[]).is_err());
    }

    /// Test predictor that reads the position straight out of the features.
    struct Oracle;

    impl Predictor for Oracle {
        fn predict(&self, rssi: &[f64]) -> Result<[f64; 2]> {
            Ok([rssi[0], rssi[1]])
        }
        fn n_inputs(&self) -> usize {
            2
        }
    }

    fn coordinate_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = DetRng::new(seed);
        let samples = (0..n)
            .map(|_| {
                let x = rng.uniform_range(0.0, 20.0);
                let y = rng.uniform_range(0.0, 15.0);
                RssiSample {
                    rssi: vec![x, y],
                    position: [x, y],
                }
            })
            .collect();
        Dataset::new(samples, 2).unwrap()
    }

    #[test]
    fn scatter_of_perfect_model_sits_on_diagonal() {
        let d = coordinate_dataset(25, 3);
        let scatter = scatter_export(&Oracle, ModelId::Base, &d).unwrap();
        assert_eq!(scatter.records.len(), d.len());
        for r in &scatter.records {
            assert_eq!(r.true_x, r.pred_x);
            assert_eq!(r.true_y, r.pred_y);
        }
        let again = scatter_export(&Oracle, ModelId::Base, &d).unwrap();
        assert_eq!(scatter, again);
    }

    fn fixture_model(seed: u64) -> TrainedModel {
        let cfg = KanConfig {
            n_inputs: 3,
            m_inner: 2,
            inner_width: 4,
            kolmogorov_width: 7,
            dropout_rate: 0.0,
            seed,
        };
        let params = kan::init(&cfg).unwrap();
        let scaler = RobustScalerParams {
            medians: vec![-55.0, -60.0, -65.0],
            iqrs: vec![4.0, 5.0, 6.0],
        };
        TrainedModel::new(cfg, params, scaler).unwrap()
    }

    fn fixture_trio() -> (TrainedModel, TrainedModel, EnsembleModel) {
        let base = fixture_model(1);
        let robust = fixture_model(2);
        let ensemble = EnsembleModel::new(base.clone(), robust.clone(), 0.4).unwrap();
        (base, robust, ensemble)
    }

    fn rssi_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = DetRng::new(seed);
        let samples = (0..n)
            .map(|_| RssiSample {
                rssi: (0..3).map(|_| rng.uniform_range(-80.0, -40.0)).collect(),
                position: [rng.uniform_range(0.0, 20.0), rng.uniform_range(0.0, 15.0)],
            })
            .collect();
        Dataset::new(samples, 3).unwrap()
    }

    #[test]
    fn sweep_has_one_cell_per_model_and_strength() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(30, 9);
        let strengths = [0.0, 1.0, 2.0];
        let report = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &strengths,
            99,
            3,
        )
        .unwrap();
        assert_eq!(report.cells.len(), strengths.len() * 3);
        for &s in &strengths {
            for id in [ModelId::Base, ModelId::Robust, ModelId::Ensemble] {
                let matches = report
                    .cells
                    .iter()
                    .filter(|c| c.model == id && c.strength == s)
                    .count();
                assert_eq!(matches, 1, "{id} at {s}");
            }
        }
    }

    #[test]
    fn strength_zero_equals_clean_evaluation() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(20, 10);
        let report = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Manipulation,
            &[0.0],
            5,
            4,
        )
        .unwrap();
        let truths = d.positions();
        let models: [(&dyn Predictor, ModelId); 3] = [
            (&base, ModelId::Base),
            (&robust, ModelId::Robust),
            (&ensemble, ModelId::Ensemble),
        ];
        for (model, id) in models {
            let clean = rmse(&truths, &predictions(model, &d).unwrap()).unwrap();
            let cell = report.cells.iter().find(|c| c.model == id).unwrap();
            assert_eq!(cell.rmse_mean, clean);
            assert_eq!(cell.rmse_std, 0.0);
        }
    }

    #[test]
    fn sweep_replays_from_stored_seeds() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(15, 21);
        let repeats = 3;
        let report = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[0.5, 2.0],
            1234,
            repeats,
        )
        .unwrap();
        let truths = d.positions();
        for cell in &report.cells {
            let model: &dyn Predictor = match cell.model {
                ModelId::Base => &base,
                ModelId::Robust => &robust,
                ModelId::Ensemble => &ensemble,
            };
            // Replay the repeats from the recorded cell seed alone.
            let mut values = Vec::new();
            for r in 0..repeats {
                let rep_seed = derive_seed(cell.seed, &[r as u64]);
                let spec = AttackFamily::Spoofing.spec_for(cell.strength, rep_seed);
                let perturbed = perturb_dataset(&d, &spec).unwrap();
                values.push(rmse(&truths, &predictions(model, &perturbed).unwrap()).unwrap());
            }
            let (mean, std) = mean_and_sample_std(&values);
            assert_eq!(cell.rmse_mean, mean);
            assert_eq!(cell.rmse_std, std);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(12, 2);
        let run = || {
            attack_sweep(
                &base,
                &robust,
                &ensemble,
                &d,
                AttackFamily::Manipulation,
                &[0.1, 0.2],
                7,
                2,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sweep_rejects_invalid_inputs() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(5, 3);
        assert!(attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[],
            1,
            1
        )
        .is_err());
        assert!(attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[-1.0],
            1,
            1
        )
        .is_err());
        assert!(attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[1.0],
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn report_csv_round_trip() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(10, 5);
        let report = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[0.0, 2.0],
            55,
            2,
        )
        .unwrap();
        let parsed = EvalReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(report, parsed);
    }

    #[test]
    fn summary_projects_report_cells() {
        let (base, robust, ensemble) = fixture_trio();
        let d = rssi_dataset(18, 6);
        let spoof = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Spoofing,
            &[0.0, 2.0],
            3,
            2,
        )
        .unwrap();
        let manip = attack_sweep(
            &base,
            &robust,
            &ensemble,
            &d,
            AttackFamily::Manipulation,
            &[0.2],
            3,
            2,
        )
        .unwrap();
        let report = spoof.merge(manip);
        let rows =
            comparison_summary(&report, &[("spoofing", 2.0), ("manipulation", 0.2)]).unwrap();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            let cell = report
                .cells
                .iter()
                .find(|c| {
                    c.model == row.model && c.attack == row.attack && c.strength == row.strength
                })
                .unwrap();
            assert_eq!(row.rmse_mean, cell.rmse_mean);
            let base_cell = report
                .cells
                .iter()
                .find(|c| {
                    c.model == ModelId::Base && c.attack == row.attack && c.strength == row.strength
                })
                .unwrap();
            let expected = (base_cell.rmse_mean - cell.rmse_mean) / base_cell.rmse_mean;
            assert_eq!(row.improvement_vs_base, expected);
            if row.model == ModelId::Base {
                assert_eq!(row.improvement_vs_base, 0.0);
            }
        }
        // Missing reference strength errors.
        assert!(comparison_summary(&report, &[("spoofing", 3.0)]).is_err());
    }
}
