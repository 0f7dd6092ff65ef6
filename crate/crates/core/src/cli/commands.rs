use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::adversarial::tabular::{builtin_joints, gradient_training_vs_oracle, tabular_equilibrium_check, GradientOracleReport, NamedCheck, TabularJoint};
use crate::adversarial::{read_history, tail_mean, train, write_history, LossRecord, ModelParams};
use crate::channel::dataset::{read_manifest, write_dataset};
use crate::channel::{gen_dataset, RssTrace};
use crate::error::{Error, Result};
use crate::eval::plot::{bar_chart, loss_chart, roc_chart};
use crate::eval::{auroc, metrics, predict_records, roc, write_roc_csv, MetricsReport};
use crate::io::{read_json, read_jsonl, write_file, write_json, write_jsonl};
use crate::profile::{profiles_from_trace, Normalizer, PropagationProfile};
use crate::protocol::{
    deadlock_script, handshake_script, read_script, run_scenario, spoofing_script, write_script, write_transcript,
    LearnedVerifier, MessageKind, OracleVerifier, Phase, ThresholdVerifier, Verifier,
};
use crate::rng;

use super::{ExperimentConfig, ScriptChoice, SeedStream, SplitPolicy, VerifierChoice};

/// Decision threshold on the on-body probability.
const THRESHOLD: f64 = 0.5;
const EQUILIBRIUM_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 0.05;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub traces: usize,
    pub manifest: String,
    /// `on|off/motion/environment` to trace count.
    pub cells: BTreeMap<String, usize>,
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    cfg.validate()?;
    let traces = gen_dataset(&cfg.dataset, cfg.sub_seed(SeedStream::Dataset))?;
    let manifest = write_dataset(&cfg.layout().traces(), &traces)?;
    let mut cells = BTreeMap::new();
    for t in &traces {
        let key = format!("{}/{}/{}", if t.y.index() == 1 { "on" } else { "off" }, t.z.name(), t.v.name());
        *cells.entry(key).or_insert(0) += 1;
    }
    Ok(SimulateSummary { traces: traces.len(), manifest: manifest.display().to_string(), cells })
}

/// Trace indices of each split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits traces, never segments, so no trace contributes profiles to both
/// sides. Within every controlled `(y, z, v)` cell, `round(test_fraction *
/// count)` traces drawn at random are held out; every uncontrolled trace is
/// test-only.
pub fn split_traces(traces: &[RssTrace], policy: &SplitPolicy, seed: u64) -> SplitSummary {
    let mut cells: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    let mut test = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        if t.z.is_controlled() {
            cells.entry((t.y.index(), t.z.index(), t.v.index())).or_default().push(i);
        } else {
            test.push(i);
        }
    }
    let mut r = rng::rng_from_seed(seed);
    let mut train = Vec::new();
    for members in cells.values() {
        let k = (policy.test_fraction * members.len() as f64).round() as usize;
        let held = sample(&mut r, members.len(), k.min(members.len())).into_vec();
        for (j, &i) in members.iter().enumerate() {
            if held.contains(&j) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    SplitSummary { train, test }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizeSummary {
    pub train_traces: usize,
    pub test_traces: usize,
    pub train_profiles: usize,
    pub test_profiles: usize,
    pub uncontrolled_test_profiles: usize,
}

fn profiles_of(traces: &[RssTrace], idx: &[usize]) -> Result<Vec<PropagationProfile>> {
    let mut out = Vec::new();
    for &i in idx {
        for p in profiles_from_trace(&traces[i])? {
            p.validate()?;
            out.push(p);
        }
    }
    Ok(out)
}

/// Profiles of both splits, z-scored with a normalizer fit on the training
/// split only.
pub fn cmd_featurize(cfg: &ExperimentConfig) -> Result<FeaturizeSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    let manifest = cfg.manifest.clone().unwrap_or_else(|| layout.manifest());
    let traces = read_manifest(&manifest)?;
    if traces.is_empty() {
        return Err(Error::Empty("trace manifest"));
    }
    let split = split_traces(&traces, &cfg.split, cfg.sub_seed(SeedStream::Split));
    let train = profiles_of(&traces, &split.train)?;
    let test = profiles_of(&traces, &split.test)?;
    let norm = Normalizer::fit(&train)?;
    create_dir(&layout.features())?;
    write_jsonl(&layout.train_profiles(), &norm.apply_all(&train)?)?;
    write_jsonl(&layout.test_profiles(), &norm.apply_all(&test)?)?;
    write_json(&layout.normalizer(), &norm)?;
    write_json(&layout.split(), &split)?;
    Ok(FeaturizeSummary {
        train_traces: split.train.len(),
        test_traces: split.test.len(),
        train_profiles: train.len(),
        test_profiles: test.len(),
        uncontrolled_test_profiles: test.iter().filter(|p| !p.motion().is_controlled()).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub baseline: bool,
    pub samples: usize,
    pub iterations: usize,
    pub last: LossRecord,
    /// Mean over the final fifth of the iterations.
    pub tail: LossRecord,
}

/// Trains on the training split; `baseline` zeroes alpha and beta and writes
/// under `baseline/` instead of `model/`.
pub fn cmd_train(cfg: &ExperimentConfig, baseline: bool, progress: impl FnMut(&LossRecord)) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    let data: Vec<PropagationProfile> = read_jsonl(&layout.train_profiles())?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.sub_seed(SeedStream::Train);
    if baseline {
        tc = tc.baseline();
    }
    let out = train(&cfg.architecture, &data, &tc, progress)?;
    create_dir(&layout.model(baseline))?;
    out.model.save(&layout.checkpoint(baseline))?;
    write_history(&layout.history(baseline), &out.history)?;
    let last = *out.history.last().ok_or(Error::Empty("training history"))?;
    let tail = tail_mean(&out.history, (out.history.len() / 5).max(1)).ok_or(Error::Empty("training history"))?;
    Ok(TrainSummary { baseline, samples: data.len(), iterations: out.history.len(), last, tail })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub baseline: bool,
    pub metrics: MetricsReport,
}

/// Scores the test split; writes `metrics.json`, `roc.csv`, and SVG charts
/// of the ROC curve, per-group accuracy and the loss history.
pub fn cmd_evaluate(cfg: &ExperimentConfig, baseline: bool) -> Result<EvaluateSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    let model = ModelParams::load(&layout.checkpoint(baseline))?;
    let test: Vec<PropagationProfile> = read_jsonl(&layout.test_profiles())?;
    if test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let records = predict_records(&model, &test)?;
    let report = metrics(&records, THRESHOLD)?;
    let curve = roc(&records)?;
    let dir = layout.eval(baseline);
    create_dir(&dir)?;
    write_json(&dir.join("metrics.json"), &report)?;
    write_roc_csv(&dir.join("roc.csv"), &curve)?;
    let name = if baseline { "baseline" } else { "adversarial" };
    let label = format!("{name} (AUROC {:.3})", auroc(&curve));
    write_file(&dir.join("roc.svg"), roc_chart(&[(label, curve)]).as_bytes())?;
    let bars = |m: &BTreeMap<String, crate::eval::Rates>| m.iter().map(|(k, r)| (k.clone(), r.accuracy)).collect::<Vec<_>>();
    write_file(&dir.join("accuracy_by_motion.svg"), bar_chart("Accuracy by motion", "accuracy", &bars(&report.by_motion)).as_bytes())?;
    write_file(
        &dir.join("accuracy_by_environment.svg"),
        bar_chart("Accuracy by environment", "accuracy", &bars(&report.by_environment)).as_bytes(),
    )?;
    if layout.history(baseline).exists() {
        let history = read_history(&layout.history(baseline))?;
        let other = layout.history(true);
        let overlay = if !baseline && other.exists() { Some(read_history(&other)?) } else { None };
        write_file(&dir.join("losses.svg"), loss_chart(&history, overlay.as_deref()).as_bytes())?;
    }
    Ok(EvaluateSummary { baseline, metrics: report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub verifier: String,
    pub transitions: usize,
    pub final_phase: Phase,
    pub accepts: usize,
    pub denials: usize,
    pub drops: usize,
    pub table: BTreeMap<String, bool>,
}

/// Plays the configured script; writes `script.json`, `transcript.jsonl`
/// and `summary.json`.
pub fn cmd_protocol(cfg: &ExperimentConfig) -> Result<ProtocolSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    let p = &cfg.protocol;
    let script = match &p.script_file {
        Some(path) => read_script(path)?,
        None => match p.script {
            ScriptChoice::Handshake => handshake_script(&p.device),
            ScriptChoice::Spoofing => spoofing_script(&p.device, &p.attacker),
            ScriptChoice::Deadlock => deadlock_script(&p.device, &p.attacker),
        },
    };
    let verifier: Box<dyn Verifier> = match p.verifier {
        VerifierChoice::Oracle => Box::new(OracleVerifier),
        VerifierChoice::Threshold => Box::new(ThresholdVerifier::default()),
        VerifierChoice::Learned => {
            let model = ModelParams::load(&layout.checkpoint(false))?;
            let norm: Normalizer = read_json(&layout.normalizer())?;
            Box::new(LearnedVerifier::new(model, norm))
        }
    };
    let transcript = run_scenario(&script, verifier.as_ref(), &p.scenario, cfg.sub_seed(SeedStream::Protocol))?;
    let dir = layout.protocol();
    create_dir(&dir)?;
    write_script(&dir.join("script.json"), &script)?;
    write_transcript(&dir.join("transcript.jsonl"), &transcript)?;
    let count = |k: MessageKind| transcript.iter().flat_map(|t| &t.emitted).filter(|m| m.kind == k).count();
    let summary = ProtocolSummary {
        verifier: verifier.name().into(),
        transitions: transcript.len(),
        final_phase: transcript.last().map_or(Phase::Idle, |t| t.after),
        accepts: count(MessageKind::AssocAccept),
        denials: count(MessageKind::AssocDeny),
        drops: count(MessageKind::DropNotice),
        table: transcript.last().map(|t| t.table.clone()).unwrap_or_default(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    #[serde(flatten)]
    pub check: NamedCheck,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTheoryReport {
    pub joint: String,
    pub checks: Vec<CheckLine>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientOracleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    pub joints: Vec<JointTheoryReport>,
    pub all_pass: bool,
}

/// Exact equilibrium checks on the built-in joints plus an optional joint
/// file; writes `theory/report.json`.
pub fn cmd_theory_check(cfg: &ExperimentConfig) -> Result<TheoryReport> {
    cfg.validate()?;
    let mut joints = builtin_joints();
    if let Some(path) = &cfg.theory.joint {
        let q: TabularJoint = read_json(path)?;
        q.validate()?;
        joints.push(q);
    }
    let mut gcfg = cfg.theory.gradient_config.clone();
    gcfg.train.seed = cfg.sub_seed(SeedStream::Theory);
    let mut reports = Vec::new();
    for q in &joints {
        let r = tabular_equilibrium_check(q)?;
        let checks: Vec<CheckLine> = r
            .checks()
            .into_iter()
            .map(|c| CheckLine { pass: c.passes(EQUILIBRIUM_TOL), check: c })
            .collect();
        let gradient = if cfg.theory.gradient { Some(gradient_training_vs_oracle(q, &gcfg)?.0) } else { None };
        reports.push(JointTheoryReport {
            joint: q.name.clone(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            gradient_pass: gradient.as_ref().map(|g| g.passes(GRADIENT_TOL)),
            gradient,
        });
    }
    let all_pass = reports.iter().all(|r| r.pass && r.gradient_pass != Some(false));
    let report = TheoryReport { tolerance: EQUILIBRIUM_TOL, gradient_tolerance: GRADIENT_TOL, joints: reports, all_pass };
    let dir = cfg.layout().theory();
    create_dir(&dir)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BodyLabel, DatasetSpec, EnvironmentClass, MotionClass};

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(3);
        c.out_dir = dir.to_path_buf();
        c.dataset = DatasetSpec { duration_s: 10.0, ..DatasetSpec::balanced(2, &[MotionClass::Walking, MotionClass::Uncontrolled], &EnvironmentClass::ALL[..2]) };
        c.split.test_fraction = 0.5;
        c
    }

    #[test]
    fn split_is_by_trace_and_stratified() {
        let spec = DatasetSpec { duration_s: 5.0, ..DatasetSpec::balanced(5, &[MotionClass::Sitting, MotionClass::Uncontrolled], &EnvironmentClass::ALL) };
        let traces = gen_dataset(&spec, 0).unwrap();
        let s = split_traces(&traces, &SplitPolicy::default(), 1);
        assert_eq!(s.train.len() + s.test.len(), traces.len());
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        assert!(s.train.iter().all(|&i| traces[i].z.is_controlled()));
        // One of five per controlled cell held out; all 50 uncontrolled in test.
        assert_eq!(s.test.len(), 10 + 50);
        for y in [BodyLabel::On, BodyLabel::Off] {
            assert_eq!(s.train.iter().filter(|&&i| traces[i].y == y).count(), 20);
        }
        assert_eq!(split_traces(&traces, &SplitPolicy::default(), 1), s);
        assert_ne!(split_traces(&traces, &SplitPolicy::default(), 2), s);
    }

    #[test]
    fn simulate_and_featurize() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        let s = cmd_simulate(&c).unwrap();
        assert_eq!(s.traces, 16);
        assert_eq!(s.cells["on/walking/laboratory"], 2);
        let f = cmd_featurize(&c).unwrap();
        assert_eq!((f.train_traces, f.test_traces), (4, 12));
        assert_eq!((f.train_profiles, f.test_profiles, f.uncontrolled_test_profiles), (8, 24, 16));
        let train: Vec<PropagationProfile> = read_jsonl(&c.layout().train_profiles()).unwrap();
        // Normalized on its own statistics.
        let m0 = train.iter().map(|p| p.features[0]).sum::<f64>() / train.len() as f64;
        assert!(m0.abs() < 1e-9);
    }

    #[test]
    fn featurize_rejects_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        create_dir(&c.layout().traces()).unwrap();
        write_json(&c.layout().manifest(), &Vec::<crate::channel::ManifestEntry>::new()).unwrap();
        assert!(matches!(cmd_featurize(&c), Err(Error::Empty(_))));
    }

    #[test]
    fn simulate_into_unwritable_dir_fails() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let mut c = small_config(&blocker);
        c.out_dir = blocker.join("out");
        assert!(cmd_simulate(&c).is_err());
    }

    #[test]
    fn evaluate_without_checkpoint_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(cmd_evaluate(&small_config(dir.path()), false).is_err());
    }

    #[test]
    fn learned_protocol_without_checkpoint_fails() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.protocol.verifier = VerifierChoice::Learned;
        assert!(cmd_protocol(&c).is_err());
        c.protocol.verifier = VerifierChoice::Oracle;
        let s = cmd_protocol(&c).unwrap();
        assert_eq!((s.denials, s.accepts, s.final_phase), (1, 0, Phase::Idle));
    }

    #[test]
    fn theory_check_builtins_pass() {
        let dir = tempfile::tempdir().unwrap();
        let r = cmd_theory_check(&small_config(dir.path())).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.joints.len(), 4);
        let text = fs::read_to_string(dir.path().join("theory/report.json")).unwrap();
        assert!(text.contains("best representation is lossless"));
    }

    #[test]
    fn theory_check_rejects_malformed_joint() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        let path = dir.path().join("joint.json");
        let mut q = crate::adversarial::tabular::published_joint();
        q.q[0] += 0.5;
        write_json(&path, &q).unwrap();
        c.theory.joint = Some(path.clone());
        assert!(cmd_theory_check(&c).is_err());
        fs::write(&path, b"{\"name\": 3}").unwrap();
        assert!(cmd_theory_check(&c).is_err());
    }
}
