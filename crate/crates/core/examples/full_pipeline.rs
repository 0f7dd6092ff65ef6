//! simulate -> featurize -> train (adversarial and baseline) -> evaluate ->
//! protocol -> theory-check on a small config, the same calls the `onbody`
//! binary makes.
//!
//! cargo run --release --example full_pipeline [out_dir]

use onbody::adversarial::{Architecture, TrainConfig};
use onbody::channel::{DatasetSpec, EnvironmentClass, MotionClass};
use onbody::cli::{
    cmd_evaluate, cmd_featurize, cmd_protocol, cmd_simulate, cmd_theory_check, cmd_train, ExperimentConfig, VerifierChoice,
};

fn main() -> onbody::Result<()> {
    let mut cfg = ExperimentConfig::new(2024);
    cfg.out_dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("onbody_pipeline"), Into::into);
    let mut spec = DatasetSpec::balanced(5, &MotionClass::CONTROLLED, &EnvironmentClass::ALL);
    spec.cells.extend(DatasetSpec::balanced(1, &[MotionClass::Uncontrolled], &EnvironmentClass::ALL).cells);
    spec.duration_s = 20.0;
    cfg.dataset = spec;
    cfg.architecture = Architecture { channels: 8, hidden: 16, ..Architecture::default() };
    cfg.train = TrainConfig { batch: 32, outer_iters: 200, ..TrainConfig::default() };
    cfg.protocol.verifier = VerifierChoice::Learned;

    let s = cmd_simulate(&cfg)?;
    println!("simulate: {} traces", s.traces);
    let f = cmd_featurize(&cfg)?;
    println!("featurize: {} train / {} test profiles ({} uncontrolled)", f.train_profiles, f.test_profiles, f.uncontrolled_test_profiles);
    for baseline in [true, false] {
        let t = cmd_train(&cfg, baseline, |_| {})?;
        let e = cmd_evaluate(&cfg, baseline)?;
        println!(
            "{}: tail L_D {:.3} L_C {:.3}; accuracy {:.3}, AUROC {:.3}",
            if baseline { "baseline" } else { "adversarial" },
            t.tail.l_d,
            t.tail.l_c,
            e.metrics.overall.accuracy,
            e.metrics.auroc.unwrap_or(f64::NAN)
        );
    }
    let p = cmd_protocol(&cfg)?;
    println!("protocol ({}): final {:?}, denials {}", p.verifier, p.final_phase, p.denials);
    let th = cmd_theory_check(&cfg)?;
    println!("theory-check: {} joints, all pass {}", th.joints.len(), th.all_pass);
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}
