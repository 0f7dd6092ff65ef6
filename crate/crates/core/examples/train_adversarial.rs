//! Train the four-player model and its alpha = beta = 0 baseline on a small
//! synthetic set, then compare adversary losses and test accuracy.
//!
//! cargo run --release --example train_adversarial [iters]

use onbody::adversarial::{tail_mean, train, Architecture, ModelParams, TrainConfig};
use onbody::channel::{gen_dataset, DatasetSpec, EnvironmentClass, MotionClass};
use onbody::cli::split_traces;
use onbody::eval::{metrics, predict_records};
use onbody::profile::{profiles_from_trace, Normalizer, PropagationProfile};

fn main() -> onbody::Result<()> {
    let iters = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let mut spec = DatasetSpec::balanced(3, &MotionClass::CONTROLLED, &EnvironmentClass::ALL);
    spec.cells.extend(DatasetSpec::balanced(2, &[MotionClass::Uncontrolled], &EnvironmentClass::ALL).cells);
    spec.duration_s = 30.0;
    let traces = gen_dataset(&spec, 7)?;
    let split = split_traces(&traces, &Default::default(), 8);
    let feats = |idx: &[usize]| -> onbody::Result<Vec<PropagationProfile>> {
        let mut out = Vec::new();
        for &i in idx {
            out.extend(profiles_from_trace(&traces[i])?);
        }
        Ok(out)
    };
    let (train_raw, test_raw) = (feats(&split.train)?, feats(&split.test)?);
    let norm = Normalizer::fit(&train_raw)?;
    let (train_set, test_set) = (norm.apply_all(&train_raw)?, norm.apply_all(&test_raw)?);
    println!("{} training and {} test profiles", train_set.len(), test_set.len());

    let arch = Architecture { channels: 8, hidden: 16, ..Architecture::default() };
    let cfg = TrainConfig { batch: 32, outer_iters: iters, seed: 1, ..TrainConfig::default() };
    for (name, c) in [("adversarial", cfg.clone()), ("baseline", cfg.baseline())] {
        let out = train(&arch, &train_set, &c, |r| {
            if (r.iter + 1) % (iters / 5).max(1) == 0 {
                println!("  {name:<11} iter {:>5}  L_P {:.3}  L_D {:.3}  L_C {:.3}", r.iter + 1, r.l_p, r.l_d, r.l_c);
            }
        })?;
        let tail = tail_mean(&out.history, iters / 5).expect("non-empty history");
        let m = metrics(&predict_records(&out.model, &test_set)?, 0.5)?;
        println!(
            "{name}: tail L_D {:.3}, L_C {:.3}; accuracy {:.3} (uncontrolled {:.3}), {} parameters",
            tail.l_d,
            tail.l_c,
            m.overall.accuracy,
            m.uncontrolled.map_or(f64::NAN, |r| r.accuracy),
            param_count(&out.model)
        );
    }
    Ok(())
}

fn param_count(m: &ModelParams) -> usize {
    use onbody::nnet::ParamSet;
    m.param_count()
}
