//! Exact equilibrium checks on small discrete joints, optionally with
//! gradient-trained tiny models (pass `--train`, about 15 s per joint).

use onbody::adversarial::tabular::{builtin_joints, gradient_training_vs_oracle, tabular_equilibrium_check, TabularTrainConfig};

fn main() -> onbody::Result<()> {
    let train = std::env::args().any(|a| a == "--train");
    for q in builtin_joints() {
        let r = tabular_equilibrium_check(&q)?;
        println!("{}: H(y) {:.4}  H(y|x) {:.4}  max error {:.1e}", q.name, r.h_y, r.h_y_given_x, r.max_error());
        for c in r.checks() {
            println!("    {:<62} {:>9.6} vs {:>9.6}", c.name, c.value, c.target);
        }
        if train {
            let (g, _) = gradient_training_vs_oracle(&q, &TabularTrainConfig::default())?;
            println!(
                "    trained: L_P {:.4}/{:.4}  L_D {:.4}/{:.4}  L_C {:.4}/{:.4}  refit L_D {:.4} L_C {:.4}",
                g.l_p, g.target_p, g.l_d, g.target_d, g.l_c, g.target_c, g.refit_l_d, g.refit_l_c
            );
        }
    }
    Ok(())
}
