//! Save a model as a JSON checkpoint and load it back bit-exactly.

use onbody::adversarial::{Architecture, ModelParams};

fn main() -> onbody::Result<()> {
    let arch = Architecture { channels: 4, hidden: 8, ..Architecture::default() };
    let model = ModelParams::new(&arch, 42)?;
    let path = std::env::temp_dir().join("onbody_checkpoint.json");
    model.save(&path)?;
    let back = ModelParams::load(&path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    println!("architecture restored: {}", back.architecture() == arch);
    println!("parameters identical: {}", back == model);
    Ok(())
}
