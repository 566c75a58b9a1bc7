//! Writes the synthetic fixture corpora under a root directory:
//! `cargo run -p d3 --example gen_fixtures -- fixtures`.

use std::path::PathBuf;

use d3::synth::{generate, planted, SynthConfig};

fn main() -> std::io::Result<()> {
    let root = std::env::args().nth(1).map_or_else(|| PathBuf::from("fixtures"), PathBuf::from);
    let mini = generate(&SynthConfig::default());
    mini.write_to(&root.join("mini"))?;
    for (t, n) in &mini.type_counts {
        println!("{t:?}\t{n}");
    }
    planted(5, 200, 20, 1).write_to(&root.join("planted"))?;
    Ok(())
}
