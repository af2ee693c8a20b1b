// Extracts dimensions from the demo task's seeds and elicits weighted
// instantiations for each, against the scripted demo backend.
//
// `cargo run --example decompose`

use std::error::Error;
use std::path::PathBuf;

use guardsynth::cli::load_task;
use guardsynth::dimension::{decompose_and_instantiate, DecomposeConfig};
use guardsynth::gateway::mock::ScriptedBackend;
use guardsynth::gateway::Gateway;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/health");
    let task = load_task(&data.join("task.json")).map_err(|e| e.message)?;
    let gw = Gateway::with_backend(ScriptedBackend::from_path(&data.join("scenario.json"))?);

    let d = decompose_and_instantiate(&gw, &task, "demo", &DecomposeConfig::default())?;
    println!(
        "{} candidates from seeds {:?} -> {} dimensions",
        d.candidates_extracted,
        d.seed_indices,
        d.dimensions.len()
    );
    for dim in &d.dimensions {
        println!("{}  {}", dim.id, dim.description);
        for v in d.instantiations_for(&dim.id) {
            let labels: Vec<_> = v.label_relevance.iter().map(|l| l.as_str()).collect();
            println!(
                "    {:<5} p={:.2} {:?} {}",
                v.id.rsplit('-').next().unwrap_or(""),
                v.weight,
                labels,
                v.text
            );
        }
    }
    println!("{} provider calls", gw.completions_used());
    assert!(d.is_consistent());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
