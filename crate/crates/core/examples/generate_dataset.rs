// Full run on the demo task: decomposition, then generate, debate and
// refine until 20 samples are accepted. Artifacts go to a temp directory.
//
// `cargo run --example generate_dataset`

use std::error::Error;
use std::path::PathBuf;

use guardsynth::cli::load_task;
use guardsynth::dataset::{write_run, DATASET_FILE};
use guardsynth::gateway::mock::ScriptedBackend;
use guardsynth::gateway::Gateway;
use guardsynth::pipeline::{audit, run, ProgressEvent, RunConfig, EPOCH};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/health");
    let task = load_task(&data.join("task.json")).map_err(|e| e.message)?;
    let gw = Gateway::with_backend(ScriptedBackend::from_path(&data.join("scenario.json"))?);
    let cfg = RunConfig {
        target_size: 20,
        created_at: Some(EPOCH.into()),
        ..RunConfig::default()
    };

    let mut rejected = 0;
    let out = run(&gw, &task, &cfg, &mut |e| {
        if let ProgressEvent::Episode { status, .. } = e {
            rejected += usize::from(status != "accepted");
        }
    })?;
    let c = out.manifest.counters;
    println!(
        "run {}: {} accepted, {} discarded, {} refinements, {} completions",
        out.manifest.run_id, c.accepted, c.rejected_discarded, c.refinements_total, c.completions_total
    );
    for (template, n) in &out.manifest.completions_by_template {
        println!("    {template:<24}{n}");
    }
    assert!(audit(&out));
    assert!(out.manifest.counters_balance());

    let dir = tempfile::tempdir()?;
    write_run(&out, &task.labels, dir.path())?;
    let first = std::fs::read_to_string(dir.path().join(DATASET_FILE))?;
    println!("first line: {}", first.lines().next().unwrap_or_default());
    println!("{rejected} episodes ended without a sample");
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
