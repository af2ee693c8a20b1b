// Turns accepted samples into chat-format fine-tuning lines and scores a
// scripted classifier on them with the same prompt.
//
// `cargo run --example classification_export`

use std::error::Error;
use std::path::PathBuf;

use guardsynth::analytics::{accuracy, GoldItem, Prediction};
use guardsynth::cli::load_task;
use guardsynth::dataset::{classification_prompt, export_chat, read_jsonl, ChatExample};
use guardsynth::gateway::mock::ScriptedBackend;
use guardsynth::gateway::{CompletionRequest, Gateway, Parsed, ResponseSchema, TemplateId};
use guardsynth::pipeline::{run, RunConfig, EPOCH};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/health");
    let task = load_task(&data.join("task.json")).map_err(|e| e.message)?;
    let gw = Gateway::with_backend(ScriptedBackend::from_path(&data.join("scenario.json"))?);
    let cfg = RunConfig {
        target_size: 8,
        created_at: Some(EPOCH.into()),
        ..RunConfig::default()
    };
    let out = run(&gw, &task, &cfg, &mut |_| {})?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("chat.jsonl");
    let n = export_chat(&out.dataset, &task, &path)?;
    let chats: Vec<ChatExample> = read_jsonl(&path)?;
    println!(
        "{n} chat lines; first assistant turn {:?}",
        chats[0].messages[2].content
    );

    let classifier = Gateway::with_backend(ScriptedBackend::from_path(&data.join("classifier_perfect.json"))?);
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for r in &out.dataset {
        let prompt = classification_prompt(&task.criterion, &r.sample.input.content);
        assert_eq!(prompt.user, chats[gold.len()].messages[1].content);
        let req = CompletionRequest::new(TemplateId::Classification, ResponseSchema::SingleCharLabel)
            .labels(&task.labels)
            .with("rule", &task.criterion)
            .with("input_block", &r.sample.input.content);
        let label = match classifier.complete(&req)?.value {
            Parsed::Label(l) => Some(l),
            _ => None,
        };
        predictions.push(Prediction {
            id: r.transcript_id.clone(),
            label,
        });
        gold.push(GoldItem {
            id: r.transcript_id.clone(),
            label: r.sample.target_label.clone(),
        });
    }
    println!("accuracy {:.3}", accuracy(&predictions, &gold)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
