// Scripted debates that end on each of the five paths, and the histogram
// the report command prints for them.
//
// `cargo run --example debate_paths`

use std::error::Error;

use guardsynth::analytics::path_histogram;
use guardsynth::debate::{run_debate, DebateConfig};
use guardsynth::gateway::mock::{MockRule, ScriptedBackend};
use guardsynth::gateway::{Gateway, TemplateId};
use guardsynth::task::{CandidateSample, InputBlock, InputKind, Label, LabelSet, TaskSpec};
use serde_json::json;

fn judges(rows: &[[&str; 2]]) -> Gateway {
    let cfg = DebateConfig::default();
    let mut rules = Vec::new();
    for (t, row) in rows.iter().enumerate() {
        for (i, word) in row.iter().enumerate() {
            let persona = cfg.judge_personas[i].persona.clone();
            let rule = match t {
                0 => MockRule::new(TemplateId::JudgeRound1),
                _ => MockRule::new(TemplateId::JudgeRoundN),
            };
            rules.push(rule.when("persona", persona).respond(json!({
                "label": word, "confidence": 0.8, "reasoning": format!("round {} says {word}", t + 1)
            })));
        }
    }
    Gateway::with_backend(ScriptedBackend::new(rules))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = TaskSpec::new(
        "If a user repeats or rephrases the same message 3 times, respond with a specific redirect message.",
        LabelSet::binary(),
        vec![InputBlock::new("User: hi\nAgent: hello", InputKind::Dialogue)],
    );
    let scripts: [(&str, Vec<[&str; 2]>); 5] = [
        ("1", vec![["True", "True"]]),
        ("1", vec![["False", "False"], ["False", "False"]]),
        ("1", vec![["True", "False"], ["True", "True"]]),
        ("1", vec![["False", "False"], ["True", "False"]]),
        ("0", vec![["False", "True"], ["True", "False"]]),
    ];
    let mut transcripts = Vec::new();
    for (i, (target, rows)) in scripts.iter().enumerate() {
        let sample = CandidateSample {
            input: InputBlock::new(
                "User: Can I add legs?\nAgent: Yes.\nUser: Can I remove legs?\nAgent: Yes.",
                InputKind::Dialogue,
            ),
            target_label: Label::from(*target),
            reasoning: "The user asks for opposite things.".into(),
            dimension_id: "d0".into(),
            instantiation_id: "d0-v0".into(),
            refinement_round: 0,
        };
        let t = run_debate(
            &judges(rows),
            &sample,
            &task,
            &DebateConfig::default(),
            format!("demo-{i}"),
        )?;
        println!("target {target}  chi {:?}  {:?}  {}", t.chi, t.outcome, t.path.as_str());
        transcripts.push(t);
    }
    let hist = path_histogram(&transcripts);
    println!("\n{}", hist.to_table());
    assert!(hist.is_partition());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
