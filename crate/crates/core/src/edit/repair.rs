//! Closed validate-and-repair loop around batch application.

use serde::Serialize;
use thiserror::Error;

use super::intent::parse_instructions;
use super::{apply_edits_with, EditInstruction};
use crate::client::{ClientError, ModelClient, ModelRequest, Task};
use crate::spec::{serialize_spec, ComponentVocabulary, SpecDocument};
use crate::validate::validate_with;

/// Corrections requested from the client after the initial attempt fails.
pub const MAX_REPAIR_ROUNDS: usize = 3;

/// What the client is shown when an attempt fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditErrorContext {
    pub error_message: String,
    pub original_instruction: EditInstruction,
    /// The pre-failure document; attempts never leak partial results.
    pub current_spec: SpecDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditOutcome {
    pub result: SpecDocument,
    /// The batch that finally succeeded; empty when every attempt failed.
    pub applied: Vec<EditInstruction>,
    pub succeeded: bool,
    /// Batches applied: the caller's plus one per readable correction.
    pub attempts: usize,
    /// Correction requests sent to the client, at most [`MAX_REPAIR_ROUNDS`].
    pub repair_calls: usize,
    pub repair_log: Vec<EditErrorContext>,
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("repair exhausted after {attempts} attempts: {}", last.error_message)]
    RepairExhausted {
        attempts: usize,
        last: Box<EditErrorContext>,
        repair_log: Vec<EditErrorContext>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RepairOptions {
    /// Return [`RepairError::RepairExhausted`] instead of an unchanged-document
    /// outcome when every attempt fails.
    pub strict: bool,
    pub vocabulary: ComponentVocabulary,
}

pub fn apply_with_repair(
    doc: &SpecDocument,
    edits: &[EditInstruction],
    client: &dyn ModelClient,
) -> Result<EditOutcome, RepairError> {
    apply_with_repair_opts(doc, edits, client, &RepairOptions::default())
}

/// Applies `edits` atomically and validates the result. On failure, the error
/// context goes to the client for a corrected batch, up to
/// [`MAX_REPAIR_ROUNDS`] times. If nothing succeeds the input document comes
/// back unchanged with the full repair log.
pub fn apply_with_repair_opts(
    doc: &SpecDocument,
    edits: &[EditInstruction],
    client: &dyn ModelClient,
    options: &RepairOptions,
) -> Result<EditOutcome, RepairError> {
    let mut pending = Some(edits.to_vec());
    let mut last_batch = Vec::new();
    let mut repair_log: Vec<EditErrorContext> = Vec::new();
    let mut attempts = 0;
    let mut repair_calls = 0;

    loop {
        if let Some(batch) = pending.take() {
            attempts += 1;
            match attempt(doc, &batch, &options.vocabulary) {
                Ok(result) => {
                    return Ok(EditOutcome {
                        result,
                        applied: batch,
                        succeeded: true,
                        attempts,
                        repair_calls,
                        repair_log,
                    })
                }
                Err(context) => repair_log.push(context),
            }
            last_batch = batch;
        }
        if repair_calls == MAX_REPAIR_ROUNDS {
            break;
        }
        repair_calls += 1;
        let context = repair_log
            .last()
            .expect("a failure precedes every repair call");
        let answer = client.complete(&ModelRequest::text(
            Task::EditRepair,
            repair_prompt(context, &last_batch),
        ))?;
        match parse_instructions(&answer) {
            Ok(corrected) => pending = Some(corrected),
            Err(e) => {
                // An unreadable correction still costs a round.
                let mut context = context.clone();
                context.error_message = format!("correction rejected: {e}");
                repair_log.push(context);
            }
        }
    }

    if options.strict {
        let last = Box::new(repair_log.last().cloned().expect("at least one failure"));
        return Err(RepairError::RepairExhausted {
            attempts,
            last,
            repair_log,
        });
    }
    Ok(EditOutcome {
        result: doc.clone(),
        applied: Vec::new(),
        succeeded: false,
        attempts,
        repair_calls,
        repair_log,
    })
}

fn attempt(
    doc: &SpecDocument,
    batch: &[EditInstruction],
    vocab: &ComponentVocabulary,
) -> Result<SpecDocument, EditErrorContext> {
    let context = |message: String, instruction: &EditInstruction| EditErrorContext {
        error_message: message,
        original_instruction: instruction.clone(),
        current_spec: doc.clone(),
    };
    let next = apply_edits_with(doc, batch, vocab)
        .map_err(|e| context(e.error.to_string(), &batch[e.index]))?;
    let report = validate_with(&next, vocab);
    if report.ok {
        return Ok(next);
    }
    let message = report
        .violations
        .iter()
        .map(|v| format!("{:?} at {}: {}", v.code, v.path, v.message))
        .collect::<Vec<_>>()
        .join("; ");
    let message = format!("edited SPEC fails validation: {message}");
    let first_path = &report.violations[0].path;
    let culprit = batch
        .iter()
        .find(|e| first_path.starts_with(&e.path) || e.path.starts_with(first_path))
        .or_else(|| batch.last());
    match culprit {
        Some(instruction) => Err(context(message, instruction)),
        // An empty batch on an invalid document: nothing to blame, report the
        // document itself through a no-op replace of the root.
        None => Err(context(
            message,
            &EditInstruction::replace(
                crate::spec::SpecPath::root(),
                serde_json::to_value(doc).expect("spec documents always serialize"),
            ),
        )),
    }
}

const REPAIR_HEADER: &str = "\
## task: edit-repair
The edit batch below could not be applied to the SPEC. The error context is
given as JSON with the fields error_message, original_instruction and
current_spec. Return a corrected batch that satisfies the original intent,
one JSON instruction per line ({\"op\":...,\"path\":...,\"value\":...}).
";

pub(crate) fn repair_prompt(context: &EditErrorContext, batch: &[EditInstruction]) -> String {
    // current_spec is embedded through the canonical serializer so the
    // prompt is byte-stable.
    let context_json = format!(
        "{{\"error_message\":{},\"original_instruction\":{},\"current_spec\":{}}}",
        serde_json::to_string(&context.error_message).expect("strings serialize"),
        serde_json::to_string(&context.original_instruction).expect("edits serialize"),
        serialize_spec(&context.current_spec),
    );
    format!(
        "{REPAIR_HEADER}\n### Error context\n{context_json}\n\n### Failed batch\n{}\n### Corrected batch\n",
        EditInstruction::to_jsonl(batch)
    )
}
