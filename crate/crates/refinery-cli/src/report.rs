//! Trace file parsing, stream validation, and the per-round narrative
//! renderer behind the `report` subcommand.

use refinery::engine::TraceEvent;
use serde::Serialize;

/// What validation established about a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub run_id: String,
    pub events: usize,
    pub rounds: u32,
    pub accepts: usize,
    pub rejects: usize,
    pub skips: usize,
    pub finished: bool,
}

/// Parse a JSONL trace file body. Blank lines are tolerated; anything else
/// that fails to deserialize is an error naming the offending line.
pub fn parse_trace(body: &str) -> Result<Vec<TraceEvent>, String> {
    let mut events = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent = serde_json::from_str(line)
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        events.push(event);
    }
    Ok(events)
}

/// Check the stream invariants every well-formed trace satisfies:
///
/// - at least one event, opening with `plan`;
/// - one run id throughout;
/// - strictly increasing `seq`, nondecreasing `round`;
/// - absorbing outcomes — once a constraint passes a check or is skipped,
///   no later event may reference it;
/// - digest chain — only `accept` events change `best_digest`, and each
///   accept must actually change it (rejected attempts preserve the best).
pub fn validate_trace(events: &[TraceEvent]) -> Result<TraceSummary, String> {
    let first = events.first().ok_or("trace contains no events")?;
    if first.event.name() != "plan" {
        return Err(format!("first event is {}, expected plan", first.event.name()));
    }

    let mut summary = TraceSummary {
        run_id: first.run_id.clone(),
        events: events.len(),
        rounds: 0,
        accepts: 0,
        rejects: 0,
        skips: 0,
        finished: false,
    };
    let mut last_seq: Option<u64> = None;
    let mut last_round = 0u32;
    let mut current_digest = first.best_digest.clone();
    let mut settled: Vec<u32> = Vec::new();

    for e in events {
        if e.run_id != summary.run_id {
            return Err(format!(
                "run id changes at seq {} ({} vs {})",
                e.seq, e.run_id, summary.run_id
            ));
        }
        if let Some(prev) = last_seq {
            if e.seq <= prev {
                return Err(format!("seq {} follows seq {prev}: not strictly increasing", e.seq));
            }
        }
        last_seq = Some(e.seq);
        if e.round < last_round {
            return Err(format!("round {} follows round {last_round} at seq {}", e.round, e.seq));
        }
        last_round = e.round;

        if let Some(id) = e.constraint_id {
            if settled.contains(&id) {
                return Err(format!(
                    "constraint {id} appears at seq {} after passing or being skipped",
                    e.seq
                ));
            }
        }

        match e.event.name() {
            "accept" => {
                if e.best_digest == current_digest {
                    return Err(format!("accept at seq {} does not change the best digest", e.seq));
                }
                current_digest = e.best_digest.clone();
                summary.accepts += 1;
            }
            other => {
                if e.best_digest != current_digest {
                    return Err(format!(
                        "{other} event at seq {} changes the best digest without an accept",
                        e.seq
                    ));
                }
                match other {
                    "check_pass" | "skip" => {
                        if let Some(id) = e.constraint_id {
                            settled.push(id);
                        }
                        if other == "skip" {
                            summary.skips += 1;
                        }
                    }
                    "reject" => summary.rejects += 1,
                    "finish" => summary.finished = true,
                    _ => {}
                }
            }
        }
        summary.rounds = summary.rounds.max(e.round);
    }
    Ok(summary)
}

/// One narrative line per event, ordered as emitted.
pub fn render_narrative(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&narrate(e));
        out.push('\n');
    }
    out
}

fn narrate(e: &TraceEvent) -> String {
    let p = &e.payload;
    let head = match e.constraint_id {
        Some(id) => format!("round {}  item {:>2}", e.round, id),
        None => format!("round {}  --------", e.round),
    };
    let body = match e.event.name() {
        "plan" => format!(
            "plan: {} constraint(s) via {}",
            p["items"],
            p["planner"].as_str().unwrap_or("?")
        ),
        "check_pass" => "check: pass".to_string(),
        "check_fail" => format!("check: FAIL — {}", p["reason"].as_str().unwrap_or("?")),
        "edit_attempt" => format!(
            "edit attempt {}: {:?} ({} op(s))",
            p["attempt"],
            p["instruction"].as_str().unwrap_or("?"),
            p["ops"]
        ),
        "verdict" => format!(
            "verdict on attempt {}: {}",
            p["attempt"],
            p["verdict"].as_str().unwrap_or("?")
        ),
        "accept" => match p.get("score").and_then(|s| s.as_f64()) {
            Some(score) => format!("accepted — alignment now {score:.3}"),
            None => "accepted".to_string(),
        },
        "reject" => match p.get("edit_rejected").and_then(|d| d.as_str()) {
            Some(detail) => format!("rejected — editor refused: {detail}"),
            None => format!(
                "rejected — verdict {}",
                p["verdict"].as_str().unwrap_or("?")
            ),
        },
        "skip" => format!("SKIPPED after {} attempt(s)", p["attempts"]),
        "finish" => format!(
            "finish: {} — {} round(s), {} editor call(s)",
            p["outcome"].as_str().unwrap_or("?"),
            p["rounds"],
            p["editor_calls"]
        ),
        other => other.to_string(),
    };
    format!("{head}  {body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn event(
        seq: u64,
        round: u32,
        cid: Option<u32>,
        kind: &str,
        payload: serde_json::Value,
        digest: &str,
    ) -> TraceEvent {
        serde_json::from_value(json!({
            "run_id": "abc123abc123",
            "seq": seq,
            "round": round,
            "constraint_id": cid,
            "event": kind,
            "payload": payload,
            "best_digest": digest,
        }))
        .unwrap()
    }

    fn healthy() -> Vec<TraceEvent> {
        vec![
            event(0, 0, None, "plan", json!({"planner": "rule", "items": 2}), "d0"),
            event(1, 1, Some(1), "check_pass", json!({"question": "q"}), "d0"),
            event(2, 1, Some(2), "check_fail", json!({"reason": "r"}), "d0"),
            event(3, 1, Some(2), "edit_attempt", json!({"attempt": 1, "instruction": "i", "ops": 1}), "d0"),
            event(4, 1, Some(2), "verdict", json!({"attempt": 1, "verdict": "better"}), "d0"),
            event(5, 1, Some(2), "accept", json!({"attempt": 1, "score": 1.0}), "d1"),
            event(6, 2, Some(2), "check_pass", json!({"question": "q"}), "d1"),
            event(7, 2, None, "finish", json!({"outcome": "complete", "rounds": 2, "editor_calls": 1, "statuses": {}}), "d1"),
        ]
    }

    #[test]
    fn healthy_trace_validates_and_summarizes() {
        let s = validate_trace(&healthy()).unwrap();
        assert_eq!(s.run_id, "abc123abc123");
        assert_eq!(s.events, 8);
        assert_eq!(s.rounds, 2);
        assert_eq!(s.accepts, 1);
        assert_eq!(s.rejects, 0);
        assert!(s.finished);
    }

    #[test]
    fn empty_and_out_of_order_streams_are_rejected() {
        assert!(validate_trace(&[]).unwrap_err().contains("no events"));

        let mut bad = healthy();
        bad[3].seq = 2;
        assert!(validate_trace(&bad).unwrap_err().contains("strictly increasing"));
    }

    #[test]
    fn events_after_a_settled_constraint_are_rejected() {
        let mut bad = healthy();
        bad.push(event(8, 2, Some(1), "check_fail", json!({"reason": "again"}), "d1"));
        let err = validate_trace(&bad).unwrap_err();
        assert!(err.contains("constraint 1"), "{err}");
    }

    #[test]
    fn silent_digest_changes_are_rejected() {
        let mut bad = healthy();
        bad[4].best_digest = "tampered".to_string();
        let err = validate_trace(&bad).unwrap_err();
        assert!(err.contains("without an accept"), "{err}");

        let mut bad = healthy();
        bad[5].best_digest = "d0".to_string(); // accept must move the digest
        assert!(validate_trace(&bad).unwrap_err().contains("does not change"));
    }

    #[test]
    fn parse_round_trips_serialized_events() {
        let body = healthy()
            .iter()
            .map(|e| serde_json::to_string(e).unwrap())
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse_trace(&body).unwrap();
        assert_eq!(parsed.len(), 8);
        assert!(parse_trace("not json\n").is_err());
        assert!(parse_trace("").unwrap().is_empty());
    }

    #[test]
    fn narrative_mentions_each_outcome_once() {
        let text = render_narrative(&healthy());
        assert_eq!(text.lines().count(), 8);
        assert!(text.contains("check: FAIL — r"));
        assert!(text.contains("accepted — alignment now 1.000"));
        assert!(text.contains("finish: complete — 2 round(s), 1 editor call(s)"));
    }
}
