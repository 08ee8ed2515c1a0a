use serde_json::{json, Value};

fn error_responses(codes: &[&str]) -> Value {
    let mut out = serde_json::Map::new();
    for code in codes {
        out.insert(
            code.to_string(),
            json!({
                "description": "error",
                "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ApiError"}}}
            }),
        );
    }
    Value::Object(out)
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn ok(status: &str, description: &str, schema: Value) -> Value {
    json!({ status: { "description": description, "content": {"application/json": {"schema": schema}} } })
}

fn body(schema: &str) -> Value {
    json!({"required": true, "content": {"application/json": {"schema": {"$ref": format!("#/components/schemas/{schema}")}}}})
}

fn run_id_param() -> Value {
    json!([{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}])
}

/// OpenAPI 3.0 description of the service.
pub fn document() -> Value {
    let run_ref = json!({"$ref": "#/components/schemas/RunState"});
    let stage = json!({"type": "string", "enum": ["intent", "requirement", "scxml", "pseudocode", "code"]});
    json!({
        "openapi": "3.0.3",
        "info": {"title": "lifegen service", "version": env!("CARGO_PKG_VERSION")},
        "paths": {
            "/runs": {
                "post": {
                    "summary": "Create a run and start it in the background",
                    "requestBody": body("CreateRun"),
                    "responses": merge(ok("201", "created", json!({"$ref": "#/components/schemas/RunSummary"})), error_responses(&["400"]))
                },
                "get": {
                    "summary": "List runs, most recently updated first",
                    "parameters": [{"name": "status", "in": "query", "required": false,
                        "schema": {"type": "string", "enum": ["running", "awaiting_review", "completed", "failed"]}}],
                    "responses": merge(ok("200", "runs", json!({"type": "array", "items": {"$ref": "#/components/schemas/RunSummary"}})), error_responses(&["400"]))
                }
            },
            "/runs/{id}": {
                "get": {
                    "summary": "Full persisted run state",
                    "parameters": run_id_param(),
                    "responses": merge(ok("200", "run", run_ref.clone()), error_responses(&["404"]))
                }
            },
            "/runs/{id}/artifact": {
                "patch": {
                    "summary": "Replace the checkpoint artifact of a paused run",
                    "parameters": run_id_param(),
                    "requestBody": body("ArtifactEdit"),
                    "responses": merge(ok("200", "run", run_ref.clone()), error_responses(&["400", "404", "409"]))
                }
            },
            "/runs/{id}/approve": {
                "post": {
                    "summary": "Approve a paused run; generation continues in the background",
                    "parameters": run_id_param(),
                    "responses": merge(ok("200", "run", run_ref.clone()), error_responses(&["404", "409"]))
                }
            },
            "/runs/{id}/transcript": {
                "get": {
                    "summary": "Prompts and completions of a run in call order",
                    "parameters": run_id_param(),
                    "responses": merge(ok("200", "entries", json!({"type": "array", "items": {"type": "object"}})), error_responses(&["404"]))
                }
            },
            "/scxml/validate": {
                "post": {
                    "summary": "Validate SCXML text",
                    "requestBody": body("ScxmlText"),
                    "responses": merge(ok("200", "findings", json!({"$ref": "#/components/schemas/ScxmlReport"})), error_responses(&["400"]))
                }
            },
            "/dataset/records": {
                "get": {
                    "summary": "Dataset records with their review status",
                    "parameters": [{"name": "status", "in": "query", "required": false,
                        "schema": {"type": "string", "enum": ["pending", "accepted", "rejected"]}}],
                    "responses": merge(ok("200", "records", json!({"type": "array", "items": {"type": "object"}})), error_responses(&["400", "404"]))
                }
            },
            "/dataset/decisions": {
                "post": {
                    "summary": "Record a screening decision",
                    "requestBody": body("ReviewDecision"),
                    "responses": merge(ok("201", "stored", json!({"$ref": "#/components/schemas/ReviewDecision"})), error_responses(&["400", "404", "409"]))
                }
            },
            "/spec": {"get": {"summary": "This document", "responses": ok("200", "OpenAPI document", json!({"type": "object"}))}}
        },
        "components": {
            "securitySchemes": {"bearer": {"type": "http", "scheme": "bearer"}},
            "schemas": {
                "ApiError": {"type": "object", "required": ["code", "message"], "properties": {
                    "code": {"type": "string", "enum": ["invalid_body", "invalid_query", "unknown_backend", "invalid_mode",
                        "not_found", "not_awaiting_review", "stage_mismatch", "duplicate_decision", "unauthorized", "internal"]},
                    "message": {"type": "string"}}},
                "CreateRun": {"type": "object", "required": ["intent"], "properties": {
                    "intent": {"type": "string"},
                    "mode": {"type": "string", "enum": ["multi_step", "one_step", "gated"], "default": "multi_step"},
                    "backend": {"type": "string", "default": "echo"},
                    "gates": {"type": "array", "items": stage.clone()},
                    "target_stage": stage.clone(),
                    "record_id": {"type": "string"}}},
                "RunSummary": {"type": "object", "properties": {
                    "run_id": {"type": "string"}, "status": {"type": "string"}, "mode": {"type": "string"},
                    "backend": {"type": "string"}, "checkpoint_stage": stage.clone(),
                    "intent_excerpt": {"type": "string"}, "created_at": {"type": "string"}, "updated_at": {"type": "string"}}},
                "RunState": {"type": "object", "properties": {
                    "run_id": {"type": "string"}, "mode": {"type": "string"}, "backend": {"type": "string"},
                    "input_intent": {"type": "string"}, "artifacts": {"type": "object", "additionalProperties": {"type": "string"}},
                    "provenance": {"type": "object", "additionalProperties": {"type": "string", "enum": ["generated", "human_edited"]}},
                    "status": {"type": "string"}, "gates": {"type": "array", "items": stage.clone()},
                    "checkpoint_stage": stage.clone(), "scxml_findings": {"type": "array", "items": {"type": "object"}},
                    "backend_calls": {"type": "integer"}, "updated_at": {"type": "string"}}},
                "ArtifactEdit": {"type": "object", "required": ["stage", "text"], "properties": {
                    "stage": stage, "text": {"type": "string"}}},
                "ScxmlText": {"type": "object", "required": ["text"], "properties": {"text": {"type": "string"}}},
                "ScxmlReport": {"type": "object", "properties": {"findings": {"type": "array", "items": {"type": "object"}}}},
                "ReviewDecision": {"type": "object", "required": ["record_id", "verdict", "reviewer"], "properties": {
                    "record_id": {"type": "string"}, "verdict": {"type": "string", "enum": ["accepted", "rejected"]},
                    "reviewer": {"type": "string"}, "reason": {"type": "string"}}}
            }
        },
        "security": [{"bearer": []}]
    })
}
