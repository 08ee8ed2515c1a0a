use crate::artifact::Stage;

/// Text used for validation and metrics. Chat backends often wrap code in
/// markdown fences; for the SCXML, pseudocode and code stages the body of the
/// first fenced block is taken when one exists. Other text passes through.
pub fn extract_artifact(stage: Stage, raw: &str) -> String {
    match stage {
        Stage::Scxml | Stage::Pseudocode | Stage::Code => first_fenced_block(raw).unwrap_or_else(|| raw.to_string()),
        _ => raw.to_string(),
    }
}

fn first_fenced_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    lines.by_ref().position(|l| l.trim_start().starts_with("```"))?;
    let mut body = Vec::new();
    for line in lines {
        if line.trim_start().starts_with("```") {
            return Some(body.join("\n"));
        }
        body.push(line);
    }
    // Unterminated fence: everything after the opener.
    Some(body.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_first_fence() {
        let raw = "Here you go:\n```python\nx = 1\nprint(x)\n```\nand more\n```\ny\n```";
        assert_eq!(extract_artifact(Stage::Code, raw), "x = 1\nprint(x)");
    }

    #[test]
    fn unfenced_and_text_stages_pass_through() {
        assert_eq!(extract_artifact(Stage::Code, "x = 1\n"), "x = 1\n");
        let fenced = "```\nR\n```";
        assert_eq!(extract_artifact(Stage::Requirement, fenced), fenced);
    }

    #[test]
    fn unterminated_fence() {
        assert_eq!(extract_artifact(Stage::Scxml, "```xml\n<scxml/>"), "<scxml/>");
    }
}
