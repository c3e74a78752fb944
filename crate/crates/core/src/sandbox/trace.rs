use std::sync::OnceLock;

use regex::Regex;

fn frame_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"File "([^"]*)", line (\d+)"#).expect("static regex"))
}

/// Extracts the last traceback from interpreter stderr and, when one of its
/// frames lies in the script itself, the line of the innermost such frame.
///
/// Returns `None` when stderr holds no traceback. The span is absent when no
/// frame points into the script; it is never guessed.
pub fn parse_traceback(stderr: &str, script_name: &str) -> Option<(String, Option<(u32, u32)>)> {
    let start = match stderr.rfind("Traceback (most recent call last):") {
        Some(i) => i,
        // Compile errors print a bare frame without the traceback header.
        None if ["SyntaxError", "IndentationError", "TabError"]
            .iter()
            .any(|e| stderr.contains(&format!("{e}:"))) =>
        {
            frame_pattern().find(stderr)?.start()
        }
        None => return None,
    };
    let trace = stderr[start..].trim_end().to_string();
    let span = frame_pattern()
        .captures_iter(&trace)
        .filter(|c| {
            let file = &c[1];
            file == script_name || file.ends_with(&format!("/{script_name}"))
        })
        .last()
        .and_then(|c| c[2].parse::<u32>().ok())
        .map(|line| (line, line));
    Some((trace, span))
}
