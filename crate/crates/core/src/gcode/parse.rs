//! Line parser for the supported G-code subset.

use super::{ExtrusionMode, GProgram, GcodeError, Instruction, Move};
use crate::kinematics::FeedFlavor;

/// Codes that do not change geometry, timing or material and are kept as
/// comments holding the original text.
const PASSTHROUGH: [&str; 8] = ["G90", "M84", "M105", "M106", "M107", "M117", "M140", "M190"];

struct Word {
    letter: char,
    value: f64,
    text: String,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> GcodeError {
    GcodeError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn words(code: &str, line: usize) -> Result<Vec<Word>, GcodeError> {
    let chars: Vec<(usize, char)> = code.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, ch) = chars[k];
        if ch.is_whitespace() {
            k += 1;
            continue;
        }
        let column = pos + 1;
        if !ch.is_ascii_alphabetic() {
            return Err(syntax(line, column, format!("expected a word letter, found '{ch}'")));
        }
        k += 1;
        let start = k;
        while k < chars.len() && matches!(chars[k].1, '0'..='9' | '.' | '-' | '+') {
            k += 1;
        }
        let text: String = chars[start..k].iter().map(|c| c.1).collect();
        let value: f64 = text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| syntax(line, column, format!("malformed number in word '{ch}{text}'")))?;
        out.push(Word {
            letter: ch.to_ascii_uppercase(),
            value,
            text,
            column,
        });
    }
    Ok(out)
}

fn integer(w: &Word, line: usize) -> Result<usize, GcodeError> {
    if w.value >= 0.0 && w.value.fract() == 0.0 && w.value < 1e6 {
        Ok(w.value as usize)
    } else {
        Err(syntax(line, w.column, format!("'{}' needs a non-negative integer", w.letter)))
    }
}

fn parse_move(rapid: bool, args: &[Word], line: usize) -> Result<Move, GcodeError> {
    let mut m = Move {
        rapid,
        ..Move::default()
    };
    for w in args {
        let slot = match w.letter {
            'X' => &mut m.x,
            'Y' => &mut m.y,
            'Z' => &mut m.z,
            'B' => &mut m.b,
            'C' => &mut m.c,
            'E' => &mut m.e,
            'F' => &mut m.f,
            other => return Err(syntax(line, w.column, format!("unexpected word '{other}' in a move"))),
        };
        if slot.replace(w.value).is_some() {
            return Err(syntax(line, w.column, format!("repeated word '{}'", w.letter)));
        }
    }
    if m.f.is_some_and(|f| f <= 0.0) {
        return Err(syntax(line, 1, "feed must be positive"));
    }
    Ok(m)
}

fn parse_temp(wait: bool, args: &[Word], line: usize) -> Result<Instruction, GcodeError> {
    let (mut tool, mut celsius) = (None, None);
    for w in args {
        match w.letter {
            'T' => tool = Some(integer(w, line)?),
            'S' => celsius = Some(w.value),
            other => return Err(syntax(line, w.column, format!("unexpected word '{other}' in a temperature command"))),
        }
    }
    let celsius = celsius.ok_or_else(|| syntax(line, 1, "temperature command without S"))?;
    Ok(Instruction::SetTemp { tool, celsius, wait })
}

fn no_args(args: &[Word], line: usize) -> Result<(), GcodeError> {
    match args.first() {
        Some(w) => Err(syntax(line, w.column, format!("unexpected word '{}'", w.letter))),
        None => Ok(()),
    }
}

fn parse_line(code: &str, line: usize) -> Result<Instruction, GcodeError> {
    let ws = words(code, line)?;
    let (head, args) = ws.split_first().expect("caller passes non-empty code");
    let name = format!("{}{}", head.letter, head.text);
    if head.letter == 'T' {
        no_args(args, line)?;
        return Ok(Instruction::ToolChange(integer(head, line)?));
    }
    let unsupported = || GcodeError::UnsupportedCode {
        line,
        code: name.clone(),
    };
    if !matches!(head.letter, 'G' | 'M') {
        return Err(syntax(line, head.column, format!("line starts with '{}'", head.letter)));
    }
    let n = integer(head, line).map_err(|_| unsupported())?;
    let canonical = format!("{}{n}", head.letter);
    if PASSTHROUGH.contains(&canonical.as_str()) {
        return Ok(Instruction::Comment(code.trim().to_string()));
    }
    match (head.letter, n) {
        ('G', 0) => Ok(Instruction::Move(parse_move(true, args, line)?)),
        ('G', 1) => Ok(Instruction::Move(parse_move(false, args, line)?)),
        ('G', 21) => no_args(args, line).map(|_| Instruction::UnitsMm),
        ('G', 28) => no_args(args, line).map(|_| Instruction::Home),
        ('G', 93) => no_args(args, line).map(|_| Instruction::FeedMode(FeedFlavor::InverseTime)),
        ('G', 94) => no_args(args, line).map(|_| Instruction::FeedMode(FeedFlavor::DesktopMmMin)),
        ('M', 82) => no_args(args, line).map(|_| Instruction::ExtrusionMode(ExtrusionMode::Absolute)),
        ('M', 83) => no_args(args, line).map(|_| Instruction::ExtrusionMode(ExtrusionMode::Relative)),
        ('M', 104) => parse_temp(false, args, line),
        ('M', 109) => parse_temp(true, args, line),
        _ => Err(unsupported()),
    }
}

/// Parses program text. Blank lines are skipped; a line holding only a
/// comment becomes a `Comment`, and a trailing comment after code becomes a
/// separate `Comment` after the code's instruction.
pub fn parse(text: &str) -> Result<GProgram, GcodeError> {
    let mut prog = GProgram::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (code, comment) = match raw.find(';') {
            Some(k) => (&raw[..k], Some(&raw[k + 1..])),
            None => (raw, None),
        };
        if !code.trim().is_empty() {
            prog.instructions.push(parse_line(code, line)?);
            prog.lines.push(line);
        }
        if let Some(c) = comment {
            let c = c.strip_prefix(' ').unwrap_or(c);
            prog.instructions.push(Instruction::Comment(c.to_string()));
            prog.lines.push(line);
        }
    }
    Ok(prog)
}
