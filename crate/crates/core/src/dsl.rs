//! Line-oriented pulse-sequence language (`.seq` files).
//!
//! ```text
//! # comment
//! LASER 5us
//! WAIT 5us
//! MW1 PI/2
//! MW2 2PI
//! MW1 PI/2 PHASE 1.5707963267948966
//! MW2 DUR 117.4ns
//! MW1 PI DUR 64ns
//! READOUT 300ns
//! ```
//!
//! One event per line. Keywords are case-insensitive. Durations take a unit
//! suffix (`ns`, `us`/`µs`, `ms`, `s`) and are stored with 1 ps resolution.
//! Angles are `PI`, `PI/2`, `2PI` or `<float>PI` (optionally `/<float>`),
//! resolved to a duration `angle/(2πΩ)` with the channel's Rabi frequency
//! only when simulated.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::engine::ChannelSet;
use crate::pulse::{Channel, FlipAngle, MwPulse, PulseEvent, PulseSequence, TimeSpan};

/// Parse failure with a 1-based position into the source.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message} (`{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in code.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token {
                    text: &code[b..byte],
                    column: c + 1,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token {
            text: &code[b..],
            column: c + 1,
        });
    }
    out
}

struct LineParser<'a> {
    line: usize,
    end_column: usize,
    tokens: std::iter::Peekable<std::vec::IntoIter<Token<'a>>>,
}

impl<'a> LineParser<'a> {
    fn error(&self, tok: &Token<'_>, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: tok.column,
            message: message.into(),
            token: tok.text.to_string(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, ParseError> {
        self.tokens.next().ok_or_else(|| ParseError {
            line: self.line,
            column: self.end_column,
            message: format!("missing {what}"),
            token: String::new(),
        })
    }

    fn duration(&mut self) -> Result<TimeSpan, ParseError> {
        let tok = self.next("duration")?;
        parse_duration(tok.text).map_err(|m| self.error(&tok, m))
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.tokens.next() {
            Some(tok) => Err(self.error(&tok, "unexpected token")),
            None => Ok(()),
        }
    }

    fn mw(&mut self, channel: Channel) -> Result<MwPulse, ParseError> {
        let mut pulse = MwPulse {
            channel,
            angle: None,
            duration: None,
            phase: 0.0,
        };
        let first = self.next("angle or DUR")?;
        if first.text.eq_ignore_ascii_case("DUR") {
            pulse.duration = Some(self.duration()?);
        } else {
            pulse.angle = Some(parse_angle(first.text).map_err(|m| self.error(&first, m))?);
            if self.peek_is("DUR") {
                self.tokens.next();
                pulse.duration = Some(self.duration()?);
            }
        }
        if self.peek_is("PHASE") {
            self.tokens.next();
            let tok = self.next("phase")?;
            pulse.phase = parse_float(tok.text)
                .filter(|p| p.is_finite())
                .ok_or_else(|| self.error(&tok, "malformed phase"))?;
        }
        Ok(pulse)
    }

    fn peek_is(&mut self, keyword: &str) -> bool {
        self.tokens
            .peek()
            .is_some_and(|t| t.text.eq_ignore_ascii_case(keyword))
    }
}

fn parse_float(s: &str) -> Option<f64> {
    // Rust accepts "inf"/"nan" spellings; the language only takes digits.
    if s.is_empty()
        || !s
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
    {
        return None;
    }
    s.parse::<f64>().ok()
}

const UNITS: [(&str, f64); 6] = [
    ("ns", 1e-9),
    ("us", 1e-6),
    ("µs", 1e-6),
    ("μs", 1e-6),
    ("ms", 1e-3),
    ("s", 1.0),
];

fn parse_duration(text: &str) -> Result<TimeSpan, String> {
    let (number, scale) = UNITS
        .iter()
        .find_map(|(u, scale)| text.strip_suffix(u).map(|n| (n, *scale)))
        .ok_or_else(|| "malformed duration (expected <number><ns|us|ms|s>)".to_string())?;
    let value = parse_float(number).ok_or("malformed duration")?;
    if value < 0.0 {
        return Err("negative duration".into());
    }
    TimeSpan::from_seconds(value * scale).ok_or_else(|| "duration out of range".into())
}

fn parse_angle(text: &str) -> Result<FlipAngle, String> {
    let upper = text.to_ascii_uppercase();
    let pos = upper
        .find("PI")
        .ok_or_else(|| "malformed angle (expected PI, PI/2, 2PI or <float>PI)".to_string())?;
    let (coeff, rest) = (&upper[..pos], &upper[pos + 2..]);
    let mut k = if coeff.is_empty() {
        1.0
    } else {
        parse_float(coeff).ok_or("malformed angle")?
    };
    if !rest.is_empty() {
        let denom = rest
            .strip_prefix('/')
            .and_then(parse_float)
            .filter(|d| *d > 0.0)
            .ok_or("malformed angle")?;
        k /= denom;
    }
    if k < 0.0 {
        return Err("negative duration".into());
    }
    FlipAngle::from_pi_multiple(k).ok_or_else(|| "malformed angle".into())
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<PulseEvent>, ParseError> {
    let tokens = tokenize(line);
    if tokens.is_empty() {
        return Ok(None);
    }
    let end_column = line.split('#').next().unwrap_or("").chars().count() + 1;
    let mut p = LineParser {
        line: line_no,
        end_column,
        tokens: tokens.into_iter().peekable(),
    };
    let head = p.next("keyword")?;
    let kw = head.text.to_ascii_uppercase();
    let event = match kw.as_str() {
        "LASER" => PulseEvent::Laser(p.duration()?),
        "WAIT" => PulseEvent::Wait(p.duration()?),
        "READOUT" => PulseEvent::Readout(p.duration()?),
        "MW1" => PulseEvent::Mw(p.mw(Channel::Mw1)?),
        "MW2" => PulseEvent::Mw(p.mw(Channel::Mw2)?),
        other if other.starts_with("MW") => return Err(p.error(&head, "unknown channel")),
        _ => return Err(p.error(&head, "unknown keyword")),
    };
    p.finish()?;
    Ok(Some(event))
}

/// Parses a `.seq` source.
pub fn parse(source: &str) -> Result<PulseSequence, ParseError> {
    let mut events = Vec::new();
    for (i, line) in source.lines().enumerate() {
        if let Some(ev) = parse_line(i + 1, line)? {
            events.push(ev);
        }
    }
    Ok(PulseSequence {
        name: String::new(),
        events,
    })
}

/// Like [`parse`], for raw bytes that may not be UTF-8.
pub fn parse_bytes(source: &[u8]) -> Result<PulseSequence, ParseError> {
    match std::str::from_utf8(source) {
        Ok(s) => parse(s),
        Err(e) => {
            let valid = &source[..e.valid_up_to()];
            let line = valid.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column =
                std::str::from_utf8(&valid[line_start..]).map_or(1, |s| s.chars().count() + 1);
            Err(ParseError {
                line,
                column,
                message: "invalid UTF-8".into(),
                token: format!("{:#04x}", source[e.valid_up_to()]),
            })
        }
    }
}

/// Symbolic angle and explicit duration may disagree by at most this much.
pub const ANGLE_DURATION_TOLERANCE_S: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.index, self.message)
    }
}

/// Checks a sequence against the channel calibrations.
///
/// Events are strictly sequential, so microwave pulses can never overlap a
/// laser pulse; the remaining rules are angle/duration consistency,
/// calibrated channels, finite phases, and that every `READOUT` either
/// directly follows a `LASER` or ends the sequence.
pub fn validate(seq: &PulseSequence, channels: &ChannelSet) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let last = seq.events.len().saturating_sub(1);
    for (index, ev) in seq.events.iter().enumerate() {
        match ev {
            PulseEvent::Mw(p) => {
                let cal = channels.get(p.channel);
                if !(cal.rabi_hz.is_finite() && cal.rabi_hz > 0.0) {
                    out.push(Violation {
                        index,
                        message: format!("{} has no usable Rabi frequency", p.channel),
                    });
                    continue;
                }
                if !p.phase.is_finite() {
                    out.push(Violation {
                        index,
                        message: "non-finite phase".into(),
                    });
                }
                if let (Some(angle), Some(dur)) = (p.angle, p.duration) {
                    let expected = angle.duration_at(cal.rabi_hz);
                    if (dur.seconds() - expected).abs() > ANGLE_DURATION_TOLERANCE_S {
                        out.push(Violation {
                            index,
                            message: format!(
                                "{} {} lasts {:.3} ns, expected {:.3} ns",
                                p.channel,
                                format_angle(angle),
                                dur.seconds() * 1e9,
                                expected * 1e9
                            ),
                        });
                    }
                }
                if p.angle.is_none() && p.duration.is_none() {
                    out.push(Violation {
                        index,
                        message: "pulse has neither angle nor duration".into(),
                    });
                }
            }
            PulseEvent::Readout(_) => {
                let after_laser =
                    index > 0 && matches!(seq.events[index - 1], PulseEvent::Laser(_));
                if !after_laser && index != last {
                    out.push(Violation {
                        index,
                        message: "READOUT must follow a LASER or end the sequence".into(),
                    });
                }
            }
            PulseEvent::Laser(_) | PulseEvent::Wait(_) => {}
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn try_merge(a: &MwPulse, b: &MwPulse) -> Option<MwPulse> {
    if a.channel != b.channel
        || a.phase != b.phase
        || a.angle.is_some() != b.angle.is_some()
        || a.duration.is_some() != b.duration.is_some()
    {
        return None;
    }
    let duration = match (a.duration, b.duration) {
        (Some(x), Some(y)) => Some(x.checked_add(y)?),
        _ => None,
    };
    let angle = a.angle.zip(b.angle).map(|(x, y)| x.sum(y));
    Some(MwPulse {
        angle,
        duration,
        ..*a
    })
}

/// Replaces each run of back-to-back pulses on the same channel with the
/// same phase by a single pulse of the summed angle/duration.
///
/// A symbolic pulse and an explicit-duration pulse are not merged with each
/// other, since their sum is only defined once a Rabi frequency is known.
pub fn merge_adjacent(seq: &PulseSequence) -> PulseSequence {
    let mut events: Vec<PulseEvent> = Vec::with_capacity(seq.events.len());
    for ev in &seq.events {
        if let (Some(PulseEvent::Mw(prev)), PulseEvent::Mw(cur)) = (events.last(), ev) {
            if let Some(merged) = try_merge(prev, cur) {
                *events.last_mut().unwrap() = PulseEvent::Mw(merged);
                continue;
            }
        }
        events.push(*ev);
    }
    PulseSequence {
        name: seq.name.clone(),
        events,
    }
}

pub fn format_angle(a: FlipAngle) -> String {
    let k = a.pi_multiple();
    if k == 0.5 {
        "PI/2".into()
    } else if k == 1.0 {
        "PI".into()
    } else {
        format!("{k}PI")
    }
}

/// Exact, with the largest unit that divides the value; otherwise ns with a
/// picosecond fraction.
pub fn format_duration(t: TimeSpan) -> String {
    let ps = t.ps();
    const UNITS: [(u64, &str); 4] = [
        (1_000_000_000_000, "s"),
        (1_000_000_000, "ms"),
        (1_000_000, "us"),
        (1_000, "ns"),
    ];
    if ps == 0 {
        return "0ns".into();
    }
    for (scale, unit) in UNITS {
        if ps.is_multiple_of(scale) {
            return format!("{}{unit}", ps / scale);
        }
    }
    let frac = format!("{:03}", ps % 1000);
    format!("{}.{}ns", ps / 1000, frac.trim_end_matches('0'))
}

/// Renders a sequence in the `.seq` language. `parse(serialize(s))`
/// reproduces the event list of `s`.
pub fn serialize(seq: &PulseSequence) -> String {
    let mut out = String::new();
    for line in seq.name.lines().filter(|l| !l.trim().is_empty()) {
        let _ = writeln!(out, "# {}", line.trim());
    }
    for ev in &seq.events {
        match ev {
            PulseEvent::Laser(t) => writeln!(out, "LASER {}", format_duration(*t)),
            PulseEvent::Wait(t) => writeln!(out, "WAIT {}", format_duration(*t)),
            PulseEvent::Readout(t) => writeln!(out, "READOUT {}", format_duration(*t)),
            PulseEvent::Mw(p) => {
                let mut line = p.channel.name().to_string();
                if let Some(a) = p.angle {
                    let _ = write!(line, " {}", format_angle(a));
                }
                if let Some(d) = p.duration {
                    let _ = write!(line, " DUR {}", format_duration(d));
                }
                if p.phase != 0.0 {
                    let _ = write!(line, " PHASE {:?}", p.phase);
                }
                writeln!(out, "{line}")
            }
        }
        .expect("writing to a String");
    }
    out
}
