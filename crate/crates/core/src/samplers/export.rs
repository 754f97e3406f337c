//! Posterior draws as JSON lines.
//!
//! One draw per line, keys in a fixed order, every float printed as `{:.16e}`
//! (17 significant digits), which round-trips any finite f64 bit-for-bit:
//!
//! ```json
//! {"chain":0,"iter":310,"model":"gaussian","d":[0.0000000000000000e0,…],"spike":null,"tau2":9.6219…e-2,"omega0":null}
//! ```
//!
//! The reader validates each line and the file's internal consistency
//! (one model throughout, constant effect-vector width, reference pinned
//! to zero) and reports failures with 1-based line numbers.

use std::fmt::Write as _;
use std::io;

use serde::Deserialize;

use super::{Draw, ModelKind, PosteriorSamples, SamplerError};

fn push_float(buf: &mut String, value: f64) {
    write!(buf, "{value:.16e}").expect("writing to a String cannot fail");
}

/// Writes `samples` as JSON lines. Fails on non-finite values — they cannot
/// appear in legitimate draws and have no JSON representation.
pub fn write_samples_jsonl<W: io::Write>(
    samples: &PosteriorSamples,
    mut out: W,
) -> Result<(), SamplerError> {
    let mut line = String::new();
    for (idx, draw) in samples.draws.iter().enumerate() {
        let finite = draw.d.iter().all(|v| v.is_finite())
            && draw.tau2.is_finite()
            && draw.omega0.is_none_or(|w| w.is_finite());
        if !finite {
            return Err(SamplerError::MalformedSamples {
                line: idx + 1,
                message: "draw contains a non-finite value".into(),
            });
        }
        line.clear();
        write!(line, "{{\"chain\":{},\"iter\":{},\"model\":\"{}\",\"d\":[", draw.chain, draw.iter, samples.model)
            .expect("writing to a String cannot fail");
        for (i, &v) in draw.d.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            push_float(&mut line, v);
        }
        line.push_str("],\"spike\":");
        match &draw.spike {
            None => line.push_str("null"),
            Some(flags) => {
                line.push('[');
                for (i, &flag) in flags.iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    line.push_str(if flag { "true" } else { "false" });
                }
                line.push(']');
            }
        }
        line.push_str(",\"tau2\":");
        push_float(&mut line, draw.tau2);
        line.push_str(",\"omega0\":");
        match draw.omega0 {
            None => line.push_str("null"),
            Some(w) => push_float(&mut line, w),
        }
        line.push_str("}\n");
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct DrawLine {
    chain: usize,
    iter: usize,
    model: String,
    d: Vec<f64>,
    spike: Option<Vec<bool>>,
    tau2: f64,
    omega0: Option<f64>,
}

fn malformed(line: usize, message: impl Into<String>) -> SamplerError {
    SamplerError::MalformedSamples { line, message: message.into() }
}

/// Reads JSON-lines draws written by [`write_samples_jsonl`] (or any
/// schema-compatible producer). The returned samples carry no run metadata.
pub fn read_samples_jsonl<R: io::BufRead>(input: R) -> Result<PosteriorSamples, SamplerError> {
    let mut model: Option<ModelKind> = None;
    let mut width: Option<usize> = None;
    let mut draws = Vec::new();

    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let raw = raw?;
        if raw.trim().is_empty() {
            return Err(malformed(lineno, "blank line"));
        }
        let parsed: DrawLine =
            serde_json::from_str(&raw).map_err(|e| malformed(lineno, e.to_string()))?;

        let kind = ModelKind::parse(&parsed.model)
            .ok_or_else(|| malformed(lineno, format!("unknown model \"{}\"", parsed.model)))?;
        match model {
            None => model = Some(kind),
            Some(m) if m != kind => {
                return Err(malformed(
                    lineno,
                    format!("model changed mid-file: \"{m}\" then \"{kind}\""),
                ));
            }
            Some(_) => {}
        }

        if parsed.d.is_empty() {
            return Err(malformed(lineno, "empty effect vector"));
        }
        match width {
            None => width = Some(parsed.d.len()),
            Some(w) if w != parsed.d.len() => {
                return Err(malformed(
                    lineno,
                    format!("effect vector has {} entries, expected {w}", parsed.d.len()),
                ));
            }
            Some(_) => {}
        }
        if !parsed.d.iter().all(|v| v.is_finite()) {
            return Err(malformed(lineno, "non-finite effect value"));
        }
        if parsed.d[0] != 0.0 {
            return Err(malformed(lineno, "the reference effect must be exactly 0"));
        }
        if !(parsed.tau2.is_finite() && parsed.tau2 > 0.0) {
            return Err(malformed(lineno, format!("tau2 must be positive, got {}", parsed.tau2)));
        }
        if parsed.spike.is_some() != kind.has_spike() || parsed.omega0.is_some() != kind.has_spike()
        {
            return Err(malformed(
                lineno,
                "spike and omega0 must be present exactly for the spike-slab model",
            ));
        }
        if let Some(flags) = &parsed.spike {
            if flags.len() != parsed.d.len() {
                return Err(malformed(lineno, "spike flags and effects disagree in length"));
            }
            if !flags[0] {
                return Err(malformed(lineno, "the reference belongs to the zero class"));
            }
        }
        if let Some(w) = parsed.omega0 {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(malformed(lineno, format!("omega0 must lie in [0, 1], got {w}")));
            }
        }

        draws.push(Draw {
            chain: parsed.chain,
            iter: parsed.iter,
            d: parsed.d,
            spike: parsed.spike,
            tau2: parsed.tau2,
            omega0: parsed.omega0,
        });
    }

    let model = model.ok_or_else(|| malformed(0, "the file contains no draws"))?;
    Ok(PosteriorSamples { model, n_treatments: width.unwrap_or(0), draws, meta: None })
}
