use serde::{Deserialize, Serialize};

use super::{Example, PromptError, PromptInstance, SerializedPrompt, END_MARKER};
use crate::dataset::Targets;
use crate::numfmt::plain_sig;

fn num(v: f64, digits: usize) -> Result<String, PromptError> {
    if !v.is_finite() {
        return Err(PromptError::NonFinite(v));
    }
    Ok(plain_sig(v, digits))
}

fn targets_text(t: &Targets, digits: usize) -> Result<String, PromptError> {
    Ok(format!(
        "rms={}, h2={}, h4={}{END_MARKER}",
        num(t.rms, digits)?,
        num(t.h2, digits)?,
        num(t.h4, digits)?
    ))
}

/// Renders the canonical template with every number rounded half-to-even to
/// `digits` significant digits.
pub fn serialize(p: &PromptInstance, digits: usize) -> Result<SerializedPrompt, PromptError> {
    if !(3..=12).contains(&digits) {
        return Err(PromptError::Digits(digits));
    }
    let mut prompt = String::new();
    for e in &p.prefix {
        prompt.push_str(&format!("x={} -> {}\n", num(e.x, digits)?, targets_text(&e.targets, digits)?));
    }
    prompt.push_str(&format!("x={} -> ", num(p.query_x, digits)?));
    let completion = match &p.target {
        Some(t) => targets_text(t, digits)?,
        None => String::new(),
    };
    Ok(SerializedPrompt { prompt_text: prompt, completion_text: completion })
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> PromptError {
        PromptError::Parse { offset: self.base + self.pos, message: message.into() }
    }

    fn expect(&mut self, lit: &str) -> Result<(), PromptError> {
        if self.text[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {lit:?}")))
        }
    }

    fn number(&mut self) -> Result<f64, PromptError> {
        let rest = &self.text[self.pos..];
        let len = rest
            .char_indices()
            .find(|(i, c)| !(c.is_ascii_digit() || *c == '.' || (*c == '-' && *i == 0)))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let tok = &rest[..len];
        let v: f64 = tok.parse().map_err(|_| self.err(format!("bad number {tok:?}")))?;
        self.pos += len;
        Ok(v)
    }

    fn targets(&mut self) -> Result<Targets, PromptError> {
        self.expect("rms=")?;
        let rms = self.number()?;
        self.expect(", h2=")?;
        let h2 = self.number()?;
        self.expect(", h4=")?;
        let h4 = self.number()?;
        self.expect(";")?;
        Ok(Targets { rms, h2, h4 })
    }

    fn done(&self) -> bool {
        self.pos == self.text.len()
    }
}

/// Parses a prompt (no completion) back into an inference-mode instance.
pub fn parse_prompt(text: &str) -> Result<PromptInstance, PromptError> {
    let mut c = Cursor { text, pos: 0, base: 0 };
    let mut prefix = Vec::new();
    loop {
        c.expect("x=")?;
        let x = c.number()?;
        c.expect(" -> ")?;
        if c.done() {
            return Ok(PromptInstance { prefix, query_x: x, target: None });
        }
        let targets = c.targets()?;
        c.expect("\n")?;
        prefix.push(Example { x, targets });
    }
}

/// Parses a completion of the form `rms=<v>, h2=<v>, h4=<v>;`.
pub fn parse_completion(text: &str) -> Result<Targets, PromptError> {
    let mut c = Cursor { text, pos: 0, base: 0 };
    let t = c.targets()?;
    if !c.done() {
        return Err(c.err("trailing characters after end marker"));
    }
    Ok(t)
}

pub fn parse_serialized(s: &SerializedPrompt) -> Result<PromptInstance, PromptError> {
    let mut p = parse_prompt(&s.prompt_text)?;
    if !s.completion_text.is_empty() {
        p.target = Some(parse_completion(&s.completion_text).map_err(|e| match e {
            PromptError::Parse { offset, message } => {
                PromptError::Parse { offset: offset + s.prompt_text.len(), message }
            }
            other => other,
        })?);
    }
    Ok(p)
}

/// One line of a fine-tuning upload file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub prompt: String,
    pub completion: String,
}

/// JSON-Lines training file, one `{"prompt", "completion"}` object per line.
pub fn to_jsonl(prompts: &[SerializedPrompt]) -> String {
    let mut out = String::new();
    for p in prompts {
        let rec = JsonlRecord { prompt: p.prompt_text.clone(), completion: p.completion_text.clone() };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numfmt::round_sig;
    use proptest::prelude::*;

    fn single() -> PromptInstance {
        PromptInstance {
            prefix: vec![Example { x: 626.0, targets: Targets { rms: 1.23, h2: 1.10, h4: 0.45 } }],
            query_x: 700.0,
            target: Some(Targets { rms: 1.31, h2: 1.18, h4: 0.47 }),
        }
    }

    #[test]
    fn canonical_text() {
        let s = serialize(&single(), 6).unwrap();
        assert_eq!(s.prompt_text, "x=626.000 -> rms=1.23000, h2=1.10000, h4=0.450000;\nx=700.000 -> ");
        assert_eq!(s.completion_text, "rms=1.31000, h2=1.18000, h4=0.470000;");
        assert!(s.completion_text.ends_with(END_MARKER));
    }

    #[test]
    fn four_digits_half_even() {
        let mut p = single();
        p.prefix[0].targets.rms = 0.123456;
        let s = serialize(&p, 4).unwrap();
        assert!(s.prompt_text.contains("rms=0.1235,"), "{}", s.prompt_text);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(serialize(&single(), 2), Err(PromptError::Digits(2)));
        let mut p = single();
        p.query_x = f64::NAN;
        assert!(matches!(serialize(&p, 6), Err(PromptError::NonFinite(_))));
        assert!(parse_completion("rms=1, h2=2, h4=3").is_err());
        assert!(parse_completion("rms=1, h2=2, h4=3;x").is_err());
        assert!(parse_completion("rms=1.2.3, h2=2, h4=3;").is_err());
    }

    #[test]
    fn inference_mode_round_trip() {
        let mut p = single();
        p.target = None;
        let s = serialize(&p, 6).unwrap();
        assert!(s.completion_text.is_empty());
        assert_eq!(parse_serialized(&s).unwrap(), p);
    }

    #[test]
    fn jsonl_lines() {
        let s = serialize(&single(), 6).unwrap();
        let text = to_jsonl(&[s.clone(), s.clone()]);
        assert_eq!(text.lines().count(), 2);
        let rec: JsonlRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(rec.prompt, s.prompt_text);
        assert_eq!(rec.completion, s.completion_text);
    }

    fn value() -> impl Strategy<Value = f64> {
        prop_oneof![1e-4f64..1e-1, 1e-1f64..1e2, 1e2f64..1e4]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_at_precision(
            xs in proptest::collection::btree_set(0u32..100_000, 2..12),
            ys in proptest::collection::vec((value(), value(), value()), 12),
            digits in 3usize..=12,
        ) {
            let xs: Vec<f64> = xs.into_iter().map(|v| v as f64 * 0.01 + 0.5).collect();
            let (query, prefix_x) = xs.split_last().unwrap();
            let t = |i: usize| Targets { rms: ys[i].0, h2: ys[i].1, h4: ys[i].2 };
            let p = PromptInstance {
                prefix: prefix_x.iter().enumerate().map(|(i, &x)| Example { x, targets: t(i) }).collect(),
                query_x: *query,
                target: Some(t(11)),
            };
            let back = parse_serialized(&serialize(&p, digits).unwrap()).unwrap();
            let r = |v: f64| round_sig(v, digits);
            prop_assert_eq!(back.query_x, r(p.query_x));
            prop_assert_eq!(back.prefix.len(), p.prefix.len());
            for (a, b) in back.prefix.iter().zip(&p.prefix) {
                prop_assert_eq!(a.x, r(b.x));
                prop_assert_eq!(a.targets.as_array(), b.targets.as_array().map(r));
            }
            prop_assert_eq!(back.target.unwrap().as_array(), p.target.unwrap().as_array().map(r));
        }
    }
}
