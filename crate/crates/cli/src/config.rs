//! Line-oriented construction configs.
//!
//! One statement per line; `#` starts a comment that runs to the end of the
//! line. Statements:
//!
//! ```text
//! h1 <int>
//! stage r=<int> s=<int>,<int>,...
//! schedule kind=sidon-geometric stages=<int> growth=<int> r=<rule>
//! ```
//!
//! where `<rule>` is `const:<n>` or `linear+1`. The `h1` statement must come
//! first and appear exactly once. A `schedule` statement expands into
//! generated stages (continuing from the current height) before the whole
//! description is validated, so explicit and generated stages can be mixed.

use rankone::sidon::{generate_sidon_stage, CutSchedule, MIN_GROWTH};
use rankone::{Construction, Error, Int, Result, StageParams};

/// Heights past this many bits abort schedule expansion.
pub const SCHEDULE_BIT_BUDGET: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    BaseHeight(Int),
    Stage(StageParams),
    Schedule {
        stages: u32,
        growth: u32,
        rule: CutSchedule,
    },
}

/// A parsed config: the statement list in file order, comments dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDoc {
    pub statements: Vec<Statement>,
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_int(line: usize, text: &str, what: &str) -> Result<Int> {
    text.parse::<Int>().map_err(|_| {
        syntax(
            line,
            format!("expected an integer for {what}, got '{text}'"),
        )
    })
}

fn parse_u32(line: usize, text: &str, what: &str) -> Result<u32> {
    text.parse::<u32>().map_err(|_| {
        syntax(
            line,
            format!("expected a small integer for {what}, got '{text}'"),
        )
    })
}

/// Splits `key=value` tokens, rejecting duplicates and anything else.
fn key_values<'a>(line: usize, tokens: &[&'a str]) -> Result<Vec<(&'a str, &'a str)>> {
    let mut out: Vec<(&str, &str)> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected key=value, got '{tok}'")))?;
        if out.iter().any(|(k, _)| *k == key) {
            return Err(syntax(line, format!("duplicate key '{key}'")));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn lookup<'a>(line: usize, pairs: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| syntax(line, format!("missing {key}=...")))
}

fn parse_stage(line: usize, tokens: &[&str]) -> Result<StageParams> {
    let pairs = key_values(line, tokens)?;
    for (k, _) in &pairs {
        if *k != "r" && *k != "s" {
            return Err(syntax(line, format!("unknown stage key '{k}'")));
        }
    }
    let cuts = parse_u32(line, lookup(line, &pairs, "r")?, "r")?;
    let spacers = lookup(line, &pairs, "s")?
        .split(',')
        .map(|s| parse_int(line, s, "a spacer"))
        .collect::<Result<Vec<Int>>>()?;
    if spacers.len() != cuts as usize {
        return Err(syntax(
            line,
            format!("r={} but {} spacers listed", cuts, spacers.len()),
        ));
    }
    Ok(StageParams::new(spacers))
}

fn parse_rule(line: usize, text: &str) -> Result<CutSchedule> {
    if text == "linear+1" {
        return Ok(CutSchedule::LinearPlusOne);
    }
    if let Some(n) = text.strip_prefix("const:") {
        return Ok(CutSchedule::Const(parse_u32(line, n, "const cut count")?));
    }
    Err(syntax(
        line,
        format!("unknown cut rule '{text}' (expected const:<n> or linear+1)"),
    ))
}

fn parse_schedule(line: usize, tokens: &[&str]) -> Result<Statement> {
    let pairs = key_values(line, tokens)?;
    for (k, _) in &pairs {
        if !matches!(*k, "kind" | "stages" | "growth" | "r") {
            return Err(syntax(line, format!("unknown schedule key '{k}'")));
        }
    }
    let kind = lookup(line, &pairs, "kind")?;
    if kind != "sidon-geometric" {
        return Err(syntax(line, format!("unknown schedule kind '{kind}'")));
    }
    Ok(Statement::Schedule {
        stages: parse_u32(line, lookup(line, &pairs, "stages")?, "stages")?,
        growth: parse_u32(line, lookup(line, &pairs, "growth")?, "growth")?,
        rule: parse_rule(line, lookup(line, &pairs, "r")?)?,
    })
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut statements = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let statement = match tokens[0] {
                "h1" => {
                    if statements.is_empty() {
                        if tokens.len() != 2 {
                            return Err(syntax(line, "h1 takes exactly one integer"));
                        }
                        Statement::BaseHeight(parse_int(line, tokens[1], "h1")?)
                    } else {
                        return Err(syntax(line, "h1 must appear exactly once, first"));
                    }
                }
                "stage" => Statement::Stage(parse_stage(line, &tokens[1..])?),
                "schedule" => parse_schedule(line, &tokens[1..])?,
                other => return Err(syntax(line, format!("unknown statement '{other}'"))),
            };
            if statements.is_empty() && !matches!(statement, Statement::BaseHeight(_)) {
                return Err(syntax(line, "the first statement must be h1"));
            }
            statements.push(statement);
        }
        if statements.is_empty() {
            return Err(syntax(1, "empty config: an h1 statement is required"));
        }
        Ok(ConfigDoc { statements })
    }

    /// Canonical text: one statement per line, single spaces, no comments.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for st in &self.statements {
            match st {
                Statement::BaseHeight(n) => out.push_str(&format!("h1 {n}\n")),
                Statement::Stage(p) => {
                    let list: Vec<String> = p.spacers.iter().map(|s| s.to_string()).collect();
                    out.push_str(&format!("stage r={} s={}\n", p.cuts(), list.join(",")));
                }
                Statement::Schedule {
                    stages,
                    growth,
                    rule,
                } => {
                    let rule = match rule {
                        CutSchedule::Const(n) => format!("const:{n}"),
                        CutSchedule::LinearPlusOne => "linear+1".to_string(),
                    };
                    out.push_str(&format!(
                        "schedule kind=sidon-geometric stages={stages} growth={growth} r={rule}\n"
                    ));
                }
            }
        }
        out
    }

    /// Expands schedules into concrete stages and validates the result.
    pub fn expand(&self) -> Result<Construction> {
        let mut base = Int::from(0);
        let mut height = Int::from(0);
        let mut stages: Vec<StageParams> = Vec::new();
        for st in &self.statements {
            match st {
                Statement::BaseHeight(n) => {
                    base = n.clone();
                    height = n.clone();
                }
                Statement::Stage(p) => {
                    height = &height * Int::from(p.cuts()) + p.spacer_sum();
                    stages.push(p.clone());
                }
                Statement::Schedule {
                    stages: count,
                    growth,
                    rule,
                } => {
                    if *growth < MIN_GROWTH {
                        return Err(Error::GrowthTooSmall { growth: *growth });
                    }
                    for _ in 0..*count {
                        let j = stages.len() as u32 + 1;
                        let p = generate_sidon_stage(&height, rule.cuts(j), *growth);
                        height = &height * Int::from(p.cuts()) + p.spacer_sum();
                        if height.bits() > SCHEDULE_BIT_BUDGET {
                            return Err(Error::StageBudgetExceeded {
                                budget: SCHEDULE_BIT_BUDGET,
                            });
                        }
                        stages.push(p);
                    }
                }
            }
        }
        Construction::new(base, stages)
    }
}

/// Parse-and-expand in one step.
pub fn parse_config(text: &str) -> Result<Construction> {
    ConfigDoc::parse(text)?.expand()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rankone::sidon::generate_sidon_construction;

    const C0: &str = "h1 2\nstage r=2 s=1,2\nstage r=2 s=20,60\n";

    fn ints(xs: &[i64]) -> Vec<Int> {
        xs.iter().map(|&x| Int::from(x)).collect()
    }

    #[test]
    fn direct_encoding_builds_the_two_stage_construction() {
        let c = parse_config(C0).unwrap();
        assert_eq!(c.base_height(), &Int::from(2));
        assert_eq!(c.stage_count(), 2);
        assert_eq!(c.height(2), &Int::from(7));
        assert_eq!(c.height(3), &Int::from(94));
        assert_eq!(c.stage_params(1).unwrap().spacers, ints(&[1, 2]));
        assert_eq!(c.stage_params(2).unwrap().spacers, ints(&[20, 60]));
    }

    #[test]
    fn schedule_expands_like_the_generator() {
        let text = "h1 1\nschedule kind=sidon-geometric stages=4 growth=10 r=linear+1\n";
        let c = parse_config(text).unwrap();
        let g = generate_sidon_construction(Int::from(1), CutSchedule::LinearPlusOne, 10, 4, 4096)
            .unwrap();
        assert_eq!(c.stage_count(), g.stage_count());
        for j in 1..=4 {
            assert_eq!(
                c.stage_params(j).unwrap().spacers,
                g.stage_params(j).unwrap().spacers
            );
        }
    }

    #[test]
    fn schedule_continues_from_explicit_stages() {
        let text =
            "h1 2\nstage r=2 s=1,2\nschedule kind=sidon-geometric stages=1 growth=10 r=const:3\n";
        let c = parse_config(text).unwrap();
        // explicit stage 1 leaves height 7; the generated stage must seed from it
        assert_eq!(c.height(2), &Int::from(7));
        let expect = generate_sidon_stage(&Int::from(7), 3, 10);
        assert_eq!(c.stage_params(2).unwrap().spacers, expect.spacers);
    }

    #[test]
    fn zero_height_is_a_semantic_error() {
        assert_eq!(parse_config("h1 0\n"), Err(Error::NonPositiveHeight));
    }

    #[test]
    fn round_trip_normalizes_whitespace_only() {
        let messy = "h1    2   # base\n\n  stage  r=2   s=1,2\nstage r=2 s=20,60   \n";
        let doc = ConfigDoc::parse(messy).unwrap();
        assert_eq!(doc.render(), C0);
        let again = ConfigDoc::parse(&doc.render()).unwrap();
        assert_eq!(again, doc);

        let sched = "h1 1\nschedule kind=sidon-geometric stages=4 growth=10 r=linear+1\n";
        assert_eq!(ConfigDoc::parse(sched).unwrap().render(), sched);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases: &[(&str, usize, &str)] = &[
            ("h1 x\n", 1, "integer"),
            ("h1 2\nstage r=2 s=1\n", 2, "spacers"),
            ("stage r=2 s=1,2\n", 1, "h1"),
            ("h1 2\nh1 3\n", 2, "exactly once"),
            ("h1 2\nbogus 3\n", 2, "unknown statement"),
            ("h1 2\nstage r=2 s=1,2 q=4\n", 2, "unknown stage key"),
            (
                "h1 1\nschedule kind=other stages=2 growth=10 r=linear+1\n",
                2,
                "kind",
            ),
            (
                "h1 1\nschedule kind=sidon-geometric stages=2 growth=10 r=cubic\n",
                2,
                "rule",
            ),
            ("", 1, "empty"),
        ];
        for (text, want_line, want_word) in cases {
            match ConfigDoc::parse(text) {
                Err(Error::Syntax { line, message }) => {
                    assert_eq!(line, *want_line, "line for {text:?}");
                    assert!(
                        message.contains(want_word),
                        "message {message:?} for {text:?}"
                    );
                }
                other => panic!("expected syntax error for {text:?}, got {other:?}"),
            }
        }
    }
}
