//! Command traces: one user action per line.
//!
//! ```text
//! # comments and blank lines are ignored
//! new topic="Troubles of Adult Life" supplement="exaggerated expressions" supplement="workplace burnout"
//! summarize
//! confirm
//! generate
//! add_map mode=ai
//! delete_block map=3 block=2
//! add_block map=3 text="the subtle dynamics between colleagues"
//! inspect map=3 block=last
//! regenerate map=3
//! finalize map=3
//! ```
//!
//! Values are bare words or double-quoted strings with `\"` and `\\`
//! escapes. `map=N` and `block=N` are 1-based positions in the current
//! session (`last` picks the last one); anything else is taken as an id.
//!
//! | command        | arguments                                    |
//! |----------------|----------------------------------------------|
//! | `new`          | `topic`, `supplement`*, `audience`?, `lang`? |
//! | `summarize`    |                                              |
//! | `resummarize`  | same as `new`                                |
//! | `confirm`      |                                              |
//! | `generate`     |                                              |
//! | `transition`   | `to` (stage name)                            |
//! | `add_map`      | `mode` = `ai` or `manual`                    |
//! | `remove_map`   | `map`                                        |
//! | `add_block_ai` | `map`                                        |
//! | `add_block`    | `map`, `text`                                |
//! | `edit_block`   | `map`, `block`, `text`                       |
//! | `delete_block` | `map`, `block`                               |
//! | `reenrich`     | `map`, `block`                               |
//! | `inspect`      | `map`, `block`                               |
//! | `regenerate`   | `map`                                        |
//! | `complete_map` | `map`                                        |
//! | `finalize`     | `map`                                        |

use std::collections::BTreeMap;

use jokeasy_core::{BlockId, Command, LanguageTag, MapId, MapMode, Session, TopicBrief, WorkflowStage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("TraceParseError: line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

/// A position or id naming an entity in the live session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ref {
    Index(usize),
    Last,
    Id(String),
}

impl Ref {
    fn parse(v: &str) -> Self {
        match v {
            "last" => Ref::Last,
            _ => match v.parse::<usize>() {
                Ok(n) if n > 0 => Ref::Index(n),
                _ => Ref::Id(v.to_owned()),
            },
        }
    }

    fn pick<'a, T>(&self, items: &'a [T], id: impl Fn(&T) -> &str) -> Option<&'a T> {
        match self {
            Ref::Index(n) => items.get(n - 1),
            Ref::Last => items.last(),
            Ref::Id(s) => items.iter().find(|t| id(t) == s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    New(TopicBrief),
    Summarize,
    Resummarize(TopicBrief),
    Confirm,
    Generate,
    Transition(WorkflowStage),
    AddMap(MapMode),
    RemoveMap(Ref),
    AddBlockAi(Ref),
    AddBlock(Ref, String),
    EditBlock(Ref, Ref, String),
    DeleteBlock(Ref, Ref),
    Reenrich(Ref, Ref),
    Inspect(Ref, Ref),
    Regenerate(Ref),
    CompleteMap(Ref),
    Finalize(Ref),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub line: usize,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub steps: Vec<Step>,
}

fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut tok = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            if c == '"' {
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(e @ ('"' | '\\')) => tok.push(e),
                            Some('n') => tok.push('\n'),
                            _ => return Err("bad escape".into()),
                        },
                        Some(c) => tok.push(c),
                    }
                }
            } else {
                tok.push(c);
            }
        }
        out.push(tok);
    }
    Ok(out)
}

struct Args {
    map: BTreeMap<String, Vec<String>>,
}

impl Args {
    fn one(&mut self, key: &str) -> Result<String, String> {
        match self.map.remove(key) {
            Some(mut v) if v.len() == 1 => Ok(v.remove(0)),
            Some(_) => Err(format!("{key} given more than once")),
            None => Err(format!("missing {key}")),
        }
    }

    fn opt(&mut self, key: &str) -> Result<Option<String>, String> {
        if self.map.contains_key(key) {
            self.one(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn many(&mut self, key: &str) -> Vec<String> {
        self.map.remove(key).unwrap_or_default()
    }

    fn r(&mut self, key: &str) -> Result<Ref, String> {
        self.one(key).map(|v| Ref::parse(&v))
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().next() {
            Some(k) => Err(format!("unknown argument {k}")),
            None => Ok(()),
        }
    }
}

fn brief(args: &mut Args) -> Result<TopicBrief, String> {
    let mut b = TopicBrief::new(args.one("topic")?).with_supplements(args.many("supplement"));
    b.audience_hint = args.opt("audience")?;
    if let Some(lang) = args.opt("lang")? {
        b.content_language = LanguageTag::new(lang);
    }
    Ok(b)
}

fn stage(name: &str) -> Result<WorkflowStage, String> {
    WorkflowStage::ALL
        .into_iter()
        .find(|s| s.as_str() == name)
        .ok_or_else(|| format!("unknown stage {name}"))
}

fn parse_action(name: &str, args: &mut Args) -> Result<Action, String> {
    Ok(match name {
        "new" => Action::New(brief(args)?),
        "summarize" => Action::Summarize,
        "resummarize" => Action::Resummarize(brief(args)?),
        "confirm" => Action::Confirm,
        "generate" => Action::Generate,
        "transition" => Action::Transition(stage(&args.one("to")?)?),
        "add_map" => Action::AddMap(match args.one("mode")?.as_str() {
            "ai" | "ai_generated" => MapMode::AiGenerated,
            "manual" => MapMode::Manual,
            other => return Err(format!("unknown map mode {other}")),
        }),
        "remove_map" => Action::RemoveMap(args.r("map")?),
        "add_block_ai" => Action::AddBlockAi(args.r("map")?),
        "add_block" => Action::AddBlock(args.r("map")?, args.one("text")?),
        "edit_block" => Action::EditBlock(args.r("map")?, args.r("block")?, args.one("text")?),
        "delete_block" => Action::DeleteBlock(args.r("map")?, args.r("block")?),
        "reenrich" => Action::Reenrich(args.r("map")?, args.r("block")?),
        "inspect" => Action::Inspect(args.r("map")?, args.r("block")?),
        "regenerate" => Action::Regenerate(args.r("map")?),
        "complete_map" => Action::CompleteMap(args.r("map")?),
        "finalize" => Action::Finalize(args.r("map")?),
        other => return Err(format!("unknown command {other}")),
    })
}

pub fn parse_trace(source: &str) -> Result<Trace, TraceParseError> {
    let mut steps = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let err = |reason: String| TraceParseError { line, reason };
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut toks = tokenize(text).map_err(err)?.into_iter();
        let name = toks.next().expect("nonblank line has a token");
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in toks {
            let (k, v) = t.split_once('=').ok_or_else(|| err(format!("expected key=value, got {t}")))?;
            map.entry(k.to_owned()).or_default().push(v.to_owned());
        }
        let mut args = Args { map };
        let action = parse_action(&name, &mut args).map_err(err)?;
        args.finish().map_err(err)?;
        steps.push(Step { line, action });
    }
    match steps.first() {
        Some(Step { action: Action::New(_), .. }) => {}
        Some(s) => {
            return Err(TraceParseError {
                line: s.line,
                reason: "a trace must start with new".into(),
            })
        }
        None => {
            return Err(TraceParseError {
                line: 0,
                reason: "empty trace".into(),
            })
        }
    }
    if let Some(s) = steps.iter().skip(1).find(|s| matches!(s.action, Action::New(_))) {
        return Err(TraceParseError {
            line: s.line,
            reason: "only one new per trace".into(),
        });
    }
    Ok(Trace { steps })
}

/// A trace step bound to concrete ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Command(Command),
    Inspect(MapId, BlockId),
}

fn map_id(s: &Session, r: &Ref) -> Result<MapId, String> {
    r.pick(&s.maps, |m| m.id.as_str())
        .map(|m| m.id.clone())
        .ok_or_else(|| format!("no map {r:?}"))
}

fn block_id(s: &Session, m: &Ref, b: &Ref) -> Result<(MapId, BlockId), String> {
    let map = map_id(s, m)?;
    let pool = &s.map(&map).map_err(|e| e.to_string())?.pool;
    let block = b
        .pick(pool, |x| x.id.as_str())
        .map(|x| x.id.clone())
        .ok_or_else(|| format!("no block {b:?} in {map}"))?;
    Ok((map, block))
}

/// Binds positional references against `session`. `New` is not resolvable.
pub fn resolve(action: &Action, s: &Session) -> Result<Resolved, String> {
    use Action::*;
    let c = |c: Command| Ok(Resolved::Command(c));
    match action {
        New(_) => Err("new cannot be resolved against a session".into()),
        Summarize => c(Command::Summarize),
        Resummarize(b) => c(Command::Resummarize { brief: b.clone() }),
        Confirm => c(Command::ConfirmSummary),
        Generate => c(Command::Generate),
        Transition(t) => c(Command::Transition { target: *t }),
        AddMap(mode) => c(Command::AddMap { mode: *mode }),
        RemoveMap(m) => c(Command::RemoveMap { map: map_id(s, m)? }),
        AddBlockAi(m) => c(Command::AddBlockAi { map: map_id(s, m)? }),
        AddBlock(m, text) => c(Command::AddBlockManual {
            map: map_id(s, m)?,
            text: text.clone(),
        }),
        EditBlock(m, b, text) => {
            let (map, block) = block_id(s, m, b)?;
            c(Command::EditBlock {
                map,
                block,
                text: text.clone(),
            })
        }
        DeleteBlock(m, b) => {
            let (map, block) = block_id(s, m, b)?;
            c(Command::DeleteBlock { map, block })
        }
        Reenrich(m, b) => {
            let (map, block) = block_id(s, m, b)?;
            c(Command::ReenrichBlock { map, block })
        }
        Inspect(m, b) => {
            let (map, block) = block_id(s, m, b)?;
            Ok(Resolved::Inspect(map, block))
        }
        Regenerate(m) => c(Command::Regenerate { map: map_id(s, m)? }),
        CompleteMap(m) => c(Command::CompleteManualMap { map: map_id(s, m)? }),
        Finalize(m) => c(Command::Finalize { map: map_id(s, m)? }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quoted_and_repeated_args() {
        let t = parse_trace(
            "# sample\nnew topic=\"Troubles of Adult Life\" supplement=\"a b\" supplement=c\n\nadd_block map=3 text=\"say \\\"hi\\\"\"\n",
        )
        .unwrap();
        assert_eq!(t.steps.len(), 2);
        match &t.steps[0].action {
            Action::New(b) => {
                assert_eq!(b.topic, "Troubles of Adult Life");
                assert_eq!(b.supplements, vec!["a b", "c"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(t.steps[1].line, 4);
        assert_eq!(t.steps[1].action, Action::AddBlock(Ref::Index(3), "say \"hi\"".into()));
    }

    #[test]
    fn unknown_command_reports_line() {
        let err = parse_trace("new topic=x\nsummarize\nmerge_ideas map=1\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.to_string().starts_with("TraceParseError: line 3"));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_trace("summarize").unwrap_err().line, 1);
        assert_eq!(parse_trace("new topic=x\nnew topic=y").unwrap_err().line, 2);
        assert!(parse_trace("new topic=x extra=1").is_err());
        assert!(parse_trace("new topic=\"x").is_err());
        assert!(parse_trace("new topic=x\nregenerate").is_err());
        assert!(parse_trace("").is_err());
    }

    #[test]
    fn refs() {
        assert_eq!(Ref::parse("last"), Ref::Last);
        assert_eq!(Ref::parse("2"), Ref::Index(2));
        assert_eq!(Ref::parse("0"), Ref::Id("0".into()));
        assert_eq!(Ref::parse("map-7"), Ref::Id("map-7".into()));
    }
}
