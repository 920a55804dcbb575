//! Replays a [`Trace`] through the engine directly or over HTTP.

use std::time::{Duration, Instant};

use jokeasy_core::providers::{CallKind, ProviderCallRecord};
use jokeasy_core::{
    check_invariants, execute, BlockId, Command, EchoAssistantView, Engine, EngineConfig, MapId, Session, TopicBrief,
    Violation,
};
use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;

use crate::trace::{resolve, Action, Resolved, Trace, TraceParseError};
use crate::wire::{
    AddMapBody, CreateSession, ErrorBody, ErrorEnvelope, FinalizeBody, Job, JobStatus, TextBody, TransitionBody,
};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Parse(#[from] TraceParseError),
    #[error("line {line}: {reason}")]
    Resolve { line: usize, reason: String },
    #[error("line {line}: {code}: {message}")]
    Command { line: usize, code: String, message: String },
    #[error("line {line}: ScriptExhausted: the fixture ran out of replies")]
    ScriptExhausted { line: usize },
    #[error("transport: {0}")]
    Transport(String),
}

/// How a replay reaches the engine.
pub trait Executor {
    fn create(&mut self, brief: &TopicBrief, config: &EngineConfig) -> Result<Session, ErrorBody>;
    fn execute(&mut self, session: &Session, command: &Command) -> Result<Session, ErrorBody>;
    fn inspect(&mut self, session: &Session, map: &MapId, block: &BlockId) -> Result<EchoAssistantView, ErrorBody>;
    fn audit(&mut self, session: &Session) -> Result<Vec<ProviderCallRecord>, ErrorBody>;
}

pub struct Direct<'a> {
    pub engine: &'a Engine,
}

impl Executor for Direct<'_> {
    fn create(&mut self, brief: &TopicBrief, config: &EngineConfig) -> Result<Session, ErrorBody> {
        self.engine
            .create_session(brief.clone(), config.clone())
            .map_err(|e| ErrorBody::from(&e))
    }

    fn execute(&mut self, session: &Session, command: &Command) -> Result<Session, ErrorBody> {
        execute(self.engine, session, command)
            .map(|x| x.session)
            .map_err(|e| ErrorBody::from(&e))
    }

    fn inspect(&mut self, session: &Session, map: &MapId, block: &BlockId) -> Result<EchoAssistantView, ErrorBody> {
        jokeasy_core::canvas::inspect_block(session, map, block).map_err(|e| ErrorBody::from(&e))
    }

    fn audit(&mut self, session: &Session) -> Result<Vec<ProviderCallRecord>, ErrorBody> {
        self.engine.audit_log(&session.id).map_err(|e| ErrorBody::from(&e))
    }
}

/// Talks to a running service. Jobs are polled to completion before the
/// next step, so the service sees the same order as a direct replay.
pub struct Http {
    base: String,
    client: Client,
    pub poll_interval: Duration,
    pub job_timeout: Duration,
}

fn transport(e: impl std::fmt::Display) -> ErrorBody {
    ErrorBody {
        code: "Transport".into(),
        message: e.to_string(),
    }
}

enum Reply {
    Session(Session),
    Job(Job),
}

impl Http {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            client: Client::new(),
            poll_interval: Duration::from_millis(2),
            job_timeout: Duration::from_secs(60),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<(u16, T), ErrorBody> {
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        let body = resp.bytes().map_err(transport)?;
        if !status.is_success() {
            return Err(serde_json::from_slice::<ErrorEnvelope>(&body)
                .map(|e| e.error)
                .unwrap_or_else(|_| transport(format!("{status}: {}", String::from_utf8_lossy(&body)))));
        }
        serde_json::from_slice(&body).map(|v| (status.as_u16(), v)).map_err(transport)
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ErrorBody> {
        self.send(self.client.get(self.url(path))).map(|(_, v)| v)
    }

    fn reply(&self, req: RequestBuilder) -> Result<Reply, ErrorBody> {
        let (status, v): (u16, serde_json::Value) = self.send(req)?;
        if status == 202 {
            serde_json::from_value(v).map(Reply::Job).map_err(transport)
        } else {
            serde_json::from_value(v).map(Reply::Session).map_err(transport)
        }
    }

    fn wait(&self, job: Job) -> Result<Job, ErrorBody> {
        let start = Instant::now();
        let mut job = job;
        while !job.status.is_terminal() {
            if start.elapsed() > self.job_timeout {
                return Err(transport(format!("{} did not finish", job.id)));
            }
            std::thread::sleep(self.poll_interval);
            job = self.get(&format!("/jobs/{}", job.id))?;
        }
        Ok(job)
    }
}

impl Executor for Http {
    fn create(&mut self, brief: &TopicBrief, config: &EngineConfig) -> Result<Session, ErrorBody> {
        let body = CreateSession {
            brief: brief.clone(),
            config: Some(config.clone()),
        };
        self.send(self.client.post(self.url("/sessions")).json(&body)).map(|(_, s)| s)
    }

    fn execute(&mut self, session: &Session, command: &Command) -> Result<Session, ErrorBody> {
        use Command::*;
        let s = format!("/sessions/{}", session.id);
        let m = |map: &MapId| format!("{s}/maps/{map}");
        let b = |map: &MapId, block: &BlockId| format!("{s}/maps/{map}/blocks/{block}");
        let c = &self.client;
        let req = match command {
            Summarize => c.post(self.url(&format!("{s}/summary"))),
            Resummarize { brief } => c.post(self.url(&format!("{s}/summary/regenerate"))).json(brief),
            ConfirmSummary => c.post(self.url(&format!("{s}/summary/confirm"))),
            Generate => c.post(self.url(&format!("{s}/generate"))),
            Transition { target } => c
                .post(self.url(&format!("{s}/transition")))
                .json(&TransitionBody { target: *target }),
            AddMap { mode } => c.post(self.url(&format!("{s}/maps"))).json(&AddMapBody { mode: *mode }),
            RemoveMap { map } => c.delete(self.url(&m(map))),
            AddBlockAi { map } => c.post(self.url(&format!("{}/blocks/ai", m(map)))),
            AddBlockManual { map, text } => c
                .post(self.url(&format!("{}/blocks", m(map))))
                .json(&TextBody { text: text.clone() }),
            EditBlock { map, block, text } => c.patch(self.url(&b(map, block))).json(&TextBody { text: text.clone() }),
            DeleteBlock { map, block } => c.delete(self.url(&b(map, block))),
            ReenrichBlock { map, block } => c.post(self.url(&format!("{}/reenrich", b(map, block)))),
            Regenerate { map } => c.post(self.url(&format!("{}/regenerate", m(map)))),
            CompleteManualMap { map } => c.post(self.url(&format!("{}/complete", m(map)))),
            Finalize { map } => c
                .post(self.url(&format!("{s}/finalize")))
                .json(&FinalizeBody { map: map.clone() }),
        };
        match self.reply(req)? {
            Reply::Session(s) => Ok(s),
            Reply::Job(job) => {
                let job = self.wait(job)?;
                match (job.status, job.command, job.error) {
                    (JobStatus::Failed, None, Some(e)) => Err(e),
                    _ => self.get(&s),
                }
            }
        }
    }

    fn inspect(&mut self, session: &Session, map: &MapId, block: &BlockId) -> Result<EchoAssistantView, ErrorBody> {
        self.get(&format!("/sessions/{}/maps/{map}/blocks/{block}/echo", session.id))
    }

    fn audit(&mut self, session: &Session) -> Result<Vec<ProviderCallRecord>, ErrorBody> {
        self.get(&format!("/sessions/{}/audit", session.id))
    }
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub session: Session,
    pub digest: String,
    pub inspections: Vec<EchoAssistantView>,
    pub lm_calls: usize,
    pub search_calls: usize,
    pub violations: Vec<Violation>,
    /// One line per step.
    pub log: Vec<String>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut out = self.log.join("\n");
        let s = &self.session;
        out.push_str(&format!("\nstage {}\nmaps {}\n", s.stage.as_str(), s.maps.len()));
        if let Some(m) = s.final_map_id.as_ref().and_then(|id| s.map(id).ok()) {
            out.push_str(&format!(
                "final {} version {} of {}\n",
                m.id,
                m.current_version,
                m.prototypes.len()
            ));
        }
        out.push_str(&format!("lm_calls {}\nsearch_calls {}\n", self.lm_calls, self.search_calls));
        if self.violations.is_empty() {
            out.push_str("invariants ok\n");
        } else {
            for v in &self.violations {
                out.push_str(&format!("violation {v}\n"));
            }
        }
        out.push_str(&format!("digest {}\n", self.digest));
        out
    }
}

fn exhausted(records: &[ProviderCallRecord]) -> bool {
    records
        .iter()
        .any(|r| r.error.as_deref().is_some_and(|e| e.contains("ScriptExhausted")))
}

fn command_error(line: usize, e: ErrorBody) -> ReplayError {
    if e.code == "Transport" {
        ReplayError::Transport(e.message)
    } else {
        ReplayError::Command {
            line,
            code: e.code,
            message: e.message,
        }
    }
}

/// Runs every step, checking invariants after each one. A rejected command
/// or an exhausted fixture stops the replay.
pub fn replay(trace: &Trace, config: &EngineConfig, exec: &mut dyn Executor) -> Result<ReplayReport, ReplayError> {
    let mut steps = trace.steps.iter();
    let first = steps.next().expect("parsed traces start with new");
    let Action::New(brief) = &first.action else {
        unreachable!("parsed traces start with new")
    };
    let mut session = exec.create(brief, config).map_err(|e| command_error(first.line, e))?;
    let mut log = vec![format!("line {} new {}", first.line, session.id)];
    let mut violations = check_invariants(&session);
    let mut inspections = Vec::new();
    for step in steps {
        let resolved = resolve(&step.action, &session).map_err(|reason| ReplayError::Resolve {
            line: step.line,
            reason,
        })?;
        match resolved {
            Resolved::Inspect(map, block) => {
                let view = exec
                    .inspect(&session, &map, &block)
                    .map_err(|e| command_error(step.line, e))?;
                log.push(format!(
                    "line {} inspect {map}/{block} sources {}",
                    step.line,
                    view.evidence.len()
                ));
                inspections.push(view);
            }
            Resolved::Command(cmd) => {
                let result = exec.execute(&session, &cmd);
                let records = exec.audit(&session).map_err(|e| command_error(step.line, e))?;
                if exhausted(&records) {
                    return Err(ReplayError::ScriptExhausted { line: step.line });
                }
                session = result.map_err(|e| command_error(step.line, e))?;
                violations.extend(check_invariants(&session));
                log.push(format!("line {} {} ok {}", step.line, op_name(&cmd), session.stage.as_str()));
            }
        }
    }
    let records = exec.audit(&session).map_err(|e| command_error(0, e))?;
    let lm_calls = records.iter().filter(|r| r.kind == CallKind::Lm).count();
    Ok(ReplayReport {
        digest: session.digest(),
        inspections,
        lm_calls,
        search_calls: records.len() - lm_calls,
        violations,
        log,
        session,
    })
}

fn op_name(cmd: &Command) -> String {
    serde_json::to_value(cmd)
        .ok()
        .and_then(|v| v.get("op").and_then(|o| o.as_str()).map(str::to_owned))
        .unwrap_or_default()
}

pub const BUNDLED_TRACE: &str = include_str!("../fixtures/adult_life.trace");
pub const BUNDLED_FIXTURE: &str = include_str!("../fixtures/adult_life.fixture");
