//! Terminal loop over one governed session. Reflection verbs map 1:1 onto
//! [`ReflectionAction`] variants.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use penloop_core::backend::{Backend, GenerationRequest};
use penloop_core::config::Settings;
use penloop_core::ledger::{verify_jsonl, EventSink, FileStore, Payload};
use penloop_core::protocol::{
    AbstractionInput, Articulation, FrictionCue, GovernedSession, ProtocolError, RationaleSummary,
    ReflectionAction, SessionConfig, UncertaintyLevel, UncertaintySpan,
};
use penloop_core::{IdSource, Phase, SystemClock, UuidIds};

const HELP: &str = "\
verbs:  :accept                      accept the current answer
        :challenge <counter-evidence>
        :revise <new draft>
        :tag <start>-<end> <low|medium|high> [event]
        :branch <alternative draft>
        :counterexample              ask the model for a counterexample
        :finalize <conclusion> [| <uncertainty statement>]
        :abort [reason]   :gates   :help   :quit";

enum Verb {
    Reflect(ReflectionAction),
    Finalize(RationaleSummary),
    Abort(String),
    Gates,
    Help,
    Quit,
}

/// Latest articulation's seq, the default target for `:tag`.
fn latest_articulation(session: &GovernedSession) -> Option<u64> {
    session
        .events()
        .iter()
        .rev()
        .find(|e| matches!(e.payload, Payload::Articulation(_)))
        .map(|e| e.seq)
}

fn parse_tag(args: &str, default_target: Option<u64>) -> Result<ReflectionAction, String> {
    let usage = "usage: :tag <start>-<end> <low|medium|high> [event]";
    let mut parts = args.split_whitespace();
    let (range, level) = (parts.next().ok_or(usage)?, parts.next().ok_or(usage)?);
    let (start, end) = range.split_once('-').ok_or(usage)?;
    let start: u64 = start.parse().map_err(|_| format!("bad span start {start:?}"))?;
    let end: u64 = end.parse().map_err(|_| format!("bad span end {end:?}"))?;
    let level: UncertaintyLevel = level.parse().map_err(|_| format!("bad level {level:?}"))?;
    let target_event = match parts.next() {
        Some(seq) => seq.parse().map_err(|_| format!("bad event {seq:?}"))?,
        None => default_target.ok_or("nothing to tag yet")?,
    };
    Ok(ReflectionAction::TagUncertainty {
        span: UncertaintySpan::new(start, end, level),
        target_event,
    })
}

fn parse_verb(line: &str, session: &GovernedSession) -> Result<Verb, String> {
    let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    let text = |what: &str| {
        if rest.is_empty() {
            Err(format!("{verb} needs {what}"))
        } else {
            Ok(rest.to_string())
        }
    };
    Ok(match verb {
        ":accept" => Verb::Reflect(ReflectionAction::Accept),
        ":challenge" => Verb::Reflect(ReflectionAction::Challenge {
            counter_evidence: text("counter-evidence")?,
        }),
        ":revise" => Verb::Reflect(ReflectionAction::Revise {
            new_draft: text("a new draft")?,
        }),
        ":branch" => Verb::Reflect(ReflectionAction::Branch {
            alternative_draft: text("an alternative draft")?,
        }),
        ":counterexample" => Verb::Reflect(ReflectionAction::RequestCounterexample),
        ":tag" => Verb::Reflect(parse_tag(rest, latest_articulation(session))?),
        ":finalize" => {
            let (conclusion, uncertainty) = rest.split_once('|').unwrap_or((rest, ""));
            Verb::Finalize(RationaleSummary::new(conclusion.trim()).with_uncertainty(uncertainty.trim()))
        }
        ":abort" => Verb::Abort(if rest.is_empty() { "ended at the terminal".into() } else { rest.into() }),
        ":gates" => Verb::Gates,
        ":help" => Verb::Help,
        ":quit" => Verb::Quit,
        other => return Err(format!("unknown verb {other:?}; :help lists them")),
    })
}

/// Mark uncertain spans as `[text]{level}`.
pub fn highlight(a: &Articulation) -> String {
    let mut out = String::new();
    for (i, c) in a.output_text.chars().enumerate() {
        let i = i as u64;
        for span in a.uncertainty_cues.iter().filter(|s| s.end == i && s.start < s.end) {
            out.push_str(&format!("]{{{}}}", span.level));
        }
        if a.uncertainty_cues.iter().any(|s| s.start == i && s.start < s.end) {
            out.push('[');
        }
        out.push(c);
    }
    let len = a.output_text.chars().count() as u64;
    for span in a.uncertainty_cues.iter().filter(|s| s.end == len && s.start < s.end) {
        out.push_str(&format!("]{{{}}}", span.level));
    }
    out
}

struct Repl<'a, W: Write> {
    session: GovernedSession,
    backend: Arc<dyn Backend>,
    out: &'a mut W,
}

impl<W: Write> Repl<'_, W> {
    fn say(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", text.as_ref());
    }

    fn error(&mut self, e: &ProtocolError) {
        self.say(format!("error {}: {e}", e.code()));
    }

    fn cues(&mut self, cues: &[FrictionCue]) {
        for cue in cues {
            self.say(format!("cue {}: {}", cue.cue, cue.text));
        }
    }

    fn gates(&mut self) {
        let unmet = self.session.policy_gates();
        if unmet.is_empty() {
            self.say("gates: all met");
        } else {
            let names: Vec<_> = unmet.iter().map(|g| g.as_str()).collect();
            self.say(format!("gates unmet: {}", names.join(", ")));
        }
    }

    fn articulate(&mut self) {
        let request = GenerationRequest::from_trace(self.session.events(), &self.session.session().active_branch, true);
        let articulation = match self.backend.generate(&request) {
            Ok(a) => a,
            Err(e) => {
                self.say(format!("error {}: {e}", e.code()));
                self.say("press enter to retry, or :abort");
                return;
            }
        };
        match self.session.record_articulation(articulation.clone()) {
            Ok(cues) => {
                let seq = self.session.events().len() - cues.len();
                self.say(format!("model [{seq}]: {}", highlight(&articulation)));
                self.cues(&cues);
                self.gates();
            }
            Err(e) => self.error(&e),
        }
    }

    fn prompt(&mut self) {
        let label = match self.session.session().phase {
            Phase::Abstraction => "draft> ",
            Phase::Articulation => "articulate> ",
            _ => "reflect> ",
        };
        let _ = write!(self.out, "{label}");
        let _ = self.out.flush();
    }

    /// Handle one input line; `false` ends the loop.
    fn line(&mut self, line: &str) -> bool {
        let line = line.trim();
        let phase = self.session.session().phase;
        if !line.starts_with(':') {
            match phase {
                Phase::Abstraction => {
                    match self.session.submit_abstraction(AbstractionInput::new(line)) {
                        Ok(_) => self.articulate(),
                        Err(e) => self.error(&e),
                    }
                }
                Phase::Articulation if line.is_empty() => self.articulate(),
                _ if line.is_empty() => {}
                _ => self.say("reflection needs a verb; :help lists them"),
            }
            return true;
        }
        let verb = match parse_verb(line, &self.session) {
            Ok(v) => v,
            Err(message) => {
                self.say(message);
                return true;
            }
        };
        match verb {
            Verb::Help => self.say(HELP),
            Verb::Gates => self.gates(),
            Verb::Quit => return false,
            Verb::Abort(reason) => match self.session.abort(reason) {
                Ok(_) => self.say("session aborted"),
                Err(e) => self.error(&e),
            },
            Verb::Reflect(action) => match self.session.submit_reflection(action) {
                Ok(s) if s.phase == Phase::Articulation => self.articulate(),
                Ok(_) => self.gates(),
                Err(e) => self.error(&e),
            },
            Verb::Finalize(rationale) => match self.session.request_finalization(rationale) {
                Ok(cues) => {
                    self.cues(&cues);
                    self.say("session finalized");
                }
                Err(ProtocolError::PolicyViolation { unmet, cues }) => {
                    self.cues(&cues);
                    let names: Vec<_> = unmet.iter().map(|g| g.as_str()).collect();
                    self.say(format!("error PolicyViolation: unmet gates: {}", names.join(", ")));
                }
                Err(e) => self.error(&e),
            },
        }
        !self.session.session().phase.is_terminal()
    }
}

/// Run the loop until the session ends, `:quit`, or end of input.
pub fn run(settings: &Settings, dir: &Path, input: impl BufRead, mut out: impl Write) -> u8 {
    let fail = |message: String| {
        eprintln!("penloop: {message}");
        1
    };
    let Some(backend_config) = &settings.backend else {
        return fail("no backend configured; pass --backend-script or set backend in the config".into());
    };
    let backend = match backend_config.build(settings.backend_token.clone()) {
        Ok(b) => b,
        Err(e) => return fail(format!("{}: {e}", e.code())),
    };
    let store = match FileStore::open(dir) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", e.code())),
    };
    let id = UuidIds.next_id();
    let sink: Box<dyn EventSink> = match store.create_session(&id) {
        Ok(s) => Box::new(s),
        Err(e) => return fail(format!("{}: {e}", e.code())),
    };
    let config = SessionConfig::new(settings.default_mode).with_theta(settings.theta);
    let session = match GovernedSession::create(id.clone(), config, Arc::new(SystemClock), Some(sink)) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", e.code())),
    };
    let path = store.trace_path(&id);
    let mut repl = Repl {
        session,
        backend,
        out: &mut out,
    };
    repl.say(format!(
        "session {id} ({} mode), trace {}",
        settings.default_mode,
        path.display()
    ));
    repl.say("type your draft; :help lists reflection verbs");
    repl.prompt();
    for line in input.lines() {
        let Ok(line) = line else { break };
        if !repl.line(&line) {
            break;
        }
        repl.prompt();
    }
    repl.say("");
    match std::fs::read(&path).map(|bytes| verify_jsonl(&bytes)) {
        Ok(Ok(status)) if status.is_intact() => {
            repl.say(format!("trace written to {} (chain intact)", path.display()));
            0
        }
        Ok(other) => fail(format!("trace at {} does not verify: {other:?}", path.display())),
        Err(e) => fail(format!("cannot read trace {}: {e}", path.display())),
    }
}
