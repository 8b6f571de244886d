//! Line-delimited JSON protocol over TCP exposing live sessions.
//!
//! Every message is one JSON object per line:
//! `{"version":1,"type":"<type>","session_id":"s1","payload":{...}}`.
//! `session_id` is omitted on the opening `hello`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::PhraseSet;
use crate::decoder::Decoder;
use crate::error::{Error, Result};
use crate::geometry::CalibrationProfile;
use crate::input::{GestureEvent, SensorFrame, Strategy, StrategyConfig};
use crate::session::{log_to_string, Area, Effect, MetricsReport, Mode, Session, SessionConfig};

pub const PROTOCOL_VERSION: u32 = 1;
pub const ADDR_ENV: &str = "ANKLE_KEYS_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HelloRequest {
    pub mode: Option<Mode>,
    pub strategy: Option<Strategy>,
    pub phrases: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloAck {
    pub session_id: String,
    pub protocol_version: u32,
    pub n_keys: usize,
    pub page_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockPayload {
    pub now: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PagePayload {
    pub page: usize,
    pub now: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsRequest {
    pub close: bool,
    pub include_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReply {
    pub report: Option<MetricsReport>,
    pub closed: bool,
    pub log: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub kind: String,
    pub message: String,
}

/// Full session state after a change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub cursor: Option<f64>,
    pub area: Area,
    pub pending_keys: Vec<usize>,
    pub candidate_page: usize,
    pub n_pages: usize,
    pub candidates: Vec<String>,
    pub selected_slot: Option<usize>,
    pub committed: String,
    pub phrase_index: usize,
    pub phrase: Option<String>,
    pub finished: bool,
    pub cheat_sheet_visible: bool,
    pub cheat_sheet_remaining_ms: u64,
    pub effects: Vec<Effect>,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Body {
    Hello(HelloRequest),
    HelloAck(HelloAck),
    Calibrate(CalibrationProfile),
    Frame(SensorFrame),
    EmulatedGesture(GestureEvent),
    StateSnapshot(Snapshot),
    CandidatePage(PagePayload),
    CheatSheet(ClockPayload),
    PhraseAdvance(ClockPayload),
    Metrics(MetricsRequest),
    MetricsReply(MetricsReply),
    Error(ErrorPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub body: Body,
}

impl Message {
    pub fn new(session_id: Option<String>, body: Body) -> Self {
        Message {
            version: PROTOCOL_VERSION,
            session_id,
            body,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Protocol(format!("malformed message: {e}")))
    }

    fn error(session_id: Option<String>, kind: &str, message: impl Into<String>) -> Self {
        Message::new(
            session_id,
            Body::Error(ErrorPayload {
                kind: kind.to_string(),
                message: message.into(),
            }),
        )
    }
}

struct Entry {
    session: Session,
    snapshot_seq: u64,
    clock: u64,
}

impl Entry {
    fn snapshot(&mut self, effects: Vec<Effect>) -> Snapshot {
        self.snapshot_seq += 1;
        let st = self.session.state();
        Snapshot {
            seq: self.snapshot_seq,
            cursor: st.cursor.map(|c| c.value()),
            area: st.area,
            pending_keys: st.pending_keys(),
            candidate_page: st.candidate_page,
            n_pages: st.candidates.as_ref().map_or(0, |c| c.n_pages()),
            candidates: st.current_page(),
            selected_slot: st.selected_slot,
            committed: st.transcribed(),
            phrase_index: st.phrase_index,
            phrase: self.session.current_phrase().map(str::to_string),
            finished: self.session.is_finished(),
            cheat_sheet_visible: st.cheat_sheet_visible(self.clock),
            cheat_sheet_remaining_ms: st.cheat_sheet_remaining_ms(self.clock),
            effects,
            metrics: self.session.metrics().ok(),
        }
    }
}

/// Shared read-only resources plus the live sessions.
pub struct Registry {
    decoder: Arc<Decoder>,
    phrases: PhraseSet,
    config: SessionConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
}

impl Registry {
    pub fn new(decoder: Arc<Decoder>, phrases: PhraseSet, config: SessionConfig) -> Self {
        Registry {
            decoder,
            phrases,
            config,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn n_sessions(&self) -> usize {
        self.sessions.lock().expect("registry lock").len()
    }

    fn hello(&self, req: HelloRequest) -> Result<Message> {
        let mut cfg = self.config;
        if let Some(m) = req.mode {
            cfg.mode = m;
        }
        if let Some(s) = req.strategy {
            cfg.strategy = StrategyConfig { strategy: s, ..cfg.strategy };
        }
        let phrases = match req.phrases {
            Some(p) => PhraseSet::new(&p)?,
            None => self.phrases.clone(),
        };
        let session = Session::new(cfg, self.decoder.clone(), phrases)?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        self.sessions.lock().expect("registry lock").insert(
            id.clone(),
            Arc::new(Mutex::new(Entry {
                session,
                snapshot_seq: 0,
                clock: 0,
            })),
        );
        info!("opened session {id}");
        Ok(Message::new(
            Some(id.clone()),
            Body::HelloAck(HelloAck {
                session_id: id,
                protocol_version: PROTOCOL_VERSION,
                n_keys: self.decoder.keyboard().n_keys(),
                page_size: self.decoder.page_size(),
            }),
        ))
    }

    /// Responses to one client message. Failures become `error` messages and
    /// leave the session as it was.
    pub fn handle(&self, msg: Message) -> Vec<Message> {
        let sid = msg.session_id.clone();
        if msg.version != PROTOCOL_VERSION {
            return vec![Message::error(sid, "version", format!("unsupported protocol version {}", msg.version))];
        }
        if let Body::Hello(req) = msg.body {
            return vec![self.hello(req).unwrap_or_else(|e| Message::error(None, e.kind(), e.to_string()))];
        }
        let Some(id) = sid.clone() else {
            return vec![Message::error(None, "unknown_session", "session_id is required")];
        };
        let Some(entry) = self.sessions.lock().expect("registry lock").get(&id).cloned() else {
            return vec![Message::error(sid, "unknown_session", format!("no session {id:?}"))];
        };
        let mut entry = entry.lock().expect("session lock");
        match self.dispatch(&mut entry, msg.body) {
            Ok(Some(body)) => {
                if let Body::MetricsReply(MetricsReply { closed: true, .. }) = &body {
                    self.sessions.lock().expect("registry lock").remove(&id);
                    info!("closed session {id}");
                }
                vec![Message::new(sid, body)]
            }
            Ok(None) => vec![],
            Err(e) => vec![Message::error(sid, e.kind(), e.to_string())],
        }
    }

    fn dispatch(&self, entry: &mut Entry, body: Body) -> Result<Option<Body>> {
        let effects = match body {
            Body::Calibrate(cal) => {
                entry.session.calibrate(cal)?;
                vec![]
            }
            Body::Frame(f) => {
                let out = entry.session.process_frame(&f)?;
                entry.clock = entry.clock.max(f.timestamp_ms);
                out.into_iter().map(|(_, e)| e).collect()
            }
            Body::EmulatedGesture(ev) => {
                let e = entry.session.apply_event(&ev)?;
                entry.clock = entry.clock.max(ev.timestamp);
                vec![e]
            }
            Body::CandidatePage(p) => {
                entry.session.select_page(p.page, p.now)?;
                entry.clock = entry.clock.max(p.now);
                vec![]
            }
            Body::CheatSheet(c) => {
                entry.session.request_cheat_sheet(c.now)?;
                entry.clock = entry.clock.max(c.now);
                vec![]
            }
            Body::PhraseAdvance(c) => {
                entry.session.advance_phrase(c.now)?;
                entry.clock = entry.clock.max(c.now);
                vec![]
            }
            Body::Metrics(req) => {
                return Ok(Some(Body::MetricsReply(MetricsReply {
                    report: entry.session.metrics().ok(),
                    closed: req.close,
                    log: req.include_log.then(|| log_to_string(entry.session.log())),
                })));
            }
            Body::Hello(_) => unreachable!("handled by the caller"),
            Body::HelloAck(_) | Body::StateSnapshot(_) | Body::MetricsReply(_) | Body::Error(_) => {
                return Err(Error::Protocol("server-only message type".into()));
            }
        };
        Ok(Some(Body::StateSnapshot(entry.snapshot(effects))))
    }

    /// Parses one line and returns the response lines.
    pub fn handle_line(&self, line: &str) -> Vec<String> {
        let out = match Message::from_line(line) {
            Ok(m) => self.handle(m),
            Err(e) => vec![Message::error(None, "malformed", e.to_string())],
        };
        out.iter().map(Message::to_line).collect()
    }
}

fn serve_connection(registry: Arc<Registry>, stream: TcpStream) -> std::io::Result<()> {
    let peer = stream.peer_addr()?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut out = String::new();
        for reply in registry.handle_line(&line) {
            out.push_str(&reply);
            out.push('\n');
        }
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
    info!("connection from {peer} closed");
    Ok(())
}

pub struct Server {
    listener: TcpListener,
    registry: Arc<Registry>,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, registry: Registry) -> Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            registry: Arc::new(registry),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn registry(&self) -> Arc<Registry> {
        self.registry.clone()
    }

    /// Accepts connections forever, one thread each.
    pub fn run(self) -> Result<()> {
        info!("listening on {}", self.local_addr()?);
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let registry = self.registry.clone();
            thread::spawn(move || {
                if let Err(e) = serve_connection(registry, stream) {
                    warn!("connection error: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> thread::JoinHandle<Result<()>> {
        thread::spawn(move || self.run())
    }
}

/// Address from the flag, then the environment, then the default.
pub fn resolve_addr(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(ADDR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

/// Minimal blocking client used by tests and scripts.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
        })
    }

    /// Sends one message and reads exactly one reply.
    pub fn request(&mut self, msg: &Message) -> Result<Message> {
        let mut line = msg.to_line();
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(Error::Protocol("server closed the connection".into()));
        }
        Message::from_line(line.trim_end())
    }
}
