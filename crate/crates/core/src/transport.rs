//! Wire protocol: one JSON message per line, UTF-8, keys sorted.
//!
//! Every request carries an id that increases per connection; the answer
//! carries the same id. A connection handler is a plain state machine
//! ([`Handler`]) so the TCP server and any other byte transport (a browser
//! socket bridge, for one) share it.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::centre::{Ack, CentreState, SkillPacket};
use crate::error::{Error, Result};
use crate::rules::{induce, RankedRule, RuleBase, RuleContext};
use crate::session::ModuleSession;
use crate::world::{Action, Event, EventKind, ObjectKind, Percept};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Body {
    Hello {
        module_id: String,
        protocol_version: u32,
    },
    Submit(SkillPacket),
    Ack {
        packet_id: String,
        status: Ack,
    },
    Query {
        context: RuleContext,
        goal_outcomes: BTreeSet<EventKind>,
    },
    Rules {
        rules: Vec<RankedRule>,
    },
    /// `object` is an opaque token naming the hidden object: `shape-<id>`.
    Open {
        object: String,
        seed: u64,
    },
    State(StateBody),
    Act {
        action: Action,
    },
    Bye {},
    Err {
        code: String,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateBody {
    pub session: String,
    pub episode: u32,
    pub tick: u32,
    pub percepts: Vec<Percept>,
    pub events: Vec<Event>,
    pub attached: bool,
    pub power: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl Message {
    pub fn new(id: u64, body: Body) -> Message {
        Message { id, body }
    }

    pub fn err(id: u64, code: &str, detail: impl Into<String>) -> Message {
        Message::new(
            id,
            Body::Err {
                code: code.into(),
                detail: detail.into(),
            },
        )
    }
}

/// Object token for OPEN.
pub fn object_token(kind: ObjectKind) -> String {
    format!("shape-{}", kind.shape_id())
}

fn parse_object_token(token: &str) -> Option<ObjectKind> {
    token
        .strip_prefix("shape-")
        .and_then(|id| id.parse().ok())
        .and_then(ObjectKind::from_shape)
}

/// One frame, newline included.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut line = crate::canonical::to_string(msg).into_bytes();
    line.push(b'\n');
    line
}

/// Decode one frame. A trailing newline is optional; anything else after
/// the document is an error. Offsets are relative to the start of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if let Some(pos) = body.iter().position(|&b| b == b'\n') {
        return Err(Error::Protocol {
            offset: pos,
            reason: "embedded newline".into(),
        });
    }
    let text = std::str::from_utf8(body).map_err(|e| Error::Protocol {
        offset: e.valid_up_to(),
        reason: "invalid UTF-8".into(),
    })?;
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Protocol {
        // single line: the column is the 1-based byte position
        offset: e.column().saturating_sub(1),
        reason: e.to_string(),
    })?;
    serde_json::from_value(value).map_err(|e| Error::Protocol {
        offset: 0,
        reason: e.to_string(),
    })
}

/// Best-effort id of an undecodable frame so the error answer can carry it.
fn salvage_id(bytes: &[u8]) -> u64 {
    serde_json::from_slice::<serde_json::Value>(bytes)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_u64()))
        .unwrap_or(0)
}

/// Splits a byte stream into frames, tracking absolute offsets. A bad frame
/// is reported and reading resumes at the next newline.
pub struct FrameReader<R> {
    inner: R,
    offset: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(inner: R) -> FrameReader<R> {
        FrameReader {
            inner,
            offset: 0,
            buf: Vec::new(),
        }
    }

    /// Next frame, or `None` at a clean end of stream. The raw bytes come
    /// back with decode errors so callers can inspect them.
    pub fn next_frame(&mut self) -> Option<std::result::Result<Message, (Error, Vec<u8>)>> {
        self.buf.clear();
        let start = self.offset;
        let n = match self.inner.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(n) => n,
            Err(e) => return Some(Err((Error::Io(e), Vec::new()))),
        };
        self.offset += n;
        if self.buf.last() != Some(&b'\n') {
            return Some(Err((
                Error::Protocol {
                    offset: self.offset,
                    reason: "truncated frame".into(),
                },
                self.buf.clone(),
            )));
        }
        Some(decode(&self.buf).map_err(|e| {
            let e = match e {
                Error::Protocol { offset, reason } => Error::Protocol {
                    offset: start + offset,
                    reason,
                },
                other => other,
            };
            (e, self.buf.clone())
        }))
    }
}

/// Per-connection protocol state.
pub struct Handler {
    centre: Arc<Mutex<CentreState>>,
    greeted: bool,
    session: Option<ModuleSession>,
    peer: String,
}

impl Handler {
    pub fn new(centre: Arc<Mutex<CentreState>>, peer: impl Into<String>) -> Handler {
        Handler {
            centre,
            greeted: false,
            session: None,
            peer: peer.into(),
        }
    }

    /// The session opened on this connection, if any.
    pub fn session(&self) -> Option<&ModuleSession> {
        self.session.as_ref()
    }

    fn state(&self, id: u64, events: Vec<Event>) -> Message {
        let s = self.session.as_ref().expect("session open");
        Message::new(
            id,
            Body::State(StateBody {
                session: s.session_id().to_string(),
                episode: s.episode_index(),
                tick: s.tick(),
                percepts: s.percepts(),
                events,
                attached: s.attached(),
                power: s.power(),
            }),
        )
    }

    /// Answer one request. The flag asks the transport to close.
    pub fn handle(&mut self, msg: Message) -> (Message, bool) {
        let id = msg.id;
        if !self.greeted && !matches!(msg.body, Body::Hello { .. } | Body::Bye {}) {
            return (
                Message::err(id, "hello-required", "send HELLO first"),
                false,
            );
        }
        match msg.body {
            Body::Hello {
                module_id,
                protocol_version,
            } => {
                if protocol_version != PROTOCOL_VERSION {
                    return (
                        Message::err(
                            id,
                            "unsupported-version",
                            format!(
                                "server speaks version {PROTOCOL_VERSION}, got {protocol_version}"
                            ),
                        ),
                        false,
                    );
                }
                self.greeted = true;
                self.peer = module_id;
                let reply = Body::Hello {
                    module_id: "centre".into(),
                    protocol_version: PROTOCOL_VERSION,
                };
                (Message::new(id, reply), false)
            }
            Body::Submit(packet) => {
                let packet_id = packet.packet_id.clone();
                let result = self.centre.lock().expect("centre lock").submit(packet);
                match result {
                    Ok(status) => (Message::new(id, Body::Ack { packet_id, status }), false),
                    Err(e @ Error::MalformedPacket(_)) => {
                        (Message::err(id, "malformed-packet", e.to_string()), false)
                    }
                    Err(e) => (Message::err(id, "submit-failed", e.to_string()), false),
                }
            }
            Body::Query {
                context,
                goal_outcomes,
            } => {
                // With a session open the user is asking about their own play.
                let rules = match &self.session {
                    Some(s) => {
                        let mut eps = s.export_episodes();
                        eps.push(crate::session::Episode {
                            module_id: s.module_id().into(),
                            episode: s.episode_index(),
                            seed: 0,
                            status: None,
                            steps: s.current_steps().to_vec(),
                        });
                        induce(&eps).query(&context, &goal_outcomes)
                    }
                    None => self
                        .centre
                        .lock()
                        .expect("centre lock")
                        .query(&context, &goal_outcomes),
                };
                (Message::new(id, Body::Rules { rules }), false)
            }
            Body::Open { object, seed } => {
                let Some(kind) = parse_object_token(&object) else {
                    return (Message::err(id, "unknown-object", object), false);
                };
                if let Some(s) = self.session.as_mut() {
                    s.close();
                }
                let module_id = format!("{}-{}", self.peer, object);
                self.session = Some(ModuleSession::open(module_id, kind, seed));
                (self.state(id, Vec::new()), false)
            }
            Body::Act { action } => {
                let Some(s) = self.session.as_mut() else {
                    return (Message::err(id, "no-session", "send OPEN first"), false);
                };
                match s.act(action) {
                    Ok((_, events)) => (self.state(id, events), false),
                    Err(e) => (Message::err(id, "session-closed", e.to_string()), false),
                }
            }
            Body::Bye {} => {
                if let Some(s) = self.session.as_mut() {
                    s.close();
                }
                (Message::new(id, Body::Bye {}), true)
            }
            Body::Ack { .. } | Body::Rules { .. } | Body::State(_) | Body::Err { .. } => (
                Message::err(id, "unexpected-type", "responses are not requests"),
                false,
            ),
        }
    }

    /// Answer an undecodable frame.
    pub fn reject(&self, error: &Error, raw: &[u8]) -> Message {
        let code = match error {
            Error::Protocol { reason, .. } if reason.contains("unknown variant") => "unknown-type",
            _ => "malformed-frame",
        };
        Message::err(salvage_id(raw), code, error.to_string())
    }
}

/// Serve one stream until BYE or end of input. Errors on one connection
/// never reach another.
pub fn serve_stream<R: BufRead, W: Write>(
    mut handler: Handler,
    input: R,
    mut output: W,
) -> Result<Handler> {
    let mut frames = FrameReader::new(input);
    while let Some(frame) = frames.next_frame() {
        let (reply, close) = match frame {
            Ok(msg) => handler.handle(msg),
            Err((Error::Io(e), _)) => return Err(Error::Io(e)),
            Err((e, raw)) => (handler.reject(&e, &raw), false),
        };
        output.write_all(&encode(&reply))?;
        output.flush()?;
        if close {
            break;
        }
    }
    if let Some(s) = handler.session.as_mut() {
        s.close();
    }
    Ok(handler)
}

/// A running TCP listener.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    /// Bind and start accepting; each connection gets its own thread.
    pub fn spawn(addr: impl ToSocketAddrs, centre: Arc<Mutex<CentreState>>) -> Result<Server> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let centre = centre.clone();
                std::thread::spawn(move || {
                    let peer = stream
                        .peer_addr()
                        .map(|a| a.to_string())
                        .unwrap_or_default();
                    let Ok(reader) = stream.try_clone() else {
                        return;
                    };
                    let _ =
                        serve_stream(Handler::new(centre, peer), BufReader::new(reader), stream);
                });
            }
        });
        Ok(Server {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Block until the listener stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Stop accepting connections. Open connections run to completion.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Blocking request/response client.
pub struct Client {
    reader: FrameReader<BufReader<TcpStream>>,
    writer: TcpStream,
    next_id: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Client> {
        let stream = TcpStream::connect(addr)?;
        Ok(Client {
            reader: FrameReader::new(BufReader::new(stream.try_clone()?)),
            writer: stream,
            next_id: 1,
        })
    }

    /// Connect and greet.
    pub fn open(addr: impl ToSocketAddrs, module_id: &str) -> Result<Client> {
        let mut c = Client::connect(addr)?;
        c.request(Body::Hello {
            module_id: module_id.into(),
            protocol_version: PROTOCOL_VERSION,
        })?;
        Ok(c)
    }

    /// Send one request and wait for its answer. ERR answers become
    /// [`Error::Remote`].
    pub fn request(&mut self, body: Body) -> Result<Body> {
        let id = self.next_id;
        self.next_id += 1;
        self.writer.write_all(&encode(&Message::new(id, body)))?;
        self.writer.flush()?;
        let reply = match self.reader.next_frame() {
            None => {
                return Err(Error::Protocol {
                    offset: 0,
                    reason: "connection closed".into(),
                })
            }
            Some(Ok(m)) => m,
            Some(Err((e, _))) => return Err(e),
        };
        if reply.id != id {
            return Err(Error::Protocol {
                offset: 0,
                reason: format!("answer id {} for request {id}", reply.id),
            });
        }
        match reply.body {
            Body::Err { code, detail } => Err(Error::Remote { code, detail }),
            body => Ok(body),
        }
    }

    pub fn submit(&mut self, packet: SkillPacket) -> Result<Ack> {
        match self.request(Body::Submit(packet))? {
            Body::Ack { status, .. } => Ok(status),
            other => Err(unexpected(&other)),
        }
    }

    pub fn query(
        &mut self,
        context: RuleContext,
        goals: BTreeSet<EventKind>,
    ) -> Result<Vec<RankedRule>> {
        match self.request(Body::Query {
            context,
            goal_outcomes: goals,
        })? {
            Body::Rules { rules } => Ok(rules),
            other => Err(unexpected(&other)),
        }
    }

    pub fn open_session(&mut self, kind: ObjectKind, seed: u64) -> Result<StateBody> {
        match self.request(Body::Open {
            object: object_token(kind),
            seed,
        })? {
            Body::State(s) => Ok(s),
            other => Err(unexpected(&other)),
        }
    }

    pub fn act(&mut self, action: Action) -> Result<StateBody> {
        match self.request(Body::Act { action })? {
            Body::State(s) => Ok(s),
            other => Err(unexpected(&other)),
        }
    }

    pub fn bye(mut self) -> Result<()> {
        self.request(Body::Bye {})?;
        Ok(())
    }
}

fn unexpected(body: &Body) -> Error {
    Error::Protocol {
        offset: 0,
        reason: format!("unexpected answer {}", crate::canonical::to_string(body)),
    }
}

/// Rebuild a centre's whole base by querying every context for every
/// outcome. Counts survive the trip exactly: confidence is `hits/support`.
pub fn fetch_base(client: &mut Client) -> Result<RuleBase> {
    let goals: BTreeSet<EventKind> = EventKind::ALL.into_iter().collect();
    let mut rb = RuleBase::new();
    for context in RuleContext::all() {
        for r in client.query(context, goals.clone())? {
            let hits = (r.confidence * r.support as f64).round() as u64;
            if hits > 0 {
                rb.insert(context, r.action, r.outcome, r.support, hits)?;
            }
        }
    }
    Ok(rb)
}
