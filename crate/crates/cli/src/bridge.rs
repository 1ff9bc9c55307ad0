//! Browser bridge: the transport protocol over WebSocket. Each text message
//! carries one frame in exactly the TCP wire format; the same per-connection
//! handler answers it.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use cognite::centre::CentreState;
use cognite::transport::{decode, encode, Handler};
use tungstenite::{accept, Message as WsMessage};

pub fn bind(addr: &str) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr)
}

/// Accept browser connections forever, one thread each.
pub fn serve(listener: TcpListener, centre: Arc<Mutex<CentreState>>) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let centre = centre.clone();
        std::thread::spawn(move || {
            let peer = stream
                .peer_addr()
                .map(|a: SocketAddr| a.to_string())
                .unwrap_or_default();
            if let Err(e) = serve_socket(stream, Handler::new(centre, peer.clone())) {
                eprintln!("bridge {peer}: {e}");
            }
        });
    }
}

fn serve_socket(stream: TcpStream, mut handler: Handler) -> Result<(), Box<tungstenite::Error>> {
    let mut ws = accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    loop {
        let text = match ws.read()? {
            WsMessage::Text(t) => t,
            WsMessage::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            WsMessage::Close(_) => return Ok(()),
            _ => continue,
        };
        // A message may hold several frames; answer each in order.
        for line in text.split_terminator('\n') {
            let (reply, close) = match decode(line.as_bytes()) {
                Ok(msg) => handler.handle(msg),
                Err(e) => (handler.reject(&e, line.as_bytes()), false),
            };
            let frame = String::from_utf8(encode(&reply)).expect("frames are UTF-8");
            ws.send(WsMessage::Text(frame))?;
            if close {
                let _ = ws.close(None);
                return Ok(());
            }
        }
    }
}
