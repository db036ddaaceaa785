//! Message transports: TCP and an in-process loopback.
//!
//! Both carry encoded frames, so the loopback exercises the same codec as
//! TCP. A connection is split into a sending and a receiving half so that a
//! reader thread can block on one while other threads send.

use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use thiserror::Error;

use super::codec::{decode_frame, encode_frame, read_frame, write_frame, CodecError, Message};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl TransportError {
    fn from_codec(e: CodecError) -> Self {
        match e {
            CodecError::Io(_) => TransportError::Closed,
            other => TransportError::Codec(other),
        }
    }
}

pub trait MessageSender: Send {
    fn send(&mut self, m: &Message) -> Result<(), TransportError>;
    /// Closes the connection in both directions.
    fn close(&mut self);
}

pub trait MessageReceiver: Send {
    /// Blocks until a message arrives or the connection closes.
    fn recv(&mut self) -> Result<Message, TransportError>;
}

pub struct Connection {
    pub sender: Box<dyn MessageSender>,
    pub receiver: Box<dyn MessageReceiver>,
    pub peer: String,
}

impl std::fmt::Debug for Connection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Connection").field("peer", &self.peer).finish()
    }
}

// ---- TCP ----

struct TcpSender {
    stream: BufWriter<TcpStream>,
}

impl MessageSender for TcpSender {
    fn send(&mut self, m: &Message) -> Result<(), TransportError> {
        write_frame(&mut self.stream, m).map_err(TransportError::from_codec)
    }

    fn close(&mut self) {
        let _ = self.stream.get_ref().shutdown(Shutdown::Both);
    }
}

struct TcpReceiver {
    stream: BufReader<TcpStream>,
}

impl MessageReceiver for TcpReceiver {
    fn recv(&mut self) -> Result<Message, TransportError> {
        read_frame(&mut self.stream).map_err(TransportError::from_codec)
    }
}

pub fn tcp_connection(stream: TcpStream) -> std::io::Result<Connection> {
    stream.set_nodelay(true)?;
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "tcp".into());
    let reader = stream.try_clone()?;
    Ok(Connection {
        sender: Box::new(TcpSender {
            stream: BufWriter::new(stream),
        }),
        receiver: Box::new(TcpReceiver {
            stream: BufReader::new(reader),
        }),
        peer,
    })
}

// ---- loopback ----

enum Packet {
    Frame(Vec<u8>),
    Close,
}

/// Shared by both ends of a loopback link; set once either end closes.
#[derive(Clone)]
struct LinkState {
    closed: Arc<AtomicBool>,
    to_a: Sender<Packet>,
    to_b: Sender<Packet>,
}

impl LinkState {
    fn close(&self) {
        if !self.closed.swap(true, Ordering::SeqCst) {
            let _ = self.to_a.send(Packet::Close);
            let _ = self.to_b.send(Packet::Close);
        }
    }
}

struct LoopSender {
    tx: Sender<Packet>,
    link: LinkState,
}

impl MessageSender for LoopSender {
    fn send(&mut self, m: &Message) -> Result<(), TransportError> {
        if self.link.closed.load(Ordering::SeqCst) {
            return Err(TransportError::Closed);
        }
        self.tx
            .send(Packet::Frame(encode_frame(m)))
            .map_err(|_| TransportError::Closed)
    }

    fn close(&mut self) {
        self.link.close();
    }
}

struct LoopReceiver {
    rx: Receiver<Packet>,
}

impl MessageReceiver for LoopReceiver {
    fn recv(&mut self) -> Result<Message, TransportError> {
        match self.rx.recv() {
            Ok(Packet::Frame(bytes)) => Ok(decode_frame(&bytes)?),
            Ok(Packet::Close) | Err(_) => Err(TransportError::Closed),
        }
    }
}

/// Severs a loopback link from outside, as if the peer process died.
#[derive(Clone)]
pub struct LinkKiller(LinkState);

impl LinkKiller {
    pub fn kill(&self) {
        self.0.close();
    }
}

impl std::fmt::Debug for LinkKiller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("LinkKiller")
    }
}

/// Two connected in-process endpoints.
pub fn loopback_pair(name: &str) -> (Connection, Connection, LinkKiller) {
    let (to_a, from_b) = unbounded();
    let (to_b, from_a) = unbounded();
    let link = LinkState {
        closed: Arc::new(AtomicBool::new(false)),
        to_a: to_a.clone(),
        to_b: to_b.clone(),
    };
    let a = Connection {
        sender: Box::new(LoopSender {
            tx: to_b,
            link: link.clone(),
        }),
        receiver: Box::new(LoopReceiver { rx: from_b }),
        peer: format!("loopback:{name}"),
    };
    let b = Connection {
        sender: Box::new(LoopSender {
            tx: to_a,
            link: link.clone(),
        }),
        receiver: Box::new(LoopReceiver { rx: from_a }),
        peer: format!("loopback:{name}"),
    };
    (a, b, LinkKiller(link))
}
