//! Message transports: in-process channels and framed TCP.
//!
//! A transport is one end of a reliable, ordered, point-to-point link. Both
//! backends deliver messages in order per (sender, receiver) pair and are
//! observationally equivalent for the protocol; the TCP backend additionally
//! serializes every message through the wire format.

use super::wire::{self, HEADER_LEN, MAX_PAYLOAD};
use super::{Message, WireError};
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer closed the connection")]
    Closed,
    #[error("timed out waiting for a message")]
    Timeout,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("protocol state error: {0}")]
    Protocol(String),
}

pub trait Transport: Send {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<Message, TransportError>;
}

/// In-process transport over a pair of mpsc channels.
pub struct ChannelTransport {
    tx: Sender<Message>,
    rx: Receiver<Message>,
    timeout: Duration,
}

/// Creates a connected pair of in-process endpoints.
pub fn channel_pair(timeout: Duration) -> (ChannelTransport, ChannelTransport) {
    let (tx_a, rx_b) = std::sync::mpsc::channel();
    let (tx_b, rx_a) = std::sync::mpsc::channel();
    (
        ChannelTransport { tx: tx_a, rx: rx_a, timeout },
        ChannelTransport { tx: tx_b, rx: rx_b, timeout },
    )
}

impl Transport for ChannelTransport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.tx.send(msg.clone()).map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        self.rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => TransportError::Timeout,
            RecvTimeoutError::Disconnected => TransportError::Closed,
        })
    }
}

/// TCP transport: every message is one wire-format frame.
pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream, timeout: Duration) -> Result<Self, TransportError> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        Ok(TcpTransport { stream })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let frame = wire::encode_message(msg);
        self.stream.write_all(&frame).map_err(map_io)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        let mut header = [0u8; HEADER_LEN];
        read_exact(&mut self.stream, &mut header)?;
        let payload_len = u32::from_be_bytes(header[12..16].try_into().unwrap());
        if payload_len > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge {
                declared: payload_len,
                max: MAX_PAYLOAD,
            }
            .into());
        }
        let mut frame = header.to_vec();
        frame.resize(HEADER_LEN + payload_len as usize, 0);
        read_exact(&mut self.stream, &mut frame[HEADER_LEN..])?;
        Ok(wire::decode_message(&frame)?)
    }
}

fn read_exact(stream: &mut TcpStream, buf: &mut [u8]) -> Result<(), TransportError> {
    stream.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => TransportError::Closed,
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => TransportError::Timeout,
        _ => TransportError::Io(e),
    })
}

fn map_io(e: std::io::Error) -> TransportError {
    match e.kind() {
        std::io::ErrorKind::BrokenPipe
        | std::io::ErrorKind::ConnectionReset
        | std::io::ErrorKind::ConnectionAborted => TransportError::Closed,
        _ => TransportError::Io(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn channel_pair_delivers_in_order() {
        let (mut a, mut b) = channel_pair(Duration::from_secs(1));
        for epoch in 0..5 {
            a.send(&Message::EpochEnd { epoch, sender: 0 }).unwrap();
        }
        for epoch in 0..5 {
            assert_eq!(b.recv().unwrap().epoch(), epoch);
        }
    }

    #[test]
    fn send_after_peer_shutdown_errors() {
        let (mut a, b) = channel_pair(Duration::from_millis(50));
        drop(b);
        assert!(matches!(
            a.send(&Message::Shutdown { epoch: 0, sender: 0 }),
            Err(TransportError::Closed)
        ));
        assert!(matches!(a.recv(), Err(TransportError::Closed)));
    }

    #[test]
    fn tcp_round_trips_a_large_parameter_payload() {
        // ~10 MB of parameters through a real loopback socket
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let echo = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut t = TcpTransport::new(stream, Duration::from_secs(30)).unwrap();
            let msg = t.recv().unwrap();
            t.send(&msg).unwrap();
        });

        let stream = TcpStream::connect(addr).unwrap();
        let mut t = TcpTransport::new(stream, Duration::from_secs(30)).unwrap();
        let params: Vec<f32> = (0..2_500_000).map(|i| (i as f32).sin()).collect();
        let msg = Message::GlobalModel { epoch: 1, sender: 0, params };
        t.send(&msg).unwrap();
        let back = t.recv().unwrap();
        assert_eq!(back, msg);
        echo.join().unwrap();
    }

    #[test]
    fn tcp_peer_disconnect_surfaces_as_closed() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let t = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            drop(stream);
        });
        let stream = TcpStream::connect(addr).unwrap();
        let mut transport = TcpTransport::new(stream, Duration::from_secs(5)).unwrap();
        t.join().unwrap();
        assert!(matches!(transport.recv(), Err(TransportError::Closed)));
    }
}
