use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Datagram transport, one frame per datagram. `now` is the session clock
/// in seconds; real sockets ignore it.
pub trait Transport: Send {
    fn send(&mut self, now: f64, datagram: &[u8]) -> io::Result<()>;
    /// Next datagram available at `now`, if any. Never blocks.
    fn recv(&mut self, now: f64) -> io::Result<Option<Vec<u8>>>;
}

/// Faults injected on one direction of a loopback link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkFaults {
    /// One-way delay, s.
    pub delay: f64,
    /// Drop probability per datagram.
    pub loss: f64,
    /// Swap every n-th datagram with its successor.
    pub reorder_every: Option<u64>,
    /// Queue bound; the oldest datagram is dropped on overflow.
    pub capacity: usize,
    pub seed: u64,
}

impl Default for LinkFaults {
    fn default() -> Self {
        Self {
            delay: 0.0,
            loss: 0.0,
            reorder_every: None,
            capacity: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug)]
struct Channel {
    faults: LinkFaults,
    rng: ChaCha8Rng,
    queue: VecDeque<(f64, Vec<u8>)>,
    held: Option<Vec<u8>>,
    sent: u64,
    dropped: u64,
}

impl Channel {
    fn new(faults: LinkFaults) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(faults.seed),
            faults,
            queue: VecDeque::new(),
            held: None,
            sent: 0,
            dropped: 0,
        }
    }

    fn push(&mut self, now: f64, datagram: Vec<u8>) {
        self.sent += 1;
        if self.faults.loss > 0.0 && self.rng.random::<f64>() < self.faults.loss {
            self.dropped += 1;
            return;
        }
        if let Some(n) = self.faults.reorder_every {
            if n > 0 && self.sent.is_multiple_of(n) && self.held.is_none() {
                self.held = Some(datagram);
                return;
            }
        }
        self.enqueue(now, datagram);
        if let Some(held) = self.held.take() {
            self.enqueue(now, held);
        }
    }

    fn enqueue(&mut self, now: f64, datagram: Vec<u8>) {
        if self.queue.len() >= self.faults.capacity.max(1) {
            self.queue.pop_front();
            self.dropped += 1;
        }
        self.queue.push_back((now + self.faults.delay, datagram));
    }

    fn pop(&mut self, now: f64) -> Option<Vec<u8>> {
        match self.queue.front() {
            Some((at, _)) if *at <= now + 1e-12 => self.queue.pop_front().map(|(_, d)| d),
            _ => None,
        }
    }
}

/// One end of an in-process link driven by the session clock.
#[derive(Debug, Clone)]
pub struct LoopbackEndpoint {
    outgoing: Arc<Mutex<Channel>>,
    incoming: Arc<Mutex<Channel>>,
}

/// Two connected endpoints; `a_to_b` applies to datagrams sent by the first.
pub fn loopback_pair(a_to_b: LinkFaults, b_to_a: LinkFaults) -> (LoopbackEndpoint, LoopbackEndpoint) {
    let ab = Arc::new(Mutex::new(Channel::new(a_to_b)));
    let ba = Arc::new(Mutex::new(Channel::new(b_to_a)));
    (
        LoopbackEndpoint {
            outgoing: ab.clone(),
            incoming: ba.clone(),
        },
        LoopbackEndpoint {
            outgoing: ba,
            incoming: ab,
        },
    )
}

impl LoopbackEndpoint {
    /// Datagrams dropped (loss or overflow) on the outgoing direction.
    pub fn dropped(&self) -> u64 {
        self.outgoing.lock().expect("link lock").dropped
    }
}

impl Transport for LoopbackEndpoint {
    fn send(&mut self, now: f64, datagram: &[u8]) -> io::Result<()> {
        self.outgoing.lock().expect("link lock").push(now, datagram.to_vec());
        Ok(())
    }

    fn recv(&mut self, now: f64) -> io::Result<Option<Vec<u8>>> {
        Ok(self.incoming.lock().expect("link lock").pop(now))
    }
}

/// Non-blocking UDP socket with a fixed peer.
#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    peer: SocketAddr,
    buf: Vec<u8>,
}

impl UdpTransport {
    pub fn bind(local: impl ToSocketAddrs, peer: impl ToSocketAddrs) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        socket.set_nonblocking(true)?;
        let peer = peer
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "peer address resolves to nothing"))?;
        Ok(Self {
            socket,
            peer,
            buf: vec![0; 512],
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }
}

impl Transport for UdpTransport {
    fn send(&mut self, _now: f64, datagram: &[u8]) -> io::Result<()> {
        self.socket.send_to(datagram, self.peer).map(|_| ())
    }

    fn recv(&mut self, _now: f64) -> io::Result<Option<Vec<u8>>> {
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, _)) => Ok(Some(self.buf[..n].to_vec())),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_holds_datagrams() {
        let (mut a, mut b) = loopback_pair(
            LinkFaults {
                delay: 0.2,
                ..Default::default()
            },
            LinkFaults::default(),
        );
        a.send(1.0, b"x").unwrap();
        assert_eq!(b.recv(1.1).unwrap(), None);
        assert_eq!(b.recv(1.2).unwrap().as_deref(), Some(&b"x"[..]));
        b.send(1.2, b"y").unwrap();
        assert_eq!(a.recv(1.2).unwrap().as_deref(), Some(&b"y"[..]));
    }

    #[test]
    fn reorder_swaps_pairs() {
        let (mut a, mut b) = loopback_pair(
            LinkFaults {
                reorder_every: Some(3),
                ..Default::default()
            },
            LinkFaults::default(),
        );
        for i in 1..=6u8 {
            a.send(0.0, &[i]).unwrap();
        }
        let got: Vec<u8> = std::iter::from_fn(|| b.recv(0.0).unwrap()).map(|d| d[0]).collect();
        assert_eq!(got, vec![1, 2, 4, 3, 5]);
    }

    #[test]
    fn full_loss_drops_everything() {
        let (mut a, mut b) = loopback_pair(
            LinkFaults {
                loss: 1.0,
                ..Default::default()
            },
            LinkFaults::default(),
        );
        a.send(0.0, b"x").unwrap();
        assert_eq!(b.recv(1.0).unwrap(), None);
        assert_eq!(a.dropped(), 1);
    }

    #[test]
    fn udp_round_trip() {
        let mut a = UdpTransport::bind("127.0.0.1:0", "127.0.0.1:9").unwrap();
        let a_addr = a.local_addr().unwrap();
        let mut b = UdpTransport::bind("127.0.0.1:0", a_addr).unwrap();
        a.peer = b.local_addr().unwrap();
        a.send(0.0, b"ping").unwrap();
        let got = (0..200).find_map(|_| {
            std::thread::sleep(std::time::Duration::from_millis(5));
            b.recv(0.0).unwrap()
        });
        assert_eq!(got.as_deref(), Some(&b"ping"[..]));
    }
}
