//! Websocket server around one real-time simulation.
//!
//! The simulation runs on its own thread and is the only owner of the
//! simulation state. Connections talk to it through an unbounded command
//! queue (never drops) and a bounded broadcast of encoded frames (slow
//! clients skip frames).

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio_tungstenite::tungstenite::Message;

use crate::command::Directive;
use crate::error::{Error, Result};
use crate::harness::{apply_preset, simulation, Scenario};
use crate::sim::Simulation;
use crate::teleop::protocol::{decode_command, encode_error, StateEncoder};

/// Largest wall-clock backlog the physics loop will catch up on.
const MAX_BACKLOG_S: f64 = 0.25;
const FRAME_BUFFER: usize = 16;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub broadcast_hz: f64,
    /// The scenario the session starts from.
    pub initial: Scenario,
    /// Scenarios available to `reset`, by name. The initial one is added.
    pub scenarios: BTreeMap<String, Scenario>,
}

impl ServerConfig {
    pub fn new(port: u16, initial: Scenario) -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            broadcast_hz: 30.0,
            initial,
            scenarios: BTreeMap::new(),
        }
    }
}

/// A running server. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: tokio::task::JoinHandle<()>,
    sim_thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.accept.abort();
        if let Some(t) = self.sim_thread.take() {
            let _ = t.join();
        }
    }

    /// Wait until the accept loop ends, which only happens on shutdown.
    pub async fn wait(self) {
        let _ = self.accept.await;
    }
}

/// Bind and start serving in the background.
pub async fn start(mut cfg: ServerConfig) -> Result<ServerHandle> {
    if !(cfg.broadcast_hz > 0.0 && cfg.broadcast_hz <= 1000.0) {
        return Err(Error::Configuration(format!("broadcast rate must be in (0, 1000] Hz, got {}", cfg.broadcast_hz)));
    }
    let listener = TcpListener::bind(cfg.addr)
        .await
        .map_err(|e| Error::Io { path: cfg.addr.to_string(), reason: e.to_string() })?;
    let local_addr = listener.local_addr().map_err(|e| Error::Io { path: cfg.addr.to_string(), reason: e.to_string() })?;
    cfg.scenarios.insert(cfg.initial.name().to_string(), cfg.initial.clone());
    let registry = Arc::new(cfg.scenarios);
    let sim = simulation(&cfg.initial)?;

    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frame_tx, _) = broadcast::channel::<Arc<str>>(FRAME_BUFFER);
    let stop = Arc::new(AtomicBool::new(false));

    let sim_thread = {
        let registry = Arc::clone(&registry);
        let frames = frame_tx.clone();
        let stop = Arc::clone(&stop);
        let period = 1.0 / cfg.broadcast_hz;
        std::thread::Builder::new()
            .name("urchin-sim-loop".into())
            .spawn(move || live_loop(sim, &registry, cmd_rx, &frames, period, &stop))
            .map_err(|e| Error::Io { path: "simulation thread".into(), reason: e.to_string() })?
    };

    let accept = tokio::spawn(async move {
        loop {
            match listener.accept().await {
                Ok((stream, peer)) => {
                    let cmd_tx = cmd_tx.clone();
                    let frames = frame_tx.subscribe();
                    let registry = Arc::clone(&registry);
                    tokio::spawn(async move {
                        if let Err(e) = connection(stream, cmd_tx, frames, registry).await {
                            debug!("client {peer}: {e}");
                        }
                        debug!("client {peer} disconnected");
                    });
                    info!("client {peer} connected");
                }
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    });
    info!("teleop listening on ws://{local_addr}");
    Ok(ServerHandle { local_addr, stop, accept, sim_thread: Some(sim_thread) })
}

/// Serve until the process ends.
pub async fn serve(cfg: ServerConfig) -> Result<()> {
    start(cfg).await?.wait().await;
    Ok(())
}

fn live_loop(
    mut sim: Simulation,
    registry: &BTreeMap<String, Scenario>,
    mut commands: mpsc::UnboundedReceiver<Directive>,
    frames: &broadcast::Sender<Arc<str>>,
    period_s: f64,
    stop: &AtomicBool,
) {
    let dt = sim.dt();
    let period = Duration::from_secs_f64(period_s);
    let mut encoder = StateEncoder::default();
    let mut diverged = false;
    let mut backlog = 0.0;
    let mut last = Instant::now();
    let mut next_frame = last;

    let publish = |sim: &mut Simulation, encoder: &mut StateEncoder| {
        let frame = sim.snapshot().and_then(|s| encoder.encode(&s));
        match frame {
            // No receivers is fine; frames are not retained.
            Ok(text) => drop(frames.send(Arc::from(text))),
            Err(e) => warn!("state frame dropped: {e}"),
        }
    };

    while !stop.load(Ordering::Relaxed) {
        while let Ok(directive) = commands.try_recv() {
            match directive {
                Directive::Gait(cmd) => sim.enqueue(cmd),
                Directive::SetTerrain(preset) => {
                    if let Err(e) = apply_preset(&mut sim, &preset) {
                        warn!("set_terrain {preset}: {e}");
                    }
                }
                Directive::Reset(name) => match registry.get(&name).map(simulation) {
                    Some(Ok(fresh)) => {
                        sim = fresh;
                        diverged = false;
                        backlog = 0.0;
                        last = Instant::now();
                        publish(&mut sim, &mut encoder);
                        next_frame = last + period;
                        info!("reset to scenario `{name}`");
                    }
                    Some(Err(e)) => warn!("reset {name}: {e}"),
                    None => warn!("reset to unknown scenario `{name}`"),
                },
            }
        }

        let now = Instant::now();
        backlog = (backlog + (now - last).as_secs_f64()).min(MAX_BACKLOG_S);
        last = now;
        while backlog >= dt {
            if !diverged {
                if let Err(e) = sim.step() {
                    warn!("simulation stopped: {e}; send reset to continue");
                    diverged = true;
                }
            }
            backlog -= dt;
        }

        if now >= next_frame {
            publish(&mut sim, &mut encoder);
            next_frame += period;
            if next_frame < now {
                next_frame = now + period;
            }
        }
        let until_frame = next_frame.saturating_duration_since(Instant::now());
        std::thread::sleep(until_frame.min(Duration::from_millis(1)));
    }
}

async fn connection(
    stream: TcpStream,
    commands: mpsc::UnboundedSender<Directive>,
    mut frames: broadcast::Receiver<Arc<str>>,
    registry: Arc<BTreeMap<String, Scenario>>,
) -> std::result::Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();

    let writer = tokio::spawn(async move {
        loop {
            let text: String = tokio::select! {
                frame = frames.recv() => match frame {
                    Ok(f) => f.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        debug!("slow client skipped {n} frames");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                reply = replies.recv() => match reply {
                    Some(r) => r,
                    None => break,
                },
            };
            if sink.send(Message::text(text)).await.is_err() {
                break;
            }
        }
    });

    while let Some(msg) = source.next().await {
        let bytes = match msg? {
            Message::Text(t) => t.as_bytes().to_vec(),
            Message::Binary(b) => b.to_vec(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match decode_command(&bytes) {
            Ok(Directive::Reset(name)) if !registry.contains_key(&name) => {
                Some(encode_error(&format!("unknown scenario `{name}`")))
            }
            Ok(directive) => {
                if commands.send(directive).is_err() {
                    break;
                }
                None
            }
            Err(e) => Some(encode_error(&e.to_string())),
        };
        if let Some(r) = reply {
            if reply_tx.send(r).is_err() {
                break;
            }
        }
    }
    writer.abort();
    Ok(())
}
