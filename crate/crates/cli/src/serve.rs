//! Web console endpoint: a websocket at `/ws` speaking the JSON console
//! protocol, driven by one shared hub ticking at the engine rate.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::Context as _;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use handshake_core::analysis::{load_dataset, EmotionMap};
use handshake_core::console::{ClientId, ConsoleHub, PROTOCOL_VERSION, TICK_US};
use serde_json::json;
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

use crate::args::ServeArgs;
use crate::{usage, CmdResult, Context};

struct Shared {
    hub: ConsoleHub,
    outboxes: HashMap<ClientId, mpsc::UnboundedSender<String>>,
}

#[derive(Clone)]
struct AppState {
    shared: Arc<Mutex<Shared>>,
    start: Instant,
    recordings: Arc<Vec<String>>,
}

impl AppState {
    fn now_us(&self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }
}

const INDEX: &str = "<!doctype html><title>handshake console</title>\
<p>Console endpoint. Connect a websocket to <code>/ws</code>; \
recordings available for replay are listed at <code>/recordings</code>.</p>";

pub fn serve(ctx: &Context, a: ServeArgs) -> CmdResult {
    let addr: SocketAddr = a
        .http
        .parse()
        .map_err(|_| usage(format!("--http {}: expected IP:PORT", a.http)))?;
    let map = match &a.map {
        Some(p) => Some(EmotionMap::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let mut hub = ConsoleHub::new(ctx.settings(), map);
    if let Some(dir) = &a.recordings {
        for rec in load_dataset(dir).with_context(|| format!("reading {}", dir.display()))? {
            hub.add_recording(rec);
        }
    }
    if let Some(dir) = &a.assets {
        if !dir.is_dir() {
            return Err(usage(format!("--assets {}: not a directory", dir.display())));
        }
    }
    let recordings: Vec<String> = hub.recording_ids().map(String::from).collect();
    let state = AppState {
        shared: Arc::new(Mutex::new(Shared {
            hub,
            outboxes: HashMap::new(),
        })),
        start: Instant::now(),
        recordings: Arc::new(recordings),
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        ctx.out.emit(
            "listening",
            json!({"addr": local.to_string(), "protocol_version": PROTOCOL_VERSION}),
            format!("listening on http://{local} (websocket at /ws)"),
        );

        tokio::spawn(tick_loop(state.clone()));
        let mut app = Router::new()
            .route("/ws", get(ws_upgrade))
            .route("/recordings", get(list_recordings));
        app = match &a.assets {
            Some(dir) => app.fallback_service(ServeDir::new(dir)),
            None => app.route("/", get(|| async { Html(INDEX) })),
        };
        axum::serve(listener, app.with_state(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("serving")?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

async fn tick_loop(state: AppState) {
    let mut interval = tokio::time::interval(Duration::from_micros(TICK_US));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        let now = state.now_us();
        let mut shared = state.shared.lock().expect("hub lock");
        for (id, msg) in shared.hub.tick(now) {
            if let Some(tx) = shared.outboxes.get(&id) {
                let _ = tx.send(msg.to_json());
            }
        }
    }
}

async fn list_recordings(State(state): State<AppState>) -> impl IntoResponse {
    Json(json!({ "recordings": *state.recordings }))
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let id = {
        let mut shared = state.shared.lock().expect("hub lock");
        let id = shared.hub.connect();
        shared.outboxes.insert(id, tx.clone());
        id
    };
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let replies = {
            let mut shared = state.shared.lock().expect("hub lock");
            let now = state.now_us();
            shared.hub.handle_text(id, text.as_str(), now)
        };
        for r in replies {
            let _ = tx.send(r.to_json());
        }
    }
    {
        let mut shared = state.shared.lock().expect("hub lock");
        shared.hub.disconnect(id);
        shared.outboxes.remove(&id);
    }
    drop(tx);
    let _ = writer.await;
}
