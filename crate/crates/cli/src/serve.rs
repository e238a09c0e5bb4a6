use std::convert::Infallible;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{Method, StatusCode, Uri};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use clap::Args;
use futures_util::stream::{self, Stream};
use qkdnet_core::harness::{Controller, Network};
use tokio::sync::broadcast;

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value = "tokyo")]
    topology: String,
    /// Scenario whose timed events fire as the clock passes them.
    #[arg(long, default_value = "empty")]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Wall-clock milliseconds per simulated tick.
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
    /// Stop advancing after this many simulated seconds; serve continues.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Clone)]
struct AppState {
    ctl: Arc<Mutex<Controller>>,
    deltas: broadcast::Sender<String>,
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let topology = crate::load_topology(&a.topology)?;
    let scenario = crate::load_scenario(&a.scenario)?;
    let duration = a.duration.or(scenario.duration_s);
    let net = Network::new(topology, a.seed, scenario.tick_s)?;
    let ctl = Controller::new(net, scenario)?;
    let (deltas, _) = broadcast::channel(64);
    let state = AppState { ctl: Arc::new(Mutex::new(ctl)), deltas };

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        println!("listening on http://{}", listener.local_addr()?);

        tokio::spawn(drive(state.clone(), Duration::from_millis(a.tick_ms.max(1)), duration));

        let app = Router::new().route("/events", get(events)).fallback(control).with_state(state);
        axum::serve(listener, app).await?;
        Ok(())
    })
}

/// Advances the simulation on a wall-clock interval and broadcasts deltas.
async fn drive(state: AppState, period: Duration, duration: Option<f64>) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        let ctl = state.ctl.clone();
        let delta = tokio::task::spawn_blocking(move || {
            let mut c = ctl.lock().expect("controller lock");
            if duration.is_some_and(|d| c.network().t_s() >= d - 1e-9) {
                return None;
            }
            Some(c.tick())
        })
        .await
        .expect("tick task");
        match delta {
            Some(Ok(d)) => {
                // No subscribers is not an error.
                let _ = state.deltas.send(d.to_string());
            }
            Some(Err(e)) => eprintln!("tick failed: {e}"),
            None => {}
        }
    }
}

async fn events(State(state): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.deltas.subscribe();
    let s = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(d) => return Some((Ok(Event::default().event("delta").data(d)), rx)),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(s).keep_alive(KeepAlive::default())
}

async fn control(State(state): State<AppState>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path_and_query().map_or_else(|| uri.path().to_string(), |p| p.as_str().to_string());
    let body = String::from_utf8_lossy(&body).into_owned();
    let ctl = state.ctl.clone();
    let resp = tokio::task::spawn_blocking(move || ctl.lock().expect("controller lock").handle(method.as_str(), &path, &body))
        .await
        .expect("control task");
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(resp.body)).into_response()
}
