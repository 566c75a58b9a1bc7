//! Scriptable in-process HTTP server for exercising the harvester.
//!
//! A schedule file lists routes. Each route matches one URL exactly, or
//! every URL starting with a prefix when the pattern ends in `*`, and
//! carries a list of responses served in order per URL; the last response
//! repeats. Unmatched URLs get the default response.
//!
//! ```json
//! {
//!   "default": {"status": 404},
//!   "routes": [
//!     {"url": "https://a.example/1.pdf", "responses": [
//!       {"status": 429, "headers": {"Retry-After": "3"}},
//!       {"status": 200, "delay_ms": 20, "headers": {"Content-Type": "application/pdf"}, "body": "%PDF-1.4 {path}"}
//!     ]},
//!     {"url": "https://b.example/*", "responses": [{"status": 200, "body": "<a href=\"x.pdf\">pdf</a>"}]}
//!   ]
//! }
//! ```
//!
//! In bodies and header values `{path}` expands to the request path and
//! `{url}` to the full URL.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::time::Instant;
use url::Url;

use super::limiter::domain_of;
use super::transport::{Response, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    pub status: u16,
    #[serde(default)]
    pub delay_ms: u64,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl ScriptedResponse {
    pub fn status(status: u16) -> Self {
        Self { status, delay_ms: 0, headers: BTreeMap::new(), body: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub url: String,
    pub responses: Vec<ScriptedResponse>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default = "default_response")]
    pub default: ScriptedResponse,
    #[serde(default)]
    pub routes: Vec<Route>,
}

fn default_response() -> ScriptedResponse {
    ScriptedResponse::status(404)
}

impl Schedule {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    fn route_for(&self, url: &str) -> Option<&Route> {
        self.routes.iter().find(|r| r.url == url).or_else(|| {
            self.routes
                .iter()
                .filter_map(|r| r.url.strip_suffix('*').map(|p| (p, r)))
                .filter(|(p, _)| url.starts_with(p))
                .max_by_key(|(p, _)| p.len())
                .map(|(_, r)| r)
        })
    }
}

/// One served request, with times relative to server creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestLog {
    pub url: String,
    pub domain: String,
    pub arrived: Duration,
    pub responded: Option<Duration>,
    pub status: u16,
}

/// Interval after a 429 during which the client must not contact `domain`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooldownWindow {
    pub domain: String,
    pub start: Duration,
    pub end: Duration,
}

#[derive(Debug, Default)]
struct SimState {
    cursors: HashMap<String, usize>,
    in_flight: HashMap<String, usize>,
    peak: BTreeMap<String, usize>,
    log: Vec<RequestLog>,
    windows: Vec<CooldownWindow>,
}

pub struct SimulatedServer {
    schedule: Schedule,
    origin: Instant,
    state: Mutex<SimState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub requests: usize,
    pub peak_in_flight: BTreeMap<String, usize>,
    pub cooldown_violations: Vec<RequestLog>,
}

struct InFlight<'a> {
    server: &'a SimulatedServer,
    domain: String,
    entry: usize,
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        let mut st = self.server.state.lock().expect("sim poisoned");
        if let Some(n) = st.in_flight.get_mut(&self.domain) {
            *n -= 1;
        }
        if st.log[self.entry].responded.is_none() {
            // Abandoned by the client (timeout); mark with status 0.
            st.log[self.entry].status = 0;
        }
    }
}

fn expand(template: &str, url: &Url) -> String {
    template.replace("{path}", url.path()).replace("{url}", url.as_str())
}

impl SimulatedServer {
    pub fn new(schedule: Schedule) -> Self {
        Self { schedule, origin: Instant::now(), state: Mutex::default() }
    }

    fn elapsed(&self) -> Duration {
        Instant::now() - self.origin
    }

    pub fn log(&self) -> Vec<RequestLog> {
        self.state.lock().expect("sim poisoned").log.clone()
    }

    pub fn windows(&self) -> Vec<CooldownWindow> {
        self.state.lock().expect("sim poisoned").windows.clone()
    }

    pub fn peak_in_flight(&self) -> BTreeMap<String, usize> {
        self.state.lock().expect("sim poisoned").peak.clone()
    }

    /// Requests that arrived strictly after a 429 to their domain was sent
    /// and before its Retry-After elapsed.
    pub fn cooldown_violations(&self) -> Vec<RequestLog> {
        let st = self.state.lock().expect("sim poisoned");
        st.log
            .iter()
            .filter(|r| st.windows.iter().any(|w| w.domain == r.domain && r.arrived > w.start && r.arrived < w.end))
            .cloned()
            .collect()
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            requests: self.log().len(),
            peak_in_flight: self.peak_in_flight(),
            cooldown_violations: self.cooldown_violations(),
        }
    }
}

#[async_trait]
impl Transport for SimulatedServer {
    async fn get(&self, url: &Url) -> Result<Response, TransportError> {
        let domain = domain_of(url);
        let key = url.as_str().to_string();
        let (scripted, guard) = {
            let mut st = self.state.lock().expect("sim poisoned");
            let scripted = match self.schedule.route_for(&key) {
                Some(route) if !route.responses.is_empty() => {
                    let cursor = st.cursors.entry(key.clone()).or_insert(0);
                    let i = (*cursor).min(route.responses.len() - 1);
                    *cursor += 1;
                    route.responses[i].clone()
                }
                _ => self.schedule.default.clone(),
            };
            let n = st.in_flight.entry(domain.clone()).or_insert(0);
            *n += 1;
            let n = *n;
            let peak = st.peak.entry(domain.clone()).or_insert(0);
            *peak = (*peak).max(n);
            let entry = st.log.len();
            st.log.push(RequestLog {
                url: key.clone(),
                domain: domain.clone(),
                arrived: self.elapsed(),
                responded: None,
                status: scripted.status,
            });
            (scripted, InFlight { server: self, domain: domain.clone(), entry })
        };
        if scripted.delay_ms > 0 {
            tokio::time::sleep(Duration::from_millis(scripted.delay_ms)).await;
        }
        let headers: Vec<(String, String)> =
            scripted.headers.iter().map(|(k, v)| (k.to_ascii_lowercase(), expand(v, url))).collect();
        {
            let now = self.elapsed();
            let mut st = self.state.lock().expect("sim poisoned");
            st.log[guard.entry].responded = Some(now);
            if scripted.status == 429 {
                let secs = headers
                    .iter()
                    .find(|(k, _)| k == "retry-after")
                    .and_then(|(_, v)| v.trim().parse::<u64>().ok());
                if let Some(s) = secs {
                    st.windows.push(CooldownWindow { domain: domain.clone(), start: now, end: now + Duration::from_secs(s) });
                }
            }
        }
        drop(guard);
        Ok(Response { status: scripted.status, headers, body: expand(&scripted.body, url).into_bytes() })
    }
}
