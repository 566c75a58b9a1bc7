use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use tokio::sync::{OwnedSemaphorePermit, Semaphore};
use tokio::time::Instant;
use url::Url;

/// Politeness key of a URL: scheme, host and explicit port.
pub fn domain_of(url: &Url) -> String {
    let host = url.host_str().unwrap_or("");
    match url.port() {
        Some(p) => format!("{}://{}:{}", url.scheme(), host, p),
        None => format!("{}://{}", url.scheme(), host),
    }
}

#[derive(Debug)]
struct DomainState {
    slots: Arc<Semaphore>,
    cooldown_until: Mutex<Option<Instant>>,
}

/// Per-domain concurrency cap plus Retry-After cooldowns, shared by every
/// worker of a harvest.
#[derive(Debug)]
pub struct DomainLimiter {
    max_per_domain: usize,
    domains: Mutex<HashMap<String, Arc<DomainState>>>,
}

/// Held while a request to one domain is outstanding.
#[derive(Debug)]
pub struct DomainPermit {
    _permit: OwnedSemaphorePermit,
}

impl DomainLimiter {
    pub fn new(max_per_domain: usize) -> Self {
        Self { max_per_domain: max_per_domain.max(1), domains: Mutex::default() }
    }

    pub fn max_per_domain(&self) -> usize {
        self.max_per_domain
    }

    fn state(&self, domain: &str) -> Arc<DomainState> {
        let mut map = self.domains.lock().expect("limiter poisoned");
        Arc::clone(map.entry(domain.to_string()).or_insert_with(|| {
            Arc::new(DomainState {
                slots: Arc::new(Semaphore::new(self.max_per_domain)),
                cooldown_until: Mutex::new(None),
            })
        }))
    }

    /// Wait for a free slot and for any cooldown of `domain` to pass. The
    /// caller must issue its request without yielding after this returns.
    pub async fn acquire(&self, domain: &str) -> DomainPermit {
        let state = self.state(domain);
        let permit = Arc::clone(&state.slots).acquire_owned().await.expect("semaphore never closed");
        loop {
            let until = *state.cooldown_until.lock().expect("limiter poisoned");
            match until {
                Some(t) if Instant::now() < t => tokio::time::sleep_until(t).await,
                _ => break,
            }
        }
        DomainPermit { _permit: permit }
    }

    /// Forbid requests to `domain` until `until`. Cooldowns only ever extend.
    pub fn set_cooldown(&self, domain: &str, until: Instant) {
        let state = self.state(domain);
        let mut cd = state.cooldown_until.lock().expect("limiter poisoned");
        if cd.is_none_or(|t| t < until) {
            *cd = Some(until);
        }
    }

    pub fn cooldown_until(&self, domain: &str) -> Option<Instant> {
        *self.state(domain).cooldown_until.lock().expect("limiter poisoned")
    }
}
