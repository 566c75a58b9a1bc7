use std::sync::LazyLock;
use std::time::Duration;

use log::debug;
use regex::Regex;
use tokio::time::Instant;
use url::Url;

use super::limiter::{domain_of, DomainLimiter};
use super::transport::{Response, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Wait before retry `k` (0-based) when a 429 has no usable Retry-After:
    /// `fallback_base * 2^k`.
    pub fallback_base: Duration,
    pub request_timeout: Duration,
    pub max_redirects: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            fallback_base: Duration::from_secs(1),
            request_timeout: Duration::from_secs(60),
            max_redirects: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("retries exhausted for {0}")]
    RetriesExhausted(String),
    #[error("HTTP {status} for {url}")]
    HttpError { url: String, status: u16 },
    #[error("timed out fetching {0}")]
    Timeout(String),
    #[error("transport failure for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("invalid URL {0}")]
    InvalidUrl(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    /// URL after redirects.
    pub url: Url,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Fetched {
    pub fn is_pdf(&self) -> bool {
        let by_type = self
            .content_type
            .as_deref()
            .is_some_and(|ct| ct.split(';').next().unwrap_or("").trim().eq_ignore_ascii_case("application/pdf"));
        by_type || looks_like_pdf(&self.body)
    }
}

pub fn looks_like_pdf(bytes: &[u8]) -> bool {
    bytes.starts_with(b"%PDF")
}

/// Integer-seconds form of Retry-After; the HTTP-date form is not honored.
fn retry_after(resp: &Response) -> Option<Duration> {
    resp.header("retry-after")?.trim().parse::<u64>().ok().map(Duration::from_secs)
}

/// GET `url` under the politeness rules of `limiter`.
///
/// A 429 sets the domain cooldown from Retry-After (or the exponential
/// fallback) and retries once it passes. Redirects are followed manually so
/// that each hop is limited under its own domain.
pub async fn fetch(
    transport: &dyn Transport,
    limiter: &DomainLimiter,
    policy: &RetryPolicy,
    url: &Url,
) -> Result<Fetched, FetchError> {
    let mut current = url.clone();
    let mut retries = 0u32;
    let mut redirects = 0u32;
    loop {
        let domain = domain_of(&current);
        let permit = limiter.acquire(&domain).await;
        let outcome = tokio::time::timeout(policy.request_timeout, transport.get(&current)).await;
        let resp = match outcome {
            Err(_) => return Err(FetchError::Timeout(current.to_string())),
            Ok(Err(e)) => return Err(FetchError::Transport { url: current.to_string(), message: e.to_string() }),
            Ok(Ok(r)) => r,
        };
        match resp.status {
            200..=299 => {
                drop(permit);
                let content_type = resp.header("content-type").map(str::to_string);
                return Ok(Fetched { url: current, content_type, body: resp.body });
            }
            429 => {
                let wait = retry_after(&resp).unwrap_or(policy.fallback_base * 2u32.saturating_pow(retries));
                // Publish the cooldown before freeing the slot so that no
                // waiter slips in between.
                limiter.set_cooldown(&domain, Instant::now() + wait);
                drop(permit);
                if retries >= policy.max_retries {
                    return Err(FetchError::RetriesExhausted(url.to_string()));
                }
                retries += 1;
                debug!("429 from {domain}, retrying {current} in {wait:?}");
            }
            301 | 302 | 303 | 307 | 308 => {
                drop(permit);
                let Some(loc) = resp.header("location") else {
                    return Err(FetchError::HttpError { url: current.to_string(), status: resp.status });
                };
                if redirects >= policy.max_redirects {
                    return Err(FetchError::HttpError { url: current.to_string(), status: resp.status });
                }
                redirects += 1;
                current = current.join(loc).map_err(|_| FetchError::InvalidUrl(loc.to_string()))?;
            }
            status => return Err(FetchError::HttpError { url: current.to_string(), status }),
        }
    }
}

static PDF_ANCHOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)<a\s[^>]*?href\s*=\s*["']([^"'#?]+\.pdf(?:[?#][^"']*)?)["']"#).unwrap());

/// Targets of anchors on an HTML page that end in `.pdf`, resolved against
/// `base`, in document order and without duplicates.
pub fn pdf_anchors(html: &str, base: &Url) -> Vec<Url> {
    let mut out: Vec<Url> = Vec::new();
    for cap in PDF_ANCHOR.captures_iter(html) {
        let href = cap[1].replace("&amp;", "&");
        if let Ok(u) = base.join(&href) {
            if !out.contains(&u) {
                out.push(u);
            }
        }
    }
    out
}

/// Find a PDF for a publication: links answering with a PDF win in order;
/// otherwise links answering with an HTML page are searched for PDF anchors.
/// Per-link failures are skipped. The returned body is the PDF itself.
pub async fn resolve_pdf(
    transport: &dyn Transport,
    limiter: &DomainLimiter,
    policy: &RetryPolicy,
    links: &[String],
) -> Result<Option<Fetched>, Vec<FetchError>> {
    let mut errors = Vec::new();
    let mut pages = Vec::new();
    for link in links {
        let Ok(url) = Url::parse(link) else {
            errors.push(FetchError::InvalidUrl(link.clone()));
            continue;
        };
        match fetch(transport, limiter, policy, &url).await {
            Ok(f) if f.is_pdf() => return Ok(Some(f)),
            Ok(f) => pages.push(f),
            Err(e) => errors.push(e),
        }
    }
    for page in pages {
        let html = String::from_utf8_lossy(&page.body);
        for anchor in pdf_anchors(&html, &page.url) {
            match fetch(transport, limiter, policy, &anchor).await {
                Ok(f) if f.is_pdf() => return Ok(Some(f)),
                Ok(_) => {}
                Err(e) => errors.push(e),
            }
        }
    }
    if errors.is_empty() {
        Ok(None)
    } else {
        Err(errors)
    }
}

/// URL of the PDF [`resolve_pdf`] finds, if any.
pub async fn resolve_pdf_url(
    transport: &dyn Transport,
    limiter: &DomainLimiter,
    policy: &RetryPolicy,
    links: &[String],
) -> Option<Url> {
    resolve_pdf(transport, limiter, policy, links).await.ok().flatten().map(|f| f.url)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvest::sim::{Schedule, SimulatedServer};

    fn server(json: &str) -> SimulatedServer {
        SimulatedServer::new(serde_json::from_str::<Schedule>(json).unwrap())
    }

    #[test]
    fn anchors() {
        let base = Url::parse("https://x.org/paper/12/").unwrap();
        let html = r#"<a href="/files/a.pdf">A</a> <A class="b" HREF='b.PDF'>B</A> <a href="c.html">C</a> <a href="/files/a.pdf">again</a>"#;
        let got: Vec<String> = pdf_anchors(html, &base).into_iter().map(String::from).collect();
        assert_eq!(got, ["https://x.org/files/a.pdf", "https://x.org/paper/12/b.PDF"]);
    }

    #[tokio::test(start_paused = true)]
    async fn direct_landing_and_empty() {
        let s = server(
            r#"{"routes":[
            {"url":"https://p.org/a.pdf","responses":[{"status":200,"headers":{"Content-Type":"application/pdf"},"body":"%PDF a"}]},
            {"url":"https://p.org/landing","responses":[{"status":200,"headers":{"Content-Type":"text/html"},"body":"<a href=\"files/b.pdf\">pdf</a>"}]},
            {"url":"https://p.org/files/b.pdf","responses":[{"status":200,"body":"%PDF b"}]}
        ]}"#,
        );
        let l = DomainLimiter::new(2);
        let p = RetryPolicy::default();
        let direct = resolve_pdf_url(&s, &l, &p, &["https://p.org/a.pdf".into()]).await;
        assert_eq!(direct.unwrap().as_str(), "https://p.org/a.pdf");
        let landing = resolve_pdf_url(&s, &l, &p, &["https://p.org/dead".into(), "https://p.org/landing".into()]).await;
        assert_eq!(landing.unwrap().as_str(), "https://p.org/files/b.pdf");
        assert_eq!(resolve_pdf_url(&s, &l, &p, &[]).await, None);
    }

    #[tokio::test(start_paused = true)]
    async fn retry_after_is_honored() {
        let s = server(
            r#"{"routes":[{"url":"https://r.org/x","responses":[
            {"status":429,"headers":{"Retry-After":"3"}},{"status":200,"body":"ok"}]}]}"#,
        );
        let l = DomainLimiter::new(2);
        let f = fetch(&s, &l, &RetryPolicy::default(), &Url::parse("https://r.org/x").unwrap()).await.unwrap();
        assert_eq!(f.body, b"ok");
        let log = s.log();
        assert_eq!(log.len(), 2);
        assert!(log[1].arrived - log[0].responded.unwrap() >= Duration::from_secs(3));
    }

    #[tokio::test(start_paused = true)]
    async fn fallback_backoff_and_exhaustion() {
        let s = server(r#"{"routes":[{"url":"https://r.org/x","responses":[{"status":429}]}]}"#);
        let l = DomainLimiter::new(1);
        let err = fetch(&s, &l, &RetryPolicy::default(), &Url::parse("https://r.org/x").unwrap()).await.unwrap_err();
        assert_eq!(err, FetchError::RetriesExhausted("https://r.org/x".into()));
        let arrivals: Vec<u64> = s.log().iter().map(|r| r.arrived.as_secs()).collect();
        assert_eq!(arrivals, [0, 1, 3, 7]);
    }

    #[tokio::test(start_paused = true)]
    async fn redirects_and_errors() {
        let s = server(
            r#"{"routes":[
            {"url":"https://a.org/r","responses":[{"status":302,"headers":{"Location":"https://b.org/final"}}]},
            {"url":"https://b.org/final","responses":[{"status":200,"body":"%PDF"}]},
            {"url":"https://a.org/slow","responses":[{"status":200,"delay_ms":120000}]}
        ]}"#,
        );
        let l = DomainLimiter::new(1);
        let p = RetryPolicy::default();
        let f = fetch(&s, &l, &p, &Url::parse("https://a.org/r").unwrap()).await.unwrap();
        assert_eq!(f.url.as_str(), "https://b.org/final");
        assert!(f.is_pdf());
        let e = fetch(&s, &l, &p, &Url::parse("https://a.org/none").unwrap()).await.unwrap_err();
        assert!(matches!(e, FetchError::HttpError { status: 404, .. }));
        let e = fetch(&s, &l, &p, &Url::parse("https://a.org/slow").unwrap()).await.unwrap_err();
        assert!(matches!(e, FetchError::Timeout(_)));
    }
}
