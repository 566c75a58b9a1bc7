//! Polite full-text retrieval and metadata extraction.
//!
//! Publications are split into chunks. Chunk workers download the PDFs of
//! their chunk concurrently into a scratch directory, subject to a shared
//! [`DomainLimiter`]; extraction of a finished chunk overlaps with the
//! retrieval of later chunks. Every downloaded file is deleted as soon as
//! it has been handed to the extractor.

pub mod extract;
pub mod fetch;
pub mod limiter;
pub mod sim;
pub mod transport;

use std::collections::BTreeMap;
use std::ops::AddAssign;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use d3_core::chunk::ChunkPlan;
use d3_core::model::PublicationId;
use log::{debug, info, warn};
use serde::Serialize;
use tokio::sync::{mpsc, Semaphore};
use tokio::task::JoinSet;

use crate::store::{FulltextRecord, FulltextStatus};
use extract::{ExtractError, Extractor};
use fetch::{resolve_pdf, FetchError, RetryPolicy};
use limiter::DomainLimiter;
use transport::Transport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HarvestReport {
    /// Full texts obtained (extracted + rejected).
    pub fetched: usize,
    pub extracted: usize,
    pub rejected: usize,
    pub unreachable: usize,
}

impl HarvestReport {
    pub fn total(&self) -> usize {
        self.extracted + self.rejected + self.unreachable
    }

    fn count(&mut self, status: FulltextStatus) {
        match status {
            FulltextStatus::Extracted => {
                self.fetched += 1;
                self.extracted += 1;
            }
            FulltextStatus::Rejected => {
                self.fetched += 1;
                self.rejected += 1;
            }
            FulltextStatus::Unreachable => self.unreachable += 1,
        }
    }
}

impl AddAssign for HarvestReport {
    fn add_assign(&mut self, o: Self) {
        self.fetched += o.fetched;
        self.extracted += o.extracted;
        self.rejected += o.rejected;
        self.unreachable += o.unreachable;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkOutcome {
    pub chunk_index: usize,
    pub report: HarvestReport,
    /// One record per publication of the chunk, in chunk order.
    pub records: Vec<FulltextRecord>,
}

/// Shared harvesting resources.
#[derive(Clone)]
pub struct Harvester {
    pub transport: Arc<dyn Transport>,
    pub limiter: Arc<DomainLimiter>,
    pub extractor: Arc<dyn Extractor>,
    pub policy: RetryPolicy,
    pub work_dir: PathBuf,
}

/// File name for a publication key: characters outside `[A-Za-z0-9._-]`
/// become `_xx` hex escapes, so distinct keys never collide.
pub fn escape_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for b in key.bytes() {
        if b.is_ascii_alphanumeric() || b == b'.' || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_{b:02x}"));
        }
    }
    out
}

enum Retrieved {
    File(PathBuf),
    Unreachable(String),
}

/// Deletes the downloaded file however extraction ends.
struct Scratch(PathBuf);

impl Drop for Scratch {
    fn drop(&mut self) {
        if let Err(e) = std::fs::remove_file(&self.0) {
            if e.kind() != std::io::ErrorKind::NotFound {
                warn!("could not delete {}: {e}", self.0.display());
            }
        }
    }
}

fn describe(errors: &[FetchError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Harvester {
    fn chunk_dir(&self, chunk_index: usize) -> PathBuf {
        self.work_dir.join(format!("chunk-{chunk_index:06}"))
    }

    async fn retrieve_one(&self, dir: &Path, id: &PublicationId, links: &[String]) -> Retrieved {
        if links.is_empty() {
            return Retrieved::Unreachable("no links".into());
        }
        match resolve_pdf(self.transport.as_ref(), &self.limiter, &self.policy, links).await {
            Ok(Some(pdf)) => {
                let path = dir.join(format!("{}.pdf", escape_key(id.as_str())));
                match std::fs::write(&path, &pdf.body) {
                    Ok(()) => Retrieved::File(path),
                    Err(e) => {
                        let _ = std::fs::remove_file(&path);
                        Retrieved::Unreachable(format!("could not store download: {e}"))
                    }
                }
            }
            Ok(None) => Retrieved::Unreachable("no PDF found".into()),
            Err(errors) => Retrieved::Unreachable(describe(&errors)),
        }
    }

    /// Download every resolvable PDF of a chunk, all requests in flight at
    /// once (subject to the limiter).
    async fn retrieve_chunk(
        &self,
        chunk: &ChunkPlan,
        links: &BTreeMap<PublicationId, Vec<String>>,
    ) -> std::io::Result<Vec<(PublicationId, Retrieved)>> {
        let dir = self.chunk_dir(chunk.chunk_index);
        std::fs::create_dir_all(&dir)?;
        let mut set = JoinSet::new();
        for (pos, id) in chunk.publication_ids.iter().enumerate() {
            let me = self.clone();
            let dir = dir.clone();
            let id = id.clone();
            let links = links.get(&id).cloned().unwrap_or_default();
            set.spawn(async move {
                let r = me.retrieve_one(&dir, &id, &links).await;
                (pos, id, r)
            });
        }
        let mut out: Vec<(usize, PublicationId, Retrieved)> = Vec::with_capacity(chunk.publication_ids.len());
        while let Some(res) = set.join_next().await {
            out.push(res.expect("retrieval task panicked"));
        }
        out.sort_by_key(|(pos, _, _)| *pos);
        Ok(out.into_iter().map(|(_, id, r)| (id, r)).collect())
    }

    /// Extract metadata from downloaded files, deleting each file afterwards
    /// and the chunk directory at the end.
    async fn extract_chunk(&self, chunk_index: usize, retrieved: Vec<(PublicationId, Retrieved)>) -> ChunkOutcome {
        let extractor = Arc::clone(&self.extractor);
        let dir = self.chunk_dir(chunk_index);
        tokio::task::spawn_blocking(move || {
            let mut report = HarvestReport::default();
            let mut records = Vec::with_capacity(retrieved.len());
            for (id, r) in retrieved {
                let record = match r {
                    Retrieved::Unreachable(reason) => {
                        FulltextRecord { id, status: FulltextStatus::Unreachable, reason: Some(reason), metadata: None }
                    }
                    Retrieved::File(path) => {
                        let scratch = Scratch(path);
                        let outcome = std::fs::read(&scratch.0)
                            .map_err(|e| ExtractError::ExtractorUnavailable(e.to_string()))
                            .and_then(|bytes| extractor.extract(&id, &bytes));
                        drop(scratch);
                        match outcome {
                            Ok(mut m) => {
                                m.publication_id = id.clone();
                                FulltextRecord { id, status: FulltextStatus::Extracted, reason: None, metadata: Some(m) }
                            }
                            Err(e) => {
                                FulltextRecord { id, status: FulltextStatus::Rejected, reason: Some(e.to_string()), metadata: None }
                            }
                        }
                    }
                };
                report.count(record.status);
                records.push(record);
            }
            if let Err(e) = std::fs::remove_dir_all(&dir) {
                if e.kind() != std::io::ErrorKind::NotFound {
                    warn!("could not remove {}: {e}", dir.display());
                }
            }
            ChunkOutcome { chunk_index, report, records }
        })
        .await
        .expect("extraction task panicked")
    }

    /// Retrieve and extract one chunk. Per-publication failures end up in
    /// the report; only scratch-directory I/O errors abort the chunk.
    pub async fn harvest_chunk(
        &self,
        chunk: &ChunkPlan,
        links: &BTreeMap<PublicationId, Vec<String>>,
    ) -> std::io::Result<ChunkOutcome> {
        let retrieved = self.retrieve_chunk(chunk, links).await?;
        Ok(self.extract_chunk(chunk.chunk_index, retrieved).await)
    }

    /// Harvest all chunks with `workers` concurrent chunk retrievals and
    /// extraction pipelined behind them. `on_chunk` receives outcomes in
    /// chunk order.
    pub async fn run<F>(
        &self,
        chunks: Vec<ChunkPlan>,
        links: Arc<BTreeMap<PublicationId, Vec<String>>>,
        workers: usize,
        mut on_chunk: F,
    ) -> std::io::Result<HarvestReport>
    where
        F: FnMut(ChunkOutcome) -> std::io::Result<()>,
    {
        let workers = workers.max(1);
        let total = chunks.len();
        let slots = Arc::new(Semaphore::new(workers));
        let (tx, mut rx) = mpsc::channel::<std::io::Result<ChunkOutcome>>(workers * 2);
        let mut tasks = JoinSet::new();
        for chunk in chunks {
            let me = self.clone();
            let links = Arc::clone(&links);
            let slots = Arc::clone(&slots);
            let tx = tx.clone();
            tasks.spawn(async move {
                let retrieved = {
                    let _slot = slots.acquire_owned().await.expect("semaphore never closed");
                    debug!("retrieving chunk {}", chunk.chunk_index);
                    me.retrieve_chunk(&chunk, &links).await
                };
                // The retrieval slot is free again; extraction runs alongside
                // the next chunk's downloads.
                let outcome = match retrieved {
                    Ok(r) => Ok(me.extract_chunk(chunk.chunk_index, r).await),
                    Err(e) => Err(e),
                };
                let _ = tx.send(outcome).await;
            });
        }
        drop(tx);

        let mut pending: BTreeMap<usize, ChunkOutcome> = BTreeMap::new();
        let mut next = 0usize;
        let mut report = HarvestReport::default();
        let mut first_error = None;
        while let Some(outcome) = rx.recv().await {
            match outcome {
                Ok(o) => {
                    pending.insert(o.chunk_index, o);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                    continue;
                }
            }
            while let Some(o) = pending.remove(&next) {
                info!("chunk {next}/{total}: {:?}", o.report);
                report += o.report;
                on_chunk(o)?;
                next += 1;
            }
        }
        while tasks.join_next().await.is_some() {}
        if let Some(e) = first_error {
            return Err(e);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_is_injective_on_separators() {
        assert_eq!(escape_key("conf/acl/Mohammad20b"), "conf_2facl_2fMohammad20b");
        assert_ne!(escape_key("a/b"), escape_key("a_b"));
        assert_eq!(escape_key("a_b"), "a_5fb");
    }

    #[test]
    fn report_partitions() {
        let mut r = HarvestReport::default();
        for s in [FulltextStatus::Extracted, FulltextStatus::Rejected, FulltextStatus::Unreachable] {
            r.count(s);
        }
        assert_eq!(r, HarvestReport { fetched: 2, extracted: 1, rejected: 1, unreachable: 1 });
        assert_eq!(r.total(), 3);
    }
}
