use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::PublicationId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunk_index: usize,
    pub publication_ids: Vec<PublicationId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("chunk size must be at least 1")]
pub struct InvalidChunkSize;

/// Split ids into consecutive equally sized chunks; only the last may be shorter.
pub fn plan_chunks(ids: &[PublicationId], chunk_size: usize) -> Result<Vec<ChunkPlan>, InvalidChunkSize> {
    if chunk_size == 0 {
        return Err(InvalidChunkSize);
    }
    Ok(ids
        .chunks(chunk_size)
        .enumerate()
        .map(|(chunk_index, c)| ChunkPlan { chunk_index, publication_ids: c.to_vec() })
        .collect())
}
