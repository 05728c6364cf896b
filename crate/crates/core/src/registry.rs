//! Expert registry: descriptors plus precomputed description embeddings,
//! persisted to a single JSON document. Readers work on immutable snapshots;
//! writes serialize through a single writer gate and swap the snapshot
//! pointer, so a reader always sees a complete old or complete new state.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_text, EmbedError, EmbeddingProvider, SentenceEmbedding};

pub const REGISTRY_SCHEMA_VERSION: u32 = 1;
pub const MAX_ID_LEN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("duplicate expert id: {0}")]
    DuplicateId(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("failed to embed description for {id}: {source}")]
    EmbeddingFailure { id: String, source: EmbedError },
    #[error("unknown expert: {0}")]
    UnknownExpert(String),
    #[error("registry io failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("registry parse failure: {0}")]
    ParseFailure(String),
}

/// Identity, description, adapter artifact, and backend endpoint of one
/// domain expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertDescriptor {
    pub id: String,
    pub display_name: String,
    pub description: String,
    pub adapter_ref: String,
    #[serde(default)]
    pub backend_endpoint: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    pub created_at: DateTime<Utc>,
}

impl ExpertDescriptor {
    pub fn new(
        id: impl Into<String>,
        display_name: impl Into<String>,
        description: impl Into<String>,
        adapter_ref: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            display_name: display_name.into(),
            description: description.into(),
            adapter_ref: adapter_ref.into(),
            backend_endpoint: None,
            tags: Vec::new(),
            created_at: Utc::now(),
        }
    }

    /// Structural validation: slug id, non-empty adapter_ref. Description
    /// emptiness is surfaced by the embedding step instead.
    pub fn validate(&self) -> Result<(), RegistryError> {
        if !is_valid_id(&self.id) {
            return Err(RegistryError::InvalidDescriptor(format!(
                "id {:?} must match ^[a-z0-9][a-z0-9_-]{{0,63}}$",
                self.id
            )));
        }
        if self.adapter_ref.is_empty() {
            return Err(RegistryError::InvalidDescriptor(format!(
                "expert {:?} has an empty adapter_ref",
                self.id
            )));
        }
        Ok(())
    }
}

/// Lowercase slug: `^[a-z0-9][a-z0-9_-]{0,63}$`.
pub fn is_valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if !(first.is_ascii_lowercase() || first.is_ascii_digit()) {
        return false;
    }
    if id.len() > MAX_ID_LEN {
        return false;
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

/// Precomputed description embeddings keyed by expert id.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionIndex {
    entries: BTreeMap<String, SentenceEmbedding>,
    provider_fingerprint: String,
}

impl DescriptionIndex {
    fn build(
        experts: &[ExpertDescriptor],
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, RegistryError> {
        let mut entries = BTreeMap::new();
        for expert in experts {
            let embedding = embed_text(provider, &expert.description).map_err(|source| {
                RegistryError::EmbeddingFailure {
                    id: expert.id.clone(),
                    source,
                }
            })?;
            entries.insert(expert.id.clone(), embedding);
        }
        Ok(Self {
            entries,
            provider_fingerprint: provider.config_hash().to_string(),
        })
    }

    pub fn get(&self, id: &str) -> Option<&SentenceEmbedding> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> &BTreeMap<String, SentenceEmbedding> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }
}

/// Immutable view of the registry at one version.
#[derive(Debug, Clone)]
pub struct RegistrySnapshot {
    experts: Vec<ExpertDescriptor>,
    index: DescriptionIndex,
    version: u64,
}

impl RegistrySnapshot {
    /// Experts in ascending id order.
    pub fn experts(&self) -> &[ExpertDescriptor] {
        &self.experts
    }

    pub fn expert(&self, id: &str) -> Option<&ExpertDescriptor> {
        self.experts.iter().find(|e| e.id == id)
    }

    pub fn index(&self) -> &DescriptionIndex {
        &self.index
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }
}

/// On-disk document. Key names and schema version are part of the contract;
/// unknown keys are rejected.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    schema_version: u32,
    experts: Vec<ExpertDescriptor>,
}

/// The mutable store. Cheap snapshot reads, serialized writes, optional
/// write-through persistence.
pub struct Registry {
    snapshot: RwLock<Arc<RegistrySnapshot>>,
    provider: RwLock<Arc<dyn EmbeddingProvider>>,
    path: Option<PathBuf>,
    writer_gate: Mutex<()>,
}

impl Registry {
    /// In-memory registry (no persistence). Used by tests and the FFI layer.
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        let snapshot = RegistrySnapshot {
            experts: Vec::new(),
            index: DescriptionIndex {
                entries: BTreeMap::new(),
                provider_fingerprint: provider.config_hash().to_string(),
            },
            version: 0,
        };
        Self {
            snapshot: RwLock::new(Arc::new(snapshot)),
            provider: RwLock::new(provider),
            path: None,
            writer_gate: Mutex::new(()),
        }
    }

    /// Registry persisted at `path`. Loads the file when it exists,
    /// otherwise starts empty; every mutation is written back before it is
    /// acknowledged.
    pub fn open(
        path: impl Into<PathBuf>,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, RegistryError> {
        let path = path.into();
        let mut registry = if path.exists() {
            Self::load(&path, provider)?
        } else {
            Self::new(provider)
        };
        registry.path = Some(path);
        Ok(registry)
    }

    /// Parses and validates a registry file; description embeddings are
    /// recomputed under the given provider, never read from disk.
    pub fn load(
        path: impl AsRef<Path>,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, RegistryError> {
        let raw = std::fs::read_to_string(path.as_ref())?;
        let file: RegistryFile = serde_json::from_str(&raw)
            .map_err(|e| RegistryError::ParseFailure(e.to_string()))?;
        if file.schema_version != REGISTRY_SCHEMA_VERSION {
            return Err(RegistryError::ParseFailure(format!(
                "unsupported schema_version {} (expected {REGISTRY_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for expert in &file.experts {
            expert
                .validate()
                .map_err(|e| RegistryError::ParseFailure(e.to_string()))?;
            if !seen.insert(expert.id.clone()) {
                return Err(RegistryError::ParseFailure(format!(
                    "duplicate expert id {:?} in registry file",
                    expert.id
                )));
            }
        }
        let mut experts = file.experts;
        experts.sort_by(|a, b| a.id.cmp(&b.id));
        let index = DescriptionIndex::build(&experts, provider.as_ref())?;
        let version = experts.len() as u64;
        Ok(Self {
            snapshot: RwLock::new(Arc::new(RegistrySnapshot {
                experts,
                index,
                version,
            })),
            provider: RwLock::new(provider),
            path: None,
            writer_gate: Mutex::new(()),
        })
    }

    /// Current immutable snapshot.
    pub fn snapshot(&self) -> Arc<RegistrySnapshot> {
        Arc::clone(&self.snapshot.read().expect("registry lock poisoned"))
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version()
    }

    pub fn provider(&self) -> Arc<dyn EmbeddingProvider> {
        Arc::clone(&self.provider.read().expect("provider lock poisoned"))
    }

    /// Experts in ascending id order.
    pub fn list_experts(&self) -> Vec<ExpertDescriptor> {
        self.snapshot().experts().to_vec()
    }

    /// Validates, embeds the description, persists, and publishes the new
    /// snapshot. Returns the new version.
    pub fn register_expert(&self, descriptor: ExpertDescriptor) -> Result<u64, RegistryError> {
        descriptor.validate()?;
        let _gate = self.writer_gate.lock().expect("writer gate poisoned");
        let current = self.snapshot();
        if current.expert(&descriptor.id).is_some() {
            return Err(RegistryError::DuplicateId(descriptor.id));
        }
        let provider = self.provider();
        let embedding =
            embed_text(provider.as_ref(), &descriptor.description).map_err(|source| {
                RegistryError::EmbeddingFailure {
                    id: descriptor.id.clone(),
                    source,
                }
            })?;

        let mut experts = current.experts.clone();
        let mut index = current.index.clone();
        index.entries.insert(descriptor.id.clone(), embedding);
        experts.push(descriptor);
        experts.sort_by(|a, b| a.id.cmp(&b.id));
        let next = RegistrySnapshot {
            experts,
            index,
            version: current.version + 1,
        };
        self.commit(next)
    }

    /// Removes an expert and its index entry. Returns the new version.
    pub fn remove_expert(&self, id: &str) -> Result<u64, RegistryError> {
        let _gate = self.writer_gate.lock().expect("writer gate poisoned");
        let current = self.snapshot();
        if current.expert(id).is_none() {
            return Err(RegistryError::UnknownExpert(id.to_string()));
        }
        let mut experts = current.experts.clone();
        experts.retain(|e| e.id != id);
        let mut index = current.index.clone();
        index.entries.remove(id);
        let next = RegistrySnapshot {
            experts,
            index,
            version: current.version + 1,
        };
        self.commit(next)
    }

    /// Re-embeds every description under `provider` and swaps the index
    /// atomically. Any single failure rejects the whole rebuild and the old
    /// index stays in place.
    pub fn rebuild_index(
        &self,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Arc<RegistrySnapshot>, RegistryError> {
        let _gate = self.writer_gate.lock().expect("writer gate poisoned");
        let current = self.snapshot();
        let index = DescriptionIndex::build(&current.experts, provider.as_ref())?;
        let next = RegistrySnapshot {
            experts: current.experts.clone(),
            index,
            version: current.version + 1,
        };
        *self.provider.write().expect("provider lock poisoned") = provider;
        self.commit(next)?;
        Ok(self.snapshot())
    }

    /// Serializes the current snapshot to `path` (descriptors only, no
    /// embeddings).
    pub fn save_to(&self, path: impl AsRef<Path>) -> Result<(), RegistryError> {
        write_registry_file(path.as_ref(), self.snapshot().experts())
    }

    /// Persist (when configured) then swap the snapshot pointer. Callers
    /// hold the writer gate.
    fn commit(&self, next: RegistrySnapshot) -> Result<u64, RegistryError> {
        if let Some(path) = &self.path {
            write_registry_file(path, &next.experts)?;
        }
        let version = next.version;
        *self.snapshot.write().expect("registry lock poisoned") = Arc::new(next);
        Ok(version)
    }
}

/// Atomic write: temp file in the same directory, then rename.
fn write_registry_file(path: &Path, experts: &[ExpertDescriptor]) -> Result<(), RegistryError> {
    let file = RegistryFile {
        schema_version: REGISTRY_SCHEMA_VERSION,
        experts: experts.to_vec(),
    };
    let body = serde_json::to_string_pretty(&file)
        .map_err(|e| RegistryError::ParseFailure(e.to_string()))?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body + "\n")?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
