//! Shared-backbone resource model: one set of pinned backbone components
//! (vision encoder, query transformer, language model) plus lightweight
//! hot-swappable expert adapters under a byte budget. Adapters with no
//! outstanding lease are evicted in least-recently-released order when a
//! new adapter needs room. Loads and sizes are simulated, which makes the
//! cost story measurable without any model weights.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("component already declared: {0}")]
    DuplicateComponent(String),
    #[error("unknown adapter: {0}")]
    UnknownAdapter(String),
    #[error("budget exhausted: need {needed_bytes} bytes for {adapter} but only {reclaimable_bytes} are reclaimable")]
    BudgetExhausted {
        adapter: String,
        needed_bytes: u64,
        reclaimable_bytes: u64,
    },
    #[error("lease {0} already released")]
    DoubleRelease(u64),
    #[error("no components declared for {0} experts")]
    NoComponents(usize),
    #[error("invalid component spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Backbone,
    Adapter,
}

/// Declared size and simulated load cost of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    pub kind: ComponentKind,
    pub size_bytes: u64,
    #[serde(default)]
    pub load_cost_ms: u64,
}

impl ComponentSpec {
    pub fn backbone(name: impl Into<String>, size_bytes: u64) -> Self {
        Self {
            name: name.into(),
            kind: ComponentKind::Backbone,
            size_bytes,
            load_cost_ms: 0,
        }
    }

    pub fn adapter(name: impl Into<String>, size_bytes: u64) -> Self {
        Self {
            name: name.into(),
            kind: ComponentKind::Adapter,
            size_bytes,
            load_cost_ms: 0,
        }
    }
}

/// Proof that an adapter is in use; the adapter cannot be evicted while any
/// lease on it is outstanding. Release through [`ResourceLedger::release`].
#[derive(Debug, Clone)]
pub struct AdapterLease {
    id: u64,
    adapter: String,
}

impl AdapterLease {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn adapter(&self) -> &str {
        &self.adapter
    }
}

/// Unified-vs-naive storage comparison for `n_experts` experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub n_experts: usize,
    /// One shared backbone plus the experts' adapters.
    pub unified_bytes: u64,
    /// Every expert ships the full bundle for itself.
    pub naive_bytes: u64,
    pub ratio: f64,
}

/// Declared components, the resident set, reference counts, and the byte
/// budget. Not internally synchronized; wrap in a mutex for shared use.
pub struct ResourceLedger {
    declared: BTreeMap<String, ComponentSpec>,
    declaration_order: Vec<String>,
    resident: BTreeMap<String, u64>, // name -> refcount
    budget_bytes: u64,
    evictions: u64,
    load_events: BTreeMap<String, u64>,
    last_release: HashMap<String, u64>,
    outstanding: HashMap<u64, String>,
    clock: u64,
    next_lease_id: u64,
    total_acquires: u64,
    total_releases: u64,
    simulated_load_ms: u64,
}

impl ResourceLedger {
    pub fn new(budget_bytes: u64) -> Result<Self, LedgerError> {
        if budget_bytes == 0 {
            return Err(LedgerError::InvalidSpec("budget must be positive".into()));
        }
        Ok(Self {
            declared: BTreeMap::new(),
            declaration_order: Vec::new(),
            resident: BTreeMap::new(),
            budget_bytes,
            evictions: 0,
            load_events: BTreeMap::new(),
            last_release: HashMap::new(),
            outstanding: HashMap::new(),
            clock: 0,
            next_lease_id: 1,
            total_acquires: 0,
            total_releases: 0,
            simulated_load_ms: 0,
        })
    }

    pub fn declare_component(&mut self, spec: ComponentSpec) -> Result<(), LedgerError> {
        if spec.name.is_empty() {
            return Err(LedgerError::InvalidSpec("component name is empty".into()));
        }
        if spec.size_bytes == 0 {
            return Err(LedgerError::InvalidSpec(format!(
                "component {:?} must have positive size",
                spec.name
            )));
        }
        if self.declared.contains_key(&spec.name) {
            return Err(LedgerError::DuplicateComponent(spec.name));
        }
        self.declaration_order.push(spec.name.clone());
        self.declared.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.declared.contains_key(name)
    }

    /// Loads the adapter (and, on first need, the backbone), evicting idle
    /// adapters in least-recently-released order until it fits. Fails with
    /// the ledger untouched when even a full sweep of idle adapters cannot
    /// make room.
    pub fn acquire(&mut self, adapter_name: &str) -> Result<AdapterLease, LedgerError> {
        let spec = match self.declared.get(adapter_name) {
            Some(spec) if spec.kind == ComponentKind::Adapter => spec.clone(),
            _ => return Err(LedgerError::UnknownAdapter(adapter_name.to_string())),
        };

        if self.resident.contains_key(adapter_name) {
            // Warm hit: no load, no eviction.
            *self.resident.get_mut(adapter_name).expect("checked") += 1;
            return Ok(self.issue_lease(adapter_name));
        }

        // Plan first, mutate only if the whole acquire is feasible.
        let pending_backbones: Vec<ComponentSpec> = self
            .declaration_order
            .iter()
            .filter_map(|name| self.declared.get(name))
            .filter(|s| s.kind == ComponentKind::Backbone && !self.resident.contains_key(&s.name))
            .cloned()
            .collect();
        let pending_bytes: u64 = pending_backbones.iter().map(|s| s.size_bytes).sum();
        let mut needed = self
            .resident_bytes()
            .saturating_add(pending_bytes)
            .saturating_add(spec.size_bytes);

        let mut planned_evictions: Vec<String> = Vec::new();
        if needed > self.budget_bytes {
            let mut idle: Vec<(u64, String)> = self
                .resident
                .iter()
                .filter(|(name, refcount)| {
                    **refcount == 0
                        && self
                            .declared
                            .get(*name)
                            .is_some_and(|s| s.kind == ComponentKind::Adapter)
                })
                .map(|(name, _)| {
                    (
                        self.last_release.get(name).copied().unwrap_or(0),
                        name.clone(),
                    )
                })
                .collect();
            idle.sort();
            for (_, name) in idle {
                if needed <= self.budget_bytes {
                    break;
                }
                let size = self.declared[&name].size_bytes;
                needed -= size;
                planned_evictions.push(name);
            }
            if needed > self.budget_bytes {
                let reclaimable: u64 = planned_evictions
                    .iter()
                    .map(|n| self.declared[n].size_bytes)
                    .sum();
                return Err(LedgerError::BudgetExhausted {
                    adapter: adapter_name.to_string(),
                    needed_bytes: spec.size_bytes,
                    reclaimable_bytes: reclaimable,
                });
            }
        }

        for backbone in pending_backbones {
            // Backbones are pinned: refcount 1 for the ledger's lifetime.
            self.resident.insert(backbone.name.clone(), 1);
            *self.load_events.entry(backbone.name.clone()).or_insert(0) += 1;
            self.simulated_load_ms += backbone.load_cost_ms;
        }
        for name in planned_evictions {
            self.resident.remove(&name);
            self.last_release.remove(&name);
            self.evictions += 1;
        }
        self.resident.insert(adapter_name.to_string(), 1);
        *self
            .load_events
            .entry(adapter_name.to_string())
            .or_insert(0) += 1;
        self.simulated_load_ms += spec.load_cost_ms;

        debug_assert!(self.resident_bytes() <= self.budget_bytes);
        Ok(self.issue_lease(adapter_name))
    }

    fn issue_lease(&mut self, adapter_name: &str) -> AdapterLease {
        let id = self.next_lease_id;
        self.next_lease_id += 1;
        self.total_acquires += 1;
        self.outstanding.insert(id, adapter_name.to_string());
        AdapterLease {
            id,
            adapter: adapter_name.to_string(),
        }
    }

    /// Decrements the lease's adapter refcount. The adapter stays resident
    /// until budget pressure evicts it.
    pub fn release(&mut self, lease: &AdapterLease) -> Result<(), LedgerError> {
        let Some(adapter) = self.outstanding.remove(&lease.id) else {
            return Err(LedgerError::DoubleRelease(lease.id));
        };
        self.total_releases += 1;
        self.clock += 1;
        let refcount = self
            .resident
            .get_mut(&adapter)
            .expect("leased adapter must be resident");
        *refcount -= 1;
        if *refcount == 0 {
            self.last_release.insert(adapter, self.clock);
        }
        Ok(())
    }

    /// Storage comparison over the first `n_experts` declared adapters.
    pub fn savings_report(&self, n_experts: usize) -> Result<SavingsReport, LedgerError> {
        if n_experts == 0 {
            return Err(LedgerError::NoComponents(0));
        }
        let backbone_total: u64 = self
            .declared
            .values()
            .filter(|s| s.kind == ComponentKind::Backbone)
            .map(|s| s.size_bytes)
            .sum();
        let adapters: Vec<u64> = self
            .declaration_order
            .iter()
            .filter_map(|name| self.declared.get(name))
            .filter(|s| s.kind == ComponentKind::Adapter)
            .map(|s| s.size_bytes)
            .collect();
        if backbone_total == 0 || adapters.len() < n_experts {
            return Err(LedgerError::NoComponents(n_experts));
        }
        let adapter_total: u64 = adapters.iter().take(n_experts).sum();
        let unified_bytes = backbone_total + adapter_total;
        let naive_bytes = n_experts as u64 * unified_bytes;
        Ok(SavingsReport {
            n_experts,
            unified_bytes,
            naive_bytes,
            ratio: naive_bytes as f64 / unified_bytes as f64,
        })
    }

    pub fn resident_bytes(&self) -> u64 {
        self.resident
            .keys()
            .map(|name| self.declared[name].size_bytes)
            .sum()
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn outstanding_leases(&self) -> usize {
        self.outstanding.len()
    }

    pub fn total_acquires(&self) -> u64 {
        self.total_acquires
    }

    pub fn total_releases(&self) -> u64 {
        self.total_releases
    }

    pub fn load_events(&self, name: &str) -> u64 {
        self.load_events.get(name).copied().unwrap_or(0)
    }

    pub fn is_resident(&self, name: &str) -> bool {
        self.resident.contains_key(name)
    }

    pub fn refcount(&self, name: &str) -> u64 {
        self.resident.get(name).copied().unwrap_or(0)
    }

    pub fn simulated_load_ms(&self) -> u64 {
        self.simulated_load_ms
    }
}
