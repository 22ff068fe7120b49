use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::packet::{RouteTableId, SvcId};

/// A configuration scope. Flows cached under an older version are stale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceObject {
    pub svc_id: SvcId,
    pub version: u16,
    #[serde(default)]
    pub tables: Vec<RouteTableId>,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceRegistry {
    services: BTreeMap<SvcId, ServiceObject>,
    by_table: BTreeMap<RouteTableId, SvcId>,
}

impl ServiceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, svc: ServiceObject) -> Result<(), ControlError> {
        if self.services.contains_key(&svc.svc_id) {
            return Err(ControlError::DuplicateService(svc.svc_id));
        }
        for t in &svc.tables {
            if let Some(other) = self.by_table.get(t) {
                return Err(ControlError::TableAlreadyBound { table: *t, svc_id: *other });
            }
        }
        for t in &svc.tables {
            self.by_table.insert(*t, svc.svc_id);
        }
        self.services.insert(svc.svc_id, svc);
        Ok(())
    }

    pub fn get(&self, svc_id: SvcId) -> Option<&ServiceObject> {
        self.services.get(&svc_id)
    }

    pub fn version(&self, svc_id: SvcId) -> Option<u16> {
        self.services.get(&svc_id).map(|s| s.version)
    }

    pub fn service_for_table(&self, table: RouteTableId) -> Option<SvcId> {
        self.by_table.get(&table).copied()
    }

    /// Increments the version by one. Wrap-around is refused.
    pub fn bump(&mut self, svc_id: SvcId) -> Result<u16, ControlError> {
        let svc = self.services.get_mut(&svc_id).ok_or(ControlError::UnknownService(svc_id))?;
        svc.version = svc.version.checked_add(1).ok_or(ControlError::VersionExhausted(svc_id))?;
        Ok(svc.version)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ServiceObject> {
        self.services.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_increments() {
        let mut r = ServiceRegistry::new();
        r.register(ServiceObject { svc_id: 1, version: 3, tables: vec![7] }).unwrap();
        assert_eq!(r.bump(1), Ok(4));
        assert_eq!(r.version(1), Some(4));
        assert_eq!(r.service_for_table(7), Some(1));
        assert_eq!(r.bump(2), Err(ControlError::UnknownService(2)));
    }

    #[test]
    fn version_wrap_refused() {
        let mut r = ServiceRegistry::new();
        r.register(ServiceObject { svc_id: 1, version: u16::MAX, tables: vec![] }).unwrap();
        assert_eq!(r.bump(1), Err(ControlError::VersionExhausted(1)));
    }

    #[test]
    fn table_bound_once() {
        let mut r = ServiceRegistry::new();
        r.register(ServiceObject { svc_id: 1, version: 1, tables: vec![7] }).unwrap();
        assert!(r.register(ServiceObject { svc_id: 2, version: 1, tables: vec![7] }).is_err());
        assert!(r.register(ServiceObject { svc_id: 1, version: 1, tables: vec![] }).is_err());
    }
}
