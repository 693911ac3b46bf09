//! Mean tables computed once per bias and reused across commands.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use election_core::exact::{exact_mean_table, MeanTable};
use election_core::{Result, SplitParams};

/// `E(H_n)` tables keyed by the exact bits of `p`. A request for a larger `N`
/// replaces the stored table.
#[derive(Debug, Default)]
pub struct MeanCache {
    tables: Mutex<HashMap<u64, Arc<MeanTable>>>,
}

impl MeanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, max_n: usize, params: &SplitParams) -> Result<Arc<MeanTable>> {
        let key = params.key();
        if let Some(t) = self.tables.lock().unwrap().get(&key) {
            if t.max_n() >= max_n {
                return Ok(Arc::clone(t));
            }
        }
        let table = Arc::new(exact_mean_table(max_n, params)?);
        let mut tables = self.tables.lock().unwrap();
        let entry = tables.entry(key).or_insert_with(|| Arc::clone(&table));
        if entry.max_n() < max_n {
            *entry = Arc::clone(&table);
        }
        Ok(Arc::clone(entry))
    }

    pub fn len(&self) -> usize {
        self.tables.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
