use rustc_hash::FxHashMap;

/// Out-of-vocabulary index shared by every key past the cap.
pub const OOV_INDEX: usize = 0;

/// Stable string-to-index dictionary. Indices start at 1; index 0 is reserved
/// for out-of-vocabulary keys once `cap` distinct keys have been assigned.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    map: FxHashMap<String, usize>,
    cap: usize,
}

impl Vocabulary {
    pub fn new(cap: usize) -> Self {
        Self {
            map: FxHashMap::default(),
            cap,
        }
    }

    pub fn encode(&mut self, key: &str) -> usize {
        if let Some(&i) = self.map.get(key) {
            return i;
        }
        if self.map.len() >= self.cap {
            return OOV_INDEX;
        }
        let i = self.map.len() + 1;
        self.map.insert(key.to_owned(), i);
        i
    }

    /// Lookup without assigning.
    pub fn get(&self, key: &str) -> usize {
        self.map.get(key).copied().unwrap_or(OOV_INDEX)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Embedding rows needed to cover every index this vocabulary can emit.
    pub fn table_size(&self) -> usize {
        self.cap + 1
    }
}
