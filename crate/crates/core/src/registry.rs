//! Name-keyed registries for interchangeable strategies.
//!
//! Each strategy family (primal solvers, imputers, simulators) owns a global
//! registry preloaded with the built-in implementations. Callers select an
//! implementation by name at runtime and may register their own.

use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{AssistError, Result};

type Factory<T> = Arc<dyn Fn() -> Box<T> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(String, Factory<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds or replaces the factory registered under `name`.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        let factory: Factory<T> = Arc::new(factory);
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = factory,
            None => self.entries.push((name.to_string(), factory)),
        }
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f())
            .ok_or_else(|| AssistError::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }
}

/// Lazily built global registry guarded for concurrent reads.
pub struct GlobalRegistry<T: ?Sized + 'static> {
    cell: OnceLock<RwLock<Registry<T>>>,
    init: fn() -> Registry<T>,
}

impl<T: ?Sized + 'static> GlobalRegistry<T> {
    pub const fn new(init: fn() -> Registry<T>) -> Self {
        GlobalRegistry {
            cell: OnceLock::new(),
            init,
        }
    }

    fn lock(&self) -> &RwLock<Registry<T>> {
        self.cell.get_or_init(|| RwLock::new((self.init)()))
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        self.lock().read().expect("registry lock poisoned").create(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.lock().read().expect("registry lock poisoned").names()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lock().read().expect("registry lock poisoned").contains(name)
    }

    pub fn register<F>(&self, name: &str, factory: F)
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        self.lock()
            .write()
            .expect("registry lock poisoned")
            .register(name, factory);
    }
}
