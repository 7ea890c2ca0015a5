use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};

type Factory<T> = Box<dyn Fn(&Value) -> Result<Box<T>> + Send + Sync>;

/// Name-keyed constructors for trait objects built from JSON parameters.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&Value) -> Result<Box<T>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(f) => f(params),
            None => Err(Error::UnknownName {
                kind: self.kind,
                name: name.to_owned(),
                known: self.names().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

impl<T: ?Sized> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

/// Deserializes `params` into `P`, treating `null` as an empty object.
pub fn params<P: serde::de::DeserializeOwned>(params: &Value) -> Result<P> {
    let v = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    Ok(serde_json::from_value(v)?)
}
