//! Identifier newtypes for the finite alphabets.
//!
//! Every alphabet member is a short symbolic identifier restricted to
//! `[A-Za-z0-9_-]+`. The restriction keeps canonical state keys and CSV
//! output unambiguous without escaping. Two names are reserved by the
//! scenario format and may not be declared in any alphabet: `*` (stationary
//! table row) and `_` (no-thought marker in update-function maps).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub(crate) fn check_ident(s: &str) -> Result<(), Error> {
    if s.is_empty() {
        return Err(Error::BadIdentifier {
            id: s.to_string(),
            reason: "empty identifier".into(),
        });
    }
    if s == "*" || s == "_" {
        return Err(Error::BadIdentifier {
            id: s.to_string(),
            reason: "reserved name".into(),
        });
    }
    if let Some(c) = s
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '-'))
    {
        return Err(Error::BadIdentifier {
            id: s.to_string(),
            reason: format!("illegal character {c:?}"),
        });
    }
    Ok(())
}

macro_rules! ident_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self, Error> {
                let s = s.into();
                check_ident(&s)?;
                Ok(Self(s))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self, Error> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0)
            }
        }
    };
}

ident_type!(
    /// An action class `α` (a tool or operation category).
    ClassId
);
ident_type!(
    /// An argument `x` to an action class.
    ArgId
);
ident_type!(
    /// An observation `o`, the deterministic result of invoking `class(arg)`.
    ObsId
);
ident_type!(
    /// A latent thought symbol.
    ThoughtId
);
ident_type!(
    /// A context symbol handed to an agent (or between agents).
    ContextId
);
ident_type!(
    /// A summary symbol for lossy summarizing updates.
    SummaryId
);
ident_type!(
    /// A template parameter name.
    ParamId
);
ident_type!(
    /// A memory slot key for selective updates.
    KeyId
);
ident_type!(
    /// A memory slot value written by a selective update.
    ValueId
);

/// Fully-qualified action identifier: class plus argument.
///
/// Rendered as `class.arg`. Scenario files may abbreviate to the bare class
/// name when the class has exactly one argument; the abbreviation is
/// resolved during compilation, never stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId {
    pub class: ClassId,
    pub arg: ArgId,
}

impl ActionId {
    pub fn new(class: ClassId, arg: ArgId) -> Self {
        Self { class, arg }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.arg)
    }
}

impl fmt::Debug for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActionId({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_identifiers() {
        assert!(ClassId::new("search-web_2").is_ok());
        assert!(ThoughtId::new("t0").is_ok());
    }

    #[test]
    fn rejects_reserved_and_malformed() {
        assert!(ClassId::new("*").is_err());
        assert!(ThoughtId::new("_").is_err());
        assert!(ContextId::new("").is_err());
        assert!(ObsId::new("a b").is_err());
        assert!(ObsId::new("a.b").is_err());
    }

    #[test]
    fn action_id_display_is_dotted() {
        let a = ActionId::new(ClassId::new("A").unwrap(), ArgId::new("x").unwrap());
        assert_eq!(a.to_string(), "A.x");
    }
}
