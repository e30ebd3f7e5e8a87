use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetRole {
    IdTrain,
    IdTest,
    OodTest,
}

impl DatasetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetRole::IdTrain => "id-train",
            DatasetRole::IdTest => "id-test",
            DatasetRole::OodTest => "ood-test",
        }
    }
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id-train" => Ok(DatasetRole::IdTrain),
            "id-test" => Ok(DatasetRole::IdTest),
            "ood-test" => Ok(DatasetRole::OodTest),
            other => Err(Error::Config(format!("unknown dataset role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub role: DatasetRole,
    pub name: String,
    pub embedding_path: PathBuf,
    pub logit_path: Option<PathBuf>,
}

/// Tab-separated dataset listing: `role<TAB>name<TAB>embeddings[<TAB>logits]`.
///
/// Blank lines and lines starting with `#` are ignored. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::Config(format!(
                    "manifest line {}: expected 3 or 4 tab-separated fields, got {}",
                    n + 1,
                    fields.len()
                )));
            }
            if fields[1].is_empty() || fields[2].is_empty() {
                return Err(Error::Config(format!("manifest line {}: empty field", n + 1)));
            }
            entries.push(DatasetEntry {
                role: fields[0].parse()?,
                name: fields[1].to_string(),
                embedding_path: resolve(fields[2]),
                logit_path: fields.get(3).filter(|s| !s.is_empty()).map(|s| resolve(s)),
            });
        }
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}",
                e.role,
                e.name,
                e.embedding_path.display()
            ));
            if let Some(l) = &e.logit_path {
                out.push_str(&format!("\t{}", l.display()));
            }
            out.push('\n');
        }
        out
    }

    pub fn with_role(&self, role: DatasetRole) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    fn exactly_one(&self, role: DatasetRole) -> Result<&DatasetEntry> {
        let mut it = self.with_role(role);
        match (it.next(), it.next()) {
            (Some(e), None) => Ok(e),
            (None, _) => Err(Error::Config(format!("manifest has no {role} entry"))),
            (Some(_), Some(_)) => Err(Error::Config(format!(
                "manifest has more than one {role} entry"
            ))),
        }
    }

    pub fn id_train(&self) -> Result<&DatasetEntry> {
        self.exactly_one(DatasetRole::IdTrain)
    }

    pub fn id_test(&self) -> Result<&DatasetEntry> {
        self.exactly_one(DatasetRole::IdTest)
    }

    pub fn ood_tests(&self) -> Result<Vec<&DatasetEntry>> {
        let v: Vec<_> = self.with_role(DatasetRole::OodTest).collect();
        if v.is_empty() {
            return Err(Error::Config("manifest has no ood-test entry".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# comment\n\
        id-train\tvocal\ttrain.oode\n\
        id-test\tvocal-test\ttest.oode\ttest.logits.oode\n\
        \n\
        ood-test\tesc50\t/abs/esc.oode\n";

    #[test]
    fn parses_roles_and_resolves_paths() {
        let m = DatasetManifest::parse(TEXT, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.id_train().unwrap().embedding_path, Path::new("/data/train.oode"));
        assert_eq!(
            m.id_test().unwrap().logit_path.as_deref(),
            Some(Path::new("/data/test.logits.oode"))
        );
        assert_eq!(m.ood_tests().unwrap()[0].embedding_path, Path::new("/abs/esc.oode"));
    }

    #[test]
    fn role_cardinality() {
        let m = DatasetManifest::parse("id-test\ta\ta.oode\n", Path::new("")).unwrap();
        assert!(matches!(m.id_train(), Err(Error::Config(_))));
        assert!(matches!(m.ood_tests(), Err(Error::Config(_))));
        let two = "id-train\ta\ta.oode\nid-train\tb\tb.oode\n";
        let m = DatasetManifest::parse(two, Path::new("")).unwrap();
        assert!(matches!(m.id_train(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_lines() {
        assert!(DatasetManifest::parse("train\ta\ta.oode\n", Path::new("")).is_err());
        assert!(DatasetManifest::parse("id-train a a.oode\n", Path::new("")).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = DatasetManifest::parse(TEXT, Path::new("/data")).unwrap();
        let again = DatasetManifest::parse(&m.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(m, again);
    }
}
