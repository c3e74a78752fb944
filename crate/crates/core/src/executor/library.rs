use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Category;

pub const CARD_FILE: &str = "card.json";

/// One curated library entry: the retrieval corpus of the executor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorCard {
    pub name: String,
    pub description: String,
    pub tags: Vec<String>,
    /// Parameter name to type name.
    pub param_schema: BTreeMap<String, String>,
    pub snippet: String,
    pub category: Category,
    /// Task the snippet solves exactly; used by the library self-test.
    pub sample_task: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CardManifest {
    name: String,
    description: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    param_schema: BTreeMap<String, String>,
    category: Category,
    #[serde(default = "default_snippet")]
    snippet_file: String,
    #[serde(default)]
    sample_task: Option<String>,
}

fn default_snippet() -> String {
    "snippet.py".into()
}

pub fn load_card(dir: &Path) -> Result<OperatorCard> {
    let path = dir.join(CARD_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let manifest: CardManifest =
        serde_path_to_error::deserialize(de).map_err(|e| Error::Manifest {
            file: path.clone(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let bad = |field: &str, message: &str| Error::Manifest {
        file: path.clone(),
        field: field.into(),
        message: message.into(),
    };
    if manifest.name.trim().is_empty() {
        return Err(bad("name", "card name must not be empty"));
    }
    if manifest.description.trim().is_empty() {
        return Err(bad("description", "description must not be empty"));
    }
    let snippet_path = dir.join(&manifest.snippet_file);
    let snippet = fs::read_to_string(&snippet_path).map_err(|e| Error::io(&snippet_path, e))?;
    if snippet.trim().is_empty() {
        return Err(bad("snippet_file", "snippet must not be empty"));
    }
    Ok(OperatorCard {
        name: manifest.name,
        description: manifest.description,
        tags: manifest.tags,
        param_schema: manifest.param_schema,
        snippet,
        category: manifest.category,
        sample_task: manifest.sample_task,
    })
}

/// Loads every `<dir>/<card>/card.json`, sorted by name. Card names must be
/// unique.
pub fn load_library(dir: &Path) -> Result<Vec<OperatorCard>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CARD_FILE).is_file())
        .collect();
    dirs.sort();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut cards = Vec::with_capacity(dirs.len());
    for d in dirs {
        let card = load_card(&d)?;
        let path = d.join(CARD_FILE);
        if let Some(first) = seen.get(&card.name) {
            return Err(Error::Conflict {
                id: card.name,
                first: first.clone(),
                second: path,
            });
        }
        seen.insert(card.name.clone(), path);
        cards.push(card);
    }
    cards.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cards)
}
