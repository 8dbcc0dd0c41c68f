use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UMD_JSON: &str = include_str!("../../fixtures/taxonomies/umd.json");
const CHOC_AFF_JSON: &str = include_str!("../../fixtures/taxonomies/choc_aff.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub label: String,
}

/// Ordered set of class ids for one dataset.
///
/// Ids are contiguous from zero, so a class id doubles as an index into
/// per-class arrays everywhere else in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTaxonomy", into = "RawTaxonomy")]
pub struct ClassTaxonomy {
    name: String,
    classes: Vec<ClassEntry>,
    background_id: u8,
    object_class_ids: Vec<u8>,
    arm_class_id: Option<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawTaxonomy {
    name: String,
    classes: Vec<ClassEntry>,
    background_id: u8,
    object_class_ids: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arm_class_id: Option<u8>,
}

impl TryFrom<RawTaxonomy> for ClassTaxonomy {
    type Error = Error;

    fn try_from(raw: RawTaxonomy) -> Result<Self> {
        ClassTaxonomy::new(
            raw.name,
            raw.classes,
            raw.background_id,
            raw.object_class_ids,
            raw.arm_class_id,
        )
    }
}

impl From<ClassTaxonomy> for RawTaxonomy {
    fn from(t: ClassTaxonomy) -> Self {
        RawTaxonomy {
            name: t.name,
            classes: t.classes,
            background_id: t.background_id,
            object_class_ids: t.object_class_ids,
            arm_class_id: t.arm_class_id,
        }
    }
}

impl ClassTaxonomy {
    pub fn new(
        name: impl Into<String>,
        mut classes: Vec<ClassEntry>,
        background_id: u8,
        mut object_class_ids: Vec<u8>,
        arm_class_id: Option<u8>,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |msg: String| Err(Error::InvalidTaxonomy(format!("{name}: {msg}")));

        if classes.len() < 2 {
            return invalid(format!("needs at least 2 classes, found {}", classes.len()));
        }
        if classes.len() > 256 {
            return invalid("more than 256 classes cannot be stored in 8-bit masks".into());
        }
        classes.sort_by_key(|c| c.id);
        for (expected, class) in classes.iter().enumerate() {
            if class.id as usize != expected {
                return invalid("class ids must be unique and contiguous from 0".into());
            }
        }
        let count = classes.len();
        let in_range = |id: u8| (id as usize) < count;
        if !in_range(background_id) {
            return invalid(format!("background id {background_id} is not a class"));
        }
        object_class_ids.sort_unstable();
        object_class_ids.dedup();
        if let Some(&bad) = object_class_ids.iter().find(|&&id| !in_range(id)) {
            return invalid(format!("object class {bad} is not a class"));
        }
        if object_class_ids.contains(&background_id) {
            return invalid("object classes must exclude the background".into());
        }
        if let Some(arm) = arm_class_id {
            if !in_range(arm) || arm == background_id {
                return invalid(format!("arm class {arm} is not a foreground class"));
            }
            if object_class_ids.contains(&arm) {
                return invalid("object classes must exclude the arm class".into());
            }
        }
        Ok(ClassTaxonomy {
            name,
            classes,
            background_id,
            object_class_ids,
            arm_class_id,
        })
    }

    /// Tabletop taxonomy: background plus seven affordances.
    pub fn umd() -> Self {
        serde_json::from_str(UMD_JSON).expect("shipped UMD taxonomy is valid")
    }

    /// Hand-held container taxonomy: background, graspable, contain, arm.
    pub fn choc_aff() -> Self {
        serde_json::from_str(CHOC_AFF_JSON).expect("shipped CHOC-AFF taxonomy is valid")
    }

    /// Looks up a shipped taxonomy by name (`umd`, `choc-aff`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "umd" => Some(Self::umd()),
            "choc-aff" | "chocaff" | "choc" => Some(Self::choc_aff()),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn background_id(&self) -> u8 {
        self.background_id
    }

    pub fn object_class_ids(&self) -> &[u8] {
        &self.object_class_ids
    }

    pub fn arm_class_id(&self) -> Option<u8> {
        self.arm_class_id
    }

    pub fn contains(&self, id: u8) -> bool {
        (id as usize) < self.classes.len()
    }

    pub fn label(&self, id: u8) -> Option<&str> {
        self.classes.get(id as usize).map(|c| c.label.as_str())
    }

    pub fn id_of(&self, label: &str) -> Option<u8> {
        self.classes.iter().find(|c| c.label == label).map(|c| c.id)
    }

    /// Every class except the background, in id order. These are the rows of
    /// a report and the set the macro average runs over.
    pub fn foreground_ids(&self) -> Vec<u8> {
        self.classes
            .iter()
            .map(|c| c.id)
            .filter(|&id| id != self.background_id)
            .collect()
    }
}
