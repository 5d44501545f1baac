use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ORGANIZATION_PROMPT: &str = "A chat between a curious user and an extremely picky inspector for the R&D lab. The inspector gives detailed answers to the user's questions. USER: <image>\\ Is the lab organized or disorganized?: ASSISTANT:";

/// The site rule follows the first sentence with no separating space.
pub const FLOOR_PROMPT: &str = "A chat between a curious user and an extremely picky inspector for the R&D lab. There should be no objects on the floor.The inspector gives detailed answers to the user's questions. USER: <image>\\ What is on the floor?: ASSISTANT:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Organization,
    Floor,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Organization => "organization",
            TemplateId::Floor => "floor",
        }
    }

    pub fn template(self) -> &'static PromptTemplate {
        TEMPLATES.iter().find(|t| t.id == self).expect("every id is registered")
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "organization" => Ok(TemplateId::Organization),
            "floor" => Ok(TemplateId::Floor),
            other => Err(Error::UnknownTemplate(other.to_string())),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: &'static str,
    pub question: &'static str,
}

pub static TEMPLATES: [PromptTemplate; 2] = [
    PromptTemplate { id: TemplateId::Organization, text: ORGANIZATION_PROMPT, question: "Is the lab organized or disorganized?" },
    PromptTemplate { id: TemplateId::Floor, text: FLOOR_PROMPT, question: "What is on the floor?" },
];

pub fn render_prompt(id: &str) -> Result<&'static str> {
    Ok(id.parse::<TemplateId>()?.template().text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_contain_their_questions() {
        for t in &TEMPLATES {
            assert!(t.text.contains(t.question));
            assert!(t.text.starts_with("A chat between a curious user and an extremely picky inspector for the R&D lab."));
            assert!(t.text.ends_with(": ASSISTANT:"));
            assert_eq!(t.id.as_str().parse::<TemplateId>().unwrap(), t.id);
        }
        assert!(matches!(render_prompt("bench"), Err(Error::UnknownTemplate(s)) if s == "bench"));
    }
}
